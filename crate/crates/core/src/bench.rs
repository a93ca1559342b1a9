//! Synthetic workloads and the benchmark report.
//!
//! A run generates alert zones and users from a seed, optionally enlarges the
//! zones, minimizes them into tokens and matches every user against every
//! zone. With `crypto` off the query phase uses the plaintext cost model,
//! which reports the exact pairing counts the encrypted path would spend.

use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bilinear::{counters, GroupError, GroupParams};
use crate::encoding::{self, AlertZone, CellId, Encoding, EncodingError, GridSpec, Shape};
use crate::engine::{self, EngineError, ZoneTokenSet};
use crate::expansion::{self, ExpansionConfig, ExpansionError};
use crate::hve::{self, HveError, IndexVector, Message, Pattern};
use crate::minimize::{self, MinimizeError};

/// Standard deviation of Gaussian zone centers, as a fraction of `d`.
pub const GAUSSIAN_SIGMA: f64 = 1.0 / 8.0;
/// Width-to-height ratio of rectangular zones.
pub const RECT_SKEW: f64 = 2.5;
/// Expansion ratios accepted by [`BenchConfig::validate`].
pub const ALPHAS: [f64; 6] = [0.0, 0.02, 0.04, 0.06, 0.08, 0.10];
/// Largest grid for runs that perform the encrypted query.
pub const MAX_CRYPTO_SIDE: u32 = 256;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Minimize(#[from] MinimizeError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Hve(#[from] HveError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Distribution {
    #[default]
    Uniform,
    Gaussian,
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::Uniform => "uniform",
            Distribution::Gaussian => "gaussian",
        })
    }
}

impl FromStr for Distribution {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Distribution::Uniform),
            "gaussian" | "normal" => Ok(Distribution::Gaussian),
            other => Err(BenchError::Config(format!("unknown distribution {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub d: u32,
    pub encoding: Encoding,
    /// Fraction of the grid covered by the union of all zones.
    pub coverage: f64,
    pub distribution: Distribution,
    pub shape: Shape,
    pub alpha: f64,
    pub workers: usize,
    pub seed: u64,
    pub bits: u32,
    pub users: usize,
    /// Intended number of zones; sets the area of each one.
    pub zones: usize,
    /// Run the encrypted path. Off means pairing counts come from the
    /// plaintext cost model.
    pub crypto: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            d: 64,
            encoding: Encoding::Gray,
            coverage: 0.04,
            distribution: Distribution::Uniform,
            shape: Shape::Square,
            alpha: 0.0,
            workers: 1,
            seed: 1,
            bits: crate::bilinear::DEFAULT_BITS,
            users: 100,
            zones: 8,
            crypto: true,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if !(2..=encoding::MAX_SIDE).contains(&self.d) || !self.d.is_power_of_two() {
            return bad(format!("grid size {} must be a power of two in 2..=1024", self.d));
        }
        if self.crypto && self.d > MAX_CRYPTO_SIDE {
            return bad(format!(
                "encrypted runs are limited to d <= {MAX_CRYPTO_SIDE}; disable crypto for larger grids"
            ));
        }
        if !(0.01 - 1e-9..=0.10 + 1e-9).contains(&self.coverage) {
            return bad(format!("coverage {} is outside [0.01, 0.10]", self.coverage));
        }
        if !ALPHAS.iter().any(|a| (a - self.alpha).abs() < 1e-9) {
            return bad(format!("alpha {} is not one of {ALPHAS:?}", self.alpha));
        }
        if self.alpha > 0.0 && self.encoding == Encoding::Baseline {
            return bad("zone expansion needs the hierarchical or Gray encoding".into());
        }
        if self.shape == Shape::Freeform {
            return bad("zone shape must be square, rect or circle".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.zones == 0 {
            return bad("zone count must be at least 1".into());
        }
        if !(crate::bilinear::MIN_BITS..=63).contains(&self.bits) {
            return bad(format!("bits {} is outside {}..=63", self.bits, crate::bilinear::MIN_BITS));
        }
        Ok(())
    }

    /// Cells needed to reach the requested coverage.
    pub fn target_cells(&self) -> usize {
        (self.coverage * f64::from(self.d * self.d)).ceil() as usize
    }

    /// Nominal area of one zone.
    pub fn zone_area(&self) -> usize {
        ((self.coverage * f64::from(self.d * self.d)) / self.zones as f64).round().max(1.0) as usize
    }
}

/// Cell offsets of a zone of roughly `area` cells, anchored at `(0, 0)`,
/// and its bounding box.
pub fn shape_cells(shape: Shape, area: usize) -> (Vec<(u32, u32)>, u32, u32) {
    let a = area.max(1) as f64;
    let rect = |w: u32, h: u32| {
        let cells = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).collect();
        (cells, w, h)
    };
    match shape {
        Shape::Square | Shape::Freeform => {
            let s = a.sqrt().round().max(1.0) as u32;
            rect(s, s)
        }
        Shape::Rectangular => {
            let h = (a / RECT_SKEW).sqrt().round().max(1.0);
            let w = (a / h).round().max(1.0);
            rect(w as u32, h as u32)
        }
        Shape::Circular => {
            let r = (a / std::f64::consts::PI).sqrt();
            let c = r.ceil() as i64;
            let side = (2 * c + 1) as u32;
            let cells = (-c..=c)
                .flat_map(|dy| (-c..=c).map(move |dx| (dx, dy)))
                .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64) <= r * r)
                .map(|(dx, dy)| ((dx + c) as u32, (dy + c) as u32))
                .collect();
            (cells, side, side)
        }
    }
}

fn sample_center<R: Rng + ?Sized>(dist: Distribution, d: u32, rng: &mut R) -> (f64, f64) {
    let d = f64::from(d);
    match dist {
        Distribution::Uniform => (rng.random_range(0.0..d), rng.random_range(0.0..d)),
        Distribution::Gaussian => {
            let n = Normal::new(d / 2.0, d * GAUSSIAN_SIGMA).expect("positive sigma");
            (n.sample(rng), n.sample(rng))
        }
    }
}

/// Places zones until their union covers at least `cfg.target_cells()`.
/// Zones are kept whole by shifting them inside the grid.
pub fn gen_zones<R: Rng + ?Sized>(cfg: &BenchConfig, rng: &mut R) -> Result<Vec<AlertZone>, BenchError> {
    cfg.validate()?;
    let grid = GridSpec::new(cfg.d)?;
    let (offsets, w, h) = shape_cells(cfg.shape, cfg.zone_area());
    if w > cfg.d || h > cfg.d {
        return Err(BenchError::Config(format!(
            "a {w}x{h} zone does not fit in a {0}x{0} grid",
            cfg.d
        )));
    }
    let target = cfg.target_cells();
    let mut covered: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut zones = Vec::new();
    let max_attempts = 1000 * target.max(1);
    for _ in 0..max_attempts {
        if covered.len() >= target {
            return Ok(zones);
        }
        let (cx, cy) = sample_center(cfg.distribution, cfg.d, rng);
        let place = |c: f64, extent: u32| {
            (c - f64::from(extent) / 2.0)
                .round()
                .clamp(0.0, f64::from(cfg.d - extent)) as u32
        };
        let (x0, y0) = (place(cx, w), place(cy, h));
        let cells: Vec<(u32, u32)> = offsets.iter().map(|&(x, y)| (x0 + x, y0 + y)).collect();
        covered.extend(cells.iter().copied());
        zones.push(AlertZone::from_xy(&grid, cells, cfg.shape)?);
    }
    Err(BenchError::Config(format!(
        "coverage {} not reached after {max_attempts} zones",
        cfg.coverage
    )))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct User {
    pub id: u64,
    pub x: f64,
    pub y: f64,
}

/// `n` users at uniform positions in the unit square.
pub fn gen_users<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<User> {
    (0..n as u64)
        .map(|id| User {
            id,
            x: rng.random_range(0.0..1.0),
            y: rng.random_range(0.0..1.0),
        })
        .collect()
}

/// One random-walk tick: each user moves at most one cell width in a random
/// direction and stays inside the unit square.
pub fn random_walk<R: Rng + ?Sized>(users: &mut [User], d: u32, rng: &mut R) {
    let step = 1.0 / f64::from(d);
    let upper = 1.0 - f64::EPSILON;
    for u in users {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let len = rng.random_range(0.0..=step);
        u.x = (u.x + len * angle.cos()).clamp(0.0, upper);
        u.y = (u.y + len * angle.sin()).clamp(0.0, upper);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Expansion,
    Tokengen,
    Encryption,
    Query,
}

/// One CSV row of a report. Columns that do not apply to a phase are 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub phase: Phase,
    pub micros: u64,
    pub pairings: u64,
    pub exponentiations: u64,
    pub table_hits: u64,
    pub tokens: u64,
    pub non_wildcards: u64,
    pub zone_cells: u64,
    pub matches: u64,
    /// Query pairings without expansion divided by pairings with it.
    pub improvement: f64,
}

impl PhaseRow {
    fn new(phase: Phase) -> Self {
        Self {
            phase,
            micros: 0,
            pairings: 0,
            exponentiations: 0,
            table_hits: 0,
            tokens: 0,
            non_wildcards: 0,
            zone_cells: 0,
            matches: 0,
            improvement: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub zones: usize,
    pub rows: Vec<PhaseRow>,
}

impl BenchReport {
    pub fn row(&self, phase: Phase) -> Option<&PhaseRow> {
        self.rows.iter().find(|r| r.phase == phase)
    }

    /// Writes `# key=value` header lines followed by the CSV table.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> Result<(), BenchError> {
        let c = &self.config;
        writeln!(w, "# geofence-bench v1")?;
        for (k, v) in [
            ("d", c.d.to_string()),
            ("encoding", c.encoding.to_string()),
            ("coverage", c.coverage.to_string()),
            ("dist", c.distribution.to_string()),
            ("shape", c.shape.to_string()),
            ("alpha", c.alpha.to_string()),
            ("workers", c.workers.to_string()),
            ("seed", c.seed.to_string()),
            ("bits", c.bits.to_string()),
            ("users", c.users.to_string()),
            ("zones", c.zones.to_string()),
            ("crypto", c.crypto.to_string()),
            ("gaussian_sigma", format!("{GAUSSIAN_SIGMA}*d")),
            ("rect_skew", RECT_SKEW.to_string()),
            ("zones_generated", self.zones.to_string()),
        ] {
            writeln!(w, "# {k}={v}")?;
        }
        let mut wtr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, BenchError> {
        let mut c = BenchConfig::default();
        let mut zones = 0;
        let mut body = String::new();
        let bad = |k: &str, v: &str| BenchError::Report(format!("bad value {v:?} for {k}"));
        for line in text.lines() {
            let Some(meta) = line.strip_prefix('#') else {
                body.push_str(line);
                body.push('\n');
                continue;
            };
            let Some((k, v)) = meta.trim().split_once('=') else {
                continue;
            };
            match k {
                "d" => c.d = v.parse().map_err(|_| bad(k, v))?,
                "encoding" => c.encoding = v.parse().map_err(|_| bad(k, v))?,
                "coverage" => c.coverage = v.parse().map_err(|_| bad(k, v))?,
                "dist" => c.distribution = v.parse()?,
                "shape" => c.shape = v.parse().map_err(|_| bad(k, v))?,
                "alpha" => c.alpha = v.parse().map_err(|_| bad(k, v))?,
                "workers" => c.workers = v.parse().map_err(|_| bad(k, v))?,
                "seed" => c.seed = v.parse().map_err(|_| bad(k, v))?,
                "bits" => c.bits = v.parse().map_err(|_| bad(k, v))?,
                "users" => c.users = v.parse().map_err(|_| bad(k, v))?,
                "zones" => c.zones = v.parse().map_err(|_| bad(k, v))?,
                "crypto" => c.crypto = v.parse().map_err(|_| bad(k, v))?,
                "zones_generated" => zones = v.parse().map_err(|_| bad(k, v))?,
                _ => {}
            }
        }
        let rows = csv::Reader::from_reader(body.as_bytes())
            .deserialize()
            .collect::<Result<Vec<PhaseRow>, _>>()?;
        Ok(Self { config: c, zones, rows })
    }
}

/// Token patterns of one zone, in the order the engine tries them.
#[derive(Clone, Debug)]
struct ZonePatterns {
    id: u64,
    patterns: Vec<Pattern>,
}

fn zone_patterns(
    grid: &GridSpec,
    zones: &[AlertZone],
    enc: Encoding,
) -> Result<Vec<ZonePatterns>, BenchError> {
    if enc == Encoding::Baseline {
        // One token covers every zone.
        let union = AlertZone::new(grid, zones.iter().flat_map(|z| z.cells().iter().copied()), Shape::Freeform)?;
        return Ok(vec![ZonePatterns {
            id: 0,
            patterns: vec![encoding::baseline_token(grid, &union)?],
        }]);
    }
    zones
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let mut patterns = minimize::minimize_zone(grid, z, enc)?.patterns();
            patterns.sort_by_cached_key(engine::token_order);
            Ok(ZonePatterns { id: i as u64, patterns })
        })
        .collect()
}

fn simulate(indexes: &[IndexVector], zones: &[ZonePatterns]) -> Result<(u64, u64), BenchError> {
    let (mut pairings, mut matches) = (0, 0);
    for index in indexes {
        for z in zones {
            let (hit, cost) = engine::simulate_match(index, &z.patterns)?;
            pairings += cost;
            matches += u64::from(hit);
        }
    }
    Ok((pairings, matches))
}

fn union_cells(zones: &[AlertZone]) -> u64 {
    zones
        .iter()
        .flat_map(|z| z.cells().iter().copied())
        .collect::<BTreeSet<CellId>>()
        .len() as u64
}

fn totals(zones: &[ZonePatterns]) -> (u64, u64) {
    let tokens = zones.iter().map(|z| z.patterns.len() as u64).sum();
    let nw = zones
        .iter()
        .flat_map(|z| &z.patterns)
        .map(|p| p.non_wildcards() as u64)
        .sum();
    (tokens, nw)
}

/// Runs the whole pipeline for one configuration.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    let grid = GridSpec::new(cfg.d)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let zones = gen_zones(cfg, &mut rng)?;
    let mut users = gen_users(cfg.users, &mut rng);
    random_walk(&mut users, cfg.d, &mut rng);
    let indexes = users
        .iter()
        .map(|u| encoding::index_vector(&grid, encoding::cell_of_point(&grid, u.x, u.y)?, cfg.encoding))
        .collect::<Result<Vec<_>, _>>()?;

    // Expansion, scored with the plaintext cost model on the same users.
    let mut expansion = PhaseRow::new(Phase::Expansion);
    let final_zones = if cfg.alpha > 0.0 {
        let original = zone_patterns(&grid, &zones, cfg.encoding)?;
        let start = Instant::now();
        let ecfg = ExpansionConfig {
            encoding: cfg.encoding,
            ..ExpansionConfig::default()
        };
        let expanded = zones
            .iter()
            .map(|z| expansion::expand_zone(cfg.alpha, z, &grid, &ecfg)?.to_zone(&grid).map_err(BenchError::from))
            .collect::<Result<Vec<_>, BenchError>>()?;
        expansion.micros = start.elapsed().as_micros() as u64;
        let (before, _) = simulate(&indexes, &original)?;
        let (after, _) = simulate(&indexes, &zone_patterns(&grid, &expanded, cfg.encoding)?)?;
        expansion.improvement = if after == 0 { 1.0 } else { before as f64 / after as f64 };
        expanded
    } else {
        zones.clone()
    };
    expansion.zone_cells = union_cells(&final_zones);

    let mut tokengen = PhaseRow::new(Phase::Tokengen);
    let mut encryption = PhaseRow::new(Phase::Encryption);
    let mut query = PhaseRow::new(Phase::Query);
    let start = Instant::now();
    let patterns = zone_patterns(&grid, &final_zones, cfg.encoding)?;
    let (tokens, nw) = totals(&patterns);
    for row in [&mut tokengen, &mut expansion, &mut query] {
        row.tokens = tokens;
        row.non_wildcards = nw;
        row.zone_cells = union_cells(&final_zones);
    }

    if cfg.crypto {
        let params = GroupParams::generate(cfg.bits, cfg.seed)?;
        let width = encoding::width(&grid, cfg.encoding)?;
        let (pk, mut sk) = hve::setup(width, &params, &mut rng)?;
        sk.precompute()?;
        counters::reset();
        let sets = patterns
            .iter()
            .map(|z| {
                let tokens = z
                    .patterns
                    .iter()
                    .map(|p| hve::gen_token(&sk, p, &mut rng))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ZoneTokenSet::new(z.id, tokens))
            })
            .collect::<Result<Vec<_>, BenchError>>()?;
        let ops = counters::take();
        tokengen.micros = start.elapsed().as_micros() as u64;
        tokengen.exponentiations = ops.exponentiations;
        tokengen.table_hits = ops.table_hits;

        let engine = engine::Engine::new(pk, sets)?;
        let start = Instant::now();
        counters::reset();
        let cts = users
            .iter()
            .zip(&indexes)
            .map(|(u, i)| Ok((u.id, engine.encrypt(i, Message(u.id as u32), &mut rng)?)))
            .collect::<Result<Vec<_>, BenchError>>()?;
        let ops = counters::take();
        encryption.micros = start.elapsed().as_micros() as u64;
        encryption.exponentiations = ops.exponentiations;
        encryption.table_hits = ops.table_hits;

        let run = engine.run(cts, cfg.workers)?;
        query.micros = run.elapsed.as_micros() as u64;
        query.pairings = run.counters.pairings;
        query.matches = run.matches() as u64;
    } else {
        tokengen.micros = start.elapsed().as_micros() as u64;
        let start = Instant::now();
        let (pairings, matches) = simulate(&indexes, &patterns)?;
        query.micros = start.elapsed().as_micros() as u64;
        query.pairings = pairings;
        query.matches = matches;
    }
    query.improvement = expansion.improvement;

    Ok(BenchReport {
        config: cfg.clone(),
        zones: zones.len(),
        rows: vec![expansion, tokengen, encryption, query],
    })
}
