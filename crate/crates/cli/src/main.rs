use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use geofence_core::bench::{self, BenchConfig, BenchError, Distribution};
use geofence_core::bilinear::{GroupParams, DEFAULT_BITS};
use geofence_core::encoding::{self, AlertZone, Encoding, EncodingError, GridSpec, Shape};
use geofence_core::engine::{self, ZoneTokenSet};
use geofence_core::expansion::{self, ExpansionConfig, ExpansionError};
use geofence_core::hve::{self, Message, PublicKey, SecretKey, Token};
use geofence_core::minimize;

const SEED_ENV: &str = "GEOFENCE_SEED";

#[derive(Parser)]
#[command(name = "geofence", version, about = "Private location alerts over Hidden Vector Encryption")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair sized for a grid and encoding.
    Keygen(KeygenArgs),
    /// Encrypt user locations under a public key.
    Encrypt(EncryptArgs),
    /// Minimize an alert zone and issue its search tokens.
    Tokengen(TokengenArgs),
    /// Enlarge an alert zone to cut its pairing cost.
    Expand(ExpandArgs),
    /// Match encrypted locations against zone tokens.
    Match(MatchArgs),
    /// Run a synthetic benchmark and write a CSV report.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SeedArg {
    /// RNG seed; the GEOFENCE_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct KeygenArgs {
    #[arg(long)]
    grid: u32,
    #[arg(long, default_value = "gray", value_parser = parse_encoding)]
    encoding: Encoding,
    #[arg(long, default_value_t = DEFAULT_BITS)]
    bits: u32,
    #[command(flatten)]
    seed: SeedArg,
    /// Directory that receives `pk.hve` and `sk.hve`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncryptArgs {
    #[arg(long)]
    pk: PathBuf,
    #[arg(long)]
    grid: u32,
    #[arg(long, default_value = "gray", value_parser = parse_encoding)]
    encoding: Encoding,
    /// A location `x,y` in the unit square; repeatable. Users are numbered from 0.
    #[arg(long = "point", value_parser = parse_point)]
    points: Vec<(f64, f64)>,
    /// CSV file with `user,x,y` rows.
    #[arg(long)]
    users: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TokengenArgs {
    #[arg(long)]
    sk: PathBuf,
    /// Zone file (`ZONE v1`).
    #[arg(long)]
    zone: PathBuf,
    #[arg(long, default_value = "gray", value_parser = parse_encoding)]
    encoding: Encoding,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExpandArgs {
    #[arg(long)]
    zone: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value = "gray", value_parser = parse_encoding)]
    encoding: Encoding,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    /// Key file holding the group parameters (public or secret key).
    #[arg(long)]
    pk: PathBuf,
    /// Token file of one zone; repeatable. Zones are numbered from 0 in order.
    #[arg(long = "tokens", required = true)]
    tokens: Vec<PathBuf>,
    /// Ciphertext bundle written by `encrypt`.
    #[arg(long)]
    ciphertexts: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 64)]
    grid: u32,
    #[arg(long, default_value = "gray", value_parser = parse_encoding)]
    encoding: Encoding,
    #[arg(long, default_value_t = 0.04)]
    coverage: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value_t = DEFAULT_BITS)]
    bits: u32,
    /// square, rect or circle.
    #[arg(long, default_value = "square", value_parser = parse_shape)]
    shape: Shape,
    /// uniform or gaussian.
    #[arg(long, default_value = "uniform", value_parser = parse_dist)]
    dist: Distribution,
    #[arg(long, default_value_t = 100)]
    users: usize,
    /// Intended number of zones; sets the area of each zone.
    #[arg(long, default_value_t = 8)]
    zones: usize,
    /// Count pairings with the plaintext cost model instead of encrypting.
    #[arg(long)]
    cost_model: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Invalid user input; reported with exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct ConfigError(String);

fn config(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn parse_encoding(s: &str) -> Result<Encoding, String> {
    s.parse()
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.parse()
}

fn parse_dist(s: &str) -> Result<Distribution, String> {
    s.parse().map_err(|e: BenchError| e.to_string())
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok((p(x)?, p(y)?))
}

fn seed(arg: &SeedArg) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(arg.seed),
    }
}

fn grid(d: u32, enc: Encoding) -> Result<GridSpec> {
    let g = if enc == Encoding::Baseline {
        GridSpec::with_side(d)
    } else {
        GridSpec::new(d)
    };
    g.map_err(|e| config(e.to_string()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Group parameters from a public or secret key file.
fn key_params(text: &str) -> Result<GroupParams> {
    if text.trim_start().starts_with("HVESK") {
        Ok(*SecretKey::from_text(text)?.params())
    } else {
        Ok(*PublicKey::from_text(text)?.params())
    }
}

fn keygen(a: &KeygenArgs) -> Result<()> {
    let g = grid(a.grid, a.encoding)?;
    let width = encoding::width(&g, a.encoding)?;
    let seed = seed(&a.seed)?;
    let params = GroupParams::generate(a.bits, seed).map_err(|e| config(e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (pk, sk) = hve::setup(width, &params, &mut rng)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    fs::write(a.out.join("pk.hve"), pk.to_text())?;
    fs::write(a.out.join("sk.hve"), sk.to_text())?;
    eprintln!("width {width}, {}-bit primes, keys in {}", a.bits, a.out.display());
    Ok(())
}

fn read_users(path: &Path) -> Result<Vec<(u64, f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| config(format!("{}: {e}", path.display()))))
        .collect()
}

fn encrypt(a: &EncryptArgs) -> Result<()> {
    let pk = PublicKey::from_text(&read(&a.pk)?)?;
    let g = grid(a.grid, a.encoding)?;
    let width = encoding::width(&g, a.encoding)?;
    if width != pk.width() {
        return Err(config(format!(
            "public key width {} does not fit a {} grid under {} encoding (width {width})",
            pk.width(),
            a.grid,
            a.encoding
        )));
    }
    let mut users: Vec<(u64, f64, f64)> = a
        .points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| (i as u64, x, y))
        .collect();
    if let Some(path) = &a.users {
        users.extend(read_users(path)?);
    }
    if users.is_empty() {
        return Err(config("give at least one --point or a --users file"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed(&a.seed)?);
    let engine = engine::Engine::new(pk, Vec::new())?;
    let mut cts = Vec::with_capacity(users.len());
    for (id, x, y) in users {
        let cell = encoding::cell_of_point(&g, x, y).map_err(|e| config(e.to_string()))?;
        let index = encoding::index_vector(&g, cell, a.encoding)?;
        let message = u32::try_from(id).map_err(|_| config(format!("user id {id} exceeds u32")))?;
        cts.push((id, engine.encrypt(&index, Message(message), &mut rng)?));
    }
    emit(a.out.as_deref(), &hve::user_ciphertexts_to_text(&cts))
}

fn tokengen(a: &TokengenArgs) -> Result<()> {
    let mut sk = SecretKey::from_text(&read(&a.sk)?)?;
    let (g, zone) = AlertZone::from_text(&read(&a.zone)?).map_err(|e| config(e.to_string()))?;
    let width = encoding::width(&g, a.encoding)?;
    if width != sk.width() {
        return Err(config(format!(
            "secret key width {} does not match the zone grid under {} encoding (width {width})",
            sk.width(),
            a.encoding
        )));
    }
    let patterns = if a.encoding == Encoding::Baseline {
        vec![encoding::baseline_token(&g, &zone)?]
    } else {
        minimize::minimize_zone(&g, &zone, a.encoding)?.patterns()
    };
    sk.precompute()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed(&a.seed)?);
    let tokens = patterns
        .iter()
        .map(|p| hve::gen_token(&sk, p, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let set = ZoneTokenSet::new(0, tokens);
    let (nw, cost) = minimize::cover_cost(set.tokens().iter().map(Token::pattern));
    let mut text = format!("# {} tokens, {nw} non-wildcards, {cost} pairings\n", set.len());
    for t in set.tokens() {
        text.push_str(&t.to_text());
    }
    emit(a.out.as_deref(), &text)
}

fn expand(a: &ExpandArgs) -> Result<()> {
    let (g, zone) = AlertZone::from_text(&read(&a.zone)?).map_err(|e| config(e.to_string()))?;
    let cfg = ExpansionConfig {
        encoding: a.encoding,
        ..ExpansionConfig::default()
    };
    let out = expansion::expand_zone(a.alpha, &zone, &g, &cfg)?;
    eprintln!(
        "budget {}, added {} cells, pairings {} -> {} (factor {:.3})",
        out.budget,
        out.added(),
        out.pairings_before,
        out.pairings_after,
        out.improvement_factor()
    );
    emit(a.out.as_deref(), &out.to_zone(&g)?.to_text(&g))
}

fn run_match(a: &MatchArgs) -> Result<()> {
    if a.workers == 0 {
        return Err(config("--workers must be at least 1"));
    }
    let params = key_params(&read(&a.pk)?)?;
    let zones = a
        .tokens
        .iter()
        .enumerate()
        .map(|(i, p)| Ok(ZoneTokenSet::new(i as u64, Token::many_from_text(&read(p)?, &params)?)))
        .collect::<Result<Vec<_>>>()?;
    let cts = hve::user_ciphertexts_from_text(&read(&a.ciphertexts)?, &params)?;
    let run = engine::match_all(cts, &zones, a.workers)?;
    let mut buf = Vec::new();
    engine::write_results_csv(&mut buf, &run.results)?;
    eprintln!(
        "{} results, {} matches, {} pairings",
        run.results.len(),
        run.matches(),
        run.counters.pairings
    );
    emit(a.out.as_deref(), std::str::from_utf8(&buf)?)
}

fn run_bench(a: &BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        d: a.grid,
        encoding: a.encoding,
        coverage: a.coverage,
        distribution: a.dist,
        shape: a.shape,
        alpha: a.alpha,
        workers: a.workers,
        seed: seed(&a.seed)?,
        bits: a.bits,
        users: a.users,
        zones: a.zones,
        crypto: !a.cost_model,
    };
    let report = bench::run_bench(&cfg)?;
    emit(a.out.as_deref(), &report.to_csv_string())
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<ConfigError>()
            || matches!(c.downcast_ref::<BenchError>(), Some(BenchError::Config(_)))
            || c.is::<EncodingError>()
            || matches!(
                c.downcast_ref::<ExpansionError>(),
                Some(ExpansionError::BadAlpha(_) | ExpansionError::NotBaseLevel(_) | ExpansionError::Encoding(_))
            )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Keygen(a) => keygen(a),
        Command::Encrypt(a) => encrypt(a),
        Command::Tokengen(a) => tokengen(a),
        Command::Expand(a) => expand(a),
        Command::Match(a) => run_match(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
