//! Server-side matching: per-zone token stores and a coordinator that fans
//! `(ciphertext, zone)` tasks out to worker threads.

use std::cmp::Reverse;
use std::io;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::bounded;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bilinear::counters::{self, OpCounters};
use crate::hve::{
    self, pairing_cost, plain_match, Ciphertext, HveError, IndexVector, Message, Pattern, PublicKey, SecretKey, Token,
};
use crate::minimize::Cover;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("zone {zone}: token width {token} does not match ciphertext width {ciphertext}")]
    WidthMismatch {
        zone: u64,
        token: usize,
        ciphertext: usize,
    },
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error(transparent)]
    Hve(#[from] HveError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad outcome field {0:?}")]
    BadOutcome(String),
}

/// Tokens of one alert zone, stored most-wildcards first so that broad
/// tokens are tried before narrow ones.
#[derive(Clone, Debug)]
pub struct ZoneTokenSet {
    id: u64,
    tokens: Vec<Token>,
    budget: u64,
}

impl ZoneTokenSet {
    pub fn new(id: u64, mut tokens: Vec<Token>) -> Self {
        tokens.sort_by_cached_key(|t| token_order(t.pattern()));
        let budget = tokens.iter().map(Token::pairing_cost).sum();
        Self { id, tokens, budget }
    }

    /// Issues one token per cube of `cover`.
    pub fn issue<R: Rng + ?Sized>(
        id: u64,
        sk: &SecretKey,
        cover: &Cover,
        rng: &mut R,
    ) -> Result<Self, EngineError> {
        let tokens = cover
            .patterns()
            .iter()
            .map(|p| hve::gen_token(sk, p, rng))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(id, tokens))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Pairings needed when every token is tried.
    pub fn pairing_budget(&self) -> u64 {
        self.budget
    }
}

/// Sort key for a zone's tokens: more wildcards first, then the pattern
/// text (`*` < `0` < `1`).
pub fn token_order(p: &Pattern) -> (Reverse<usize>, String) {
    (Reverse(p.star_count()), p.to_string())
}

/// Plaintext cost model of [`match_user_zone`]: whether `index` matches any
/// of `patterns` and how many pairings the early-exit scan would spend.
/// `patterns` must already be in [`token_order`].
pub fn simulate_match(index: &IndexVector, patterns: &[Pattern]) -> Result<(bool, u64), EngineError> {
    let mut pairings = 0;
    for p in patterns {
        pairings += pairing_cost(p);
        if plain_match(index, p)? {
            return Ok((true, pairings));
        }
    }
    Ok((false, pairings))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Match(Message),
    NonMatch,
}

impl Outcome {
    pub fn is_match(&self) -> bool {
        matches!(self, Outcome::Match(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatchResult {
    pub user: u64,
    pub zone: u64,
    pub outcome: Outcome,
    pub pairings: u64,
    pub micros: u64,
}

impl MatchResult {
    /// Everything except the timing, for comparing runs.
    pub fn key(&self) -> (u64, u64, Outcome, u64) {
        (self.user, self.zone, self.outcome, self.pairings)
    }
}

/// Tries the zone's tokens in stored order and stops at the first match.
pub fn match_user_zone(user: u64, c: &Ciphertext, z: &ZoneTokenSet) -> Result<MatchResult, EngineError> {
    let start = Instant::now();
    let before = counters::snapshot().pairings;
    let mut outcome = Outcome::NonMatch;
    for token in &z.tokens {
        if token.width() != c.width() {
            return Err(EngineError::WidthMismatch {
                zone: z.id,
                token: token.width(),
                ciphertext: c.width(),
            });
        }
        if let Some(m) = hve::query(token, c)? {
            outcome = Outcome::Match(m);
            break;
        }
    }
    Ok(MatchResult {
        user,
        zone: z.id,
        outcome,
        pairings: counters::snapshot().pairings - before,
        micros: start.elapsed().as_micros() as u64,
    })
}

/// Results of a [`match_all`] run, sorted by `(user, zone)`.
#[derive(Clone, Debug, Default)]
pub struct MatchRun {
    pub results: Vec<MatchResult>,
    /// Operation counts summed over all workers.
    pub counters: OpCounters,
    pub elapsed: Duration,
}

impl MatchRun {
    pub fn matches(&self) -> usize {
        self.results.iter().filter(|r| r.outcome.is_match()).count()
    }

    pub fn total_pairings(&self) -> u64 {
        self.results.iter().map(|r| r.pairings).sum()
    }
}

/// Matches every ciphertext against every zone on `workers` threads.
///
/// The calling thread acts as coordinator: it feeds `(ciphertext, zone)`
/// tasks into a bounded queue that idle workers pull from, then gathers and
/// sorts their results.
pub fn match_all<I>(ciphertexts: I, zones: &[ZoneTokenSet], workers: usize) -> Result<MatchRun, EngineError>
where
    I: IntoIterator<Item = (u64, Ciphertext)>,
{
    if workers == 0 {
        return Err(EngineError::NoWorkers);
    }
    let start = Instant::now();
    let (task_tx, task_rx) = bounded::<(u64, Arc<Ciphertext>, usize)>(workers * 4);
    type WorkerOut = Result<(Vec<MatchResult>, OpCounters), EngineError>;

    let outputs: Vec<WorkerOut> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                let rx = task_rx.clone();
                s.spawn(move || -> WorkerOut {
                    let before = counters::snapshot();
                    let mut out = Vec::new();
                    let mut failure = None;
                    // Keep draining after an error so the coordinator never blocks.
                    for (user, c, zi) in rx.iter() {
                        if failure.is_some() {
                            continue;
                        }
                        match match_user_zone(user, &c, &zones[zi]) {
                            Ok(r) => out.push(r),
                            Err(e) => failure = Some(e),
                        }
                    }
                    match failure {
                        Some(e) => Err(e),
                        None => Ok((out, counters::snapshot() - before)),
                    }
                })
            })
            .collect();
        drop(task_rx);
        for (user, c) in ciphertexts {
            let c = Arc::new(c);
            for zi in 0..zones.len() {
                if task_tx.send((user, Arc::clone(&c), zi)).is_err() {
                    break;
                }
            }
        }
        drop(task_tx);
        handles
            .into_iter()
            .map(|h| h.join().expect("matching worker panicked"))
            .collect()
    });

    let mut run = MatchRun::default();
    for out in outputs {
        let (results, ops) = out?;
        run.results.extend(results);
        run.counters += ops;
    }
    run.results.sort_by_key(|r| (r.user, r.zone));
    run.elapsed = start.elapsed();
    Ok(run)
}

/// Public key with power tables built once, plus the zones served.
pub struct Engine {
    pk: PublicKey,
    zones: Vec<ZoneTokenSet>,
}

impl Engine {
    pub fn new(mut pk: PublicKey, zones: Vec<ZoneTokenSet>) -> Result<Self, EngineError> {
        pk.precompute()?;
        Ok(Self { pk, zones })
    }

    /// Same as [`Engine::new`] without the power tables.
    pub fn without_tables(mut pk: PublicKey, zones: Vec<ZoneTokenSet>) -> Self {
        pk.drop_tables();
        Self { pk, zones }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    pub fn zones(&self) -> &[ZoneTokenSet] {
        &self.zones
    }

    pub fn encrypt<R: Rng + ?Sized>(
        &self,
        index: &IndexVector,
        message: Message,
        rng: &mut R,
    ) -> Result<Ciphertext, EngineError> {
        Ok(hve::encrypt(&self.pk, index, message, rng)?)
    }

    pub fn run<I>(&self, ciphertexts: I, workers: usize) -> Result<MatchRun, EngineError>
    where
        I: IntoIterator<Item = (u64, Ciphertext)>,
    {
        match_all(ciphertexts, &self.zones, workers)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    user: u64,
    zone: u64,
    outcome: String,
    pairings: u64,
    micros: u64,
}

/// Writes `user,zone,outcome,pairings,micros` rows with a header. The outcome
/// column is `match:<message>` or `nonmatch`.
pub fn write_results_csv<W: io::Write>(w: W, results: &[MatchResult]) -> Result<(), EngineError> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in results {
        wtr.serialize(Row {
            user: r.user,
            zone: r.zone,
            outcome: match r.outcome {
                Outcome::Match(m) => format!("match:{}", m.0),
                Outcome::NonMatch => "nonmatch".into(),
            },
            pairings: r.pairings,
            micros: r.micros,
        })?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_results_csv<R: io::Read>(r: R) -> Result<Vec<MatchResult>, EngineError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: Row = row?;
        let outcome = match row.outcome.as_str() {
            "nonmatch" => Outcome::NonMatch,
            s => match s.strip_prefix("match:").and_then(|m| m.parse().ok()) {
                Some(m) => Outcome::Match(Message(m)),
                None => return Err(EngineError::BadOutcome(row.outcome)),
            },
        };
        out.push(MatchResult {
            user: row.user,
            zone: row.zone,
            outcome,
            pairings: row.pairings,
            micros: row.micros,
        });
    }
    Ok(out)
}
