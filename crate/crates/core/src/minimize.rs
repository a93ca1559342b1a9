//! Two-level minimization of a cell-ID set into wildcard patterns.
//!
//! The input is an ON-set of `w`-bit codes; everything else is OFF (no
//! don't-cares, since a `*` spanning a non-zone cell would raise false
//! alerts). Prime implicants come from Quine–McCluskey merging. When the
//! implicant table would grow past [`QM_IMPLICANT_CAP`], primes are instead
//! obtained by raising each uncovered minterm's literals one at a time while
//! the cube stays inside the ON-set, as Espresso's EXPAND step does. Either
//! way the cover is then chosen from the primes: essential primes first, then
//! greedy picks by most new minterms covered, then a pass that drops any
//! pick made redundant by later ones.
//!
//! Output is exact (the union of the patterns is the ON-set) and every
//! pattern is prime. Minimum cardinality is not guaranteed.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::encoding::{self, AlertZone, Encoding, EncodingError, GridSpec};
use crate::hve::{pairing_cost, Pattern, Symbol};

/// Widest supported code.
pub const MAX_WIDTH: u32 = 32;
/// Implicant count above which prime generation switches to literal raising.
pub const QM_IMPLICANT_CAP: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinimizeError {
    #[error("cannot minimize an empty set")]
    Empty,
    #[error("inconsistent widths: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("width {0} exceeds the supported maximum of 32")]
    TooWide(usize),
    #[error("code {code:#x} does not fit in {width} bits")]
    CodeTooWide { code: u64, width: u32 },
    #[error("character {0:?} is not a bit")]
    NotABit(char),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("PLA: {0}")]
    Pla(String),
}

/// A product term: bits set in `mask` are wildcards, the remaining bits
/// must equal `value`. Wildcard bits of `value` are kept at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    pub value: u64,
    pub mask: u64,
}

impl Cube {
    pub fn minterm(value: u64) -> Self {
        Self { value, mask: 0 }
    }

    pub fn new(value: u64, mask: u64) -> Self {
        Self {
            value: value & !mask,
            mask,
        }
    }

    pub fn stars(&self) -> u32 {
        self.mask.count_ones()
    }

    pub fn non_wildcards(&self, width: u32) -> u32 {
        width - self.stars()
    }

    pub fn contains(&self, code: u64) -> bool {
        code & !self.mask == self.value
    }

    pub fn size(&self) -> u64 {
        1 << self.stars()
    }

    /// All codes matched by the cube.
    pub fn minterms(&self) -> impl Iterator<Item = u64> {
        let (value, mask) = (self.value, self.mask);
        let mut sub = Some(mask);
        std::iter::from_fn(move || {
            let s = sub?;
            sub = if s == 0 { None } else { Some((s - 1) & mask) };
            Some(value | s)
        })
    }

    pub fn to_pattern(&self, width: u32) -> Pattern {
        Pattern::new(
            (0..width)
                .rev()
                .map(|i| {
                    if self.mask >> i & 1 == 1 {
                        Symbol::Star
                    } else if self.value >> i & 1 == 1 {
                        Symbol::One
                    } else {
                        Symbol::Zero
                    }
                })
                .collect(),
        )
    }

    pub fn from_pattern(p: &Pattern) -> Result<Self, MinimizeError> {
        if p.width() > MAX_WIDTH as usize {
            return Err(MinimizeError::TooWide(p.width()));
        }
        let (mut value, mut mask) = (0u64, 0u64);
        for s in p.symbols() {
            value <<= 1;
            mask <<= 1;
            match s {
                Symbol::One => value |= 1,
                Symbol::Star => mask |= 1,
                Symbol::Zero => {}
            }
        }
        Ok(Self { value, mask })
    }

    /// Sort key matching the character order `* < 0 < 1`, first position
    /// most significant.
    fn lex_key(&self, width: u32) -> u64 {
        (0..width).rev().fold(0u64, |acc, i| {
            let digit = if self.mask >> i & 1 == 1 {
                0
            } else {
                1 + (self.value >> i & 1)
            };
            acc * 3 + digit
        })
    }
}

/// A set of cubes over a fixed width, ordered by descending wildcard count
/// and then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cover {
    width: u32,
    cubes: Vec<Cube>,
}

impl Cover {
    pub fn new(width: u32, mut cubes: Vec<Cube>) -> Self {
        sort_cubes(&mut cubes, width);
        cubes.dedup();
        Self { width, cubes }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn patterns(&self) -> Vec<Pattern> {
        self.cubes.iter().map(|c| c.to_pattern(self.width)).collect()
    }

    pub fn covers(&self, code: u64) -> bool {
        self.cubes.iter().any(|c| c.contains(code))
    }

    /// Total number of fixed positions across all patterns.
    pub fn non_wildcards(&self) -> u64 {
        self.cubes
            .iter()
            .map(|c| u64::from(c.non_wildcards(self.width)))
            .sum()
    }

    /// Pairings to evaluate every pattern once: `Σ (1 + 2·|J|)`.
    pub fn pairing_cost(&self) -> u64 {
        self.len() as u64 + 2 * self.non_wildcards()
    }

    /// Every code matched by some pattern.
    pub fn expand(&self) -> BTreeSet<u64> {
        self.cubes.iter().flat_map(|c| c.minterms()).collect()
    }

    /// Espresso-style PLA listing of the cover, `-` marking wildcards.
    pub fn to_pla(&self) -> String {
        let rows: Vec<String> = self
            .patterns()
            .iter()
            .map(|p| p.to_string().replace('*', "-"))
            .collect();
        pla_text(self.width, &rows)
    }
}

impl fmt::Display for Cover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.patterns().iter().map(Pattern::to_string).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

fn sort_cubes(cubes: &mut [Cube], width: u32) {
    cubes.sort_by_key(|c| (Reverse(c.stars()), c.lex_key(width)));
}

/// `(total non-wildcards, Σ pairing cost)` of a set of patterns.
pub fn cover_cost<'a>(patterns: impl IntoIterator<Item = &'a Pattern>) -> (u64, u64) {
    patterns.into_iter().fold((0, 0), |(nw, pc), p| {
        (nw + p.non_wildcards() as u64, pc + pairing_cost(p))
    })
}

/// All completions of a pattern.
pub fn expand_pattern(p: &Pattern) -> BTreeSet<String> {
    let mut out = vec![String::with_capacity(p.width())];
    for s in p.symbols() {
        out = match s {
            Symbol::Star => out
                .into_iter()
                .flat_map(|prefix| ['0', '1'].map(|b| format!("{prefix}{b}")))
                .collect(),
            _ => out
                .into_iter()
                .map(|mut prefix| {
                    prefix.push(s.as_char());
                    prefix
                })
                .collect(),
        };
    }
    out.into_iter().collect()
}

fn parse_bits(s: &str) -> Result<u64, MinimizeError> {
    s.chars().try_fold(0u64, |acc, c| match c {
        '0' => Ok(acc << 1),
        '1' => Ok(acc << 1 | 1),
        other => Err(MinimizeError::NotABit(other)),
    })
}

/// Minimizes a set of equal-length bit strings.
pub fn minimize(cells: &BTreeSet<String>) -> Result<Cover, MinimizeError> {
    let width = cells.first().ok_or(MinimizeError::Empty)?.len();
    if width > MAX_WIDTH as usize {
        return Err(MinimizeError::TooWide(width));
    }
    let codes = cells
        .iter()
        .map(|s| {
            if s.len() != width {
                return Err(MinimizeError::WidthMismatch {
                    expected: width,
                    found: s.len(),
                });
            }
            parse_bits(s)
        })
        .collect::<Result<Vec<_>, _>>()?;
    minimize_codes(&codes, width as u32)
}

/// Minimizes a set of `width`-bit codes.
pub fn minimize_codes(codes: &[u64], width: u32) -> Result<Cover, MinimizeError> {
    if codes.is_empty() {
        return Err(MinimizeError::Empty);
    }
    if width > MAX_WIDTH {
        return Err(MinimizeError::TooWide(width as usize));
    }
    let limit = (1u64 << width) - 1;
    if let Some(&code) = codes.iter().find(|&&c| c > limit) {
        return Err(MinimizeError::CodeTooWide { code, width });
    }
    let mut on: Vec<u64> = codes.to_vec();
    on.sort_unstable();
    on.dedup();
    if on.len() as u64 == 1u64 << width {
        return Ok(Cover::new(width, vec![Cube::new(0, limit)]));
    }
    let primes = match qm_primes(&on, width, QM_IMPLICANT_CAP) {
        Some(p) => p,
        None => raised_primes(&on, width),
    };
    Ok(Cover::new(width, select_cover(&on, primes, width)))
}

/// Minimizes a zone's cell codes under a hierarchical or Gray encoding.
/// The grid is taken at the zone's level.
pub fn minimize_zone(
    grid: &GridSpec,
    zone: &AlertZone,
    encoding: Encoding,
) -> Result<Cover, MinimizeError> {
    let codes = encoding::zone_codes(grid, zone, encoding)?;
    minimize_codes(&codes, 2 * (grid.log2()? - zone.level()))
}

/// Prime implicants by iterated pairwise merging, or `None` once more than
/// `cap` implicants have been generated.
pub fn qm_primes(on: &[u64], width: u32, cap: usize) -> Option<Vec<Cube>> {
    let mut current: FxHashSet<Cube> = on.iter().map(|&c| Cube::minterm(c)).collect();
    let mut primes = Vec::new();
    let mut generated = current.len();
    while !current.is_empty() {
        let mut next = FxHashSet::default();
        let mut merged = FxHashSet::default();
        for c in &current {
            for b in 0..width {
                let bit = 1u64 << b;
                if (c.mask | c.value) & bit != 0 {
                    continue;
                }
                let partner = Cube {
                    value: c.value | bit,
                    mask: c.mask,
                };
                if current.contains(&partner) {
                    next.insert(Cube {
                        value: c.value,
                        mask: c.mask | bit,
                    });
                    merged.insert(*c);
                    merged.insert(partner);
                }
            }
        }
        primes.extend(current.iter().filter(|c| !merged.contains(c)));
        generated += next.len();
        if generated > cap {
            return None;
        }
        current = next;
    }
    Some(primes)
}

/// One prime per minterm not yet covered, grown by raising literals from the
/// least significant bit upwards while the cube stays inside the ON-set.
///
/// A literal that cannot be raised at some point cannot be raised later
/// either (the cube only grows), so one pass yields a prime.
pub fn raised_primes(on: &[u64], width: u32) -> Vec<Cube> {
    let on_set: FxHashSet<u64> = on.iter().copied().collect();
    let mut primes: FxHashSet<Cube> = FxHashSet::default();
    let mut covered: FxHashSet<u64> = FxHashSet::default();
    for &m in on {
        if covered.contains(&m) {
            continue;
        }
        let mut cube = Cube::minterm(m);
        for b in 0..width {
            let wider = Cube::new(cube.value, cube.mask | 1 << b);
            // Only the half being added needs checking.
            let added = Cube {
                value: cube.value ^ (1 << b),
                mask: cube.mask,
            };
            if added.size() <= on.len() as u64 && added.minterms().all(|x| on_set.contains(&x)) {
                cube = wider;
            }
        }
        covered.extend(cube.minterms());
        primes.insert(cube);
    }
    primes.into_iter().collect()
}

/// Picks a cover of `on` from `primes`: essentials, then greedy, then an
/// irredundancy pass.
fn select_cover(on: &[u64], mut primes: Vec<Cube>, width: u32) -> Vec<Cube> {
    sort_cubes(&mut primes, width);
    let index: FxHashMap<u64, usize> = on.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let members: Vec<Vec<usize>> = primes
        .iter()
        .map(|p| p.minterms().map(|m| index[&m]).collect())
        .collect();
    let mut covering: Vec<Vec<usize>> = vec![Vec::new(); on.len()];
    for (pi, ms) in members.iter().enumerate() {
        for &m in ms {
            covering[m].push(pi);
        }
    }

    let mut chosen = vec![false; primes.len()];
    let mut covered = vec![false; on.len()];
    let mut uncovered = on.len();
    let pick = |pi: usize, chosen: &mut [bool], covered: &mut [bool]| -> usize {
        chosen[pi] = true;
        let mut newly = 0;
        for &m in &members[pi] {
            if !covered[m] {
                covered[m] = true;
                newly += 1;
            }
        }
        newly
    };

    for primes_of in &covering {
        if let [only] = primes_of[..] {
            if !chosen[only] {
                uncovered -= pick(only, &mut chosen, &mut covered);
            }
        }
    }

    // Primes are pre-sorted, so a smaller index wins ties on the gain.
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = (0..primes.len())
        .filter(|&pi| !chosen[pi])
        .map(|pi| (members[pi].len(), Reverse(pi)))
        .collect();
    while uncovered > 0 {
        let (stale, Reverse(pi)) = heap.pop().expect("primes cover the ON-set");
        let fresh = members[pi].iter().filter(|&&m| !covered[m]).count();
        if fresh == 0 {
            continue;
        }
        if fresh < stale {
            heap.push((fresh, Reverse(pi)));
            continue;
        }
        uncovered -= pick(pi, &mut chosen, &mut covered);
    }

    let mut multiplicity = vec![0u32; on.len()];
    for pi in (0..primes.len()).filter(|&pi| chosen[pi]) {
        for &m in &members[pi] {
            multiplicity[m] += 1;
        }
    }
    // Try to drop the most expensive picks first.
    for pi in (0..primes.len()).rev() {
        if chosen[pi] && members[pi].iter().all(|&m| multiplicity[m] > 1) {
            chosen[pi] = false;
            for &m in &members[pi] {
                multiplicity[m] -= 1;
            }
        }
    }
    primes
        .into_iter()
        .zip(chosen)
        .filter_map(|(p, keep)| keep.then_some(p))
        .collect()
}

/// True when widening any fixed position of `cube` would leave the ON-set.
pub fn is_prime(cube: &Cube, on: &BTreeSet<u64>, width: u32) -> bool {
    (0..width)
        .filter(|b| cube.mask >> b & 1 == 0)
        .all(|b| {
            let wider = Cube::new(cube.value, cube.mask | 1 << b);
            !wider.minterms().all(|m| on.contains(&m))
        })
}

fn pla_text(width: u32, rows: &[String]) -> String {
    let mut out = format!(".i {width}\n.o 1\n.p {}\n", rows.len());
    for r in rows {
        out.push_str(r);
        out.push_str(" 1\n");
    }
    out.push_str(".e\n");
    out
}

/// PLA listing of an ON-set, one minterm per row.
pub fn on_set_to_pla(codes: &[u64], width: u32) -> String {
    let rows: Vec<String> = codes
        .iter()
        .map(|&c| encoding::code_to_string(c, width))
        .collect();
    pla_text(width, &rows)
}

/// Reads the ON rows of a single-output PLA (`-` or `*` as wildcard).
pub fn read_pla(text: &str) -> Result<(u32, Vec<Cube>), MinimizeError> {
    let bad = |m: String| MinimizeError::Pla(m);
    let mut width = None;
    let mut cubes = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('.') {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("i"), Some(n)) => {
                    let n: u32 = n.parse().map_err(|_| bad(format!("bad .i {n:?}")))?;
                    if n > MAX_WIDTH {
                        return Err(MinimizeError::TooWide(n as usize));
                    }
                    width = Some(n);
                }
                (Some("o"), Some("1")) | (Some("p"), _) | (Some("e"), _) | (Some("type"), _) => {}
                (Some("o"), Some(n)) => return Err(bad(format!("{n} outputs, expected 1"))),
                _ => return Err(bad(format!("unsupported directive {line:?}"))),
            }
            continue;
        }
        let w = width.ok_or_else(|| bad("row before .i".into()))?;
        let (inputs, output) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| bad(format!("bad row {line:?}")))?;
        if inputs.len() != w as usize {
            return Err(MinimizeError::WidthMismatch {
                expected: w as usize,
                found: inputs.len(),
            });
        }
        if output.trim() != "1" {
            continue;
        }
        let pattern: Pattern = inputs
            .replace('-', "*")
            .parse()
            .map_err(|_| bad(format!("bad row {line:?}")))?;
        cubes.push(Cube::from_pattern(&pattern)?);
    }
    let width = width.ok_or_else(|| bad("missing .i".into()))?;
    Ok((width, cubes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cube_minterms() {
        let c = Cube::new(0b1010, 0b0101);
        let mut m: Vec<u64> = c.minterms().collect();
        m.sort();
        assert_eq!(m, vec![0b1010, 0b1011, 0b1110, 0b1111]);
        assert_eq!(c.to_pattern(4).to_string(), "1*1*");
        assert_eq!(Cube::from_pattern(&c.to_pattern(4)).unwrap(), c);
    }

    #[test]
    fn one_bit_merge() {
        let c = minimize(&set(&["00", "01"])).unwrap();
        assert_eq!(c.to_string(), "{0*}");
    }

    #[test]
    fn full_space_is_all_star() {
        let all: BTreeSet<String> = (0..16).map(|i| format!("{i:04b}")).collect();
        assert_eq!(minimize(&all).unwrap().to_string(), "{****}");
    }

    #[test]
    fn errors() {
        assert_eq!(minimize(&BTreeSet::new()), Err(MinimizeError::Empty));
        assert!(matches!(
            minimize(&set(&["01", "011"])),
            Err(MinimizeError::WidthMismatch { .. })
        ));
        assert_eq!(minimize(&set(&["0x"])), Err(MinimizeError::NotABit('x')));
        assert!(minimize_codes(&[4], 2).is_err());
    }

    #[test]
    fn raising_agrees_with_qm_on_coverage() {
        let on: Vec<u64> = vec![0, 1, 2, 5, 6, 7, 8, 9, 10, 14];
        let exact = qm_primes(&on, 4, usize::MAX).unwrap();
        let raised = raised_primes(&on, 4);
        let on_set: BTreeSet<u64> = on.iter().copied().collect();
        for p in &raised {
            assert!(exact.contains(p), "{p:?}");
            assert!(is_prime(p, &on_set, 4));
        }
        assert_eq!(qm_primes(&on, 4, 3), None);
    }

    #[test]
    fn expansions() {
        assert_eq!(
            expand_pattern(&"1*1*".parse().unwrap()),
            set(&["1010", "1011", "1110", "1111"])
        );
        assert_eq!(expand_pattern(&"101".parse().unwrap()), set(&["101"]));
        assert_eq!(expand_pattern(&"**".parse().unwrap()).len(), 4);
    }

    #[test]
    fn pla_round_trip() {
        let cover = minimize(&set(&["1000", "1010", "1001", "1011", "1110", "1111", "0010"])).unwrap();
        let (w, cubes) = read_pla(&cover.to_pla()).unwrap();
        assert_eq!(Cover::new(w, cubes), cover);
        let (w, rows) = read_pla(&on_set_to_pla(&[1, 2], 3)).unwrap();
        assert_eq!((w, rows), (3, vec![Cube::minterm(1), Cube::minterm(2)]));
        assert!(read_pla("0 1\n").is_err());
    }
}
