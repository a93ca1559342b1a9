use std::fmt;
use std::str::FromStr;

use super::HveError;

/// One position of a search pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Zero,
    One,
    Star,
}

impl Symbol {
    pub fn as_char(self) -> char {
        match self {
            Symbol::Zero => '0',
            Symbol::One => '1',
            Symbol::Star => '*',
        }
    }

    pub fn from_char(c: char) -> Result<Self, HveError> {
        match c {
            '0' => Ok(Symbol::Zero),
            '1' => Ok(Symbol::One),
            '*' => Ok(Symbol::Star),
            other => Err(HveError::BadSymbol(other)),
        }
    }
}

/// A `{0,1,*}` vector. The set `J` of non-wildcard positions is cached.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pattern {
    symbols: Vec<Symbol>,
    fixed: Vec<usize>,
}

impl Pattern {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        let fixed = symbols
            .iter()
            .enumerate()
            .filter(|(_, s)| **s != Symbol::Star)
            .map(|(i, _)| i)
            .collect();
        Self { symbols, fixed }
    }

    pub fn all_star(width: usize) -> Self {
        Self::new(vec![Symbol::Star; width])
    }

    pub fn width(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// Zero-based positions that are not `*`.
    pub fn fixed_positions(&self) -> &[usize] {
        &self.fixed
    }

    pub fn non_wildcards(&self) -> usize {
        self.fixed.len()
    }

    pub fn star_count(&self) -> usize {
        self.symbols.len() - self.fixed.len()
    }

    pub fn matches(&self, index: &IndexVector) -> Result<bool, HveError> {
        plain_match(index, self)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.symbols.iter().try_for_each(|s| write!(f, "{}", s.as_char()))
    }
}

impl FromStr for Pattern {
    type Err = HveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let symbols = s.chars().map(Symbol::from_char).collect::<Result<_, _>>()?;
        Ok(Self::new(symbols))
    }
}

/// The attribute bit vector a ciphertext is encrypted under.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexVector {
    bits: Vec<bool>,
}

impl IndexVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }
}

impl fmt::Display for IndexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.bits
            .iter()
            .try_for_each(|b| write!(f, "{}", if *b { '1' } else { '0' }))
    }
}

impl FromStr for IndexVector {
    type Err = HveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(HveError::BadSymbol(other)),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { bits })
    }
}

/// Plaintext predicate: every non-`*` position of `pattern` equals `index`.
pub fn plain_match(index: &IndexVector, pattern: &Pattern) -> Result<bool, HveError> {
    if index.width() != pattern.width() {
        return Err(HveError::WidthMismatch {
            expected: pattern.width(),
            found: index.width(),
        });
    }
    Ok(pattern.fixed.iter().all(|&i| match pattern.symbols[i] {
        Symbol::One => index.bits[i],
        Symbol::Zero => !index.bits[i],
        Symbol::Star => true,
    }))
}

/// Pairings needed to evaluate a token: one for `e(C_0, K_0)` plus two per
/// non-wildcard position.
pub fn pairing_cost(pattern: &Pattern) -> u64 {
    1 + 2 * pattern.non_wildcards() as u64
}
