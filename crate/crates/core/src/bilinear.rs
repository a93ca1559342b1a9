//! Composite-order symmetric bilinear group.
//!
//! This is the reference backend: an element of `G` or `G_T` is stored as its
//! discrete logarithm with respect to a fixed implicit generator. The group
//! law becomes addition modulo `N = P·Q`, exponentiation becomes
//! multiplication by a scalar, and the pairing multiplies two logarithms.
//! Bilinearity and the orthogonality of the `G_p` / `G_q` subgroups hold
//! exactly, which is everything the HVE layer relies on for correctness.
//!
//! **The reference backend offers no security whatsoever.** Discrete logs are
//! the representation, so anyone holding an element can read it. It exists to
//! make the scheme fully testable and to give honest operation counts.
//!
//! The backend surface is deliberately small: parameter generation,
//! subgroup sampling, `mul` / `pow` / `pair`, and fixed-base power tables.
//! The HVE layer touches nothing else.

use std::cell::Cell;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

/// Default bit length of each prime factor.
pub const DEFAULT_BITS: u32 = 62;
/// Smallest prime size accepted by [`GroupParams::generate`].
pub const MIN_BITS: u32 = 16;
/// Largest prime size; keeps `N < 2^126` so sums of two residues fit a `u128`.
pub const MAX_BITS: u32 = 63;
/// Window width of a [`PowerTable`].
pub const WINDOW_BITS: u32 = 4;

const WINDOW_SIZE: usize = 1 << WINDOW_BITS;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("prime size of {bits} bits is outside {min}..={max}")]
    BitsOutOfRange { bits: u32, min: u32, max: u32 },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("P and Q must be distinct primes of equal bit length")]
    BadPrimePair,
    #[error("operands belong to different groups")]
    GroupMismatch,
    #[error("malformed group data: {0}")]
    Parse(String),
}

/// Public description of the group: `N = P·Q` with `P`, `Q` of `bits` bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GroupParams {
    n: u128,
    p: u64,
    q: u64,
    bits: u32,
}

impl GroupParams {
    /// Deterministically derives two distinct `bits`-bit primes from `seed`.
    pub fn generate(bits: u32, seed: u64) -> Result<Self, GroupError> {
        if !(MIN_BITS..=MAX_BITS).contains(&bits) {
            return Err(GroupError::BitsOutOfRange {
                bits,
                min: MIN_BITS,
                max: MAX_BITS,
            });
        }
        Ok(Self::generate_unchecked(bits, seed))
    }

    /// Like [`generate`](Self::generate) but accepts toy sizes down to 3 bits.
    ///
    /// Only for exhaustive tests over tiny groups; false matches are frequent
    /// at these sizes.
    pub fn generate_small(bits: u32, seed: u64) -> Result<Self, GroupError> {
        if !(3..=MAX_BITS).contains(&bits) {
            return Err(GroupError::BitsOutOfRange {
                bits,
                min: 3,
                max: MAX_BITS,
            });
        }
        Ok(Self::generate_unchecked(bits, seed))
    }

    fn generate_unchecked(bits: u32, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let p = random_prime(bits, &mut rng);
        let q = loop {
            let q = random_prime(bits, &mut rng);
            if q != p {
                break q;
            }
        };
        Self {
            n: p as u128 * q as u128,
            p,
            q,
            bits,
        }
    }

    /// Builds parameters from explicit primes.
    pub fn from_primes(p: u64, q: u64) -> Result<Self, GroupError> {
        for x in [p, q] {
            if !is_prime(x) {
                return Err(GroupError::NotPrime(x));
            }
        }
        let bits = 64 - p.leading_zeros();
        if p == q || bits != 64 - q.leading_zeros() || bits > MAX_BITS {
            return Err(GroupError::BadPrimePair);
        }
        Ok(Self {
            n: p as u128 * q as u128,
            p,
            q,
            bits,
        })
    }

    pub fn n(&self) -> u128 {
        self.n
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Random non-identity element of `G_p`: exponent `Q·r`, `r ∈ [1, P-1]`.
    pub fn sample_gp<R: Rng + ?Sized>(&self, rng: &mut R) -> GElem {
        let r = rng.random_range(1..self.p);
        GElem::from_raw(self.q as u128 * r as u128, self.n)
    }

    /// Random non-identity element of `G_q`: exponent `P·r`, `r ∈ [1, Q-1]`.
    pub fn sample_gq<R: Rng + ?Sized>(&self, rng: &mut R) -> GElem {
        let r = rng.random_range(1..self.q);
        GElem::from_raw(self.p as u128 * r as u128, self.n)
    }

    /// Uniform scalar in `Z_N`.
    pub fn sample_zn<R: Rng + ?Sized>(&self, rng: &mut R) -> u128 {
        rng.random_range(0..self.n)
    }

    /// Uniform scalar in `Z_P`.
    pub fn sample_zp<R: Rng + ?Sized>(&self, rng: &mut R) -> u128 {
        rng.random_range(0..self.p) as u128
    }

    pub fn g_identity(&self) -> GElem {
        GElem::from_raw(0, self.n)
    }

    pub fn gt_identity(&self) -> GtElem {
        GtElem::from_raw(0, self.n)
    }

    pub fn g_elem(&self, exponent: u128) -> GElem {
        GElem::from_raw(exponent % self.n, self.n)
    }

    pub fn gt_elem(&self, exponent: u128) -> GtElem {
        GtElem::from_raw(exponent % self.n, self.n)
    }
}

impl fmt::Display for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} P={} Q={} bits={}", self.n, self.p, self.q, self.bits)
    }
}

impl FromStr for GroupParams {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut n = None;
        let mut p = None;
        let mut q = None;
        let mut bits = None;
        for field in s.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| GroupError::Parse(format!("expected key=value, got {field:?}")))?;
            let bad = |_| GroupError::Parse(format!("bad number in {field:?}"));
            match key {
                "N" => n = Some(value.parse::<u128>().map_err(bad)?),
                "P" => p = Some(value.parse::<u64>().map_err(bad)?),
                "Q" => q = Some(value.parse::<u64>().map_err(bad)?),
                "bits" => bits = Some(value.parse::<u32>().map_err(bad)?),
                _ => return Err(GroupError::Parse(format!("unknown field {key:?}"))),
            }
        }
        let missing = |name: &str| GroupError::Parse(format!("missing {name}"));
        let params = Self::from_primes(p.ok_or_else(|| missing("P"))?, q.ok_or_else(|| missing("Q"))?)?;
        if n.ok_or_else(|| missing("N"))? != params.n || bits.ok_or_else(|| missing("bits"))? != params.bits {
            return Err(GroupError::Parse("N or bits inconsistent with P, Q".into()));
        }
        Ok(params)
    }
}

/// Operation counters, kept per thread.
pub mod counters {
    use super::*;

    #[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
    pub struct OpCounters {
        /// Calls to [`pair`](super::pair).
        pub pairings: u64,
        /// Exponentiations computed without a power table.
        pub exponentiations: u64,
        /// Exponentiations served from a [`PowerTable`](super::PowerTable).
        pub table_hits: u64,
    }

    impl Add for OpCounters {
        type Output = Self;

        fn add(self, rhs: Self) -> Self {
            Self {
                pairings: self.pairings + rhs.pairings,
                exponentiations: self.exponentiations + rhs.exponentiations,
                table_hits: self.table_hits + rhs.table_hits,
            }
        }
    }

    /// Difference of two snapshots taken in order on the same thread.
    impl Sub for OpCounters {
        type Output = Self;

        fn sub(self, rhs: Self) -> Self {
            Self {
                pairings: self.pairings - rhs.pairings,
                exponentiations: self.exponentiations - rhs.exponentiations,
                table_hits: self.table_hits - rhs.table_hits,
            }
        }
    }

    impl AddAssign for OpCounters {
        fn add_assign(&mut self, rhs: Self) {
            *self = *self + rhs;
        }
    }

    thread_local! {
        static COUNTERS: Cell<OpCounters> = const { Cell::new(OpCounters { pairings: 0, exponentiations: 0, table_hits: 0 }) };
    }

    pub fn snapshot() -> OpCounters {
        COUNTERS.with(|c| c.get())
    }

    pub fn reset() {
        COUNTERS.with(|c| c.set(OpCounters::default()));
    }

    /// Returns the current counts and resets them.
    pub fn take() -> OpCounters {
        COUNTERS.with(|c| c.replace(OpCounters::default()))
    }

    fn bump(f: impl FnOnce(&mut OpCounters)) {
        COUNTERS.with(|c| {
            let mut v = c.get();
            f(&mut v);
            c.set(v);
        });
    }

    pub(super) fn pairing() {
        bump(|c| c.pairings += 1);
    }

    pub(super) fn exponentiation() {
        bump(|c| c.exponentiations += 1);
    }

    pub(super) fn table_hit() {
        bump(|c| c.table_hits += 1);
    }
}

mod sealed {
    pub trait Sealed {}
}

/// Shared behaviour of [`GElem`] and [`GtElem`].
pub trait Element: sealed::Sealed + Copy + Eq + fmt::Debug + Send + Sync {
    #[doc(hidden)]
    fn from_raw(exponent: u128, n: u128) -> Self;
    /// Discrete log with respect to the implicit generator.
    fn exponent(&self) -> u128;
    /// Modulus of the group the element lives in.
    fn modulus(&self) -> u128;
}

macro_rules! group_element {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub struct $name {
            e: u128,
            n: u128,
        }

        impl sealed::Sealed for $name {}

        impl Element for $name {
            fn from_raw(exponent: u128, n: u128) -> Self {
                debug_assert!(exponent < n);
                Self { e: exponent, n }
            }

            fn exponent(&self) -> u128 {
                self.e
            }

            fn modulus(&self) -> u128 {
                self.n
            }
        }

        impl $name {
            fn from_raw(exponent: u128, n: u128) -> Self {
                <Self as Element>::from_raw(exponent, n)
            }

            pub fn exponent(&self) -> u128 {
                self.e
            }

            pub fn is_identity(&self) -> bool {
                self.e == 0
            }

            fn check(&self, other: &Self) -> Result<(), GroupError> {
                if self.n == other.n {
                    Ok(())
                } else {
                    Err(GroupError::GroupMismatch)
                }
            }

            /// Group operation.
            pub fn mul(&self, other: &Self) -> Result<Self, GroupError> {
                self.check(other)?;
                Ok(Self::from_raw(add_mod(self.e, other.e, self.n), self.n))
            }

            /// `self^k` by square-and-multiply over the group law.
            pub fn pow(&self, k: u128) -> Self {
                counters::exponentiation();
                Self::from_raw(mul_mod(self.e, k % self.n, self.n), self.n)
            }

            pub fn inverse(&self) -> Self {
                let e = if self.e == 0 { 0 } else { self.n - self.e };
                Self::from_raw(e, self.n)
            }

            /// `self · other^-1`.
            pub fn div(&self, other: &Self) -> Result<Self, GroupError> {
                self.mul(&other.inverse())
            }

            /// Parses the decimal exponent form produced by `Display`.
            pub fn parse(s: &str, params: &GroupParams) -> Result<Self, GroupError> {
                let e: u128 = s
                    .trim()
                    .parse()
                    .map_err(|_| GroupError::Parse(format!("bad element {s:?}")))?;
                if e >= params.n() {
                    return Err(GroupError::Parse(format!("element {e} not reduced mod N")));
                }
                Ok(Self::from_raw(e, params.n()))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.e)
            }
        }
    };
}

group_element!(
    /// Element of the source group `G`.
    GElem
);
group_element!(
    /// Element of the target group `G_T`.
    GtElem
);

/// The bilinear map `e: G × G → G_T`.
pub fn pair(a: &GElem, b: &GElem) -> Result<GtElem, GroupError> {
    a.check(b)?;
    counters::pairing();
    Ok(GtElem::from_raw(mul_mod(a.e, b.e, a.n), a.n))
}

/// Fixed-base windowed power table.
///
/// Row `i` holds `base^(j·16^i)` for `j ∈ [0, 16)`, so any exponent below `N`
/// costs one group operation per 4-bit window and no squarings.
#[derive(Clone, Debug)]
pub struct PowerTable<E> {
    base: E,
    rows: Vec<[u128; WINDOW_SIZE]>,
}

impl<E: Element> PowerTable<E> {
    pub fn new(base: E) -> Self {
        let n = base.modulus();
        let windows = (128 - n.leading_zeros()).div_ceil(WINDOW_BITS) as usize;
        let mut rows = Vec::with_capacity(windows);
        let mut step = base.exponent();
        for _ in 0..windows {
            let mut row = [0u128; WINDOW_SIZE];
            for j in 1..WINDOW_SIZE {
                row[j] = add_mod(row[j - 1], step, n);
            }
            step = add_mod(row[WINDOW_SIZE - 1], step, n);
            rows.push(row);
        }
        Self { base, rows }
    }

    pub fn base(&self) -> E {
        self.base
    }

    pub fn pow(&self, k: u128) -> E {
        counters::table_hit();
        let n = self.base.modulus();
        let mut k = k % n;
        let mut acc = 0u128;
        for row in &self.rows {
            acc = add_mod(acc, row[(k as usize) & (WINDOW_SIZE - 1)], n);
            k >>= WINDOW_BITS;
        }
        E::from_raw(acc, n)
    }
}

pub fn precompute_base<E: Element>(base: E) -> PowerTable<E> {
    PowerTable::new(base)
}

pub fn pow_pre<E: Element>(table: &PowerTable<E>, k: u128) -> E {
    table.pow(k)
}

#[inline]
fn add_mod(a: u128, b: u128, n: u128) -> u128 {
    let s = a + b;
    if s >= n {
        s - n
    } else {
        s
    }
}

/// `a·b mod n` for `a, b < n < 2^127`, by left-to-right double-and-add.
pub(crate) fn mul_mod(a: u128, b: u128, n: u128) -> u128 {
    if a.leading_zeros() + b.leading_zeros() >= 128 {
        return (a * b) % n;
    }
    let mut acc = 0u128;
    for i in (0..128 - b.leading_zeros()).rev() {
        acc = add_mod(acc, acc, n);
        if (b >> i) & 1 == 1 {
            acc = add_mod(acc, a, n);
        }
    }
    acc
}

fn random_prime<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> u64 {
    let top = 1u64 << (bits - 1);
    let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
    loop {
        let candidate = (rng.random::<u64>() & mask) | top | 1;
        if is_prime(candidate) {
            return candidate;
        }
    }
}

/// Deterministic Miller–Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut base: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul(acc, base);
            }
            base = mul(base, base);
            e >>= 1;
        }
        acc
    };
    'witness: for &a in &BASES {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
