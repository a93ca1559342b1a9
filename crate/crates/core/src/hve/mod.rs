//! Hidden Vector Encryption over a composite-order bilinear group.
//!
//! Setup, index encryption, token generation and query follow the
//! Boneh–Waters construction. A ciphertext carries an index bit vector `I`;
//! a token carries a `{0,1,*}` pattern. Querying recovers the message exactly
//! when `I` agrees with the pattern on every non-`*` position, and produces
//! a value outside the message domain (⊥) otherwise.
//!
//! Messages are `G_T` elements whose exponent lies below
//! [`message_bound`]; anything else recovered by a query decodes to ⊥.

mod pattern;
mod text;

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::bilinear::{pair, GElem, GroupError, GroupParams, GtElem, PowerTable};

pub use pattern::{pairing_cost, plain_match, IndexVector, Pattern, Symbol};
pub use text::{user_ciphertexts_from_text, user_ciphertexts_to_text};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HveError {
    #[error("HVE width must be at least 1")]
    ZeroWidth,
    #[error("width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("message {0} is outside the valid message domain")]
    MessageOutOfDomain(u64),
    #[error("invalid symbol {0:?}")]
    BadSymbol(char),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Exclusive upper bound on message exponents: `2^min(32, bits-1)`.
///
/// Keeping messages below `Q` guarantees that a non-matching query, which
/// adds a non-zero multiple of `Q` to the exponent, always lands outside.
pub fn message_bound(params: &GroupParams) -> u128 {
    1u128 << 32.min(params.bits() - 1)
}

/// A plaintext message, encoded as the `G_T` element `gt^m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Message(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct SecretSlot {
    u: GElem,
    h: GElem,
    w: GElem,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct PublicSlot {
    u: GElem,
    h: GElem,
    w: GElem,
}

/// Fixed-base tables for the encryption exponentiations.
#[derive(Debug)]
struct PublicTables {
    v: PowerTable<GElem>,
    a: PowerTable<GtElem>,
    h: Vec<PowerTable<GElem>>,
    uh: Vec<PowerTable<GElem>>,
    w: Vec<PowerTable<GElem>>,
}

/// Fixed-base tables for the token-generation exponentiations.
#[derive(Debug)]
struct SecretTables {
    g_a: GElem,
    v: PowerTable<GElem>,
    h: Vec<PowerTable<GElem>>,
    uh: Vec<PowerTable<GElem>>,
    w: Vec<PowerTable<GElem>>,
}

#[derive(Clone, Debug)]
pub struct SecretKey {
    params: GroupParams,
    g_q: GElem,
    a: u128,
    g: GElem,
    v: GElem,
    slots: Vec<SecretSlot>,
    tables: Option<Arc<SecretTables>>,
}

#[derive(Clone, Debug)]
pub struct PublicKey {
    params: GroupParams,
    g_q: GElem,
    v: GElem,
    a: GtElem,
    slots: Vec<PublicSlot>,
    tables: Option<Arc<PublicTables>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    params: GroupParams,
    c_prime: GtElem,
    c0: GElem,
    parts: Vec<(GElem, GElem)>,
}

/// A search token. Key material exists only for non-wildcard positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pattern: Pattern,
    k0: GElem,
    parts: Vec<(GElem, GElem)>,
}

impl SecretKey {
    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.slots.len()
    }

    pub fn g_q(&self) -> GElem {
        self.g_q
    }

    /// Unblinded `(u_i, h_i, w_i)` for zero-based position `i`.
    pub fn slot(&self, i: usize) -> (GElem, GElem, GElem) {
        let s = &self.slots[i];
        (s.u, s.h, s.w)
    }

    pub fn has_tables(&self) -> bool {
        self.tables.is_some()
    }

    /// Builds power tables for `v`, `h_i`, `u_i·h_i` and `w_i`.
    pub fn precompute(&mut self) -> Result<(), HveError> {
        let mut uh = Vec::with_capacity(self.slots.len());
        for s in &self.slots {
            uh.push(PowerTable::new(s.u.mul(&s.h)?));
        }
        self.tables = Some(Arc::new(SecretTables {
            g_a: self.g.pow(self.a),
            v: PowerTable::new(self.v),
            h: self.slots.iter().map(|s| PowerTable::new(s.h)).collect(),
            uh,
            w: self.slots.iter().map(|s| PowerTable::new(s.w)).collect(),
        }));
        Ok(())
    }

    pub fn drop_tables(&mut self) {
        self.tables = None;
    }

    fn check_subgroups(&self) -> bool {
        let q = self.params.q() as u128;
        let p = self.params.p() as u128;
        let in_gp = |e: &GElem| e.exponent().is_multiple_of(q);
        in_gp(&self.g)
            && in_gp(&self.v)
            && self.slots.iter().all(|s| in_gp(&s.u) && in_gp(&s.h) && in_gp(&s.w))
            && self.g_q.exponent().is_multiple_of(p)
    }
}

impl PublicKey {
    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.slots.len()
    }

    pub fn g_q(&self) -> GElem {
        self.g_q
    }

    /// `A = e(g, v)^a`.
    pub fn a(&self) -> GtElem {
        self.a
    }

    /// `V = v·R_v`.
    pub fn v(&self) -> GElem {
        self.v
    }

    /// `(U_i, H_i, W_i)` for zero-based position `i`.
    pub fn slot(&self, i: usize) -> (GElem, GElem, GElem) {
        let s = &self.slots[i];
        (s.u, s.h, s.w)
    }

    pub fn has_tables(&self) -> bool {
        self.tables.is_some()
    }

    /// Builds power tables for `V`, `A`, and each `H_i`, `U_i·H_i`, `W_i`.
    ///
    /// Since index bits are 0 or 1, the base of `C_{i,1}` is always one of
    /// `H_i` or `U_i·H_i`.
    pub fn precompute(&mut self) -> Result<(), HveError> {
        let mut uh = Vec::with_capacity(self.slots.len());
        for s in &self.slots {
            uh.push(PowerTable::new(s.u.mul(&s.h)?));
        }
        self.tables = Some(Arc::new(PublicTables {
            v: PowerTable::new(self.v),
            a: PowerTable::new(self.a),
            h: self.slots.iter().map(|s| PowerTable::new(s.h)).collect(),
            uh,
            w: self.slots.iter().map(|s| PowerTable::new(s.w)).collect(),
        }));
        Ok(())
    }

    pub fn drop_tables(&mut self) {
        self.tables = None;
    }
}

impl Ciphertext {
    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.parts.len()
    }

    pub fn c_prime(&self) -> GtElem {
        self.c_prime
    }

    pub fn c0(&self) -> GElem {
        self.c0
    }

    pub fn parts(&self) -> &[(GElem, GElem)] {
        &self.parts
    }
}

impl Token {
    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn width(&self) -> usize {
        self.pattern.width()
    }

    pub fn k0(&self) -> GElem {
        self.k0
    }

    /// `(K_{i,1}, K_{i,2})` for each position of `J`, in order.
    pub fn parts(&self) -> &[(GElem, GElem)] {
        &self.parts
    }

    /// Number of group elements carried: `1 + 2·|J|`.
    pub fn element_count(&self) -> usize {
        1 + 2 * self.parts.len()
    }

    pub fn pairing_cost(&self) -> u64 {
        pairing_cost(&self.pattern)
    }
}

/// Generates a key pair of the given width.
///
/// The `G_q` blinders applied to the public key are drawn here and dropped.
pub fn setup<R: Rng + ?Sized>(
    width: usize,
    params: &GroupParams,
    rng: &mut R,
) -> Result<(PublicKey, SecretKey), HveError> {
    if width == 0 {
        return Err(HveError::ZeroWidth);
    }
    let g_q = params.sample_gq(rng);
    let a = rng.random_range(1..params.p()) as u128;
    let g = params.sample_gp(rng);
    let v = params.sample_gp(rng);
    let mut secret_slots = Vec::with_capacity(width);
    let mut public_slots = Vec::with_capacity(width);
    for _ in 0..width {
        let s = SecretSlot {
            u: params.sample_gp(rng),
            h: params.sample_gp(rng),
            w: params.sample_gp(rng),
        };
        public_slots.push(PublicSlot {
            u: s.u.mul(&params.sample_gq(rng))?,
            h: s.h.mul(&params.sample_gq(rng))?,
            w: s.w.mul(&params.sample_gq(rng))?,
        });
        secret_slots.push(s);
    }
    let public = PublicKey {
        params: *params,
        g_q,
        v: v.mul(&params.sample_gq(rng))?,
        a: pair(&g, &v)?.pow(a),
        slots: public_slots,
        tables: None,
    };
    let secret = SecretKey {
        params: *params,
        g_q,
        a,
        g,
        v,
        slots: secret_slots,
        tables: None,
    };
    debug_assert!(secret.check_subgroups());
    Ok((public, secret))
}

/// Encrypts `message` under the index vector `index`.
pub fn encrypt<R: Rng + ?Sized>(
    pk: &PublicKey,
    index: &IndexVector,
    message: Message,
    rng: &mut R,
) -> Result<Ciphertext, HveError> {
    if index.width() != pk.width() {
        return Err(HveError::WidthMismatch {
            expected: pk.width(),
            found: index.width(),
        });
    }
    let params = &pk.params;
    if u128::from(message.0) >= message_bound(params) {
        return Err(HveError::MessageOutOfDomain(message.0.into()));
    }
    let s = params.sample_zn(rng);
    let m = params.gt_elem(message.0.into());
    let tables = pk.tables.as_deref();

    let a_s = match tables {
        Some(t) => t.a.pow(s),
        None => pk.a.pow(s),
    };
    let v_s = match tables {
        Some(t) => t.v.pow(s),
        None => pk.v.pow(s),
    };
    let c_prime = m.mul(&a_s)?;
    let c0 = v_s.mul(&params.sample_gq(rng))?;

    let mut parts = Vec::with_capacity(pk.width());
    for (i, slot) in pk.slots.iter().enumerate() {
        let bit = index.bit(i);
        let (base_s, w_s) = match tables {
            Some(t) => {
                let base = if bit { &t.uh[i] } else { &t.h[i] };
                (base.pow(s), t.w[i].pow(s))
            }
            None => {
                let base = if bit { slot.u.mul(&slot.h)? } else { slot.h };
                (base.pow(s), slot.w.pow(s))
            }
        };
        parts.push((
            base_s.mul(&params.sample_gq(rng))?,
            w_s.mul(&params.sample_gq(rng))?,
        ));
    }
    Ok(Ciphertext {
        params: *params,
        c_prime,
        c0,
        parts,
    })
}

/// Issues a search token for `pattern`.
pub fn gen_token<R: Rng + ?Sized>(
    sk: &SecretKey,
    pattern: &Pattern,
    rng: &mut R,
) -> Result<Token, HveError> {
    if pattern.width() != sk.width() {
        return Err(HveError::WidthMismatch {
            expected: sk.width(),
            found: pattern.width(),
        });
    }
    let params = &sk.params;
    let tables = sk.tables.as_deref();
    let mut k0 = match tables {
        Some(t) => t.g_a,
        None => sk.g.pow(sk.a),
    };
    let mut parts = Vec::with_capacity(pattern.non_wildcards());
    for &i in pattern.fixed_positions() {
        let r1 = params.sample_zp(rng);
        let r2 = params.sample_zp(rng);
        let slot = &sk.slots[i];
        let one = pattern.symbols()[i] == Symbol::One;
        let (base_r1, w_r2, k1, k2) = match tables {
            Some(t) => {
                let base = if one { &t.uh[i] } else { &t.h[i] };
                (base.pow(r1), t.w[i].pow(r2), t.v.pow(r1), t.v.pow(r2))
            }
            None => {
                let base = if one { slot.u.mul(&slot.h)? } else { slot.h };
                (base.pow(r1), slot.w.pow(r2), sk.v.pow(r1), sk.v.pow(r2))
            }
        };
        k0 = k0.mul(&base_r1)?.mul(&w_r2)?;
        parts.push((k1, k2));
    }
    Ok(Token {
        pattern: pattern.clone(),
        k0,
        parts,
    })
}

/// Evaluates `token` on `ciphertext`.
///
/// Computes `C' / (e(C_0, K_0) / Π_{i∈J} e(C_{i,1}, K_{i,1})·e(C_{i,2}, K_{i,2}))`
/// and returns the message if it lies in the valid domain, `None` (⊥) if not.
/// Performs exactly [`pairing_cost`] pairings.
pub fn query(token: &Token, ciphertext: &Ciphertext) -> Result<Option<Message>, HveError> {
    if token.width() != ciphertext.width() {
        return Err(HveError::WidthMismatch {
            expected: token.width(),
            found: ciphertext.width(),
        });
    }
    let mut inner = pair(&ciphertext.c0, &token.k0)?;
    for (&i, (k1, k2)) in token.pattern.fixed_positions().iter().zip(&token.parts) {
        let (c1, c2) = &ciphertext.parts[i];
        inner = inner.div(&pair(c1, k1)?)?.div(&pair(c2, k2)?)?;
    }
    let recovered = ciphertext.c_prime.div(&inner)?.exponent();
    Ok((recovered < message_bound(&ciphertext.params)).then_some(Message(recovered as u32)))
}
