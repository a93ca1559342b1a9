//! Line-oriented text formats for keys, tokens and ciphertexts.
//!
//! Elements are written as decimal exponents. Position indices in keys are
//! 1-based. Token and ciphertext files do not embed the group parameters;
//! the reader supplies them (normally from the public key file).

use std::fmt::Write as _;

use super::{
    Ciphertext, HveError, Pattern, PublicKey, PublicSlot, SecretKey, SecretSlot, Token,
};
use crate::bilinear::{GElem, GroupParams, GtElem};

struct Reader<'a> {
    lines: std::iter::Peekable<Box<dyn Iterator<Item = &'a str> + 'a>>,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = &'a str> + 'a> = Box::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        );
        Self {
            lines: it.peekable(),
        }
    }

    fn line(&mut self) -> Result<&'a str, HveError> {
        self.lines
            .next()
            .ok_or_else(|| HveError::Parse("unexpected end of input".into()))
    }

    fn value(&mut self, key: &str) -> Result<&'a str, HveError> {
        let line = self.line()?;
        match line.split_once('=') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(HveError::Parse(format!("expected `{key}=`, got {line:?}"))),
        }
    }

    fn g(&mut self, key: &str, params: &GroupParams) -> Result<GElem, HveError> {
        Ok(GElem::parse(self.value(key)?, params)?)
    }

    fn gt(&mut self, key: &str, params: &GroupParams) -> Result<GtElem, HveError> {
        Ok(GtElem::parse(self.value(key)?, params)?)
    }

    fn finish(mut self) -> Result<(), HveError> {
        match self.lines.next() {
            None => Ok(()),
            Some(extra) => Err(HveError::Parse(format!("trailing data {extra:?}"))),
        }
    }
}

/// Parses `MAGIC v1 l=<int>[ ...]` and returns the width and the remaining fields.
fn header<'a>(line: &'a str, magic: &str) -> Result<(usize, Vec<&'a str>), HveError> {
    let mut fields = line.split_whitespace();
    if fields.next() != Some(magic) || fields.next() != Some("v1") {
        return Err(HveError::Parse(format!("expected `{magic} v1` header, got {line:?}")));
    }
    let width = fields
        .next()
        .and_then(|f| f.strip_prefix("l="))
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| HveError::Parse(format!("missing width in {line:?}")))?;
    if width == 0 {
        return Err(HveError::ZeroWidth);
    }
    Ok((width, fields.collect()))
}

fn parse_params(line: &str) -> Result<GroupParams, HveError> {
    Ok(line.parse::<GroupParams>()?)
}

impl Token {
    pub fn to_text(&self) -> String {
        let j: Vec<String> = self
            .pattern
            .fixed_positions()
            .iter()
            .map(|i| (i + 1).to_string())
            .collect();
        let mut out = format!("HVETOK v1 l={} J={}\n", self.width(), j.join(","));
        let _ = writeln!(out, "pattern={}", self.pattern);
        let _ = writeln!(out, "K0={}", self.k0);
        for (&i, (k1, k2)) in self.pattern.fixed_positions().iter().zip(&self.parts) {
            let _ = writeln!(out, "K{},1={}", i + 1, k1);
            let _ = writeln!(out, "K{},2={}", i + 1, k2);
        }
        out
    }

    pub fn from_text(text: &str, params: &GroupParams) -> Result<Self, HveError> {
        let mut r = Reader::new(text);
        let token = Self::read(&mut r, params)?;
        r.finish()?;
        Ok(token)
    }

    fn read(r: &mut Reader<'_>, params: &GroupParams) -> Result<Self, HveError> {
        let (width, rest) = header(r.line()?, "HVETOK")?;
        let listed: Vec<usize> = match rest.as_slice() {
            [j] => {
                let list = j
                    .strip_prefix("J=")
                    .ok_or_else(|| HveError::Parse(format!("expected J=, got {j:?}")))?;
                list.split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<usize>()
                            .map_err(|_| HveError::Parse(format!("bad index {s:?}")))
                    })
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(HveError::Parse("token header must carry J=".into())),
        };
        let pattern: Pattern = r.value("pattern")?.parse()?;
        if pattern.width() != width {
            return Err(HveError::WidthMismatch {
                expected: width,
                found: pattern.width(),
            });
        }
        let fixed: Vec<usize> = pattern.fixed_positions().iter().map(|i| i + 1).collect();
        if fixed != listed {
            return Err(HveError::Parse("J does not match the pattern".into()));
        }
        let k0 = r.g("K0", params)?;
        let mut parts = Vec::with_capacity(fixed.len());
        for i in fixed {
            let k1 = r.g(&format!("K{i},1"), params)?;
            let k2 = r.g(&format!("K{i},2"), params)?;
            parts.push((k1, k2));
        }
        Ok(Token { pattern, k0, parts })
    }

    /// Reads several tokens written back to back.
    pub fn many_from_text(text: &str, params: &GroupParams) -> Result<Vec<Self>, HveError> {
        let mut r = Reader::new(text);
        let mut tokens = Vec::new();
        while r.lines.peek().is_some() {
            tokens.push(Self::read(&mut r, params)?);
        }
        Ok(tokens)
    }
}

impl Ciphertext {
    pub fn to_text(&self) -> String {
        let mut out = format!("HVECTX v1 l={}\n", self.width());
        let _ = writeln!(out, "C'={}", self.c_prime);
        let _ = writeln!(out, "C0={}", self.c0);
        for (i, (c1, c2)) in self.parts.iter().enumerate() {
            let _ = writeln!(out, "C{},1={}", i + 1, c1);
            let _ = writeln!(out, "C{},2={}", i + 1, c2);
        }
        out
    }

    pub fn from_text(text: &str, params: &GroupParams) -> Result<Self, HveError> {
        let mut r = Reader::new(text);
        let (width, rest) = header(r.line()?, "HVECTX")?;
        if !rest.is_empty() {
            return Err(HveError::Parse("unexpected ciphertext header fields".into()));
        }
        let c_prime = r.gt("C'", params)?;
        let c0 = r.g("C0", params)?;
        let mut parts = Vec::with_capacity(width);
        for i in 1..=width {
            let c1 = r.g(&format!("C{i},1"), params)?;
            let c2 = r.g(&format!("C{i},2"), params)?;
            parts.push((c1, c2));
        }
        r.finish()?;
        Ok(Ciphertext {
            params: *params,
            c_prime,
            c0,
            parts,
        })
    }
}

impl PublicKey {
    pub fn to_text(&self) -> String {
        let mut out = format!("HVEPK v1 l={}\n{}\n", self.width(), self.params);
        let _ = writeln!(out, "gq={}", self.g_q);
        let _ = writeln!(out, "V={}", self.v);
        let _ = writeln!(out, "A={}", self.a);
        for (i, s) in self.slots.iter().enumerate() {
            let _ = writeln!(out, "U{}={}", i + 1, s.u);
            let _ = writeln!(out, "H{}={}", i + 1, s.h);
            let _ = writeln!(out, "W{}={}", i + 1, s.w);
        }
        out
    }

    /// Parses a public key. Power tables are not stored; call
    /// [`precompute`](Self::precompute) after loading if wanted.
    pub fn from_text(text: &str) -> Result<Self, HveError> {
        let mut r = Reader::new(text);
        let (width, _) = header(r.line()?, "HVEPK")?;
        let params = parse_params(r.line()?)?;
        let g_q = r.g("gq", &params)?;
        let v = r.g("V", &params)?;
        let a = r.gt("A", &params)?;
        let mut slots = Vec::with_capacity(width);
        for i in 1..=width {
            slots.push(PublicSlot {
                u: r.g(&format!("U{i}"), &params)?,
                h: r.g(&format!("H{i}"), &params)?,
                w: r.g(&format!("W{i}"), &params)?,
            });
        }
        r.finish()?;
        Ok(PublicKey {
            params,
            g_q,
            v,
            a,
            slots,
            tables: None,
        })
    }
}

impl SecretKey {
    pub fn to_text(&self) -> String {
        let mut out = format!("HVESK v1 l={}\n{}\n", self.width(), self.params);
        let _ = writeln!(out, "gq={}", self.g_q);
        let _ = writeln!(out, "a={}", self.a);
        let _ = writeln!(out, "g={}", self.g);
        let _ = writeln!(out, "v={}", self.v);
        for (i, s) in self.slots.iter().enumerate() {
            let _ = writeln!(out, "u{}={}", i + 1, s.u);
            let _ = writeln!(out, "h{}={}", i + 1, s.h);
            let _ = writeln!(out, "w{}={}", i + 1, s.w);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, HveError> {
        let mut r = Reader::new(text);
        let (width, _) = header(r.line()?, "HVESK")?;
        let params = parse_params(r.line()?)?;
        let g_q = r.g("gq", &params)?;
        let a_text = r.value("a")?;
        let a: u128 = a_text
            .parse()
            .map_err(|_| HveError::Parse(format!("bad exponent {a_text:?}")))?;
        if a >= params.p() as u128 {
            return Err(HveError::Parse("secret exponent not in Z_P".into()));
        }
        let g = r.g("g", &params)?;
        let v = r.g("v", &params)?;
        let mut slots = Vec::with_capacity(width);
        for i in 1..=width {
            slots.push(SecretSlot {
                u: r.g(&format!("u{i}"), &params)?,
                h: r.g(&format!("h{i}"), &params)?,
                w: r.g(&format!("w{i}"), &params)?,
            });
        }
        r.finish()?;
        let sk = SecretKey {
            params,
            g_q,
            a,
            g,
            v,
            slots,
            tables: None,
        };
        if !sk.check_subgroups() {
            return Err(HveError::Parse("secret key elements outside their subgroups".into()));
        }
        Ok(sk)
    }
}

/// Writes ciphertexts tagged with user ids: a `USER <id>` line before each
/// `HVECTX` block.
pub fn user_ciphertexts_to_text(items: &[(u64, Ciphertext)]) -> String {
    let mut out = String::new();
    for (user, c) in items {
        let _ = writeln!(out, "USER {user}");
        out.push_str(&c.to_text());
    }
    out
}

/// Reads the output of [`user_ciphertexts_to_text`].
pub fn user_ciphertexts_from_text(
    text: &str,
    params: &GroupParams,
) -> Result<Vec<(u64, Ciphertext)>, HveError> {
    let mut out = Vec::new();
    let mut current: Option<(u64, String)> = None;
    let flush = |cur: Option<(u64, String)>, out: &mut Vec<(u64, Ciphertext)>| -> Result<(), HveError> {
        if let Some((user, body)) = cur {
            out.push((user, Ciphertext::from_text(&body, params)?));
        }
        Ok(())
    };
    for line in text.lines() {
        if let Some(id) = line.trim().strip_prefix("USER ") {
            flush(current.take(), &mut out)?;
            let user = id
                .trim()
                .parse()
                .map_err(|_| HveError::Parse(format!("bad user id in {line:?}")))?;
            current = Some((user, String::new()));
        } else if let Some((_, body)) = current.as_mut() {
            body.push_str(line);
            body.push('\n');
        } else if !line.trim().is_empty() && !line.trim().starts_with('#') {
            return Err(HveError::Parse(format!("expected `USER <id>`, got {line:?}")));
        }
    }
    flush(current, &mut out)?;
    Ok(out)
}
