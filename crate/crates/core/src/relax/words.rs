//! Noncommutative words over the measurement operators and their rewriting.
//!
//! Binary outcomes are eliminated symbolically: only `X_{0|x}`, `Y_{0|y}` and
//! the collective elements with `ab ≠ 11` are letters. The remaining
//! operators are affine combinations of these (`X_{1|x} = 1 - X_{0|x}`,
//! `Z_{11|xy} = 1 - Z_{00|xy} - Z_{01|xy} - Z_{10|xy}`).
//!
//! Rewrite rules: `X` and `Y` letters are idempotent and commute with each
//! other (but not with `Z`). Collective letters satisfy no relation besides
//! Hermiticity.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OperatorVariable {
    /// `X_{0|x}`.
    ProjectorA { x: u8 },
    /// `Y_{0|y}`.
    ProjectorB { y: u8 },
    /// `Z_{ab|xy}` with `(a, b) ≠ (1, 1)`.
    Collective { a: u8, b: u8, x: u8, y: u8 },
}

impl OperatorVariable {
    fn is_collective(self) -> bool {
        matches!(self, OperatorVariable::Collective { .. })
    }
}

impl fmt::Display for OperatorVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            OperatorVariable::ProjectorA { x } => write!(f, "X{x}"),
            OperatorVariable::ProjectorB { y } => write!(f, "Y{y}"),
            OperatorVariable::Collective { a, b, x, y } => write!(f, "Z{a}{b}|{x}{y}"),
        }
    }
}

/// A word; canonical words are fixed points of [`canonicalize`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Monomial(pub Vec<OperatorVariable>);

impl Monomial {
    pub fn identity() -> Self {
        Monomial(Vec::new())
    }

    pub fn letter(v: OperatorVariable) -> Self {
        Monomial(vec![v])
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Hermitian adjoint: every letter is Hermitian, so this reverses.
    pub fn adjoint(&self) -> Monomial {
        canonicalize(&self.0.iter().rev().copied().collect::<Vec<_>>())
    }

    pub fn concat(&self, other: &Monomial) -> Monomial {
        let mut w = self.0.clone();
        w.extend_from_slice(&other.0);
        canonicalize(&w)
    }

    pub fn is_canonical(&self) -> bool {
        canonicalize(&self.0) == *self
    }

    /// Representative of `{w, w†}`, used as the moment identifier: moments
    /// are real, so `<w> = <w†>`.
    pub fn moment_key(&self) -> Monomial {
        let w = canonicalize(&self.0);
        let r = w.adjoint();
        if r < w {
            r
        } else {
            w
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Sorts `X` before `Y` inside every run free of collective letters, then
/// merges equal neighbours.
pub fn canonicalize(word: &[OperatorVariable]) -> Monomial {
    fn flush(seg: &mut Vec<OperatorVariable>, out: &mut Vec<OperatorVariable>) {
        seg.sort_by_key(|l| matches!(l, OperatorVariable::ProjectorB { .. }));
        let start = out.len();
        for &l in seg.iter() {
            if out.len() > start && out[out.len() - 1] == l {
                continue;
            }
            out.push(l);
        }
        seg.clear();
    }
    let mut out = Vec::with_capacity(word.len());
    let mut seg = Vec::new();
    for &l in word {
        if l.is_collective() {
            flush(&mut seg, &mut out);
            out.push(l);
        } else {
            seg.push(l);
        }
    }
    flush(&mut seg, &mut out);
    Monomial(out)
}

/// Real linear combination of canonical words.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial(pub BTreeMap<Monomial, f64>);

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial(BTreeMap::new())
    }

    pub fn one() -> Self {
        Polynomial::monomial(Monomial::identity(), 1.0)
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let mut p = BTreeMap::new();
        p.insert(m, c);
        Polynomial(p)
    }

    pub fn var(v: OperatorVariable) -> Self {
        Polynomial::monomial(Monomial::letter(v), 1.0)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.0.clone();
        for (m, c) in &other.0 {
            *out.entry(m.clone()).or_insert(0.0) += c;
        }
        out.retain(|_, c| *c != 0.0);
        Polynomial(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out: BTreeMap<Monomial, f64> = self.0.iter().map(|(m, c)| (m.clone(), c * s)).collect();
        out.retain(|_, c| *c != 0.0);
        Polynomial(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                *out.entry(m1.concat(m2)).or_insert(0.0) += c1 * c2;
            }
        }
        out.retain(|_, c| *c != 0.0);
        Polynomial(out)
    }

    pub fn left_mul(&self, m: &Monomial) -> Polynomial {
        Polynomial::monomial(m.clone(), 1.0).mul(self)
    }

    pub fn right_mul(&self, m: &Monomial) -> Polynomial {
        self.mul(&Polynomial::monomial(m.clone(), 1.0))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{c:+}·{m}")?;
        }
        Ok(())
    }
}

/// `X_{a|x}` for a binary outcome.
pub fn proj_a(a: usize, x: usize) -> Polynomial {
    let v = Polynomial::var(OperatorVariable::ProjectorA { x: x as u8 });
    if a == 0 {
        v
    } else {
        Polynomial::one().sub(&v)
    }
}

/// `Y_{b|y}` for a binary outcome.
pub fn proj_b(b: usize, y: usize) -> Polynomial {
    let v = Polynomial::var(OperatorVariable::ProjectorB { y: y as u8 });
    if b == 0 {
        v
    } else {
        Polynomial::one().sub(&v)
    }
}

/// `Z_{ab|xy}`, with the `ab = 11` element eliminated through completeness.
pub fn collective(a: usize, b: usize, x: usize, y: usize) -> Polynomial {
    let z = |a: u8, b: u8| Polynomial::var(OperatorVariable::Collective { a, b, x: x as u8, y: y as u8 });
    if (a, b) == (1, 1) {
        Polynomial::one().sub(&z(0, 0)).sub(&z(0, 1)).sub(&z(1, 0))
    } else {
        z(a as u8, b as u8)
    }
}

/// `X_{a|x} Y_{b|y}`.
pub fn product(a: usize, b: usize, x: usize, y: usize) -> Polynomial {
    proj_a(a, x).mul(&proj_b(b, y))
}
