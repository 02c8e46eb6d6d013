//! Exact arithmetic in the Novikov field over the rationals.
//!
//! A [`NovikovScalar`] is a finite sum `Σ aᵢ T^{αᵢ}` together with a truncation
//! level: every omitted term has exponent at least the truncation. An empty
//! term list with infinite truncation is the exact zero; an empty list with a
//! finite truncation is "zero up to precision", which must never be mistaken
//! for an exact zero.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::{fmt_q, parse_q, q, Q};

/// Valuation of a value known only up to some precision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Valuation {
    /// The exact valuation.
    Exact(Q),
    /// Only a lower bound is known (everything visible was truncated away).
    AtLeast(Q),
    /// Exact zero.
    Infinite,
}

impl Valuation {
    /// A lower bound valid in every case; `None` stands for `+∞`.
    pub fn lower_bound(&self) -> Option<&Q> {
        match self {
            Valuation::Exact(v) | Valuation::AtLeast(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    pub fn exact(&self) -> Option<&Q> {
        match self {
            Valuation::Exact(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Valuation::Exact(_))
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Exact(v) => write!(f, "{}", fmt_q(v)),
            Valuation::AtLeast(v) => write!(f, ">= {}", fmt_q(v)),
            Valuation::Infinite => write!(f, "+inf"),
        }
    }
}

/// `min` on `Option<Q>` where `None` is `+∞`.
pub(crate) fn min_opt(a: Option<Q>, b: Option<Q>) -> Option<Q> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(if a <= b { a } else { b }),
    }
}

/// `a + b` on extended rationals (`None` is `+∞`).
pub(crate) fn add_opt(a: Option<&Q>, b: Option<&Q>) -> Option<Q> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a + b),
        _ => None,
    }
}

/// `a < b` on extended rationals.
pub(crate) fn lt_opt(a: &Q, b: Option<&Q>) -> bool {
    b.is_none_or(|b| a < b)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NovikovError {
    #[error("input is zero up to its truncation")]
    ZeroInput,
    #[error("insufficient precision: relative precision {available} < required {required}")]
    InsufficientPrecision { available: String, required: String },
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Element of the Novikov field with rational exponents and rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NovikovScalar {
    terms: Vec<(Q, Q)>,
    truncation: Option<Q>,
}

impl NovikovScalar {
    pub fn zero() -> Self {
        Self { terms: Vec::new(), truncation: None }
    }

    /// Zero known only up to `T^level`.
    pub fn zero_to(level: Q) -> Self {
        Self { terms: Vec::new(), truncation: Some(level) }
    }

    pub fn one() -> Self {
        Self::constant(q(1))
    }

    pub fn constant(c: Q) -> Self {
        Self::monomial(c, Q::zero())
    }

    /// `c·T^exponent`, exact.
    pub fn monomial(c: Q, exponent: Q) -> Self {
        Self::from_terms(vec![(exponent, c)], None)
    }

    /// `T^exponent`.
    pub fn t_pow(exponent: Q) -> Self {
        Self::monomial(q(1), exponent)
    }

    /// Builds a normalized scalar from `(exponent, coefficient)` pairs.
    /// Repeated exponents are summed; zero coefficients and exponents at or
    /// beyond the truncation are dropped.
    pub fn from_terms(mut terms: Vec<(Q, Q)>, truncation: Option<Q>) -> Self {
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(Q, Q)> = Vec::with_capacity(terms.len());
        for (e, c) in terms {
            if !lt_opt(&e, truncation.as_ref()) {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.0 == e => last.1 += c,
                _ => out.push((e, c)),
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        Self { terms: out, truncation }
    }

    pub fn terms(&self) -> &[(Q, Q)] {
        &self.terms
    }

    /// `None` means the value is exact.
    pub fn truncation(&self) -> Option<&Q> {
        self.truncation.as_ref()
    }

    pub fn is_exact(&self) -> bool {
        self.truncation.is_none()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.terms.is_empty() && self.truncation.is_none()
    }

    /// No visible terms: either exact zero or zero up to the truncation.
    pub fn is_zero_to_precision(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn val(&self) -> Valuation {
        match (self.terms.first(), &self.truncation) {
            (Some((e, _)), _) => Valuation::Exact(e.clone()),
            (None, Some(t)) => Valuation::AtLeast(t.clone()),
            (None, None) => Valuation::Infinite,
        }
    }

    /// Lower bound on the valuation (`None` = `+∞`).
    pub fn val_lower(&self) -> Option<Q> {
        self.val().lower_bound().cloned()
    }

    /// Leading `(exponent, coefficient)`.
    pub fn leading(&self) -> Option<&(Q, Q)> {
        self.terms.first()
    }

    /// Coefficient of `T^exponent` among the stored terms.
    pub fn coefficient(&self, exponent: &Q) -> Q {
        self.terms
            .binary_search_by(|(e, _)| e.cmp(exponent))
            .map(|i| self.terms[i].1.clone())
            .unwrap_or_else(|_| Q::zero())
    }

    /// Coarsens the truncation to `min(current, level)`.
    pub fn truncate(&self, level: &Q) -> Self {
        let t = min_opt(self.truncation.clone(), Some(level.clone()));
        Self::from_terms(self.terms.clone(), t)
    }

    pub fn neg(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
            truncation: self.truncation.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let t = min_opt(self.truncation.clone(), other.truncation.clone());
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(terms, t)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(e, x)| (e.clone(), x * c)).collect(),
            truncation: self.truncation.clone(),
        }
    }

    /// Multiplies by `T^shift`.
    pub fn shift(&self, shift: &Q) -> Self {
        Self {
            terms: self.terms.iter().map(|(e, c)| (e + shift, c.clone())).collect(),
            truncation: self.truncation.as_ref().map(|t| t + shift),
        }
    }

    /// Product. The result truncation is
    /// `min(trunc(a) + val(b), trunc(b) + val(a))` with lower-bound valuations.
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_exact_zero() || other.is_exact_zero() {
            return Self::zero();
        }
        let va = self.val_lower();
        let vb = other.val_lower();
        let t = min_opt(
            add_opt(self.truncation.as_ref(), vb.as_ref()),
            add_opt(other.truncation.as_ref(), va.as_ref()),
        );
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e = e1 + e2;
                if lt_opt(&e, t.as_ref()) {
                    terms.push((e, c1 * c2));
                }
            }
        }
        Self::from_terms(terms, t)
    }

    /// Exact quotient of two exact finite sums, or `None` when `other` does
    /// not divide `self` as a Puiseux polynomial.
    pub fn div_exact(&self, other: &Self) -> Option<Self> {
        if !self.is_exact() || !other.is_exact() || other.is_exact_zero() {
            return None;
        }
        let (b_lo, b_hi) = (&other.terms[0].0, &other.terms[other.terms.len() - 1]);
        let mut rem = self.clone();
        let mut quotient = Vec::new();
        while let (Some(lo), Some(hi)) = (rem.terms.first(), rem.terms.last()) {
            // Quotient exponents must lie in [lo − b_lo, hi − b_hi].
            if &hi.0 - &b_hi.0 < &lo.0 - b_lo {
                return None;
            }
            let t = (&hi.0 - &b_hi.0, &hi.1 / &b_hi.1);
            rem = rem.sub(&Self::monomial(t.1.clone(), t.0.clone()).mul(other));
            quotient.push(t);
        }
        Some(Self::from_terms(quotient, None))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Inverse of a nonzero element with truncation `cutoff`.
    ///
    /// Writing `a = c·T^v·(1 + p)` with `val(p) > 0`, the inverse is
    /// `c⁻¹·T^{-v}·Σ (−p)^m`. Exact monomials invert exactly.
    pub fn unit_inverse(&self, cutoff: &Q) -> Result<Self, NovikovError> {
        let (v, c) = match self.terms.first() {
            Some(lead) => lead.clone(),
            None => return Err(NovikovError::ZeroInput),
        };
        if self.terms.len() == 1 && self.truncation.is_none() {
            return Ok(Self::monomial(c.recip(), -v));
        }
        // Relative precision needed for the normalized series.
        let required = cutoff + &v;
        if let Some(t) = &self.truncation {
            let available = t - &v;
            if available < required {
                return Err(NovikovError::InsufficientPrecision {
                    available: fmt_q(&available),
                    required: fmt_q(&required),
                });
            }
        }
        if required <= Q::zero() {
            return Ok(Self::zero_to(cutoff.clone()));
        }
        let normalized = self.shift(&-v.clone()).scale(&c.recip());
        let tail: Vec<(Q, Q)> = normalized.terms[1..].iter().filter(|(e, _)| e < &required).cloned().collect();
        // Long division of 1 by 1 + tail, lowest exponent first.
        let mut rem: BTreeMap<Q, Q> = BTreeMap::from([(Q::zero(), Q::one())]);
        let mut quotient = Vec::new();
        while let Some((e, a)) = rem.pop_first() {
            if e >= required {
                break;
            }
            for (f, b) in &tail {
                let g = &e + f;
                if g >= required {
                    break;
                }
                let c = rem.remove(&g).unwrap_or_else(Q::zero) - &a * b;
                if !c.is_zero() {
                    rem.insert(g, c);
                }
            }
            quotient.push((e, a));
        }
        Ok(Self::from_terms(quotient, Some(required)).scale(&c.recip()).shift(&-v).truncate(cutoff))
    }

    /// Exact equality of visible terms below `level`.
    pub fn agrees_below(&self, other: &Self, level: &Q) -> bool {
        self.truncate(level).terms == other.truncate(level).terms
    }
}

impl Default for NovikovScalar {
    fn default() -> Self {
        Self::zero()
    }
}

fn fmt_exponent(e: &Q) -> String {
    if e.denom().is_one() && !e.is_negative() {
        fmt_q(e)
    } else {
        format!("({})", fmt_q(e))
    }
}

impl fmt::Display for NovikovScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            f.write_str("0")?;
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if e.is_zero() {
                write!(f, "{}", fmt_q(c))?;
            } else {
                write!(f, "{}*T^{}", fmt_q(c), fmt_exponent(e))?;
            }
        }
        if let Some(t) = &self.truncation {
            write!(f, " [trunc {}]", fmt_q(t))?;
        }
        Ok(())
    }
}

impl FromStr for NovikovScalar {
    type Err = NovikovError;

    /// Parses `3*T^(1/2) + -1*T^2 [trunc 7/2]`. Also accepts `T^e`, bare
    /// coefficients, `-` between terms, and `0`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |pos: usize, msg: &str| NovikovError::Parse { pos, msg: msg.to_string() };
        let (body, truncation) = match s.find('[') {
            Some(open) => {
                let close = s[open..].find(']').ok_or_else(|| err(open, "unclosed `[`"))? + open;
                let inner = s[open + 1..close].trim();
                let rest = inner
                    .strip_prefix("trunc")
                    .ok_or_else(|| err(open + 1, "expected `trunc`"))?;
                let t = parse_q(rest).ok_or_else(|| err(open + 6, "invalid truncation"))?;
                if !s[close + 1..].trim().is_empty() {
                    return Err(err(close + 1, "trailing input"));
                }
                (&s[..open], Some(t))
            }
            None => (s, None),
        };
        let mut terms = Vec::new();
        let chars: Vec<(usize, char)> = body.char_indices().collect();
        // Split on top-level `+`/`-` that separate terms (not inside parentheses,
        // not directly after `^` or `*`).
        let mut pieces: Vec<(usize, String)> = Vec::new();
        let mut depth = 0i32;
        let mut cur = String::new();
        let mut cur_start = 0usize;
        let mut prev_sig: Option<char> = None;
        for &(pos, ch) in &chars {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
            let separator = depth == 0
                && (ch == '+' || ch == '-')
                && matches!(prev_sig, Some(p) if p != '^' && p != '*' && p != '+' && p != '-');
            if separator {
                pieces.push((cur_start, std::mem::take(&mut cur)));
                cur_start = pos;
                if ch == '-' {
                    cur.push('-');
                }
            } else {
                cur.push(ch);
            }
            if !ch.is_whitespace() {
                prev_sig = Some(ch);
            }
        }
        pieces.push((cur_start, cur));
        for (pos, piece) in pieces {
            let piece: String = piece.chars().filter(|c| !c.is_whitespace()).collect();
            if piece.is_empty() {
                return Err(err(pos, "empty term"));
            }
            let (coef_str, exp_str) = match piece.find('T') {
                Some(tpos) => {
                    let coef = piece[..tpos].trim_end_matches('*');
                    let after = &piece[tpos + 1..];
                    let exp = if after.is_empty() {
                        "1".to_string()
                    } else {
                        let e = after.strip_prefix('^').ok_or_else(|| err(pos, "expected `^` after `T`"))?;
                        e.trim_start_matches('(').trim_end_matches(')').to_string()
                    };
                    let coef = match coef {
                        "" | "+" => "1",
                        "-" => "-1",
                        c => c,
                    };
                    (coef.to_string(), exp)
                }
                None => (piece.clone(), "0".to_string()),
            };
            let c = parse_q(coef_str.trim_start_matches('+')).ok_or_else(|| err(pos, "invalid coefficient"))?;
            let e = parse_q(&exp_str).ok_or_else(|| err(pos, "invalid exponent"))?;
            terms.push((e, c));
        }
        Ok(Self::from_terms(terms, truncation))
    }
}

/// Total order on extended valuations with `+∞` largest.
pub fn cmp_opt(a: Option<&Q>, b: Option<&Q>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (Some(a), Some(b)) => a.cmp(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qf;

    fn s(x: &str) -> NovikovScalar {
        x.parse().unwrap()
    }

    #[test]
    fn exact_division() {
        let a: NovikovScalar = "1 + 2T^(1/2) + T".parse().unwrap();
        let b: NovikovScalar = "1 + T^(1/2)".parse().unwrap();
        assert_eq!(a.div_exact(&b), Some(b.clone()));
        assert_eq!(a.shift(&q(3)).div_exact(&b.shift(&q(1))), Some(b.shift(&q(2))));
        assert_eq!(b.div_exact(&a), None);
        let c: NovikovScalar = "1 + T".parse().unwrap();
        assert_eq!(c.div_exact(&b), None);
    }

    #[test]
    fn valuation_cases() {
        assert_eq!(s("T^(1/2) + 3*T^2").val(), Valuation::Exact(qf(1, 2)));
        assert_eq!(NovikovScalar::zero().val(), Valuation::Infinite);
        assert_eq!(NovikovScalar::zero_to(q(5)).val(), Valuation::AtLeast(q(5)));
    }

    #[test]
    fn products() {
        assert_eq!(s("1 + T").mul(&s("1 - T")), s("1 + -1*T^2"));
        assert_eq!(s("T^(1/3)").mul(&s("T^(2/3)")), s("T"));
        // Oracle: untruncated product 1 + 2T + T², then keep exponents < 2.
        let a = s("1 + T [trunc 2]");
        let full = s("1 + T").mul(&s("1 + T"));
        let expected = NovikovScalar::from_terms(full.terms().to_vec(), Some(q(2)));
        assert_eq!(a.mul(&a), expected);
        assert_eq!(a.mul(&a).to_string(), "1 + 2*T^1 [trunc 2]");
    }

    #[test]
    fn inverses() {
        let inv = s("1 + T").unit_inverse(&q(3)).unwrap();
        assert_eq!(inv, s("1 - T + T^2 [trunc 3]"));
        // Oracle: (1+T)·inv ≡ 1 mod T³.
        assert!(s("1 + T").mul(&inv).agrees_below(&NovikovScalar::one(), &q(3)));
        assert_eq!(s("T^2").unit_inverse(&q(5)).unwrap(), s("T^(-2)"));
        assert_eq!(s("2").unit_inverse(&q(4)).unwrap(), s("1/2"));
        assert_eq!(NovikovScalar::zero_to(q(1)).unit_inverse(&q(1)), Err(NovikovError::ZeroInput));
        assert!(matches!(
            s("1 + T [trunc 2]").unit_inverse(&q(5)),
            Err(NovikovError::InsufficientPrecision { .. })
        ));
    }

    #[test]
    fn subtraction_keeps_precision_loss_visible() {
        let a = s("T^(-1) + T [trunc 3]");
        let b = s("T^(-1)");
        let d = a.sub(&b).sub(&s("T"));
        assert!(d.is_zero_to_precision());
        assert!(!d.is_exact_zero());
        assert_eq!(d.val(), Valuation::AtLeast(q(3)));
    }

    #[test]
    fn text_round_trip() {
        let x = s("3*T^(1/2) + -1*T^2 [trunc 7/2]");
        assert_eq!(x.to_string(), "3*T^(1/2) + -1*T^2 [trunc 7/2]");
        assert_eq!(s(&x.to_string()), x);
        assert_eq!(s("0 [trunc 5]"), NovikovScalar::zero_to(q(5)));
        assert_eq!(s("2 - T^(-3/2)").to_string(), "-1*T^(-3/2) + 2");
        assert!("3*T^".parse::<NovikovScalar>().is_err());
        assert!("1 [trunc x]".parse::<NovikovScalar>().is_err());
    }
}
