//! Exact rational helpers shared by every module.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Arbitrary precision rational number.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn q_from_bigint(n: BigInt) -> Q {
    Q::from_integer(n)
}

/// Parses `p`, `-p`, `p/q` (surrounding whitespace allowed).
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Q::new(n, d))
        }
        None => s.parse::<BigInt>().ok().map(Q::from_integer),
    }
}

/// `p/q`, or `p` when the denominator is one.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Decimal rendering with a fixed number of fractional digits (display only).
pub fn q_to_decimal(x: &Q, digits: usize) -> String {
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = x * Q::from_integer(scale.clone());
    let rounded = scaled.round().to_integer();
    let neg = rounded.is_negative();
    let abs = rounded.abs();
    let (int_part, frac_part) = abs.div_rem(&scale);
    let mut frac = frac_part.to_string();
    while frac.len() < digits {
        frac.insert(0, '0');
    }
    let frac = frac.trim_end_matches('0');
    let sign = if neg && !(int_part.is_zero() && frac.is_empty()) { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac}")
    }
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Smallest integer `>= x`.
pub fn ceil_to_i64(x: &Q) -> Option<i64> {
    x.ceil().to_integer().to_i64()
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

/// Solves `a*x + b*y = gcd(a, b)`, returning `(g, x, y)` with `g >= 0`.
pub fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let e = a.extended_gcd(&b);
    if e.gcd < 0 {
        (-e.gcd, -e.x, -e.y)
    } else {
        (e.gcd, e.x, e.y)
    }
}

/// Serde adapter writing rationals as `"p/q"` strings (integers may also be given as numbers).
pub mod serde_q {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        fmt_q(x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let raw = QRepr::deserialize(d)?;
        raw.into_q().map_err(serde::de::Error::custom)
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum QRepr {
        Int(i64),
        Str(String),
    }

    impl QRepr {
        pub(crate) fn into_q(self) -> Result<Q, String> {
            match self {
                QRepr::Int(n) => Ok(q(n)),
                QRepr::Str(s) => parse_q(&s).ok_or_else(|| format!("invalid rational `{s}`")),
            }
        }
    }
}

/// Serde adapter for vectors of rationals.
pub mod serde_qvec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(fmt_q).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let raw = Vec::<serde_q::QRepr>::deserialize(d)?;
        raw.into_iter()
            .map(|r| r.into_q().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// A point or vector with rational coordinates.
pub type Point = Vec<Q>;

pub fn point(coords: &[Q]) -> Point {
    coords.to_vec()
}

pub fn pt2(a: Q, b: Q) -> Point {
    vec![a, b]
}

pub fn fmt_point(p: &[Q]) -> String {
    let parts: Vec<String> = p.iter().map(fmt_q).collect();
    format!("({})", parts.join(","))
}

pub struct DisplayQ<'a>(pub &'a Q);

impl fmt::Display for DisplayQ<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_q(self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_q("3/6"), Some(qf(1, 2)));
        assert_eq!(parse_q(" -7 "), Some(q(-7)));
        assert_eq!(parse_q("1/0"), None);
        assert_eq!(fmt_q(&qf(-4, 6)), "-2/3");
        assert_eq!(fmt_q(&q(5)), "5");
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(q_to_decimal(&qf(1, 3), 6), "0.333333");
        assert_eq!(q_to_decimal(&qf(-1, 2), 6), "-0.5");
        assert_eq!(q_to_decimal(&q(2), 6), "2");
        assert_eq!(q_to_decimal(&qf(-1, 10_000_000), 6), "0");
    }

    #[test]
    fn bezout() {
        let (g, x, y) = ext_gcd(3, -5);
        assert_eq!(g, 1);
        assert_eq!(3 * x - 5 * y, 1);
    }
}
