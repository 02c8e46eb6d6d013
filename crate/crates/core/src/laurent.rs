//! Lattice Laurent series over the Novikov field, valued on a reference polytope.
//!
//! A [`LatticeSeries`] stores finitely many terms `a_j x^j` and a tail bound:
//! every omitted term has polytope valuation at least `tail` on the reference
//! polytope. The polytope valuation of a term is `val(a_j) + min_{m∈P} j(m)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::novikov::{lt_opt, min_opt, NovikovError, NovikovScalar, Valuation};
use crate::polygon::{dot_i, Halfspace, PolygonError, PolygonJson, RationalPolygon};
use crate::rational::{fmt_q, parse_q, q, Q};

pub type Exponent = Vec<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LaurentError {
    #[error("polygon is not contained in the reference polygon")]
    PolygonNotContained,
    #[error("series have different reference polygons")]
    ReferenceMismatch,
    #[error("expansion diverges: perturbation has valuation {0} <= 0 somewhere on the polygon")]
    DivergentExpansion(String),
    #[error("substitution does not control the tail of the input series")]
    UncontrolledTail,
    #[error("exponent {0:?} is not an integral combination of the substitution basis")]
    NotIntegral(Exponent),
    #[error("substitution basis is not unimodular")]
    NotUnimodular,
    #[error("precision target {0} not reached")]
    PrecisionNotReached(String),
    #[error("series parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Polygon(#[from] PolygonError),
    #[error(transparent)]
    Novikov(#[from] NovikovError),
}

/// `min_{m∈P} j(m)`.
pub fn min_pairing(j: &[i64], p: &RationalPolygon) -> Q {
    p.linear_range(j).0
}

fn term_val(j: &[i64], c: &NovikovScalar, p: &RationalPolygon) -> Option<Q> {
    c.val_lower().map(|v| v + min_pairing(j, p))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeSeries {
    terms: BTreeMap<Exponent, NovikovScalar>,
    tail: Option<Q>,
    reference: RationalPolygon,
}

impl LatticeSeries {
    /// Normalizes: coefficient truncations are folded into the tail, so stored
    /// coefficients are exact, and terms at or beyond the tail are dropped.
    pub fn new(
        reference: RationalPolygon,
        terms: impl IntoIterator<Item = (Exponent, NovikovScalar)>,
        tail: Option<Q>,
    ) -> Self {
        let mut acc: BTreeMap<Exponent, NovikovScalar> = BTreeMap::new();
        for (j, c) in terms {
            assert_eq!(j.len(), reference.dim(), "exponent dimension");
            let e = acc.entry(j).or_insert_with(NovikovScalar::zero);
            *e = e.add(&c);
        }
        let mut tail = tail;
        let mut exact: Vec<(Exponent, NovikovScalar)> = Vec::new();
        for (j, c) in acc {
            if let Some(t) = c.truncation() {
                tail = min_opt(tail, Some(t + min_pairing(&j, &reference)));
            }
            let c = NovikovScalar::from_terms(c.terms().to_vec(), None);
            if !c.is_exact_zero() {
                exact.push((j, c));
            }
        }
        let terms = exact
            .into_iter()
            .filter(|(j, c)| term_val(j, c, &reference).is_some_and(|v| lt_opt(&v, tail.as_ref())))
            .collect();
        Self { terms, tail, reference }
    }

    pub fn zero(reference: RationalPolygon) -> Self {
        Self { terms: BTreeMap::new(), tail: None, reference }
    }

    pub fn monomial(reference: RationalPolygon, j: Exponent, c: NovikovScalar) -> Self {
        Self::new(reference, [(j, c)], None)
    }

    /// The monomial `x^j` with coefficient one.
    pub fn x(reference: RationalPolygon, j: &[i64]) -> Self {
        Self::monomial(reference, j.to_vec(), NovikovScalar::one())
    }

    pub fn constant(reference: RationalPolygon, c: NovikovScalar) -> Self {
        let n = reference.dim();
        Self::monomial(reference, vec![0; n], c)
    }

    pub fn one(reference: RationalPolygon) -> Self {
        Self::constant(reference, NovikovScalar::one())
    }

    pub fn terms(&self) -> &BTreeMap<Exponent, NovikovScalar> {
        &self.terms
    }

    pub fn tail(&self) -> Option<&Q> {
        self.tail.as_ref()
    }

    pub fn reference(&self) -> &RationalPolygon {
        &self.reference
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    pub fn coefficient(&self, j: &[i64]) -> NovikovScalar {
        self.terms.get(j).cloned().unwrap_or_default()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.terms.is_empty() && self.tail.is_none()
    }

    /// Valuation of a single stored term on the reference polytope.
    pub fn term_valuation(&self, j: &[i64]) -> Option<Q> {
        self.terms.get(j).and_then(|c| term_val(j, c, &self.reference))
    }

    /// `inf_{m∈P} inf_j (val(a_j) + j(m))`, flagged as a lower bound when the tail governs it.
    pub fn val_on_polygon(&self, p: &RationalPolygon) -> Result<Valuation, LaurentError> {
        if !p.is_subset_of(&self.reference) {
            return Err(LaurentError::PolygonNotContained);
        }
        Ok(self.val_unchecked(p))
    }

    fn val_unchecked(&self, p: &RationalPolygon) -> Valuation {
        let best = self.terms.iter().filter_map(|(j, c)| term_val(j, c, p)).min();
        match (best, &self.tail) {
            (Some(v), t) if lt_opt(&v, t.as_ref()) => Valuation::Exact(v),
            (_, Some(t)) => Valuation::AtLeast(t.clone()),
            (Some(v), None) => Valuation::Exact(v),
            (None, None) => Valuation::Infinite,
        }
    }

    /// Valuation on the reference polytope.
    pub fn val(&self) -> Valuation {
        self.val_unchecked(&self.reference)
    }

    /// Same terms viewed on a smaller polytope. The tail bound stays valid
    /// because an infimum over a subset can only grow.
    pub fn restrict(&self, q_poly: &RationalPolygon) -> Result<Self, LaurentError> {
        if !q_poly.is_subset_of(&self.reference) {
            return Err(LaurentError::PolygonNotContained);
        }
        Ok(Self { terms: self.terms.clone(), tail: self.tail.clone(), reference: q_poly.clone() })
    }

    /// Re-anchors on any polytope without a containment check. Only the term
    /// list is meaningful afterwards when the tail is finite.
    pub fn with_reference_unchecked(&self, p: &RationalPolygon) -> Self {
        Self { terms: self.terms.clone(), tail: self.tail.clone(), reference: p.clone() }
    }

    /// Drops terms with valuation `>= level` and lowers the tail to `level`.
    pub fn truncate(&self, level: &Q) -> Self {
        let tail = min_opt(self.tail.clone(), Some(level.clone()));
        Self::new(self.reference.clone(), self.terms.clone(), tail)
    }

    fn check_ref(&self, other: &Self) -> Result<(), LaurentError> {
        if self.reference != other.reference {
            return Err(LaurentError::ReferenceMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, LaurentError> {
        self.check_ref(other)?;
        let tail = min_opt(self.tail.clone(), other.tail.clone());
        let terms = self.terms.iter().chain(other.terms.iter()).map(|(j, c)| (j.clone(), c.clone()));
        Ok(Self::new(self.reference.clone(), terms, tail))
    }

    pub fn neg(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(j, c)| (j.clone(), c.neg())).collect(),
            tail: self.tail.clone(),
            reference: self.reference.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LaurentError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &NovikovScalar) -> Self {
        let shift = c.val_lower();
        let tail = match (&self.tail, &shift) {
            (Some(t), Some(s)) => Some(t + s),
            _ => None,
        };
        let terms = self.terms.iter().map(|(j, a)| (j.clone(), a.mul(c)));
        Self::new(self.reference.clone(), terms, tail)
    }

    /// Cauchy product. Omitted parts contribute at least
    /// `min(tail(f) + val(g), tail(g) + val(f))`.
    pub fn mul(&self, other: &Self) -> Result<Self, LaurentError> {
        self.mul_to(other, None)
    }

    fn mul_to(&self, other: &Self, level: Option<&Q>) -> Result<Self, LaurentError> {
        self.check_ref(other)?;
        if self.is_exact_zero() || other.is_exact_zero() {
            return Ok(Self::zero(self.reference.clone()));
        }
        let vf = self.val().lower_bound().cloned();
        let vg = other.val().lower_bound().cloned();
        let t1 = match (&self.tail, &vg) {
            (Some(t), Some(v)) => Some(t + v),
            _ => None,
        };
        let t2 = match (&other.tail, &vf) {
            (Some(t), Some(v)) => Some(t + v),
            _ => None,
        };
        let mut tail = min_opt(t1, t2);
        if tail.is_some() {
            tail = min_opt(tail, level.cloned());
        }
        let mut terms: Vec<(Exponent, NovikovScalar)> = Vec::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let j: Exponent = a.iter().zip(b).map(|(x, y)| x + y).collect();
                terms.push((j, ca.mul(cb)));
            }
        }
        Ok(Self::new(self.reference.clone(), terms, tail))
    }

    /// Multiplication truncated at `level`; exact products are kept exact.
    pub fn mul_trunc(&self, other: &Self, level: &Q) -> Result<Self, LaurentError> {
        self.mul_to(other, Some(level))
    }

    pub fn pow_trunc(&self, n: u32, level: &Q) -> Result<Self, LaurentError> {
        let mut acc = Self::one(self.reference.clone());
        for _ in 0..n {
            acc = acc.mul_trunc(self, level)?;
        }
        Ok(acc)
    }

    /// Applies `j ↦ j'` with coefficient factor `T^{shift(j)}` to every term,
    /// re-anchoring on `reference`. The caller supplies the new tail.
    pub fn relabel(
        &self,
        reference: RationalPolygon,
        tail: Option<Q>,
        f: impl Fn(&[i64]) -> (Exponent, Q),
    ) -> Self {
        let terms = self.terms.iter().map(|(j, c)| {
            let (j2, s) = f(j);
            (j2, c.shift(&s))
        });
        Self::new(reference, terms, tail)
    }

    /// Visible terms with valuation below `level` agree exactly.
    pub fn agrees_below(&self, other: &Self, level: &Q) -> bool {
        self.truncate(level).terms == other.truncate(level).terms
    }

    /// Tropicalization `m ↦ min_j (val(a_j) + j(m))` at a point (visible terms only).
    pub fn trop_at(&self, m: &[Q]) -> Option<Q> {
        self.terms.iter().filter_map(|(j, c)| c.val_lower().map(|v| v + dot_i(j, m))).min()
    }

    /// Multiplicative inverse of a unit that is dominated by one monomial on
    /// the reference polytope, truncated at `level`.
    pub fn unit_inverse(&self, level: &Q) -> Result<Self, LaurentError> {
        let reference = &self.reference;
        let mut best_delta: Option<Q> = None;
        for (j, c) in &self.terms {
            let (e, a) = c.leading().cloned().expect("stored coefficients are nonzero");
            let lead = Self::monomial(reference.clone(), j.clone(), NovikovScalar::monomial(a.clone(), e.clone()));
            let lead_inv = Self::monomial(
                reference.clone(),
                j.iter().map(|x| -x).collect(),
                NovikovScalar::monomial(a.recip(), -e),
            );
            let p = self.sub(&lead)?.mul(&lead_inv)?;
            let delta = match p.val() {
                Valuation::Exact(v) | Valuation::AtLeast(v) => v,
                Valuation::Infinite => return Ok(lead_inv),
            };
            if !delta.is_positive() {
                if best_delta.as_ref().is_none_or(|b| &delta > b) {
                    best_delta = Some(delta);
                }
                continue;
            }
            // (1 + p)^{-1} = Σ (−p)^m, truncated relative to the lead.
            let shift = lead_inv.val().lower_bound().cloned().unwrap_or_else(Q::zero);
            let rel = level - &shift;
            if !rel.is_positive() {
                return Ok(Self::new(reference.clone(), [], Some(level.clone())));
            }
            let steps = (&rel / &delta).ceil().to_integer().to_u32().unwrap_or(u32::MAX);
            let minus_p = p.neg().truncate(&rel);
            let mut sum = Self::one(reference.clone());
            let mut power = Self::one(reference.clone());
            for _ in 0..steps {
                power = power.mul_trunc(&minus_p, &rel)?;
                sum = sum.add(&power)?;
            }
            let sum = sum.truncate(&rel);
            return Ok(sum.mul(&lead_inv)?.truncate(level));
        }
        Err(LaurentError::DivergentExpansion(best_delta.map(|d| fmt_q(&d)).unwrap_or_else(|| "+inf".into())))
    }
}

/// `x^{l_H}` for a co-oriented rational hyperplane: the primitive covector
/// vanishing on the hyperplane direction and positive on the co-oriented side.
pub fn hyperplane_monomial(h: &Halfspace, p: &RationalPolygon) -> LatticeSeries {
    LatticeSeries::x(p.clone(), &h.normal)
}

/// Lattice substitution `x^{Σ c_i b_i} ↦ Π (x^{m_i} u_i)^{c_i}` over a target polytope.
#[derive(Clone, Debug)]
pub struct UnitSubstitution {
    /// Unimodular basis `b_i` of the source lattice.
    pub basis: Vec<Exponent>,
    /// Image monomial `m_i` of each basis vector.
    pub monomials: Vec<Exponent>,
    /// Unit factor `u_i` of each basis vector, on the target polytope.
    pub units: Vec<LatticeSeries>,
    pub target: RationalPolygon,
    /// Whether `val_target(φ(g)) >= val_source(g)` holds for all `g`, which lets
    /// the input tail carry over unchanged.
    pub valuation_preserving: bool,
}

impl UnitSubstitution {
    pub fn identity(target: RationalPolygon) -> Self {
        let n = target.dim();
        let basis: Vec<Exponent> = (0..n)
            .map(|i| (0..n).map(|k| i64::from(k == i)).collect())
            .collect();
        Self {
            monomials: basis.clone(),
            units: (0..n).map(|_| LatticeSeries::one(target.clone())).collect(),
            basis,
            target,
            valuation_preserving: true,
        }
    }

    fn coordinates(&self, j: &[i64]) -> Result<Vec<i64>, LaurentError> {
        let n = self.basis.len();
        // Solve Σ c_i b_i = j.
        let rows: Vec<Vec<Q>> = (0..n).map(|r| (0..n).map(|i| q(self.basis[i][r])).collect()).collect();
        let rhs: Vec<Q> = j.iter().map(|&x| q(x)).collect();
        let sol = crate::polygon::solve(&rows, &rhs).ok_or(LaurentError::NotUnimodular)?;
        sol.iter()
            .map(|c| {
                if c.is_integer() {
                    c.to_integer().to_i64().ok_or_else(|| LaurentError::NotIntegral(j.to_vec()))
                } else {
                    Err(LaurentError::NotIntegral(j.to_vec()))
                }
            })
            .collect()
    }
}

/// Applies a monomial-times-unit substitution, truncated at `cutoff` on the target polytope.
pub fn substitute_unit(f: &LatticeSeries, sub: &UnitSubstitution, cutoff: &Q) -> Result<LatticeSeries, LaurentError> {
    let target = &sub.target;
    if f.tail.is_some() && !sub.valuation_preserving {
        return Err(LaurentError::UncontrolledTail);
    }
    let coords: Vec<(Vec<i64>, &NovikovScalar)> =
        f.terms.iter().map(|(j, c)| Ok((sub.coordinates(j)?, c))).collect::<Result<_, LaurentError>>()?;
    let mut working = cutoff.clone();
    for _ in 0..16 {
        let mut inverses: Vec<Option<LatticeSeries>> = vec![None; sub.units.len()];
        let mut powers: HashMap<(usize, i64), LatticeSeries> = HashMap::new();
        let mut out_terms: Vec<(Exponent, NovikovScalar)> = Vec::new();
        let mut out_tail: Option<Q> = None;
        for (c, a) in &coords {
            let mut mono = vec![0i64; target.dim()];
            for (ci, mi) in c.iter().zip(&sub.monomials) {
                for (m, x) in mono.iter_mut().zip(mi) {
                    *m += ci * x;
                }
            }
            let mut term = LatticeSeries::monomial(target.clone(), mono, (*a).clone());
            for (i, &ci) in c.iter().enumerate() {
                if ci == 0 {
                    continue;
                }
                if let std::collections::hash_map::Entry::Vacant(slot) = powers.entry((i, ci)) {
                    let base = if ci > 0 {
                        sub.units[i].clone()
                    } else {
                        if inverses[i].is_none() {
                            inverses[i] = Some(sub.units[i].unit_inverse(&working)?);
                        }
                        inverses[i].clone().unwrap()
                    };
                    slot.insert(base.pow_trunc(ci.unsigned_abs() as u32, &working)?);
                }
                term = term.mul_trunc(&powers[&(i, ci)], &working)?;
            }
            out_tail = min_opt(out_tail, term.tail.clone());
            out_terms.extend(term.terms);
        }
        let out = LatticeSeries::new(target.clone(), out_terms, out_tail);
        let reached = out.tail.as_ref().is_none_or(|t| t >= cutoff);
        if reached {
            // Exact images (only positive powers of exact units) stay exact.
            let out = if out.tail.is_some() { out.truncate(cutoff) } else { out };
            let tail = min_opt(out.tail.clone(), f.tail.clone());
            return Ok(LatticeSeries::new(target.clone(), out.terms, tail));
        }
        let got = out.tail.clone().unwrap_or_else(Q::zero);
        working = &working + (cutoff - got) + q(1);
    }
    Err(LaurentError::PrecisionNotReached(fmt_q(cutoff)))
}

fn fmt_exponent(j: &[i64]) -> String {
    let parts: Vec<String> = j.iter().map(|x| x.to_string()).collect();
    format!("x^[{}]", parts.join(","))
}

impl fmt::Display for LatticeSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            f.write_str("0")?;
        }
        for (i, (j, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if c.terms().len() > 1 {
                write!(f, "({c})*{}", fmt_exponent(j))?;
            } else {
                write!(f, "{c}*{}", fmt_exponent(j))?;
            }
        }
        if let Some(t) = &self.tail {
            write!(f, " [tail {}]", fmt_q(t))?;
        }
        let vs: Vec<String> = self
            .reference
            .vertices()
            .iter()
            .map(|v| v.iter().map(fmt_q).collect::<Vec<_>>().join(","))
            .collect();
        write!(f, " [ref {}]", vs.join(";"))
    }
}

fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    let bytes: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        if depth == 0 && ch == '+' && i > 0 && bytes[i - 1] == ' ' && bytes.get(i + 1) == Some(&' ') {
            out.push(std::mem::take(&mut cur));
            i += 1;
            continue;
        }
        cur.push(ch);
        i += 1;
    }
    out.push(cur);
    out
}

/// Parses the text form, e.g. `T^(1/2)*x^[-1,2] + (1 + T)*x^[0,0] [tail 5] [ref 0,0;1,0;0,1]`.
/// Without a `[ref ...]` suffix the given default reference is used.
pub fn parse_series(text: &str, default_ref: Option<&RationalPolygon>) -> Result<LatticeSeries, LaurentError> {
    let perr = |m: &str| LaurentError::Parse(m.to_string());
    let mut body = text.trim().to_string();
    let mut reference = default_ref.cloned();
    if let Some(pos) = body.find("[ref") {
        let inner = body[pos + 4..].trim().trim_end_matches(']').trim().to_string();
        let pts: Vec<Vec<Q>> = inner
            .split(';')
            .map(|p| p.split(',').map(|x| parse_q(x).ok_or_else(|| perr("bad reference vertex"))).collect())
            .collect::<Result<_, _>>()?;
        reference = Some(RationalPolygon::convex_hull(&pts)?);
        body.truncate(pos);
    }
    let reference = reference.ok_or_else(|| perr("missing reference polygon"))?;
    let mut tail = None;
    if let Some(pos) = body.find("[tail") {
        let inner = body[pos + 5..].trim().trim_end_matches(']').to_string();
        tail = Some(parse_q(&inner).ok_or_else(|| perr("bad tail"))?);
        body.truncate(pos);
    }
    let body = body.trim();
    let mut terms = Vec::new();
    if body != "0" && !body.is_empty() {
        for piece in split_top_level(body) {
            let piece = piece.trim();
            let (coef, exp) = match piece.rfind("x^[") {
                Some(pos) => {
                    let close = piece[pos..].find(']').ok_or_else(|| perr("unclosed exponent"))? + pos;
                    let exp: Vec<i64> = piece[pos + 3..close]
                        .split(',')
                        .map(|x| x.trim().parse::<i64>().map_err(|_| perr("bad exponent")))
                        .collect::<Result<_, _>>()?;
                    let coef = piece[..pos].trim().trim_end_matches('*').trim();
                    (coef.to_string(), exp)
                }
                None => (piece.to_string(), vec![0; reference.dim()]),
            };
            if exp.len() != reference.dim() {
                return Err(perr("exponent dimension does not match reference"));
            }
            let coef = coef.trim();
            let c = match coef {
                "" => NovikovScalar::one(),
                "-" => NovikovScalar::constant(q(-1)),
                c => c
                    .strip_prefix('(')
                    .and_then(|c| c.strip_suffix(')'))
                    .unwrap_or(c)
                    .parse::<NovikovScalar>()?,
            };
            terms.push((exp, c));
        }
    }
    Ok(LatticeSeries::new(reference, terms, tail))
}

/// Machine form of a series.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesJson {
    pub terms: Vec<TermJson>,
    #[serde(default)]
    pub tail: Option<String>,
    pub reference: PolygonJson,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    pub exponent: Vec<i64>,
    pub coefficient: String,
}

impl LatticeSeries {
    pub fn to_json(&self) -> SeriesJson {
        SeriesJson {
            terms: self
                .terms
                .iter()
                .map(|(j, c)| TermJson { exponent: j.clone(), coefficient: c.to_string() })
                .collect(),
            tail: self.tail.as_ref().map(fmt_q),
            reference: self.reference.to_json(),
        }
    }

    pub fn from_json(j: &SeriesJson) -> Result<Self, LaurentError> {
        let reference = RationalPolygon::from_json(&j.reference)?;
        let tail = match &j.tail {
            Some(t) => Some(parse_q(t).ok_or_else(|| LaurentError::Parse(format!("bad tail `{t}`")))?),
            None => None,
        };
        let mut terms = Vec::new();
        for t in &j.terms {
            if t.exponent.len() != reference.dim() {
                return Err(LaurentError::Parse("exponent dimension does not match reference".into()));
            }
            terms.push((t.exponent.clone(), t.coefficient.parse::<NovikovScalar>()?));
        }
        Ok(Self::new(reference, terms, tail))
    }
}
