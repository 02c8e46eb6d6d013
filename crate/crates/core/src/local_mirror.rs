//! The local model `Y_k = {xy = (1+u)^k}`: tropical fibration, the two flat
//! charts, wall crossing on series, the polygons `P(a)` and volume checks.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine_base::{AffineError, Chart, EigenrayDiagram, NodalPolygon, TaggedHalfspace};
use crate::laurent::{substitute_unit, Exponent, LatticeSeries, LaurentError, UnitSubstitution};
use crate::novikov::{NovikovError, NovikovScalar, Valuation};
use crate::polygon::{Halfspace, PolygonError, RationalPolygon};
use crate::rational::{ext_gcd, fmt_q, q, Point, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LocalError {
    #[error("valuation of {0} cannot be decided at the available precision")]
    PrecisionLoss(&'static str),
    #[error("{0} is not a unit")]
    NonUnit(&'static str),
    #[error("point lies on the divisor 1 + η = 0")]
    OnDivisor,
    #[error("polygon is not on the {0} side of the wall")]
    WrongSide(&'static str),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error(transparent)]
    Novikov(#[from] NovikovError),
    #[error(transparent)]
    Polygon(#[from] PolygonError),
}

/// The two flat charts of `Y_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartSide {
    Plus,
    Minus,
}

impl ChartSide {
    /// The chart of `B_k` whose coordinates are the valuations of `(ξ, η)`.
    pub fn base_chart(self) -> Chart {
        match self {
            ChartSide::Plus => Chart::Plain,
            ChartSide::Minus => Chart::Sheared { ray: 0, segment: 0 },
        }
    }
}

impl fmt::Display for ChartSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChartSide::Plus => "+",
            ChartSide::Minus => "-",
        })
    }
}

/// A point of `Y_k` in ambient coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmbientPoint {
    pub x: NovikovScalar,
    pub y: NovikovScalar,
    pub u: NovikovScalar,
}

/// A point of `Y_k` in chart coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartPoint {
    pub side: ChartSide,
    pub xi: NovikovScalar,
    pub eta: NovikovScalar,
}

fn clamp_val(a: &NovikovScalar, name: &'static str) -> Result<Q, LocalError> {
    match a.val() {
        Valuation::Exact(v) => Ok(v.min(Q::zero())),
        Valuation::AtLeast(t) if !t.is_negative() => Ok(Q::zero()),
        Valuation::AtLeast(_) => Err(LocalError::PrecisionLoss(name)),
        Valuation::Infinite => Ok(Q::zero()),
    }
}

/// `(min(0, val x), min(0, val y), val u)`.
pub fn pk_of_point(p: &AmbientPoint) -> Result<[Q; 3], LocalError> {
    let vu = match p.u.val() {
        Valuation::Exact(v) => v,
        Valuation::AtLeast(_) => return Err(LocalError::PrecisionLoss("u")),
        Valuation::Infinite => return Err(LocalError::NonUnit("u")),
    };
    Ok([clamp_val(&p.x, "x")?, clamp_val(&p.y, "y")?, vu])
}

fn require_unit(a: &NovikovScalar, name: &'static str) -> Result<(), LocalError> {
    if a.is_exact_zero() || a.is_zero_to_precision() {
        Err(LocalError::NonUnit(name))
    } else {
        Ok(())
    }
}

fn one_plus(a: &NovikovScalar) -> NovikovScalar {
    NovikovScalar::one().add(a)
}

/// Ambient coordinates of a chart point, computed to absolute precision `precision`.
pub fn g_chart(p: &ChartPoint, k: u32, precision: &Q) -> Result<AmbientPoint, LocalError> {
    require_unit(&p.xi, "ξ")?;
    require_unit(&p.eta, "η")?;
    let w = one_plus(&p.eta).pow(k);
    let (x, y) = match p.side {
        ChartSide::Plus => {
            let inv = p.xi.unit_inverse(&(precision - w.val_lower().unwrap_or_else(Q::zero).min(Q::zero())))?;
            (p.xi.truncate(precision), inv.mul(&w).truncate(precision))
        }
        ChartSide::Minus => {
            let inv = p.xi.unit_inverse(precision)?;
            (p.xi.mul(&w).truncate(precision), inv)
        }
    };
    Ok(AmbientPoint { x, y, u: p.eta.truncate(precision) })
}

/// Checks `x·y − (u+1)^k ≡ 0` up to the precision of the operands.
pub fn relation_holds(p: &AmbientPoint, k: u32) -> bool {
    let lhs = p.x.mul(&p.y);
    let rhs = one_plus(&p.u).pow(k);
    lhs.sub(&rhs).is_zero_to_precision()
}

/// The piecewise-linear base map `f±(v, u)`.
pub fn f_base(side: ChartSide, k: u32, v: &Q, u: &Q) -> [Q; 3] {
    let ku = q(i64::from(k)) * u.clone().min(Q::zero());
    match side {
        ChartSide::Plus => [v.clone().min(Q::zero()), (ku - v).min(Q::zero()), u.clone()],
        ChartSide::Minus => [(v + ku).min(Q::zero()), (-v.clone()).min(Q::zero()), u.clone()],
    }
}

/// `(ξ⁻, η⁻) ↦ (ξ⁻(1+η⁻)^k, η⁻)`.
pub fn transition_charts(k: u32, xi: &NovikovScalar, eta: &NovikovScalar) -> Result<(NovikovScalar, NovikovScalar), LocalError> {
    require_unit(xi, "ξ")?;
    let w = one_plus(eta);
    if w.is_exact_zero() || w.is_zero_to_precision() {
        return Err(LocalError::OnDivisor);
    }
    Ok((xi.mul(&w.pow(k)), eta.clone()))
}

/// Which half-plane of the wall a series lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallSide {
    Upper,
    Lower,
}

impl WallSide {
    fn name(self) -> &'static str {
        match self {
            WallSide::Upper => "upper",
            WallSide::Lower => "lower",
        }
    }
}

/// Wall crossing across a general wall: the line through `base` with primitive
/// direction `e`, with monodromy level `level` (negative for the inverse map).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wall {
    pub direction: Vec<i64>,
    pub base: Point,
    pub level: i64,
}

impl Wall {
    /// The wall of `B_k`.
    pub fn b_k(k: i64) -> Self {
        Self { direction: vec![1, 0], base: vec![q(0), q(0)], level: k }
    }

    fn l(&self) -> Vec<i64> {
        vec![-self.direction[1], self.direction[0]]
    }

    fn l_at_base(&self) -> Q {
        let l = self.l();
        q(l[0]) * &self.base[0] + q(l[1]) * &self.base[1]
    }

    fn side_value(&self, w: &[Q]) -> Q {
        let l = self.l();
        q(l[0]) * &w[0] + q(l[1]) * &w[1] - self.l_at_base()
    }

    /// Base coordinate change on the lower side: `w ↦ w − level·det(e, w − b)·e`.
    pub fn shear_point(&self, w: &[Q]) -> Point {
        let c = self.side_value(w) * q(self.level);
        vec![&w[0] - &c * q(self.direction[0]), &w[1] - &c * q(self.direction[1])]
    }

    /// Whether every vertex of `p` is on the given closed side.
    pub fn polygon_on_side(&self, p: &RationalPolygon, side: WallSide) -> bool {
        p.vertices().iter().all(|v| {
            let s = self.side_value(v);
            match side {
                WallSide::Upper => !s.is_negative(),
                WallSide::Lower => !s.is_positive(),
            }
        })
    }

    /// Reference polygon of the image series.
    pub fn image_polygon(&self, p: &RationalPolygon, side: WallSide) -> Result<RationalPolygon, PolygonError> {
        match side {
            WallSide::Upper => Ok(p.clone()),
            WallSide::Lower => p.map_affine(|w| self.shear_point(w)),
        }
    }

    /// Applies `x^j ↦ x^j (1 + T^{-l(b)} x^l)^{level·j(e)}`, expanded for the
    /// given side, truncated at `cutoff`. The reference of `f` is its polygon.
    pub fn cross(&self, side: WallSide, f: &LatticeSeries, cutoff: &Q) -> Result<LatticeSeries, LocalError> {
        let p = f.reference();
        if !self.polygon_on_side(p, side) {
            return Err(LocalError::WrongSide(side.name()));
        }
        let target = self.image_polygon(p, side)?;
        if self.level == 0 {
            return Ok(f.with_reference_unchecked(&target));
        }
        let e = &self.direction;
        let (_, c0, c1) = ext_gcd(e[0], e[1]);
        let s = self.level.signum();
        let kk = self.level.unsigned_abs() as u32;
        let b0 = vec![s * c0, s * c1];
        let l = self.l();
        let lb = self.l_at_base();
        let (mono, unit) = match side {
            WallSide::Upper => {
                let pert = LatticeSeries::monomial(target.clone(), l.clone(), NovikovScalar::t_pow(-lb));
                (b0.clone(), LatticeSeries::one(target.clone()).add(&pert)?)
            }
            WallSide::Lower => {
                let neg_l: Vec<i64> = l.iter().map(|x| -x).collect();
                let pert = LatticeSeries::monomial(target.clone(), neg_l, NovikovScalar::t_pow(lb.clone()));
                let base_unit = LatticeSeries::one(target.clone()).add(&pert)?;
                let shift = LatticeSeries::constant(target.clone(), NovikovScalar::t_pow(-lb * q(i64::from(kk))));
                let m = vec![b0[0] + i64::from(kk) * l[0], b0[1] + i64::from(kk) * l[1]];
                (m, shift.mul(&base_unit.pow_trunc(kk, cutoff)?)?)
            }
        };
        let unit = match side {
            WallSide::Upper => unit.pow_trunc(kk, cutoff)?,
            WallSide::Lower => unit,
        };
        let sub = UnitSubstitution {
            basis: vec![b0, l.clone()],
            monomials: vec![mono, l],
            units: vec![unit, LatticeSeries::one(target.clone())],
            target,
            valuation_preserving: true,
        };
        Ok(substitute_unit(f, &sub, cutoff)?)
    }
}

/// `Σ c_j x^j (1 + T^{z_shift} x^{z})^{level·(j·e)}` computed exactly, or
/// `None` when a negative power does not divide the input.
pub fn exact_twist(
    terms: &BTreeMap<Exponent, NovikovScalar>,
    e: &[i64],
    z: &[i64],
    z_shift: &Q,
    level: i64,
) -> Option<BTreeMap<Exponent, NovikovScalar>> {
    let (_, c0, c1) = ext_gcd(e[0], e[1]);
    let c = [c0, c1];
    let zi = if z[0] != 0 { 0 } else { 1 };
    // Group by α = j·e; within a group j = α c + β z, polynomial in Z = T^{z_shift} x^z.
    let mut groups: BTreeMap<i64, BTreeMap<i64, NovikovScalar>> = BTreeMap::new();
    for (j, a) in terms {
        if a.truncation().is_some() {
            return None;
        }
        let alpha = j[0] * e[0] + j[1] * e[1];
        let rest = j[zi] - alpha * c[zi];
        let beta = rest / z[zi];
        let coeff = a.shift(&(-(z_shift * q(beta))));
        groups.entry(alpha).or_default().insert(beta, coeff);
    }
    let mut out = BTreeMap::new();
    for (alpha, poly) in groups {
        let n = level * alpha;
        let lo = *poly.keys().next().expect("nonempty group");
        let hi = *poly.keys().last().expect("nonempty group");
        let mut dense: Vec<NovikovScalar> = (lo..=hi).map(|b| poly.get(&b).cloned().unwrap_or_default()).collect();
        let m = n.unsigned_abs() as usize;
        let binom: Vec<Q> = {
            let mut row = vec![q(1)];
            for _ in 0..m {
                let mut next = vec![q(1); row.len() + 1];
                for i in 1..row.len() {
                    next[i] = &row[i - 1] + &row[i];
                }
                row = next;
            }
            row
        };
        if n >= 0 {
            let mut prod = vec![NovikovScalar::zero(); dense.len() + m];
            for (i, a) in dense.iter().enumerate() {
                for (k, b) in binom.iter().enumerate() {
                    prod[i + k] = prod[i + k].add(&a.scale(b));
                }
            }
            dense = prod;
        } else {
            // Long division by the monic (1+Z)^m, from the top degree down.
            if dense.len() <= m {
                return None;
            }
            let qlen = dense.len() - m;
            let mut quot = vec![NovikovScalar::zero(); qlen];
            for i in (0..qlen).rev() {
                let lead = dense[i + m].clone();
                for (k, b) in binom.iter().enumerate() {
                    dense[i + k] = dense[i + k].sub(&lead.scale(b));
                }
                quot[i] = lead;
            }
            if dense.iter().any(|x| !x.is_exact_zero()) {
                return None;
            }
            dense = quot;
        }
        for (i, a) in dense.into_iter().enumerate() {
            if a.is_exact_zero() {
                continue;
            }
            let beta = lo + i as i64;
            let j = vec![alpha * c[0] + beta * z[0], alpha * c[1] + beta * z[1]];
            let e = out.entry(j).or_insert_with(NovikovScalar::zero);
            *e = e.add(&a.shift(&(z_shift * q(beta))));
        }
    }
    out.retain(|_, v: &mut NovikovScalar| !v.is_exact_zero());
    Some(out)
}

impl Wall {
    /// Exact version of [`Wall::cross`] for Laurent polynomials. Both sides
    /// use the same rational function, so no convergence condition is needed;
    /// `None` when the image is not a Laurent polynomial.
    pub fn cross_exact(&self, side: WallSide, f: &LatticeSeries) -> Result<Option<LatticeSeries>, LocalError> {
        if f.tail().is_some() {
            return Ok(None);
        }
        let target = self.image_polygon(f.reference(), side)?;
        let l = self.l();
        let lb = self.l_at_base();
        Ok(exact_twist(f.terms(), &self.direction, &l, &(-lb), self.level)
            .map(|terms| LatticeSeries::new(target, terms, None)))
    }

    /// Transport that prefers the exact form and falls back to the expansion.
    pub fn transport(&self, side: WallSide, f: &LatticeSeries, cutoff: &Q) -> Result<LatticeSeries, LocalError> {
        if !self.polygon_on_side(f.reference(), side) {
            return Err(LocalError::WrongSide(side.name()));
        }
        match self.cross_exact(side, f)? {
            Some(g) => Ok(g),
            None => self.cross(side, f, cutoff),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WallCrossSpec {
    pub k: u32,
    pub side: WallSide,
    pub cutoff: Q,
    pub polygon: RationalPolygon,
}

/// Wall crossing of `B_k` from the `+` chart to the `−` chart: `η ↦ η`,
/// `ξ ↦ ξ(1+η)^k` (upper) or `ξ ↦ ξη^k(1+η⁻¹)^k` (lower, on sheared coordinates).
pub fn wall_cross_series(spec: &WallCrossSpec, f: &LatticeSeries) -> Result<LatticeSeries, LocalError> {
    let g = f.restrict(&spec.polygon)?;
    Wall::b_k(i64::from(spec.k)).cross(spec.side, &g, &spec.cutoff)
}

/// Inverse wall crossing, from the `−` chart back to the `+` chart. The
/// reference of `f` is in `−` chart coordinates.
pub fn wall_cross_inverse(k: u32, side: WallSide, f: &LatticeSeries, cutoff: &Q) -> Result<LatticeSeries, LocalError> {
    Wall::b_k(-i64::from(k)).cross(side, f, cutoff)
}

/// The polygon `P(a) ⊂ B_k`: `|u| <= a`, `v >= −a` in the `+` chart and `v <= a` in the `−` chart.
pub fn polygon_pa(k: u32, a: &Q) -> Result<NodalPolygon, LocalError> {
    let d = EigenrayDiagram::b_k(k);
    let minus = ChartSide::Minus.base_chart();
    let h = |n: [i64; 2], b: Q| Halfspace::new(n.to_vec(), b).expect("nonzero normal");
    let cs = vec![
        TaggedHalfspace::plain(h([0, -1], -a.clone())),
        TaggedHalfspace::plain(h([0, 1], -a.clone())),
        TaggedHalfspace::plain(h([1, 0], -a.clone())),
        TaggedHalfspace { chart: minus, halfspace: h([-1, 0], -a.clone()) },
    ];
    Ok(NodalPolygon::new(cs, &d)?)
}

/// Membership of a base point (domain coordinates) in `P(a)` through the cube
/// description `j(p) ∈ [−a, 0]⁴` with `j(a,b,c) = (a, b, min(0,c), min(0,−c))`.
pub fn in_pa_via_cube(k: u32, a: &Q, w: &[Q]) -> bool {
    let t = f_base(ChartSide::Plus, k, &w[0], &w[1]);
    let na = -a.clone();
    let j = [t[0].clone(), t[1].clone(), t[2].clone().min(Q::zero()), (-t[2].clone()).min(Q::zero())];
    j.iter().all(|c| c >= &na && !c.is_positive())
}

/// A rational function of `η` as a ratio of coefficient lists (lowest degree first).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatFn {
    pub num: Vec<Q>,
    pub den: Vec<Q>,
}

fn poly_mul(a: &[Q], b: &[Q]) -> Vec<Q> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Q::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

fn poly_add(a: &[Q], b: &[Q]) -> Vec<Q> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| a.get(i).cloned().unwrap_or_else(Q::zero) + b.get(i).cloned().unwrap_or_else(Q::zero))
        .collect();
    trim(out)
}

fn trim(mut v: Vec<Q>) -> Vec<Q> {
    while v.last().is_some_and(|x| x.is_zero()) {
        v.pop();
    }
    v
}

impl RatFn {
    pub fn constant(c: Q) -> Self {
        Self { num: trim(vec![c]), den: vec![q(1)] }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { num: poly_add(&poly_mul(&self.num, &o.den), &poly_mul(&o.num, &self.den)), den: poly_mul(&self.den, &o.den) }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self { num: poly_mul(&self.num, &o.num), den: poly_mul(&self.den, &o.den) }
    }

    pub fn neg(&self) -> Self {
        Self { num: self.num.iter().map(|x| -x).collect(), den: self.den.clone() }
    }

    /// Exact equality as rational functions (cross multiplication).
    pub fn equals(&self, o: &Self) -> bool {
        poly_mul(&self.num, &o.den) == poly_mul(&o.num, &self.den)
    }
}

impl fmt::Display for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |p: &[Q]| -> String {
            if p.is_empty() {
                return "0".into();
            }
            let parts: Vec<String> = p
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| match i {
                    0 => fmt_q(c),
                    1 => format!("{}*η", fmt_q(c)),
                    _ => format!("{}*η^{i}", fmt_q(c)),
                })
                .collect();
            parts.join(" + ")
        };
        if self.den == vec![q(1)] {
            write!(f, "{}", show(&self.num))
        } else {
            write!(f, "({})/({})", show(&self.num), show(&self.den))
        }
    }
}

/// A coordinate of the form `ξ^a η^b (1+η)^c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonomialUnit {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl MonomialUnit {
    /// `(∂ log / ∂ log ξ, ∂ log / ∂ log η) = (a, b + cη/(1+η))`.
    pub fn log_gradient(&self) -> [RatFn; 2] {
        let d_eta = RatFn::constant(q(self.b)).add(&RatFn { num: trim(vec![q(0), q(self.c)]), den: vec![q(1), q(1)] });
        [RatFn::constant(q(self.a)), d_eta]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VolumeCertificate {
    pub k: u32,
    pub map: String,
    /// Rows of the log-Jacobian, printed.
    pub jacobian: Vec<Vec<String>>,
    pub determinant: String,
    pub holds: bool,
}

/// Log-Jacobian determinant of `(ξ, η) ↦ (F, G)` for monomial-times-unit coordinates.
pub fn log_jacobian(f: MonomialUnit, g: MonomialUnit) -> ([[RatFn; 2]; 2], RatFn) {
    let [a, b] = f.log_gradient();
    let [c, d] = g.log_gradient();
    let det = a.mul(&d).add(&b.mul(&c).neg());
    ([[a, b], [c, d]], det)
}

fn certificate(k: u32, map: String, f: MonomialUnit, g: MonomialUnit) -> VolumeCertificate {
    let (jac, det) = log_jacobian(f, g);
    VolumeCertificate {
        k,
        map,
        jacobian: jac.iter().map(|row| row.iter().map(|x| x.to_string()).collect()).collect(),
        holds: det.equals(&RatFn::constant(q(1))),
        determinant: det.to_string(),
    }
}

/// `g±^*(dx ∧ du / (xu)) = dξ/ξ ∧ dη/η`, checked on the log-Jacobian of `(x, u)`.
pub fn volume_pullback_check(k: u32, side: ChartSide) -> VolumeCertificate {
    let kk = i64::from(k);
    let x = match side {
        ChartSide::Plus => MonomialUnit { a: 1, b: 0, c: 0 },
        ChartSide::Minus => MonomialUnit { a: 1, b: 0, c: kk },
    };
    let u = MonomialUnit { a: 0, b: 1, c: 0 };
    certificate(k, format!("g{side}: (x, u)"), x, u)
}

/// The wall-crossing map `(ξ, η) ↦ (ξ(1+η)^k, η)` has unit log-Jacobian.
pub fn wall_cross_volume_check(k: u32) -> VolumeCertificate {
    let kk = i64::from(k);
    certificate(k, "wall crossing".into(), MonomialUnit { a: 1, b: 0, c: kk }, MonomialUnit { a: 0, b: 1, c: 0 })
}

/// Coefficients used for generic sampling (products of small primes, both signs).
pub const GENERIC_COEFFICIENTS: [i64; 8] = [1, 2, 3, 5, 7, 6, 10, 15];

/// Draws a scalar with the given valuation and a generic correction term.
pub fn generic_scalar<R: Rng>(rng: &mut R, val: &Q) -> NovikovScalar {
    let pick = |rng: &mut R| {
        let c = GENERIC_COEFFICIENTS[rng.gen_range(0..GENERIC_COEFFICIENTS.len())];
        if rng.gen_bool(0.5) {
            -c
        } else {
            c
        }
    };
    let lead = pick(rng);
    let next = pick(rng);
    let gap = Q::new(rng.gen_range(1..=4).into(), rng.gen_range(1..=2).into());
    NovikovScalar::from_terms(vec![(val.clone(), q(lead)), (val + gap, q(next))], None)
}

/// Whether `η` is degenerate: valuation 0 with leading coefficient `−1`.
pub fn is_degenerate_eta(eta: &NovikovScalar) -> bool {
    eta.leading().is_some_and(|(e, c)| e.is_zero() && *c == q(-1))
}

/// A valuation drawn from `{n/2 : |n| <= 6}`.
pub fn sample_valuation<R: Rng>(rng: &mut R) -> Q {
    Q::new(rng.gen_range(-6i64..=6).into(), 2.into())
}

/// Absolute precision sufficient for tropical decisions at `(v, u)`.
pub fn working_precision(k: u32, v: &Q, u: &Q) -> Q {
    v.abs() + q(i64::from(k)) * u.abs() + q(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qf;

    fn t(e: Q) -> NovikovScalar {
        NovikovScalar::t_pow(e)
    }

    #[test]
    fn pk_examples() {
        let p = AmbientPoint {
            x: t(q(-1)),
            y: NovikovScalar::from_terms(vec![(q(1), q(1)), (q(3), q(1))], None),
            u: t(q(2)),
        };
        assert_eq!(pk_of_point(&p).unwrap(), [q(-1), q(0), q(2)]);
        let lossy = AmbientPoint { x: NovikovScalar::zero_to(q(-1)), y: NovikovScalar::one(), u: NovikovScalar::one() };
        assert_eq!(pk_of_point(&lossy), Err(LocalError::PrecisionLoss("x")));
    }

    #[test]
    fn chart_examples() {
        let p = ChartPoint { side: ChartSide::Minus, xi: t(q(1)), eta: t(q(1)) };
        let a = g_chart(&p, 1, &q(10)).unwrap();
        assert_eq!(a.x, NovikovScalar::from_terms(vec![(q(1), q(1)), (q(2), q(1))], None).truncate(&q(10)));
        assert_eq!(a.y, t(q(-1)));
        assert!(relation_holds(&a, 1));
        let plus = ChartPoint { side: ChartSide::Plus, xi: NovikovScalar::one(), eta: t(q(1)) };
        let b = g_chart(&plus, 3, &q(10)).unwrap();
        assert!(relation_holds(&b, 3));
        assert_eq!(f_base(ChartSide::Plus, 1, &q(-1), &q(2)), [q(-1), q(0), q(2)]);
        assert_eq!(f_base(ChartSide::Minus, 2, &q(1), &q(-1)), [q(-1), q(-1), q(-1)]);
        let (xi, eta) = transition_charts(1, &t(q(1)), &t(q(2))).unwrap();
        assert_eq!(xi, NovikovScalar::from_terms(vec![(q(1), q(1)), (q(3), q(1))], None));
        assert_eq!(eta, t(q(2)));
        assert_eq!(transition_charts(1, &t(q(1)), &NovikovScalar::constant(q(-1))), Err(LocalError::OnDivisor));
    }

    #[test]
    fn wall_crossing_examples() {
        let p = RationalPolygon::bbox(&[q(-1), q(1)], &[q(1), q(2)]).unwrap();
        let spec = WallCrossSpec { k: 2, side: WallSide::Upper, cutoff: q(10), polygon: p.clone() };
        let xi = LatticeSeries::x(p.clone(), &[1, 0]);
        let out = wall_cross_series(&spec, &xi).unwrap();
        let want = [(vec![1, 0], 1), (vec![1, 1], 2), (vec![1, 2], 1)];
        assert_eq!(out.terms().len(), 3);
        for (j, c) in want {
            assert_eq!(out.coefficient(&j), NovikovScalar::constant(q(c)));
        }
        let eta = LatticeSeries::x(p.clone(), &[0, 1]);
        assert_eq!(wall_cross_series(&spec, &eta).unwrap().terms(), eta.terms());
        // Round trip through the inverse is the identity on ξ⁻¹.
        let inv = LatticeSeries::x(p.clone(), &[-1, 0]);
        let there = wall_cross_series(&spec, &inv).unwrap();
        let back = wall_cross_inverse(2, WallSide::Upper, &there, &q(10)).unwrap();
        assert!(back.agrees_below(&inv, &q(10)));
        // Lower side, on a polygon strictly below the wall.
        let low = RationalPolygon::bbox(&[q(-1), q(-2)], &[q(1), q(-1)]).unwrap();
        let lspec = WallCrossSpec { k: 1, side: WallSide::Lower, cutoff: q(10), polygon: low.clone() };
        let lo = wall_cross_series(&lspec, &LatticeSeries::x(low.clone(), &[1, 0])).unwrap();
        assert_eq!(lo.coefficient(&[1, 1]), NovikovScalar::one());
        assert_eq!(lo.coefficient(&[1, 0]), NovikovScalar::one());
        assert!(lo.reference().contains(&[q(0), q(-1)]) && lo.reference().contains(&[q(3), q(-2)]));
        let wrong = WallCrossSpec { side: WallSide::Upper, ..lspec };
        assert!(matches!(wall_cross_series(&wrong, &xi.restrict(&p).unwrap()), Err(LocalError::WrongSide(_)) | Err(LocalError::Laurent(_))));
    }

    #[test]
    fn exact_transport() {
        let seg = RationalPolygon::bbox(&[q(0), q(0)], &[q(1), q(0)]).unwrap();
        let f = LatticeSeries::new(
            seg.clone(),
            [(vec![1, 0], NovikovScalar::one()), (vec![1, 1], NovikovScalar::constant(q(2))), (vec![1, 2], NovikovScalar::one())],
            None,
        );
        // ξ(1+η)² crossed back at level −2 is ξ, even on the wall itself.
        let back = Wall::b_k(-2).cross_exact(WallSide::Upper, &f).unwrap().unwrap();
        assert_eq!(back.terms(), LatticeSeries::x(seg.clone(), &[1, 0]).terms());
        let low = Wall::b_k(-2).cross_exact(WallSide::Lower, &f).unwrap().unwrap();
        assert_eq!(low.terms(), back.terms());
        assert!(Wall::b_k(-1).cross_exact(WallSide::Upper, &LatticeSeries::x(seg.clone(), &[1, 0])).unwrap().is_none());
        // A tilted wall with a shifted base.
        let w = Wall { direction: vec![1, 1], base: vec![q(0), q(1)], level: 1 };
        let p = RationalPolygon::bbox(&[q(0), q(3)], &[q(1), q(4)]).unwrap();
        let g = LatticeSeries::x(p.clone(), &[2, -1]);
        let up = w.cross(WallSide::Upper, &g, &q(12)).unwrap();
        let ex = w.cross_exact(WallSide::Upper, &g).unwrap().unwrap();
        assert_eq!(up.terms(), ex.terms());
        let round = Wall { level: -1, ..w.clone() }.cross_exact(WallSide::Upper, &ex).unwrap().unwrap();
        assert_eq!(round.terms(), g.terms());
    }

    #[test]
    fn divergent_on_the_wall() {
        let seg = RationalPolygon::bbox(&[q(0), q(0)], &[q(1), q(0)]).unwrap();
        let spec = WallCrossSpec { k: 1, side: WallSide::Upper, cutoff: q(4), polygon: seg.clone() };
        let r = wall_cross_series(&spec, &LatticeSeries::x(seg, &[-1, 0]));
        assert!(matches!(r, Err(LocalError::Laurent(LaurentError::DivergentExpansion(_)))));
    }

    #[test]
    fn pa_shape() {
        let d = EigenrayDiagram::b_k(1);
        let p = polygon_pa(1, &q(1)).unwrap();
        assert!(p.contains_strictly(&[q(0), q(0)], &d));
        let mut verts = p.all_vertices(&d).unwrap();
        verts.sort();
        let want: Vec<Point> = vec![
            vec![q(-1), q(-1)],
            vec![q(-1), q(0)],
            vec![q(-1), q(1)],
            vec![q(0), q(-1)],
            vec![q(1), q(0)],
            vec![q(1), q(1)],
        ];
        assert_eq!(verts, want);
        for i in -8..=8 {
            for j in -8..=8 {
                let w = vec![qf(i, 4), qf(j, 4)];
                assert_eq!(p.contains(&w, &d), in_pa_via_cube(1, &q(1), &w), "{i} {j}");
            }
        }
    }

    #[test]
    fn volume() {
        for k in 1..=5 {
            assert!(volume_pullback_check(k, ChartSide::Plus).holds);
            assert!(volume_pullback_check(k, ChartSide::Minus).holds);
            assert!(wall_cross_volume_check(k).holds);
        }
        let (_, det) = log_jacobian(MonomialUnit { a: 2, b: 0, c: 1 }, MonomialUnit { a: 0, b: 1, c: 0 });
        assert!(!det.equals(&RatFn::constant(q(1))));
    }
}
