//! Exact convex rational polytopes with paired halfspace and vertex representations.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{fmt_point, fmt_q, q, serde_q, serde_qvec, Point, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolygonError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("halfspace normal must be nonzero")]
    ZeroNormal,
    #[error("intersection is unbounded")]
    Unbounded,
    #[error("polytope is empty")]
    Empty,
    #[error("empty point list")]
    EmptyInput,
    #[error("convex hull is only implemented in dimension <= 2 (got {0})")]
    UnsupportedDimension(usize),
    #[error("integer overflow while normalizing a direction")]
    Overflow,
    #[error("invalid polygon JSON: {0}")]
    Json(String),
    #[error("vertices and halfspaces describe different polytopes")]
    Inconsistent,
}

/// `{x : normal·x >= bound}` with a primitive integer normal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<i64>,
    #[serde(with = "serde_q")]
    pub bound: Q,
}

impl Halfspace {
    /// Builds a halfspace, dividing a non-primitive normal (and the bound) by its gcd.
    pub fn new(normal: Vec<i64>, bound: Q) -> Result<Self, PolygonError> {
        let g = normal.iter().fold(0i64, |g, &a| g.gcd(&a));
        if g == 0 {
            return Err(PolygonError::ZeroNormal);
        }
        Ok(Self {
            normal: normal.iter().map(|a| a / g).collect(),
            bound: bound / q(g),
        })
    }

    /// `normal·x >= normal·p`.
    pub fn through(normal: Vec<i64>, p: &[Q]) -> Result<Self, PolygonError> {
        let b = dot_i(&normal, p);
        Self::new(normal, b)
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        dot_i(&self.normal, x)
    }

    /// Signed slack `normal·x − bound`.
    pub fn slack(&self, x: &[Q]) -> Q {
        self.eval(x) - &self.bound
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        !self.slack(x).is_negative()
    }

    pub fn on_boundary(&self, x: &[Q]) -> bool {
        self.slack(x).is_zero()
    }

    /// The closed complementary halfspace.
    pub fn flipped(&self) -> Self {
        Self { normal: self.normal.iter().map(|a| -a).collect(), bound: -self.bound.clone() }
    }
}

impl fmt::Display for Halfspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}·x >= {}", self.normal, fmt_q(&self.bound))
    }
}

pub fn dot_i(a: &[i64], x: &[Q]) -> Q {
    a.iter().zip(x).map(|(a, x)| x * q(*a)).fold(Q::zero(), |s, t| s + t)
}

/// Primitive integer vector positively proportional to a nonzero rational vector.
pub fn primitive_direction(v: &[Q]) -> Result<Vec<i64>, PolygonError> {
    let l = v.iter().fold(BigInt::one(), |l, x| l.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * Q::from_integer(l.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |g, a| g.gcd(a));
    if g.is_zero() {
        return Err(PolygonError::ZeroNormal);
    }
    ints.iter()
        .map(|a| (a / &g).to_i64().ok_or(PolygonError::Overflow))
        .collect()
}

/// Solves a square rational system by Gaussian elimination; `None` if singular.
pub(crate) fn solve(rows: &[Vec<Q>], rhs: &[Q]) -> Option<Vec<Q>> {
    let n = rows.len();
    let mut a: Vec<Vec<Q>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut r = r.clone();
            r.push(b.clone());
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let p = a[col][col].clone();
        for x in &mut a[col][col..=n] {
            *x = &*x / &p;
        }
        let pivot = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && !row[col].is_zero() {
                let factor = row[col].clone();
                for (x, y) in row[col..=n].iter_mut().zip(&pivot[col..=n]) {
                    *x -= &factor * y;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n].clone()).collect())
}

fn for_each_subset(m: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..m {
            if m - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, m, k, cur, f);
            cur.pop();
        }
    }
    rec(0, m, k, &mut Vec::with_capacity(k), f);
}

/// Vertices of `{x : h.contains(x) for h in hs}`, lexicographically sorted.
fn enumerate_vertices(dim: usize, hs: &[Halfspace]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    let rows: Vec<Vec<Q>> = hs.iter().map(|h| h.normal.iter().map(|&a| q(a)).collect()).collect();
    for_each_subset(hs.len(), dim, &mut |idx| {
        let sys: Vec<Vec<Q>> = idx.iter().map(|&i| rows[i].clone()).collect();
        let rhs: Vec<Q> = idx.iter().map(|&i| hs[i].bound.clone()).collect();
        if let Some(x) = solve(&sys, &rhs) {
            if hs.iter().all(|h| h.contains(&x)) {
                out.push(x);
            }
        }
    });
    out.sort();
    out.dedup();
    out
}

fn cross(o: &[Q], a: &[Q], b: &[Q]) -> Q {
    (&a[0] - &o[0]) * (&b[1] - &o[1]) - (&a[1] - &o[1]) * (&b[0] - &o[0])
}

/// Extreme points of a planar point set in counter-clockwise order starting
/// from the lexicographically smallest one; collinear points are dropped.
fn hull_ccw(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && !cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p).is_positive() {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Point> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && !cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p).is_positive() {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Canonical halfspaces of a planar polytope from its ccw extreme points.
fn planar_hrep(ccw: &[Point]) -> Result<Vec<Halfspace>, PolygonError> {
    match ccw.len() {
        0 => Err(PolygonError::Empty),
        1 => {
            let p = &ccw[0];
            Ok(vec![
                Halfspace::new(vec![1, 0], p[0].clone())?,
                Halfspace::new(vec![-1, 0], -p[0].clone())?,
                Halfspace::new(vec![0, 1], p[1].clone())?,
                Halfspace::new(vec![0, -1], -p[1].clone())?,
            ])
        }
        2 => {
            let (a, b) = (&ccw[0], &ccw[1]);
            let d = primitive_direction(&[&b[0] - &a[0], &b[1] - &a[1]])?;
            let nu = vec![-d[1], d[0]];
            Ok(vec![
                Halfspace::through(nu.clone(), a)?,
                Halfspace::through(nu.iter().map(|x| -x).collect(), a)?,
                Halfspace::through(d.clone(), a)?,
                Halfspace::through(d.iter().map(|x| -x).collect(), b)?,
            ])
        }
        n => (0..n)
            .map(|i| {
                let (a, b) = (&ccw[i], &ccw[(i + 1) % n]);
                let d = primitive_direction(&[&b[0] - &a[0], &b[1] - &a[1]])?;
                Halfspace::through(vec![-d[1], d[0]], a)
            })
            .collect(),
    }
}

/// A nonempty bounded convex polytope with rational vertices, possibly degenerate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalPolygon {
    dim: usize,
    halfspaces: Vec<Halfspace>,
    vertices: Vec<Point>,
    // Vertices over a common denominator, for fast linear pairings.
    denom: BigInt,
    numerators: Vec<Vec<BigInt>>,
}

impl RationalPolygon {
    fn with_cache(dim: usize, halfspaces: Vec<Halfspace>, vertices: Vec<Point>) -> Self {
        let denom = vertices.iter().flatten().fold(BigInt::one(), |l, x| l.lcm(x.denom()));
        let numerators = vertices
            .iter()
            .map(|v| v.iter().map(|x| x.numer() * (&denom / x.denom())).collect())
            .collect();
        Self { dim, halfspaces, vertices, denom, numerators }
    }

    /// Intersection of halfspaces; `Ok(None)` when empty.
    pub fn from_halfspaces(dim: usize, hs: &[Halfspace]) -> Result<Option<Self>, PolygonError> {
        if let Some(h) = hs.iter().find(|h| h.dim() != dim) {
            return Err(PolygonError::DimensionMismatch(dim, h.dim()));
        }
        let mut all: Vec<Halfspace> = hs.to_vec();
        all.sort();
        all.dedup();
        if dim == 2 {
            if let Some(res) = Self::clip_planar(&all) {
                return res;
            }
        }
        // Bounding box strictly containing every vertex of a bounded intersection.
        let inner = enumerate_vertices(dim, &all);
        let mut m = q(1);
        for v in &inner {
            for c in v {
                if c.abs() >= m {
                    m = c.abs() + q(1);
                }
            }
        }
        let mut boxed = all.clone();
        for i in 0..dim {
            let mut e = vec![0i64; dim];
            e[i] = 1;
            boxed.push(Halfspace::new(e.clone(), -m.clone())?);
            e[i] = -1;
            boxed.push(Halfspace::new(e, -m.clone())?);
        }
        let verts = enumerate_vertices(dim, &boxed);
        if verts.is_empty() {
            return Ok(None);
        }
        if verts.iter().any(|v| v.iter().any(|c| c.abs() == m)) {
            return Err(PolygonError::Unbounded);
        }
        Self::assemble(dim, verts, all).map(Some)
    }

    /// Planar intersection by clipping a large box. `None` when the result
    /// reaches the box, in which case the general path decides boundedness.
    fn clip_planar(hs: &[Halfspace]) -> Option<Result<Option<Self>, PolygonError>> {
        let m = q(1i64 << 32);
        let mut poly: Vec<Point> = vec![
            vec![-m.clone(), -m.clone()],
            vec![m.clone(), -m.clone()],
            vec![m.clone(), m.clone()],
            vec![-m.clone(), m.clone()],
        ];
        for h in hs {
            let s: Vec<Q> = poly.iter().map(|x| h.slack(x)).collect();
            let mut next = Vec::with_capacity(poly.len() + 1);
            for i in 0..poly.len() {
                let j = (i + 1) % poly.len();
                if !s[i].is_negative() {
                    next.push(poly[i].clone());
                }
                if (s[i].is_positive() && s[j].is_negative()) || (s[i].is_negative() && s[j].is_positive()) {
                    let t = &s[i] / (&s[i] - &s[j]);
                    next.push(vec![&poly[i][0] + (&poly[j][0] - &poly[i][0]) * &t, &poly[i][1] + (&poly[j][1] - &poly[i][1]) * &t]);
                }
            }
            next.dedup();
            if next.len() > 1 && next.first() == next.last() {
                next.pop();
            }
            if next.is_empty() {
                return Some(Ok(None));
            }
            poly = next;
        }
        if poly.iter().any(|v| v.iter().any(|c| c.abs() == m)) {
            return None;
        }
        Some(Self::from_vertices_planar(2, poly).map(Some))
    }

    fn assemble(dim: usize, vertices: Vec<Point>, input: Vec<Halfspace>) -> Result<Self, PolygonError> {
        if dim <= 2 {
            return Self::from_vertices_planar(dim, vertices);
        }
        let mut hs: Vec<Halfspace> =
            input.into_iter().filter(|h| vertices.iter().any(|v| h.on_boundary(v))).collect();
        hs.sort();
        hs.dedup();
        Ok(Self::with_cache(dim, hs, vertices))
    }

    fn from_vertices_planar(dim: usize, points: Vec<Point>) -> Result<Self, PolygonError> {
        match dim {
            0 => Ok(Self::with_cache(dim, Vec::new(), vec![Vec::new()])),
            1 => {
                let lo = points.iter().map(|p| p[0].clone()).min().ok_or(PolygonError::EmptyInput)?;
                let hi = points.iter().map(|p| p[0].clone()).max().ok_or(PolygonError::EmptyInput)?;
                let mut vertices = vec![vec![lo.clone()]];
                if hi != lo {
                    vertices.push(vec![hi.clone()]);
                }
                let halfspaces = vec![Halfspace::new(vec![1], lo)?, Halfspace::new(vec![-1], -hi)?];
                Ok(Self::with_cache(dim, halfspaces, vertices))
            }
            2 => {
                let ccw = hull_ccw(&points);
                let halfspaces = planar_hrep(&ccw)?;
                let mut vertices = ccw;
                vertices.sort();
                Ok(Self::with_cache(dim, halfspaces, vertices))
            }
            d => Err(PolygonError::UnsupportedDimension(d)),
        }
    }

    /// Convex hull of a point set (dimension at most 2).
    pub fn convex_hull(points: &[Point]) -> Result<Self, PolygonError> {
        let first = points.first().ok_or(PolygonError::EmptyInput)?;
        let dim = first.len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(PolygonError::DimensionMismatch(dim, p.len()));
        }
        if dim > 2 {
            return Err(PolygonError::UnsupportedDimension(dim));
        }
        Self::from_vertices_planar(dim, points.to_vec())
    }

    /// Axis-parallel box `Π [lo_i, hi_i]`.
    pub fn bbox(lo: &[Q], hi: &[Q]) -> Result<Self, PolygonError> {
        let dim = lo.len();
        let mut hs = Vec::new();
        for i in 0..dim {
            let mut e = vec![0i64; dim];
            e[i] = 1;
            hs.push(Halfspace::new(e.clone(), lo[i].clone())?);
            e[i] = -1;
            hs.push(Halfspace::new(e, -hi[i].clone())?);
        }
        Self::from_halfspaces(dim, &hs)?.ok_or(PolygonError::Empty)
    }

    /// Closed unit-style square `[a,b]^2`.
    pub fn square(a: Q, b: Q) -> Self {
        Self::bbox(&[a.clone(), a], &[b.clone(), b]).expect("nonempty square")
    }

    pub fn point(p: Point) -> Self {
        let dim = p.len();
        let lo = p.clone();
        Self::bbox(&lo, &p).unwrap_or_else(|_| Self::with_cache(dim, Vec::new(), vec![p]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    /// Vertices in lexicographic order.
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Vertices in counter-clockwise order (planar case); lexicographic otherwise.
    pub fn vertices_ccw(&self) -> Vec<Point> {
        if self.dim == 2 {
            hull_ccw(&self.vertices)
        } else {
            self.vertices.clone()
        }
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        self.halfspaces.iter().all(|h| h.contains(x))
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dim == other.dim && self.vertices.iter().all(|v| other.contains(v))
    }

    /// Average of the vertices; lies in the relative interior.
    pub fn centroid(&self) -> Point {
        let n = Q::from_integer(BigInt::from(self.vertices.len()));
        (0..self.dim)
            .map(|i| self.vertices.iter().map(|v| v[i].clone()).fold(Q::zero(), |a, b| a + b) / &n)
            .collect()
    }

    /// Dimension of the affine hull.
    pub fn affine_dim(&self) -> usize {
        let base = &self.vertices[0];
        let mut rows: Vec<Vec<Q>> = self
            .vertices
            .iter()
            .skip(1)
            .map(|v| v.iter().zip(base).map(|(a, b)| a - b).collect())
            .collect();
        rank(&mut rows)
    }

    /// Minimum of the linear form `alpha` and the maximum, over the polytope.
    pub fn linear_range(&self, alpha: &[i64]) -> (Q, Q) {
        let vals = self.numerators.iter().map(|v| alpha.iter().zip(v).map(|(a, x)| x * a).sum::<BigInt>());
        let (lo, hi) = vals.fold((None::<BigInt>, None::<BigInt>), |(lo, hi), x| {
            (Some(lo.map_or(x.clone(), |l| l.min(x.clone()))), Some(hi.map_or(x.clone(), |h| h.max(x))))
        });
        let ratio = |x: Option<BigInt>| x.map_or_else(Q::zero, |x| Q::new(x, self.denom.clone()));
        (ratio(lo), ratio(hi))
    }

    pub fn intersect_halfspace(&self, h: &Halfspace) -> Result<Option<Self>, PolygonError> {
        if h.dim() != self.dim {
            return Err(PolygonError::DimensionMismatch(self.dim, h.dim()));
        }
        let mut hs = self.halfspaces.clone();
        hs.push(h.clone());
        Self::from_halfspaces(self.dim, &hs)
    }

    pub fn intersect(&self, other: &Self) -> Result<Option<Self>, PolygonError> {
        if other.dim != self.dim {
            return Err(PolygonError::DimensionMismatch(self.dim, other.dim));
        }
        let mut hs = self.halfspaces.clone();
        hs.extend(other.halfspaces.iter().cloned());
        Self::from_halfspaces(self.dim, &hs)
    }

    /// The face on which `alpha` is maximal, with the maximal value.
    pub fn face_maximizer(&self, alpha: &[i64]) -> Result<(Self, Q), PolygonError> {
        if alpha.len() != self.dim {
            return Err(PolygonError::DimensionMismatch(self.dim, alpha.len()));
        }
        let (_, max) = self.linear_range(alpha);
        if alpha.iter().all(|a| *a == 0) {
            return Ok((self.clone(), max));
        }
        let cut = Halfspace::new(alpha.to_vec(), max.clone())?;
        let face = self.intersect_halfspace(&cut)?.ok_or(PolygonError::Empty)?;
        Ok((face, max))
    }

    /// Image under an affine map (planar case), recomputed as a hull.
    pub fn map_affine(&self, f: impl Fn(&[Q]) -> Point) -> Result<Self, PolygonError> {
        let pts: Vec<Point> = self.vertices.iter().map(|v| f(v)).collect();
        Self::convex_hull(&pts)
    }

    pub fn from_json_str(s: &str) -> Result<Self, PolygonError> {
        let j: PolygonJson = serde_json::from_str(s).map_err(|e| PolygonError::Json(e.to_string()))?;
        Self::from_json(&j)
    }

    pub fn from_json(j: &PolygonJson) -> Result<Self, PolygonError> {
        let from_v = match &j.vertices {
            Some(v) => Some(Self::convex_hull(v)?),
            None => None,
        };
        let from_h = match &j.halfspaces {
            Some(hs) => {
                let dim = hs.first().map(|h| h.normal.len()).ok_or(PolygonError::EmptyInput)?;
                let hs: Vec<Halfspace> =
                    hs.iter().map(|h| Halfspace::new(h.normal.clone(), h.bound.clone())).collect::<Result<_, _>>()?;
                Some(Self::from_halfspaces(dim, &hs)?.ok_or(PolygonError::Empty)?)
            }
            None => None,
        };
        match (from_v, from_h) {
            (Some(a), Some(b)) if a.vertices != b.vertices => Err(PolygonError::Inconsistent),
            (_, Some(b)) => Ok(b),
            (Some(a), None) => Ok(a),
            (None, None) => Err(PolygonError::Json("need `halfspaces` or `vertices`".into())),
        }
    }

    pub fn to_json(&self) -> PolygonJson {
        PolygonJson { halfspaces: Some(self.halfspaces.clone()), vertices: Some(self.vertices.clone()) }
    }
}

/// Rank of a rational matrix (destroys the input).
pub(crate) fn rank(rows: &mut [Vec<Q>]) -> usize {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, p);
        let (top, rest) = rows.split_at_mut(r + 1);
        let pivot = &top[r];
        for row in rest {
            if !row[c].is_zero() {
                let f = &row[c] / &pivot[c];
                for (x, y) in row[c..ncols].iter_mut().zip(&pivot[c..ncols]) {
                    *x -= &f * y;
                }
            }
        }
        r += 1;
    }
    r
}

impl fmt::Display for RationalPolygon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vs: Vec<String> = self.vertices.iter().map(|v| fmt_point(v)).collect();
        write!(f, "conv[{}]", vs.join(", "))
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfspaces: Option<Vec<Halfspace>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_points")]
    pub vertices: Option<Vec<Point>>,
}

mod opt_points {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "serde_qvec")] Point);

    pub fn serialize<S: Serializer>(v: &Option<Vec<Point>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|v| v.iter().map(|p| Wrapped(p.clone())).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Point>>, D::Error> {
        let raw = Option::<Vec<Wrapped>>::deserialize(d)?;
        Ok(raw.map(|v| v.into_iter().map(|w| w.0).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qf;

    fn pts(v: &[(i64, i64)]) -> Vec<Point> {
        v.iter().map(|&(a, b)| vec![q(a), q(b)]).collect()
    }

    #[test]
    fn axis_cuts() {
        let sq = RationalPolygon::square(q(0), q(1));
        let cut = sq.intersect_halfspace(&Halfspace::new(vec![1, 0], qf(1, 2)).unwrap()).unwrap().unwrap();
        let expected = [
            vec![qf(1, 2), q(0)],
            vec![qf(1, 2), q(1)],
            vec![q(1), q(0)],
            vec![q(1), q(1)],
        ];
        assert_eq!(cut.vertices(), &expected);
        assert!(sq.intersect_halfspace(&Halfspace::new(vec![1, 0], q(2)).unwrap()).unwrap().is_none());
        let seg = sq.intersect_halfspace(&Halfspace::new(vec![1, 0], q(1)).unwrap()).unwrap().unwrap();
        assert_eq!(seg.vertices(), &pts(&[(1, 0), (1, 1)])[..]);
        assert_eq!(seg.affine_dim(), 1);
    }

    #[test]
    fn hull_cases() {
        let t = RationalPolygon::convex_hull(&[
            vec![q(0), q(0)],
            vec![q(1), q(0)],
            vec![q(0), q(1)],
            vec![qf(1, 4), qf(1, 4)],
        ])
        .unwrap();
        assert_eq!(t.vertices(), &pts(&[(0, 0), (0, 1), (1, 0)])[..]);
        let p = RationalPolygon::convex_hull(&pts(&[(3, 4)])).unwrap();
        assert_eq!(p.affine_dim(), 0);
        assert_eq!(RationalPolygon::convex_hull(&[]), Err(PolygonError::EmptyInput));
    }

    #[test]
    fn unbounded_rejected() {
        let hs = [Halfspace::new(vec![1, 0], q(0)).unwrap(), Halfspace::new(vec![0, 1], q(0)).unwrap()];
        assert_eq!(RationalPolygon::from_halfspaces(2, &hs), Err(PolygonError::Unbounded));
    }

    #[test]
    fn faces() {
        let sq = RationalPolygon::square(q(0), q(1));
        let (f, m) = sq.face_maximizer(&[1, 0]).unwrap();
        assert_eq!(m, q(1));
        assert_eq!(f.vertices(), &pts(&[(1, 0), (1, 1)])[..]);
        let tri = RationalPolygon::convex_hull(&pts(&[(0, 0), (1, 0), (0, 1)])).unwrap();
        let (f, m) = tri.face_maximizer(&[1, 1]).unwrap();
        assert_eq!(m, q(1));
        assert_eq!(f.vertices(), &pts(&[(0, 1), (1, 0)])[..]);
    }

    #[test]
    fn three_dimensional_cube() {
        let c = RationalPolygon::bbox(&[q(0), q(0), q(0)], &[q(1), q(1), q(1)]).unwrap();
        assert_eq!(c.vertices().len(), 8);
        let cut = c.intersect_halfspace(&Halfspace::new(vec![1, 1, 1], q(3)).unwrap()).unwrap().unwrap();
        assert_eq!(cut.vertices(), &[vec![q(1), q(1), q(1)]][..]);
    }

    #[test]
    fn json_round_trip() {
        let p = RationalPolygon::from_json_str(r#"{"halfspaces":[{"normal":[1,0],"bound":"0"},{"normal":[-1,0],"bound":"-1/2"},{"normal":[0,1],"bound":0},{"normal":[0,-1],"bound":"-1"}]}"#).unwrap();
        assert_eq!(p.vertices().len(), 4);
        let s = serde_json::to_string(&p.to_json()).unwrap();
        assert_eq!(RationalPolygon::from_json_str(&s).unwrap(), p);
        let v = RationalPolygon::from_json_str(r#"{"vertices":[["0","0"],["1/2","0"],["0","1/2"]]}"#).unwrap();
        assert_eq!(v.halfspaces().len(), 3);
        assert!(RationalPolygon::from_json_str(r#"{"vertices":[["0","x"]]}"#).is_err());
    }
}
