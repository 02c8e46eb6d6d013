//! Eigenray diagrams and the nodal integral affine bases they present.
//!
//! Points of the base are written in *domain coordinates*: the plane carrying
//! the diagram, which is an integral affine chart away from the rays. Near a
//! ray the affine structure is described by a [`Chart::Sheared`] chart that
//! applies the accumulated monodromy shear on the negative side of the ray
//! line. Polygons are intersections of halfspaces, each tagged by the chart in
//! which its boundary is a straight line.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polygon::{Halfspace, PolygonError, RationalPolygon};
use crate::rational::{fmt_point, fmt_q, q, serde_q, serde_qvec, Point, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AffineError {
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("invalid diagram: {}", fmt_issues(.0))]
    Invalid(Vec<DiagramIssue>),
    #[error("direction {0:?} is not primitive")]
    NonPrimitive(Vec<i64>),
    #[error("node order violated: {0}")]
    OrderViolation(String),
    #[error("eigenline of ray {0} meets another ray")]
    LineObstructed(usize),
    #[error("point lies on the wall; the side is ambiguous")]
    OnWall,
    #[error("not admissible: {0}")]
    NotAdmissible(String),
    #[error("invalid strips: {0}")]
    InvalidStrips(String),
    #[error("index out of range: {0}")]
    BadIndex(String),
    #[error("polygon is empty")]
    Empty,
    #[error(transparent)]
    Polygon(#[from] PolygonError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagramIssue {
    OverlappingRays { first: usize, second: usize },
    NonPrimitiveDirection { ray: usize, direction: Vec<i64> },
    BadOffsets { ray: usize, reason: String },
}

impl fmt::Display for DiagramIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagramIssue::OverlappingRays { first, second } => write!(f, "rays {first} and {second} overlap"),
            DiagramIssue::NonPrimitiveDirection { ray, direction } => {
                write!(f, "ray {ray} has non-primitive direction {direction:?}")
            }
            DiagramIssue::BadOffsets { ray, reason } => write!(f, "ray {ray}: {reason}"),
        }
    }
}

fn fmt_issues(v: &[DiagramIssue]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

fn det2(a: &[Q], b: &[Q]) -> Q {
    &a[0] * &b[1] - &a[1] * &b[0]
}

fn qv(v: &[i64]) -> Point {
    v.iter().map(|&x| q(x)).collect()
}

fn is_primitive(v: &[i64]) -> bool {
    use num_integer::Integer;
    v.iter().fold(0i64, |g, &a| g.gcd(&a)) == 1
}

/// `A_{k,e}(v) = v − k·det(e,v)·e`.
pub fn shear_apply(k: i64, e: &[i64], v: &[Q]) -> Result<Point, AffineError> {
    if e.len() != 2 || !is_primitive(e) {
        return Err(AffineError::NonPrimitive(e.to_vec()));
    }
    let ev = qv(e);
    let d = det2(&ev, v) * q(k);
    Ok(vec![&v[0] - &d * &ev[0], &v[1] - &d * &ev[1]])
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    #[serde(with = "serde_q")]
    pub offset: Q,
    pub multiplicity: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ray {
    #[serde(with = "serde_qvec")]
    pub base: Point,
    pub direction: Vec<i64>,
    pub nodes: Vec<Node>,
}

impl Ray {
    pub fn e(&self) -> Point {
        qv(&self.direction)
    }

    /// `l = det(e, ·)` as an integer covector.
    pub fn l_covector(&self) -> Vec<i64> {
        vec![-self.direction[1], self.direction[0]]
    }

    /// Primitive covector perpendicular to the ray, `e⊥ = (−e₂, e₁)` read as a vector.
    pub fn perp(&self) -> Point {
        qv(&self.l_covector())
    }

    fn norm2(&self) -> Q {
        q(self.direction[0] * self.direction[0] + self.direction[1] * self.direction[1])
    }

    pub fn node_position(&self, i: usize) -> Point {
        let e = self.e();
        let t = &self.nodes[i].offset;
        vec![&self.base[0] + t * &e[0], &self.base[1] + t * &e[1]]
    }

    pub fn point_at(&self, t: &Q) -> Point {
        let e = self.e();
        vec![&self.base[0] + t * &e[0], &self.base[1] + t * &e[1]]
    }

    pub fn total_multiplicity(&self) -> u32 {
        self.nodes.iter().map(|n| n.multiplicity).sum()
    }

    /// Monodromy accumulated beyond node `segment` (sum of multiplicities up to it).
    pub fn level(&self, segment: usize) -> u32 {
        self.nodes.iter().take(segment + 1).map(|n| n.multiplicity).sum()
    }

    /// `det(e, w − base)`: positive on the upper side.
    pub fn side_value(&self, w: &[Q]) -> Q {
        let d = vec![&w[0] - &self.base[0], &w[1] - &self.base[1]];
        det2(&self.e(), &d)
    }

    /// Parameter `t` of the orthogonal projection of `w` onto the ray line.
    pub fn t_at(&self, w: &[Q]) -> Q {
        let e = self.e();
        ((&w[0] - &self.base[0]) * &e[0] + (&w[1] - &self.base[1]) * &e[1]) / self.norm2()
    }

    /// Signed distance parameter `s` with `w = base + t e + s e⊥`.
    pub fn s_at(&self, w: &[Q]) -> Q {
        self.side_value(w) / self.norm2()
    }

    /// `{w : det(e, w − base) >= 0}`.
    pub fn upper_halfspace(&self) -> Halfspace {
        Halfspace::through(self.l_covector(), &self.base).expect("primitive direction")
    }

    /// Shear by `level` on the lower side; identity on the upper side.
    pub fn shear(&self, level: u32, w: &[Q]) -> Point {
        let d = self.side_value(w);
        if !d.is_negative() {
            return w.to_vec();
        }
        let e = self.e();
        let c = d * q(i64::from(level));
        vec![&w[0] - &c * &e[0], &w[1] - &c * &e[1]]
    }

    /// Inverse of [`Ray::shear`] (the side value is shear invariant).
    pub fn unshear(&self, level: u32, w: &[Q]) -> Point {
        let d = self.side_value(w);
        if !d.is_negative() {
            return w.to_vec();
        }
        let e = self.e();
        let c = d * q(i64::from(level));
        vec![&w[0] + &c * &e[0], &w[1] + &c * &e[1]]
    }

    /// Global affine shear `w ↦ w − level·det(e, w − base)·e`.
    pub fn global_shear(&self, level: i64, w: &[Q]) -> Point {
        let e = self.e();
        let c = self.side_value(w) * q(level);
        vec![&w[0] - &c * &e[0], &w[1] - &c * &e[1]]
    }

    /// Whether the ray, as a point set, meets the closed segment or line given
    /// by `p + s d` for `s` in the given range (`None` = unbounded).
    fn meets_param(&self, p: &[Q], d: &[Q], lo: Option<&Q>, hi: Option<&Q>) -> bool {
        let e = self.e();
        let denom = det2(&e, d);
        let bp = vec![&p[0] - &self.base[0], &p[1] - &self.base[1]];
        let in_range = |s: &Q| lo.is_none_or(|l| s >= l) && hi.is_none_or(|h| s <= h);
        if !denom.is_zero() {
            // base + t e = p + s d  ⇒  t = det(bp, d)/det(e, d), s = det(bp, e)/det(e, d)
            let t = det2(&bp, d) / &denom;
            let s = det2(&bp, &e) / &denom;
            return !t.is_negative() && in_range(&s);
        }
        if !det2(&e, &bp).is_zero() {
            return false;
        }
        // Collinear: the ray is {t >= 0}; param s maps to t = (bp + s d)·e/|e|².
        let n2 = self.norm2();
        let t_of = |s: &Q| (&bp[0] * &e[0] + &bp[1] * &e[1] + s * (&d[0] * &e[0] + &d[1] * &e[1])) / &n2;
        let slope = (&d[0] * &e[0] + &d[1] * &e[1]) / &n2;
        match (lo, hi) {
            (Some(l), Some(h)) => !t_of(l).is_negative() || !t_of(h).is_negative(),
            (Some(l), None) => slope.is_positive() || !t_of(l).is_negative(),
            (None, Some(h)) => slope.is_negative() || !t_of(h).is_negative(),
            (None, None) => true,
        }
    }

    pub fn meets_ray(&self, other: &Ray) -> bool {
        self.meets_param(&other.base, &other.e(), Some(&Q::zero()), None)
    }

    /// Whether the full eigenline of this ray meets `other`.
    pub fn line_meets_ray(&self, other: &Ray) -> bool {
        other.meets_param(&self.base, &self.e(), None, None)
    }
}

/// Which flat chart a coordinate or constraint refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    /// Domain coordinates; affine away from every ray.
    Plain,
    /// Affine near the part of ray `ray` beyond node `segment` (up to the next node).
    Sheared { ray: usize, segment: usize },
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Chart::Plain => write!(f, "plain"),
            Chart::Sheared { ray, segment } => write!(f, "sheared[{ray}:{segment}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenrayDiagram {
    pub rays: Vec<Ray>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub ray: usize,
    pub node: usize,
}

impl EigenrayDiagram {
    /// The local model `B_k`: one ray from the origin in direction `(1,0)`.
    pub fn b_k(k: u32) -> Self {
        Self {
            rays: vec![Ray {
                base: vec![q(0), q(0)],
                direction: vec![1, 0],
                nodes: vec![Node { offset: q(0), multiplicity: k }],
            }],
        }
    }

    pub fn parse(text: &str) -> Result<Self, AffineError> {
        let d: Self = serde_json::from_str(text).map_err(|e| AffineError::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        d.validate()?;
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagram serializes")
    }

    /// Structural validation; every problem found is reported.
    pub fn validate(&self) -> Result<(), AffineError> {
        let mut issues = Vec::new();
        for (i, r) in self.rays.iter().enumerate() {
            if r.direction.len() != 2 || !is_primitive(&r.direction) {
                issues.push(DiagramIssue::NonPrimitiveDirection { ray: i, direction: r.direction.clone() });
            }
            if r.base.len() != 2 {
                issues.push(DiagramIssue::BadOffsets { ray: i, reason: "base must have two coordinates".into() });
            }
            match r.nodes.first() {
                None => issues.push(DiagramIssue::BadOffsets { ray: i, reason: "ray has no nodes".into() }),
                Some(n) if !n.offset.is_zero() => issues.push(DiagramIssue::BadOffsets {
                    ray: i,
                    reason: format!("first offset is {}, expected 0", fmt_q(&n.offset)),
                }),
                _ => {}
            }
            if r.nodes.windows(2).any(|w| w[1].offset <= w[0].offset) {
                issues.push(DiagramIssue::BadOffsets { ray: i, reason: "offsets must increase strictly".into() });
            }
            if r.nodes.iter().any(|n| n.multiplicity == 0) {
                issues.push(DiagramIssue::BadOffsets { ray: i, reason: "multiplicities must be positive".into() });
            }
        }
        if issues.is_empty() {
            for i in 0..self.rays.len() {
                for j in i + 1..self.rays.len() {
                    if self.rays[i].meets_ray(&self.rays[j]) {
                        issues.push(DiagramIssue::OverlappingRays { first: i, second: j });
                    }
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(AffineError::Invalid(issues))
        }
    }

    pub fn nodes(&self) -> Vec<(NodeRef, Point, u32)> {
        let mut out = Vec::new();
        for (i, r) in self.rays.iter().enumerate() {
            for (j, n) in r.nodes.iter().enumerate() {
                out.push((NodeRef { ray: i, node: j }, r.node_position(j), n.multiplicity));
            }
        }
        out
    }

    pub fn node_position(&self, n: NodeRef) -> Point {
        self.rays[n.ray].node_position(n.node)
    }

    fn chart_ray(&self, chart: Chart) -> Option<(&Ray, u32)> {
        match chart {
            Chart::Plain => None,
            Chart::Sheared { ray, segment } => {
                let r = &self.rays[ray];
                Some((r, r.level(segment)))
            }
        }
    }

    /// Domain coordinates to chart coordinates.
    pub fn to_chart(&self, chart: Chart, w: &[Q]) -> Point {
        match self.chart_ray(chart) {
            None => w.to_vec(),
            Some((r, k)) => r.shear(k, w),
        }
    }

    /// Chart coordinates to domain coordinates.
    pub fn from_chart(&self, chart: Chart, w: &[Q]) -> Point {
        match self.chart_ray(chart) {
            None => w.to_vec(),
            Some((r, k)) => r.unshear(k, w),
        }
    }

    /// Pulls a chart halfspace back to domain coordinates on one side of the
    /// chart's ray line.
    fn pull_back(&self, c: &TaggedHalfspace, upper: bool) -> Halfspace {
        match self.chart_ray(c.chart) {
            Some((r, k)) if !upper && k > 0 => {
                let nu = &c.halfspace.normal;
                let ne = nu[0] * r.direction[0] + nu[1] * r.direction[1];
                let l = r.l_covector();
                let factor = i64::from(k) * ne;
                let normal = vec![nu[0] - factor * l[0], nu[1] - factor * l[1]];
                let lb = q(l[0]) * &r.base[0] + q(l[1]) * &r.base[1];
                let bound = &c.halfspace.bound - q(factor) * lb;
                Halfspace::new(normal, bound).expect("pulled-back normal is nonzero")
            }
            _ => c.halfspace.clone(),
        }
    }

    /// Replaces a ray's node list after checking the ordering rules.
    fn with_nodes(&self, ray: usize, base: Point, nodes: Vec<Node>) -> Result<Self, AffineError> {
        let mut d = self.clone();
        d.rays[ray].base = base;
        d.rays[ray].nodes = nodes;
        d.validate().map_err(|e| AffineError::OrderViolation(e.to_string()))?;
        Ok(d)
    }

    /// Moves node `node` of ray `ray` to absolute offset `new_offset` (measured
    /// from the current base). Moving the first node moves the base with it.
    pub fn nodal_slide(&self, ray: usize, node: usize, new_offset: Q) -> Result<Self, AffineError> {
        let r = self.rays.get(ray).ok_or_else(|| AffineError::BadIndex(format!("ray {ray}")))?;
        if node >= r.nodes.len() {
            return Err(AffineError::BadIndex(format!("node {node} of ray {ray}")));
        }
        let prev_ok = node == 0 || r.nodes[node - 1].offset < new_offset;
        let next_ok = r.nodes.get(node + 1).is_none_or(|n| new_offset < n.offset);
        if !prev_ok || !next_ok {
            return Err(AffineError::OrderViolation(format!(
                "offset {} would pass a neighboring node",
                fmt_q(&new_offset)
            )));
        }
        let mut nodes = r.nodes.clone();
        nodes[node].offset = new_offset;
        let shift = nodes[0].offset.clone();
        let base = r.point_at(&shift);
        for n in &mut nodes {
            n.offset = &n.offset - &shift;
        }
        self.with_nodes(ray, base, nodes)
    }

    /// Splits a node of multiplicity `k` into `k` simple nodes spaced `spacing` apart.
    pub fn resolve_node(&self, ray: usize, node: usize, spacing: Q) -> Result<Self, AffineError> {
        let r = self.rays.get(ray).ok_or_else(|| AffineError::BadIndex(format!("ray {ray}")))?;
        let n = r.nodes.get(node).ok_or_else(|| AffineError::BadIndex(format!("node {node}")))?;
        if !spacing.is_positive() {
            return Err(AffineError::OrderViolation("spacing must be positive".into()));
        }
        let mut nodes: Vec<Node> = r.nodes[..node].to_vec();
        for i in 0..n.multiplicity {
            nodes.push(Node { offset: &n.offset + &spacing * q(i64::from(i)), multiplicity: 1 });
        }
        nodes.extend(r.nodes[node + 1..].iter().cloned());
        self.with_nodes(ray, r.base.clone(), nodes)
    }

    /// Re-cuts ray `ray` along the complementary half of its eigenline.
    ///
    /// The new ray starts at the last node and points the other way. Domain
    /// coordinates on the negative side of the line are replaced by the
    /// coordinates of the chart that is affine across the old ray, i.e. they
    /// are sheared by the total multiplicity; other rays there move with them.
    pub fn branch_move(&self, ray: usize) -> Result<Self, AffineError> {
        let r = self.rays.get(ray).ok_or_else(|| AffineError::BadIndex(format!("ray {ray}")))?;
        for (j, other) in self.rays.iter().enumerate() {
            if j != ray && r.line_meets_ray(other) {
                return Err(AffineError::LineObstructed(ray));
            }
        }
        let total = r.total_multiplicity();
        let last = r.nodes.last().expect("validated ray").offset.clone();
        let new_ray = Ray {
            base: r.point_at(&last),
            direction: r.direction.iter().map(|x| -x).collect(),
            nodes: r
                .nodes
                .iter()
                .rev()
                .map(|n| Node { offset: &last - &n.offset, multiplicity: n.multiplicity })
                .collect(),
        };
        let mut rays = Vec::with_capacity(self.rays.len());
        for (j, other) in self.rays.iter().enumerate() {
            if j == ray {
                rays.push(new_ray.clone());
                continue;
            }
            if r.side_value(&other.base).is_negative() {
                let dir = shear_apply(i64::from(total), &r.direction, &qv(&other.direction))?;
                rays.push(Ray {
                    base: r.shear(total, &other.base),
                    direction: dir.iter().map(|x| x.to_integer().try_into().expect("small direction")).collect(),
                    nodes: other.nodes.clone(),
                });
            } else {
                rays.push(other.clone());
            }
        }
        let d = Self { rays };
        d.validate()?;
        Ok(d)
    }

    /// Applies a global integral affine map `w ↦ A w + c` with `A` unimodular.
    pub fn transform(&self, a: [[i64; 2]; 2], c: &[Q]) -> Self {
        let map = |w: &[Q]| -> Point {
            vec![
                q(a[0][0]) * &w[0] + q(a[0][1]) * &w[1] + &c[0],
                q(a[1][0]) * &w[0] + q(a[1][1]) * &w[1] + &c[1],
            ]
        };
        Self {
            rays: self
                .rays
                .iter()
                .map(|r| Ray {
                    base: map(&r.base),
                    direction: vec![
                        a[0][0] * r.direction[0] + a[0][1] * r.direction[1],
                        a[1][0] * r.direction[0] + a[1][1] * r.direction[1],
                    ],
                    nodes: r.nodes.clone(),
                })
                .collect(),
        }
    }
}

/// Side of the wall in the local model `B_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

/// `(v⁻, u⁻) ↦ (v⁺, u⁺)` in `B_k`: identity for `u > 0`, `(v + k u, u)` for `u < 0`.
pub fn chart_transition(k: u32, point: &[Q]) -> Result<(Side, Point), AffineError> {
    let u = &point[1];
    if u.is_zero() {
        return Err(AffineError::OnWall);
    }
    if u.is_positive() {
        Ok((Side::Upper, point.to_vec()))
    } else {
        Ok((Side::Lower, vec![&point[0] + q(i64::from(k)) * u, u.clone()]))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaggedHalfspace {
    pub chart: Chart,
    pub halfspace: Halfspace,
}

impl TaggedHalfspace {
    pub fn plain(h: Halfspace) -> Self {
        Self { chart: Chart::Plain, halfspace: h }
    }
}

/// A polygon in the base, cut out by chart-tagged halfspaces.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodalPolygon {
    pub constraints: Vec<TaggedHalfspace>,
    pub node: Option<NodeRef>,
}

impl NodalPolygon {
    /// Builds the polygon, recording the node it contains. `Ok(None)` if empty.
    pub fn try_new(constraints: Vec<TaggedHalfspace>, diagram: &EigenrayDiagram) -> Result<Option<Self>, AffineError> {
        let mut p = Self { constraints, node: None };
        if p.pieces(diagram)?.is_empty() {
            return Ok(None);
        }
        let mut inside = Vec::new();
        for (n, pos, _) in diagram.nodes() {
            if p.contains(&pos, diagram) {
                inside.push(n);
            }
        }
        match inside.len() {
            0 => {}
            1 => p.node = Some(inside[0]),
            _ => return Err(AffineError::NotAdmissible("polygon contains more than one node".into())),
        }
        Ok(Some(p))
    }

    pub fn new(constraints: Vec<TaggedHalfspace>, diagram: &EigenrayDiagram) -> Result<Self, AffineError> {
        Self::try_new(constraints, diagram)?.ok_or(AffineError::Empty)
    }

    /// A convex polygon of the domain, with plain constraints.
    pub fn from_convex(p: &RationalPolygon, diagram: &EigenrayDiagram) -> Result<Self, AffineError> {
        let cs = p.halfspaces().iter().cloned().map(TaggedHalfspace::plain).collect();
        Self::new(cs, diagram)
    }

    pub fn contains(&self, w: &[Q], diagram: &EigenrayDiagram) -> bool {
        self.constraints.iter().all(|c| c.halfspace.contains(&diagram.to_chart(c.chart, w)))
    }

    /// Whether `w` satisfies every constraint strictly.
    pub fn contains_strictly(&self, w: &[Q], diagram: &EigenrayDiagram) -> bool {
        self.constraints
            .iter()
            .all(|c| c.halfspace.slack(&diagram.to_chart(c.chart, w)).is_positive())
    }

    fn sheared_rays(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .constraints
            .iter()
            .filter_map(|c| match c.chart {
                Chart::Sheared { ray, .. } => Some(ray),
                Chart::Plain => None,
            })
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Convex pieces in domain coordinates whose union is the polygon. Pieces
    /// are cut along the lines of rays whose sheared charts are used.
    pub fn pieces(&self, diagram: &EigenrayDiagram) -> Result<Vec<RationalPolygon>, AffineError> {
        let rays = self.sheared_rays();
        let mut out = Vec::new();
        for mask in 0..(1u32 << rays.len()) {
            let mut hs = Vec::new();
            for (bit, &r) in rays.iter().enumerate() {
                let up = diagram.rays[r].upper_halfspace();
                hs.push(if mask & (1 << bit) == 0 { up } else { up.flipped() });
            }
            for c in &self.constraints {
                let upper = match c.chart {
                    Chart::Plain => true,
                    Chart::Sheared { ray, .. } => {
                        let bit = rays.iter().position(|&r| r == ray).expect("collected");
                        mask & (1 << bit) == 0
                    }
                };
                hs.push(diagram.pull_back(c, upper));
            }
            match RationalPolygon::from_halfspaces(2, &hs) {
                Ok(Some(p)) => out.push(p),
                Ok(None) => {}
                Err(PolygonError::Unbounded) => {
                    return Err(AffineError::NotAdmissible("polygon is unbounded".into()));
                }
                Err(e) => return Err(e.into()),
            }
        }
        // Drop pieces that are subsets of others (lower-dimensional seams).
        let mut kept: Vec<RationalPolygon> = Vec::new();
        for (i, p) in out.iter().enumerate() {
            let dominated = out
                .iter()
                .enumerate()
                .any(|(j, o)| j != i && p.is_subset_of(o) && (!o.is_subset_of(p) || j < i));
            if !dominated {
                kept.push(p.clone());
            }
        }
        Ok(kept)
    }

    /// Adds more constraints.
    pub fn intersect_constraints(&self, more: &[TaggedHalfspace]) -> Vec<TaggedHalfspace> {
        let mut cs = self.constraints.clone();
        cs.extend(more.iter().cloned());
        cs
    }

    /// Axis-aligned bounding box `(lo, hi)` of the pieces.
    pub fn bounding_box(&self, diagram: &EigenrayDiagram) -> Result<(Point, Point), AffineError> {
        let pieces = self.pieces(diagram)?;
        let mut lo: Option<Point> = None;
        let mut hi: Option<Point> = None;
        for p in &pieces {
            for v in p.vertices() {
                lo = Some(match lo {
                    None => v.clone(),
                    Some(l) => vec![l[0].clone().min(v[0].clone()), l[1].clone().min(v[1].clone())],
                });
                hi = Some(match hi {
                    None => v.clone(),
                    Some(h) => vec![h[0].clone().max(v[0].clone()), h[1].clone().max(v[1].clone())],
                });
            }
        }
        match (lo, hi) {
            (Some(l), Some(h)) => Ok((l, h)),
            _ => Err(AffineError::Empty),
        }
    }

    /// Every vertex of every piece.
    pub fn all_vertices(&self, diagram: &EigenrayDiagram) -> Result<Vec<Point>, AffineError> {
        let mut v: Vec<Point> = self.pieces(diagram)?.iter().flat_map(|p| p.vertices().to_vec()).collect();
        v.sort();
        v.dedup();
        Ok(v)
    }
}

impl fmt::Display for NodalPolygon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cs: Vec<String> = self.constraints.iter().map(|c| format!("{}@{}", c.halfspace, c.chart)).collect();
        write!(f, "{{{}}}", cs.join(" ∧ "))
    }
}

/// Splits a convex domain polygon by every ray line of the diagram.
pub fn split_by_ray_lines(p: &RationalPolygon, diagram: &EigenrayDiagram) -> Result<Vec<RationalPolygon>, AffineError> {
    let mut parts = vec![p.clone()];
    for r in &diagram.rays {
        let up = r.upper_halfspace();
        let mut next = Vec::new();
        for part in parts {
            let has_up = part.vertices().iter().any(|v| r.side_value(v).is_positive());
            let has_down = part.vertices().iter().any(|v| r.side_value(v).is_negative());
            if has_up && has_down {
                next.extend(part.intersect_halfspace(&up)?);
                next.extend(part.intersect_halfspace(&up.flipped())?);
            } else {
                next.push(part);
            }
        }
        parts = next;
    }
    Ok(parts)
}

/// Range of ray parameters `t` where a convex piece meets the ray line.
pub(crate) fn line_range(p: &RationalPolygon, r: &Ray) -> Result<Option<(Q, Q)>, AffineError> {
    let up = r.upper_halfspace();
    let Some(a) = p.intersect_halfspace(&up)? else { return Ok(None) };
    let Some(seg) = a.intersect_halfspace(&up.flipped())? else { return Ok(None) };
    let ts: Vec<Q> = seg.vertices().iter().map(|v| r.t_at(v)).collect();
    Ok(Some((ts.iter().min().cloned().unwrap(), ts.iter().max().cloned().unwrap())))
}

/// Ray-parameter intervals where the polygon has points on both sides of the ray line.
fn crossing_ranges(pieces: &[RationalPolygon], r: &Ray) -> Result<Vec<(Q, Q)>, AffineError> {
    let mut ups = Vec::new();
    let mut downs = Vec::new();
    for p in pieces {
        let up = p.vertices().iter().any(|v| r.side_value(v).is_positive());
        let down = p.vertices().iter().any(|v| r.side_value(v).is_negative());
        if let Some(range) = line_range(p, r)? {
            if up {
                ups.push(range.clone());
            }
            if down {
                downs.push(range);
            }
        }
    }
    let mut out = Vec::new();
    for (a0, a1) in &ups {
        for (b0, b1) in &downs {
            let lo = a0.clone().max(b0.clone());
            let hi = a1.clone().min(b1.clone());
            if lo <= hi {
                out.push((lo, hi));
            }
        }
    }
    Ok(out)
}

fn interval_meets(ranges: &[(Q, Q)], lo: Option<&Q>, hi: Option<&Q>) -> bool {
    ranges
        .iter()
        .any(|(a, b)| lo.is_none_or(|l| b >= l) && hi.is_none_or(|h| a <= h))
}

/// Checks that a chart is affine on the polygon: the polygon does not cross
/// any part of a ray where the chart jumps.
pub(crate) fn chart_valid(pieces: &[RationalPolygon], chart: Chart, diagram: &EigenrayDiagram) -> Result<bool, AffineError> {
    for (i, r) in diagram.rays.iter().enumerate() {
        let ranges = crossing_ranges(pieces, r)?;
        if ranges.is_empty() {
            continue;
        }
        let bad = match chart {
            Chart::Sheared { ray, segment } if ray == i => {
                let start = &r.nodes[segment].offset;
                let end = r.nodes.get(segment + 1).map(|n| &n.offset);
                interval_meets(&ranges, None, Some(start)) && ranges.iter().any(|(a, _)| a < start)
                    || end.is_some_and(|e| ranges.iter().any(|(_, b)| b > e))
            }
            _ => interval_meets(&ranges, Some(&Q::zero()), None),
        };
        if bad {
            return Ok(false);
        }
    }
    Ok(true)
}

fn area2(p: &RationalPolygon) -> Q {
    if p.affine_dim() < 2 {
        return Q::zero();
    }
    let v = p.vertices_ccw();
    let mut acc = Q::zero();
    for i in 0..v.len() {
        let (a, b) = (&v[i], &v[(i + 1) % v.len()]);
        acc += &a[0] * &b[1] - &a[1] * &b[0];
    }
    acc.abs()
}

/// Convexity of the chart image. Transition maps have determinant one and the
/// pieces are interior-disjoint, so the image is convex iff its hull has the
/// same area as the pieces (or, for segments, the same extent along an axis).
fn chart_image_convex(
    pieces: &[RationalPolygon],
    chart: Chart,
    diagram: &EigenrayDiagram,
) -> Result<bool, AffineError> {
    let mut images = Vec::new();
    for p in pieces {
        let parts = match chart {
            Chart::Plain => vec![p.clone()],
            Chart::Sheared { ray, .. } => {
                let r = &diagram.rays[ray];
                let up = r.upper_halfspace();
                let mut v = Vec::new();
                v.extend(p.intersect_halfspace(&up)?);
                v.extend(p.intersect_halfspace(&up.flipped())?);
                v
            }
        };
        for part in parts {
            let pts: Vec<Point> = part.vertices().iter().map(|v| diagram.to_chart(chart, v)).collect();
            images.push(RationalPolygon::convex_hull(&pts)?);
        }
    }
    let all: Vec<Point> = images.iter().flat_map(|p| p.vertices().to_vec()).collect();
    let hull = RationalPolygon::convex_hull(&all)?;
    match hull.affine_dim() {
        0 => Ok(true),
        1 => {
            let axis = if hull.linear_range(&[1, 0]).0 != hull.linear_range(&[1, 0]).1 { [1, 0] } else { [0, 1] };
            let len = |p: &RationalPolygon| {
                let (lo, hi) = p.linear_range(&axis);
                hi - lo
            };
            let mut pieces_len = Q::zero();
            for (i, im) in images.iter().enumerate() {
                // Collinear pieces may repeat a seam; count each distinct piece once.
                if images[..i].iter().all(|o| o != im) {
                    pieces_len += len(im);
                }
            }
            Ok(pieces_len == len(&hull))
        }
        _ => {
            let sum: Q = images.iter().map(area2).sum();
            Ok(sum == area2(&hull))
        }
    }
}

/// Candidate flat charts of a diagram.
pub fn all_charts(diagram: &EigenrayDiagram) -> Vec<Chart> {
    let mut v = vec![Chart::Plain];
    for (i, r) in diagram.rays.iter().enumerate() {
        for s in 0..r.nodes.len() {
            v.push(Chart::Sheared { ray: i, segment: s });
        }
    }
    v
}

/// Admissibility audit. Returns the flat chart in which a node-free polygon
/// is convex, or `None` for a node-containing polygon.
pub fn audit_admissible(p: &NodalPolygon, diagram: &EigenrayDiagram) -> Result<Option<Chart>, AffineError> {
    let pieces = p.pieces(diagram)?;
    if pieces.is_empty() {
        return Err(AffineError::NotAdmissible("polygon is empty".into()));
    }
    let mut nodes_in = Vec::new();
    for (n, pos, _) in diagram.nodes() {
        if p.contains(&pos, diagram) {
            nodes_in.push((n, pos));
        }
    }
    if nodes_in.len() > 1 {
        return Err(AffineError::NotAdmissible("more than one node".into()));
    }
    if let Some((n, pos)) = nodes_in.first() {
        if !p.contains_strictly(pos, diagram) {
            return Err(AffineError::NotAdmissible(format!("node {}:{} lies on the boundary", n.ray, n.node)));
        }
        return Ok(None);
    }
    let split: Vec<RationalPolygon> =
        pieces.iter().map(|x| split_by_ray_lines(x, diagram)).collect::<Result<Vec<_>, _>>()?.concat();
    for chart in all_charts(diagram) {
        if chart_valid(&split, chart, diagram)? && chart_image_convex(&split, chart, diagram)? {
            return Ok(Some(chart));
        }
    }
    Err(AffineError::NotAdmissible("not convex in any flat chart".into()))
}

/// Writes `P ∩ Q` as a finite union of admissible convex polygons.
pub fn decompose_admissible_intersection(
    p: &NodalPolygon,
    q_poly: &NodalPolygon,
    diagram: &EigenrayDiagram,
) -> Result<Vec<NodalPolygon>, AffineError> {
    audit_admissible(p, diagram)?;
    audit_admissible(q_poly, diagram)?;
    let concat = |a: &NodalPolygon, b: &NodalPolygon| a.intersect_constraints(&b.constraints);
    let node_case = match (p.node, q_poly.node) {
        (Some(a), Some(b)) => a == b,
        (Some(_), None) | (None, Some(_)) => true,
        (None, None) => false,
    };
    if node_case {
        let Some(joined) = NodalPolygon::try_new(concat(p, q_poly), diagram)? else { return Ok(Vec::new()) };
        if audit_admissible(&joined, diagram).is_ok() {
            return Ok(vec![joined]);
        }
    }
    let mut out: Vec<NodalPolygon> = Vec::new();
    for a in p.pieces(diagram)? {
        for b in q_poly.pieces(diagram)? {
            let Some(ab) = a.intersect(&b)? else { continue };
            for piece in split_by_ray_lines(&ab, diagram)? {
                out.push(NodalPolygon::from_convex(&piece, diagram)?);
            }
        }
    }
    // Drop pieces covered by another piece.
    let mut kept: Vec<NodalPolygon> = Vec::new();
    let convex: Vec<RationalPolygon> = out.iter().map(|x| x.pieces(diagram).map(|v| v[0].clone())).collect::<Result<_, _>>()?;
    for i in 0..out.len() {
        let dominated = (0..out.len()).any(|j| {
            j != i && convex[i].is_subset_of(&convex[j]) && (!convex[j].is_subset_of(&convex[i]) || j < i)
        });
        if !dominated {
            kept.push(out[i].clone());
        }
    }
    Ok(kept)
}

/// Strip data: for each ray a half-infinite strip `{t >= −h, |s| <= h}` in the
/// ray's `(t, s)` frame, the ray `l̃ = {s = 0, t >= −h/2}`, and perpendicular
/// segments `σ_j = {t = t_j, |s| <= h}` through the nodes. `l̃` starts inside
/// the strip so that finitely many small polygons cover a neighborhood of its
/// starting point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripData {
    #[serde(with = "crate::rational::serde_qvec")]
    pub half_widths: Vec<Q>,
}

/// Type of a small admissible polygon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SmallType {
    TypeA,
    TypeB,
    TypeC,
    NotSmall,
}

impl StripData {
    fn strip_halfspaces(r: &Ray, h: &Q) -> Vec<Halfspace> {
        let n2 = q(r.direction[0] * r.direction[0] + r.direction[1] * r.direction[1]);
        let e = r.direction.clone();
        let l = r.l_covector();
        let eb = q(e[0]) * &r.base[0] + q(e[1]) * &r.base[1];
        let lb = q(l[0]) * &r.base[0] + q(l[1]) * &r.base[1];
        vec![
            Halfspace::new(e, eb - h * &n2).expect("primitive"),
            Halfspace::new(l.clone(), &lb - h * &n2).expect("primitive"),
            Halfspace::new(l.iter().map(|x| -x).collect(), -(lb + h * &n2)).expect("primitive"),
        ]
    }

    pub fn validate(&self, diagram: &EigenrayDiagram) -> Result<(), AffineError> {
        if self.half_widths.len() != diagram.rays.len() {
            return Err(AffineError::InvalidStrips("one half-width per ray required".into()));
        }
        if self.half_widths.iter().any(|h| !h.is_positive()) {
            return Err(AffineError::InvalidStrips("half-widths must be positive".into()));
        }
        for i in 0..diagram.rays.len() {
            for j in i + 1..diagram.rays.len() {
                let mut hs = Self::strip_halfspaces(&diagram.rays[i], &self.half_widths[i]);
                hs.extend(Self::strip_halfspaces(&diagram.rays[j], &self.half_widths[j]));
                match RationalPolygon::from_halfspaces(2, &hs) {
                    Ok(None) => {}
                    _ => return Err(AffineError::InvalidStrips(format!("strips {i} and {j} overlap"))),
                }
            }
        }
        Ok(())
    }

    /// Largest half-width of the form `2^{-m}` (at most 1) keeping strips disjoint.
    pub fn auto(diagram: &EigenrayDiagram) -> Result<Self, AffineError> {
        let mut h = q(1);
        for _ in 0..40 {
            let s = Self { half_widths: vec![h.clone(); diagram.rays.len()] };
            if s.validate(diagram).is_ok() {
                return Ok(s);
            }
            h /= q(2);
        }
        Err(AffineError::InvalidStrips("could not separate the strips".into()))
    }

    pub fn strip_contains(&self, diagram: &EigenrayDiagram, i: usize, w: &[Q]) -> bool {
        Self::strip_halfspaces(&diagram.rays[i], &self.half_widths[i]).iter().all(|h| h.contains(w))
    }

    /// Corner points of strip `i` truncated at parameter `t_max` (for drawing).
    pub fn strip_corners(&self, diagram: &EigenrayDiagram, i: usize, t_max: &Q) -> Vec<Point> {
        let r = &diagram.rays[i];
        let h = &self.half_widths[i];
        let e = r.e();
        let p = r.perp();
        let at = |t: &Q, s: &Q| vec![&r.base[0] + t * &e[0] + s * &p[0], &r.base[1] + t * &e[1] + s * &p[1]];
        let nh = -h.clone();
        vec![at(&nh, &nh), at(t_max, &nh), at(t_max, h), at(&nh, h)]
    }

    /// Endpoints of the segment `σ_{ij}`.
    pub fn sigma(&self, diagram: &EigenrayDiagram, i: usize, j: usize) -> (Point, Point) {
        let r = &diagram.rays[i];
        let c = r.node_position(j);
        let p = r.perp();
        let h = &self.half_widths[i];
        (
            vec![&c[0] - h * &p[0], &c[1] - h * &p[1]],
            vec![&c[0] + h * &p[0], &c[1] + h * &p[1]],
        )
    }
}

/// Range of the parameter `s` on `P ∩ {t = t0}` for ray `r`.
fn s_range_on_cross_line(pieces: &[RationalPolygon], r: &Ray, t0: &Q) -> Result<Option<(Q, Q)>, AffineError> {
    let e = r.direction.clone();
    let n2 = q(e[0] * e[0] + e[1] * e[1]);
    let eb = q(e[0]) * &r.base[0] + q(e[1]) * &r.base[1];
    let h = Halfspace::new(e, eb + t0 * n2)?;
    let mut lo: Option<Q> = None;
    let mut hi: Option<Q> = None;
    for p in pieces {
        let Some(a) = p.intersect_halfspace(&h)? else { continue };
        let Some(seg) = a.intersect_halfspace(&h.flipped())? else { continue };
        for v in seg.vertices() {
            let s = r.s_at(v);
            lo = Some(lo.map_or(s.clone(), |l: Q| l.min(s.clone())));
            hi = Some(hi.map_or(s.clone(), |x: Q| x.max(s.clone())));
        }
    }
    Ok(lo.zip(hi))
}

/// Classifies a polygon as small of type A, B or C (in that order of preference).
pub fn classify_small(p: &NodalPolygon, diagram: &EigenrayDiagram, strips: &StripData) -> Result<SmallType, AffineError> {
    strips.validate(diagram)?;
    let pieces = p.pieces(diagram)?;
    let verts: Vec<Point> = pieces.iter().flat_map(|x| x.vertices().to_vec()).collect();
    let mut meets_tilde = Vec::new();
    for (i, r) in diagram.rays.iter().enumerate() {
        let h = &strips.half_widths[i];
        let mut hit = false;
        for x in &pieces {
            if let Some((_, tmax)) = line_range(x, r)? {
                if tmax >= -(h.clone() / q(2)) {
                    hit = true;
                }
            }
        }
        if hit {
            meets_tilde.push(i);
        }
    }
    if meets_tilde.is_empty() {
        return Ok(SmallType::TypeA);
    }
    for i in 0..diagram.rays.len() {
        if !verts.iter().all(|v| strips.strip_contains(diagram, i, v)) {
            continue;
        }
        let r = &diagram.rays[i];
        let h = &strips.half_widths[i];
        let mut hits = Vec::new();
        for j in 0..r.nodes.len() {
            if let Some((lo, hi)) = s_range_on_cross_line(&pieces, r, &r.nodes[j].offset)? {
                if lo <= h.clone() && hi >= -h.clone() {
                    hits.push(j);
                }
            }
        }
        if let Some(n) = p.node {
            if n.ray == i && hits.iter().all(|&j| j == n.node) {
                return Ok(SmallType::TypeB);
            }
        }
        if hits.is_empty() {
            return Ok(SmallType::TypeC);
        }
    }
    Ok(SmallType::NotSmall)
}

impl fmt::Display for EigenrayDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.rays.iter().enumerate() {
            let nodes: Vec<String> =
                r.nodes.iter().map(|n| format!("{}(x{})", fmt_q(&n.offset), n.multiplicity)).collect();
            writeln!(f, "ray {i}: base {} dir {:?} nodes {}", fmt_point(&r.base), r.direction, nodes.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qf;

    fn pt(a: i64, b: i64) -> Point {
        vec![q(a), q(b)]
    }

    #[test]
    fn shears() {
        assert_eq!(shear_apply(1, &[1, 0], &pt(0, 1)).unwrap(), pt(-1, 1));
        assert_eq!(shear_apply(2, &[0, 1], &pt(1, 0)).unwrap(), pt(1, 2));
        assert_eq!(shear_apply(3, &[2, 1], &pt(2, 1)).unwrap(), pt(2, 1));
        assert!(matches!(shear_apply(1, &[2, 2], &pt(1, 0)), Err(AffineError::NonPrimitive(_))));
    }

    #[test]
    fn parsing_and_validation() {
        let ok = r#"{"rays":[{"base":["0","0"],"direction":[1,0],"nodes":[{"offset":"0","multiplicity":1}]}]}"#;
        assert_eq!(EigenrayDiagram::parse(ok).unwrap(), EigenrayDiagram::b_k(1));
        let overlap = r#"{"rays":[
            {"base":["0","0"],"direction":[1,0],"nodes":[{"offset":"0","multiplicity":1}]},
            {"base":["2","-1"],"direction":[0,1],"nodes":[{"offset":"0","multiplicity":1}]}]}"#;
        match EigenrayDiagram::parse(overlap) {
            Err(AffineError::Invalid(v)) => assert_eq!(v, vec![DiagramIssue::OverlappingRays { first: 0, second: 1 }]),
            other => panic!("{other:?}"),
        }
        let nonprim = r#"{"rays":[{"base":["0","0"],"direction":[2,2],"nodes":[{"offset":"0","multiplicity":1}]}]}"#;
        assert!(matches!(
            EigenrayDiagram::parse(nonprim),
            Err(AffineError::Invalid(v)) if matches!(v[0], DiagramIssue::NonPrimitiveDirection { .. })
        ));
        let bad = "{\"rays\":[\n  {\"base\":[\"0\"],}]}";
        assert!(matches!(EigenrayDiagram::parse(bad), Err(AffineError::Parse { line: 2, .. })));
    }

    #[test]
    fn ray_intersections() {
        let a = Ray { base: pt(0, 0), direction: vec![1, 0], nodes: vec![] };
        let opposite = Ray { base: pt(-1, 0), direction: vec![-1, 0], nodes: vec![] };
        let facing = Ray { base: pt(3, 0), direction: vec![-1, 0], nodes: vec![] };
        let crossing = Ray { base: pt(1, 1), direction: vec![0, -1], nodes: vec![] };
        let parallel = Ray { base: pt(0, 1), direction: vec![1, 0], nodes: vec![] };
        assert!(!a.meets_ray(&opposite));
        assert!(a.meets_ray(&facing));
        assert!(a.meets_ray(&crossing));
        assert!(!a.meets_ray(&parallel));
        assert!(a.line_meets_ray(&opposite));
    }

    #[test]
    fn transitions() {
        assert_eq!(chart_transition(1, &pt(3, 2)).unwrap(), (Side::Upper, pt(3, 2)));
        assert_eq!(chart_transition(2, &pt(0, -1)).unwrap(), (Side::Lower, pt(-2, -1)));
        assert_eq!(chart_transition(2, &pt(5, 0)), Err(AffineError::OnWall));
        let d = EigenrayDiagram::b_k(2);
        let minus = Chart::Sheared { ray: 0, segment: 0 };
        // Chart coordinates of the sheared chart undo the transition.
        let w = pt(1, -1);
        assert_eq!(chart_transition(2, &d.to_chart(minus, &w)).unwrap().1, w);
    }

    #[test]
    fn slides_and_resolution() {
        let d = EigenrayDiagram::b_k(1);
        let s = d.nodal_slide(0, 0, q(1)).unwrap();
        assert_eq!(s.rays[0].base, pt(1, 0));
        let d3 = EigenrayDiagram::b_k(3);
        let r = d3.resolve_node(0, 0, q(1)).unwrap();
        let offs: Vec<Q> = r.rays[0].nodes.iter().map(|n| n.offset.clone()).collect();
        assert_eq!(offs, vec![q(0), q(1), q(2)]);
        assert!(r.rays[0].nodes.iter().all(|n| n.multiplicity == 1));
        assert!(matches!(r.nodal_slide(0, 1, q(3)), Err(AffineError::OrderViolation(_))));
    }

    #[test]
    fn branch_moves() {
        let d = EigenrayDiagram::b_k(1);
        let m = d.branch_move(0).unwrap();
        assert_eq!(m.rays[0].direction, vec![-1, 0]);
        assert_eq!(m.branch_move(0).unwrap(), d);
        let two = EigenrayDiagram {
            rays: vec![
                d.rays[0].clone(),
                Ray { base: pt(-3, 0), direction: vec![-1, 0], nodes: vec![Node { offset: q(0), multiplicity: 1 }] },
            ],
        };
        assert_eq!(two.branch_move(0), Err(AffineError::LineObstructed(0)));
    }

    #[test]
    fn node_polygon_pieces() {
        let d = EigenrayDiagram::b_k(1);
        let minus = Chart::Sheared { ray: 0, segment: 0 };
        let cs = vec![
            TaggedHalfspace::plain(Halfspace::new(vec![0, -1], q(-1)).unwrap()),
            TaggedHalfspace::plain(Halfspace::new(vec![0, 1], q(-1)).unwrap()),
            TaggedHalfspace::plain(Halfspace::new(vec![1, 0], q(-1)).unwrap()),
            TaggedHalfspace { chart: minus, halfspace: Halfspace::new(vec![-1, 0], q(-1)).unwrap() },
        ];
        let p = NodalPolygon::new(cs, &d).unwrap();
        assert_eq!(p.node, Some(NodeRef { ray: 0, node: 0 }));
        assert_eq!(audit_admissible(&p, &d).unwrap(), None);
        // Lower part: v <= 1 + u.
        assert!(p.contains(&[qf(-1, 2), qf(-1, 2)], &d));
        assert!(!p.contains(&[qf(3, 4), qf(-1, 2)], &d));
        assert!(p.contains(&[qf(3, 4), qf(1, 2)], &d));
        let pieces = p.pieces(&d).unwrap();
        assert_eq!(pieces.len(), 2);
    }

    #[test]
    fn straddling_polygon_needs_sheared_chart() {
        let d = EigenrayDiagram::b_k(1);
        let sq = RationalPolygon::bbox(&[q(1), q(-1)], &[q(2), q(1)]).unwrap();
        let p = NodalPolygon::from_convex(&sq, &d).unwrap();
        // Convex in domain coordinates but it crosses the ray: the plain chart
        // is not affine there, and the sheared image is not convex.
        assert!(audit_admissible(&p, &d).is_err());
        let away = RationalPolygon::bbox(&[q(-3), q(-1)], &[q(-2), q(1)]).unwrap();
        assert_eq!(audit_admissible(&NodalPolygon::from_convex(&away, &d).unwrap(), &d).unwrap(), Some(Chart::Plain));
    }

    #[test]
    fn small_types() {
        let d = EigenrayDiagram::b_k(1);
        let strips = StripData::auto(&d).unwrap();
        let far = NodalPolygon::from_convex(&RationalPolygon::square(q(5), q(6)), &d).unwrap();
        assert_eq!(classify_small(&far, &d, &strips).unwrap(), SmallType::TypeA);
        let minus = Chart::Sheared { ray: 0, segment: 0 };
        let h = qf(1, 2);
        let around = NodalPolygon::new(
            vec![
                TaggedHalfspace::plain(Halfspace::new(vec![0, -1], -h.clone()).unwrap()),
                TaggedHalfspace::plain(Halfspace::new(vec![0, 1], -h.clone()).unwrap()),
                TaggedHalfspace::plain(Halfspace::new(vec![1, 0], -h.clone()).unwrap()),
                TaggedHalfspace { chart: minus, halfspace: Halfspace::new(vec![-1, 0], -h.clone()).unwrap() },
            ],
            &d,
        )
        .unwrap();
        assert_eq!(classify_small(&around, &d, &strips).unwrap(), SmallType::TypeB);
        let beyond = NodalPolygon::new(
            vec![
                TaggedHalfspace { chart: minus, halfspace: Halfspace::new(vec![1, 0], q(2)).unwrap() },
                TaggedHalfspace { chart: minus, halfspace: Halfspace::new(vec![-1, 0], q(-3)).unwrap() },
                TaggedHalfspace { chart: minus, halfspace: Halfspace::new(vec![0, 1], -h.clone()).unwrap() },
                TaggedHalfspace { chart: minus, halfspace: Halfspace::new(vec![0, -1], -h.clone()).unwrap() },
            ],
            &d,
        )
        .unwrap();
        assert_eq!(audit_admissible(&beyond, &d).unwrap(), Some(minus));
        assert_eq!(classify_small(&beyond, &d, &strips).unwrap(), SmallType::TypeC);
        let two = EigenrayDiagram {
            rays: vec![
                d.rays[0].clone(),
                Ray { base: pt(0, 4), direction: vec![1, 0], nodes: vec![Node { offset: q(0), multiplicity: 1 }] },
            ],
        };
        let s2 = StripData::auto(&two).unwrap();
        let tall = NodalPolygon::from_convex(&RationalPolygon::bbox(&[q(-2), q(-1)], &[qf(-1, 4), q(5)]).unwrap(), &two).unwrap();
        assert_eq!(classify_small(&tall, &two, &s2).unwrap(), SmallType::NotSmall);
    }
}
