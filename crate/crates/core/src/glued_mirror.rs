//! Sections of the mirror over a nodal base: gluing chart-local series across
//! walls, monodromy around nodes, Hartogs extension, point projection and the
//! sampled cocycle/independence/separation checks.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::affine_base::{
    audit_admissible, chart_valid, classify_small, decompose_admissible_intersection, split_by_ray_lines,
    AffineError, Chart, EigenrayDiagram, NodalPolygon, SmallType, StripData, TaggedHalfspace,
};
use crate::laurent::{Exponent, LatticeSeries, LaurentError};
use crate::local_mirror::{
    exact_twist, f_base, g_chart, generic_scalar, is_degenerate_eta, pk_of_point, polygon_pa, working_precision,
    ChartPoint, ChartSide, LocalError, Wall, WallSide,
};
use crate::novikov::{NovikovScalar, Valuation};
use crate::polygon::{Halfspace, PolygonError, RationalPolygon};
use crate::rational::{ext_gcd, fmt_point, fmt_q, q, qf, Point, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GlueError {
    #[error("cover elements {first} and {second} disagree at x^{exponent:?}: {left} vs {right}")]
    OverlapMismatch { first: usize, second: usize, exponent: Exponent, left: String, right: String },
    #[error("cover element {0} is not a small admissible polygon")]
    NotSmallCover(usize),
    #[error("cover element {0}: chart {1} is not affine on its polygon")]
    InvalidChart(usize, Chart),
    #[error("monodromy obstruction: {0}")]
    MonodromyObstruction(String),
    #[error("boundary data disagree at a vertex: {0}")]
    VertexMismatch(String),
    #[error("loop invalid: {0}")]
    LoopInvalid(String),
    #[error("polygon contains no node")]
    NoNode,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Polygon(#[from] PolygonError),
}

/// One element of a cover: a polygon, the chart its local series is written
/// in, and the series (anchored on the chart image of the polygon).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverElement {
    pub polygon: NodalPolygon,
    pub chart: Chart,
    pub series: LatticeSeries,
}

impl CoverElement {
    pub fn new(
        polygon: NodalPolygon,
        chart: Chart,
        terms: impl IntoIterator<Item = (Exponent, NovikovScalar)>,
        tail: Option<Q>,
        d: &EigenrayDiagram,
    ) -> Result<Self, GlueError> {
        let reference = chart_hull(&polygon, chart, d)?;
        Ok(Self { series: LatticeSeries::new(reference, terms, tail), polygon, chart })
    }
}

/// Convex hull of the chart image of a polygon.
pub fn chart_hull(p: &NodalPolygon, chart: Chart, d: &EigenrayDiagram) -> Result<RationalPolygon, GlueError> {
    let mut pts = Vec::new();
    for piece in p.pieces(d)? {
        for part in split_by_ray_lines(&piece, d)? {
            pts.extend(part.vertices().iter().map(|v| d.to_chart(chart, v)));
        }
    }
    Ok(RationalPolygon::convex_hull(&pts)?)
}

fn chart_level(d: &EigenrayDiagram, chart: Chart) -> Option<(usize, i64)> {
    match chart {
        Chart::Plain => None,
        Chart::Sheared { ray, segment } => Some((ray, i64::from(d.rays[ray].level(segment)))),
    }
}

fn chart_steps(d: &EigenrayDiagram, from: Chart, to: Chart) -> Vec<(usize, i64)> {
    if from == to {
        return Vec::new();
    }
    match (chart_level(d, from), chart_level(d, to)) {
        (None, Some((r, k))) => vec![(r, k)],
        (Some((r, k)), None) => vec![(r, -k)],
        (Some((r, k)), Some((r2, k2))) if r == r2 => vec![(r, k2 - k)],
        (Some((r, k)), Some((r2, k2))) => vec![(r, -k), (r2, k2)],
        (None, None) => Vec::new(),
    }
}

fn side_of(piece: &RationalPolygon, d: &EigenrayDiagram, ray: usize) -> WallSide {
    let r = &d.rays[ray];
    if piece.vertices().iter().all(|v| !r.side_value(v).is_negative()) {
        WallSide::Upper
    } else {
        WallSide::Lower
    }
}

fn wall_of(d: &EigenrayDiagram, ray: usize, level: i64) -> Wall {
    let r = &d.rays[ray];
    Wall { direction: r.direction.clone(), base: r.base.clone(), level }
}

/// Transports a local series from chart `from` to chart `to` over a convex
/// piece of the domain that lies on one closed side of every ray line.
pub fn transport(
    d: &EigenrayDiagram,
    f: &LatticeSeries,
    from: Chart,
    to: Chart,
    piece: &RationalPolygon,
    cutoff: &Q,
) -> Result<LatticeSeries, GlueError> {
    let src = piece.map_affine(|w| d.to_chart(from, w))?;
    let mut cur = f.restrict(&src)?;
    for (ray, level) in chart_steps(d, from, to) {
        let side = side_of(piece, d, ray);
        cur = wall_of(d, ray, level).transport(side, &cur, cutoff)?;
    }
    Ok(cur)
}

/// Term comparison below the common precision. Returns the number of
/// verified terms or the first differing exponent.
#[allow(clippy::result_large_err)]
pub fn compare_series(
    a: &LatticeSeries,
    b: &LatticeSeries,
    cutoff: &Q,
) -> Result<usize, (Exponent, NovikovScalar, NovikovScalar)> {
    let mut level = cutoff.clone();
    for t in [a.tail(), b.tail()].into_iter().flatten() {
        if t < &level {
            level = t.clone();
        }
    }
    let ta = a.truncate(&level);
    let tb = b.truncate(&level);
    let keys: BTreeSet<&Exponent> = ta.terms().keys().chain(tb.terms().keys()).collect();
    for j in &keys {
        let (ca, cb) = (ta.coefficient(j), tb.coefficient(j));
        if ca != cb {
            return Err(((*j).clone(), ca, cb));
        }
    }
    Ok(keys.len())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OverlapCertificate {
    pub first: usize,
    pub second: usize,
    pub piece: usize,
    pub chart: Chart,
    #[serde(with = "crate::rational::serde_q")]
    pub cutoff: Q,
    pub verified_terms: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GluedSection {
    pub cover: Vec<CoverElement>,
    pub certificates: Vec<OverlapCertificate>,
}

fn compare_on_piece(
    d: &EigenrayDiagram,
    (i, a): (usize, &CoverElement),
    (j, b): (usize, &CoverElement),
    piece: &RationalPolygon,
    cutoff: &Q,
) -> Result<(Chart, usize), GlueError> {
    let mut candidates = vec![a.chart];
    for c in [b.chart, Chart::Plain] {
        if !candidates.contains(&c) {
            candidates.push(c);
        }
    }
    let mut last = None;
    for ch in candidates {
        let ta = match transport(d, &a.series, a.chart, ch, piece, cutoff) {
            Ok(s) => s,
            Err(e) => {
                last = Some(e);
                continue;
            }
        };
        let tb = match transport(d, &b.series, b.chart, ch, piece, cutoff) {
            Ok(s) => s,
            Err(e) => {
                last = Some(e);
                continue;
            }
        };
        return match compare_series(&ta, &tb, cutoff) {
            Ok(n) => Ok((ch, n)),
            Err((exponent, l, r)) => Err(GlueError::OverlapMismatch {
                first: i,
                second: j,
                exponent,
                left: l.to_string(),
                right: r.to_string(),
            }),
        };
    }
    Err(last.expect("at least one candidate chart"))
}

/// Glues chart-local series over a cover by small admissible polygons.
pub fn glue_sections(cover: &[CoverElement], d: &EigenrayDiagram, cutoff: &Q) -> Result<GluedSection, GlueError> {
    let strips = StripData::auto(d)?;
    for (i, c) in cover.iter().enumerate() {
        if classify_small(&c.polygon, d, &strips)? == SmallType::NotSmall {
            return Err(GlueError::NotSmallCover(i));
        }
        if c.polygon.node.is_none() {
            let pieces: Vec<RationalPolygon> = c
                .polygon
                .pieces(d)?
                .iter()
                .map(|p| split_by_ray_lines(p, d))
                .collect::<Result<Vec<_>, _>>()?
                .concat();
            if !chart_valid(&pieces, c.chart, d)? {
                return Err(GlueError::InvalidChart(i, c.chart));
            }
        }
    }
    let mut certificates = Vec::new();
    for i in 0..cover.len() {
        for j in i + 1..cover.len() {
            let parts = decompose_admissible_intersection(&cover[i].polygon, &cover[j].polygon, d)?;
            let mut idx = 0;
            for part in parts {
                for whole in part.pieces(d)? {
                    for piece in split_by_ray_lines(&whole, d)? {
                        let (chart, verified_terms) =
                            compare_on_piece(d, (i, &cover[i]), (j, &cover[j]), &piece, cutoff)?;
                        certificates.push(OverlapCertificate {
                            first: i,
                            second: j,
                            piece: idx,
                            chart,
                            cutoff: cutoff.clone(),
                            verified_terms,
                        });
                        idx += 1;
                    }
                }
            }
        }
    }
    if !cutoff.is_positive() {
        return Err(GlueError::Unsupported("gluing needs a positive cutoff".into()));
    }
    Ok(GluedSection { cover: cover.to_vec(), certificates })
}

/// The global functions `x`, `y`, `u` of `Y_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum GlobalFunction {
    X,
    Y,
    U,
}

fn binomial_terms(prefix: [i64; 2], n: i64) -> Vec<(Exponent, NovikovScalar)> {
    let mut out = Vec::new();
    let mut c = q(1);
    for m in 0..=n {
        out.push((vec![prefix[0], prefix[1] + m], NovikovScalar::constant(c.clone())));
        c = c * q(n - m) / q(m + 1);
    }
    out
}

/// Terms of a global function in a chart of a diagram whose only ray lies on
/// the line `u = 0` with direction `(1, 0)`.
pub fn global_function_terms(
    g: GlobalFunction,
    chart: Chart,
    d: &EigenrayDiagram,
) -> Result<Vec<(Exponent, NovikovScalar)>, GlueError> {
    let standard = d.rays.len() == 1 && d.rays[0].direction == [1, 0] && d.rays[0].base[1].is_zero();
    if !standard {
        return Err(GlueError::Unsupported("global functions need a single ray along u = 0".into()));
    }
    let total = i64::from(d.rays[0].total_multiplicity());
    let level = chart_level(d, chart).map_or(0, |(_, k)| k);
    Ok(match g {
        GlobalFunction::X => binomial_terms([1, 0], level),
        GlobalFunction::Y => binomial_terms([-1, 0], total - level),
        GlobalFunction::U => vec![(vec![0, 1], NovikovScalar::one())],
    })
}

/// A cover element carrying a global function.
pub fn global_section(
    g: GlobalFunction,
    polygon: NodalPolygon,
    chart: Chart,
    d: &EigenrayDiagram,
) -> Result<CoverElement, GlueError> {
    let terms = global_function_terms(g, chart, d)?;
    CoverElement::new(polygon, chart, terms, None, d)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopStep {
    pub name: &'static str,
    pub series: LatticeSeries,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonodromyReport {
    pub level: i64,
    pub steps: Vec<LoopStep>,
    /// The composite of the four transitions, in the labels of the flat chart below the wall.
    pub raw: LatticeSeries,
    /// `raw` relabeled by the inverse monodromy of the lattice.
    pub closed: LatticeSeries,
    pub closes: bool,
    /// Monodromy on exponents: `(a, b) ↦ (a, b + level·a)`.
    pub lattice_map: [[i64; 2]; 2],
}

/// Transports `f` around a node of total multiplicity `level` in the
/// standard frame (wall along `u = 0`, direction `(1, 0)`). The loop is
/// upper wall crossing, chart change across the ray, inverse lower wall
/// crossing written in the flat chart below the wall, chart change back.
pub fn monodromy_transport(level: u32, f: &LatticeSeries, cutoff: &Q) -> Result<MonodromyReport, GlueError> {
    let k = i64::from(level);
    let start = f.reference().clone();
    if !Wall::b_k(0).polygon_on_side(&start, WallSide::Upper) {
        return Err(GlueError::LoopInvalid("the loop must start on the upper side".into()));
    }
    let up = Wall::b_k(k);
    let step1 = match up.cross_exact(WallSide::Upper, f)? {
        Some(g) => g,
        None => {
            let g = up.cross(WallSide::Upper, f, cutoff)?;
            return Err(GlueError::LoopInvalid(format!(
                "upper wall crossing is an infinite series ({} terms below {}) and cannot be continued across the ray",
                g.terms().len(),
                fmt_q(cutoff)
            )));
        }
    };
    let mirrored = start.map_affine(|w| vec![w[0].clone(), -w[1].clone()])?;
    let lower = mirrored.map_affine(|w| vec![&w[0] - q(k) * &w[1], w[1].clone()])?;
    let step2 = step1.with_reference_unchecked(&lower);
    let raw_terms = exact_twist(step2.terms(), &[1, 0], &[0, -1], &Q::zero(), -k).ok_or_else(|| {
        GlueError::LoopInvalid("inverse lower wall crossing is not a Laurent polynomial".into())
    })?;
    let step3 = LatticeSeries::new(lower, raw_terms, None);
    let raw = step3.with_reference_unchecked(&start);
    let closed = raw.relabel(start.clone(), None, |j| (vec![j[0], j[1] - k * j[0]], Q::zero()));
    let closes = f.tail().is_none() && closed.terms() == f.terms();
    Ok(MonodromyReport {
        level: k,
        steps: vec![
            LoopStep { name: "upper wall crossing", series: step1 },
            LoopStep { name: "right chart change", series: step2 },
            LoopStep { name: "inverse lower wall crossing", series: step3 },
            LoopStep { name: "left chart change", series: raw.clone() },
        ],
        raw,
        closed,
        closes,
        lattice_map: [[1, 0], [k, 1]],
    })
}

/// Frame of a ray: `w ↦ A(w − base)` with rows `c` (`c·e = 1`) and `l = det(e, ·)`.
fn ray_frame(d: &EigenrayDiagram, ray: usize) -> ([i64; 2], [i64; 2], Point) {
    let r = &d.rays[ray];
    let e = &r.direction;
    let (_, c0, c1) = ext_gcd(e[0], e[1]);
    ([c0, c1], [-e[1], e[0]], r.base.clone())
}

/// Monodromy transport around nodes `first..=last` of a ray, in domain
/// coordinates of the chart just before node `first`.
pub fn monodromy_around(
    d: &EigenrayDiagram,
    ray: usize,
    first: usize,
    last: usize,
    f: &LatticeSeries,
    cutoff: &Q,
) -> Result<MonodromyReport, GlueError> {
    let r = d.rays.get(ray).ok_or_else(|| GlueError::LoopInvalid(format!("no ray {ray}")))?;
    if first > last || last >= r.nodes.len() {
        return Err(GlueError::LoopInvalid("bad node range".into()));
    }
    let level: u32 = r.nodes[first..=last].iter().map(|n| n.multiplicity).sum();
    let (c, l, b) = ray_frame(d, ray);
    let jb = |j: &[i64]| q(j[0]) * &b[0] + q(j[1]) * &b[1];
    let frame_ref = f.reference().map_affine(|w| {
        let (x, y) = (&w[0] - &b[0], &w[1] - &b[1]);
        vec![q(c[0]) * &x + q(c[1]) * &y, q(l[0]) * &x + q(l[1]) * &y]
    })?;
    let to_frame = |j: &[i64]| (vec![l[1] * j[0] - l[0] * j[1], -c[1] * j[0] + c[0] * j[1]], jb(j));
    let from_frame = |j: &[i64]| {
        let back = vec![c[0] * j[0] + l[0] * j[1], c[1] * j[0] + l[1] * j[1]];
        let s = -jb(&back);
        (back, s)
    };
    let g = f.relabel(frame_ref, f.tail().cloned(), to_frame);
    let mut rep = monodromy_transport(level, &g, cutoff)?;
    rep.raw = rep.raw.relabel(f.reference().clone(), None, from_frame);
    rep.closed = rep.closed.relabel(f.reference().clone(), None, from_frame);
    rep.closes = f.tail().is_none() && rep.closed.terms() == f.terms();
    Ok(rep)
}

/// The edges of a polygon as chart-tagged segments.
pub fn boundary_edges(p: &NodalPolygon, d: &EigenrayDiagram) -> Result<Vec<(NodalPolygon, Chart)>, GlueError> {
    let mut out = Vec::new();
    for (i, c) in p.constraints.iter().enumerate() {
        let mut cs = p.constraints.clone();
        cs.push(TaggedHalfspace { chart: c.chart, halfspace: c.halfspace.flipped() });
        if let Some(e) = NodalPolygon::try_new(cs, d)? {
            if e.all_vertices(d)?.len() >= 2 && e.node.is_none() {
                out.push((e, p.constraints[i].chart));
            }
        }
    }
    Ok(out)
}

struct EdgePiece {
    edge: usize,
    side: WallSide,
    poly: RationalPolygon,
    series: LatticeSeries,
}

fn compare_pieces(a: &EdgePiece, b: &EdgePiece, cutoff: &Q) -> Result<usize, GlueError> {
    let pts: Vec<Point> =
        a.series.reference().vertices().iter().chain(b.series.reference().vertices()).cloned().collect();
    let common = RationalPolygon::convex_hull(&pts)?;
    compare_series(&a.series.with_reference_unchecked(&common), &b.series.with_reference_unchecked(&common), cutoff)
        .map_err(|(j, l, r)| {
            GlueError::VertexMismatch(format!("edges {} and {} at x^{:?}: {} vs {}", a.edge, b.edge, j, l, r))
        })
}

/// Extends boundary data on the edges of a node-containing polygon to the polygon.
pub fn hartogs_extend(
    edges: &[CoverElement],
    p: &NodalPolygon,
    d: &EigenrayDiagram,
    cutoff: &Q,
) -> Result<GluedSection, GlueError> {
    let node = p.node.ok_or(GlueError::NoNode)?;
    let ref_chart = if node.node == 0 { Chart::Plain } else { Chart::Sheared { ray: node.ray, segment: node.node - 1 } };
    let ray = &d.rays[node.ray];
    let mut pieces = Vec::new();
    for (i, e) in edges.iter().enumerate() {
        for v in e.polygon.all_vertices(d)? {
            if !p.contains(&v, d) || p.contains_strictly(&v, d) {
                return Err(GlueError::VertexMismatch(format!("edge {i} is not on the boundary")));
            }
        }
        for whole in e.polygon.pieces(d)? {
            for piece in split_by_ray_lines(&whole, d)? {
                let touches_line = piece.vertices().iter().any(|v| ray.side_value(v).is_zero());
                let series = match transport(d, &e.series, e.chart, ref_chart, &piece, cutoff) {
                    Ok(s) => s,
                    Err(err) if touches_line => {
                        return Err(GlueError::MonodromyObstruction(format!(
                            "edge {i} cannot be transported across the wall: {err}"
                        )))
                    }
                    Err(err) => return Err(err),
                };
                pieces.push(EdgePiece { edge: i, side: side_of(&piece, d, node.ray), poly: piece, series });
            }
        }
    }
    let mut certificates = Vec::new();
    for opposite in [true, false] {
        for a in 0..pieces.len() {
            for b in a + 1..pieces.len() {
                let (pa, pb) = (&pieces[a], &pieces[b]);
                if (pa.side != pb.side) != opposite || pa.poly.intersect(&pb.poly)?.is_none() {
                    continue;
                }
                let n = match compare_pieces(pa, pb, cutoff) {
                    Ok(n) => n,
                    Err(GlueError::VertexMismatch(m)) if opposite => {
                        return Err(GlueError::MonodromyObstruction(format!("data do not close around the node: {m}")))
                    }
                    Err(e) => return Err(e),
                };
                certificates.push(OverlapCertificate {
                    first: pa.edge,
                    second: pb.edge,
                    piece: certificates.len(),
                    chart: ref_chart,
                    cutoff: cutoff.clone(),
                    verified_terms: n,
                });
            }
        }
    }
    let mut terms: BTreeMap<Exponent, NovikovScalar> = BTreeMap::new();
    let mut tail: Option<Q> = None;
    for pc in &pieces {
        for (j, c) in pc.series.terms() {
            terms.entry(j.clone()).or_insert_with(|| c.clone());
        }
        if let Some(t) = pc.series.tail() {
            tail = Some(tail.map_or(t.clone(), |x: Q| x.min(t.clone())));
        }
    }
    let element = CoverElement::new(p.clone(), ref_chart, terms, tail, d)?;
    Ok(GluedSection { cover: vec![element], certificates })
}

/// A sampled point of the mirror together with its base point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MirrorPointSample {
    pub point: ChartPoint,
    pub base: Point,
}

fn exact_val(a: &NovikovScalar, name: &'static str) -> Result<Q, GlueError> {
    match a.val() {
        Valuation::Exact(v) => Ok(v),
        _ => Err(LocalError::PrecisionLoss(name).into()),
    }
}

/// Base point in domain coordinates of `B_k` of a chart point.
pub fn project_point(p: &ChartPoint, k: u32) -> Result<Point, GlueError> {
    let v = exact_val(&p.xi, "ξ")?;
    let u = exact_val(&p.eta, "η")?;
    Ok(match p.side {
        ChartSide::Plus => vec![v, u],
        ChartSide::Minus => vec![v + q(i64::from(k)) * u.clone().min(Q::zero()), u],
    })
}

/// Draws a generic chart point over a domain point of `B_k`. `None` when the
/// draw is degenerate.
pub fn sample_over<R: Rng>(rng: &mut R, k: u32, side: ChartSide, w: &[Q]) -> Option<ChartPoint> {
    let d = EigenrayDiagram::b_k(k);
    let c = d.to_chart(side.base_chart(), w);
    let xi = generic_scalar(rng, &c[0]);
    let eta = generic_scalar(rng, &c[1]);
    if is_degenerate_eta(&eta) {
        return None;
    }
    Some(ChartPoint { side, xi, eta })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CocycleReport {
    pub draws: usize,
    pub degenerate: usize,
    pub samples_in_p: usize,
    pub in_both: usize,
    pub projection_violations: Vec<String>,
    pub cocycle_violations: Vec<String>,
    pub independence_violations: Vec<String>,
    pub separation_violations: Vec<String>,
}

impl CocycleReport {
    pub fn passed(&self) -> bool {
        self.projection_violations.is_empty()
            && self.cocycle_violations.is_empty()
            && self.independence_violations.is_empty()
            && self.separation_violations.is_empty()
    }
}

fn is_small(p: &NodalPolygon, d: &EigenrayDiagram, strips: &StripData) -> bool {
    audit_admissible(p, d).is_ok() && classify_small(p, d, strips).is_ok_and(|t| t != SmallType::NotSmall)
}

/// A small admissible polygon inside `p`, containing `b` and disjoint from `q_poly`.
pub fn find_separating(
    b: &[Q],
    q_poly: &NodalPolygon,
    p: &NodalPolygon,
    k: u32,
) -> Result<Option<NodalPolygon>, GlueError> {
    let d = EigenrayDiagram::b_k(k);
    let strips = StripData::auto(&d)?;
    let on_node = b[0].is_zero() && b[1].is_zero();
    let chart = if b[1].is_zero() && b[0].is_positive() { ChartSide::Minus.base_chart() } else { Chart::Plain };
    let mut r = qf(1, 4);
    for _ in 0..14 {
        let mut cs = Vec::new();
        if on_node {
            cs.extend(polygon_pa(k, &r)?.constraints);
        } else {
            let ok = (b[1].is_zero() || r < b[1].abs()) && (!b[1].is_zero() || r < b[0].abs());
            if ok {
                let c = d.to_chart(chart, b);
                let h = |n: [i64; 2], x: Q| TaggedHalfspace { chart, halfspace: Halfspace::new(n.to_vec(), x).unwrap() };
                cs.push(h([1, 0], &c[0] - &r));
                cs.push(h([-1, 0], -(&c[0] + &r)));
                cs.push(h([0, 1], &c[1] - &r));
                cs.push(h([0, -1], -(&c[1] + &r)));
            } else {
                r /= q(2);
                continue;
            }
        }
        // A neighborhood already inside `p` needs none of its constraints.
        let inside = NodalPolygon::try_new(cs.clone(), &d)
            .ok()
            .flatten()
            .and_then(|n| n.all_vertices(&d).ok())
            .is_some_and(|vs| vs.iter().all(|v| p.contains(v, &d)));
        if !inside {
            cs.extend(p.constraints.iter().cloned());
        }
        if let Some(cand) = NodalPolygon::try_new(cs, &d).ok().flatten() {
            if cand.contains(b, &d)
                && is_small(&cand, &d, &strips)
                && decompose_admissible_intersection(&cand, q_poly, &d)?.is_empty()
            {
                return Ok(Some(cand));
            }
        }
        r /= q(2);
    }
    Ok(None)
}

/// Sampled check of the strong cocycle condition for `Q, Q' ⊆ P`, of
/// independence for `cover`, and of separation for `Q`.
pub fn cocycle_check<R: Rng>(
    q1: &NodalPolygon,
    q2: &NodalPolygon,
    p: &NodalPolygon,
    cover: &[NodalPolygon],
    k: u32,
    draws: usize,
    rng: &mut R,
) -> Result<CocycleReport, GlueError> {
    let d = EigenrayDiagram::b_k(k);
    let meet = decompose_admissible_intersection(q1, q2, &d)?;
    let (lo, hi) = p.bounding_box(&d)?;
    let mut rep = CocycleReport { draws, ..Default::default() };
    let mut seen: BTreeMap<Point, (bool, bool, bool, bool)> = BTreeMap::new();
    for _ in 0..draws {
        let pick = |rng: &mut R, a: &Q, b: &Q| {
            let lo4 = (a * q(4)).floor().to_integer().try_into().unwrap_or(0i64) - 2;
            let hi4 = (b * q(4)).ceil().to_integer().try_into().unwrap_or(0i64) + 2;
            qf(rng.gen_range(lo4..=hi4), 4)
        };
        let w = vec![pick(rng, &lo[0], &hi[0]), pick(rng, &lo[1], &hi[1])];
        let side = if rng.gen_bool(0.5) { ChartSide::Plus } else { ChartSide::Minus };
        let Some(pt) = sample_over(rng, k, side, &w) else {
            rep.degenerate += 1;
            continue;
        };
        let b = project_point(&pt, k)?;
        let c = d.to_chart(side.base_chart(), &w);
        let amb = g_chart(&pt, k, &working_precision(k, &c[0], &c[1]))?;
        let trop = pk_of_point(&amb)?;
        if b != w || trop != f_base(ChartSide::Plus, k, &b[0], &b[1]) {
            rep.projection_violations.push(format!("sample over {} projects to {}", fmt_point(&w), fmt_point(&b)));
            continue;
        }
        if !p.contains(&b, &d) {
            continue;
        }
        rep.samples_in_p += 1;
        // Membership only depends on the base point, so repeated points reuse the verdicts.
        let verdict = match seen.get(&b) {
            Some(v) => *v,
            None => {
                let both = q1.contains(&b, &d) && q2.contains(&b, &d);
                let in_meet = meet.iter().any(|m| m.contains(&b, &d));
                let covered = cover.is_empty() || cover.iter().any(|c| c.contains(&b, &d));
                let separated = q1.contains(&b, &d) || find_separating(&b, q1, p, k)?.is_some();
                let v = (both, in_meet, covered, separated);
                seen.insert(b.clone(), v);
                v
            }
        };
        let (both, in_meet, covered, separated) = verdict;
        if both {
            rep.in_both += 1;
        }
        if both != in_meet {
            rep.cocycle_violations.push(format!("{}: in both = {both}, in intersection = {in_meet}", fmt_point(&b)));
        }
        if !covered {
            rep.independence_violations.push(format!("{} is not covered", fmt_point(&b)));
        }
        if !separated {
            rep.separation_violations.push(format!("no separating polygon at {}", fmt_point(&b)));
        }
    }
    Ok(rep)
}

/// Cover of `P(a)` by four small admissible polygons.
pub fn pa_small_cover(k: u32, a: &Q) -> Result<Vec<NodalPolygon>, GlueError> {
    let d = EigenrayDiagram::b_k(k);
    let pa = polygon_pa(k, a)?;
    let h = |n: [i64; 2], x: Q| TaggedHalfspace::plain(Halfspace::new(n.to_vec(), x).unwrap());
    let extra = [
        vec![h([0, 1], qf(1, 2))],
        vec![h([0, -1], qf(1, 2))],
        vec![h([0, 1], qf(-3, 4)), h([0, -1], qf(-3, 4)), h([-1, 0], qf(5, 8))],
        vec![h([0, 1], qf(-3, 4)), h([0, -1], qf(-3, 4)), h([1, 0], qf(-3, 4))],
    ];
    let mut out = Vec::new();
    for e in extra {
        if let Some(p) = NodalPolygon::try_new(pa.intersect_constraints(&e), &d)? {
            out.push(p);
        }
    }
    Ok(out)
}

/// A random small admissible polygon inside `P(outer)`.
pub fn random_small_polygon<R: Rng>(rng: &mut R, k: u32, outer: &Q) -> Result<NodalPolygon, GlueError> {
    let d = EigenrayDiagram::b_k(k);
    let strips = StripData::auto(&d)?;
    let pa = polygon_pa(k, outer)?;
    let lim: i64 = (outer * q(4)).floor().to_integer().try_into().unwrap_or(4);
    for _ in 0..200 {
        if rng.gen_bool(0.25) {
            let a = qf(rng.gen_range(1..=3), 4);
            let p = polygon_pa(k, &a)?;
            if is_small(&p, &d, &strips) {
                return Ok(p);
            }
            continue;
        }
        let v0 = qf(rng.gen_range(-lim..=lim), 4);
        let u0 = qf(rng.gen_range(-lim..=lim), 4);
        let v1 = &v0 + qf(rng.gen_range(1..=6), 4);
        let u1 = &u0 + qf(rng.gen_range(1..=6), 4);
        let crosses = u0.is_negative() && u1.is_positive();
        let chart = if crosses && v0.is_positive() {
            ChartSide::Minus.base_chart()
        } else if crosses && !v1.is_negative() {
            continue;
        } else {
            Chart::Plain
        };
        let h = |n: [i64; 2], x: Q| TaggedHalfspace { chart, halfspace: Halfspace::new(n.to_vec(), x).unwrap() };
        let bx = [h([1, 0], v0.clone()), h([-1, 0], -v1), h([0, 1], u0.clone()), h([0, -1], -u1)];
        let Some(p) = NodalPolygon::try_new(pa.intersect_constraints(&bx), &d).ok().flatten() else { continue };
        if is_small(&p, &d, &strips) {
            return Ok(p);
        }
    }
    Err(GlueError::Unsupported("could not draw a small polygon".into()))
}

/// Transports a cover through a branch move of `ray`. Charts of level `K`
/// become charts of level `K_total − K` of the re-cut ray; coordinates and
/// series change by the global shear of that level.
pub fn branch_move_cover(
    cover: &[CoverElement],
    d: &EigenrayDiagram,
    ray: usize,
) -> Result<(EigenrayDiagram, Vec<CoverElement>), GlueError> {
    let nd = d.branch_move(ray)?;
    let r = &d.rays[ray];
    let total = i64::from(r.total_multiplicity());
    let e = r.direction.clone();
    let l = r.l_covector();
    let lb = q(l[0]) * &r.base[0] + q(l[1]) * &r.base[1];
    let new_chart = |chart: Chart| -> Result<(Chart, i64), GlueError> {
        let k = match chart {
            Chart::Plain => 0,
            Chart::Sheared { ray: rr, segment } if rr == ray => i64::from(r.level(segment)),
            Chart::Sheared { .. } => return Err(GlueError::Unsupported("charts of other rays".into())),
        };
        let level = total - k;
        if level == 0 {
            return Ok((Chart::Plain, 0));
        }
        let nr = &nd.rays[ray];
        let seg = (0..nr.nodes.len())
            .find(|&s| i64::from(nr.level(s)) == level)
            .ok_or_else(|| GlueError::Unsupported("no segment with that level".into()))?;
        Ok((Chart::Sheared { ray, segment: seg }, level))
    };
    let mut out = Vec::new();
    for c in cover {
        let mut cs = Vec::new();
        for t in &c.polygon.constraints {
            let (chart, level) = new_chart(t.chart)?;
            let nu = &t.halfspace.normal;
            let ne = nu[0] * e[0] + nu[1] * e[1];
            let normal = vec![nu[0] + level * ne * l[0], nu[1] + level * ne * l[1]];
            let bound = &t.halfspace.bound + q(level * ne) * &lb;
            cs.push(TaggedHalfspace { chart, halfspace: Halfspace::new(normal, bound)? });
        }
        let poly = NodalPolygon::new(cs, &nd)?;
        let (chart, level) = new_chart(c.chart)?;
        let terms: Vec<(Exponent, NovikovScalar)> = c
            .series
            .terms()
            .iter()
            .map(|(j, a)| {
                let je = j[0] * e[0] + j[1] * e[1];
                let nj = vec![j[0] + level * je * l[0], j[1] + level * je * l[1]];
                (nj, a.shift(&(-(q(level * je) * &lb))))
            })
            .collect();
        out.push(CoverElement::new(poly, chart, terms, c.series.tail().cloned(), &nd)?);
    }
    Ok((nd, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn boxed(d: &EigenrayDiagram, chart: Chart, lo: [i64; 2], hi: [i64; 2]) -> NodalPolygon {
        let h = |n: [i64; 2], x: i64| TaggedHalfspace { chart, halfspace: Halfspace::new(n.to_vec(), q(x)).unwrap() };
        NodalPolygon::new(vec![h([1, 0], lo[0]), h([-1, 0], -hi[0]), h([0, 1], lo[1]), h([0, -1], -hi[1])], d).unwrap()
    }

    fn half(d: &EigenrayDiagram, chart: Chart, lo: [Q; 2], hi: [Q; 2]) -> NodalPolygon {
        let h = |n: [i64; 2], x: Q| TaggedHalfspace { chart, halfspace: Halfspace::new(n.to_vec(), x).unwrap() };
        NodalPolygon::new(
            vec![h([1, 0], lo[0].clone()), h([-1, 0], -hi[0].clone()), h([0, 1], lo[1].clone()), h([0, -1], -hi[1].clone())],
            d,
        )
        .unwrap()
    }

    #[test]
    fn wall_gluing() {
        let d = EigenrayDiagram::b_k(1);
        let minus = ChartSide::Minus.base_chart();
        let up = boxed(&d, Chart::Plain, [1, 0], [2, 1]);
        let h = qf(1, 2);
        let low = half(&d, Chart::Plain, [q(1), -h.clone()], [q(2), q(0)]);
        let xi = vec![(vec![1, 0], NovikovScalar::one())];
        // ξ in the plain chart on both sides is the global function x.
        let a = CoverElement::new(up.clone(), Chart::Plain, xi.clone(), None, &d).unwrap();
        let b = CoverElement::new(low.clone(), Chart::Plain, xi.clone(), None, &d).unwrap();
        let g = glue_sections(&[a.clone(), b], &d, &q(6)).unwrap();
        assert!(g.certificates.iter().all(|c| c.verified_terms > 0));
        // ξ⁻ below the wall without transport is a different function.
        let naive = CoverElement::new(low.clone(), minus, xi.clone(), None, &d).unwrap();
        assert!(matches!(glue_sections(&[a.clone(), naive], &d, &q(6)), Err(GlueError::OverlapMismatch { .. })));
        let moved = global_section(GlobalFunction::X, low.clone(), minus, &d).unwrap();
        glue_sections(&[a.clone(), moved], &d, &q(6)).unwrap();
        // η glues on either side in any chart.
        let eu = global_section(GlobalFunction::U, up, Chart::Plain, &d).unwrap();
        let el = CoverElement::new(low, minus, vec![(vec![0, 1], NovikovScalar::one())], None, &d).unwrap();
        glue_sections(&[eu, el], &d, &q(6)).unwrap();
    }

    #[test]
    fn monodromy() {
        let p = RationalPolygon::bbox(&[q(-1), q(1)], &[q(1), q(2)]).unwrap();
        let xi = LatticeSeries::x(p.clone(), &[1, 0]);
        let r = monodromy_transport(1, &xi, &q(8)).unwrap();
        assert_eq!(r.raw.terms(), LatticeSeries::x(p.clone(), &[1, 1]).terms());
        assert!(r.closes);
        let eta = LatticeSeries::x(p.clone(), &[0, 1]);
        assert_eq!(monodromy_transport(1, &eta, &q(8)).unwrap().raw.terms(), eta.terms());
        let inv = LatticeSeries::x(p.clone(), &[-1, 0]);
        assert!(matches!(monodromy_transport(1, &inv, &q(8)), Err(GlueError::LoopInvalid(_))));
        // Resolving a node of multiplicity 3: loops around single nodes compose.
        let d3 = EigenrayDiagram::b_k(3).resolve_node(0, 0, q(1)).unwrap();
        let whole = monodromy_around(&d3, 0, 0, 2, &xi, &q(8)).unwrap();
        let mut cur = xi.clone();
        for j in 0..3 {
            cur = monodromy_around(&d3, 0, j, j, &cur, &q(8)).unwrap().raw;
        }
        assert_eq!(cur.terms(), whole.raw.terms());
        assert_eq!(whole.raw.terms(), monodromy_transport(3, &xi, &q(8)).unwrap().raw.terms());
    }

    #[test]
    fn tilted_frame() {
        let d = EigenrayDiagram {
            rays: vec![crate::affine_base::Ray {
                base: vec![q(1), q(1)],
                direction: vec![1, 1],
                nodes: vec![crate::affine_base::Node { offset: q(0), multiplicity: 2 }],
            }],
        };
        // Upper side of the line v = u: u > v.
        let p = RationalPolygon::bbox(&[q(0), q(3)], &[q(1), q(4)]).unwrap();
        let f = LatticeSeries::x(p.clone(), &[1, 0]);
        let r = monodromy_around(&d, 0, 0, 0, &f, &q(8)).unwrap();
        assert!(r.closes);
        assert_eq!(r.raw.terms().len(), 1);
    }

    #[test]
    fn hartogs() {
        let d = EigenrayDiagram::b_k(1);
        let p = polygon_pa(1, &q(1)).unwrap();
        let edges = boundary_edges(&p, &d).unwrap();
        assert_eq!(edges.len(), 4);
        for g in [GlobalFunction::U, GlobalFunction::X, GlobalFunction::Y] {
            let data: Vec<CoverElement> =
                edges.iter().map(|(e, c)| global_section(g, e.clone(), *c, &d).unwrap()).collect();
            let ext = hartogs_extend(&data, &p, &d, &q(8)).unwrap();
            let want = global_function_terms(g, Chart::Plain, &d).unwrap();
            let got: Vec<(Exponent, NovikovScalar)> =
                ext.cover[0].series.terms().iter().map(|(j, c)| (j.clone(), c.clone())).collect();
            assert_eq!(got, want, "{g:?}");
        }
        let naive: Vec<CoverElement> = edges
            .iter()
            .map(|(e, c)| CoverElement::new(e.clone(), *c, vec![(vec![1, 0], NovikovScalar::one())], None, &d).unwrap())
            .collect();
        assert!(matches!(hartogs_extend(&naive, &p, &d, &q(8)), Err(GlueError::MonodromyObstruction(_))));
        let mut bad: Vec<CoverElement> =
            edges.iter().map(|(e, c)| global_section(GlobalFunction::U, e.clone(), *c, &d).unwrap()).collect();
        bad[0] = CoverElement::new(edges[0].0.clone(), edges[0].1, vec![(vec![0, 2], NovikovScalar::one())], None, &d)
            .unwrap();
        assert!(matches!(hartogs_extend(&bad, &p, &d, &q(8)), Err(GlueError::VertexMismatch(_))));
    }

    #[test]
    fn projection() {
        let pt = ChartPoint { side: ChartSide::Plus, xi: NovikovScalar::t_pow(q(1)), eta: NovikovScalar::t_pow(q(1)) };
        assert_eq!(project_point(&pt, 1).unwrap(), vec![q(1), q(1)]);
        let m = ChartPoint { side: ChartSide::Minus, xi: NovikovScalar::t_pow(q(1)), eta: NovikovScalar::t_pow(q(-1)) };
        let (_, plus) = crate::affine_base::chart_transition(1, &[q(1), q(-1)]).unwrap();
        assert_eq!(project_point(&m, 1).unwrap(), plus);
        let unit = ChartPoint { side: ChartSide::Plus, xi: NovikovScalar::one(), eta: NovikovScalar::constant(q(2)) };
        assert_eq!(project_point(&unit, 2).unwrap(), vec![q(0), q(0)]);
    }

    #[test]
    fn cocycle_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in [1, 2] {
            let p = polygon_pa(k, &q(2)).unwrap();
            let cover = pa_small_cover(k, &q(2)).unwrap();
            let q1 = random_small_polygon(&mut rng, k, &q(2)).unwrap();
            let q2 = random_small_polygon(&mut rng, k, &q(2)).unwrap();
            let rep = cocycle_check(&q1, &q2, &p, &cover, k, 60, &mut rng).unwrap();
            assert!(rep.passed(), "{rep:?}");
            assert!(rep.samples_in_p > 0);
        }
    }

    #[test]
    fn branch_move_transport() {
        let d = EigenrayDiagram::b_k(1);
        let up = boxed(&d, Chart::Plain, [1, 0], [2, 1]);
        let low = half(&d, Chart::Plain, [q(1), qf(-1, 2)], [q(2), q(0)]);
        let cover = vec![
            global_section(GlobalFunction::X, up, Chart::Plain, &d).unwrap(),
            global_section(GlobalFunction::X, low, Chart::Plain, &d).unwrap(),
        ];
        let g = glue_sections(&cover, &d, &q(6)).unwrap();
        let (nd, moved) = branch_move_cover(&cover, &d, 0).unwrap();
        let g2 = glue_sections(&moved, &nd, &q(6)).unwrap();
        assert_eq!(g.certificates.len(), g2.certificates.len());
    }
}
