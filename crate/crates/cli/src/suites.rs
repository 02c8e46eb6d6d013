use std::collections::BTreeMap;

use clustermirror::affine_base::{audit_admissible, split_by_ray_lines, AffineError, Chart, EigenrayDiagram, NodalPolygon};
use clustermirror::bv::{bv_delta, interior_product, IndexSet, PolyVector};
use clustermirror::filtered::{
    boundary_depth, determinantal_exponents, max_torsion, random_complex, torsion_matches_depth, Extended,
};
use clustermirror::glued_mirror::{
    boundary_edges, cocycle_check, compare_series, global_function_terms, global_section, glue_sections,
    hartogs_extend, monodromy_transport, pa_small_cover, random_small_polygon, transport, CoverElement,
    GlobalFunction, GlueError,
};
use clustermirror::laurent::Exponent;
use clustermirror::local_mirror::{
    f_base, g_chart, generic_scalar, is_degenerate_eta, pk_of_point, polygon_pa, relation_holds, sample_valuation,
    wall_cross_series, wall_cross_volume_check, working_precision, ChartPoint, ChartSide, Wall, WallCrossSpec,
    WallSide,
};
use clustermirror::rational::{q, qf};
use clustermirror::{LatticeSeries, NovikovScalar, RationalPolygon, Q};
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Outcome = Result<String, String>;
pub type Checks = Vec<(String, Outcome)>;

#[derive(Clone, Debug)]
pub struct SuiteArgs {
    pub k: u32,
    pub cutoff: Q,
    pub seed: u64,
    pub instances: usize,
    pub samples: usize,
    pub a: Q,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

/// Independent per-instance generator: the run seed picks the key, the instance id the stream.
pub fn instance_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

pub fn rect(lo: [i64; 2], hi: [i64; 2]) -> RationalPolygon {
    RationalPolygon::bbox(&[q(lo[0]), q(lo[1])], &[q(hi[0]), q(hi[1])]).expect("nonempty box")
}

/// The chart a small polygon's series is written in: its flat chart, or for a
/// polygon around a node the chart just before that node.
pub fn local_chart(p: &NodalPolygon, d: &EigenrayDiagram) -> Result<Chart, AffineError> {
    Ok(match (audit_admissible(p, d)?, p.node) {
        (Some(chart), _) => chart,
        (None, Some(n)) if n.node > 0 => Chart::Sheared { ray: n.ray, segment: n.node - 1 },
        (None, _) => Chart::Plain,
    })
}

/// `Σ c ξ^a η^b` for a series in the chart coordinates of `B_k`.
pub fn xi_eta(f: &LatticeSeries) -> String {
    let power = |name: &str, e: i64| match e {
        0 => String::new(),
        1 => name.to_string(),
        e => format!("{name}^{e}"),
    };
    let mut parts = Vec::new();
    for (j, c) in f.terms() {
        let mono = format!("{}{}", power("ξ", j[0]), power("η", j[1]));
        let coef = c.to_string();
        parts.push(match (coef.as_str(), mono.is_empty()) {
            (c, true) => c.to_string(),
            ("1", false) => mono,
            ("-1", false) => format!("-{mono}"),
            (c, false) if c.contains(['+', 'T', ' ']) => format!("({c}){mono}"),
            (c, false) => format!("{c}{mono}"),
        });
    }
    let mut s = if parts.is_empty() { "0".to_string() } else { parts.join(" + ") };
    if let Some(t) = f.tail() {
        s.push_str(&format!(" + O(T^{t})"));
    }
    s
}

fn binomials(k: i64) -> Vec<Q> {
    let mut row = vec![q(1)];
    for m in 0..k {
        let next = row[m as usize].clone() * q(k - m) / q(m + 1);
        row.push(next);
    }
    row
}

fn terms(f: &LatticeSeries) -> BTreeMap<Exponent, NovikovScalar> {
    f.terms().clone()
}

pub fn wallcross(a: &SuiteArgs) -> Checks {
    let k = a.k;
    let mut out = Checks::new();
    let p = rect([0, 0], [1, 1]);
    let formula = (|| {
        let spec = WallCrossSpec { k, side: WallSide::Upper, cutoff: a.cutoff.clone(), polygon: p.clone() };
        let img = wall_cross_series(&spec, &LatticeSeries::x(p.clone(), &[1, 0])).map_err(err)?;
        let want: BTreeMap<Exponent, NovikovScalar> = binomials(i64::from(k))
            .into_iter()
            .enumerate()
            .map(|(j, c)| (vec![1, j as i64], NovikovScalar::constant(c)))
            .collect();
        let shown = format!("ξ ↦ {}", xi_eta(&img));
        ensure(terms(&img) == want && img.tail().is_none(), || format!("binomial mismatch: {shown}"))?;
        Ok(shown)
    })();
    out.push(("upper crossing of ξ".into(), formula));

    let factor = (|| {
        let base = rect([-1, 1], [1, 2]);
        let f = LatticeSeries::new(
            base,
            vec![
                (vec![1, 0], NovikovScalar::one()),
                (vec![-1, 0], NovikovScalar::constant(q(3))),
                (vec![2, -1], NovikovScalar::monomial(q(-2), qf(1, 2))),
            ],
            None,
        );
        let direct = Wall::b_k(i64::from(k)).cross(WallSide::Upper, &f, &a.cutoff).map_err(err)?;
        let mut it = f.clone();
        for _ in 0..k {
            it = Wall::b_k(1).cross(WallSide::Upper, &it, &a.cutoff).map_err(err)?;
        }
        let n = compare_series(&direct, &it, &a.cutoff).map_err(|(j, l, r)| format!("at {j:?}: {l} vs {r}"))?;
        Ok(format!("{n} terms agree below T^{}", a.cutoff))
    })();
    out.push((format!("factorization into {k} simple crossings"), factor));

    let cert = wall_cross_volume_check(k);
    let vol = if cert.holds { Ok(format!("det = {} = 1", cert.determinant)) } else { Err(format!("det = {}", cert.determinant)) };
    out.push(("unit log-Jacobian".into(), vol));
    out
}

pub fn monodromy(a: &SuiteArgs) -> Checks {
    let k = a.k;
    let mut out = Checks::new();
    let identity = (|| {
        let (up, low) = (rect([-1, 0], [1, 2]), rect([-1, -2], [1, 0]));
        let cross = |side, p: &RationalPolygon| {
            let spec = WallCrossSpec { k, side, cutoff: a.cutoff.clone(), polygon: p.clone() };
            wall_cross_series(&spec, &LatticeSeries::x(p.clone(), &[1, 0])).map_err(err)
        };
        let upper = cross(WallSide::Upper, &up)?;
        let lower = cross(WallSide::Lower, &low)?;
        ensure(terms(&upper) == terms(&lower), || format!("upper {} vs lower {}", xi_eta(&upper), xi_eta(&lower)))?;
        Ok(format!("ξ(1+η)^{k} = ξη^{k}(1+η⁻¹)^{k} = {}", xi_eta(&upper)))
    })();
    out.push(("upper and lower images agree".into(), identity));

    let lp = (|| {
        let f = LatticeSeries::x(rect([-1, 1], [1, 2]), &[1, 0]);
        let rep = monodromy_transport(k, &f, &a.cutoff).map_err(err)?;
        let want: BTreeMap<Exponent, NovikovScalar> =
            [(vec![1, i64::from(k)], NovikovScalar::one())].into_iter().collect();
        ensure(rep.closes && terms(&rep.raw) == want, || format!("loop gives {}", xi_eta(&rep.raw)))?;
        Ok(format!("ξ ↦ {} around the node", xi_eta(&rep.raw)))
    })();
    out.push(("transport around the node".into(), lp));
    out
}

pub fn hartogs(a: &SuiteArgs) -> Checks {
    let d = EigenrayDiagram::b_k(a.k);
    let mut out = Checks::new();
    let setup = polygon_pa(a.k, &a.a).map_err(err).and_then(|p| Ok((boundary_edges(&p, &d).map_err(err)?, p)));
    let (edges, p) = match setup {
        Ok(x) => x,
        Err(e) => return vec![("boundary of P(a)".into(), Err(e))],
    };
    for g in [GlobalFunction::U, GlobalFunction::X, GlobalFunction::Y] {
        let r = (|| {
            let data: Vec<CoverElement> =
                edges.iter().map(|(e, c)| global_section(g, e.clone(), *c, &d)).collect::<Result<_, _>>().map_err(err)?;
            let ext = hartogs_extend(&data, &p, &d, &a.cutoff).map_err(err)?;
            let el = &ext.cover[0];
            let want: BTreeMap<Exponent, NovikovScalar> =
                global_function_terms(g, el.chart, &d).map_err(err)?.into_iter().collect();
            ensure(terms(&el.series) == want, || format!("extension {}", xi_eta(&el.series)))?;
            for e in &data {
                for whole in e.polygon.pieces(&d).map_err(err)? {
                    for piece in split_by_ray_lines(&whole, &d).map_err(err)? {
                        let x = transport(&d, &el.series, el.chart, e.chart, &piece, &a.cutoff).map_err(err)?;
                        let y = transport(&d, &e.series, e.chart, e.chart, &piece, &a.cutoff).map_err(err)?;
                        compare_series(&x, &y, &a.cutoff).map_err(|(j, l, r)| format!("restriction at {j:?}: {l} vs {r}"))?;
                    }
                }
            }
            Ok(format!("{} edges, extension {} in chart {}", edges.len(), xi_eta(&el.series), el.chart))
        })();
        out.push((format!("{g:?} extends from ∂P(a)"), r));
    }
    let naive: Result<Vec<CoverElement>, _> = edges
        .iter()
        .map(|(e, c)| CoverElement::new(e.clone(), *c, vec![(vec![1, 0], NovikovScalar::one())], None, &d))
        .collect();
    let rejected = match naive.map(|n| hartogs_extend(&n, &p, &d, &a.cutoff)) {
        Ok(Err(GlueError::MonodromyObstruction(m))) => Ok(m),
        Ok(other) => Err(format!("chartwise ξ accepted: {}", other.is_ok())),
        Err(e) => Err(err(e)),
    };
    out.push(("chartwise ξ is rejected".into(), rejected));
    out
}

pub fn cocycle(a: &SuiteArgs) -> Checks {
    let k = a.k;
    let setup = polygon_pa(k, &a.a).map_err(err).and_then(|p| Ok((p, pa_small_cover(k, &a.a).map_err(err)?)));
    let (p, cover) = match setup {
        Ok(x) => x,
        Err(e) => return vec![("cover of P(a)".into(), Err(e))],
    };
    let d = EigenrayDiagram::b_k(k);
    let glue = (|| {
        let elements: Vec<CoverElement> = cover
            .iter()
            .map(|c| {
                let chart = local_chart(c, &d).map_err(err)?;
                global_section(GlobalFunction::X, c.clone(), chart, &d).map_err(err)
            })
            .collect::<Result<_, String>>()?;
        let g = glue_sections(&elements, &d, &a.cutoff).map_err(err)?;
        Ok(format!("x glues over {} small polygons with {} overlap certificates", cover.len(), g.certificates.len()))
    })();
    let mut out: Checks = vec![("small cover of P(a)".into(), glue)];
    let mut results: Vec<(usize, Outcome)> = (0..a.instances)
        .into_par_iter()
        .map(|id| {
            let mut rng = instance_rng(a.seed, id);
            let r = (|| {
                let q1 = random_small_polygon(&mut rng, k, &a.a).map_err(err)?;
                let q2 = random_small_polygon(&mut rng, k, &a.a).map_err(err)?;
                let rep = cocycle_check(&q1, &q2, &p, &cover, k, a.samples, &mut rng).map_err(err)?;
                let summary = format!(
                    "{} draws, {} over P, {} in both, {} degenerate",
                    rep.draws, rep.samples_in_p, rep.in_both, rep.degenerate
                );
                let first = [
                    &rep.projection_violations,
                    &rep.cocycle_violations,
                    &rep.independence_violations,
                    &rep.separation_violations,
                ]
                .into_iter()
                .flatten()
                .next();
                match first {
                    None => Ok(summary),
                    Some(v) => Err(format!("{summary}; {v}")),
                }
            })();
            (id, r)
        })
        .collect();
    results.sort_by_key(|(id, _)| *id);
    out.extend(results.into_iter().map(|(id, r)| (format!("configuration {id:03}"), r)));
    out
}

fn torsion_instance(seed: u64, id: usize) -> Outcome {
    let mut rng = instance_rng(seed, id);
    let c = random_complex(&mut rng, 6);
    let mut parts = Vec::new();
    for i in 0..=3 {
        let t = max_torsion(&c, i).map_err(err)?;
        let b = boundary_depth(&c, i).map_err(err)?;
        let minors = determinantal_exponents(&c.differential(i - 1)).map_err(err)?;
        let oracle = minors.iter().filter(|x| x.is_positive()).max().cloned().map_or(Extended::NegInf, Extended::Finite);
        ensure(torsion_matches_depth(&t, &b), || format!("degree {i}: torsion {t}, depth {b}"))?;
        ensure(oracle == t, || format!("degree {i}: torsion {t}, minors {oracle}"))?;
        parts.push(format!("{i}:{t}"));
    }
    let ranks: Vec<String> = (0..=3).map(|i| c.rank(i).to_string()).collect();
    Ok(format!("ranks {} torsion {}", ranks.join(","), parts.join(" ")))
}

pub fn torsion(a: &SuiteArgs) -> Checks {
    let mut results: Vec<(usize, Outcome)> =
        (0..a.instances).into_par_iter().map(|id| (id, torsion_instance(a.seed, id))).collect();
    results.sort_by_key(|(id, _)| *id);
    results.into_iter().map(|(id, r)| (format!("complex {id:03}"), r)).collect()
}

fn all_sets(n: usize) -> Vec<IndexSet> {
    (0..1u32 << n).map(|m| (1..=n).filter(|i| m & (1 << (i - 1)) != 0).collect()).collect()
}

pub fn bv(a: &SuiteArgs) -> Checks {
    let mut out = Checks::new();
    for n in [2usize, 3] {
        let r = (|| {
            let p = RationalPolygon::bbox(&vec![q(-1); n], &vec![q(1); n]).map_err(err)?;
            let mut alphas = vec![vec![]];
            for _ in 0..n {
                alphas = alphas.into_iter().flat_map(|x: Vec<i64>| (-3..=3).map(move |c| [x.clone(), vec![c]].concat())).collect();
            }
            let mut count = 0;
            for alpha in &alphas {
                let zm: Vec<i64> = alpha.iter().map(|x| -x).collect();
                for j in all_sets(n) {
                    let w = PolyVector::z_alpha(p.clone(), alpha, j.clone()).map_err(err)?;
                    let mut want = PolyVector::zero(n);
                    for (c, rest) in interior_product(alpha, &j) {
                        want.add_term(rest, LatticeSeries::monomial(p.clone(), zm.clone(), NovikovScalar::constant(q(c))))
                            .map_err(err)?;
                    }
                    ensure(bv_delta(&w).map_err(err)? == want, || format!("α={alpha:?} J={j:?}"))?;
                    count += 1;
                }
            }
            Ok(format!("{count} pairs (α, J) with α in [-3,3]^{n}"))
        })();
        out.push((format!("Δ(z^α ∂_J) = z^α ι_α ∂_J, n = {n}"), r));
    }
    let mut rng = instance_rng(a.seed, 0);
    let squares = (|| {
        for i in 0..a.instances {
            let n = 2 + i % 2;
            let p = RationalPolygon::bbox(&vec![q(-1); n], &vec![q(1); n]).map_err(err)?;
            let sets = all_sets(n);
            let mut w = PolyVector::zero(n);
            for _ in 0..rng.gen_range(1..=3) {
                let m: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
                let c = NovikovScalar::monomial(q(rng.gen_range(-5..=5)), qf(rng.gen_range(0..=8), 4));
                let j = sets[rng.gen_range(0..sets.len())].clone();
                w.add_term(j, LatticeSeries::monomial(p.clone(), m, c)).map_err(err)?;
            }
            let dd = bv_delta(&bv_delta(&w).map_err(err)?).map_err(err)?;
            ensure(dd.is_zero(), || format!("instance {i}"))?;
        }
        Ok(format!("{} random polyvectors", a.instances))
    })();
    out.push(("Δ² = 0".into(), squares));
    out
}

pub fn tropdiag(a: &SuiteArgs) -> Checks {
    let k = a.k;
    let mut rng = instance_rng(a.seed, 0);
    let mut out = Checks::new();
    for side in [ChartSide::Plus, ChartSide::Minus] {
        let r = (|| {
            let (mut good, mut degenerate, mut draws) = (0, 0, 0);
            let mut mismatch = None;
            let mut relation = None;
            while good < a.samples {
                draws += 1;
                let (v, u) = (sample_valuation(&mut rng), sample_valuation(&mut rng));
                let xi = generic_scalar(&mut rng, &v);
                let eta = generic_scalar(&mut rng, &u);
                if is_degenerate_eta(&eta) {
                    degenerate += 1;
                    continue;
                }
                good += 1;
                let pt = ChartPoint { side, xi, eta };
                let amb = g_chart(&pt, k, &working_precision(k, &v, &u)).map_err(err)?;
                if mismatch.is_none() && pk_of_point(&amb).map_err(err)? != f_base(side, k, &v, &u) {
                    mismatch = Some(format!("(v, u) = ({v}, {u})"));
                }
                if relation.is_none() && !relation_holds(&amb, k) {
                    relation = Some(format!("xy ≠ (u+1)^{k} at (v, u) = ({v}, {u})"));
                }
            }
            let summary = format!("{good} samples, {degenerate} degenerate of {draws} draws");
            match mismatch.or(relation) {
                None => Ok(summary),
                Some(m) => Err(format!("{summary}; {m}")),
            }
        })();
        out.push((format!("pk ∘ g{side} = f{side} and xy = (u+1)^{k}"), r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xi_eta_form() {
        let p = rect([0, 0], [1, 1]);
        let f = LatticeSeries::new(
            p,
            vec![(vec![1, 0], NovikovScalar::one()), (vec![1, 1], NovikovScalar::one()), (vec![0, 2], NovikovScalar::constant(q(-3)))],
            None,
        );
        assert_eq!(xi_eta(&f), "-3η^2 + ξ + ξη");
    }

    #[test]
    fn binomial_rows() {
        assert_eq!(binomials(4), vec![q(1), q(4), q(6), q(4), q(1)]);
    }
}
