use clustermirror::bv::IndexSet;
use clustermirror::filtered::determinantal_exponents;
use clustermirror::glued_mirror::compare_series;
use clustermirror::laurent::Exponent;
use clustermirror::local_mirror::wall_cross_inverse;
use clustermirror::rational::{q, qf};
use clustermirror::{
    bv_delta, diagonalize_valuation, Halfspace, LatticeSeries, NovMatrix, NovikovScalar, Point, PolyVector,
    RationalPolygon, Valuation, Wall, WallSide, Q,
};
use proptest::prelude::*;

fn scalar() -> impl Strategy<Value = NovikovScalar> {
    prop::collection::vec((0i64..24, -3i64..=3), 0..4)
        .prop_map(|ts| NovikovScalar::from_terms(ts.into_iter().map(|(e, c)| (qf(e, 6), q(c))).collect(), None))
}

fn unit() -> impl Strategy<Value = NovikovScalar> {
    (1i64..=3, prop::bool::ANY, scalar()).prop_map(|(c, neg, rest)| {
        let lead = NovikovScalar::constant(q(if neg { -c } else { c }));
        // Push the rest strictly above exponent 0.
        lead.add(&rest.mul(&NovikovScalar::monomial(q(1), qf(1, 6))))
    })
}

fn exact(v: &Valuation) -> Option<Q> {
    match v {
        Valuation::Exact(x) => Some(x.clone()),
        Valuation::Infinite => None,
        Valuation::AtLeast(_) => panic!("unexpected truncated valuation"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn novikov_ring_laws(a in scalar(), b in scalar(), c in scalar()) {
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert!(a.sub(&a).is_zero_to_precision());
    }

    #[test]
    fn novikov_valuation_is_additive(a in scalar(), b in scalar()) {
        let sum = match (exact(&a.val()), exact(&b.val())) {
            (Some(x), Some(y)) => Some(x + y),
            _ => None,
        };
        prop_assert_eq!(exact(&a.mul(&b).val()), sum);
    }

    #[test]
    fn unit_inverse_inverts(u in unit(), cutoff in 1i64..=12) {
        let level = qf(cutoff, 3);
        let inv = u.unit_inverse(&level).unwrap();
        prop_assert!(u.mul(&inv).agrees_below(&NovikovScalar::one(), &level));
    }
}

/// Vertices by brute force: feasible intersections of pairs of boundary lines.
fn oracle_vertices(hs: &[Halfspace]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for (i, a) in hs.iter().enumerate() {
        for b in &hs[i + 1..] {
            let (a1, a2, b1, b2) = (q(a.normal[0]), q(a.normal[1]), q(b.normal[0]), q(b.normal[1]));
            let det = &a1 * &b2 - &a2 * &b1;
            if det == q(0) {
                continue;
            }
            let x = (&a.bound * &b2 - &a2 * &b.bound) / &det;
            let y = (&a1 * &b.bound - &a.bound * &b1) / &det;
            let p = vec![x, y];
            let feasible = hs.iter().all(|h| q(h.normal[0]) * &p[0] + q(h.normal[1]) * &p[1] >= h.bound);
            if feasible && !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

/// Bounded random polygons around the origin: a box plus cuts with negative bounds.
fn halfspaces() -> impl Strategy<Value = Vec<Halfspace>> {
    prop::collection::vec(((-3i64..=3, -3i64..=3), 1i64..=6), 0..5).prop_map(|cuts| {
        let mut hs: Vec<Halfspace> = [[1, 0], [-1, 0], [0, 1], [0, -1]]
            .into_iter()
            .map(|n| Halfspace::new(n.to_vec(), q(-3)).unwrap())
            .collect();
        for ((a, b), s) in cuts {
            if (a, b) != (0, 0) {
                hs.push(Halfspace::new(vec![a, b], qf(-s, 2)).unwrap());
            }
        }
        hs
    })
}

fn series(reference: &RationalPolygon) -> impl Strategy<Value = LatticeSeries> {
    let reference = reference.clone();
    prop::collection::vec(((-2i64..=2, -2i64..=2), -6i64..=6, 1i64..=3), 1..6).prop_map(move |ts| {
        let terms: Vec<(Exponent, NovikovScalar)> =
            ts.into_iter().map(|((a, b), e, c)| (vec![a, b], NovikovScalar::monomial(q(c), qf(e, 2)))).collect();
        LatticeSeries::new(reference.clone(), terms, None)
    })
}

fn big_box() -> RationalPolygon {
    RationalPolygon::bbox(&[q(-3), q(-3)], &[q(3), q(3)]).unwrap()
}

/// `min_j (val a_j + j·w)` over the vertices, the oracle for the polygon valuation.
fn hull_val(f: &LatticeSeries, verts: &[Point]) -> Option<Q> {
    f.terms()
        .iter()
        .flat_map(|(j, c)| {
            let base = exact(&c.val());
            verts.iter().filter_map(move |w| Some(base.clone()? + q(j[0]) * &w[0] + q(j[1]) * &w[1]))
        })
        .min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clipping_matches_brute_force(hs in halfspaces()) {
        let p = RationalPolygon::from_halfspaces(2, &hs).unwrap().expect("origin is inside");
        let mut got = p.vertices().to_vec();
        got.sort();
        let want = oracle_vertices(&hs);
        prop_assert_eq!(&got, &want);
        for alpha in [[1i64, 0], [0, 1], [2, -3]] {
            let vals: Vec<Q> = want.iter().map(|w| q(alpha[0]) * &w[0] + q(alpha[1]) * &w[1]).collect();
            let range = (vals.iter().min().unwrap().clone(), vals.iter().max().unwrap().clone());
            prop_assert_eq!(p.linear_range(&alpha), range);
        }
    }

    #[test]
    fn hull_of_own_vertices_is_the_polygon(hs in halfspaces()) {
        let p = RationalPolygon::from_halfspaces(2, &hs).unwrap().unwrap();
        let hull = RationalPolygon::convex_hull(p.vertices()).unwrap();
        prop_assert!(hull.is_subset_of(&p) && p.is_subset_of(&hull));
    }

    #[test]
    fn polygon_valuation_is_attained_at_vertices(
        hs in halfspaces(),
        (f, g) in series(&big_box()).prop_flat_map(|f| (Just(f), series(&big_box()))),
    ) {
        let p = RationalPolygon::from_halfspaces(2, &hs).unwrap().unwrap();
        let verts = oracle_vertices(&hs);
        let vf = exact(&f.val_on_polygon(&p).unwrap());
        prop_assert_eq!(&vf, &hull_val(&f, &verts));
        prop_assert_eq!(&exact(&f.restrict(&p).unwrap().val()), &vf);

        let vg = exact(&g.val_on_polygon(&p).unwrap());
        let (lo_sum, lo_prod) = match (&vf, &vg) {
            (Some(x), Some(y)) => (Some(x.clone().min(y.clone())), Some(x + y)),
            _ => (None, None),
        };
        let sum = exact(&f.add(&g).unwrap().val_on_polygon(&p).unwrap());
        let prod = exact(&f.mul(&g).unwrap().val_on_polygon(&p).unwrap());
        // None means +infinity on the left and is only allowed when the sum cancels.
        if let (Some(s), Some(lo)) = (&sum, &lo_sum) {
            prop_assert!(s >= lo);
        }
        if let (Some(m), Some(lo)) = (&prod, &lo_prod) {
            prop_assert!(m >= lo);
        }
    }
}

fn index_sets(n: usize) -> Vec<IndexSet> {
    (0u32..1 << n).map(|mask| (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect()).collect()
}

fn polyvector(n: usize) -> impl Strategy<Value = PolyVector> {
    let sets = index_sets(n);
    prop::collection::vec((prop::collection::vec(-2i64..=2, n), 0..sets.len()), 1..5).prop_map(move |ts| {
        let reference = RationalPolygon::bbox(&vec![q(-1); n], &vec![q(1); n]).unwrap();
        let mut w = PolyVector::zero(n);
        for (alpha, s) in ts {
            w = w.add(&PolyVector::z_alpha(reference.clone(), &alpha, sets[s].clone()).unwrap()).unwrap();
        }
        w
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bv_operator_squares_to_zero(w in (2usize..=3).prop_flat_map(polyvector)) {
        prop_assert!(bv_delta(&bv_delta(&w).unwrap()).unwrap().is_zero());
    }

    #[test]
    fn bv_operator_is_additive(
        (v, w) in (2usize..=3).prop_flat_map(|n| (polyvector(n), polyvector(n))),
    ) {
        let lhs = bv_delta(&v.add(&w).unwrap()).unwrap();
        let rhs = bv_delta(&v).unwrap().add(&bv_delta(&w).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}

fn monomial_or_zero() -> impl Strategy<Value = NovikovScalar> {
    prop_oneof![
        1 => Just(NovikovScalar::zero()),
        4 => (-3i64..=3, 0i64..=8).prop_map(|(c, e)| {
            if c == 0 { NovikovScalar::zero() } else { NovikovScalar::monomial(q(c), qf(e, 2)) }
        }),
    ]
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = NovMatrix> {
    prop::collection::vec(prop::collection::vec(monomial_or_zero(), cols), rows).prop_map(NovMatrix::from_rows)
}

/// A product of elementary matrices `1 + c T^e E_ij` with `e >= 0`, invertible over the valuation ring.
fn unimodular(n: usize) -> impl Strategy<Value = NovMatrix> {
    prop::collection::vec((0..n, 0..n, -2i64..=2, 0i64..=4), 0..6).prop_map(move |ops| {
        let mut m = NovMatrix::identity(n);
        for (i, j, c, e) in ops {
            if i == j || c == 0 {
                continue;
            }
            let mut step = NovMatrix::identity(n);
            step.entries[i][j] = NovikovScalar::monomial(q(c), qf(e, 2));
            m = step.mul(&m);
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn diagonal_exponents_survive_base_change(
        (m, u, v) in (1usize..=3, 1usize..=3).prop_flat_map(|(r, c)| (matrix(r, c), unimodular(r), unimodular(c))),
    ) {
        let base = diagonalize_valuation(&m).unwrap().exponents;
        prop_assert_eq!(&base, &determinantal_exponents(&m).unwrap());
        let moved = diagonalize_valuation(&u.mul(&m).mul(&v)).unwrap().exponents;
        prop_assert_eq!(moved, base);
    }
}

fn upper_series() -> impl Strategy<Value = LatticeSeries> {
    let reference = RationalPolygon::bbox(&[q(-1), q(1)], &[q(1), q(2)]).unwrap();
    prop::collection::vec(((-2i64..=2, -1i64..=2), -3i64..=3, 0i64..=4), 1..4).prop_map(move |ts| {
        let terms: Vec<(Exponent, NovikovScalar)> = ts
            .into_iter()
            .filter(|(_, c, _)| *c != 0)
            .map(|((a, b), c, e)| (vec![a, b], NovikovScalar::monomial(q(c), qf(e, 2))))
            .collect();
        LatticeSeries::new(reference.clone(), terms, None)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wall_crossing_round_trip(f in upper_series(), k in 1u32..=3) {
        let cutoff = q(6);
        let there = Wall::b_k(i64::from(k)).cross(WallSide::Upper, &f, &cutoff).unwrap();
        let back = wall_cross_inverse(k, WallSide::Upper, &there, &cutoff).unwrap();
        prop_assert!(compare_series(&back, &f, &cutoff).is_ok());
    }
}
