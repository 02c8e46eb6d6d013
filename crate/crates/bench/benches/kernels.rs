use std::hint::black_box;

use clustermirror::rational::{q, qf};
use clustermirror::{
    bv_delta, diagonalize_valuation, LatticeSeries, NovMatrix, NovikovScalar, PolyVector, RationalPolygon, Wall,
    WallSide,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn unit_inverse(c: &mut Criterion) {
    // 1 + T^(1/3) - 2T^(1/2) + T^2/5
    let s = NovikovScalar::from_terms(
        vec![(q(0), q(1)), (qf(1, 3), q(1)), (qf(1, 2), q(-2)), (q(2), qf(1, 5))],
        None,
    );
    for cutoff in [4, 8] {
        c.bench_function(&format!("novikov unit_inverse cutoff {cutoff}"), |b| {
            b.iter(|| black_box(&s).unit_inverse(&q(cutoff)).unwrap())
        });
    }
}

fn wall_crossing(c: &mut Criterion) {
    let p = RationalPolygon::bbox(&[q(-1), q(1)], &[q(1), q(2)]).unwrap();
    let f = LatticeSeries::new(
        p.clone(),
        vec![
            (vec![1, 0], NovikovScalar::one()),
            (vec![-1, 0], NovikovScalar::constant(q(3))),
            (vec![2, -1], NovikovScalar::monomial(q(-2), qf(1, 2))),
        ],
        None,
    );
    for k in [1, 3] {
        let wall = Wall::b_k(k);
        c.bench_function(&format!("wall crossing k={k} cutoff 8"), |b| {
            b.iter(|| wall.cross(WallSide::Upper, black_box(&f), &q(8)).unwrap())
        });
    }
}

fn diagonalization(c: &mut Criterion) {
    let n = 6;
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let e = qf(((3 * i + 5 * j) % 7) as i64, 2);
                    let c = q(((i * j + 1) % 5) as i64 - 2);
                    if c == q(0) { NovikovScalar::zero() } else { NovikovScalar::monomial(c, e) }
                })
                .collect()
        })
        .collect();
    let m = NovMatrix::from_rows(rows);
    c.bench_function("diagonalize_valuation 6x6", |b| b.iter(|| diagonalize_valuation(black_box(&m)).unwrap()));
}

fn bv(c: &mut Criterion) {
    let p = RationalPolygon::bbox(&[q(-1), q(-1), q(-1)], &[q(1), q(1), q(1)]).unwrap();
    let mut w = PolyVector::z_alpha(p.clone(), &[1, -2, 3], vec![1, 2, 3]).unwrap();
    w = w.add(&PolyVector::z_alpha(p.clone(), &[0, 1, -1], vec![2, 3]).unwrap()).unwrap();
    w = w.add(&PolyVector::z_alpha(p, &[2, 2, 0], vec![1]).unwrap()).unwrap();
    c.bench_function("bv_delta n=3", |b| b.iter(|| bv_delta(black_box(&w)).unwrap()));
}

fn valuation(c: &mut Criterion) {
    let p = RationalPolygon::bbox(&[q(0), q(0)], &[q(3), q(2)]).unwrap();
    let terms: Vec<_> = (-3..=3)
        .flat_map(|a| (-3..=3).map(move |b| (vec![a, b], NovikovScalar::monomial(q(1), qf(a * a + b * b, 3)))))
        .collect();
    let f = LatticeSeries::new(p.clone(), terms, None);
    let probe = RationalPolygon::bbox(&[qf(1, 2), qf(1, 3)], &[q(2), q(1)]).unwrap();
    c.bench_function("val_on_polygon 49 terms", |b| b.iter(|| black_box(&f).val_on_polygon(&probe).unwrap()));
}

criterion_group!(kernels, unit_inverse, wall_crossing, diagonalization, bv, valuation);
criterion_main!(kernels);
