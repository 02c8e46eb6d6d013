//! Polyvector fields and differential forms with lattice-series coefficients,
//! contraction with the logarithmic volume form and the BV operator.
//!
//! `∂_i` is the logarithmic derivation `y_i ∂/∂y_i`, and forms are stored in
//! the `dy_J` basis. A polyvector `z^α ⊗ β` is `x^{-α} β`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::laurent::{Exponent, LatticeSeries, LaurentError};
use crate::novikov::NovikovScalar;
use crate::polygon::RationalPolygon;
use crate::rational::q;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BvError {
    #[error("index set {0:?} is not strictly increasing inside 1..={1}")]
    BadIndexSet(Vec<usize>, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
}

/// Strictly increasing subset of `1..=n`.
pub type IndexSet = Vec<usize>;

fn check_set(j: &[usize], n: usize) -> Result<(), BvError> {
    let ok = j.iter().all(|&i| (1..=n).contains(&i)) && j.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(BvError::BadIndexSet(j.to_vec(), n))
    }
}

fn complement(j: &[usize], n: usize) -> IndexSet {
    (1..=n).filter(|i| !j.contains(i)).collect()
}

/// `s(J) = Σ (j_l − l)`: the number of transpositions that bring `J` to the front.
pub fn shuffle_sign(j: &[usize]) -> i64 {
    let s: usize = j.iter().enumerate().map(|(l, &jl)| jl - (l + 1)).sum();
    if s.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn add_into(map: &mut BTreeMap<IndexSet, LatticeSeries>, j: IndexSet, f: LatticeSeries) -> Result<(), BvError> {
    match map.remove(&j) {
        Some(g) => {
            let s = g.add(&f)?;
            if !s.is_exact_zero() || s.tail().is_some() {
                map.insert(j, s);
            }
        }
        None => {
            if !f.is_exact_zero() || f.tail().is_some() {
                map.insert(j, f);
            }
        }
    }
    Ok(())
}

fn scale_int(f: &LatticeSeries, c: i64) -> LatticeSeries {
    f.scale(&NovikovScalar::constant(q(c)))
}

fn shift_exponents(f: &LatticeSeries, delta: &[i64]) -> LatticeSeries {
    f.relabel(f.reference().clone(), f.tail().cloned(), |j| {
        (j.iter().zip(delta).map(|(a, b)| a + b).collect(), q(0))
    })
}

fn map_terms(f: &LatticeSeries, g: impl Fn(&Exponent, &NovikovScalar) -> Option<(Exponent, NovikovScalar)>) -> LatticeSeries {
    let terms: Vec<_> = f.terms().iter().filter_map(|(j, a)| g(j, a)).collect();
    LatticeSeries::new(f.reference().clone(), terms, f.tail().cloned())
}

macro_rules! graded {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq, Eq)]
        pub struct $name {
            pub n: usize,
            pub components: BTreeMap<IndexSet, LatticeSeries>,
        }

        impl $name {
            pub fn zero(n: usize) -> Self {
                Self { n, components: BTreeMap::new() }
            }

            pub fn term(n: usize, j: IndexSet, f: LatticeSeries) -> Result<Self, BvError> {
                let mut out = Self::zero(n);
                out.add_term(j, f)?;
                Ok(out)
            }

            pub fn add_term(&mut self, j: IndexSet, f: LatticeSeries) -> Result<(), BvError> {
                check_set(&j, self.n)?;
                if f.dim() != self.n {
                    return Err(BvError::Dimension(f.dim(), self.n));
                }
                add_into(&mut self.components, j, f)
            }

            pub fn add(&self, other: &Self) -> Result<Self, BvError> {
                if self.n != other.n {
                    return Err(BvError::Dimension(self.n, other.n));
                }
                let mut out = self.clone();
                for (j, f) in &other.components {
                    add_into(&mut out.components, j.clone(), f.clone())?;
                }
                Ok(out)
            }

            pub fn is_zero(&self) -> bool {
                self.components.is_empty()
            }
        }
    };
}

graded!(PolyVector);
graded!(DiffForm);

impl PolyVector {
    /// `z^α ⊗ ∂_J`.
    pub fn z_alpha(reference: RationalPolygon, alpha: &[i64], j: IndexSet) -> Result<Self, BvError> {
        let n = alpha.len();
        let m: Exponent = alpha.iter().map(|a| -a).collect();
        Self::term(n, j, LatticeSeries::x(reference, &m))
    }
}

/// `ι_α ∂_J = Σ_t (−1)^t α_{j_t} ∂_{J∖j_t}` as `(coefficient, index set)` pairs.
pub fn interior_product(alpha: &[i64], j: &[usize]) -> Vec<(i64, IndexSet)> {
    let mut out = Vec::new();
    for (t, &jt) in j.iter().enumerate() {
        let a = alpha[jt - 1];
        if a != 0 {
            let sign = if t % 2 == 0 { 1 } else { -1 };
            out.push((sign * a, j.iter().copied().filter(|&x| x != jt).collect()));
        }
    }
    out
}

/// `ι_{Ω₀}` with `Ω₀ = dy₁/y₁ ∧ … ∧ dyₙ/yₙ`.
pub fn contract_volume(w: &PolyVector) -> Result<DiffForm, BvError> {
    let n = w.n;
    let mut out = DiffForm::zero(n);
    for (j, f) in &w.components {
        let k = complement(j, n);
        let mut delta = vec![0; n];
        for &i in &k {
            delta[i - 1] = -1;
        }
        out.add_term(k, scale_int(&shift_exponents(f, &delta), shuffle_sign(j)))?;
    }
    Ok(out)
}

/// Inverse of [`contract_volume`].
pub fn uncontract_volume(form: &DiffForm) -> Result<PolyVector, BvError> {
    let n = form.n;
    let mut out = PolyVector::zero(n);
    for (k, g) in &form.components {
        let j = complement(k, n);
        let mut delta = vec![0; n];
        for &i in k {
            delta[i - 1] = 1;
        }
        out.add_term(j.clone(), scale_int(&shift_exponents(g, &delta), shuffle_sign(&j)))?;
    }
    Ok(out)
}

/// Exterior derivative in the `dy_J` basis.
pub fn exterior_d(form: &DiffForm) -> Result<DiffForm, BvError> {
    let n = form.n;
    let mut out = DiffForm::zero(n);
    for (k, g) in &form.components {
        for i in 1..=n {
            if k.contains(&i) {
                continue;
            }
            let before = k.iter().filter(|&&x| x < i).count();
            let sign = if before % 2 == 0 { 1 } else { -1 };
            let dg = map_terms(g, |j, a| {
                (j[i - 1] != 0).then(|| {
                    let mut m = j.clone();
                    m[i - 1] -= 1;
                    (m, a.scale(&q(sign * j[i - 1])))
                })
            });
            let mut nk = k.clone();
            nk.insert(before, i);
            out.add_term(nk, dg)?;
        }
    }
    Ok(out)
}

/// `Δ ω = (−1)^{|ω|} ι_{Ω₀} d ι_{Ω₀}^{-1} ω`, with contraction read as the
/// identification of polyvectors and forms.
pub fn bv_delta(w: &PolyVector) -> Result<PolyVector, BvError> {
    let mut out = PolyVector::zero(w.n);
    for (j, f) in &w.components {
        let single = PolyVector::term(w.n, j.clone(), f.clone())?;
        let image = uncontract_volume(&exterior_d(&contract_volume(&single)?)?)?;
        let sign = if j.len() % 2 == 0 { 1 } else { -1 };
        for (jj, g) in image.components {
            out.add_term(jj, scale_int(&g, sign))?;
        }
    }
    Ok(out)
}
