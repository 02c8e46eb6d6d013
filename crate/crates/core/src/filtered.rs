//! Finite free cochain complexes over the Novikov ring: Smith-type
//! diagonalization, maximal torsion and boundary depth.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::novikov::{NovikovScalar, Valuation};
use crate::rational::{fmt_q, q, qf, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexError {
    #[error("insufficient precision to decide the valuation of an entry")]
    InsufficientPrecision,
    #[error("entry ({0}, {1}) has negative valuation")]
    NegativeValuation(usize, usize),
    #[error("differential in degree {0} has shape {1}x{2}, expected {3}x{4}")]
    Shape(i64, usize, usize, usize, usize),
    #[error("d∘d ≠ 0 in degree {0}")]
    NotAComplex(i64),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NovMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<NovikovScalar>>,
}

impl NovMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![vec![NovikovScalar::zero(); cols]; rows] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i][i] = NovikovScalar::one();
        }
        m
    }

    pub fn from_rows(entries: Vec<Vec<NovikovScalar>>) -> Self {
        let rows = entries.len();
        let cols = entries.first().map_or(0, Vec::len);
        Self { rows, cols, entries }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = NovikovScalar::zero();
                for k in 0..self.cols {
                    acc = acc.add(&self.entries[i][k].mul(&other.entries[k][j]));
                }
                out.entries[i][j] = acc;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(NovikovScalar::is_zero_to_precision)
    }

    /// `T^{s_row − s_col}` rescaling by generator filtration shifts.
    pub fn rescaled(&self, row_shift: &[Q], col_shift: &[Q]) -> Self {
        let mut out = self.clone();
        for (i, row) in out.entries.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = e.shift(&(&row_shift[i] - &col_shift[j]));
            }
        }
        out
    }
}

/// An elementary operation of the diagonalization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ElementaryOp {
    SwapRows(usize, usize),
    SwapCols(usize, usize),
    /// `row_target ← unit·row_target − factor·row_pivot`.
    RowCombine { target: usize, pivot: usize, unit: NovikovScalar, factor: NovikovScalar },
    /// `col_target ← unit·col_target − factor·col_pivot`.
    ColCombine { target: usize, pivot: usize, unit: NovikovScalar, factor: NovikovScalar },
}

impl ElementaryOp {
    pub fn apply(&self, m: &mut NovMatrix) {
        match self {
            ElementaryOp::SwapRows(a, b) => m.entries.swap(*a, *b),
            ElementaryOp::SwapCols(a, b) => {
                for row in &mut m.entries {
                    row.swap(*a, *b);
                }
            }
            ElementaryOp::RowCombine { target, pivot, unit, factor } => {
                for j in 0..m.cols {
                    let v = unit.mul(&m.entries[*target][j]).sub(&factor.mul(&m.entries[*pivot][j]));
                    m.entries[*target][j] = v;
                }
            }
            ElementaryOp::ColCombine { target, pivot, unit, factor } => {
                for row in &mut m.entries {
                    let v = unit.mul(&row[*target]).sub(&factor.mul(&row[*pivot]));
                    row[*target] = v;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagonalization {
    /// Valuations of the nonzero diagonal entries, in pivot order (ascending).
    pub exponents: Vec<Q>,
    /// The matrix was multiplied by `T^{-shift}` so that all entries have valuation at least 0.
    pub shift: Q,
    /// Working precision of the rescaled matrix; exponents below it are exact.
    pub precision: Q,
    pub ops: Vec<ElementaryOp>,
    pub diagonal: NovMatrix,
}

impl Diagonalization {
    pub fn rank(&self) -> usize {
        self.exponents.len()
    }

    /// Replays the certificate on `m` (rescaled and reduced to the working
    /// precision) and checks that it reproduces the diagonal form.
    pub fn replay(&self, m: &NovMatrix) -> bool {
        let mut cur = reduced(m, &self.shift, &self.precision);
        for op in &self.ops {
            op.apply(&mut cur);
        }
        cur == self.diagonal
    }
}

fn reduced(m: &NovMatrix, shift: &Q, precision: &Q) -> NovMatrix {
    let mut out = m.clone();
    for e in out.entries.iter_mut().flatten() {
        *e = e.shift(&-shift.clone()).truncate(precision);
    }
    out
}

/// Exact rank by fraction-free (Bareiss) elimination with full pivoting,
/// together with the last pivot, which is a nonzero minor of that size.
pub fn exact_rank(m: &NovMatrix) -> Result<(usize, NovikovScalar), ComplexError> {
    if m.entries.iter().flatten().any(|e| !e.is_exact()) {
        return Err(ComplexError::InsufficientPrecision);
    }
    let mut a = m.entries.clone();
    let mut prev = NovikovScalar::one();
    let n = m.rows.min(m.cols);
    for k in 0..n {
        let Some((pi, pj)) = (k..m.rows)
            .flat_map(|i| (k..m.cols).map(move |j| (i, j)))
            .find(|&(i, j)| !a[i][j].is_exact_zero())
        else {
            return Ok((k, prev));
        };
        a.swap(k, pi);
        for row in &mut a {
            row.swap(k, pj);
        }
        for i in k + 1..m.rows {
            for j in k + 1..m.cols {
                let num = a[k][k].mul(&a[i][j]).sub(&a[i][k].mul(&a[k][j]));
                a[i][j] = num.div_exact(&prev).expect("Bareiss quotients are exact");
            }
            a[i][k] = NovikovScalar::zero();
        }
        prev = a[k][k].clone();
    }
    Ok((n, prev))
}

/// Brings `m` to `diag(T^{a_1} u_1, …, T^{a_r} u_r, 0, …)` with invertible
/// row and column operations over the valuation ring, pivoting on entries of
/// minimal valuation. The rank and a nonzero `r×r` minor come from
/// [`exact_rank`]; that minor bounds every `a_i`, so the elimination runs
/// modulo a power of `T` without losing information.
pub fn diagonalize_valuation(m: &NovMatrix) -> Result<Diagonalization, ComplexError> {
    let (rank, minor) = exact_rank(m)?;
    if rank == 0 {
        return Ok(Diagonalization {
            exponents: Vec::new(),
            shift: Q::zero(),
            precision: Q::zero(),
            ops: Vec::new(),
            diagonal: reduced(m, &Q::zero(), &Q::zero()),
        });
    }
    let shift = m.entries.iter().flatten().filter_map(|e| e.val().exact().cloned()).min().expect("nonzero matrix");
    let minor_val = minor.val().exact().cloned().expect("nonzero minor");
    let precision = minor_val - q(rank as i64) * &shift + q(1);
    let mut cur = reduced(m, &shift, &precision);
    let mut ops = Vec::new();
    let mut exponents = Vec::new();
    for r in 0..rank {
        let mut best: Option<(usize, usize, Q)> = None;
        for i in r..m.rows {
            for j in r..m.cols {
                if let Valuation::Exact(v) = cur.entries[i][j].val() {
                    if best.as_ref().is_none_or(|b| v < b.2) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        let (pi, pj, v) = best.ok_or(ComplexError::InsufficientPrecision)?;
        for op in [ElementaryOp::SwapRows(r, pi), ElementaryOp::SwapCols(r, pj)] {
            op.apply(&mut cur);
            ops.push(op);
        }
        let unit = cur.entries[r][r].shift(&-v.clone());
        for i in r + 1..m.rows {
            if cur.entries[i][r].is_zero_to_precision() {
                continue;
            }
            let factor = cur.entries[i][r].shift(&-v.clone());
            let op = ElementaryOp::RowCombine { target: i, pivot: r, unit: unit.clone(), factor };
            op.apply(&mut cur);
            ops.push(op);
        }
        for j in r + 1..m.cols {
            if cur.entries[r][j].is_zero_to_precision() {
                continue;
            }
            let factor = cur.entries[r][j].shift(&-v.clone());
            let op = ElementaryOp::ColCombine { target: j, pivot: r, unit: unit.clone(), factor };
            op.apply(&mut cur);
            ops.push(op);
        }
        exponents.push(v + &shift);
    }
    Ok(Diagonalization { exponents, shift, precision, ops, diagonal: cur })
}

/// Minor on `rows × cols` (bitmasks of equal popcount), by expansion along
/// the first row with memoized sub-minors.
fn minor(m: &NovMatrix, rows: u32, cols: u32, memo: &mut HashMap<(u32, u32), NovikovScalar>) -> NovikovScalar {
    if rows == 0 {
        return NovikovScalar::one();
    }
    if let Some(v) = memo.get(&(rows, cols)) {
        return v.clone();
    }
    let r = rows.trailing_zeros() as usize;
    let mut acc = NovikovScalar::zero();
    let mut sign = true;
    for c in 0..m.cols {
        if cols & (1 << c) == 0 {
            continue;
        }
        let a = &m.entries[r][c];
        if !a.is_exact_zero() {
            let t = a.mul(&minor(m, rows & !(1 << r), cols & !(1 << c), memo));
            acc = if sign { acc.add(&t) } else { acc.sub(&t) };
        }
        sign = !sign;
    }
    memo.insert((rows, cols), acc.clone());
    acc
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Invariant exponents from determinantal divisors: `δ_r` is the minimal
/// valuation of an `r×r` minor and `a_r = δ_r − δ_{r−1}`. Independent of the
/// elimination in [`diagonalize_valuation`].
pub fn determinantal_exponents(m: &NovMatrix) -> Result<Vec<Q>, ComplexError> {
    let mut out = Vec::new();
    let mut prev = Q::zero();
    let mut memo = HashMap::new();
    for r in 1..=m.rows.min(m.cols) {
        let mut best: Option<Q> = None;
        for rs in subsets(m.rows, r) {
            for cs in subsets(m.cols, r) {
                let rm = rs.iter().fold(0u32, |acc, i| acc | 1 << i);
                let cm = cs.iter().fold(0u32, |acc, j| acc | 1 << j);
                match minor(m, rm, cm, &mut memo).val() {
                    Valuation::Exact(v) => {
                        if best.as_ref().is_none_or(|b| &v < b) {
                            best = Some(v);
                        }
                    }
                    Valuation::AtLeast(_) => return Err(ComplexError::InsufficientPrecision),
                    Valuation::Infinite => {}
                }
            }
        }
        let Some(d) = best else { break };
        out.push(&d - &prev);
        prev = d;
    }
    Ok(out)
}

/// `−∞` or a rational.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Extended {
    NegInf,
    Finite(#[serde(with = "crate::rational::serde_q")] Q),
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInf => write!(f, "-inf"),
            Extended::Finite(x) => write!(f, "{}", fmt_q(x)),
        }
    }
}

/// A cochain complex `d^i : C^i → C^{i+1}` of free modules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilteredComplex {
    pub ranks: BTreeMap<i64, usize>,
    pub differentials: BTreeMap<i64, NovMatrix>,
    pub shifts: BTreeMap<i64, Vec<Q>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexJson {
    pub ranks: BTreeMap<i64, usize>,
    pub differentials: BTreeMap<i64, Vec<Vec<String>>>,
    #[serde(default)]
    pub shifts: BTreeMap<i64, Vec<String>>,
}

impl FilteredComplex {
    pub fn new(ranks: BTreeMap<i64, usize>, differentials: BTreeMap<i64, NovMatrix>) -> Result<Self, ComplexError> {
        let c = Self { ranks, differentials, shifts: BTreeMap::new() };
        c.validate()?;
        Ok(c)
    }

    pub fn rank(&self, i: i64) -> usize {
        self.ranks.get(&i).copied().unwrap_or(0)
    }

    fn shift_of(&self, i: i64) -> Vec<Q> {
        self.shifts.get(&i).cloned().unwrap_or_else(|| vec![Q::zero(); self.rank(i)])
    }

    /// `d^i` with generator shifts applied, as a map of filtered modules.
    pub fn differential(&self, i: i64) -> NovMatrix {
        let m = self.differentials.get(&i).cloned().unwrap_or_else(|| NovMatrix::zeros(self.rank(i + 1), self.rank(i)));
        m.rescaled(&self.shift_of(i + 1), &self.shift_of(i))
    }

    pub fn validate(&self) -> Result<(), ComplexError> {
        for (&i, m) in &self.differentials {
            let (r, c) = (self.rank(i + 1), self.rank(i));
            if m.rows != r || m.cols != c || m.entries.iter().any(|row| row.len() != c) {
                return Err(ComplexError::Shape(i, m.rows, m.cols, r, c));
            }
            for (a, row) in m.entries.iter().enumerate() {
                for (b, e) in row.iter().enumerate() {
                    if e.val_lower().is_some_and(|v| v.is_negative()) {
                        return Err(ComplexError::NegativeValuation(a, b));
                    }
                }
            }
            if let Some(next) = self.differentials.get(&(i + 1)) {
                if !next.mul(m).is_zero() {
                    return Err(ComplexError::NotAComplex(i));
                }
            }
        }
        for (&i, s) in &self.shifts {
            if s.len() != self.rank(i) {
                return Err(ComplexError::Parse(format!("shift vector in degree {i} has the wrong length")));
            }
        }
        Ok(())
    }

    pub fn from_json(j: &ComplexJson) -> Result<Self, ComplexError> {
        let parse = |s: &str| s.parse::<NovikovScalar>().map_err(|e| ComplexError::Parse(format!("{s:?}: {e}")));
        let mut differentials = BTreeMap::new();
        for (&i, rows) in &j.differentials {
            let entries = rows.iter().map(|r| r.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()).collect::<Result<Vec<_>, _>>()?;
            let mut m = NovMatrix::from_rows(entries);
            if m.rows == 0 {
                m.cols = j.ranks.get(&i).copied().unwrap_or(0);
            }
            differentials.insert(i, m);
        }
        let mut shifts = BTreeMap::new();
        for (&i, v) in &j.shifts {
            let s = v
                .iter()
                .map(|x| crate::rational::parse_q(x).ok_or_else(|| ComplexError::Parse(format!("bad shift {x:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            shifts.insert(i, s);
        }
        let c = Self { ranks: j.ranks.clone(), differentials, shifts };
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> ComplexJson {
        ComplexJson {
            ranks: self.ranks.clone(),
            differentials: self
                .differentials
                .iter()
                .map(|(&i, m)| (i, m.entries.iter().map(|r| r.iter().map(|e| e.to_string()).collect()).collect()))
                .collect(),
            shifts: self.shifts.iter().map(|(&i, v)| (i, v.iter().map(fmt_q).collect())).collect(),
        }
    }
}

/// Maximal torsion of `H^i` of the complex over `Λ≥0`.
pub fn max_torsion(c: &FilteredComplex, i: i64) -> Result<Extended, ComplexError> {
    let m = c.differential(i - 1);
    if m.entries.iter().flatten().any(|e| e.val_lower().is_some_and(|v| v.is_negative())) {
        return Err(ComplexError::NegativeValuation(0, 0));
    }
    let d = diagonalize_valuation(&m)?;
    Ok(d.exponents.into_iter().filter(|a| a.is_positive()).max().map_or(Extended::NegInf, Extended::Finite))
}

/// Boundary depth in degree `i` of the complex base-changed to the Novikov
/// field, with the valuation filtration shifted per generator.
pub fn boundary_depth(c: &FilteredComplex, i: i64) -> Result<Extended, ComplexError> {
    let d = diagonalize_valuation(&c.differential(i - 1))?;
    Ok(d.exponents.into_iter().max().map_or(Extended::NegInf, Extended::Finite))
}

/// Torsion and boundary depth agree, reading torsion `−∞` against a depth of
/// `0` (unit differentials) as agreement.
pub fn torsion_matches_depth(torsion: &Extended, depth: &Extended) -> bool {
    torsion == depth || (*torsion == Extended::NegInf && *depth == Extended::Finite(Q::zero()))
}

fn random_entry<R: Rng>(rng: &mut R, density: f64) -> NovikovScalar {
    if !rng.gen_bool(density) {
        return NovikovScalar::zero();
    }
    let nterms = rng.gen_range(1..=2);
    let terms = (0..nterms)
        .map(|_| {
            let c = q(rng.gen_range(1..=3i64)) * if rng.gen_bool(0.5) { q(1) } else { q(-1) };
            (qf(rng.gen_range(0..=12), rng.gen_range(1..=4)), c)
        })
        .collect();
    NovikovScalar::from_terms(terms, None)
}

fn unit_lower<R: Rng>(rng: &mut R, n: usize) -> (NovMatrix, NovMatrix) {
    let mut l = NovMatrix::identity(n);
    for i in 0..n {
        for j in 0..i {
            l.entries[i][j] = random_entry(rng, 0.5);
        }
    }
    // Forward substitution: the inverse of a unit lower triangular matrix is exact.
    let mut inv = NovMatrix::identity(n);
    for i in 0..n {
        for j in 0..i {
            let mut acc = NovikovScalar::zero();
            for k in j..i {
                acc = acc.add(&l.entries[i][k].mul(&inv.entries[k][j]));
            }
            inv.entries[i][j] = acc.neg();
        }
    }
    (l, inv)
}

fn diag_block<R: Rng>(rng: &mut R, rows: usize, cols: usize, row0: usize, col0: usize, r: usize) -> NovMatrix {
    let mut m = NovMatrix::zeros(rows, cols);
    for t in 0..r {
        let a = qf(rng.gen_range(0..=12), rng.gen_range(1..=4));
        let c = q(rng.gen_range(1..=5i64));
        m.entries[row0 + t][col0 + t] = NovikovScalar::monomial(c, a);
    }
    m
}

/// A random three-term complex `C^0 → C^1 → C^2` with ranks at most
/// `max_rank`, built from diagonal blocks conjugated by unit triangular
/// changes of basis.
pub fn random_complex<R: Rng>(rng: &mut R, max_rank: usize) -> FilteredComplex {
    let n0 = rng.gen_range(1..=max_rank);
    let n1 = rng.gen_range(1..=max_rank);
    let n2 = rng.gen_range(1..=max_rank);
    let r0 = rng.gen_range(0..=n0.min(n1));
    let r1 = rng.gen_range(0..=(n1 - r0).min(n2));
    let (u, u_inv) = unit_lower(rng, n1);
    let (p0, _) = unit_lower(rng, n0);
    let (p2, _) = unit_lower(rng, n2);
    let d0 = u.mul(&diag_block(rng, n1, n0, 0, 0, r0)).mul(&p0.transposed());
    let d1 = p2.mul(&diag_block(rng, n2, n1, 0, r0, r1)).mul(&u_inv);
    let ranks = BTreeMap::from([(0, n0), (1, n1), (2, n2)]);
    let differentials = BTreeMap::from([(0, d0), (1, d1)]);
    FilteredComplex::new(ranks, differentials).expect("valid by construction")
}

impl NovMatrix {
    pub fn transposed(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.entries[j][i] = self.entries[i][j].clone();
            }
        }
        out
    }
}
