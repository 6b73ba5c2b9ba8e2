//! SDPs whose data matrices split as a sparse part on a graph plus a
//! low-rank part `A S Aᵀ` with one shared factor `A`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg;
use crate::serde_util::{self, bound, matrix_rows};

/// Symmetric matrix stored as upper-triangular coordinates `(i, j, v)` with
/// `i <= j`, sorted and without duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SparseSymMatrix { dim, entries: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        SparseSymMatrix { dim, entries: (0..dim).map(|i| (i, i, 1.0)).collect() }
    }

    /// Entries may be given in either triangle; repeated positions are an
    /// error. Explicit zeros are dropped.
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, j, v) in entries {
            let (i, j) = (i.min(j), i.max(j));
            if j >= dim {
                return Err(Error::IndexOutOfRange { index: j + 1, limit: dim });
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite entry at ({}, {})", i + 1, j + 1)));
            }
            if map.insert((i, j), v).is_some() {
                return Err(Error::InvalidInput(format!("duplicate entry ({}, {})", i + 1, j + 1)));
            }
        }
        Ok(SparseSymMatrix { dim, entries: map.into_iter().filter(|&(_, v)| v != 0.0).map(|((i, j), v)| (i, j, v)).collect() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Keeps the entries of `m` on the diagonal and on edges of `pattern`.
    pub fn project_dense(m: &DMatrix<f64>, pattern: &Graph) -> Self {
        let n = m.nrows();
        let mut entries = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                if v != 0.0 && (i == j || pattern.has_edge(i, j)) {
                    entries.push((i, j, v));
                }
            }
        }
        SparseSymMatrix { dim: n, entries }
    }

    /// `⟨self, X⟩` for dense symmetric `X`.
    pub fn inner_dense(&self, x: &DMatrix<f64>) -> f64 {
        self.entries.iter().map(|&(i, j, v)| if i == j { v * x[(i, i)] } else { 2.0 * v * x[(i, j)] }).sum()
    }

    /// `⟨self, R Rᵀ⟩` without forming `R Rᵀ`.
    pub fn inner_factor(&self, r: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| {
                let d = r.row(i).dot(&r.row(j));
                if i == j { v * d } else { 2.0 * v * d }
            })
            .sum()
    }

    /// True if every off-diagonal entry is an edge of `g`.
    pub fn supported_on(&self, g: &Graph) -> bool {
        self.entries.iter().all(|&(i, j, _)| i == j || g.has_edge(i, j))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |a, e| a.max(e.2.abs()))
    }
}

/// One data matrix `A^s + A S Aᵀ`: its sparse part and its `ℓ × ℓ` core.
#[derive(Clone, Debug, PartialEq)]
pub struct SplrMatrix {
    pub sparse: SparseSymMatrix,
    pub core: DMatrix<f64>,
}

impl SplrMatrix {
    pub fn sparse_only(sparse: SparseSymMatrix, ell: usize) -> Self {
        SplrMatrix { sparse, core: DMatrix::zeros(ell, ell) }
    }

    /// `⟨A^s, R Rᵀ⟩ + ⟨S, (AᵀR)(AᵀR)ᵀ⟩`, given `AᵀR`.
    pub fn eval(&self, r: &DMatrix<f64>, at_r: &DMatrix<f64>) -> f64 {
        let low = if self.core.nrows() == 0 { 0.0 } else { (&self.core * at_r).component_mul(at_r).sum() };
        self.sparse.inner_factor(r) + low
    }

    pub fn to_dense(&self, factor: &DMatrix<f64>) -> DMatrix<f64> {
        self.sparse.to_dense() + factor * &self.core * factor.transpose()
    }
}

/// `lower <= ⟨A, X⟩ <= upper`; `None` is an unbounded side.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub data: SplrMatrix,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Constraint {
    pub fn equality(data: SplrMatrix, b: f64) -> Self {
        Constraint { data, lower: Some(b), upper: Some(b) }
    }

    pub fn is_equality(&self) -> bool {
        self.lower.is_some() && self.lower == self.upper
    }

    /// Distance of `value` from `[lower, upper]`.
    pub fn violation(&self, value: f64) -> f64 {
        let below = self.lower.map_or(0.0, |l| l - value);
        let above = self.upper.map_or(0.0, |u| value - u);
        below.max(above).max(0.0)
    }
}

/// `minimize ⟨A_0, X⟩ s.t. b_l <= ⟨A_i, X⟩ <= b_u, X ⪰ 0` with
/// `A_i = A_i^s + A S_i Aᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplrFile", into = "SplrFile")]
pub struct SplrSdp {
    pub n: usize,
    pub pattern: Graph,
    pub objective: SplrMatrix,
    pub constraints: Vec<Constraint>,
    pub factor: DMatrix<f64>,
}

impl SplrSdp {
    pub fn new(pattern: Graph, objective: SplrMatrix, constraints: Vec<Constraint>, factor: DMatrix<f64>) -> Result<Self> {
        let p = SplrSdp { n: pattern.n(), pattern, objective, constraints, factor };
        p.check()?;
        Ok(p)
    }

    pub fn ell(&self) -> usize {
        self.factor.ncols()
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    /// Checks dimensions, supports, core symmetry and bound ordering.
    pub fn check(&self) -> Result<()> {
        let (n, ell) = (self.n, self.ell());
        if self.pattern.n() != n || self.factor.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: if self.pattern.n() != n { self.pattern.n() } else { self.factor.nrows() } });
        }
        for (k, form) in self.forms().enumerate() {
            if form.sparse.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: form.sparse.dim() });
            }
            if !form.sparse.supported_on(&self.pattern) {
                return Err(Error::InvalidInput(format!("sparse part of data matrix {k} leaves the pattern")));
            }
            if form.core.nrows() != ell || form.core.ncols() != ell {
                return Err(Error::DimensionMismatch { expected: ell, found: form.core.nrows() });
            }
            let scale = linalg::max_abs(&form.core).max(1.0);
            if linalg::max_abs(&(&form.core - form.core.transpose())) > 1e-12 * scale {
                return Err(Error::InvalidInput(format!("core of data matrix {k} is not symmetric")));
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if let (Some(l), Some(u)) = (c.lower, c.upper) {
                if l > u {
                    return Err(Error::InvalidInput(format!("constraint {} has lower bound {l} above upper bound {u}", k + 1)));
                }
            }
        }
        Ok(())
    }

    /// Objective first, then the constraints.
    pub fn forms(&self) -> impl Iterator<Item = &SplrMatrix> {
        std::iter::once(&self.objective).chain(self.constraints.iter().map(|c| &c.data))
    }

    /// Data matrix `i`: 0 is the objective, `1..=m` the constraints.
    pub fn form(&self, i: usize) -> Result<&SplrMatrix> {
        match i {
            0 => Ok(&self.objective),
            _ => self.constraints.get(i - 1).map(|c| &c.data).ok_or(Error::IndexOutOfRange { index: i, limit: self.m() }),
        }
    }

    /// `⟨A_i, R Rᵀ⟩`.
    pub fn eval_constraint(&self, i: usize, x: &FactoredSolution) -> Result<f64> {
        self.check_dim(x)?;
        let at_r = self.factor.transpose() * &x.factor;
        Ok(self.form(i)?.eval(&x.factor, &at_r))
    }

    /// Objective value followed by every constraint value.
    pub fn eval_all(&self, x: &FactoredSolution) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let at_r = self.factor.transpose() * &x.factor;
        Ok(self.forms().map(|f| f.eval(&x.factor, &at_r)).collect())
    }

    pub fn objective_value(&self, x: &FactoredSolution) -> Result<f64> {
        self.eval_constraint(0, x)
    }

    /// Largest bound violation over all constraints.
    pub fn max_violation(&self, x: &FactoredSolution) -> Result<f64> {
        let values = self.eval_all(x)?;
        Ok(self.constraints.iter().zip(&values[1..]).map(|(c, &v)| c.violation(v)).fold(0.0, f64::max))
    }

    pub fn is_feasible(&self, x: &FactoredSolution, tol: f64) -> bool {
        self.max_violation(x).is_ok_and(|v| v <= tol)
    }

    fn check_dim(&self, x: &FactoredSolution) -> Result<()> {
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.dim() });
        }
        Ok(())
    }

    /// Dense `A_i` (0 is the objective).
    pub fn dense_matrix(&self, i: usize) -> Result<DMatrix<f64>> {
        Ok(self.form(i)?.to_dense(&self.factor))
    }
}

#[derive(Serialize, Deserialize)]
struct FormFile {
    sparse_entries: Vec<(usize, usize, f64)>,
    core: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ConstraintFile {
    sparse_entries: Vec<(usize, usize, f64)>,
    core: Vec<Vec<f64>>,
    #[serde(with = "bound")]
    lower: Option<f64>,
    #[serde(with = "bound")]
    upper: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct SplrFile {
    n: usize,
    m: usize,
    pattern_edges: Vec<[usize; 2]>,
    objective: FormFile,
    constraints: Vec<ConstraintFile>,
    factor: Vec<Vec<f64>>,
}

fn form_from_file(n: usize, ell: usize, entries: &[(usize, usize, f64)], core: &[Vec<f64>]) -> Result<SplrMatrix> {
    let mut zero_based = Vec::with_capacity(entries.len());
    for &(i, j, v) in entries {
        if i == 0 || j == 0 {
            return Err(Error::InvalidInput("sparse entries are 1-based".into()));
        }
        zero_based.push((i - 1, j - 1, v));
    }
    let core = serde_util::from_rows(core, ell).map_err(Error::InvalidInput)?;
    if core.nrows() != ell || core.ncols() != ell {
        return Err(Error::DimensionMismatch { expected: ell, found: core.nrows() });
    }
    Ok(SplrMatrix { sparse: SparseSymMatrix::from_entries(n, zero_based)?, core })
}

/// 1-based sparse entries and row-major core.
type FormParts = (Vec<(usize, usize, f64)>, Vec<Vec<f64>>);

fn form_to_file(f: &SplrMatrix) -> FormParts {
    (f.sparse.entries().iter().map(|&(i, j, v)| (i + 1, j + 1, v)).collect(), serde_util::to_rows(&f.core))
}

impl TryFrom<SplrFile> for SplrSdp {
    type Error = Error;

    fn try_from(f: SplrFile) -> Result<Self> {
        if f.m != f.constraints.len() {
            return Err(Error::DimensionMismatch { expected: f.m, found: f.constraints.len() });
        }
        if f.factor.len() != f.n {
            return Err(Error::DimensionMismatch { expected: f.n, found: f.factor.len() });
        }
        let factor = serde_util::from_rows(&f.factor, 0).map_err(Error::InvalidInput)?;
        let ell = factor.ncols();
        let pattern = Graph::from_edges(f.n, &crate::graph::one_based_pairs(&f.pattern_edges, f.n)?)?;
        let objective = form_from_file(f.n, ell, &f.objective.sparse_entries, &f.objective.core)?;
        let constraints = f
            .constraints
            .iter()
            .map(|c| Ok(Constraint { data: form_from_file(f.n, ell, &c.sparse_entries, &c.core)?, lower: c.lower, upper: c.upper }))
            .collect::<Result<Vec<_>>>()?;
        SplrSdp::new(pattern, objective, constraints, factor)
    }
}

impl From<SplrSdp> for SplrFile {
    fn from(p: SplrSdp) -> Self {
        let (sparse_entries, core) = form_to_file(&p.objective);
        SplrFile {
            n: p.n,
            m: p.m(),
            pattern_edges: p.pattern.edges().into_iter().map(|(i, j)| [i + 1, j + 1]).collect(),
            objective: FormFile { sparse_entries, core },
            constraints: p
                .constraints
                .iter()
                .map(|c| {
                    let (sparse_entries, core) = form_to_file(&c.data);
                    ConstraintFile { sparse_entries, core, lower: c.lower, upper: c.upper }
                })
                .collect(),
            factor: serde_util::to_rows(&p.factor),
        }
    }
}

/// A PSD matrix held as `X = R Rᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactoredSolution {
    #[serde(with = "matrix_rows")]
    pub factor: DMatrix<f64>,
}

impl FactoredSolution {
    pub fn new(factor: DMatrix<f64>) -> Self {
        FactoredSolution { factor }
    }

    /// Factor of a dense PSD matrix; fails if an eigenvalue is below
    /// `-tol · max(1, λ_max)`.
    pub fn from_psd(x: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let (values, _) = linalg::sym_eigen_desc(x);
        let lmin = values.iter().copied().fold(f64::INFINITY, f64::min);
        let lmax = values.iter().copied().fold(0.0_f64, f64::max);
        if !values.is_empty() && lmin < -tol * lmax.max(1.0) {
            return Err(Error::NotPsd { min_eigenvalue: lmin });
        }
        Ok(FactoredSolution { factor: linalg::psd_factor(x, 1e-14) })
    }

    pub fn identity(n: usize) -> Self {
        FactoredSolution { factor: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Column count of the factor, an upper bound on the rank.
    pub fn width(&self) -> usize {
        self.factor.ncols()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }

    /// Numerical rank of `X` at the default relative threshold.
    pub fn rank(&self) -> usize {
        linalg::gram_rank(&self.factor, linalg::RANK_TOL)
    }

    /// Eigenvalues of `X` in descending order (nonzero part only).
    pub fn spectrum(&self) -> Vec<f64> {
        linalg::gram_spectrum(&self.factor)
    }

    /// Rows `rows` of the factor.
    pub fn restrict(&self, rows: &[usize]) -> Result<Self> {
        let n = self.dim();
        if let Some(&bad) = rows.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad + 1, limit: n });
        }
        Ok(FactoredSolution { factor: self.factor.select_rows(rows) })
    }
}

/// Splits dense symmetric matrices (index 0 is the objective) into sparse
/// parts on `pattern` and a shared low-rank factor.
///
/// For each matrix the low-rank part is either the whole matrix or its
/// off-pattern residual, whichever has the lower numerical rank (ties go to
/// the residual, so matrices supported on the pattern stay sparse). The
/// factor is an orthonormal basis of the column span of the stacked low-rank
/// parts, truncated at `rank_tol · σ_max`.
pub fn detect_splr(matrices: &[DMatrix<f64>], bounds: &[(Option<f64>, Option<f64>)], pattern: &Graph, rank_tol: f64) -> Result<SplrSdp> {
    let n = pattern.n();
    if matrices.is_empty() {
        return Err(Error::InvalidInput("need at least an objective matrix".into()));
    }
    if bounds.len() + 1 != matrices.len() {
        return Err(Error::DimensionMismatch { expected: matrices.len() - 1, found: bounds.len() });
    }
    let mut sparse_parts = Vec::with_capacity(matrices.len());
    let mut low_parts = Vec::with_capacity(matrices.len());
    for (k, a) in matrices.iter().enumerate() {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a.nrows() });
        }
        let scale = linalg::max_abs(a).max(1.0);
        if linalg::max_abs(&(a - a.transpose())) > 1e-9 * scale {
            return Err(Error::InvalidInput(format!("data matrix {k} is not symmetric")));
        }
        let a = linalg::symmetrized(a);
        let on_pattern = SparseSymMatrix::project_dense(&a, pattern);
        let residual = &a - on_pattern.to_dense();
        let r_res = linalg::numerical_rank(&residual, rank_tol);
        let r_all = linalg::numerical_rank(&a, rank_tol);
        if r_all < r_res {
            sparse_parts.push(SparseSymMatrix::zeros(n));
            low_parts.push(a);
        } else {
            sparse_parts.push(on_pattern);
            low_parts.push(residual);
        }
    }
    let mut stacked = DMatrix::zeros(n, n * low_parts.len());
    for (k, l) in low_parts.iter().enumerate() {
        stacked.columns_mut(k * n, n).copy_from(l);
    }
    let w = if n == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let d = linalg::svd(&stacked)?;
        d.u.select_columns(&d.above(rank_tol))
    };
    let mut forms = sparse_parts.into_iter().zip(&low_parts).map(|(sparse, l)| {
        let core = linalg::symmetrized(&(w.transpose() * l * &w));
        SplrMatrix { sparse, core }
    });
    let objective = forms.next().unwrap();
    let constraints = forms.zip(bounds).map(|(data, &(lower, upper))| Constraint { data, lower, upper }).collect();
    let p = SplrSdp::new(pattern.clone(), objective, constraints, w)?;
    for (k, a) in matrices.iter().enumerate() {
        let err = linalg::max_abs(&(p.dense_matrix(k)? - linalg::symmetrized(a)));
        let scale = linalg::max_abs(a).max(1.0);
        if err > 1e-6 * scale {
            log::warn!("detected split of data matrix {k} reconstructs with error {err:e}");
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn simex3(b: f64) -> SplrSdp {
        let n = 3;
        let a: DVector<f64> = DVector::from_element(n, 1.0);
        let norm = a.norm();
        let factor = DMatrix::from_column_slice(n, 1, (a / norm).as_slice());
        let mut constraints: Vec<Constraint> = (0..n)
            .map(|i| Constraint::equality(SplrMatrix::sparse_only(SparseSymMatrix::from_entries(n, [(i, i, 1.0)]).unwrap(), 1), 1.0))
            .collect();
        constraints.push(Constraint::equality(SplrMatrix { sparse: SparseSymMatrix::zeros(n), core: DMatrix::from_element(1, 1, norm * norm) }, b));
        SplrSdp::new(Graph::new(n), SplrMatrix::sparse_only(SparseSymMatrix::zeros(n), 1), constraints, factor).unwrap()
    }

    #[test]
    fn rank_one_constraint_at_all_ones() {
        let p = simex3(9.0);
        let x = FactoredSolution::new(DMatrix::from_element(3, 1, 1.0));
        assert!((p.eval_constraint(4, &x).unwrap() - 9.0).abs() < 1e-12);
        assert!(p.is_feasible(&x, 1e-9));
        assert!(!simex3(8.0).is_feasible(&x, 1e-9));
        assert!(p.eval_constraint(5, &x).is_err());
    }

    #[test]
    fn identity_sparse_part_gives_trace() {
        let r = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, -1.0, 3.0]);
        let s = SparseSymMatrix::identity(3);
        assert!((s.inner_factor(&r) - (&r * r.transpose()).trace()).abs() < 1e-12);
    }

    #[test]
    fn factor_eval_matches_dense() {
        let n = 4;
        let sparse = SparseSymMatrix::from_entries(n, [(0, 1, 0.5), (2, 2, -1.0), (3, 1, 2.0)]).unwrap();
        let factor = DMatrix::from_row_slice(n, 2, &[1.0, 0.0, 0.5, 1.0, -1.0, 2.0, 0.0, 1.0]);
        let core = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 2.0]);
        let form = SplrMatrix { sparse, core };
        let r = DMatrix::from_row_slice(n, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0, -1.0, 0.5, 0.0, 2.0, 0.0, 1.0]);
        let at_r = factor.transpose() * &r;
        let dense = form.to_dense(&factor);
        let x = &r * r.transpose();
        assert!((form.eval(&r, &at_r) - dense.component_mul(&x).sum()).abs() < 1e-12);
    }

    #[test]
    fn duplicate_sparse_entry_rejected() {
        assert!(SparseSymMatrix::from_entries(3, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(SparseSymMatrix::from_entries(3, [(0, 3, 1.0)]).is_err());
    }

    #[test]
    fn detects_bisection_split() {
        let n = 5;
        let g = Graph::path(n);
        let mut lap = DMatrix::zeros(n, n);
        for (i, j) in g.edges() {
            lap[(i, i)] += 1.0;
            lap[(j, j)] += 1.0;
            lap[(i, j)] -= 1.0;
            lap[(j, i)] -= 1.0;
        }
        let ones = DMatrix::from_element(n, n, 1.0);
        let p = detect_splr(&[lap.clone(), ones.clone()], &[(Some(0.0), Some(0.0))], &g, 1e-9).unwrap();
        assert_eq!(p.ell(), 1);
        assert!(p.constraints[0].data.sparse.is_empty());
        assert!((p.constraints[0].data.core[(0, 0)] - n as f64).abs() < 1e-9);
        let e = 1.0 / (n as f64).sqrt();
        assert!(p.factor.iter().all(|v| (v.abs() - e).abs() < 1e-9));
        assert!(linalg::max_abs(&(p.dense_matrix(0).unwrap() - lap)) < 1e-9);
        assert!(linalg::max_abs(&(p.dense_matrix(1).unwrap() - ones)) < 1e-9);
    }

    #[test]
    fn all_sparse_detects_ell_zero() {
        let g = Graph::path(3);
        let p = detect_splr(&[DMatrix::identity(3, 3)], &[], &g, 1e-9).unwrap();
        assert_eq!(p.ell(), 0);
    }

    #[test]
    fn json_round_trip() {
        let mut p = simex3(9.0);
        p.constraints[0].lower = None;
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"unbounded\""));
        let back: SplrSdp = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
