//! Sparse extension: lifts an SPLR problem to dimension `n + kℓ` so every
//! low-rank term becomes a sparse term on the last `ℓ` indices plus sparse
//! null constraints along a rooted binary tree decomposition.
//!
//! Tree nodes are labelled `0..k` in DFS post-order (children in ascending
//! id), so the root gets the last label and its block `U_root` is the index
//! set `𝒥` holding `AᵀX A`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, TreeDecomposition};
use crate::model::{FactoredSolution, SplrSdp};

/// `W_t = V_t \ V_parent(t)`; these sets partition the vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct BagPartition {
    pub w: BTreeMap<usize, Vec<usize>>,
}

pub fn partition_bags(td: &TreeDecomposition) -> Result<BagPartition> {
    td.root().ok_or(Error::NotRooted)?;
    let w = td
        .nodes()
        .map(|t| {
            let bag = td.bag(t);
            let part = match td.parent(t) {
                Some(p) => bag.iter().copied().filter(|v| td.bag(p).binary_search(v).is_err()).collect(),
                None => bag.to_vec(),
            };
            (t, part)
        })
        .collect();
    Ok(BagPartition { w })
}

/// The lifted graph and its tree decomposition over the same tree.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedPattern {
    pub n: usize,
    pub ell: usize,
    /// Nodes in post-order; the position of a node is its label.
    pub order: Vec<usize>,
    pub labels: BTreeMap<usize, usize>,
    pub graph: Graph,
    /// Extended bags `V_t ∪ U_t ∪ U_children`, sorted.
    pub decomposition: TreeDecomposition,
}

impl ExtendedPattern {
    pub fn k(&self) -> usize {
        self.order.len()
    }

    pub fn n_hat(&self) -> usize {
        self.n + self.k() * self.ell
    }

    /// `U_t`: the `ℓ` auxiliary indices owned by node `t`.
    pub fn u(&self, t: usize) -> Vec<usize> {
        let start = self.n + self.labels[&t] * self.ell;
        (start..start + self.ell).collect()
    }

    /// `𝒥 = U_root`.
    pub fn j_set(&self) -> Vec<usize> {
        self.u(self.decomposition.root().expect("rooted"))
    }
}

fn check_binary_rooted(td: &TreeDecomposition) -> Result<()> {
    td.root().ok_or(Error::NotRooted)?;
    for t in td.nodes() {
        let c = td.children(t).len();
        if c > 2 {
            return Err(Error::NotBinary { node: t, children: c });
        }
    }
    Ok(())
}

/// Builds `G̃` (original edges, a clique on each `U_t`, and all edges from
/// `U_t` to `V_t` and to the parent bag) with bags `V_t ∪ U_t ∪ U_children`.
pub fn build_extended_pattern(g: &Graph, td: &TreeDecomposition, ell: usize) -> Result<ExtendedPattern> {
    check_binary_rooted(td)?;
    let n = g.n();
    let order = td.post_order()?;
    let labels: BTreeMap<usize, usize> = order.iter().enumerate().map(|(l, &t)| (t, l)).collect();
    let u = |t: usize| -> Vec<usize> {
        let start = n + labels[&t] * ell;
        (start..start + ell).collect()
    };
    let n_hat = n + order.len() * ell;
    let mut graph = Graph::new(n_hat);
    for (i, j) in g.edges() {
        graph.add_edge(i, j)?;
    }
    let mut bags = BTreeMap::new();
    for t in td.nodes() {
        let ut = u(t);
        for (a, &x) in ut.iter().enumerate() {
            for &y in &ut[a + 1..] {
                graph.add_edge(x, y)?;
            }
        }
        let attach = td.bag(t).iter().chain(td.parent(t).map_or(&[][..], |p| td.bag(p)));
        for &v in attach {
            for &x in &ut {
                graph.add_edge(v, x)?;
            }
        }
        let mut bag = td.bag(t).to_vec();
        bag.extend(&ut);
        for &c in td.children(t) {
            bag.extend(u(c));
        }
        bag.sort_unstable();
        bags.insert(t, bag);
    }
    let decomposition = TreeDecomposition::new(bags, &td.tree_edges())?.rooted_at(td.root().unwrap())?;
    Ok(ExtendedPattern { n, ell, order, labels, graph, decomposition })
}

/// The lifted problem: the original data acting on `X̃_{ℐ,ℐ}` and `X̃_{𝒥,𝒥}`
/// plus null constraints `(ã^{h,t})ᵀ X̃_{Ṽ_t,Ṽ_t} ã^{h,t} = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExtendedFile", into = "ExtendedFile")]
pub struct ExtendedSdp {
    pub problem: SplrSdp,
    /// Rooted binary decomposition of the original pattern.
    pub decomposition: TreeDecomposition,
    pub partition: BagPartition,
    pub pattern: ExtendedPattern,
    /// Per node, the `|Ṽ_t| × ℓ` matrix whose columns are `ã^{h,t}`
    /// restricted to the extended bag.
    pub null_vectors: BTreeMap<usize, DMatrix<f64>>,
}

pub fn build_extension(p: &SplrSdp, td: &TreeDecomposition) -> Result<ExtendedSdp> {
    check_binary_rooted(td)?;
    if let Some(msg) = td.validation_error(&p.pattern) {
        return Err(Error::InvalidDecomposition(msg));
    }
    let ell = p.ell();
    let partition = partition_bags(td)?;
    let pattern = build_extended_pattern(&p.pattern, td, ell)?;
    let mut null_vectors = BTreeMap::new();
    for t in td.nodes() {
        let bag = pattern.decomposition.bag(t);
        let pos = |i: usize| bag.binary_search(&i).expect("index in extended bag");
        let mut a = DMatrix::zeros(bag.len(), ell);
        for h in 0..ell {
            for &v in &partition.w[&t] {
                a[(pos(v), h)] = p.factor[(v, h)];
            }
            for &c in td.children(t) {
                a[(pos(pattern.u(c)[h]), h)] = 1.0;
            }
            a[(pos(pattern.u(t)[h]), h)] = -1.0;
        }
        null_vectors.insert(t, a);
    }
    Ok(ExtendedSdp { problem: p.clone(), decomposition: td.clone(), partition, pattern, null_vectors })
}

impl ExtendedSdp {
    pub fn n(&self) -> usize {
        self.problem.n
    }

    pub fn ell(&self) -> usize {
        self.problem.ell()
    }

    pub fn k(&self) -> usize {
        self.pattern.k()
    }

    pub fn n_hat(&self) -> usize {
        self.pattern.n_hat()
    }

    pub fn i_set(&self) -> Vec<usize> {
        (0..self.n()).collect()
    }

    pub fn j_set(&self) -> Vec<usize> {
        self.pattern.j_set()
    }

    pub fn extended_bag(&self, t: usize) -> &[usize] {
        self.pattern.decomposition.bag(t)
    }

    /// True when every node has at most one child.
    pub fn is_path(&self) -> bool {
        self.decomposition.nodes().all(|t| self.decomposition.children(t).len() <= 1)
    }

    pub fn width_before(&self) -> usize {
        self.decomposition.width().expect("nonempty")
    }

    pub fn width_after(&self) -> usize {
        self.pattern.decomposition.width().expect("nonempty")
    }

    /// Value of data matrix `i` (0 is the objective) at a lifted point.
    pub fn eval(&self, i: usize, x: &FactoredSolution) -> Result<f64> {
        self.check_dim(x)?;
        let rj = x.factor.select_rows(&self.j_set());
        Ok(self.problem.form(i)?.eval(&x.factor, &rj))
    }

    /// Objective followed by every constraint value at a lifted point.
    pub fn eval_all(&self, x: &FactoredSolution) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let rj = x.factor.select_rows(&self.j_set());
        Ok(self.problem.forms().map(|f| f.eval(&x.factor, &rj)).collect())
    }

    /// Largest null-constraint value `‖(ã^{h,t})ᵀ R̃_{Ṽ_t}‖²`.
    pub fn max_null_residual(&self, x: &FactoredSolution) -> Result<f64> {
        self.check_dim(x)?;
        let mut worst = 0.0_f64;
        for (t, a) in &self.null_vectors {
            let rows = x.factor.select_rows(self.extended_bag(*t));
            let prod = a.transpose() * rows;
            for h in 0..prod.nrows() {
                worst = worst.max(prod.row(h).norm_squared());
            }
        }
        Ok(worst)
    }

    fn check_dim(&self, x: &FactoredSolution) -> Result<()> {
        if x.dim() != self.n_hat() {
            return Err(Error::DimensionMismatch { expected: self.n_hat(), found: x.dim() });
        }
        Ok(())
    }
}

/// Lifts `X = R Rᵀ`: the first `n` rows are `R`, and each auxiliary row
/// `n + label(t)ℓ + h` is `(a^{h,t})ᵀ R_{W_t} + Σ_children` of the same row
/// of each child, filled children first.
pub fn extend_solution(ext: &ExtendedSdp, x: &FactoredSolution) -> Result<FactoredSolution> {
    let n = ext.n();
    if x.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.dim() });
    }
    let (ell, r) = (ext.ell(), x.width());
    let mut out = DMatrix::zeros(ext.n_hat(), r);
    out.rows_mut(0, n).copy_from(&x.factor);
    let a = &ext.problem.factor;
    for &t in &ext.pattern.order {
        let ut = ext.pattern.u(t);
        for h in 0..ell {
            let mut row = nalgebra::RowDVector::zeros(r);
            for &v in &ext.partition.w[&t] {
                row += x.factor.row(v) * a[(v, h)];
            }
            for &c in ext.decomposition.children(t) {
                row += out.row(ext.pattern.u(c)[h]);
            }
            out.set_row(ut[h], &row);
        }
    }
    Ok(FactoredSolution::new(out))
}

/// Rows `rows` of a lifted factor, i.e. `X̃_{rows,rows}`.
pub fn restrict_solution(x: &FactoredSolution, rows: &[usize]) -> Result<FactoredSolution> {
    x.restrict(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub samples: usize,
    pub max_null_residual: f64,
    /// Largest `|value - lifted value| / (1 + |value|)` over objective and
    /// constraints.
    pub max_value_mismatch: f64,
    pub restriction_exact: bool,
    pub passed: bool,
}

/// Lifts random PSD points and checks null constraints, constraint values
/// and restriction. Samples are independent and seeded by `seed + index`.
pub fn verify_extension(p: &SplrSdp, ext: &ExtendedSdp, samples: usize, tol: f64, seed: u64) -> Result<VerifyReport> {
    if ext.problem != *p {
        return Err(Error::InvalidInput("extension was built from a different problem".into()));
    }
    let n = p.n;
    let rank = n.clamp(1, 4);
    let results: Vec<Result<(f64, f64, bool)>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            let r = DMatrix::from_fn(n, rank, |_, _| StandardNormal.sample(&mut rng));
            let x = FactoredSolution::new(r);
            let lifted = extend_solution(ext, &x)?;
            let null = ext.max_null_residual(&lifted)?;
            let before = p.eval_all(&x)?;
            let after = ext.eval_all(&lifted)?;
            let mismatch = before.iter().zip(&after).map(|(a, b)| (a - b).abs() / (1.0 + a.abs())).fold(0.0, f64::max);
            let exact = restrict_solution(&lifted, &ext.i_set())? == x;
            Ok((null, mismatch, exact))
        })
        .collect();
    let mut report = VerifyReport { samples, max_null_residual: 0.0, max_value_mismatch: 0.0, restriction_exact: true, passed: false };
    for r in results {
        let (null, mismatch, exact) = r?;
        report.max_null_residual = report.max_null_residual.max(null);
        report.max_value_mismatch = report.max_value_mismatch.max(mismatch);
        report.restriction_exact &= exact;
    }
    report.passed = report.max_null_residual <= tol && report.max_value_mismatch <= tol && report.restriction_exact;
    Ok(report)
}

#[derive(Serialize, Deserialize)]
struct NullConstraintFile {
    node: usize,
    h: usize,
    entries: Vec<(usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct ExtendedFile {
    n: usize,
    n_hat: usize,
    ell: usize,
    k: usize,
    i_set: Vec<usize>,
    j_set: Vec<usize>,
    problem: SplrSdp,
    decomposition: TreeDecomposition,
    extended_bags: BTreeMap<usize, Vec<usize>>,
    null_constraints: Vec<NullConstraintFile>,
}

impl From<ExtendedSdp> for ExtendedFile {
    fn from(e: ExtendedSdp) -> Self {
        let mut null_constraints = Vec::new();
        for (&t, a) in &e.null_vectors {
            let bag = e.extended_bag(t);
            for h in 0..a.ncols() {
                let entries = (0..a.nrows()).filter(|&i| a[(i, h)] != 0.0).map(|i| (bag[i] + 1, a[(i, h)])).collect();
                null_constraints.push(NullConstraintFile { node: t + 1, h: h + 1, entries });
            }
        }
        ExtendedFile {
            n: e.n(),
            n_hat: e.n_hat(),
            ell: e.ell(),
            k: e.k(),
            i_set: e.i_set().iter().map(|i| i + 1).collect(),
            j_set: e.j_set().iter().map(|i| i + 1).collect(),
            extended_bags: e.pattern.decomposition.bags().iter().map(|(&t, b)| (t + 1, b.iter().map(|i| i + 1).collect())).collect(),
            null_constraints,
            decomposition: e.decomposition,
            problem: e.problem,
        }
    }
}

impl TryFrom<ExtendedFile> for ExtendedSdp {
    type Error = Error;

    /// The derived fields are rebuilt from the problem and decomposition and
    /// must agree with what the file records.
    fn try_from(f: ExtendedFile) -> Result<Self> {
        let e = build_extension(&f.problem, &f.decomposition)?;
        let again = ExtendedFile::from(e.clone());
        let same_nulls = again.null_constraints.len() == f.null_constraints.len()
            && again.null_constraints.iter().zip(&f.null_constraints).all(|(a, b)| a.node == b.node && a.h == b.h && a.entries == b.entries);
        if again.n_hat != f.n_hat || again.k != f.k || again.ell != f.ell || again.extended_bags != f.extended_bags || !same_nulls {
            return Err(Error::InvalidInput("extended problem is inconsistent with its decomposition".into()));
        }
        Ok(e)
    }
}
