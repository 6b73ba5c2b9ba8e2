//! ADMM for block-form problems: a consensus vector over the pattern entries,
//! one PSD block per clique (restricted to the complement of its null
//! vectors), and interval constraints through a slack vector.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conversion::BlockSdp;
use crate::error::{Error, Result};
use crate::linalg::{self, RANK_TOL};
use crate::model::{FactoredSolution, SplrSdp};
use crate::serde_util::matrix_rows;

/// Largest dimension accepted by [`dense_reference_solve`].
/// Iterations during which `rho` may be rescaled.
const RHO_WINDOW: usize = 1000;

pub const DENSE_LIMIT: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmParams {
    pub rho: f64,
    pub max_iter: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    /// Zero starts every block at the identity; other seeds perturb it.
    pub seed: u64,
    pub adaptive_rho: bool,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
}

impl Default for AdmmParams {
    fn default() -> Self {
        AdmmParams { rho: 1.0, max_iter: 5000, tol_primal: 1e-9, tol_dual: 1e-9, seed: 0, adaptive_rho: true, relaxation: 1.6 }
    }
}

impl AdmmParams {
    pub fn check(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.tol_primal > 0.0 && self.tol_dual > 0.0) {
            return Err(Error::InvalidInput("rho and tolerances must be positive".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::InvalidInput("relaxation must lie in (0, 2)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub rho: f64,
    pub block_ranks: Vec<usize>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSolution {
    #[serde(with = "block_rows")]
    pub blocks: Vec<DMatrix<f64>>,
    pub stats: SolveStats,
}

mod block_rows {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Rows(#[serde(with = "matrix_rows")] DMatrix<f64>);

    pub fn serialize<S: Serializer>(b: &[DMatrix<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Rows> = b.iter().cloned().map(Rows).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<DMatrix<f64>>, D::Error> {
        Ok(Vec::<Rows>::deserialize(d)?.into_iter().map(|r| r.0).collect())
    }
}

/// `Q Π_PSD(Qᵀ M Q) Qᵀ` for `Q` an orthonormal basis of the complement of
/// the null vectors (given as columns).
pub fn project_null_psd(m: &DMatrix<f64>, null_vectors: &DMatrix<f64>) -> DMatrix<f64> {
    let (q, rank) = linalg::complement_basis(null_vectors, 1e-10);
    if rank < null_vectors.ncols() {
        log::warn!("null vectors are dependent: rank {rank} of {}", null_vectors.ncols());
    }
    project_with_basis(m, &q)
}

fn project_with_basis(m: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let inner = q.transpose() * m * q;
    let z = linalg::project_psd(&inner);
    linalg::symmetrized(&(q * z * q.transpose()))
}

struct ConeBlock {
    dim: usize,
    /// Variable ids in svec order of the block.
    ids: Vec<usize>,
    /// Directions `g` with `Y g = 0` enforced by the projection.
    nulls: DMatrix<f64>,
    basis: DMatrix<f64>,
}

/// Variables are pattern entries in svec scaling (`√2 X_ij` off the
/// diagonal), so every block selection is an isometry.
struct Program {
    nvar: usize,
    blocks: Vec<ConeBlock>,
    c: Vec<(usize, f64)>,
    rows: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

struct PairIndex(BTreeMap<(usize, usize), usize>);

impl PairIndex {
    fn id(&mut self, i: usize, j: usize) -> usize {
        let next = self.0.len();
        *self.0.entry((i.min(j), i.max(j))).or_insert(next)
    }
}

fn block_ids(pairs: &mut PairIndex, idx: &[usize]) -> Vec<usize> {
    let mut ids = Vec::with_capacity(linalg::svec_len(idx.len()));
    for j in 0..idx.len() {
        for i in 0..=j {
            ids.push(pairs.id(idx[i], idx[j]));
        }
    }
    ids
}

fn coefficient(i: usize, j: usize, entry_weight: f64) -> f64 {
    // entry_weight multiplies X_ij; the variable holds √2 X_ij off the diagonal.
    if i == j {
        entry_weight
    } else {
        entry_weight / SQRT_2
    }
}

fn merge(terms: impl IntoIterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (k, v) in terms {
        *acc.entry(k).or_insert(0.0) += v;
    }
    acc.into_iter().filter(|&(_, v)| v != 0.0).collect()
}

impl Program {
    fn from_blocks(bs: &BlockSdp) -> Program {
        let mut pairs = PairIndex(BTreeMap::new());
        let blocks: Vec<ConeBlock> = bs
            .blocks
            .iter()
            .map(|b| {
                let ids = block_ids(&mut pairs, &b.indices);
                if linalg::numerical_rank(&b.null_vectors, 1e-10) < b.null_vectors.ncols() {
                    log::warn!("block {}: null vectors are dependent", b.node + 1);
                }
                ConeBlock { dim: b.dim(), ids, nulls: b.null_vectors.clone(), basis: DMatrix::zeros(0, 0) }
            })
            .collect();
        let mut to_vars = |terms: &[crate::conversion::BlockTerm]| {
            merge(terms.iter().map(|t| {
                let idx = &bs.blocks[t.block].indices;
                (pairs.id(idx[t.i], idx[t.j]), coefficient(t.i, t.j, t.weight))
            }))
        };
        let c = to_vars(&bs.objective);
        let rows: Vec<_> = bs.constraints.iter().map(|k| to_vars(&k.terms)).collect();
        let lower = bs.constraints.iter().map(|k| k.lower.unwrap_or(f64::NEG_INFINITY)).collect();
        let upper = bs.constraints.iter().map(|k| k.upper.unwrap_or(f64::INFINITY)).collect();
        Program { nvar: pairs.0.len(), blocks, c, rows, lower, upper }.finish()
    }

    fn from_dense(p: &SplrSdp) -> Result<Program> {
        let n = p.n;
        let mut pairs = PairIndex(BTreeMap::new());
        let all: Vec<usize> = (0..n).collect();
        let ids = block_ids(&mut pairs, &all);
        let dense_row = |a: &DMatrix<f64>| -> Vec<(usize, f64)> {
            let mut out = Vec::new();
            let mut k = 0;
            for j in 0..n {
                for i in 0..=j {
                    let w = if i == j { a[(i, i)] } else { a[(i, j)] + a[(j, i)] };
                    if w != 0.0 {
                        out.push((ids[k], coefficient(i, j, w)));
                    }
                    k += 1;
                }
            }
            out
        };
        let c = dense_row(&p.dense_matrix(0)?);
        let rows = (1..=p.m()).map(|i| p.dense_matrix(i).map(|a| dense_row(&a))).collect::<Result<Vec<_>>>()?;
        Ok(Program {
            nvar: pairs.0.len(),
            blocks: vec![ConeBlock { dim: n, ids, nulls: DMatrix::zeros(n, 0), basis: DMatrix::zeros(0, 0) }],
            c,
            rows,
            lower: p.constraints.iter().map(|k| k.lower.unwrap_or(f64::NEG_INFINITY)).collect(),
            upper: p.constraints.iter().map(|k| k.upper.unwrap_or(f64::INFINITY)).collect(),
        }
        .finish())
    }

    /// A row `⟨G, Y_b⟩ = 0` (or `<= 0`) with `G ⪰ 0` supported on one block
    /// forces `Y_b G = 0`. Such rows are moved into the block's projection,
    /// which removes a face the iterates could otherwise only approach
    /// sublinearly. Then computes the projection bases.
    fn finish(mut self) -> Program {
        let mut keep = vec![true; self.rows.len()];
        let positions: Vec<BTreeMap<usize, usize>> =
            self.blocks.iter().map(|b| b.ids.iter().enumerate().map(|(p, &k)| (k, p)).collect()).collect();
        for (r, row) in self.rows.iter().enumerate() {
            if row.is_empty() {
                continue;
            }
            let Some(b) = positions.iter().position(|pos| row.iter().all(|(k, _)| pos.contains_key(k))) else { continue };
            let block = &self.blocks[b];
            let mut coeffs = DVector::zeros(block.ids.len());
            for &(k, v) in row {
                coeffs[positions[b][&k]] = v;
            }
            let g = linalg::smat(&coeffs, block.dim);
            let (values, vectors) = linalg::sym_eigen_desc(&g);
            let top = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let tol = 1e-12 * top;
            let sign = if values.iter().all(|&v| v >= -tol) && self.upper[r] == 0.0 && self.lower[r] <= 0.0 {
                1.0
            } else if values.iter().all(|&v| v <= tol) && self.lower[r] == 0.0 && self.upper[r] >= 0.0 {
                -1.0
            } else {
                continue;
            };
            let dirs: Vec<usize> = (0..block.dim).filter(|&i| sign * values[i] > 1e-9 * top).collect();
            let add = vectors.select_columns(&dirs);
            let nulls = &self.blocks[b].nulls;
            let mut joined = DMatrix::zeros(block.dim, nulls.ncols() + add.ncols());
            joined.columns_mut(0, nulls.ncols()).copy_from(nulls);
            joined.columns_mut(nulls.ncols(), add.ncols()).copy_from(&add);
            self.blocks[b].nulls = joined;
            keep[r] = false;
        }
        let mut it = keep.iter();
        self.rows.retain(|_| *it.next().unwrap());
        let mut it = keep.iter();
        self.lower.retain(|_| *it.next().unwrap());
        let mut it = keep.iter();
        self.upper.retain(|_| *it.next().unwrap());
        for b in &mut self.blocks {
            b.basis = linalg::complement_basis(&b.nulls, 1e-9).0;
        }
        self
    }
}

fn gather(x: &[f64], ids: &[usize]) -> DVector<f64> {
    DVector::from_iterator(ids.len(), ids.iter().map(|&k| x[k]))
}

fn row_dot(row: &[(usize, f64)], x: &[f64]) -> f64 {
    row.iter().map(|&(k, v)| v * x[k]).sum()
}

fn sq(v: &DVector<f64>) -> f64 {
    v.norm_squared()
}

fn run(prog: &Program, params: &AdmmParams) -> Result<(Vec<DMatrix<f64>>, SolveStats)> {
    params.check()?;
    let nvar = prog.nvar;
    let m = prog.rows.len();

    // Row scaling keeps the slack update well conditioned.
    let scale: Vec<f64> = prog.rows.iter().map(|r| {
        let norm = r.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 { 1.0 / norm } else { 1.0 }
    }).collect();
    let rows: Vec<Vec<(usize, f64)>> = prog.rows.iter().zip(&scale).map(|(r, s)| r.iter().map(|&(k, v)| (k, v * s)).collect()).collect();
    let lower: Vec<f64> = prog.lower.iter().zip(&scale).map(|(l, s)| l * s).collect();
    let upper: Vec<f64> = prog.upper.iter().zip(&scale).map(|(u, s)| u * s).collect();
    let c_norm = prog.c.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
    let c_scale = if c_norm > 1.0 { 1.0 / c_norm } else { 1.0 };
    let mut c = vec![0.0; nvar];
    for &(k, v) in &prog.c {
        c[k] = v * c_scale;
    }

    let mut count = vec![0.0_f64; nvar];
    for b in &prog.blocks {
        for &k in &b.ids {
            count[k] += 1.0;
        }
    }
    if count.contains(&0.0) {
        return Err(Error::InvalidInput("a pattern entry is in no block".into()));
    }
    // (D + AᵀA)⁻¹ via Woodbury with the m × m matrix I + A D⁻¹ Aᵀ.
    let mut gram = DMatrix::<f64>::identity(m, m);
    {
        let mut dense_rows = vec![BTreeMap::new(); m];
        for (r, row) in rows.iter().enumerate() {
            for &(k, v) in row {
                dense_rows[r].insert(k, v);
            }
        }
        for a in 0..m {
            for b in a..m {
                let (small, large) = if rows[a].len() <= rows[b].len() { (a, b) } else { (b, a) };
                let v: f64 = rows[small].iter().filter_map(|&(k, va)| dense_rows[large].get(&k).map(|vb| va * vb / count[k])).sum();
                gram[(a, b)] += v;
                if a != b {
                    gram[(b, a)] += v;
                }
            }
        }
    }
    let chol: Cholesky<f64, Dyn> = Cholesky::new(gram).ok_or_else(|| Error::Numerical("constraint system is not positive definite".into()))?;
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let z: Vec<f64> = rhs.iter().zip(&count).map(|(r, d)| r / d).collect();
        let t = DVector::from_iterator(m, rows.iter().map(|r| row_dot(r, &z)));
        let w = chol.solve(&t);
        let mut x = z;
        for (r, row) in rows.iter().enumerate() {
            for &(k, v) in row {
                x[k] -= v * w[r] / count[k];
            }
        }
        x
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut ys: Vec<DVector<f64>> = prog
        .blocks
        .iter()
        .map(|b| {
            let mut start = DMatrix::<f64>::identity(b.dim, b.dim);
            if params.seed != 0 {
                let g = DMatrix::from_fn(b.dim, b.dim, |_, _| rng.random_range(-0.05..0.05));
                start += linalg::symmetrized(&g);
            }
            linalg::svec(&project_with_basis(&start, &b.basis))
        })
        .collect();
    let mut lams: Vec<DVector<f64>> = prog.blocks.iter().map(|b| DVector::zeros(b.ids.len())).collect();
    let mut s = vec![0.0; m];
    let mut mu = vec![0.0; m];
    let mut rho = params.rho;
    let mut stats = SolveStats { rho, ..Default::default() };
    let mut initial = None;

    for it in 1..=params.max_iter {
        let mut rhs: Vec<f64> = c.iter().map(|v| -v / rho).collect();
        for (b, (y, l)) in prog.blocks.iter().zip(ys.iter().zip(&lams)) {
            for (p, &k) in b.ids.iter().enumerate() {
                rhs[k] += y[p] - l[p] / rho;
            }
        }
        for (r, row) in rows.iter().enumerate() {
            let w = s[r] - mu[r] / rho;
            for &(k, v) in row {
                rhs[k] += v * w;
            }
        }
        let x = solve(&rhs);

        let alpha = params.relaxation;
        let hx: Vec<DVector<f64>> = prog.blocks.iter().map(|b| gather(&x, &b.ids)).collect();
        let relaxed: Vec<DVector<f64>> = hx.iter().zip(&ys).map(|(v, y)| v * alpha + y * (1.0 - alpha)).collect();
        let new_ys: Vec<DVector<f64>> = prog
            .blocks
            .par_iter()
            .zip(relaxed.par_iter().zip(lams.par_iter()))
            .map(|(b, (v, l))| {
                let target = v + l / rho;
                linalg::svec(&project_with_basis(&linalg::smat(&target, b.dim), &b.basis))
            })
            .collect();
        let ax: Vec<f64> = rows.iter().map(|r| row_dot(r, &x)).collect();
        let ax_relaxed: Vec<f64> = (0..m).map(|r| alpha * ax[r] + (1.0 - alpha) * s[r]).collect();
        let new_s: Vec<f64> = (0..m).map(|r| (ax_relaxed[r] + mu[r] / rho).clamp(lower[r], upper[r])).collect();

        let (mut rp2, mut rd2, mut hx2, mut y2, mut dual2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (((v, vr), y_new), (y_old, l)) in hx.iter().zip(&relaxed).zip(&new_ys).zip(ys.iter().zip(lams.iter_mut())) {
            rp2 += sq(&(v - y_new));
            rd2 += sq(&(y_new - y_old));
            hx2 += sq(v);
            y2 += sq(y_new);
            *l += (vr - y_new) * rho;
            dual2 += sq(l);
        }
        for r in 0..m {
            let gap = ax[r] - new_s[r];
            rp2 += gap * gap;
            rd2 += (new_s[r] - s[r]).powi(2);
            hx2 += ax[r] * ax[r];
            y2 += new_s[r] * new_s[r];
            mu[r] += rho * (ax_relaxed[r] - new_s[r]);
            dual2 += mu[r] * mu[r];
        }
        ys = new_ys;
        s = new_s;
        let rp = rp2.sqrt();
        let rd = rho * rd2.sqrt();
        stats.iterations = it;
        stats.primal_residual = rp;
        stats.dual_residual = rd;
        stats.rho = rho;

        if !rp.is_finite() || !rd.is_finite() {
            return Err(Error::Diverged { stats: Box::new(stats) });
        }
        let r0 = *initial.get_or_insert(rp.max(rd).max(1.0));
        if rp.max(rd) > 1e6 * r0 || dual2.sqrt() > 1e12 {
            return Err(Error::Diverged { stats: Box::new(stats) });
        }
        let eps_p = params.tol_primal * (1.0 + hx2.sqrt().max(y2.sqrt()));
        let eps_d = params.tol_dual * (1.0 + dual2.sqrt());
        if rp <= eps_p && rd <= eps_d {
            stats.converged = true;
            break;
        }
        // rho is frozen after a warm-up window; endless rescaling can stall
        // the iteration on degenerate problems.
        if params.adaptive_rho && it % 10 == 0 && it <= RHO_WINDOW {
            let (np, nd) = (rp / eps_p, rd / eps_d);
            if np > 10.0 * nd {
                rho *= 2.0;
            } else if nd > 10.0 * np {
                rho /= 2.0;
            }
        }
        if it % 500 == 0 {
            log::debug!("admm iteration {it}: primal {rp:e} dual {rd:e} rho {rho}");
        }
    }
    let blocks: Vec<DMatrix<f64>> = prog.blocks.iter().zip(&ys).map(|(b, y)| linalg::smat(y, b.dim)).collect();
    stats.block_ranks = blocks.iter().map(|y| linalg::numerical_rank(y, RANK_TOL)).collect();
    Ok((blocks, stats))
}

/// Solves the block form. Returns `NotConverged` (carrying stats) if the
/// tolerances are not met within `max_iter`.
pub fn admm_solve(bs: &BlockSdp, params: &AdmmParams) -> Result<BlockSolution> {
    let prog = Program::from_blocks(bs);
    let (blocks, mut stats) = run(&prog, params)?;
    stats.objective = bs.eval_all(&blocks)[0];
    if !stats.converged {
        return Err(Error::NotConverged { stats: Box::new(stats) });
    }
    Ok(BlockSolution { blocks, stats })
}

/// Solves the original problem as one dense block; a cross-check for the
/// converted pipeline on small instances.
pub fn dense_reference_solve(p: &SplrSdp, params: &AdmmParams) -> Result<(FactoredSolution, SolveStats)> {
    if p.n > DENSE_LIMIT {
        return Err(Error::TooLarge { n: p.n, limit: DENSE_LIMIT });
    }
    let prog = Program::from_dense(p)?;
    let (blocks, mut stats) = run(&prog, params)?;
    let x = FactoredSolution::from_psd(&blocks[0], 1e-9)?;
    stats.objective = p.objective_value(&x)?;
    if !stats.converged {
        return Err(Error::NotConverged { stats: Box::new(stats) });
    }
    Ok((x, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversion::convert;
    use crate::extension::build_extension;
    use crate::graph::{Graph, TreeDecomposition};
    use crate::instances;
    use crate::model::{Constraint, SparseSymMatrix, SplrMatrix};

    #[test]
    fn projection_without_null_vectors_clamps() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let p = project_null_psd(&m, &DMatrix::zeros(2, 0));
        assert!(linalg::max_abs(&(p - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]))) < 1e-14);
    }

    #[test]
    fn projection_kills_null_vector() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let p = project_null_psd(&DMatrix::identity(3, 3), &e1);
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0]));
        assert!(linalg::max_abs(&(p - want)) < 1e-14);
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let d = 5;
            let mut rand_sym = || linalg::symmetrized(&DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0)));
            let (m1, m2) = (rand_sym(), rand_sym());
            let a = DMatrix::from_fn(d, 2, |i, j| ((i + 2 * j) % 3) as f64 - 1.0);
            let p1 = project_null_psd(&m1, &a);
            let p2 = project_null_psd(&m2, &a);
            assert!(linalg::max_abs(&(&p1 * &a)) < 1e-12);
            assert!(linalg::max_abs(&(project_null_psd(&p1, &a) - &p1)) < 1e-12);
            assert!((&p1 - &p2).norm() <= (&m1 - &m2).norm() + 1e-12);
        }
    }

    #[test]
    fn trace_one_minimum_is_smallest_eigenvalue() {
        let c = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let n = 3;
        let obj = SparseSymMatrix::project_dense(&c, &Graph::complete(n));
        let trace = Constraint::equality(SplrMatrix::sparse_only(SparseSymMatrix::identity(n), 0), 1.0);
        let p = SplrSdp::new(Graph::complete(n), SplrMatrix::sparse_only(obj, 0), vec![trace], DMatrix::zeros(n, 0)).unwrap();
        let (_, stats) = dense_reference_solve(&p, &AdmmParams::default()).unwrap();
        let lmin = 2.0 - SQRT_2;
        assert!((stats.objective - lmin).abs() < 1e-5, "{} vs {lmin}", stats.objective);
    }

    #[test]
    fn simex_ten_is_feasible_after_conversion() {
        let p = instances::gen_simex(10, &[1.0; 10], 10.0).unwrap();
        let td = TreeDecomposition::path((0..10).map(|i| vec![i]).collect()).unwrap().root_binary().unwrap();
        let bs = convert(&build_extension(&p, &td).unwrap()).unwrap();
        let sol = admm_solve(&bs, &AdmmParams::default()).unwrap();
        assert!(bs.max_violation(&sol.blocks) < 1e-6);
        assert!(bs.max_overlap_gap(&sol.blocks) < 1e-6);
        assert!(sol.stats.objective.abs() < 1e-9);
    }

    #[test]
    fn lb_small_three_has_full_rank() {
        let p = instances::gen_lb_small(3).unwrap();
        let (x, stats) = dense_reference_solve(&p, &AdmmParams::default()).unwrap();
        assert!(p.max_violation(&x).unwrap() < 1e-6);
        assert_eq!(x.rank(), 4);
        assert_eq!(stats.block_ranks, vec![4]);
    }

    #[test]
    fn zero_target_psd_rows_move_into_projection() {
        let p = instances::gen_min_bisection(&Graph::path(5)).unwrap();
        let prog = Program::from_dense(&p).unwrap();
        assert_eq!(prog.rows.len(), 5);
        let b = &prog.blocks[0];
        assert_eq!(b.basis.ncols(), 4);
        let e = DVector::from_element(5, 1.0);
        assert!((b.basis.transpose() * e).norm() < 1e-12);
    }

    #[test]
    fn negative_target_is_flagged() {
        let p = instances::gen_simex(3, &[1.0, 1.0, 1.0], -1.0).unwrap();
        let params = AdmmParams { max_iter: 2000, ..Default::default() };
        let err = dense_reference_solve(&p, &params).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. } | Error::NotConverged { .. }), "{err:?}");
    }
}
