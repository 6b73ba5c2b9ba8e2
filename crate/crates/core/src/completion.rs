//! PSD completion over a tree decomposition, Barvinok-Pataki style rank
//! reduction on affine slices, and low-rank recovery from block solutions.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conversion::BlockSdp;
use crate::error::{Error, Result};
use crate::extension::ExtendedSdp;
use crate::graph::TreeDecomposition;
use crate::linalg::{self, RANK_TOL};
use crate::model::FactoredSolution;

const EXACT_FACTOR_TOL: f64 = 1e-13;

/// Symmetric matrix with only some entries specified (stored with `i <= j`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PartialMatrix {
    dim: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl PartialMatrix {
    pub fn new(dim: usize) -> Self {
        PartialMatrix { dim, entries: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries.insert((i.min(j), i.max(j)), v);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries.get(&(i.min(j), i.max(j))).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &f64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Principal submatrix on `idx`, if every entry is specified.
    pub fn submatrix(&self, idx: &[usize]) -> Option<DMatrix<f64>> {
        let k = idx.len();
        let mut m = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let v = self.get(idx[a], idx[b])?;
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        Some(m)
    }
}

fn check_psd(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    let (values, _) = linalg::sym_eigen_desc(m);
    if let (Some(&top), Some(&bottom)) = (values.iter().next(), values.iter().next_back()) {
        if bottom < -tol * top.max(1.0) {
            return Err(Error::NotPsd { min_eigenvalue: bottom });
        }
    }
    Ok(())
}

/// Completes PSD blocks on the bags of a rooted decomposition to a factor of
/// width equal to the largest block rank.
///
/// Blocks are factored, padded to a common width, and glued from the root
/// down: each child factor is rotated onto the rows its parent already fixed.
/// `blocks[t]` is indexed by the sorted bag of node `t`. Indices outside all
/// bags get zero rows.
pub fn complete_from_blocks(td: &TreeDecomposition, blocks: &BTreeMap<usize, DMatrix<f64>>, dim: usize, rank_tol: f64) -> Result<FactoredSolution> {
    let order = td.bfs_order()?;
    let mut factors = BTreeMap::new();
    for &t in &order {
        let y = blocks.get(&t).ok_or_else(|| Error::InvalidInput(format!("no block for node {}", t + 1)))?;
        let bag = td.bag(t);
        if y.nrows() != bag.len() || y.ncols() != bag.len() {
            return Err(Error::DimensionMismatch { expected: bag.len(), found: y.nrows() });
        }
        if let Some(&bad) = bag.iter().find(|&&i| i >= dim) {
            return Err(Error::IndexOutOfRange { index: bad + 1, limit: dim });
        }
        check_psd(y, 1e-6)?;
        factors.insert(t, linalg::psd_factor(y, rank_tol));
    }
    let r = factors.values().map(|f: &DMatrix<f64>| f.ncols()).max().unwrap_or(0);
    let pad = |f: &DMatrix<f64>| f.clone().resize_horizontally(r, 0.0);

    let mut out = DMatrix::zeros(dim, r);
    let mut assigned = vec![false; dim];
    let scale = blocks.values().map(linalg::max_abs).fold(1.0, f64::max);
    for &t in &order {
        let f = pad(&factors[&t]);
        let bag = td.bag(t);
        let (shared, fresh): (Vec<usize>, Vec<usize>) = (0..bag.len()).partition(|&a| assigned[bag[a]]);
        let rot = if shared.is_empty() {
            DMatrix::identity(r, r)
        } else {
            let g = f.select_rows(&shared);
            let target = DMatrix::from_fn(shared.len(), r, |a, c| out[(bag[shared[a]], c)]);
            let q = linalg::procrustes(&g, &target)?;
            let gap = linalg::max_abs(&(&g * &q - &target));
            let tol = 1e-6 * scale.sqrt();
            if gap > tol {
                return Err(Error::AssemblyConflict { max_discrepancy: gap, tol });
            }
            q
        };
        for &a in &fresh {
            let row = f.row(a) * &rot;
            out.set_row(bag[a], &row);
            assigned[bag[a]] = true;
        }
    }
    Ok(FactoredSolution::new(out))
}

/// Minimum-rank PSD completion of a partial matrix whose specified entries
/// cover every bag of `td`. An unrooted `td` is rooted at its first node.
pub fn psd_complete_min_rank(pm: &PartialMatrix, td: &TreeDecomposition) -> Result<FactoredSolution> {
    let rooted;
    let td = match td.root() {
        Some(_) => td,
        None => {
            let first = td.nodes().next().ok_or_else(|| Error::InvalidDecomposition("empty tree".into()))?;
            rooted = td.rooted_at(first)?;
            &rooted
        }
    };
    let blocks = td
        .nodes()
        .map(|t| {
            pm.submatrix(td.bag(t))
                .map(|m| (t, m))
                .ok_or_else(|| Error::InvalidInput(format!("bag of node {} is not fully specified", t + 1)))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    // Specified entries are exact, so only rounding-level eigenvalues are cut.
    complete_from_blocks(td, &blocks, pm.dim(), EXACT_FACTOR_TOL)
}

/// Largest `r` with `r(r+1)/2 <= q`.
pub fn bp_bound(q: usize) -> usize {
    let mut r = 0;
    while (r + 1) * (r + 2) / 2 <= q {
        r += 1;
    }
    r
}

/// Upper bound on the rank needed inside the three-way overlap slice of a
/// block with two children.
pub fn phi_upper(ell: usize) -> usize {
    bp_bound(3 * ell * (ell + 1) / 2)
}

/// `{X ⪰ 0 : ⟨B_j, X⟩ = b_j}` with a feasible starting point.
#[derive(Clone, Debug)]
pub struct AffineSlice {
    pub dim: usize,
    pub constraints: Vec<(DMatrix<f64>, f64)>,
    pub start: FactoredSolution,
}

impl AffineSlice {
    pub fn max_residual(&self, r: &DMatrix<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|(b, v)| {
                let rb = b * r;
                ((r.transpose() * rb).trace() - v).abs() / (1.0 + v.abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Moves from the start point to an extreme point of the slice by repeatedly
/// stepping along a direction that keeps all constraints and kills one
/// eigenvalue. The result has rank at most `bp_bound(#constraints)`.
pub fn rank_reduce_affine(slice: &AffineSlice, tol: f64) -> Result<FactoredSolution> {
    if slice.start.dim() != slice.dim {
        return Err(Error::DimensionMismatch { expected: slice.dim, found: slice.start.dim() });
    }
    let start_gap = slice.max_residual(&slice.start.factor);
    if start_gap > tol {
        return Err(Error::Infeasible { residual: start_gap, tol });
    }
    let mut r = linalg::psd_factor(&slice.start.to_dense(), 1e-13);
    loop {
        let w = r.ncols();
        if w == 0 {
            break;
        }
        let cols = linalg::svec_len(w);
        let q = slice.constraints.len();
        let mut m = DMatrix::zeros(q.max(cols), cols);
        for (j, (b, _)) in slice.constraints.iter().enumerate() {
            let s = linalg::svec(&(r.transpose() * b * &r));
            m.set_row(j, &s.transpose());
        }
        let d = linalg::svd(&m)?;
        let (smin, smax) = (d.s[cols - 1], d.s[0]);
        if smax > 0.0 && smin > 1e-10 * smax {
            break;
        }
        let dir: DVector<f64> = d.v.column(cols - 1).into_owned();
        let mut delta = linalg::smat(&dir, w);
        let (mut mu, mut vecs) = linalg::sym_eigen_desc(&delta);
        // Step along the sign whose negative end is largest so t stays
        // bounded; a tiny |μ_min| would amplify rounding in the direction.
        if -mu[w - 1] < mu[0] {
            delta = -delta;
            let e = linalg::sym_eigen_desc(&delta);
            mu = e.0;
            vecs = e.1;
        }
        let t = -1.0 / mu[w - 1];
        let keep: Vec<usize> = (0..w).filter(|&i| 1.0 + t * mu[i] > 1e-12).collect();
        let rv = &r * vecs;
        let mut next = DMatrix::zeros(slice.dim, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            next.set_column(c, &(rv.column(i) * (1.0 + t * mu[i]).sqrt()));
        }
        r = next;
    }
    let gap = slice.max_residual(&r);
    if gap > tol.max(10.0 * start_gap) {
        return Err(Error::Infeasible { residual: gap, tol });
    }
    Ok(FactoredSolution::new(r))
}

fn qr_split(ri: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    // ri = R' Q with R' square and Q having orthonormal rows.
    let qr = ri.transpose().qr();
    (qr.r().transpose(), qr.q().transpose())
}

/// Reduces a block with two children without touching its `V_t` part or the
/// diagonal `ℓ × ℓ` blocks. `y` is ordered `(V_t, U_1, U_2, U_t)` and must
/// satisfy `Uᵀ y U ≈ 0` for `U = [v; I; I; -I]`. The result keeps the same
/// diagonal blocks and `V_t` coupling, still satisfies the null condition and
/// has rank at most `rank(y[V_t, V_t]) + phi_upper(ℓ)`.
pub fn reduce_block(y: &DMatrix<f64>, v: &DMatrix<f64>, ell: usize, tol: f64) -> Result<DMatrix<f64>> {
    let dim = y.nrows();
    if dim < 3 * ell || y.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: 3 * ell, found: dim });
    }
    let p = dim - 3 * ell;
    if v.nrows() != p || v.ncols() != ell {
        return Err(Error::DimensionMismatch { expected: p, found: v.nrows() });
    }
    let y = linalg::symmetrized(y);
    let b = y.view((0, 0), (p, p)).into_owned();
    let c = y.view((p, 0), (3 * ell, p)).into_owned();
    let m = y.view((p, p), (3 * ell, 3 * ell)).into_owned();
    let b_pinv = linalg::pinv_psd(&b, tol);
    let k = &c * &b_pinv;
    let schur = linalg::symmetrized(&(&m - &k * c.transpose()));

    let mut f = linalg::psd_factor(&schur, 1e-12);
    if f.ncols() < ell {
        f = f.resize_horizontally(ell, 0.0);
    }
    let r1 = f.rows(0, ell).into_owned();
    let r2 = f.rows(ell, ell).into_owned();
    let (r1p, q1) = qr_split(&r1);
    let (r2p, q2) = qr_split(&r2);
    let mut h0 = DMatrix::zeros(2 * ell, q1.ncols());
    h0.rows_mut(0, ell).copy_from(&q1);
    h0.rows_mut(ell, ell).copy_from(&q2);

    let sum = &r1 + &r2;
    let m3 = &sum * sum.transpose();
    let mut pmat = DMatrix::zeros(ell, 2 * ell);
    pmat.columns_mut(0, ell).copy_from(&r1p);
    pmat.columns_mut(ell, ell).copy_from(&r2p);
    let unit = |n: usize, i: usize, j: usize| {
        let mut e = DMatrix::zeros(n, n);
        e[(i, j)] += 0.5;
        e[(j, i)] += 0.5;
        e
    };
    let mut constraints = Vec::new();
    for off in [0, ell] {
        for i in 0..ell {
            for j in i..ell {
                constraints.push((unit(2 * ell, off + i, off + j), if i == j { 1.0 } else { 0.0 }));
            }
        }
    }
    for i in 0..ell {
        for j in i..ell {
            let e = unit(ell, i, j);
            constraints.push((pmat.transpose() * e * &pmat, m3[(i, j)]));
        }
    }
    let slice = AffineSlice { dim: 2 * ell, constraints, start: FactoredSolution::new(h0) };
    let h = rank_reduce_affine(&slice, 1e-7)?.factor;
    let z1 = &r1p * h.rows(0, ell);
    let z2 = &r2p * h.rows(ell, ell);
    let z3 = &z1 + &z2;

    let fb = linalg::psd_factor(&b, tol);
    let (rb, rz) = (fb.ncols(), h.ncols());
    let mut out = DMatrix::zeros(dim, rb + rz);
    out.view_mut((0, 0), (p, rb)).copy_from(&fb);
    out.view_mut((p, 0), (3 * ell, rb)).copy_from(&(&k * &fb));
    out.view_mut((p, rb), (ell, rz)).copy_from(&z1);
    out.view_mut((p + ell, rb), (ell, rz)).copy_from(&z2);
    out.view_mut((p + 2 * ell, rb), (ell, rz)).copy_from(&z3);
    Ok(&out * out.transpose())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryMode {
    /// Completion only; blocks with two children are left as solved.
    Path,
    /// Rank-reduce blocks with two children before completing.
    Tree,
}

#[derive(Clone, Copy, Debug)]
pub struct RecoverOptions {
    pub mode: RecoveryMode,
    /// Relative tolerance on overlap agreement between blocks.
    pub overlap_tol: f64,
    /// Relative eigenvalue cutoff when factoring blocks.
    pub rank_tol: f64,
}

impl Default for RecoverOptions {
    fn default() -> Self {
        RecoverOptions { mode: RecoveryMode::Tree, overlap_tol: 1e-5, rank_tol: RANK_TOL }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Recovery {
    pub solution: FactoredSolution,
    pub rank: usize,
    pub bound: usize,
    pub spectrum: Vec<f64>,
    pub block_ranks: Vec<usize>,
    pub objective: f64,
    pub max_violation: f64,
}

/// Rank guaranteed by the recovery for the given mode.
pub fn rank_bound(ext: &ExtendedSdp, mode: RecoveryMode) -> usize {
    let (w, ell) = (ext.width_before(), ext.ell());
    let path = w + ell + 1;
    match mode {
        RecoveryMode::Path if ext.is_path() => path,
        RecoveryMode::Path => w + 2 * ell + 1,
        RecoveryMode::Tree if ext.is_path() => path,
        RecoveryMode::Tree => w + phi_upper(ell) + 1,
    }
}

/// Turns block solutions of the converted problem into a low-rank solution
/// of the original problem.
pub fn recover_low_rank(ext: &ExtendedSdp, bs: &BlockSdp, ys: &[DMatrix<f64>], opts: &RecoverOptions) -> Result<Recovery> {
    if ys.len() != bs.blocks.len() {
        return Err(Error::DimensionMismatch { expected: bs.blocks.len(), found: ys.len() });
    }
    let ell = ext.ell();
    let zs = bs
        .blocks
        .par_iter()
        .enumerate()
        .map(|(b, blk)| {
            let two_children = bs.decomposition.children(b).len() == 2;
            if opts.mode == RecoveryMode::Path || !two_children || ell == 0 {
                return Ok(ys[b].clone());
            }
            let p = blk.dim() - 3 * ell;
            let tail = blk.null_vectors.rows(p, 3 * ell);
            let expected = DMatrix::from_fn(3 * ell, ell, |i, h| match (i / ell, i % ell == h) {
                (0 | 1, true) => 1.0,
                (2, true) => -1.0,
                _ => 0.0,
            });
            if tail != expected {
                return Err(Error::InvalidDecomposition(format!("block {} is not ordered as (V, U1, U2, U)", blk.node + 1)));
            }
            reduce_block(&ys[b], &blk.null_vectors.rows(0, p).into_owned(), ell, 1e-10)
        })
        .collect::<Result<Vec<_>>>()?;
    bs.assemble(&zs, opts.overlap_tol)?;
    let block_map: BTreeMap<usize, DMatrix<f64>> = zs.iter().cloned().enumerate().collect();
    let lifted = complete_from_blocks(&bs.decomposition, &block_map, bs.n_hat, opts.rank_tol)?;
    let solution = lifted.restrict(&ext.i_set())?;
    let p = &ext.problem;
    Ok(Recovery {
        rank: solution.rank(),
        bound: rank_bound(ext, opts.mode),
        spectrum: solution.spectrum(),
        block_ranks: zs.iter().map(|z| linalg::numerical_rank(z, opts.rank_tol)).collect(),
        objective: p.objective_value(&solution)?,
        max_violation: p.max_violation(&solution)?,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_factor(rng: &mut ChaCha8Rng, n: usize, r: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn bp_bound_matches_closed_form() {
        for q in 0..500usize {
            let closed = (((8 * q + 1) as f64).sqrt() - 1.0) / 2.0;
            assert_eq!(bp_bound(q), closed.floor() as usize, "q = {q}");
        }
    }

    #[test]
    fn phi_upper_small_values() {
        assert_eq!([1, 2, 3].map(phi_upper), [2, 3, 5]);
        for ell in 1..30usize {
            let closed = ((12.0 * (ell * (ell + 1)) as f64 + 1.0).sqrt() - 1.0) / 2.0;
            assert_eq!(phi_upper(ell), closed.floor() as usize);
            assert!(phi_upper(ell) > ell);
        }
    }

    #[test]
    fn completion_matches_specified_entries_at_max_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let td = TreeDecomposition::path(vec![vec![0, 1, 2], vec![1, 2, 3], vec![3, 4]]).unwrap().rooted_at(0).unwrap();
        let x = random_factor(&mut rng, 5, 2);
        let full = &x * x.transpose();
        let mut pm = PartialMatrix::new(5);
        for t in td.nodes() {
            for &i in td.bag(t) {
                for &j in td.bag(t) {
                    pm.set(i, j, full[(i, j)]);
                }
            }
        }
        let done = psd_complete_min_rank(&pm, &td).unwrap();
        assert_eq!(done.rank(), 2);
        let d = done.to_dense();
        for (&(i, j), &v) in pm.entries() {
            assert!((d[(i, j)] - v).abs() < 1e-10);
        }
    }

    #[test]
    fn inconsistent_overlap_is_rejected() {
        let td = TreeDecomposition::path(vec![vec![0, 1], vec![1, 2]]).unwrap().rooted_at(0).unwrap();
        let mut blocks = BTreeMap::new();
        blocks.insert(0, DMatrix::identity(2, 2));
        blocks.insert(1, DMatrix::identity(2, 2) * 2.0);
        assert!(matches!(complete_from_blocks(&td, &blocks, 3, RANK_TOL), Err(Error::AssemblyConflict { .. })));
    }

    #[test]
    fn rank_reduction_keeps_constraints_and_meets_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (n, q) in [(6, 3), (8, 10), (5, 1)] {
            let start = random_factor(&mut rng, n, n);
            let x0 = &start * start.transpose();
            let constraints: Vec<(DMatrix<f64>, f64)> = (0..q)
                .map(|_| {
                    let a = random_factor(&mut rng, n, n);
                    let b = linalg::symmetrized(&a);
                    let v = (&b * &x0).trace();
                    (b, v)
                })
                .collect();
            let slice = AffineSlice { dim: n, constraints, start: FactoredSolution::new(start) };
            let out = rank_reduce_affine(&slice, 1e-8).unwrap();
            assert!(out.rank() <= bp_bound(q), "n={n} q={q} rank={}", out.rank());
            assert!(slice.max_residual(&out.factor) < 1e-8);
        }
    }

    #[test]
    fn infeasible_start_is_reported() {
        let slice = AffineSlice { dim: 2, constraints: vec![(DMatrix::identity(2, 2), 5.0)], start: FactoredSolution::identity(2) };
        assert!(matches!(rank_reduce_affine(&slice, 1e-8), Err(Error::Infeasible { .. })));
    }

    /// Random block with the null structure `[v; I; I; -I]`.
    fn null_block(rng: &mut ChaCha8Rng, p: usize, ell: usize, rank: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let v = random_factor(rng, p, ell);
        // Rows of the U parts solve R_1 + R_2 - R_3 = -vᵀ R_V.
        let rv = random_factor(rng, p, rank);
        let r1 = random_factor(rng, ell, rank);
        let r2 = random_factor(rng, ell, rank);
        let r3 = &r1 + &r2 + v.transpose() * &rv;
        let mut r = DMatrix::zeros(p + 3 * ell, rank);
        r.rows_mut(0, p).copy_from(&rv);
        r.rows_mut(p, ell).copy_from(&r1);
        r.rows_mut(p + ell, ell).copy_from(&r2);
        r.rows_mut(p + 2 * ell, ell).copy_from(&r3);
        (&r * r.transpose(), v)
    }

    #[test]
    fn reduce_block_preserves_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (p, ell) in [(3, 2), (2, 1), (4, 3), (1, 2)] {
            let (y, v) = null_block(&mut rng, p, ell, p + 3 * ell);
            let out = reduce_block(&y, &v, ell, 1e-10).unwrap();
            let mut u = DMatrix::zeros(p + 3 * ell, ell);
            u.rows_mut(0, p).copy_from(&v);
            for h in 0..ell {
                u[(p + h, h)] = 1.0;
                u[(p + ell + h, h)] = 1.0;
                u[(p + 2 * ell + h, h)] = -1.0;
            }
            let scale = linalg::max_abs(&y);
            assert!(linalg::max_abs(&(u.transpose() * &out * &u)) < 1e-8 * scale);
            assert!(linalg::max_abs(&(out.rows(0, p) - y.rows(0, p))) < 1e-8 * scale);
            for blk in 0..3 {
                let o = p + blk * ell;
                let d = out.view((o, o), (ell, ell)) - y.view((o, o), (ell, ell));
                assert!(linalg::max_abs(&d.into_owned()) < 1e-8 * scale);
            }
            let rank = linalg::numerical_rank(&out, RANK_TOL);
            assert!(rank <= p + phi_upper(ell), "p={p} ell={ell} rank={rank}");
            assert!(linalg::sym_eigen_desc(&out).0.iter().all(|&l| l > -1e-9 * scale));
        }
    }
}
