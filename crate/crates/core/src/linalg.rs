//! Dense symmetric linear-algebra helpers shared by the solver and the
//! completion code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative singular-value threshold used when reporting numerical rank.
pub const RANK_TOL: f64 = 1e-8;

/// Relative threshold for pseudo-inverses.
pub const PINV_TOL: f64 = 1e-10;

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order (columns of the returned matrix follow the same order).
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrized(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Factor `R` with `R Rᵀ ≈ m`, keeping eigenvalues above `rel_tol · λ_max`.
pub fn psd_factor(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let (values, vectors) = sym_eigen_desc(m);
    let lmax = values.iter().copied().fold(0.0_f64, f64::max);
    if lmax <= 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let keep = values.iter().take_while(|&&v| v > rel_tol * lmax).count();
    let mut r = DMatrix::zeros(n, keep);
    for j in 0..keep {
        let s = values[j].sqrt();
        for i in 0..n {
            r[(i, j)] = vectors[(i, j)] * s;
        }
    }
    r
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix.
pub fn pinv_psd(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let (values, vectors) = sym_eigen_desc(m);
    let lmax = values.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    let mut out = DMatrix::zeros(n, n);
    if lmax == 0.0 {
        return out;
    }
    for j in 0..n {
        if values[j].abs() > rel_tol * lmax {
            let v = vectors.column(j);
            out += (v * v.transpose()) / values[j];
        }
    }
    out
}

/// Projection onto the PSD cone by eigenvalue clamping.
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let (values, vectors) = sym_eigen_desc(m);
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        if values[j] > 0.0 {
            let v = vectors.column(j);
            out += (v * v.transpose()) * values[j];
        }
    }
    symmetrized(&out)
}

/// Thin SVD `m = U diag(s) Vᵀ` with `s` descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    /// Column indices whose singular value exceeds `rel_tol · σ_max`.
    pub fn above(&self, rel_tol: f64) -> Vec<usize> {
        let top = self.s.iter().copied().fold(0.0, f64::max);
        (0..self.s.len()).filter(|&i| top > 0.0 && self.s[i] > rel_tol * top).collect()
    }
}

// nalgebra's SVD returns wrong factors for some tall inputs, so this goes
// through faer.
pub fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok(Svd { u: DMatrix::zeros(r, 0), s: DVector::zeros(0), v: DMatrix::zeros(c, 0) });
    }
    let f = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
    let d = f.thin_svd().map_err(|e| Error::Numerical(format!("svd: {e:?}")))?;
    let (u, s, v) = (d.U(), d.S().column_vector(), d.V());
    Ok(Svd {
        u: DMatrix::from_fn(r, k, |i, j| u[(i, j)]),
        s: DVector::from_fn(k, |i, _| s[i]),
        v: DMatrix::from_fn(c, k, |i, j| v[(i, j)]),
    })
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let f = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let mut s = f.singular_values().unwrap_or_else(|_| svd(m).map(|d| d.s.iter().copied().collect()).unwrap_or_default());
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    count_above(&singular_values(m), rel_tol)
}

/// Spectrum of `R Rᵀ` (descending), computed from the singular values of `R`.
pub fn gram_spectrum(r: &DMatrix<f64>) -> Vec<f64> {
    singular_values(r).into_iter().map(|s| s * s).collect()
}

/// Numerical rank of `R Rᵀ` without forming it.
pub fn gram_rank(r: &DMatrix<f64>, rel_tol: f64) -> usize {
    count_above(&gram_spectrum(r), rel_tol)
}

fn count_above(desc: &[f64], rel_tol: f64) -> usize {
    match desc.first() {
        Some(&top) if top > 0.0 => desc.iter().filter(|&&s| s > rel_tol * top).count(),
        _ => 0,
    }
}

/// Semi-orthogonal `Q` (rows orthonormal, `Q Qᵀ = I`) maximising
/// `tr(Qᵀ Gᵀ T)`; when `G Gᵀ = T Tᵀ` this gives `G Q = T` exactly.
///
/// Requires `g.ncols() <= t.ncols()`.
pub fn procrustes(g: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rg, rt) = (g.ncols(), t.ncols());
    debug_assert!(rg <= rt);
    if rg == 0 {
        return Ok(DMatrix::zeros(0, rt));
    }
    let d = svd(&(g.transpose() * t))?;
    // Singular vectors of zero singular values are arbitrary, so only the
    // nonzero pairs are kept and the complements are rebuilt.
    let live = d.above(1e-12);
    let (u1, v1) = (d.u.select_columns(&live), d.v.select_columns(&live));
    let (u0, _) = complement_basis(&u1, 1e-10);
    let (v0, _) = complement_basis(&v1, 1e-10);
    Ok(&u1 * v1.transpose() + &u0 * v0.columns(0, u0.ncols()).transpose())
}

/// Symmetric-vector length for an `r × r` matrix.
pub fn svec_len(r: usize) -> usize {
    r * (r + 1) / 2
}

/// Upper-triangle vectorisation with off-diagonals scaled by `√2`, so that
/// `svec(A)·svec(B) = ⟨A, B⟩`.
pub fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let r = m.nrows();
    let mut out = DVector::zeros(svec_len(r));
    let mut k = 0;
    for j in 0..r {
        for i in 0..=j {
            out[k] = if i == j {
                m[(i, i)]
            } else {
                std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)])
            };
            k += 1;
        }
    }
    out
}

pub fn smat(v: &DVector<f64>, r: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(r, r);
    let mut k = 0;
    for j in 0..r {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

/// Orthonormal basis of the orthogonal complement of the span of `vectors`
/// (given as columns) in `ℝᵈ`, plus the numerical rank of `vectors`.
pub fn complement_basis(vectors: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let d = vectors.nrows();
    if vectors.ncols() == 0 {
        return (DMatrix::identity(d, d), 0);
    }
    // Rank from singular values; squaring them would sink small ones below
    // the eigen-solver's noise floor.
    let rank = numerical_rank(vectors, rel_tol);
    let (_, basis) = sym_eigen_desc(&(vectors * vectors.transpose()));
    (basis.columns(rank, d - rank).into_owned(), rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_inner_product_matches_frobenius() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0]);
        let direct: f64 = a.component_mul(&b).sum();
        assert!((svec(&a).dot(&svec(&b)) - direct).abs() < 1e-12);
        assert!((smat(&svec(&a), 3) - &a).abs().max() < 1e-14);
    }

    #[test]
    fn procrustes_aligns_equal_gram_factors() {
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 2.0, -1.0, 1.0]);
        let rot = DMatrix::from_row_slice(2, 4, &[0.6, 0.8, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let t = &g * &rot;
        let q = procrustes(&g, &t).unwrap();
        assert!((&g * &q - &t).abs().max() < 1e-12);
        assert!((&q * q.transpose() - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn procrustes_with_rank_deficient_overlap() {
        // Two shared rows in a width-5 factor; the cross matrix has rank 2.
        let g = DMatrix::from_row_slice(2, 5, &[0.3, -1.1, 0.4, 0.0, 0.2, 0.9, 0.5, -0.7, 0.1, 0.0]);
        let rot = DMatrix::from_fn(5, 5, |i, j| ((i * 5 + j) as f64).sin()).qr().q();
        let t = &g * &rot;
        let q = procrustes(&g, &t).unwrap();
        assert!((&g * &q - &t).abs().max() < 1e-12);
        assert!((&q * q.transpose() - DMatrix::identity(5, 5)).abs().max() < 1e-12);
    }

    #[test]
    fn svd_recomposes_tall_cross_matrix() {
        // A 4x3 input that nalgebra's SVD gets wrong.
        let g = DMatrix::from_column_slice(3, 4, &[1.3275203454863174, -1.24138842385367, 0.14432199549301147, -0.4639024111675547, -0.498677234731513, -1.4616669957432884, -0.20971362525463264, -0.6572252455274297, 0.009834805764297475, -0.038763039940399195, 0.054526311162533224, -0.0396449994081064]);
        let t = DMatrix::from_column_slice(3, 3, &[-1.3382727831152803, 1.2287321567956964, -0.3860075011627783, -0.3196459335323091, -0.7860758256809253, -1.3940226290763176, 0.36034778728220734, 0.31135900247334597, -0.2581991728879192]);
        let m = g.transpose() * t;
        let d = svd(&m).unwrap();
        let back = &d.u * DMatrix::from_diagonal(&d.s) * d.v.transpose();
        assert!(max_abs(&(back - &m)) < 1e-13);
        assert!(max_abs(&(d.u.transpose() * &d.u - DMatrix::identity(3, 3))) < 1e-13);
        assert!(d.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn factor_and_rank_of_rank_one() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = &v * v.transpose();
        let r = psd_factor(&m, RANK_TOL);
        assert_eq!(r.ncols(), 1);
        assert!((&r * r.transpose() - &m).abs().max() < 1e-12);
        assert_eq!(numerical_rank(&m, RANK_TOL), 1);
        assert_eq!(gram_rank(&r, RANK_TOL), 1);
    }

    #[test]
    fn complement_is_orthogonal_to_span() {
        let v = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let (q, rank) = complement_basis(&v, 1e-12);
        assert_eq!(rank, 1);
        assert_eq!(q.ncols(), 2);
        assert!((v.transpose() * &q).abs().max() < 1e-14);
    }

    #[test]
    fn complement_of_dense_vector_has_full_size() {
        let v = DMatrix::from_row_slice(5, 1, &[0.5, 0.5, 0.5, 0.5, -1.0]);
        let (q, rank) = complement_basis(&v, 1e-10);
        assert_eq!((rank, q.ncols()), (1, 4));
        assert!((v.transpose() * &q).abs().max() < 1e-14);
    }
}
