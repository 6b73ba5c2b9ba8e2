//! Instance generators: the small worked example, min-bisection and binary
//! quadratic relaxations, the rank witness slice, and lower-bound families.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::completion::AffineSlice;
use crate::error::{Error, Result};
use crate::graph::{Graph, TreeDecomposition};
use crate::linalg;
use crate::model::{Constraint, FactoredSolution, SparseSymMatrix, SplrMatrix, SplrSdp};

fn entry(n: usize, i: usize, j: usize) -> SparseSymMatrix {
    // Coefficient so that ⟨E, X⟩ = X[i, j].
    let v = if i == j { 1.0 } else { 0.5 };
    SparseSymMatrix::from_entries(n, [(i.min(j), i.max(j), v)]).expect("valid entry")
}

/// `S` with `⟨S, M⟩ = M[i, j]` for symmetric `M`.
fn core_entry(ell: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(ell, ell);
    if i == j {
        s[(i, i)] = 1.0;
    } else {
        s[(i, j)] = 0.5;
        s[(j, i)] = 0.5;
    }
    s
}

fn unit_diagonal(n: usize, ell: usize) -> Vec<Constraint> {
    (0..n).map(|i| Constraint::equality(SplrMatrix::sparse_only(entry(n, i, i), ell), 1.0)).collect()
}

/// `diag(X) = e`, `⟨a aᵀ, X⟩ = b` with zero objective and empty pattern.
pub fn gen_simex(n: usize, a: &[f64], b: f64) -> Result<SplrSdp> {
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.len() });
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidInput("vector a must be nonzero".into()));
    }
    let factor = DMatrix::from_iterator(n, 1, a.iter().map(|x| x / norm));
    let mut constraints = unit_diagonal(n, 1);
    constraints.push(Constraint::equality(SplrMatrix { sparse: SparseSymMatrix::zeros(n), core: DMatrix::from_element(1, 1, norm * norm) }, b));
    SplrSdp::new(Graph::new(n), SplrMatrix::sparse_only(SparseSymMatrix::zeros(n), 1), constraints, factor)
}

/// Seeded `a` with entries in `[0.5, 1.5]` and `b = ‖a‖₁² / 2`, which lies
/// strictly inside the range of `aᵀ X a` over correlation matrices.
pub fn random_simex(n: usize, seed: u64) -> Result<SplrSdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let l1: f64 = a.iter().sum();
    gen_simex(n, &a, l1 * l1 / 2.0)
}

/// Laplacian objective, `diag(X) = e` and `⟨e eᵀ, X⟩ = 0`.
pub fn gen_min_bisection(g: &Graph) -> Result<SplrSdp> {
    let n = g.n();
    if n == 0 {
        return Err(Error::InvalidInput("graph has no vertices".into()));
    }
    let mut entries: Vec<(usize, usize, f64)> = (0..n).map(|v| (v, v, g.degree(v) as f64)).collect();
    entries.extend(g.edges().into_iter().map(|(i, j)| (i, j, -1.0)));
    let laplacian = SparseSymMatrix::from_entries(n, entries)?;
    let factor = DMatrix::from_element(n, 1, 1.0 / (n as f64).sqrt());
    let mut constraints = unit_diagonal(n, 1);
    constraints.push(Constraint::equality(SplrMatrix { sparse: SparseSymMatrix::zeros(n), core: DMatrix::from_element(1, 1, n as f64) }, 0.0));
    SplrSdp::new(g.clone(), SplrMatrix::sparse_only(laplacian, 1), constraints, factor)
}

/// Relaxation of `min xᵀQx + 2cᵀx s.t. A x = b, x >= 0, x_i binary for i in
/// `binary``, over `Y ∈ 𝕊^{n+1}` with `Y₁₁ = 1`. The equality constraints
/// become the single low-rank constraint `⟨[-b, A]ᵀ[-b, A], Y⟩ = 0`.
pub fn gen_bqp_relaxation(q: &DMatrix<f64>, c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>, binary: &[usize]) -> Result<SplrSdp> {
    let n = q.nrows();
    if q.ncols() != n || c.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: if q.ncols() != n { q.ncols() } else { c.len() } });
    }
    if a.nrows() != b.len() || (a.nrows() > 0 && a.ncols() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: a.ncols() });
    }
    if let Some(&bad) = binary.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad + 1, limit: n });
    }
    let dim = n + 1;
    let mut pattern = Graph::new(dim);
    let mut obj = Vec::new();
    for i in 0..n {
        pattern.add_edge(0, i + 1)?;
        if c[i] != 0.0 {
            obj.push((0, i + 1, c[i]));
        }
        for j in i..n {
            let v = 0.5 * (q[(i, j)] + q[(j, i)]);
            if v != 0.0 {
                obj.push((i + 1, j + 1, v));
                if i != j {
                    pattern.add_edge(i + 1, j + 1)?;
                }
            }
        }
    }

    let mut p = DMatrix::zeros(a.nrows(), dim);
    for r in 0..a.nrows() {
        p[(r, 0)] = -b[r];
        for j in 0..n {
            p[(r, j + 1)] = a[(r, j)];
        }
    }
    let factor = if a.nrows() == 0 {
        DMatrix::zeros(dim, 0)
    } else {
        let d = linalg::svd(&p.transpose())?;
        d.u.select_columns(&d.above(1e-10))
    };
    let ell = factor.ncols();
    let pw = &p * &factor;
    let core = pw.transpose() * &pw;

    let mut constraints = vec![Constraint::equality(SplrMatrix::sparse_only(entry(dim, 0, 0), ell), 1.0)];
    for i in 0..n {
        constraints.push(Constraint { data: SplrMatrix::sparse_only(entry(dim, 0, i + 1), ell), lower: Some(0.0), upper: None });
    }
    for &i in binary {
        let s = SparseSymMatrix::from_entries(dim, [(0, i + 1, -0.5), (i + 1, i + 1, 1.0)])?;
        constraints.push(Constraint::equality(SplrMatrix::sparse_only(s, ell), 0.0));
    }
    if ell > 0 {
        constraints.push(Constraint::equality(SplrMatrix { sparse: SparseSymMatrix::zeros(dim), core }, 0.0));
    }
    SplrSdp::new(pattern, SplrMatrix::sparse_only(SparseSymMatrix::from_entries(dim, obj)?, ell), constraints, factor)
}

/// Seeded binary instance with tridiagonal `Q`, `rows` 0/1 equality rows and
/// `b = A x₀` for a random binary `x₀`, so the relaxation is feasible.
pub fn random_bqp(n: usize, rows: usize, seed: u64) -> Result<SplrSdp> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one variable".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        q[(i, i)] = rng.random_range(1.0..3.0);
        if i + 1 < n {
            let v = rng.random_range(-1.0..1.0);
            q[(i, i + 1)] = v;
            q[(i + 1, i)] = v;
        }
    }
    let c = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let a = DMatrix::from_fn(rows, n, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    let x0 = DVector::from_fn(n, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    let b = &a * x0;
    gen_bqp_relaxation(&q, &c, &a, &b, &(0..n).collect::<Vec<_>>())
}

/// `[[I, D], [D, I]]` with `D = diag(1, …, 1, 1/2)`.
pub fn phi_witness_matrix(ell: usize) -> DMatrix<f64> {
    let mut y = DMatrix::identity(2 * ell, 2 * ell);
    for i in 0..ell {
        let d = if i + 1 == ell { 0.5 } else { 1.0 };
        y[(i, ell + i)] = d;
        y[(ell + i, i)] = d;
    }
    y
}

/// The slice `{Y ⪰ 0 : Y₁₁ = Y₂₂ = I, UᵀYU = diag(4, …, 4, 3)}` with
/// `U = [I; I]`, which contains only [`phi_witness_matrix`].
pub fn gen_phi_witness(ell: usize) -> Result<AffineSlice> {
    if ell == 0 {
        return Err(Error::InvalidInput("ell must be at least 1".into()));
    }
    let d = 2 * ell;
    let mut constraints = Vec::with_capacity(3 * ell * (ell + 1) / 2);
    let sym = |i: usize, j: usize| {
        let mut e = DMatrix::zeros(d, d);
        e[(i, j)] += 0.5;
        e[(j, i)] += 0.5;
        e
    };
    for off in [0, ell] {
        for i in 0..ell {
            for j in i..ell {
                constraints.push((sym(off + i, off + j), if i == j { 1.0 } else { 0.0 }));
            }
        }
    }
    for i in 0..ell {
        for j in i..ell {
            // (UᵀYU)_ij = Y_ij + Y_i,ℓ+j + Y_ℓ+i,j + Y_ℓ+i,ℓ+j
            let e = sym(i, j) + sym(i, ell + j) + sym(ell + i, j) + sym(ell + i, ell + j);
            let target = if i != j { 0.0 } else if i + 1 == ell { 3.0 } else { 4.0 };
            constraints.push((e, target));
        }
    }
    let start = FactoredSolution::from_psd(&phi_witness_matrix(ell), 1e-12)?;
    Ok(AffineSlice { dim: d, constraints, start })
}

/// Closed-form singular values `(larger, smaller)` of `[[1, β], [-β, α]]`.
/// For `α ∈ {1/2, 1}` and `β ≠ 0` the larger one exceeds 1, which is why the
/// witness slice has a single element.
pub fn witness_minor_singular_values(alpha: f64, beta: f64) -> (f64, f64) {
    let base = 2.0 * beta * beta + alpha * alpha + 1.0;
    let root = ((1.0 - alpha * alpha).powi(2) + 4.0 * beta * beta * (alpha - 1.0).powi(2)).sqrt();
    (((base + root) / 2.0).sqrt(), ((base - root) / 2.0).max(0.0).sqrt())
}

/// `diag(X) = 1_{ℓ+1}`, `AᵀXA = I + 11ᵀ` with `A = [I; 1ᵀ]`; every feasible
/// point has full rank.
pub fn gen_lb_small(ell: usize) -> Result<SplrSdp> {
    if ell == 0 {
        return Err(Error::InvalidInput("ell must be at least 1".into()));
    }
    let n = ell + 1;
    let factor = DMatrix::from_fn(n, ell, |i, j| if i == ell || i == j { 1.0 } else { 0.0 });
    let mut constraints = unit_diagonal(n, ell);
    for i in 0..ell {
        for j in i..ell {
            let target = if i == j { 2.0 } else { 1.0 };
            constraints.push(Constraint::equality(SplrMatrix { sparse: SparseSymMatrix::zeros(n), core: core_entry(ell, i, j) }, target));
        }
    }
    SplrSdp::new(Graph::new(n), SplrMatrix::sparse_only(SparseSymMatrix::zeros(n), ell), constraints, factor)
}

/// Embeds `base` in dimension `n_hat` and pins `X[n..n+σ, n..n+σ] = I` and
/// `X[n..n+σ, 0..n] = 0`. The new rows are joined to everything before them
/// in the pattern, so widths grow by exactly `σ`.
pub fn gen_lb_padded(base: &SplrSdp, sigma: usize, n_hat: usize) -> Result<SplrSdp> {
    let n = base.n;
    if n_hat < n + sigma {
        return Err(Error::DimensionMismatch { expected: n + sigma, found: n_hat });
    }
    let ell = base.ell();
    let embed = |s: &SparseSymMatrix| SparseSymMatrix::from_entries(n_hat, s.entries().iter().copied()).expect("embedded entries");
    let lift = |m: &SplrMatrix| SplrMatrix { sparse: embed(&m.sparse), core: m.core.clone() };
    let mut pattern = Graph::new(n_hat);
    for (i, j) in base.pattern.edges() {
        pattern.add_edge(i, j)?;
    }
    let mut constraints: Vec<Constraint> = base.constraints.iter().map(|c| Constraint { data: lift(&c.data), lower: c.lower, upper: c.upper }).collect();
    for a in n..n + sigma {
        for j in 0..a {
            pattern.add_edge(j, a)?;
            constraints.push(Constraint::equality(SplrMatrix::sparse_only(entry(n_hat, j, a), ell), 0.0));
        }
        constraints.push(Constraint::equality(SplrMatrix::sparse_only(entry(n_hat, a, a), ell), 1.0));
    }
    let factor = base.factor.clone().resize_vertically(n_hat, 0.0);
    SplrSdp::new(pattern, lift(&base.objective), constraints, factor)
}

fn blk(ell: usize, b: usize, i: usize) -> usize {
    b * ell + i
}

/// Default `M ∈ 𝕊^{3ℓ}` for [`gen_lb_tree`]: with `Y = [Q₁; Q₂][Q₁; Q₂]ᵀ` the
/// witness matrix, `M = R Rᵀ` for `R = [Q₁; Q₂; Q₁ + Q₂]`.
pub fn lb_tree_default_m(ell: usize) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(&DVector::from_fn(ell, |i, _| if i + 1 == ell { 0.5 } else { 1.0 }));
    let id = DMatrix::<f64>::identity(ell, ell);
    let blocks = [[id.clone(), d.clone(), &id + &d], [d.clone(), id.clone(), &id + &d], [&id + &d, &id + &d, (&id + &d) * 2.0]];
    let mut m = DMatrix::zeros(3 * ell, 3 * ell);
    for (a, row) in blocks.iter().enumerate() {
        for (b, block) in row.iter().enumerate() {
            m.view_mut((a * ell, b * ell), (ell, ell)).copy_from(block);
        }
    }
    m
}

/// Pairs of block indices (0-based, `a <= b`) that appear in the sparse
/// constraints of the tree lower-bound instance.
const LB_TREE_BLOCKS: [(usize, usize); 15] =
    [(0, 0), (0, 1), (0, 2), (0, 4), (0, 5), (1, 1), (1, 2), (1, 3), (1, 5), (2, 2), (2, 3), (2, 4), (3, 3), (4, 4), (5, 5)];

/// Six `ℓ × ℓ` block rows; `m` is the `3ℓ × 3ℓ` matrix whose diagonal blocks
/// give `M₁, M₂, M₃` (its off-diagonal blocks only define the documented
/// feasible point). Optimal solutions have rank at least `3ℓ + φ(ℓ)`.
pub fn gen_lb_tree(ell: usize, m: Option<&DMatrix<f64>>) -> Result<SplrSdp> {
    if ell == 0 {
        return Err(Error::InvalidInput("ell must be at least 1".into()));
    }
    let default;
    let m = match m {
        Some(m) => m,
        None => {
            default = lb_tree_default_m(ell);
            &default
        }
    };
    if m.nrows() != 3 * ell || m.ncols() != 3 * ell {
        return Err(Error::DimensionMismatch { expected: 3 * ell, found: m.nrows() });
    }
    check_lb_tree_m(m, ell)?;
    let n = 6 * ell;
    let mut pattern = Graph::new(n);
    for &(a, b) in &LB_TREE_BLOCKS {
        for i in 0..ell {
            for j in 0..ell {
                let (x, y) = (blk(ell, a, i), blk(ell, b, j));
                if x != y {
                    pattern.add_edge(x, y)?;
                }
            }
        }
    }
    let mut constraints = Vec::new();
    let mut pin = |x: usize, y: usize, v: f64| constraints.push(Constraint::equality(SplrMatrix::sparse_only(entry(n, x, y), ell), v));
    // Zero blocks between the top and bottom halves.
    for (a, b) in [(4, 0), (4, 2), (5, 0), (5, 1), (3, 1), (3, 2)] {
        for i in 0..ell {
            for j in 0..ell {
                pin(blk(ell, a, i), blk(ell, b, j), 0.0);
            }
        }
    }
    for k in 0..3 {
        for i in 0..ell {
            for j in i..ell {
                let id = if i == j { 1.0 } else { 0.0 };
                pin(blk(ell, 3 + k, i), blk(ell, 3 + k, j), id + m[(k * ell + i, k * ell + j)]);
            }
        }
    }
    for x in 0..3 * ell {
        for y in x..3 * ell {
            pin(x, y, if x == y { 1.0 } else { 0.0 });
        }
    }
    let signs = [-1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
    let factor = DMatrix::from_fn(n, ell, |x, h| if x % ell == h { signs[x / ell] } else { 0.0 });
    for i in 0..ell {
        for j in i..ell {
            constraints.push(Constraint::equality(SplrMatrix { sparse: SparseSymMatrix::zeros(n), core: core_entry(ell, i, j) }, 0.0));
        }
    }
    SplrSdp::new(pattern, SplrMatrix::sparse_only(SparseSymMatrix::zeros(n), ell), constraints, factor)
}

fn check_lb_tree_m(m: &DMatrix<f64>, ell: usize) -> Result<()> {
    let scale = crate::linalg::max_abs(m).max(1.0);
    let sym = crate::linalg::max_abs(&(m - m.transpose()));
    let mut u = DMatrix::zeros(3 * ell, ell);
    for h in 0..ell {
        u[(h, h)] = 1.0;
        u[(ell + h, h)] = 1.0;
        u[(2 * ell + h, h)] = -1.0;
    }
    let gap = crate::linalg::max_abs(&(u.transpose() * m * &u));
    let lmin = crate::linalg::sym_eigen_desc(m).0.min();
    if sym > 1e-9 * scale || gap > 1e-9 * scale || lmin < -1e-9 * scale {
        return Err(Error::InvalidInput("M must be PSD with [I, I, -I] M [I; I; -I] = 0".into()));
    }
    Ok(())
}

/// The feasible point `[[I, P], [Pᵀ, I + M]]` with `P = diag(I, I, -I)`.
pub fn lb_tree_feasible_point(ell: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = 3 * ell;
    let mut x = DMatrix::identity(2 * k, 2 * k);
    x.view_mut((k, k), (k, k)).copy_from(&(DMatrix::identity(k, k) + m));
    for i in 0..k {
        let s = if i >= 2 * ell { -1.0 } else { 1.0 };
        x[(i, k + i)] = s;
        x[(k + i, i)] = s;
    }
    x
}

/// Random tree decomposition with up to `nodes` nodes and bags of at most
/// `max_bag` vertices, together with the graph formed by its bag cliques.
/// Each child keeps a random part of its parent's bag and adds at least one
/// new vertex; generation stops early once `max_vertices` is reached. Some
/// parents are drawn from a few early nodes so hubs of high degree appear.
pub fn random_tree_decomposition(nodes: usize, max_bag: usize, max_vertices: usize, seed: u64) -> (Graph, TreeDecomposition) {
    assert!(nodes >= 1 && max_bag >= 1 && max_vertices >= max_bag);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = 0;
    let mut bags: Vec<Vec<usize>> = Vec::new();
    let mut edges = Vec::new();
    let first = rng.random_range(1..=max_bag);
    bags.push((0..first).collect());
    next += first;
    while bags.len() < nodes && next < max_vertices {
        let t = bags.len();
        let parent = if rng.random_bool(0.3) { rng.random_range(0..t.min(3)) } else { rng.random_range(0..t) };
        let mut bag: Vec<usize> = bags[parent].iter().copied().filter(|_| rng.random_bool(0.6)).collect();
        bag.truncate(max_bag - 1);
        let fresh = rng.random_range(1..=max_bag - bag.len()).min(max_vertices - next);
        bag.extend(next..next + fresh);
        next += fresh;
        bag.sort_unstable();
        bags.push(bag);
        edges.push((parent, t));
    }
    let mut g = Graph::new(next);
    for bag in &bags {
        for (a, &x) in bag.iter().enumerate() {
            for &y in &bag[a + 1..] {
                g.add_edge(x, y).expect("in range");
            }
        }
    }
    let td = TreeDecomposition::new(bags.into_iter().enumerate().collect(), &edges).expect("valid tree");
    (g, td)
}

/// Vertices `i`, `j` adjacent iff `|i - j| <= w`.
pub fn band_graph(n: usize, w: usize) -> Graph {
    let mut g = Graph::new(n);
    for i in 0..n {
        for j in i + 1..n.min(i + w + 1) {
            g.add_edge(i, j).expect("in range");
        }
    }
    g
}

/// Path decomposition of [`band_graph`] with bags `{i, …, i + w}`.
pub fn band_path(n: usize, w: usize) -> Result<TreeDecomposition> {
    let last = n.saturating_sub(w + 1);
    TreeDecomposition::path((0..=last).map(|i| (i..n.min(i + w + 1)).collect()).collect())
}

fn random_sparse(g: &Graph, rng: &mut ChaCha8Rng, density: f64) -> SparseSymMatrix {
    let n = g.n();
    let mut entries = Vec::new();
    for i in 0..n {
        if rng.random_bool(density) {
            entries.push((i, i, rng.sample::<f64, _>(StandardNormal)));
        }
    }
    for (i, j) in g.edges() {
        if rng.random_bool(density) {
            entries.push((i, j, rng.sample::<f64, _>(StandardNormal)));
        }
    }
    SparseSymMatrix::from_entries(n, entries).expect("entries on the pattern")
}

fn random_sym(ell: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(ell, ell, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a + a.transpose()) * 0.5
}

/// Random SPLR instance on `pattern` with a known feasible point: data are
/// Gaussian, right-hand sides are the values at `R₀R₀ᵀ` with `R₀` of width
/// 3. Every fourth constraint is a one-sided or two-sided inequality.
pub fn random_splr(pattern: &Graph, ell: usize, m: usize, seed: u64) -> Result<(SplrSdp, FactoredSolution)> {
    let n = pattern.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor = DMatrix::from_fn(n, ell, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x0 = FactoredSolution::new(DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal)));
    let objective = SplrMatrix { sparse: random_sparse(pattern, &mut rng, 0.5), core: random_sym(ell, &mut rng) };
    let mut constraints = Vec::with_capacity(m);
    for k in 0..m {
        let data = SplrMatrix { sparse: random_sparse(pattern, &mut rng, 0.3), core: random_sym(ell, &mut rng) };
        constraints.push(Constraint { data, lower: None, upper: None });
        let v = {
            let at_r = factor.transpose() * &x0.factor;
            constraints[k].data.eval(&x0.factor, &at_r)
        };
        let c = &mut constraints[k];
        match k % 4 {
            1 => c.lower = Some(v - 0.5),
            2 => (c.lower, c.upper) = (Some(v - 1.0), Some(v + 1.0)),
            _ => (c.lower, c.upper) = (Some(v), Some(v)),
        }
    }
    let p = SplrSdp::new(pattern.clone(), objective, constraints, factor)?;
    Ok((p, x0))
}

/// Instances shipped with the CLI and used in regression checks.
pub fn catalog() -> Vec<(&'static str, SplrSdp)> {
    let g12 = twelve_vertex_graph();
    let bqp_q = DMatrix::from_fn(4, 4, |i, j| match i.abs_diff(j) {
        0 => 2.0 + i as f64,
        1 => -1.0,
        _ => 0.0,
    });
    let bqp_c = DVector::from_vec(vec![-1.0, 0.5, -2.0, 1.0]);
    let bqp_a = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 1.0, 1.0]);
    let bqp_b = DVector::from_vec(vec![2.0]);
    vec![
        ("simex20", random_simex(20, 7).expect("simex")),
        ("minbisect-path16", gen_min_bisection(&Graph::path(16)).expect("path")),
        ("minbisect-k4", gen_min_bisection(&Graph::complete(4)).expect("k4")),
        ("minbisect-fixture12", gen_min_bisection(&g12).expect("fixture")),
        ("bqp4", gen_bqp_relaxation(&bqp_q, &bqp_c, &bqp_a, &bqp_b, &[0, 1, 2, 3]).expect("bqp")),
        ("lb-small2", gen_lb_small(2).expect("lb-small")),
        ("lb-tree1", gen_lb_tree(1, None).expect("lb-tree")),
    ]
}

/// A 12-vertex chordal graph: two 4-cliques `{1,2,5,6}`, `{2,3,4,5}` and
/// six pendant triangles (1-based), tree-width 3.
pub fn twelve_vertex_graph() -> Graph {
    let cliques: [&[usize]; 8] = [&[1, 6, 7], &[1, 2, 8], &[2, 3, 9], &[3, 4, 10], &[4, 5, 11], &[5, 6, 12], &[1, 2, 5, 6], &[2, 3, 4, 5]];
    let mut g = Graph::new(12);
    for c in cliques {
        for (a, &x) in c.iter().enumerate() {
            for &y in &c[a + 1..] {
                g.add_edge(x - 1, y - 1).expect("in range");
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{brute_force_treewidth, heuristic_decomposition, is_chordal};

    #[test]
    fn simex_all_ones_point() {
        let p = gen_simex(3, &[1.0, 1.0, 1.0], 9.0).unwrap();
        let x = FactoredSolution::new(DMatrix::from_element(3, 1, 1.0));
        assert!((p.eval_constraint(4, &x).unwrap() - 9.0).abs() < 1e-12);
        assert!(p.is_feasible(&x, 1e-10));
        let q = gen_simex(3, &[1.0, 2.0, 2.0], 9.0).unwrap();
        assert!(q.is_feasible(&FactoredSolution::identity(3), 1e-10));
        assert!(gen_simex(2, &[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn min_bisection_identity_and_split() {
        let p = gen_min_bisection(&Graph::path(4)).unwrap();
        assert_eq!(p.ell(), 1);
        assert!((p.eval_constraint(5, &FactoredSolution::identity(4)).unwrap() - 4.0).abs() < 1e-12);
        let f = &p.factor;
        assert!(f.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert!((p.constraints[4].data.core[(0, 0)] - 4.0).abs() < 1e-12);
        // x = (1, 1, -1, -1) cuts one edge: xᵀ L x = 4.
        let x = FactoredSolution::new(DMatrix::from_column_slice(4, 1, &[1.0, 1.0, -1.0, -1.0]));
        assert!(p.is_feasible(&x, 1e-12));
        assert!((p.objective_value(&x).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bqp_star_pattern_and_rank() {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let c = DVector::zeros(3);
        let p = gen_bqp_relaxation(&q, &c, &DMatrix::zeros(0, 3), &DVector::zeros(0), &[]).unwrap();
        assert_eq!(p.pattern.edges(), vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(p.ell(), 0);
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let p = gen_bqp_relaxation(&q, &c, &a, &DVector::from_vec(vec![1.0]), &[0, 1]).unwrap();
        assert_eq!(p.ell(), 1);
        assert!(p.constraints[1..4].iter().all(|c| c.lower == Some(0.0) && c.upper.is_none()));
        // x = (1, 0, 0): Y = [1; x][1; x]ᵀ.
        let y = FactoredSolution::new(DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 0.0, 0.0]));
        assert!(p.is_feasible(&y, 1e-12));
        assert!((p.objective_value(&y).unwrap() - 1.0).abs() < 1e-12);
        let a2 = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let p = gen_bqp_relaxation(&q, &c, &a2, &DVector::from_vec(vec![1.0, 2.0]), &[]).unwrap();
        assert_eq!(p.ell(), 1);
    }

    #[test]
    fn phi_witness_counts_and_point() {
        for ell in 1..4 {
            let s = gen_phi_witness(ell).unwrap();
            assert_eq!(s.constraints.len(), 3 * ell * (ell + 1) / 2);
            assert!(s.max_residual(&s.start.factor) < 1e-12);
            assert_eq!(s.start.rank(), ell + 1);
        }
        let one = phi_witness_matrix(1);
        assert_eq!(one, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
    }

    #[test]
    fn lb_small_identity_is_feasible() {
        for ell in 1..4 {
            let p = gen_lb_small(ell).unwrap();
            assert_eq!(p.n, ell + 1);
            assert!(p.is_feasible(&FactoredSolution::identity(ell + 1), 1e-12));
        }
    }

    #[test]
    fn lb_padded_widths_and_point() {
        let base = gen_lb_small(2).unwrap();
        assert_eq!(gen_lb_padded(&base, 0, 3).unwrap(), base);
        let p = gen_lb_padded(&base, 3, 6).unwrap();
        assert_eq!(brute_force_treewidth(&p.pattern).unwrap(), 3);
        assert!(p.is_feasible(&FactoredSolution::identity(6), 1e-12));
        assert!(gen_lb_padded(&base, 3, 5).is_err());
    }

    #[test]
    fn lb_tree_structure() {
        let p = gen_lb_tree(1, None).unwrap();
        assert_eq!(p.n, 6);
        assert!(is_chordal(&p.pattern).is_some());
        assert_eq!(brute_force_treewidth(&p.pattern).unwrap(), 2);
        assert_eq!(heuristic_decomposition(&p.pattern).width().unwrap(), 2);
        let m = lb_tree_default_m(1);
        let x = lb_tree_feasible_point(1, &m);
        let f = FactoredSolution::from_psd(&x, 1e-12).unwrap();
        assert!(p.is_feasible(&f, 1e-10));
        assert_eq!(f.rank(), 5);
        // XV = 0 at the feasible point.
        assert!(crate::linalg::max_abs(&(&x * &p.factor)) < 1e-12);
        let p2 = gen_lb_tree(2, None).unwrap();
        let x2 = FactoredSolution::from_psd(&lb_tree_feasible_point(2, &lb_tree_default_m(2)), 1e-12).unwrap();
        assert!(p2.is_feasible(&x2, 1e-10));
        assert_eq!(is_chordal(&p2.pattern).map(|_| heuristic_decomposition(&p2.pattern).width().unwrap()), Some(5));
        let bad = DMatrix::identity(3, 3);
        assert!(gen_lb_tree(1, Some(&bad)).is_err());
    }

    #[test]
    fn catalog_instances_are_well_formed() {
        for (name, p) in catalog() {
            p.check().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert_eq!(twelve_vertex_graph(), crate::graph::fixtures::twelve_vertex_chordal());
    }

    #[test]
    fn random_bqp_is_reproducible() {
        let p = random_bqp(6, 2, 3).unwrap();
        assert!(p.ell() <= 2 && p.n == 7);
        let q = random_bqp(6, 2, 3).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn random_decompositions_are_valid() {
        for seed in 0..20 {
            let (g, td) = random_tree_decomposition(40, 5, 200, seed);
            assert!(td.validate(&g), "seed {seed}");
            assert!(td.width().unwrap() <= 4);
        }
        let (g, td) = random_tree_decomposition(100, 4, 30, 1);
        assert!(g.n() <= 30 && td.validate(&g));
    }

    #[test]
    fn band_path_covers_band() {
        let g = band_graph(9, 2);
        let td = band_path(9, 2).unwrap();
        assert!(td.is_path() && td.validate(&g));
        assert_eq!(td.width().unwrap(), 2);
        assert_eq!(td.node_count(), 7);
    }

    #[test]
    fn random_splr_point_is_feasible() {
        let g = band_graph(12, 2);
        let (p, x) = random_splr(&g, 2, 9, 4).unwrap();
        assert_eq!((p.n, p.ell(), p.m()), (12, 2, 9));
        assert!(p.is_feasible(&x, 1e-9));
        assert!(p.constraints[1].upper.is_none() && p.constraints[2].lower < p.constraints[2].upper);
    }
}
