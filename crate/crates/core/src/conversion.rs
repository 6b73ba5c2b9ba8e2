//! Clique-block form of an extended problem: one PSD block per tree node,
//! linear constraints written as traces against block entries, and overlap
//! equalities between each block and its parent.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use crate::completion::PartialMatrix;
use crate::error::{Error, Result};
use crate::extension::ExtendedSdp;
use crate::graph::{Graph, TreeDecomposition};
use crate::model::FactoredSolution;

/// One clique block.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub node: usize,
    /// Global indices `V̂_t`, sorted.
    pub indices: Vec<usize>,
    /// `|V̂_t| × ℓ`; block variables must satisfy `Y a = 0` for each column.
    pub null_vectors: DMatrix<f64>,
    pub parent: Option<usize>,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn local(&self, global: usize) -> Option<usize> {
        self.indices.binary_search(&global).ok()
    }
}

/// `weight · Y_block[i, j]` with `i <= j` local indices. Off-diagonal
/// weights already include the factor 2 from symmetry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockTerm {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockConstraint {
    pub terms: Vec<BlockTerm>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Shared index pairs between a block and its parent.
#[derive(Clone, Debug, PartialEq)]
pub struct Overlap {
    pub child: usize,
    pub parent: usize,
    /// `(global, local in child, local in parent)` for each shared index.
    pub shared: Vec<(usize, usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSdp {
    pub n_hat: usize,
    /// Blocks in label order (children before parents); the root is last.
    pub blocks: Vec<Block>,
    pub objective: Vec<BlockTerm>,
    pub constraints: Vec<BlockConstraint>,
    pub overlaps: Vec<Overlap>,
    /// Union of the block cliques.
    pub pattern: Graph,
    /// The extended decomposition with node ids replaced by block positions.
    pub decomposition: TreeDecomposition,
}

/// Builds the block form. Each sparse coefficient goes to the first block
/// (in label order) holding both of its indices; the low-rank cores act on
/// `𝒥`, which lives only in the root block.
pub fn convert(ext: &ExtendedSdp) -> Result<BlockSdp> {
    let order = &ext.pattern.order;
    let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(b, &t)| (t, b)).collect();
    let blocks: Vec<Block> = order
        .iter()
        .map(|&t| Block {
            node: t,
            indices: ext.extended_bag(t).to_vec(),
            null_vectors: ext.null_vectors[&t].clone(),
            parent: ext.decomposition.parent(t).map(|p| pos[&p]),
        })
        .collect();

    let owner = |i: usize, j: usize| -> Result<(usize, usize, usize)> {
        for (b, blk) in blocks.iter().enumerate() {
            if let (Some(li), Some(lj)) = (blk.local(i), blk.local(j)) {
                return Ok((b, li.min(lj), li.max(lj)));
            }
        }
        Err(Error::InvalidDecomposition(format!("entry ({}, {}) lies in no block", i + 1, j + 1)))
    };
    let j_set = ext.j_set();
    let root_block = blocks.len() - 1;
    let to_terms = |form: &crate::model::SplrMatrix| -> Result<Vec<BlockTerm>> {
        let mut acc: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in form.sparse.entries() {
            let key = owner(i, j)?;
            *acc.entry(key).or_insert(0.0) += if i == j { v } else { 2.0 * v };
        }
        let root = &blocks[root_block];
        for a in 0..j_set.len() {
            for b in a..j_set.len() {
                let v = form.core[(a, b)];
                if v != 0.0 {
                    let (la, lb) = (root.local(j_set[a]).unwrap(), root.local(j_set[b]).unwrap());
                    *acc.entry((root_block, la.min(lb), la.max(lb))).or_insert(0.0) += if a == b { v } else { 2.0 * v };
                }
            }
        }
        Ok(acc.into_iter().map(|((block, i, j), weight)| BlockTerm { block, i, j, weight }).collect())
    };
    let objective = to_terms(&ext.problem.objective)?;
    let constraints = ext
        .problem
        .constraints
        .iter()
        .map(|c| Ok(BlockConstraint { terms: to_terms(&c.data)?, lower: c.lower, upper: c.upper }))
        .collect::<Result<Vec<_>>>()?;

    let mut overlaps = Vec::new();
    for (b, blk) in blocks.iter().enumerate() {
        if let Some(p) = blk.parent {
            let shared = blk
                .indices
                .iter()
                .enumerate()
                .filter_map(|(lc, &g)| blocks[p].local(g).map(|lp| (g, lc, lp)))
                .collect();
            overlaps.push(Overlap { child: b, parent: p, shared });
        }
    }

    let mut pattern = Graph::new(ext.n_hat());
    for blk in &blocks {
        for (a, &x) in blk.indices.iter().enumerate() {
            for &y in &blk.indices[a + 1..] {
                pattern.add_edge(x, y)?;
            }
        }
    }
    let bags: BTreeMap<usize, Vec<usize>> = blocks.iter().enumerate().map(|(b, blk)| (b, blk.indices.clone())).collect();
    let edges: Vec<(usize, usize)> = blocks.iter().enumerate().filter_map(|(b, blk)| blk.parent.map(|p| (b, p))).collect();
    let decomposition = TreeDecomposition::new(bags, &edges)?.rooted_at(root_block)?;
    Ok(BlockSdp { n_hat: ext.n_hat(), blocks, objective, constraints, overlaps, pattern, decomposition })
}

pub fn eval_terms(terms: &[BlockTerm], ys: &[DMatrix<f64>]) -> f64 {
    terms.iter().map(|t| t.weight * ys[t.block][(t.i, t.j)]).sum()
}

impl BlockSdp {
    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn ell(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.null_vectors.ncols())
    }

    /// Number of null constraints `ãᵀ Y ã = 0`.
    pub fn null_count(&self) -> usize {
        self.blocks.iter().map(|b| b.null_vectors.ncols()).sum()
    }

    /// Objective value followed by every constraint value.
    pub fn eval_all(&self, ys: &[DMatrix<f64>]) -> Vec<f64> {
        std::iter::once(eval_terms(&self.objective, ys)).chain(self.constraints.iter().map(|c| eval_terms(&c.terms, ys))).collect()
    }

    pub fn max_violation(&self, ys: &[DMatrix<f64>]) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let v = eval_terms(&c.terms, ys);
                (c.lower.map_or(0.0, |l| l - v)).max(c.upper.map_or(0.0, |u| v - u)).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Largest disagreement on shared entries between a block and its parent.
    pub fn max_overlap_gap(&self, ys: &[DMatrix<f64>]) -> f64 {
        let mut worst = 0.0_f64;
        for o in &self.overlaps {
            for &(_, ci, pi) in &o.shared {
                for &(_, cj, pj) in &o.shared {
                    worst = worst.max((ys[o.child][(ci, cj)] - ys[o.parent][(pi, pj)]).abs());
                }
            }
        }
        worst
    }

    /// Largest `|ãᵀ Y ã|` over blocks and null vectors.
    pub fn max_null_residual(&self, ys: &[DMatrix<f64>]) -> f64 {
        self.blocks
            .iter()
            .zip(ys)
            .flat_map(|(b, y)| (0..b.null_vectors.ncols()).map(move |h| {
                let a = b.null_vectors.column(h);
                (a.transpose() * y * a)[(0, 0)].abs()
            }))
            .fold(0.0, f64::max)
    }

    /// Block matrices `R̃_{V̂_t} R̃_{V̂_t}ᵀ` of a lifted point.
    pub fn blocks_of(&self, x: &FactoredSolution) -> Result<Vec<DMatrix<f64>>> {
        if x.dim() != self.n_hat {
            return Err(Error::DimensionMismatch { expected: self.n_hat, found: x.dim() });
        }
        Ok(self
            .blocks
            .iter()
            .map(|b| {
                let r = x.factor.select_rows(&b.indices);
                &r * r.transpose()
            })
            .collect())
    }

    /// Writes blocks into one partial matrix, parents before children.
    /// Overlaps must agree to within `tol · max(1, max |Y|)`.
    pub fn assemble(&self, ys: &[DMatrix<f64>], tol: f64) -> Result<PartialMatrix> {
        if ys.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch { expected: self.blocks.len(), found: ys.len() });
        }
        for (b, y) in self.blocks.iter().zip(ys) {
            if y.nrows() != b.dim() || y.ncols() != b.dim() {
                return Err(Error::DimensionMismatch { expected: b.dim(), found: y.nrows() });
            }
        }
        let scale = ys.iter().map(crate::linalg::max_abs).fold(1.0, f64::max);
        let gap = self.max_overlap_gap(ys);
        if gap > tol * scale {
            return Err(Error::AssemblyConflict { max_discrepancy: gap, tol: tol * scale });
        }
        let mut pm = PartialMatrix::new(self.n_hat);
        for b in self.decomposition.bfs_order()? {
            let blk = &self.blocks[b];
            for (li, &gi) in blk.indices.iter().enumerate() {
                for (lj, &gj) in blk.indices.iter().enumerate().skip(li) {
                    pm.set(gi, gj, ys[b][(li, lj)]);
                }
            }
        }
        Ok(pm)
    }

    /// Indices covered by at least one block.
    pub fn covered(&self) -> BTreeSet<usize> {
        self.blocks.iter().flat_map(|b| b.indices.iter().copied()).collect()
    }
}
