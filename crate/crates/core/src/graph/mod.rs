//! Undirected simple graphs and tree decompositions.
//!
//! Vertices are `0..n` in memory; every text and JSON format uses 1-based ids.

mod chordal;
mod decomposition;
mod treewidth;

pub use chordal::{chordal_complete, clique_tree, heuristic_decomposition, is_chordal, is_perfect_elimination_order, max_cardinality_search};
pub use decomposition::TreeDecomposition;
pub use treewidth::{brute_force_treewidth, BRUTE_FORCE_LIMIT};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct Graph {
    adj: Vec<BTreeSet<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphFile> for Graph {
    type Error = Error;

    fn try_from(f: GraphFile) -> Result<Self> {
        let edges = one_based_pairs(&f.edges, f.n)?;
        Graph::from_edges(f.n, &edges)
    }
}

impl From<Graph> for GraphFile {
    fn from(g: Graph) -> Self {
        GraphFile { n: g.n(), edges: g.edges().into_iter().map(|(i, j)| [i + 1, j + 1]).collect() }
    }
}

/// Converts 1-based pairs to 0-based, rejecting ids outside `1..=n`.
pub(crate) fn one_based_pairs(pairs: &[[usize; 2]], n: usize) -> Result<Vec<(usize, usize)>> {
    pairs
        .iter()
        .map(|&[i, j]| {
            for v in [i, j] {
                if v == 0 || v > n {
                    return Err(Error::IndexOutOfRange { index: v, limit: n });
                }
            }
            Ok((i - 1, j - 1))
        })
        .collect()
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { adj: vec![BTreeSet::new(); n] }
    }

    /// Builds a graph from 0-based edges. Duplicates are merged; self-loops
    /// and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::new(n);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::new(n);
        for i in 0..n {
            for j in i + 1..n {
                g.insert(i, j);
            }
        }
        g
    }

    pub fn path(n: usize) -> Self {
        let mut g = Graph::new(n);
        for i in 1..n {
            g.insert(i - 1, i);
        }
        g
    }

    pub fn cycle(n: usize) -> Self {
        let mut g = Graph::path(n);
        if n > 2 {
            g.insert(0, n - 1);
        }
        g
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        let n = self.n();
        if i >= n || j >= n {
            return Err(Error::IndexOutOfRange { index: i.max(j) + 1, limit: n });
        }
        if i == j {
            return Err(Error::InvalidInput(format!("self-loop at vertex {}", i + 1)));
        }
        self.insert(i, j);
        Ok(())
    }

    fn insert(&mut self, i: usize, j: usize) {
        self.adj[i].insert(j);
        self.adj[j].insert(i);
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n() && self.adj[i].contains(&j)
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    /// Edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (i, nbrs) in self.adj.iter().enumerate() {
            out.extend(nbrs.range(i + 1..).map(|&j| (i, j)));
        }
        out
    }

    /// True if `vertices` are pairwise adjacent.
    pub fn is_clique(&self, vertices: &[usize]) -> bool {
        vertices.iter().enumerate().all(|(a, &u)| vertices[a + 1..].iter().all(|&v| self.has_edge(u, v)))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == n
    }

    /// Parses the text format: a header line `n m` followed by `m` lines `i j`
    /// (1-based). Blank lines and lines starting with `#` are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, message: "missing header".into() })?;
        let [n, m] = parse_pair(header, hline)?;
        let mut edges = Vec::with_capacity(m);
        for (no, line) in lines {
            let [i, j] = parse_pair(line, no)?;
            if i == 0 || j == 0 || i > n || j > n {
                return Err(Error::Parse { line: no, message: format!("vertex out of range 1..{n}") });
            }
            if i == j {
                return Err(Error::Parse { line: no, message: "self-loop".into() });
            }
            edges.push((i - 1, j - 1));
        }
        if edges.len() != m {
            return Err(Error::Parse { line: 1, message: format!("header declares {m} edges, found {}", edges.len()) });
        }
        Graph::from_edges(n, &edges)
    }

    pub fn to_text(&self) -> String {
        let edges = self.edges();
        let mut out = format!("{} {}\n", self.n(), edges.len());
        for (i, j) in edges {
            out.push_str(&format!("{} {}\n", i + 1, j + 1));
        }
        out
    }
}

fn parse_pair(line: &str, no: usize) -> Result<[usize; 2]> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(Error::Parse { line: no, message: format!("expected two integers, got {:?}", line) });
    }
    let mut out = [0; 2];
    for (slot, f) in out.iter_mut().zip(fields) {
        *slot = f.parse().map_err(|e| Error::Parse { line: no, message: format!("{e}: {f:?}") })?;
    }
    Ok(out)
}
