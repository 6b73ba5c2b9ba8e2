use std::collections::{BTreeMap, BTreeSet};

use super::{Graph, TreeDecomposition};
use crate::error::{Error, Result};

/// Maximum-cardinality search. Returns vertices in visit order; ties go to
/// the smallest index. For a chordal graph the reversed order is a perfect
/// elimination ordering.
pub fn max_cardinality_search(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let mut weight = vec![0usize; n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n).filter(|&v| !done[v]).max_by(|&a, &b| weight[a].cmp(&weight[b]).then(b.cmp(&a))).unwrap();
        done[v] = true;
        order.push(v);
        for &u in g.neighbors(v) {
            if !done[u] {
                weight[u] += 1;
            }
        }
    }
    order
}

/// True if eliminating vertices in `order` creates no fill.
pub fn is_perfect_elimination_order(g: &Graph, order: &[usize]) -> bool {
    let n = g.n();
    if order.len() != n {
        return false;
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in order.iter().enumerate() {
        if v >= n || pos[v] != usize::MAX {
            return false;
        }
        pos[v] = i;
    }
    order.iter().all(|&v| {
        let later: Vec<usize> = g.neighbors(v).iter().copied().filter(|&u| pos[u] > pos[v]).collect();
        match later.iter().min_by_key(|&&u| pos[u]) {
            None => true,
            Some(&first) => later.iter().all(|&u| u == first || g.has_edge(first, u)),
        }
    })
}

/// Returns a perfect elimination ordering if `g` is chordal.
pub fn is_chordal(g: &Graph) -> Option<Vec<usize>> {
    let mut order = max_cardinality_search(g);
    order.reverse();
    is_perfect_elimination_order(g, &order).then_some(order)
}

/// Chordal completion by minimum-degree elimination, ties to the smallest
/// vertex index. Returns the filled graph and the elimination order, which is
/// a perfect elimination ordering of it.
pub fn chordal_complete(g: &Graph) -> (Graph, Vec<usize>) {
    let n = g.n();
    let mut work: Vec<BTreeSet<usize>> = (0..n).map(|v| g.neighbors(v).clone()).collect();
    let mut alive = vec![true; n];
    let mut filled = g.clone();
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n).filter(|&v| alive[v]).min_by_key(|&v| (work[v].len(), v)).unwrap();
        let nbrs: Vec<usize> = work[v].iter().copied().collect();
        for (a, &x) in nbrs.iter().enumerate() {
            for &y in &nbrs[a + 1..] {
                if work[x].insert(y) {
                    work[y].insert(x);
                    filled.add_edge(x, y).expect("fill edge in range");
                }
            }
        }
        for &x in &nbrs {
            work[x].remove(&v);
        }
        work[v].clear();
        alive[v] = false;
        order.push(v);
    }
    (filled, order)
}

fn maximal_cliques(g: &Graph, peo: &[usize]) -> Vec<Vec<usize>> {
    let mut pos = vec![0; g.n()];
    for (i, &v) in peo.iter().enumerate() {
        pos[v] = i;
    }
    let candidates: BTreeSet<Vec<usize>> = peo
        .iter()
        .map(|&v| {
            let mut c: Vec<usize> = g.neighbors(v).iter().copied().filter(|&u| pos[u] > pos[v]).collect();
            c.push(v);
            c.sort_unstable();
            c
        })
        .collect();
    let candidates: Vec<Vec<usize>> = candidates.into_iter().collect();
    let subset = |a: &[usize], b: &[usize]| a.len() < b.len() && a.iter().all(|x| b.binary_search(x).is_ok());
    candidates.iter().filter(|c| !candidates.iter().any(|d| subset(c, d))).cloned().collect()
}

/// Clique tree of a chordal graph: one node per maximal clique (ids follow
/// the lexicographic order of the sorted cliques), joined by a
/// maximum-weight spanning tree of the clique intersection graph. Ties go to
/// the pair with the closest ids, then the smallest first id.
pub fn clique_tree(g: &Graph) -> Result<TreeDecomposition> {
    let peo = is_chordal(g).ok_or(Error::NotChordal)?;
    let cliques = maximal_cliques(g, &peo);
    let c = cliques.len();
    let mut pairs = Vec::with_capacity(c * c.saturating_sub(1) / 2);
    for i in 0..c {
        for j in i + 1..c {
            let w = cliques[i].iter().filter(|x| cliques[j].binary_search(x).is_ok()).count();
            pairs.push((w, i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then((a.2 - a.1).cmp(&(b.2 - b.1))).then(a.1.cmp(&b.1)));
    let mut uf: Vec<usize> = (0..c).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut edges = Vec::with_capacity(c.saturating_sub(1));
    for (_, i, j) in pairs {
        let (ri, rj) = (find(&mut uf, i), find(&mut uf, j));
        if ri != rj {
            uf[ri] = rj;
            edges.push((i, j));
        }
    }
    let bags: BTreeMap<usize, Vec<usize>> = cliques.into_iter().enumerate().collect();
    TreeDecomposition::new(bags, &edges)
}

/// Min-degree chordal completion followed by its clique tree.
pub fn heuristic_decomposition(g: &Graph) -> TreeDecomposition {
    let (filled, _) = chordal_complete(g);
    clique_tree(&filled).expect("completion is chordal")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::twelve_vertex_chordal;

    #[test]
    fn chordal_input_gets_no_fill() {
        let g = twelve_vertex_chordal();
        assert!(is_chordal(&g).is_some());
        let (h, order) = chordal_complete(&g);
        assert_eq!(h, g);
        assert!(is_perfect_elimination_order(&h, &order));
    }

    #[test]
    fn four_cycle_gets_one_chord() {
        let g = Graph::cycle(4);
        assert!(is_chordal(&g).is_none());
        let (h, order) = chordal_complete(&g);
        assert_eq!(h.edge_count(), 5);
        assert!(is_perfect_elimination_order(&h, &order));
        assert_eq!(clique_tree(&h).unwrap().width().unwrap(), 2);
    }

    #[test]
    fn empty_graph_unchanged() {
        let g = Graph::new(4);
        let (h, _) = chordal_complete(&g);
        assert_eq!(h, g);
        let td = clique_tree(&g).unwrap();
        assert_eq!(td.node_count(), 4);
        assert!(td.is_path());
        assert_eq!(td.width().unwrap(), 0);
    }

    #[test]
    fn twelve_vertex_cliques() {
        let td = clique_tree(&twelve_vertex_chordal()).unwrap();
        let one_based: Vec<Vec<usize>> = td.bags().values().map(|b| b.iter().map(|v| v + 1).collect()).collect();
        assert_eq!(
            one_based,
            vec![
                vec![1, 2, 5, 6],
                vec![1, 2, 8],
                vec![1, 6, 7],
                vec![2, 3, 4, 5],
                vec![2, 3, 9],
                vec![3, 4, 10],
                vec![4, 5, 11],
                vec![5, 6, 12],
            ]
        );
        assert_eq!(td.width().unwrap(), 3);
        assert_eq!(td.degree(0), 4);
        assert_eq!(td.degree(3), 4);
    }

    #[test]
    fn complete_and_path() {
        let td = clique_tree(&Graph::complete(5)).unwrap();
        assert_eq!(td.node_count(), 1);
        assert_eq!(td.bag(0), [0, 1, 2, 3, 4]);
        let td = clique_tree(&Graph::path(5)).unwrap();
        assert_eq!(td.node_count(), 4);
        assert!(td.bags().values().all(|b| b.len() == 2));
        assert!(td.validate(&Graph::path(5)));
    }

    #[test]
    fn non_chordal_rejected() {
        assert!(matches!(clique_tree(&Graph::cycle(5)), Err(Error::NotChordal)));
    }
}
