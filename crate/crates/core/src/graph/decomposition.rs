use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// A tree whose nodes carry bags of graph vertices. Node ids are arbitrary
/// but stable; bags are kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TdFile", into = "TdFile")]
pub struct TreeDecomposition {
    bags: BTreeMap<usize, Vec<usize>>,
    adj: BTreeMap<usize, BTreeSet<usize>>,
    root: Option<usize>,
    parent: BTreeMap<usize, usize>,
    children: BTreeMap<usize, Vec<usize>>,
}

/// On-disk form; node ids and vertices are 1-based.
#[derive(Serialize, Deserialize)]
struct TdFile {
    nodes: Vec<usize>,
    edges: Vec<[usize; 2]>,
    bags: BTreeMap<usize, Vec<usize>>,
    root: Option<usize>,
}

impl TryFrom<TdFile> for TreeDecomposition {
    type Error = Error;

    fn try_from(f: TdFile) -> Result<Self> {
        let dec = |x: usize, what: &str| {
            x.checked_sub(1).ok_or_else(|| Error::InvalidDecomposition(format!("{what} ids are 1-based, got 0")))
        };
        let mut bags = BTreeMap::new();
        for &t in &f.nodes {
            let bag = f
                .bags
                .get(&t)
                .ok_or_else(|| Error::InvalidDecomposition(format!("node {t} has no bag")))?;
            let bag = bag.iter().map(|&v| dec(v, "vertex")).collect::<Result<Vec<_>>>()?;
            bags.insert(dec(t, "node")?, bag);
        }
        if f.bags.len() != f.nodes.len() {
            return Err(Error::InvalidDecomposition("bags listed for unknown nodes".into()));
        }
        let edges = f
            .edges
            .iter()
            .map(|&[a, b]| Ok((dec(a, "node")?, dec(b, "node")?)))
            .collect::<Result<Vec<_>>>()?;
        let td = TreeDecomposition::new(bags, &edges)?;
        match f.root {
            Some(r) => td.rooted_at(dec(r, "node")?),
            None => Ok(td),
        }
    }
}

impl From<TreeDecomposition> for TdFile {
    fn from(td: TreeDecomposition) -> Self {
        TdFile {
            nodes: td.nodes().map(|t| t + 1).collect(),
            edges: td.tree_edges().into_iter().map(|(a, b)| [a + 1, b + 1]).collect(),
            bags: td.bags.iter().map(|(&t, b)| (t + 1, b.iter().map(|v| v + 1).collect())).collect(),
            root: td.root.map(|r| r + 1),
        }
    }
}

impl TreeDecomposition {
    /// Builds an unrooted decomposition. The edges must form a tree on the
    /// bag keys; bag contents are only checked against a graph by
    /// [`validate`](Self::validate).
    pub fn new(bags: BTreeMap<usize, Vec<usize>>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj: BTreeMap<usize, BTreeSet<usize>> = bags.keys().map(|&t| (t, BTreeSet::new())).collect();
        for &(a, b) in edges {
            if a == b || !bags.contains_key(&a) || !bags.contains_key(&b) {
                return Err(Error::InvalidDecomposition(format!("bad tree edge ({a}, {b})")));
            }
            if !adj.get_mut(&a).unwrap().insert(b) {
                return Err(Error::InvalidDecomposition(format!("duplicate tree edge ({a}, {b})")));
            }
            adj.get_mut(&b).unwrap().insert(a);
        }
        if !bags.is_empty() && edges.len() != bags.len() - 1 {
            return Err(Error::InvalidDecomposition(format!("{} nodes need {} edges, got {}", bags.len(), bags.len() - 1, edges.len())));
        }
        let bags = bags
            .into_iter()
            .map(|(t, mut b)| {
                b.sort_unstable();
                b.dedup();
                (t, b)
            })
            .collect();
        let td = TreeDecomposition { bags, adj, root: None, parent: BTreeMap::new(), children: BTreeMap::new() };
        if td.bfs_from(td.first_node()).len() != td.node_count() {
            return Err(Error::InvalidDecomposition("tree edges are not connected".into()));
        }
        Ok(td)
    }

    /// One node whose bag holds every vertex.
    pub fn single(n: usize) -> Self {
        let bags = BTreeMap::from([(0, (0..n).collect())]);
        TreeDecomposition::new(bags, &[]).unwrap().rooted_at(0).unwrap()
    }

    /// A path of bags with node ids `0..bags.len()` in order.
    pub fn path(bags: Vec<Vec<usize>>) -> Result<Self> {
        let k = bags.len();
        let edges: Vec<_> = (1..k).map(|t| (t - 1, t)).collect();
        TreeDecomposition::new(bags.into_iter().enumerate().collect(), &edges)
    }

    fn first_node(&self) -> Option<usize> {
        self.bags.keys().next().copied()
    }

    fn bfs_from(&self, start: Option<usize>) -> Vec<usize> {
        let Some(s) = start else { return Vec::new() };
        let mut seen = BTreeSet::from([s]);
        let mut order = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(t) = queue.pop_front() {
            for &u in &self.adj[&t] {
                if seen.insert(u) {
                    order.push(u);
                    queue.push_back(u);
                }
            }
        }
        order
    }

    pub fn node_count(&self) -> usize {
        self.bags.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.bags.keys().copied()
    }

    pub fn bag(&self, t: usize) -> &[usize] {
        &self.bags[&t]
    }

    pub fn bags(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.bags
    }

    pub fn neighbors(&self, t: usize) -> &BTreeSet<usize> {
        &self.adj[&t]
    }

    pub fn degree(&self, t: usize) -> usize {
        self.adj[&t].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.values().map(|a| a.len()).max().unwrap_or(0)
    }

    /// Tree edges `(a, b)` with `a < b`, sorted.
    pub fn tree_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (&a, nbrs) in &self.adj {
            out.extend(nbrs.range(a + 1..).map(|&b| (a, b)));
        }
        out
    }

    /// True if the tree itself is a path (every node has degree at most 2).
    pub fn is_path(&self) -> bool {
        self.max_degree() <= 2
    }

    pub fn width(&self) -> Result<usize> {
        self.bags
            .values()
            .map(|b| b.len().saturating_sub(1))
            .max()
            .ok_or_else(|| Error::InvalidDecomposition("empty decomposition".into()))
    }

    /// Checks vertex cover, edge cover and running intersection against `g`.
    pub fn validate(&self, g: &Graph) -> bool {
        self.validation_error(g).is_none()
    }

    /// Like [`validate`](Self::validate) but says which condition failed.
    pub fn validation_error(&self, g: &Graph) -> Option<String> {
        let n = g.n();
        let mut holders: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (&t, bag) in &self.bags {
            for &v in bag {
                if v >= n {
                    return Some(format!("bag {t} holds vertex {} outside 1..{n}", v + 1));
                }
                holders[v].push(t);
            }
        }
        if let Some(v) = holders.iter().position(|h| h.is_empty()) {
            return Some(format!("vertex {} is in no bag", v + 1));
        }
        for (i, j) in g.edges() {
            let covered = holders[i].iter().any(|t| self.bags[t].binary_search(&j).is_ok());
            if !covered {
                return Some(format!("edge {}-{} is in no bag", i + 1, j + 1));
            }
        }
        // Running intersection: the nodes holding v induce a connected subtree.
        for (v, h) in holders.iter().enumerate() {
            let set: BTreeSet<usize> = h.iter().copied().collect();
            let mut seen = BTreeSet::from([h[0]]);
            let mut stack = vec![h[0]];
            while let Some(t) = stack.pop() {
                for u in &self.adj[&t] {
                    if set.contains(u) && seen.insert(*u) {
                        stack.push(*u);
                    }
                }
            }
            if seen.len() != set.len() {
                return Some(format!("nodes holding vertex {} are not connected", v + 1));
            }
        }
        None
    }

    /// Replaces node `x` of degree `k >= 4` by a path `x_1 .. x_k` of copies
    /// of its bag. Neighbours are taken in ascending id order and `y_i`
    /// attaches to `x_i`; `x_1` keeps the id of `x` and the others get fresh
    /// ids above the current maximum. Any rooting is dropped.
    pub fn split_vertex(&self, x: usize) -> Result<Self> {
        let nbrs: Vec<usize> = self
            .adj
            .get(&x)
            .ok_or_else(|| Error::InvalidDecomposition(format!("no node {x}")))?
            .iter()
            .copied()
            .collect();
        let k = nbrs.len();
        if k < 4 {
            return Err(Error::DegreeTooSmall { node: x, degree: k });
        }
        let next = self.bags.keys().next_back().unwrap() + 1;
        let ids: Vec<usize> = std::iter::once(x).chain(next..next + k - 1).collect();
        let mut out = self.clone();
        out.clear_root();
        out.adj.get_mut(&x).unwrap().clear();
        for &id in &ids[1..] {
            out.bags.insert(id, self.bags[&x].clone());
            out.adj.insert(id, BTreeSet::new());
        }
        for (i, &y) in nbrs.iter().enumerate() {
            let ny = out.adj.get_mut(&y).unwrap();
            ny.remove(&x);
            ny.insert(ids[i]);
            out.adj.get_mut(&ids[i]).unwrap().insert(y);
        }
        for w in ids.windows(2) {
            out.adj.get_mut(&w[0]).unwrap().insert(w[1]);
            out.adj.get_mut(&w[1]).unwrap().insert(w[0]);
        }
        Ok(out)
    }

    /// Splits nodes of degree greater than 3, smallest id first, until the
    /// tree has maximum degree 3. Returns the input unchanged when it is
    /// already binary.
    pub fn to_binary(&self) -> Self {
        let mut td = self.clone();
        while let Some(x) = td.adj.iter().find(|(_, a)| a.len() > 3).map(|(&t, _)| t) {
            td = td.split_vertex(x).expect("degree checked");
        }
        td
    }

    /// Roots a tree of maximum degree 3 so every node has at most two
    /// children. Paths are rooted at their smallest-id endpoint, otherwise
    /// the root is the smallest id of degree below 3.
    pub fn root_binary(&self) -> Result<Self> {
        if let Some((&t, a)) = self.adj.iter().find(|(_, a)| a.len() > 3) {
            return Err(Error::NotBinary { node: t, children: a.len() });
        }
        let root = if self.is_path() {
            self.adj.iter().find(|(_, a)| a.len() <= 1).map(|(&t, _)| t)
        } else {
            self.adj.iter().find(|(_, a)| a.len() < 3).map(|(&t, _)| t)
        };
        let root = root.ok_or_else(|| Error::InvalidDecomposition("empty decomposition".into()))?;
        self.rooted_at(root)
    }

    /// Orients the tree away from `root`. Children are listed in ascending id.
    pub fn rooted_at(&self, root: usize) -> Result<Self> {
        if !self.bags.contains_key(&root) {
            return Err(Error::InvalidDecomposition(format!("root {root} is not a node")));
        }
        let mut out = self.clone();
        out.clear_root();
        out.root = Some(root);
        for t in self.bfs_from(Some(root)) {
            let kids: Vec<usize> = self.adj[&t].iter().copied().filter(|u| out.parent.get(&t) != Some(u)).collect();
            for &c in &kids {
                out.parent.insert(c, t);
            }
            out.children.insert(t, kids);
        }
        Ok(out)
    }

    fn clear_root(&mut self) {
        self.root = None;
        self.parent.clear();
        self.children.clear();
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn is_rooted(&self) -> bool {
        self.root.is_some()
    }

    pub fn parent(&self, t: usize) -> Option<usize> {
        self.parent.get(&t).copied()
    }

    /// Children of `t` in ascending id; empty when unrooted.
    pub fn children(&self, t: usize) -> &[usize] {
        self.children.get(&t).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Breadth-first order from the root (parents before children).
    pub fn bfs_order(&self) -> Result<Vec<usize>> {
        let root = self.root.ok_or(Error::NotRooted)?;
        let mut order = vec![root];
        let mut i = 0;
        while i < order.len() {
            order.extend_from_slice(self.children(order[i]));
            i += 1;
        }
        Ok(order)
    }

    /// Depth-first post-order from the root (children before parents),
    /// visiting children in ascending id.
    pub fn post_order(&self) -> Result<Vec<usize>> {
        let root = self.root.ok_or(Error::NotRooted)?;
        let mut order = Vec::with_capacity(self.node_count());
        let mut stack = vec![(root, 0usize)];
        while let Some((t, i)) = stack.pop() {
            let kids = self.children(t);
            if i < kids.len() {
                stack.push((t, i + 1));
                stack.push((kids[i], 0));
            } else {
                order.push(t);
            }
        }
        Ok(order)
    }

    /// Maximum number of children over all nodes (requires a root).
    pub fn max_children(&self) -> Result<usize> {
        self.root.ok_or(Error::NotRooted)?;
        Ok(self.children.values().map(Vec::len).max().unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::twelve_vertex_chordal;
    use crate::graph::clique_tree;

    fn star(k: usize) -> TreeDecomposition {
        let bags = (0..=k).map(|t| (t, vec![t])).collect();
        let edges: Vec<_> = (1..=k).map(|t| (0, t)).collect();
        TreeDecomposition::new(bags, &edges).unwrap()
    }

    #[test]
    fn rejects_cycles_and_forests() {
        let bags: BTreeMap<usize, Vec<usize>> = (0..3).map(|t| (t, vec![t])).collect();
        assert!(TreeDecomposition::new(bags.clone(), &[(0, 1), (1, 2), (2, 0)]).is_err());
        assert!(TreeDecomposition::new(bags.clone(), &[(0, 1)]).is_err());
        assert!(TreeDecomposition::new(bags, &[(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn single_bag_is_valid_for_any_graph() {
        let g = Graph::cycle(6);
        let td = TreeDecomposition::single(6);
        assert!(td.validate(&g));
        assert_eq!(td.width().unwrap(), 5);
    }

    #[test]
    fn dropping_a_vertex_breaks_edge_cover() {
        let g = twelve_vertex_chordal();
        let td = clique_tree(&g).unwrap();
        assert!(td.validate(&g));
        let t = td.nodes().find(|&t| td.bag(t) == [0, 1, 7]).unwrap();
        let mut bags = td.bags().clone();
        bags.insert(t, vec![0, 7]);
        let broken = TreeDecomposition::new(bags, &td.tree_edges()).unwrap();
        let msg = broken.validation_error(&g).unwrap();
        assert!(msg.contains("edge 2-8"), "{msg}");
    }

    #[test]
    fn running_intersection_is_checked() {
        let g = Graph::path(3);
        let td = TreeDecomposition::path(vec![vec![0, 1], vec![1, 2], vec![0]]).unwrap();
        assert!(!td.validate(&g));
    }

    #[test]
    fn split_degree_four_gives_path_of_copies() {
        let td = star(4);
        let s = td.split_vertex(0).unwrap();
        assert_eq!(s.node_count(), 8);
        assert_eq!(s.max_degree(), 3);
        assert_eq!(s.neighbors(0).iter().copied().collect::<Vec<_>>(), vec![1, 5]);
        assert_eq!(s.neighbors(5).iter().copied().collect::<Vec<_>>(), vec![0, 2, 6]);
        assert_eq!(s.neighbors(7).iter().copied().collect::<Vec<_>>(), vec![4, 6]);
        for t in [5, 6, 7] {
            assert_eq!(s.bag(t), [0]);
        }
        assert!(matches!(star(3).split_vertex(0), Err(Error::DegreeTooSmall { degree: 3, .. })));
    }

    #[test]
    fn split_of_clique_tree_hub() {
        let g = twelve_vertex_chordal();
        let td = clique_tree(&g).unwrap();
        let hub = td.nodes().find(|&t| td.bag(t) == [0, 1, 4, 5]).unwrap();
        let high = |d: &TreeDecomposition| d.nodes().filter(|&t| d.degree(t) > 3).count();
        let s = td.split_vertex(hub).unwrap();
        assert!(s.validate(&g));
        assert_eq!(s.width().unwrap(), 3);
        assert_eq!(high(&s), high(&td) - 1);
        let b = td.to_binary();
        assert_eq!(b.node_count(), 14);
        assert_eq!(b.max_degree(), 3);
        assert!(b.validate(&g));
    }

    #[test]
    fn binary_tree_is_unchanged() {
        let td = star(3);
        assert_eq!(td.to_binary(), td);
    }

    #[test]
    fn rooting_paths_and_trees() {
        let p = TreeDecomposition::path(vec![vec![0]; 5]).unwrap();
        let r = p.root_binary().unwrap();
        assert_eq!(r.root(), Some(0));
        assert_eq!(r.max_children().unwrap(), 1);
        assert_eq!(r.post_order().unwrap(), vec![4, 3, 2, 1, 0]);
        assert_eq!(r.bfs_order().unwrap(), vec![0, 1, 2, 3, 4]);

        let b = clique_tree(&twelve_vertex_chordal()).unwrap().to_binary().root_binary().unwrap();
        assert!(b.max_children().unwrap() <= 2);
        assert_eq!(b.post_order().unwrap().last().copied(), b.root());

        let s = TreeDecomposition::single(3);
        assert_eq!(s.root(), Some(0));
        assert!(s.children(0).is_empty());
        assert!(star(4).root_binary().is_err());
    }

    #[test]
    fn json_round_trip_keeps_root() {
        let td = TreeDecomposition::path(vec![vec![0, 1], vec![1, 2]]).unwrap().rooted_at(1).unwrap();
        let s = serde_json::to_string(&td).unwrap();
        assert!(s.contains(r#""root":2"#), "{s}");
        let back: TreeDecomposition = serde_json::from_str(&s).unwrap();
        assert_eq!(back, td);
    }
}
