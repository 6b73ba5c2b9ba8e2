use super::Graph;
use crate::error::{Error, Result};

/// Largest graph accepted by [`brute_force_treewidth`].
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Exact tree-width by dynamic programming over vertex subsets: the best
/// elimination ordering of a set `S` eliminated first costs
/// `min over v in S of max(TW(S \ v), |Q(S \ v, v)|)` where `Q(S, v)` is the
/// set of vertices outside `S ∪ {v}` reachable from `v` through `S`.
pub fn brute_force_treewidth(g: &Graph) -> Result<usize> {
    let n = g.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { n, limit: BRUTE_FORCE_LIMIT });
    }
    if n == 0 {
        return Ok(0);
    }
    let nbr: Vec<u32> = (0..n).map(|v| g.neighbors(v).iter().fold(0u32, |m, &u| m | 1 << u)).collect();
    let q = |s: u32, v: usize| -> u32 {
        // Flood from v through s; count reached vertices outside s ∪ {v}.
        let mut reached = 1u32 << v;
        let mut frontier = reached;
        let mut outside = 0u32;
        while frontier != 0 {
            let mut next = 0u32;
            let mut f = frontier;
            while f != 0 {
                let u = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= nbr[u];
            }
            next &= !reached;
            reached |= next;
            outside |= next & !s;
            frontier = next & s;
        }
        outside.count_ones()
    };
    let full = (1u32 << n) - 1;
    let mut tw = vec![u32::MAX; 1 << n];
    tw[0] = 0;
    for s in 1..=full {
        let mut best = u32::MAX;
        let mut bits = s;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let rest = s & !(1 << v);
            best = best.min(tw[rest as usize].max(q(rest, v)));
        }
        tw[s as usize] = best;
    }
    Ok(tw[full as usize] as usize)
}
