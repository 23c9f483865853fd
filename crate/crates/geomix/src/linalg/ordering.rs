//! Fill-reducing ordering by minimum degree on the explicit elimination graph.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use super::sparse::SparseSymMatrix;

/// Returns `perm` with `perm[new] = old`.
///
/// Eliminating a node turns its remaining neighbours into a clique; the next
/// node is always one of minimum current degree, ties going to the lowest
/// index, so the result depends only on the sparsity pattern.
pub fn minimum_degree(matrix: &SparseSymMatrix) -> Vec<usize> {
    let n = matrix.dim();
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for (i, j, _) in matrix.iter() {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }

    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);

    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);

        let mut nbrs: Vec<usize> = adj[v].drain().collect();
        nbrs.sort_unstable();
        for &u in &nbrs {
            adj[u].remove(&v);
        }
        for (a, &u) in nbrs.iter().enumerate() {
            for &t in &nbrs[a + 1..] {
                if adj[u].insert(t) {
                    adj[t].insert(u);
                }
            }
        }
        for &u in &nbrs {
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    perm
}

pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}
