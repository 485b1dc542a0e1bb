//! k-nearest-neighbour graphs and shortest paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par::map_indices;

/// Indices of the `count` nearest rows, nearest first, ties broken by index.
/// `exclude` removes one index (the point itself) from consideration.
pub fn nearest(sq_dists: &[f64], count: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sq_dists.len()).filter(|&j| Some(j) != exclude).collect();
    idx.sort_by(|&a, &b| {
        sq_dists[a]
            .partial_cmp(&sq_dists[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(count);
    idx
}

/// Neighbour lists for every training row of a squared-distance matrix.
pub fn knn_lists(sq_dists: &DMatrix<f64>, count: usize) -> Vec<Vec<usize>> {
    let n = sq_dists.nrows();
    map_indices(n, |i| {
        let row: Vec<f64> = (0..n).map(|j| sq_dists[(i, j)]).collect();
        nearest(&row, count, Some(i))
    })
}

/// Symmetrized adjacency: `j` is adjacent to `i` if either lists the other.
pub fn symmetric_adjacency(lists: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = lists.to_vec();
    for (i, l) in lists.iter().enumerate() {
        for &j in l {
            if !lists[j].contains(&i) {
                adj[j].push(i);
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

pub fn component_count(adj: &[Vec<usize>]) -> usize {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    components
}

pub fn require_connected(adj: &[Vec<usize>]) -> Result<()> {
    match component_count(adj) {
        0 | 1 => Ok(()),
        components => Err(Error::DisconnectedGraph { components }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest path lengths over a weighted adjacency list.
pub fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        node: source,
    });
    while let Some(Frontier { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(Frontier { dist: nd, node: next });
            }
        }
    }
    dist
}

/// All-pairs geodesic distances, symmetrized by taking the smaller direction.
pub fn all_pairs_geodesic(adj: &[Vec<(usize, f64)>]) -> DMatrix<f64> {
    let n = adj.len();
    let rows = map_indices(n, |s| dijkstra(adj, s));
    DMatrix::from_fn(n, n, |i, j| rows[i][j].min(rows[j][i]))
}
