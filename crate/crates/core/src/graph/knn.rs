// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;

use super::{AttributeMatrix, Graph};
use crate::error::{Error, Result};

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest other rows of `x` to row `i`, ties going to the lower index.
fn nearest(x: &AttributeMatrix, i: usize, k: usize) -> Vec<usize> {
    let target = x.row(i);
    let mut candidates: Vec<(f64, usize)> = (0..x.n_rows())
        .filter(|&j| j != i)
        .map(|j| (squared_distance(target, x.row(j)), j))
        .collect();
    let by_distance_then_index =
        |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, by_distance_then_index);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(by_distance_then_index);
    candidates.into_iter().map(|(_, j)| j).collect()
}

/// Unweighted k-nearest-neighbor graph under Euclidean distance.
///
/// Node i is joined to each of its `k` nearest neighbors; an edge exists when
/// either endpoint lists the other, so every node ends up with degree ≥ k.
pub fn build_knn_graph(x: &AttributeMatrix, k: usize) -> Result<Graph> {
    let n = x.n_rows();
    if k == 0 || k >= n {
        return Err(Error::validation(format!(
            "k = {k} must satisfy 1 <= k < N = {n}"
        )));
    }
    let lists: Vec<Vec<usize>> = (0..n).into_par_iter().map(|i| nearest(x, i, k)).collect();
    let edges = lists
        .iter()
        .enumerate()
        .flat_map(|(i, js)| js.iter().map(move |&j| (i, j, 1.0)));
    Graph::from_edges(n, edges)
}
