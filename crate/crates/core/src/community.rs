// SPDX-License-Identifier: Apache-2.0

//! Modularity and Louvain community detection (resolution 1).

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::{Graph, Partition};
use crate::rng;

/// Newman modularity `Q = (1/2m) Σ_ij [A_ij - k_i k_j / 2m] δ(z_i, z_j)`.
pub fn modularity(graph: &Graph, z: &Partition) -> Result<f64> {
    z.check_len(graph.n_nodes())?;
    let two_m = graph.total_degree();
    if two_m <= 0.0 {
        return Err(Error::validation("modularity is undefined for a graph without edges"));
    }
    let labels = z.labels();
    let mut internal = 0.0;
    for (i, j, w) in graph.edges() {
        if labels[i] == labels[j] {
            internal += 2.0 * w;
        }
    }
    let mut class_degree = vec![0.0; z.n_classes()];
    for (i, &c) in labels.iter().enumerate() {
        class_degree[c] += graph.weighted_degree(i);
    }
    let expected: f64 = class_degree.iter().map(|d| (d / two_m).powi(2)).sum();
    Ok(internal / two_m - expected)
}

/// Weighted graph at one aggregation level. `self_weight[i]` is `A_ii` in the
/// ordered-pair sense (an aggregated community's internal weight counted twice).
struct Level {
    adjacency: Vec<Vec<(usize, f64)>>,
    self_weight: Vec<f64>,
    degree: Vec<f64>,
}

impl Level {
    fn from_graph(graph: &Graph) -> Self {
        let n = graph.n_nodes();
        Level {
            adjacency: (0..n).map(|i| graph.neighbors(i).collect()).collect(),
            self_weight: vec![0.0; n],
            degree: (0..n).map(|i| graph.weighted_degree(i)).collect(),
        }
    }

    fn len(&self) -> usize {
        self.adjacency.len()
    }

    fn modularity(&self, community: &[usize], two_m: f64) -> f64 {
        let k = community.iter().max().map_or(0, |&m| m + 1);
        let mut internal = vec![0.0; k];
        let mut total = vec![0.0; k];
        for i in 0..self.len() {
            let c = community[i];
            internal[c] += self.self_weight[i];
            total[c] += self.degree[i];
            for &(j, w) in &self.adjacency[i] {
                if community[j] == c {
                    internal[c] += w;
                }
            }
        }
        (0..k)
            .map(|c| internal[c] / two_m - (total[c] / two_m).powi(2))
            .sum()
    }

    /// Local moving phase. Returns consecutive community ids and whether any node moved.
    fn local_moves<R: rand::Rng>(&self, two_m: f64, rng: &mut R) -> (Vec<usize>, bool) {
        let n = self.len();
        let mut community: Vec<usize> = (0..n).collect();
        let mut total = self.degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut link = vec![0.0; n];
        let mut seen = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut improved = false;
        loop {
            let mut moved = false;
            for &i in &order {
                let own = community[i];
                let k_i = self.degree[i];
                for &(j, w) in &self.adjacency[i] {
                    let c = community[j];
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    link[c] += w;
                }
                total[own] -= k_i;

                let gain = |c: usize, link: &[f64]| link[c] - total[c] * k_i / two_m;
                let mut best = own;
                let mut best_gain = gain(own, &link);
                for &c in &touched {
                    let g = gain(c, &link);
                    if g > best_gain + 1e-12 * k_i.max(1.0) {
                        best = c;
                        best_gain = g;
                    }
                }
                total[best] += k_i;
                community[i] = best;
                if best != own {
                    moved = true;
                    improved = true;
                }
                for &c in &touched {
                    link[c] = 0.0;
                    seen[c] = false;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
        }
        (renumber(&community), improved)
    }

    fn aggregate(&self, community: &[usize]) -> Level {
        let k = community.iter().max().map_or(0, |&m| m + 1);
        let mut weights: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
        let mut self_weight = vec![0.0; k];
        let mut degree = vec![0.0; k];
        for i in 0..self.len() {
            let c = community[i];
            self_weight[c] += self.self_weight[i];
            degree[c] += self.degree[i];
            for &(j, w) in &self.adjacency[i] {
                let d = community[j];
                if c == d {
                    self_weight[c] += w;
                } else {
                    *weights[c].entry(d).or_default() += w;
                }
            }
        }
        Level {
            adjacency: weights.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_weight,
            degree,
        }
    }
}

fn renumber(community: &[usize]) -> Vec<usize> {
    let mut map = vec![usize::MAX; community.len()];
    let mut next = 0;
    community
        .iter()
        .map(|&c| {
            if map[c] == usize::MAX {
                map[c] = next;
                next += 1;
            }
            map[c]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LouvainResult {
    pub partition: Partition,
    /// Modularity after each aggregation level, starting with the singleton partition.
    pub modularity_trace: Vec<f64>,
}

/// Louvain local moving plus aggregation until no move improves modularity.
/// Node visit order at each level is shuffled from `seed`.
pub fn louvain_with_trace(graph: &Graph, seed: u64) -> Result<LouvainResult> {
    let n = graph.n_nodes();
    if n == 0 {
        return Err(Error::validation("graph has no nodes"));
    }
    let two_m = graph.total_degree();
    let mut membership: Vec<usize> = (0..n).collect();
    if two_m <= 0.0 {
        return Ok(LouvainResult {
            partition: Partition::new(membership, n)?,
            modularity_trace: Vec::new(),
        });
    }
    let mut level = Level::from_graph(graph);
    let mut trace = vec![level.modularity(&(0..n).collect::<Vec<_>>(), two_m)];
    for depth in 0.. {
        let (community, improved) = level.local_moves(two_m, &mut rng::stream(seed, depth));
        if !improved {
            break;
        }
        trace.push(level.modularity(&community, two_m));
        for m in membership.iter_mut() {
            *m = community[*m];
        }
        level = level.aggregate(&community);
    }
    let k = membership.iter().max().map_or(0, |&m| m + 1);
    Ok(LouvainResult {
        partition: Partition::new(renumber(&membership), k)?,
        modularity_trace: trace,
    })
}

pub fn louvain(graph: &Graph, seed: u64) -> Result<Partition> {
    louvain_with_trace(graph, seed).map(|r| r.partition)
}
