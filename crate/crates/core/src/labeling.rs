// SPDX-License-Identifier: Apache-2.0

//! Attribute-based partitions: k-means for continuous attributes, first-appearance
//! coding for categorical ones, and normalized mutual information between partitions.

use std::collections::HashMap;
use std::hash::Hash;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeMatrix, Partition};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub n_restarts: usize,
    pub seed: u64,
    /// z-score each column before clustering.
    pub standardize: bool,
}

impl KmeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KmeansConfig {
            k,
            max_iters: 300,
            n_restarts: 10,
            seed,
            standardize: false,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.max_iters == 0 || self.n_restarts == 0 {
            return Err(Error::validation(
                "k-means needs k, max_iters and n_restarts all >= 1",
            ));
        }
        if self.k > n {
            return Err(Error::validation(format!(
                "cannot form {} clusters from {n} points",
                self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansFit {
    pub partition: Partition,
    /// K×p centroids, row-major.
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Lloyd<'a> {
    x: &'a AttributeMatrix,
    k: usize,
    dims: usize,
}

impl Lloyd<'_> {
    fn centroid(centroids: &[f64], c: usize, dims: usize) -> &[f64] {
        &centroids[c * dims..(c + 1) * dims]
    }

    /// k-means++ seeding. Falls back to a uniform pick among unused points when
    /// every remaining point coincides with a chosen centre.
    fn seed_centroids<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.x.n_rows();
        let mut chosen = vec![false; n];
        let first = rng.random_range(0..n);
        chosen[first] = true;
        let mut centroids = self.x.row(first).to_vec();
        let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(self.x.row(i), self.x.row(first))).collect();

        while centroids.len() < self.k * self.dims {
            let total: f64 = nearest.iter().sum();
            let pick = if total > 0.0 {
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = None;
                for (i, &d) in nearest.iter().enumerate() {
                    acc += d;
                    if d > 0.0 && acc > target {
                        pick = Some(i);
                        break;
                    }
                }
                // rounding can leave `target` just past the final sum
                pick.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).unwrap())
            } else {
                let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
                free[rng.random_range(0..free.len())]
            };
            chosen[pick] = true;
            let row = self.x.row(pick);
            centroids.extend_from_slice(row);
            for (i, d) in nearest.iter_mut().enumerate() {
                *d = d.min(sq_dist(self.x.row(i), row));
            }
        }
        centroids
    }

    /// Nearest centroid for every point, lowest index on ties. Returns whether anything moved.
    fn assign(&self, centroids: &[f64], assignment: &mut [usize]) -> bool {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let row = self.x.row(i);
            let mut best = (f64::INFINITY, 0);
            for c in 0..self.k {
                let d = sq_dist(row, Self::centroid(centroids, c, self.dims));
                if d < best.0 {
                    best = (d, c);
                }
            }
            if *slot != best.1 {
                *slot = best.1;
                changed = true;
            }
        }
        changed
    }

    /// Moves the point farthest from its centroid into each empty cluster.
    fn repair_empty(&self, centroids: &mut [f64], assignment: &mut [usize]) -> bool {
        let mut sizes = vec![0usize; self.k];
        for &c in assignment.iter() {
            sizes[c] += 1;
        }
        let mut repaired = false;
        for empty in 0..self.k {
            if sizes[empty] > 0 {
                continue;
            }
            let mut best: Option<(f64, usize)> = None;
            for (i, &c) in assignment.iter().enumerate() {
                if sizes[c] < 2 {
                    continue;
                }
                let d = sq_dist(self.x.row(i), Self::centroid(centroids, c, self.dims));
                if best.is_none_or(|(bd, _)| d > bd) {
                    best = Some((d, i));
                }
            }
            let (_, i) = best.expect("k <= n guarantees a donor cluster");
            sizes[assignment[i]] -= 1;
            sizes[empty] += 1;
            assignment[i] = empty;
            centroids[empty * self.dims..(empty + 1) * self.dims].copy_from_slice(self.x.row(i));
            repaired = true;
        }
        repaired
    }

    fn update(&self, assignment: &[usize]) -> Vec<f64> {
        let mut sums = vec![0.0; self.k * self.dims];
        let mut counts = vec![0usize; self.k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c * self.dims..(c + 1) * self.dims].iter_mut().zip(self.x.row(i)) {
                *s += v;
            }
        }
        for c in 0..self.k {
            let count = counts[c].max(1) as f64;
            sums[c * self.dims..(c + 1) * self.dims]
                .iter_mut()
                .for_each(|s| *s /= count);
        }
        sums
    }

    fn run(&self, seed: u64, max_iters: usize) -> (Vec<usize>, Vec<f64>, usize, bool) {
        let mut rng = rng::rng_from_seed(seed);
        let mut centroids = self.seed_centroids(&mut rng);
        let mut assignment = vec![usize::MAX; self.x.n_rows()];
        let mut converged = false;
        let mut iterations = 0;
        while iterations < max_iters {
            iterations += 1;
            let moved = self.assign(&centroids, &mut assignment);
            let repaired = self.repair_empty(&mut centroids, &mut assignment);
            centroids = self.update(&assignment);
            if !moved && !repaired {
                converged = true;
                break;
            }
        }
        (assignment, centroids, iterations, converged)
    }
}

/// Lloyd's algorithm with k-means++ seeding, keeping the restart with the lowest
/// within-cluster sum of squares.
pub fn kmeans(x: &AttributeMatrix, cfg: &KmeansConfig) -> Result<KmeansFit> {
    cfg.validate(x.n_rows())?;
    let data = if cfg.standardize {
        x.standardized()
    } else {
        x.clone()
    };
    let lloyd = Lloyd {
        x: &data,
        k: cfg.k,
        dims: data.n_cols(),
    };
    let best = (0..cfg.n_restarts as u64)
        .into_par_iter()
        .map(|r| {
            let (assignment, centroids, iterations, converged) =
                lloyd.run(rng::derive_seed(cfg.seed, r), cfg.max_iters);
            let wcss: f64 = assignment
                .iter()
                .enumerate()
                .map(|(i, &c)| sq_dist(data.row(i), Lloyd::centroid(&centroids, c, lloyd.dims)))
                .sum();
            (wcss, r, assignment, centroids, iterations, converged)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one restart");
    let (wcss, _, assignment, centroids, iterations, converged) = best;
    Ok(KmeansFit {
        partition: Partition::new(assignment, cfg.k)?,
        centroids,
        wcss,
        iterations,
        converged,
    })
}

pub fn kmeans_label(x: &AttributeMatrix, cfg: &KmeansConfig) -> Result<Partition> {
    kmeans(x, cfg).map(|fit| fit.partition)
}

/// Codes distinct values as 0, 1, ... in order of first appearance.
pub fn discrete_label<T: Eq + Hash>(column: &[T]) -> Result<Partition> {
    if column.is_empty() {
        return Err(Error::validation("cannot label an empty column"));
    }
    let mut codes: HashMap<&T, usize> = HashMap::new();
    let labels = column
        .iter()
        .map(|v| {
            let next = codes.len();
            *codes.entry(v).or_insert(next)
        })
        .collect();
    Partition::new(labels, codes.len())
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `2 I(a; b) / (H(a) + H(b))`, natural logs.
///
/// Two single-class partitions score 1; any pair with zero mutual information
/// otherwise scores 0.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "partitions have different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let sizes_a = a.class_sizes();
    let sizes_b = b.class_sizes();
    let h_a = entropy(sizes_a.iter().copied(), n);
    let h_b = entropy(sizes_b.iter().copied(), n);
    if h_a == 0.0 && h_b == 0.0 {
        return Ok(1.0);
    }
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        *joint.entry((x, y)).or_default() += 1;
    }
    let mutual: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| {
            let c = c as f64;
            (c / n) * (n * c / (sizes_a[x] as f64 * sizes_b[y] as f64)).ln()
        })
        .sum();
    if mutual <= 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * mutual / (h_a + h_b)).clamp(0.0, 1.0))
}
