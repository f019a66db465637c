// SPDX-License-Identifier: Apache-2.0

//! Blockmodel entropy significance test (BESTest) baseline.
//!
//! Counts use ordered node pairs: an edge inside block r adds 2 to `m_rr`, an
//! edge between r ≠ s adds 1 to both `m_rs` and `m_sr`, and the pair count for
//! (r, s) is `n_r · n_s` (self-pairs included). Edge weights are ignored; any
//! stored edge counts once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Partition};
use crate::rng;

pub const DEFAULT_PERMUTATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    n_classes: usize,
    /// K×K ordered-pair edge counts, row-major.
    edge_counts: Vec<f64>,
    sizes: Vec<usize>,
}

impl BlockStats {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn edges_between(&self, r: usize, s: usize) -> f64 {
        self.edge_counts[r * self.n_classes + s]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Maximum-likelihood block density `m_rs / (n_r n_s)`; 0 when a block is empty.
    pub fn density(&self, r: usize, s: usize) -> f64 {
        let pairs = (self.sizes[r] * self.sizes[s]) as f64;
        if pairs == 0.0 {
            0.0
        } else {
            self.edges_between(r, s) / pairs
        }
    }
}

pub fn block_stats(graph: &Graph, z_tilde: &Partition) -> Result<BlockStats> {
    z_tilde.check_len(graph.n_nodes())?;
    let k = z_tilde.n_classes();
    let labels = z_tilde.labels();
    let mut edge_counts = vec![0.0; k * k];
    for (i, j, _) in graph.edges() {
        let (r, s) = (labels[i], labels[j]);
        edge_counts[r * k + s] += 1.0;
        edge_counts[s * k + r] += 1.0;
    }
    Ok(BlockStats {
        n_classes: k,
        edge_counts,
        sizes: z_tilde.class_sizes(),
    })
}

/// `x ln x` with `0 ln 0 = 0`.
fn xlogx_term(count: f64, prob: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * prob.ln()
    }
}

/// `-½ Σ_rs [m_rs ln ω_rs + (n_r n_s - m_rs) ln(1 - ω_rs)]`, natural log.
pub fn bestest_entropy(stats: &BlockStats) -> f64 {
    let k = stats.n_classes;
    let mut total = 0.0;
    for r in 0..k {
        for s in 0..k {
            let pairs = (stats.sizes[r] * stats.sizes[s]) as f64;
            if pairs == 0.0 {
                continue;
            }
            let m = stats.edges_between(r, s);
            let omega = m / pairs;
            total += xlogx_term(m, omega) + xlogx_term(pairs - m, 1.0 - omega);
        }
    }
    -0.5 * total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestestResult {
    pub schema_version: u32,
    pub entropy: f64,
    pub p_value: f64,
    pub n_perms: usize,
    pub seed: u64,
}

/// Fraction of full-label permutations whose entropy is strictly below that of `z_tilde`.
pub fn bestest_pvalue(graph: &Graph, z_tilde: &Partition, n_perms: usize, seed: u64) -> Result<f64> {
    bestest(graph, z_tilde, n_perms, seed).map(|r| r.p_value)
}

pub fn bestest(graph: &Graph, z_tilde: &Partition, n_perms: usize, seed: u64) -> Result<BestestResult> {
    if n_perms == 0 {
        return Err(Error::validation("need at least one permutation"));
    }
    let observed = bestest_entropy(&block_stats(graph, z_tilde)?);
    let below = (0..n_perms as u64)
        .into_par_iter()
        .map(|i| {
            let permuted = z_tilde.shuffled(&mut rng::stream(seed, i));
            block_stats(graph, &permuted).map(|s| bestest_entropy(&s) < observed)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    Ok(BestestResult {
        schema_version: crate::aligntest::RESULT_SCHEMA_VERSION,
        entropy: observed,
        p_value: below as f64 / n_perms as f64,
        n_perms,
        seed,
    })
}
