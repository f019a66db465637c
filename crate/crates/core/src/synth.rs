// SPDX-License-Identifier: Apache-2.0

//! Synthetic attributed networks: planted-partition SBM graphs, community-conditioned
//! Gaussian attributes, and label perturbation.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeMatrix, Graph, Partition};
use crate::rng;

/// Planted-partition stochastic block model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} = {p} is not in [0, 1]")))
    }
}

impl SbmParams {
    pub fn new(block_sizes: Vec<usize>, p_in: f64, p_out: f64) -> Result<Self> {
        let params = SbmParams {
            block_sizes,
            p_in,
            p_out,
        };
        params.validate()?;
        Ok(params)
    }

    /// `k` blocks of near-equal size (the first `n % k` blocks get one extra node).
    pub fn equal_blocks(n: usize, k: usize, p_in: f64, p_out: f64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::validation(format!(
                "cannot split {n} nodes into {k} nonempty blocks"
            )));
        }
        let sizes = (0..k).map(|b| n / k + usize::from(b < n % k)).collect();
        Self::new(sizes, p_in, p_out)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_in", self.p_in)?;
        check_probability("p_out", self.p_out)?;
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(Error::validation("block sizes must be nonempty and positive"));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Planted labels: block b covers a contiguous range of node indices.
    pub fn planted_partition(&self) -> Partition {
        let labels = self
            .block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect();
        Partition::new(labels, self.block_sizes.len()).expect("blocks are nonempty")
    }
}

/// Samples every unordered pair independently: `p_in` within a block, `p_out` across.
pub fn generate_sbm(params: &SbmParams, seed: u64) -> Result<(Graph, Partition)> {
    params.validate()?;
    let z = params.planted_partition();
    let labels = z.labels();
    let n = labels.len();
    let mut rng = rng::rng_from_seed(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] {
                params.p_in
            } else {
                params.p_out
            };
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    Ok((Graph::from_edges(n, edges)?, z))
}

/// `p_out` giving expected mean degree `mean_degree` for `k` equal blocks of `n / k` nodes.
pub fn p_out_for_mean_degree(n: usize, k: usize, p_in: f64, mean_degree: f64) -> Result<f64> {
    if k < 2 || k > n {
        return Err(Error::validation(format!(
            "need 2 <= K <= N to fix p_out, got K = {k}, N = {n}"
        )));
    }
    let block = n as f64 / k as f64;
    let p_out = (mean_degree - p_in * (block - 1.0)) / (n as f64 - block);
    check_probability("derived p_out", p_out)?;
    Ok(p_out)
}

/// Per-class Gaussian means with identity covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianAttributeParams {
    /// Row k is the mean of class k.
    pub means: Vec<Vec<f64>>,
}

impl GaussianAttributeParams {
    pub fn new(means: Vec<Vec<f64>>) -> Result<Self> {
        let dims = means.first().map_or(0, Vec::len);
        if dims == 0 || means.iter().any(|m| m.len() != dims) {
            return Err(Error::validation("means must be a nonempty K x p matrix"));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("means must be finite"));
        }
        Ok(GaussianAttributeParams { means })
    }

    pub fn n_classes(&self) -> usize {
        self.means.len()
    }

    pub fn dims(&self) -> usize {
        self.means[0].len()
    }

    /// Multiplies every mean entry by `scale`.
    pub fn scaled(mut self, scale: f64) -> Self {
        self.means.iter_mut().flatten().for_each(|v| *v *= scale);
        self
    }
}

/// Draws each mean entry i.i.d. from the standard normal.
pub fn sample_gaussian_params(k: usize, dims: usize, seed: u64) -> Result<GaussianAttributeParams> {
    if k == 0 || dims == 0 {
        return Err(Error::validation("K and p must both be at least 1"));
    }
    let mut rng = rng::rng_from_seed(seed);
    let means = (0..k)
        .map(|_| (0..dims).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    GaussianAttributeParams::new(means)
}

/// Row i is drawn from N(μ_{z_i}, I).
pub fn generate_attributes(
    z: &Partition,
    params: &GaussianAttributeParams,
    seed: u64,
) -> Result<AttributeMatrix> {
    if params.n_classes() != z.n_classes() {
        return Err(Error::validation(format!(
            "partition has {} classes but {} means were given",
            z.n_classes(),
            params.n_classes()
        )));
    }
    let mut rng = rng::rng_from_seed(seed);
    let dims = params.dims();
    let mut values = Vec::with_capacity(z.len() * dims);
    for &c in z.labels() {
        for &mu in &params.means[c] {
            let noise: f64 = rng.sample(StandardNormal);
            values.push(mu + noise);
        }
    }
    AttributeMatrix::new(z.len(), dims, values)
}

/// Number of positions `permute_fraction` touches.
///
/// The product is snapped to the nearest integer first, so `0.07 * 100` counts 7
/// rather than rounding float noise up to 8.
pub fn perturbed_count(n: usize, fraction: f64) -> usize {
    let exact = fraction * n as f64;
    let snapped = exact.round();
    let count = if (exact - snapped).abs() < 1e-9 {
        snapped
    } else {
        exact.ceil()
    };
    (count as usize).min(n)
}

/// Shuffles the labels at `ceil(fraction * N)` uniformly chosen positions.
///
/// Class sizes are preserved exactly.
pub fn permute_fraction(z: &Partition, fraction: f64, seed: u64) -> Result<Partition> {
    check_probability("fraction", fraction)?;
    let n = z.len();
    let count = perturbed_count(n, fraction);
    let mut rng = rng::rng_from_seed(seed);
    let positions = index::sample(&mut rng, n, count).into_vec();
    let mut picked: Vec<usize> = positions.iter().map(|&i| z.labels()[i]).collect();
    picked.shuffle(&mut rng);
    let mut labels = z.labels().to_vec();
    for (&i, c) in positions.iter().zip(picked) {
        labels[i] = c;
    }
    Partition::new(labels, z.n_classes())
}

/// Gaussian-mixture marker table standing in for per-cell measurements.
///
/// Informative columns place the component means on an evenly spaced grid (in a
/// column-specific random order) with spacing decreasing linearly from
/// `separation` to `separation / 2`; noise columns are i.i.d. N(0, 1) regardless
/// of component. Columns are laid out informative first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerMixtureParams {
    pub n: usize,
    pub n_components: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    pub separation: f64,
}

impl Default for MarkerMixtureParams {
    fn default() -> Self {
        MarkerMixtureParams {
            n: 1000,
            n_components: 8,
            n_informative: 10,
            n_noise: 10,
            separation: 3.0,
        }
    }
}

pub fn gaussian_mixture_markers(
    params: &MarkerMixtureParams,
    seed: u64,
) -> Result<(AttributeMatrix, Partition)> {
    let MarkerMixtureParams {
        n,
        n_components: k,
        n_informative,
        n_noise,
        separation,
    } = *params;
    if k == 0 || k > n || n_informative + n_noise == 0 {
        return Err(Error::validation("invalid marker mixture parameters"));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::validation("separation must be finite and nonnegative"));
    }
    let z = SbmParams::equal_blocks(n, k, 0.0, 0.0)?.planted_partition();
    let mut rng = rng::stream(seed, 0);
    let mut means = vec![vec![0.0; n_informative + n_noise]; k];
    for f in 0..n_informative {
        let spacing = if n_informative > 1 {
            separation * (1.0 - 0.5 * f as f64 / (n_informative - 1) as f64)
        } else {
            separation
        };
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let centre = (k as f64 - 1.0) / 2.0;
        for (c, &slot) in order.iter().enumerate() {
            means[c][f] = spacing * (slot as f64 - centre);
        }
    }
    let x = generate_attributes(&z, &GaussianAttributeParams::new(means)?, rng::derive_seed(seed, 1))?;
    Ok((x, z))
}
