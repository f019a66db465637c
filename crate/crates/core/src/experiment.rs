// SPDX-License-Identifier: Apache-2.0

//! Experiment harnesses: label perturbation, community-strength sweep and
//! per-marker scans on k-NN graphs. Each produces rows in grid order with a
//! fixed CSV header.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aligntest::{run_test, run_test_on, TestConfig, RESULT_SCHEMA_VERSION};
use crate::bestest::{bestest, bestest_entropy, block_stats};
use crate::community::{louvain, modularity};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, AttributeMatrix, Graph, Partition};
use crate::labeling::{kmeans_label, nmi, KmeansConfig};
use crate::labelprop::{TransitionKind, TransitionMatrix};
use crate::rng::derive_seed;
use crate::stats;
use crate::synth::{
    generate_attributes, generate_sbm, p_out_for_mean_degree, permute_fraction,
    sample_gaussian_params, GaussianAttributeParams, SbmParams,
};

pub const PERTURB_HEADER: &str =
    "fraction,mean_entropy,p_value,mean_null_entropy,bestest_entropy,bestest_p_value";
pub const SWEEP_HEADER: &str = "p_in,p_out,ratio,mean_entropy,sd_entropy,mean_p,sd_p";
pub const MARKERS_HEADER: &str = "marker_index,nmi,p_value,mean_entropy,warning";

/// CSV output opens with `# schema_version: N`, then the header line.
fn csv_preamble(header: &str) -> String {
    format!("# schema_version: {RESULT_SCHEMA_VERSION}\n{header}\n")
}

// stream indices under a master seed
const STREAM_GRAPH: u64 = 0;
const STREAM_MEANS: u64 = 1;
const STREAM_ATTRS: u64 = 2;
const STREAM_KMEANS: u64 = 3;
const STREAM_TEST: u64 = 4;
const STREAM_PERTURB: u64 = 5;
const STREAM_BESTEST: u64 = 6;
const STREAM_REALIZATION: u64 = 7;

/// Block layout: a count of equal blocks or explicit sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Blocks {
    Count(usize),
    Sizes(Vec<usize>),
}

/// Synthetic attributed network parameters (`{n, blocks, p_in, p_out, attr_dims, seed}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n: usize,
    pub blocks: Blocks,
    pub p_in: f64,
    pub p_out: f64,
    pub attr_dims: usize,
    pub seed: u64,
    /// Multiplier applied to the standard-normal class means.
    #[serde(default = "default_mean_scale")]
    pub mean_scale: f64,
}

fn default_mean_scale() -> f64 {
    1.0
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n: 200,
            blocks: Blocks::Count(4),
            p_in: 0.6,
            p_out: 0.02,
            attr_dims: 3,
            seed: 0,
            mean_scale: 1.0,
        }
    }
}

impl SynthParams {
    pub fn sbm(&self) -> Result<SbmParams> {
        let params = match &self.blocks {
            Blocks::Count(k) => SbmParams::equal_blocks(self.n, *k, self.p_in, self.p_out)?,
            Blocks::Sizes(sizes) => SbmParams::new(sizes.clone(), self.p_in, self.p_out)?,
        };
        if params.n_nodes() != self.n {
            return Err(Error::validation(format!(
                "block sizes sum to {} but n = {}",
                params.n_nodes(),
                self.n
            )));
        }
        Ok(params)
    }

    pub fn n_classes(&self) -> usize {
        match &self.blocks {
            Blocks::Count(k) => *k,
            Blocks::Sizes(s) => s.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub graph: Graph,
    pub planted: Partition,
    pub attributes: AttributeMatrix,
    pub means: GaussianAttributeParams,
}

fn synth_attributes(
    planted: &Partition,
    dims: usize,
    mean_scale: f64,
    seed: u64,
) -> Result<(GaussianAttributeParams, AttributeMatrix)> {
    if !mean_scale.is_finite() {
        return Err(Error::validation("mean scale must be finite"));
    }
    let means = sample_gaussian_params(planted.n_classes(), dims, derive_seed(seed, STREAM_MEANS))?
        .scaled(mean_scale);
    let x = generate_attributes(planted, &means, derive_seed(seed, STREAM_ATTRS))?;
    Ok((means, x))
}

/// SBM graph plus Gaussian attributes conditioned on the planted blocks.
pub fn generate_synthetic(params: &SynthParams) -> Result<SyntheticData> {
    let sbm = params.sbm()?;
    let (graph, planted) = generate_sbm(&sbm, derive_seed(params.seed, STREAM_GRAPH))?;
    let (means, attributes) =
        synth_attributes(&planted, params.attr_dims, params.mean_scale, params.seed)?;
    Ok(SyntheticData {
        graph,
        planted,
        attributes,
        means,
    })
}

fn attribute_partition(x: &AttributeMatrix, k: usize, seed: u64) -> Result<Partition> {
    kmeans_label(x, &KmeansConfig::new(k, derive_seed(seed, STREAM_KMEANS)))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Label-perturbation study: shuffle growing fractions of the attribute partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub synth: SynthParams,
    pub fractions: Vec<f64>,
    pub sample_size: usize,
    pub n_trials: usize,
    /// Permutations for the BESTest p-value; 0 skips it (the entropy is always reported).
    pub bestest_perms: usize,
    pub transition: TransitionKind,
}

impl PerturbSpec {
    /// 0.01 followed by 0.1, 0.2, ..., 1.0.
    pub fn default_fractions() -> Vec<f64> {
        std::iter::once(0.01)
            .chain((1..=10).map(|i| i as f64 / 10.0))
            .collect()
    }
}

impl Default for PerturbSpec {
    fn default() -> Self {
        PerturbSpec {
            synth: SynthParams::default(),
            fractions: Self::default_fractions(),
            sample_size: 100,
            n_trials: 1000,
            bestest_perms: 0,
            transition: TransitionKind::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbRow {
    pub fraction: f64,
    pub mean_entropy: f64,
    pub p_value: f64,
    pub mean_null_entropy: f64,
    pub bestest_entropy: f64,
    pub bestest_p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbReport {
    pub schema_version: u32,
    pub seed: u64,
    pub rows: Vec<PerturbRow>,
    /// The perturbed attribute partitions, one per row.
    #[serde(skip)]
    pub partitions: Vec<Partition>,
}

impl PerturbReport {
    pub fn to_csv(&self) -> String {
        let mut out = csv_preamble(PERTURB_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.fraction,
                r.mean_entropy,
                r.p_value,
                r.mean_null_entropy,
                r.bestest_entropy,
                fmt_opt(r.bestest_p_value)
            );
        }
        out
    }
}

pub fn run_perturb(spec: &PerturbSpec) -> Result<PerturbReport> {
    if spec.fractions.is_empty() {
        return Err(Error::validation("fraction grid is empty"));
    }
    if let Some(f) = spec.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::validation(format!("fraction {f} is not in [0, 1]")));
    }
    let seed = spec.synth.seed;
    let data = generate_synthetic(&spec.synth)?;
    let z_tilde = attribute_partition(&data.attributes, spec.synth.n_classes(), seed)?;
    let t = TransitionMatrix::new(&data.graph, spec.transition)?;
    let cfg = TestConfig {
        transition: spec.transition,
        ..TestConfig::new(spec.n_trials, spec.sample_size, derive_seed(seed, STREAM_TEST))
    };

    let mut rows = Vec::with_capacity(spec.fractions.len());
    let mut partitions = Vec::with_capacity(spec.fractions.len());
    for (i, &fraction) in spec.fractions.iter().enumerate() {
        let perturbed = permute_fraction(
            &z_tilde,
            fraction,
            derive_seed(derive_seed(seed, STREAM_PERTURB), i as u64),
        )?;
        // common trial seeds across fractions keep the trend free of sampling noise
        let result = run_test_on(&t, &perturbed, &cfg)?;
        let bestest_p_value = if spec.bestest_perms > 0 {
            Some(bestest(&data.graph, &perturbed, spec.bestest_perms, derive_seed(seed, STREAM_BESTEST))?.p_value)
        } else {
            None
        };
        rows.push(PerturbRow {
            fraction,
            mean_entropy: result.mean_entropy,
            p_value: result.p_value,
            mean_null_entropy: result.mean_null_entropy,
            bestest_entropy: bestest_entropy(&block_stats(&data.graph, &perturbed)?),
            bestest_p_value,
        });
        partitions.push(perturbed);
    }
    Ok(PerturbReport {
        schema_version: RESULT_SCHEMA_VERSION,
        seed,
        rows,
        partitions,
    })
}

/// Community-strength sweep at fixed expected mean degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n: usize,
    pub k: usize,
    pub mean_degree: f64,
    pub p_in_grid: Vec<f64>,
    pub realizations: usize,
    pub attr_dims: usize,
    pub mean_scale: f64,
    pub sample_size: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub transition: TransitionKind,
}

impl SweepSpec {
    /// 0.05, 0.10, ..., 0.45.
    pub fn default_grid() -> Vec<f64> {
        (1..=9).map(|i| f64::from(5 * i) / 100.0).collect()
    }
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            n: 200,
            k: 4,
            mean_degree: 30.0,
            p_in_grid: Self::default_grid(),
            realizations: 10,
            attr_dims: 3,
            mean_scale: 1.0,
            sample_size: 100,
            n_trials: 100,
            seed: 0,
            transition: TransitionKind::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_in: f64,
    pub p_out: f64,
    pub ratio: f64,
    pub mean_entropy: f64,
    pub sd_entropy: f64,
    pub mean_p: f64,
    pub sd_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = csv_preamble(SWEEP_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.p_in, r.p_out, r.ratio, r.mean_entropy, r.sd_entropy, r.mean_p, r.sd_p
            );
        }
        out
    }
}

/// The planted partition, attributes and attribute partition stay fixed across
/// every grid point and realization; only the graph is redrawn.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    if spec.p_in_grid.is_empty() || spec.realizations == 0 {
        return Err(Error::validation("sweep needs a nonempty grid and at least one realization"));
    }
    let planted = SbmParams::equal_blocks(spec.n, spec.k, 0.0, 0.0)?.planted_partition();
    let (_, x) = synth_attributes(&planted, spec.attr_dims, spec.mean_scale, spec.seed)?;
    let z_tilde = attribute_partition(&x, spec.k, spec.seed)?;

    let mut rows = Vec::with_capacity(spec.p_in_grid.len());
    for (g, &p_in) in spec.p_in_grid.iter().enumerate() {
        let p_out = p_out_for_mean_degree(spec.n, spec.k, p_in, spec.mean_degree)?;
        let sbm = SbmParams::equal_blocks(spec.n, spec.k, p_in, p_out)?;
        let point_seed = derive_seed(derive_seed(spec.seed, STREAM_REALIZATION), g as u64);
        let outcomes: Vec<(f64, f64)> = (0..spec.realizations as u64)
            .into_par_iter()
            .map(|r| {
                let realization_seed = derive_seed(point_seed, r);
                let (graph, _) = generate_sbm(&sbm, derive_seed(realization_seed, STREAM_GRAPH))?;
                let cfg = TestConfig {
                    transition: spec.transition,
                    ..TestConfig::new(
                        spec.n_trials,
                        spec.sample_size,
                        derive_seed(realization_seed, STREAM_TEST),
                    )
                };
                let result = run_test(&graph, &z_tilde, &cfg)?;
                Ok((result.mean_entropy, result.p_value))
            })
            .collect::<Result<_>>()?;
        let entropies: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
        let ps: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
        rows.push(SweepRow {
            p_in,
            p_out,
            ratio: if p_out > 0.0 { p_in / p_out } else { f64::INFINITY },
            mean_entropy: stats::mean(&entropies),
            sd_entropy: stats::std_dev(&entropies),
            mean_p: stats::mean(&ps),
            sd_p: stats::std_dev(&ps),
        });
    }
    Ok(SweepReport {
        schema_version: RESULT_SCHEMA_VERSION,
        seed: spec.seed,
        rows,
    })
}

/// Per-marker scan on a k-NN graph of the feature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerSpec {
    pub k_neighbors: usize,
    /// Clusters per marker; defaults to the Louvain community count.
    pub n_clusters: Option<usize>,
    pub sample_size: usize,
    pub n_trials: usize,
    pub seed: u64,
    /// z-score features before building the k-NN graph.
    pub standardize: bool,
    /// Columns that define the k-NN graph; all columns when `None`. Every column
    /// is scanned either way.
    pub graph_columns: Option<Vec<usize>>,
    pub transition: TransitionKind,
}

impl Default for MarkerSpec {
    fn default() -> Self {
        MarkerSpec {
            k_neighbors: 5,
            n_clusters: None,
            sample_size: 500,
            n_trials: 30,
            seed: 0,
            standardize: false,
            graph_columns: None,
            transition: TransitionKind::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerRow {
    pub marker_index: usize,
    pub nmi: f64,
    pub p_value: f64,
    pub mean_entropy: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerScan {
    pub schema_version: u32,
    pub seed: u64,
    pub n_communities: usize,
    pub modularity: f64,
    /// Louvain community counts under a few alternative seeds, for stability checks.
    pub community_counts_by_seed: Vec<usize>,
    pub n_clusters: usize,
    pub rows: Vec<MarkerRow>,
    #[serde(skip)]
    pub communities: Option<Partition>,
}

impl MarkerScan {
    pub fn to_csv(&self) -> String {
        let mut out = csv_preamble(MARKERS_HEADER);
        for r in &self.rows {
            let warning = r.warning.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.marker_index, r.nmi, r.p_value, r.mean_entropy, warning
            );
        }
        out
    }
}

fn distinct_values(column: &AttributeMatrix) -> usize {
    let mut v: Vec<f64> = column.as_slice().to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

const LOUVAIN_STABILITY_SEEDS: u64 = 5;

pub fn run_markers(features: &AttributeMatrix, spec: &MarkerSpec) -> Result<MarkerScan> {
    let seed = spec.seed;
    let graph_input = match &spec.graph_columns {
        Some(columns) => features.select_columns(columns)?,
        None => features.clone(),
    };
    let graph_input = if spec.standardize {
        graph_input.standardized()
    } else {
        graph_input
    };
    let graph = build_knn_graph(&graph_input, spec.k_neighbors)?;
    let communities = louvain(&graph, derive_seed(seed, STREAM_GRAPH))?;
    let community_counts_by_seed = (1..=LOUVAIN_STABILITY_SEEDS)
        .map(|s| louvain(&graph, derive_seed(derive_seed(seed, STREAM_GRAPH), s)).map(|p| p.n_classes()))
        .collect::<Result<Vec<_>>>()?;
    let k = spec.n_clusters.unwrap_or(communities.n_classes());
    if k == 0 || k > features.n_rows() {
        return Err(Error::validation(format!("invalid cluster count {k}")));
    }
    let t = TransitionMatrix::new(&graph, spec.transition)?;
    let cfg = TestConfig {
        transition: spec.transition,
        ..TestConfig::new(spec.n_trials, spec.sample_size, derive_seed(seed, STREAM_TEST))
    };

    let rows = (0..features.n_cols())
        .into_par_iter()
        .map(|j| {
            let column = features.column(j);
            let warning = (distinct_values(&column) < k).then(|| {
                format!("marker has fewer distinct values than {k} clusters; partition is degenerate")
            });
            let z_tilde = kmeans_label(
                &column,
                &KmeansConfig::new(k, derive_seed(derive_seed(seed, STREAM_KMEANS), j as u64)),
            )?;
            let result = run_test_on(&t, &z_tilde, &cfg)?;
            Ok(MarkerRow {
                marker_index: j,
                nmi: nmi(&z_tilde, &communities)?,
                p_value: result.p_value,
                mean_entropy: result.mean_entropy,
                warning,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MarkerScan {
        schema_version: RESULT_SCHEMA_VERSION,
        seed,
        n_communities: communities.n_classes(),
        modularity: modularity(&graph, &communities)?,
        community_counts_by_seed,
        n_clusters: k,
        rows,
        communities: Some(communities),
    })
}
