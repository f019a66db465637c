// SPDX-License-Identifier: Apache-2.0

//! `attralign` command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use attralign::aligntest::{run_test, TestConfig, RESULT_SCHEMA_VERSION};
use attralign::bestest::{bestest, DEFAULT_PERMUTATIONS};
use attralign::community::{louvain_with_trace, modularity};
use attralign::experiment::{
    generate_synthetic, run_markers, run_perturb, run_sweep, Blocks, MarkerSpec, PerturbSpec,
    SweepSpec, SynthParams,
};
use attralign::graph::{
    build_knn_graph, format_attributes, format_edge_list, format_partition, load_attributes,
    load_edge_list, load_partition, write_all_atomic, write_atomic,
};
use attralign::labeling::{discrete_label, kmeans_label, nmi, KmeansConfig};
use attralign::labelprop::TransitionKind;
use attralign::rng::derive_seed;
use attralign::{Error, Partition, Result};

#[derive(Parser)]
#[command(name = "attralign", version, about = "Test whether node attributes align with network structure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an SBM graph, its planted partition and Gaussian attributes.
    Synth(SynthArgs),
    /// Build a symmetrized k-nearest-neighbor graph from an attribute CSV.
    Knn(KnnArgs),
    /// Derive a partition from attributes (k-means) or categories.
    Label(LabelArgs),
    /// Run the label-propagation alignment test.
    Test(TestArgs),
    /// Blockmodel entropy significance test of a partition.
    Bestest(BestestArgs),
    /// Normalized mutual information between two partition files.
    Nmi(NmiArgs),
    /// Louvain community detection.
    Louvain(LouvainArgs),
    /// Experiment harnesses.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Subcommand)]
enum Experiment {
    /// Shuffle growing fractions of the attribute partition.
    Perturb(PerturbArgs),
    /// Sweep p_in at fixed expected mean degree.
    Sweep(SweepArgs),
    /// Per-marker scan on a k-NN graph of a feature table.
    Markers(MarkersArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Transition {
    Aswritten,
    Randomwalk,
}

impl From<Transition> for TransitionKind {
    fn from(t: Transition) -> Self {
        match t {
            Transition::Aswritten => TransitionKind::AsWritten,
            Transition::Randomwalk => TransitionKind::RandomWalk,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SeedArg {
    /// Master seed; falls back to ATTRALIGN_SEED, then to a fresh random seed.
    #[arg(long, env = "ATTRALIGN_SEED")]
    seed: Option<u64>,
}

impl SeedArg {
    fn resolve(&self) -> u64 {
        self.seed.unwrap_or_else(fresh_seed)
    }
}

fn fresh_seed() -> u64 {
    let seed = rand::random::<u64>();
    eprintln!("seed: {seed}");
    seed
}

#[derive(Args)]
struct SynthFlags {
    /// JSON parameter file `{n, blocks, p_in, p_out, attr_dims, seed}`; flags override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Number of equal blocks.
    #[arg(long = "K", conflicts_with = "blocks")]
    n_blocks: Option<usize>,
    /// Explicit block sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    blocks: Option<Vec<usize>>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
    #[arg(long)]
    attr_dims: Option<usize>,
    /// Scale applied to the standard-normal class means.
    #[arg(long)]
    mean_scale: Option<f64>,
}

impl SynthFlags {
    /// Seed order: flag or env, then the parameter file, then entropy.
    fn resolve(&self, seed: &SeedArg) -> Result<SynthParams> {
        let (mut p, file_seed) = match &self.params {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
                let value: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
                let has_seed = value.get("seed").is_some();
                let p: SynthParams = serde_json::from_value(value)
                    .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
                let file_seed = has_seed.then_some(p.seed);
                (p, file_seed)
            }
            None => (SynthParams::default(), None),
        };
        if let Some(n) = self.n {
            p.n = n;
        }
        if let Some(k) = self.n_blocks {
            p.blocks = Blocks::Count(k);
        }
        if let Some(sizes) = &self.blocks {
            p.blocks = Blocks::Sizes(sizes.clone());
        }
        if let Some(v) = self.p_in {
            p.p_in = v;
        }
        if let Some(v) = self.p_out {
            p.p_out = v;
        }
        if let Some(v) = self.attr_dims {
            p.attr_dims = v;
        }
        if let Some(v) = self.mean_scale {
            p.mean_scale = v;
        }
        p.seed = seed.seed.or(file_seed).unwrap_or_else(fresh_seed);
        Ok(p)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    params: SynthFlags,
    #[command(flatten)]
    seed: SeedArg,
    /// Output directory for graph.edges, partition.txt, attrs.csv and params.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KnnArgs {
    #[arg(long)]
    attrs: PathBuf,
    /// Neighbors per node.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// z-score columns first.
    #[arg(long)]
    standardize: bool,
    /// Edge list destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    /// Numeric attribute CSV, clustered with k-means.
    #[arg(long, required_unless_present = "categories", requires = "n_clusters")]
    attrs: Option<PathBuf>,
    /// One categorical value per line; each distinct value becomes a class.
    #[arg(long, conflicts_with = "attrs")]
    categories: Option<PathBuf>,
    /// Number of k-means clusters.
    #[arg(long = "K")]
    n_clusters: Option<usize>,
    /// Cluster only this attribute column (0-based).
    #[arg(long)]
    column: Option<usize>,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Attribute CSV; clustered into K classes with k-means.
    #[arg(long, required_unless_present = "labels", conflicts_with = "labels", requires = "n_clusters")]
    attrs: Option<PathBuf>,
    /// Precomputed attribute partition.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long = "K")]
    n_clusters: Option<usize>,
    #[arg(long)]
    standardize: bool,
    /// Labeled sample size.
    #[arg(long, default_value_t = 100)]
    l: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = Transition::Aswritten)]
    transition: Transition,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BestestArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    perms: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NmiArgs {
    /// Two partition files.
    #[arg(long, num_args = 2, required = true)]
    labels: Vec<PathBuf>,
}

#[derive(Args)]
struct LouvainArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
    /// Partition destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PerturbArgs {
    #[command(flatten)]
    synth: SynthFlags,
    /// Fractions of nodes to shuffle; defaults to 0.01, 0.1, ..., 1.0.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    l: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// BESTest permutations per row; 0 reports the entropy only.
    #[arg(long, default_value_t = 0)]
    bestest_perms: usize,
    #[arg(long, value_enum, default_value_t = Transition::Aswritten)]
    transition: Transition,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Number of equal blocks.
    #[arg(long = "K", default_value_t = 4)]
    n_blocks: usize,
    #[arg(long, default_value_t = 30.0)]
    mean_degree: f64,
    /// Defaults to 0.05, 0.10, ..., 0.45.
    #[arg(long, value_delimiter = ',')]
    p_in_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    realizations: usize,
    #[arg(long, default_value_t = 3)]
    attr_dims: usize,
    #[arg(long, default_value_t = 1.0)]
    mean_scale: f64,
    #[arg(long, default_value_t = 100)]
    l: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = Transition::Aswritten)]
    transition: Transition,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MarkersArgs {
    /// Feature CSV, one column per marker.
    #[arg(long)]
    attrs: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Clusters per marker; defaults to the Louvain community count.
    #[arg(long = "K")]
    n_clusters: Option<usize>,
    /// Columns (0-based) that define the k-NN graph; all when omitted.
    #[arg(long, value_delimiter = ',')]
    graph_columns: Option<Vec<usize>>,
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = 500)]
    l: usize,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = Transition::Aswritten)]
    transition: Transition,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("result types serialize");
    s.push('\n');
    s
}

fn report_warnings(warnings: &[String]) {
    const SHOWN: usize = 5;
    for w in warnings.iter().take(SHOWN) {
        eprintln!("warning: {w}");
    }
    if warnings.len() > SHOWN {
        eprintln!("warning: ... {} more", warnings.len() - SHOWN);
    }
}

#[derive(Serialize)]
struct SynthManifest<'a> {
    schema_version: u32,
    params: &'a SynthParams,
    files: [&'a str; 3],
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let params = args.params.resolve(&args.seed)?;
    let data = generate_synthetic(&params)?;
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let names = ["graph.edges", "partition.txt", "attrs.csv"];
    let manifest = to_json(&SynthManifest {
        schema_version: RESULT_SCHEMA_VERSION,
        params: &params,
        files: names,
    });
    let contents = [
        format_edge_list(&data.graph),
        format_partition(&data.planted),
        format_attributes(&data.attributes),
    ];
    let paths: Vec<PathBuf> = names.iter().map(|n| args.out.join(n)).collect();
    let manifest_path = args.out.join("params.json");
    let mut files: Vec<(&Path, &str)> = paths
        .iter()
        .zip(&contents)
        .map(|(p, c)| (p.as_path(), c.as_str()))
        .collect();
    files.push((&manifest_path, &manifest));
    write_all_atomic(&files)
}

fn cmd_knn(args: &KnnArgs) -> Result<()> {
    let mut x = load_attributes(&args.attrs)?;
    if args.standardize {
        x = x.standardized();
    }
    let g = build_knn_graph(&x, args.k)?;
    emit(args.out.as_deref(), &format_edge_list(&g))
}

fn attribute_labels(
    path: &Path,
    k: usize,
    column: Option<usize>,
    standardize: bool,
    seed: u64,
) -> Result<Partition> {
    let mut x = load_attributes(path)?;
    if let Some(j) = column {
        x = x.select_columns(&[j])?;
    }
    let cfg = KmeansConfig {
        standardize,
        ..KmeansConfig::new(k, seed)
    };
    kmeans_label(&x, &cfg)
}

fn cmd_label(args: &LabelArgs) -> Result<()> {
    let partition = match (&args.attrs, &args.categories) {
        (Some(path), _) => {
            let k = args.n_clusters.unwrap_or_default();
            attribute_labels(path, k, args.column, args.standardize, args.seed.resolve())?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let values: Vec<&str> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect();
            if values.is_empty() {
                return Err(Error::Validation(format!("{} has no values", path.display())));
            }
            discrete_label(&values)?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    emit(args.out.as_deref(), &format_partition(&partition))
}

fn cmd_test(args: &TestArgs) -> Result<()> {
    let seed = args.seed.resolve();
    let graph = load_edge_list(&args.graph)?;
    let z_tilde = match (&args.labels, &args.attrs) {
        (Some(path), _) => load_partition(path)?,
        (None, Some(path)) => attribute_labels(
            path,
            args.n_clusters.unwrap_or_default(),
            None,
            args.standardize,
            derive_seed(seed, 0),
        )?,
        (None, None) => unreachable!("clap requires one input"),
    };
    let cfg = TestConfig {
        transition: args.transition.into(),
        ..TestConfig::new(args.trials, args.l, derive_seed(seed, 1))
    };
    let result = run_test(&graph, &z_tilde, &cfg)?;
    report_warnings(&result.warnings);
    emit(args.out.as_deref(), &to_json(&result))
}

fn cmd_bestest(args: &BestestArgs) -> Result<()> {
    let graph = load_edge_list(&args.graph)?;
    let z = load_partition(&args.labels)?;
    let result = bestest(&graph, &z, args.perms, args.seed.resolve())?;
    emit(args.out.as_deref(), &to_json(&result))
}

fn cmd_nmi(args: &NmiArgs) -> Result<()> {
    let a = load_partition(&args.labels[0])?;
    let b = load_partition(&args.labels[1])?;
    println!("{:?}", nmi(&a, &b)?);
    Ok(())
}

fn cmd_louvain(args: &LouvainArgs) -> Result<()> {
    let graph = load_edge_list(&args.graph)?;
    let result = louvain_with_trace(&graph, args.seed.resolve())?;
    if graph.n_edges() > 0 {
        eprintln!(
            "communities: {}, modularity: {}",
            result.partition.n_classes(),
            modularity(&graph, &result.partition)?
        );
    }
    emit(args.out.as_deref(), &format_partition(&result.partition))
}

fn cmd_perturb(args: &PerturbArgs) -> Result<()> {
    let spec = PerturbSpec {
        synth: args.synth.resolve(&args.seed)?,
        fractions: args.fractions.clone().unwrap_or_else(PerturbSpec::default_fractions),
        sample_size: args.l,
        n_trials: args.trials,
        bestest_perms: args.bestest_perms,
        transition: args.transition.into(),
    };
    let report = run_perturb(&spec)?;
    let text = match args.format {
        Format::Csv => report.to_csv(),
        Format::Json => to_json(&report),
    };
    emit(args.out.as_deref(), &text)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let spec = SweepSpec {
        n: args.n,
        k: args.n_blocks,
        mean_degree: args.mean_degree,
        p_in_grid: args.p_in_grid.clone().unwrap_or_else(SweepSpec::default_grid),
        realizations: args.realizations,
        attr_dims: args.attr_dims,
        mean_scale: args.mean_scale,
        sample_size: args.l,
        n_trials: args.trials,
        seed: args.seed.resolve(),
        transition: args.transition.into(),
    };
    let report = run_sweep(&spec)?;
    let text = match args.format {
        Format::Csv => report.to_csv(),
        Format::Json => to_json(&report),
    };
    emit(args.out.as_deref(), &text)
}

fn cmd_markers(args: &MarkersArgs) -> Result<()> {
    let features = load_attributes(&args.attrs)?;
    let spec = MarkerSpec {
        k_neighbors: args.k,
        n_clusters: args.n_clusters,
        sample_size: args.l,
        n_trials: args.trials,
        seed: args.seed.resolve(),
        standardize: args.standardize,
        graph_columns: args.graph_columns.clone(),
        transition: args.transition.into(),
    };
    let scan = run_markers(&features, &spec)?;
    eprintln!(
        "communities: {} (other seeds: {:?}), modularity: {}",
        scan.n_communities, scan.community_counts_by_seed, scan.modularity
    );
    let text = match args.format {
        Format::Csv => scan.to_csv(),
        Format::Json => to_json(&scan),
    };
    emit(args.out.as_deref(), &text)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Knn(a) => cmd_knn(a),
        Command::Label(a) => cmd_label(a),
        Command::Test(a) => cmd_test(a),
        Command::Bestest(a) => cmd_bestest(a),
        Command::Nmi(a) => cmd_nmi(a),
        Command::Louvain(a) => cmd_louvain(a),
        Command::Experiment(Experiment::Perturb(a)) => cmd_perturb(a),
        Command::Experiment(Experiment::Sweep(a)) => cmd_sweep(a),
        Command::Experiment(Experiment::Markers(a)) => cmd_markers(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
