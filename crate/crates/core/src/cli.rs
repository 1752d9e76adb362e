//! Command-line surface.
//!
//! Exit codes: 0 ok, 1 semantic failure (e.g. `verify` found violations),
//! 2 input error, 3 capacity error. Every JSON report carries a
//! `schema_version`; see the README for the layouts. `FC_SEED` overrides
//! the default `synth` seed.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{self, Connectivity, NormalizeOptions};
use crate::coloring::{chromatic_number_exact, greedy_color, OrderingStrategy, DEFAULT_EXACT_NODE_LIMIT};
use crate::error::Error;
use crate::graph::{build_cell_graph, max_degree};
use crate::io;
use crate::losses::{orthogonality_loss, sample_adjacent_features, FeatureGrid, SetCosine};
use crate::metrics::{self, MetricsReport};
use crate::stats::{self, DEFAULT_NODE_LIMIT};
use crate::synth;
use crate::types::{FourColorMask, InstanceMask};
use crate::DEFAULT_DELTA;

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "FC_SEED";
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "fourcolor", version, about = "Four-color encoding of instance segmentation masks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Instance mask (16-bit PNG) to four-color mask (8-bit PNG).
    Encode(EncodeArgs),
    /// Four-color mask to instance mask via per-color connected components.
    Decode(DecodeArgs),
    /// Check that a four-color mask properly encodes an instance mask.
    Verify(VerifyArgs),
    /// Map a predicted four-color mask to its canonical encoding.
    Canonicalize(CanonicalizeArgs),
    /// DICE, AJI, DQ, SQ, PQ over paired directories of instance masks.
    Metrics(MetricsArgs),
    /// Color usage, degree and chromatic statistics of a mask directory.
    Stats(StatsArgs),
    /// Generate a synthetic corpus with a manifest.
    Synth(SynthArgs),
    /// Greedy and exact chromatic number of one mask's cell graph.
    Chromatic(ChromaticArgs),
    /// Orthogonality loss of a feature grid over a mask's adjacent cells.
    Orthogonality(OrthogonalityArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderArg {
    AscendingId,
    BfsFromMinId,
    DegreeDescending,
}

impl From<OrderArg> for OrderingStrategy {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::AscendingId => OrderingStrategy::AscendingId,
            OrderArg::BfsFromMinId => OrderingStrategy::BfsFromMinId,
            OrderArg::DegreeDescending => OrderingStrategy::DegreeDescending,
        }
    }
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: u32,
    #[arg(long, value_enum, default_value = "ascending-id")]
    pub order: OrderArg,
    /// Also write the palette rendering here.
    #[arg(long)]
    pub colorize: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "4", value_parser = parse_connectivity)]
    pub connectivity: Connectivity,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub fc: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: u32,
}

#[derive(Debug, Args)]
pub struct CanonicalizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: u32,
    #[arg(long, default_value = "4", value_parser = parse_connectivity)]
    pub connectivity: Connectivity,
    /// Also write the decoded instance mask here.
    #[arg(long)]
    pub instances_out: Option<PathBuf>,
    /// Drop single-pixel components before re-encoding.
    #[arg(long)]
    pub drop_single_pixel: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: u32,
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    pub node_limit: usize,
    #[arg(long, value_enum, default_value = "ascending-id")]
    pub order: OrderArg,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Chain,
    Grid,
    Packing,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Cells per chain or per packing.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub rows: usize,
    #[arg(long, default_value_t = 2)]
    pub cols: usize,
    #[arg(long, default_value_t = 8)]
    pub cell_size: usize,
    #[arg(long, default_value_t = 0)]
    pub gap: usize,
    /// Images to generate (packings only).
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 0)]
    pub min_gap: usize,
    /// Defaults to `FC_SEED`, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ChromaticArgs {
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: u32,
    #[arg(long, default_value_t = DEFAULT_EXACT_NODE_LIMIT)]
    pub node_limit: usize,
    #[arg(long, value_enum, default_value = "ascending-id")]
    pub order: OrderArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CosineArg {
    MeanPairwise,
    MeanPooled,
}

#[derive(Debug, Args)]
pub struct OrthogonalityArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: u32,
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "mean-pairwise")]
    pub mode: CosineArg,
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Capacity(_) | Error::NodeLimitExceeded { .. } => 3,
            Error::NotFourColorable { .. } => 1,
            _ => 2,
        };
        CliError { code, message: e.to_string() }
    }
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError { code: 2, message: message.into() }
}

/// Result of a successful command: exit code (0 or 1) and stdout text.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { code: 0, stdout }
    }
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Verify(a) => verify(a),
        Command::Canonicalize(a) => canonicalize(a),
        Command::Metrics(a) => with_jobs(a.jobs, || metrics_cmd(&a)),
        Command::Stats(a) => with_jobs(a.jobs, || stats_cmd(&a)),
        Command::Synth(a) => synth_cmd(a),
        Command::Chromatic(a) => chromatic(a),
        Command::Orthogonality(a) => orthogonality(a),
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<String, CliError> {
    match out {
        Some(path) => {
            io::write_json(path, value)?;
            Ok(String::new())
        }
        None => Ok(io::to_json_string(value)?),
    }
}

fn encode(a: EncodeArgs) -> Result<Outcome, CliError> {
    let mask = io::read_instance_mask(&a.input)?;
    if mask.instance_count() as u32 > io::MAX_PNG_INSTANCES {
        return Err(Error::Capacity(format!("more than {} instances", io::MAX_PNG_INSTANCES)).into());
    }
    let enc = codec::encode_mask_detailed(&mask, a.delta, a.order.into())?;
    io::write_four_color_mask(&a.out, &enc.mask)?;
    if let Some(path) = &a.colorize {
        codec::colorize(&enc.mask).save_with_format(path, image::ImageFormat::Png).map_err(Error::from)?;
    }
    Ok(Outcome::default())
}

fn decode(a: DecodeArgs) -> Result<Outcome, CliError> {
    let fc = io::read_four_color_mask(&a.input)?;
    let mask = codec::decode_mask(&fc, a.connectivity);
    io::write_instance_mask(&a.out, &mask)?;
    Ok(Outcome::default())
}

/// Outcome of checking a four-color mask against an instance mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub proper: bool,
    /// Adjacent instance pairs sharing a color.
    pub violations: Vec<(u32, u32)>,
    /// Instances whose pixels are background or carry more than one color.
    pub inconsistent_instances: Vec<u32>,
    /// Background pixels of the mask with a nonzero color.
    pub colored_background_pixels: u64,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    schema_version: u32,
    delta: u32,
    #[serde(flatten)]
    verification: Verification,
}

/// Checks that `fc` paints every instance with one nonzero color, leaves
/// background at 0 and gives `delta`-adjacent instances different colors.
pub fn verify_encoding(mask: &InstanceMask, fc: &FourColorMask, delta: u32) -> Result<Verification, Error> {
    if mask.dims() != fc.dims() {
        return Err(Error::dims(mask.dims(), fc.dims()));
    }
    let graph = build_cell_graph(mask, delta)?;
    let mut color: Vec<Option<u8>> = vec![None; graph.node_count()];
    let mut inconsistent = BTreeSet::new();
    let mut colored_bg = 0u64;
    for (&id, &c) in mask.data().iter().zip(fc.data()) {
        if id == 0 {
            colored_bg += (c != 0) as u64;
            continue;
        }
        let slot = &mut color[graph.index_of(id).expect("mask id is a node")];
        if c == 0 || slot.is_some_and(|prev| prev != c) {
            inconsistent.insert(id);
        }
        slot.get_or_insert(c);
    }
    let violations: Vec<(u32, u32)> = graph
        .edges()
        .iter()
        .copied()
        .filter(|&(a, b)| {
            let ca = color[graph.index_of(a).unwrap()];
            ca.is_some() && ca == color[graph.index_of(b).unwrap()]
        })
        .collect();
    let inconsistent_instances: Vec<u32> = inconsistent.into_iter().collect();
    Ok(Verification {
        proper: violations.is_empty() && inconsistent_instances.is_empty() && colored_bg == 0,
        violations,
        inconsistent_instances,
        colored_background_pixels: colored_bg,
    })
}

fn verify(a: VerifyArgs) -> Result<Outcome, CliError> {
    let mask = io::read_instance_mask(&a.mask)?;
    let fc = io::read_four_color_mask(&a.fc)?;
    let verification = verify_encoding(&mask, &fc, a.delta)?;
    let code = if verification.proper { 0 } else { 1 };
    let report = VerifyReport { schema_version: SCHEMA_VERSION, delta: a.delta, verification };
    Ok(Outcome { code, stdout: io::to_json_string(&report)? })
}

fn canonicalize(a: CanonicalizeArgs) -> Result<Outcome, CliError> {
    let fc = io::read_four_color_mask(&a.input)?;
    let opts = NormalizeOptions {
        connectivity: a.connectivity,
        order: OrderingStrategy::AscendingId,
        drop_single_pixel: a.drop_single_pixel,
    };
    let (instances, canonical) = codec::normalize_prediction(&fc, a.delta, opts)?;
    io::write_four_color_mask(&a.out, &canonical)?;
    if let Some(path) = &a.instances_out {
        io::write_instance_mask(path, &instances)?;
    }
    Ok(Outcome::default())
}

/// Sorted `*.png` file names in `dir`.
pub fn png_names(dir: &Path) -> Result<Vec<String>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| input_error(format!("{}: {e}", dir.display())))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(Error::from)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") && entry.path().is_file() {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

#[derive(Debug, Serialize)]
struct NamedReport {
    name: String,
    #[serde(flatten)]
    report: MetricsReport<f64>,
}

#[derive(Debug, Serialize)]
struct MetricsFile {
    schema_version: u32,
    images: Vec<NamedReport>,
    aggregate: MetricsReport<f64>,
}

fn metrics_cmd(a: &MetricsArgs) -> Result<Outcome, CliError> {
    let gt_names = png_names(&a.gt)?;
    let pred_names = png_names(&a.pred)?;
    let gt_set: BTreeSet<&String> = gt_names.iter().collect();
    let pred_set: BTreeSet<&String> = pred_names.iter().collect();
    let unpaired: Vec<&String> = gt_set.symmetric_difference(&pred_set).copied().collect();
    if !unpaired.is_empty() {
        return Err(input_error(format!(
            "unpaired files: {}",
            unpaired.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    let reports = gt_names
        .par_iter()
        .map(|name| {
            let gt = io::read_instance_mask(&a.gt.join(name))?;
            let pred = io::read_instance_mask(&a.pred.join(name))?;
            metrics::evaluate_pair::<f64>(&gt, &pred)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let corpus = metrics::aggregate(reports)?;
    let file = MetricsFile {
        schema_version: SCHEMA_VERSION,
        images: gt_names
            .into_iter()
            .zip(corpus.images)
            .map(|(name, report)| NamedReport { name, report })
            .collect(),
        aggregate: corpus.aggregate,
    };
    Ok(Outcome::ok(emit(a.out.as_deref(), &file)?))
}

#[derive(Debug, Serialize)]
struct StatsFile {
    schema_version: u32,
    delta: u32,
    order: OrderingStrategy,
    images: Vec<String>,
    color_usage: synth::ColorUsageReport,
    degrees: stats::DegreeReport,
    chromatic: stats::ChromaticReport,
}

fn read_corpus(dir: &Path) -> Result<(Vec<String>, Vec<InstanceMask>), CliError> {
    let names = png_names(dir)?;
    if names.is_empty() {
        return Err(input_error(format!("{}: no PNG files", dir.display())));
    }
    let masks = names
        .par_iter()
        .map(|n| io::read_instance_mask(&dir.join(n)))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok((names, masks))
}

fn stats_cmd(a: &StatsArgs) -> Result<Outcome, CliError> {
    let (names, masks) = read_corpus(&a.input)?;
    let order: OrderingStrategy = a.order.into();
    let file = StatsFile {
        schema_version: SCHEMA_VERSION,
        delta: a.delta,
        order,
        images: names,
        color_usage: synth::color_usage_stats(&masks, a.delta, order)?,
        degrees: stats::degree_stats(&masks, a.delta)?,
        chromatic: stats::theorem1_report(&masks, a.delta, a.node_limit, order)?,
    };
    Ok(Outcome::ok(emit(a.out.as_deref(), &file)?))
}

/// Seed from `--seed`, then `FC_SEED`, then [`DEFAULT_SEED`].
pub fn resolve_seed(explicit: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| input_error(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    file: String,
    cells: usize,
    requested: usize,
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct SynthParams {
    n: usize,
    rows: usize,
    cols: usize,
    cell_size: usize,
    gap: usize,
    count: usize,
    width: usize,
    height: usize,
    min_gap: usize,
}

#[derive(Debug, Serialize)]
struct Manifest {
    schema_version: u32,
    kind: SynthKind,
    seed: u64,
    parameters: SynthParams,
    files: Vec<ManifestEntry>,
}

fn synth_cmd(a: SynthArgs) -> Result<Outcome, CliError> {
    let seed = resolve_seed(a.seed)?;
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    let mut files = Vec::new();
    match a.kind {
        SynthKind::Chain | SynthKind::Grid => {
            let (mask, cells) = if a.kind == SynthKind::Chain {
                (synth::gen_chain(a.n, a.cell_size, a.gap)?, a.n)
            } else {
                (synth::gen_grid(a.rows, a.cols, a.cell_size, a.gap)?, a.rows * a.cols)
            };
            let file = format!("{}.png", if a.kind == SynthKind::Chain { "chain" } else { "grid" });
            io::write_instance_mask(&a.out.join(&file), &mask)?;
            files.push(ManifestEntry { file, cells, requested: cells, seed: None });
        }
        SynthKind::Packing => {
            let packings = (0..a.count)
                .into_par_iter()
                .map(|i| {
                    let s = seed.wrapping_add(i as u64);
                    synth::gen_random_packing(a.n, a.width, a.height, s, a.min_gap).map(|p| (i, s, p))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            for (i, s, p) in packings {
                let file = format!("packing_{i:04}.png");
                io::write_instance_mask(&a.out.join(&file), &p.mask)?;
                files.push(ManifestEntry { file, cells: p.placed, requested: p.requested, seed: Some(s) });
            }
        }
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        kind: a.kind,
        seed,
        parameters: SynthParams {
            n: a.n,
            rows: a.rows,
            cols: a.cols,
            cell_size: a.cell_size,
            gap: a.gap,
            count: a.count,
            width: a.width,
            height: a.height,
            min_gap: a.min_gap,
        },
        files,
    };
    io::write_json(&a.out.join("manifest.json"), &manifest)?;
    Ok(Outcome::default())
}

#[derive(Debug, Serialize)]
struct ChromaticFile {
    schema_version: u32,
    nodes: usize,
    edges: usize,
    max_degree: usize,
    order: OrderingStrategy,
    greedy: u32,
    exact: Option<u32>,
}

fn chromatic(a: ChromaticArgs) -> Result<Outcome, CliError> {
    let mask = io::read_instance_mask(&a.mask)?;
    let graph = build_cell_graph(&mask, a.delta)?;
    let order: OrderingStrategy = a.order.into();
    let greedy = greedy_color(&graph, order).colors_used() as u32;
    let (exact, code) = match chromatic_number_exact(&graph, a.node_limit) {
        Ok(chi) => (Some(chi), 0),
        Err(Error::NodeLimitExceeded { nodes, limit }) => {
            log::warn!("graph has {nodes} nodes, exact search limited to {limit}");
            (None, 3)
        }
        Err(e) => return Err(e.into()),
    };
    let file = ChromaticFile {
        schema_version: SCHEMA_VERSION,
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        max_degree: max_degree(&graph),
        order,
        greedy,
        exact,
    };
    Ok(Outcome { code, stdout: io::to_json_string(&file)? })
}

#[derive(Debug, Serialize)]
struct OrthogonalityFile {
    schema_version: u32,
    edges: usize,
    rate: f64,
    seed: u64,
    loss: Option<f64>,
}

fn orthogonality(a: OrthogonalityArgs) -> Result<Outcome, CliError> {
    let grid: FeatureGrid<f32> = io::read_feature_grid(&a.features)?;
    let grid = FeatureGrid::new(
        grid.dims().0,
        grid.dims().1,
        grid.dim(),
        grid.data().iter().map(|&v| v as f64).collect(),
    )?;
    let mask = io::read_instance_mask(&a.mask)?;
    let graph = build_cell_graph(&mask, a.delta)?;
    let seed = resolve_seed(a.seed)?;
    let pairs = sample_adjacent_features(&grid, &mask, &graph, a.rate, seed)?;
    let mode = match a.mode {
        CosineArg::MeanPairwise => SetCosine::MeanPairwise,
        CosineArg::MeanPooled => SetCosine::MeanPooled,
    };
    let loss = if pairs.is_empty() { None } else { Some(orthogonality_loss(&pairs, mode)?) };
    let file = OrthogonalityFile { schema_version: SCHEMA_VERSION, edges: pairs.len(), rate: a.rate, seed, loss };
    Ok(Outcome::ok(io::to_json_string(&file)?))
}
