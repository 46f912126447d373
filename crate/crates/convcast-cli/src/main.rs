//! `convcast`: dataset generation, correlation analysis, model fitting,
//! resource prediction, budgeted allocation and behavioral simulation as one
//! scriptable executable.
//!
//! Exit codes: 0 success, 1 domain error (one `error: ...` line on stderr),
//! 2 usage error.

mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use convcast::alloc::{allocate_optimal, build_cost_table, predict_usage, AllocationRequest};
use convcast::analysis::{correlation_matrix, evaluate};
use convcast::data::{generate_dataset, read_csv, to_csv_string, Dataset, NoiseSpec};
use convcast::model::{
    parse_capacity_csv, resolve_capacity, BlockKind, ConfigPoint, PlatformCapacity, ResourceKind,
    ResourceVector,
};
use convcast::regression::{
    fit_polynomial, model_from_json, model_to_json, predict_checked, select_model, Model, ModelSet,
};
use convcast::sim::{convolve_frame, Frame, Kernel3x3};

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "convcast",
    version,
    about = "FPGA convolution-block resource toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthesis-sweep dataset from the built-in cost oracle
    Gen(GenArgs),
    /// Validate a dataset CSV and report its shape
    Ingest(IngestArgs),
    /// Pearson correlation matrices per block
    Correlate(CorrelateArgs),
    /// Fit resource models (single target or the full set)
    Fit(FitArgs),
    /// Score a model against a dataset (MSE/MAE/R2/MAPE)
    Validate(ValidateArgs),
    /// Predict one resource value, or a usage table for an instance mix
    Predict(PredictArgs),
    /// Find the instance mix maximizing convolutions under a budget
    Allocate(AllocateArgs),
    /// Tabulate model predictions over a (d, c) grid
    Surface(SurfaceArgs),
    /// Run a frame through a block's behavioral model
    Simulate(SimulateArgs),
}

/// Defaults file pointed to by CONVCAST_CONFIG: `key = value` lines, `#`
/// comments; keys match long flag names.
fn load_config() -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let Ok(path) = std::env::var("CONVCAST_CONFIG") else {
        return Ok(map);
    };
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading CONVCAST_CONFIG file {path}"))?;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("malformed config line `{line}` (expected key = value)"))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn config_or<T: std::str::FromStr>(
    flag: Option<T>,
    config: &BTreeMap<String, String>,
    key: &str,
    fallback: T,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match config.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|e| anyhow::anyhow!("config key {key} = `{raw}`: {e}")),
        None => Ok(fallback),
    }
}

fn parse_blocks(spec: &str) -> Result<Vec<BlockKind>> {
    let mut out = Vec::new();
    for part in spec.split(',') {
        out.push(part.trim().parse::<BlockKind>()?);
    }
    Ok(out)
}

fn parse_counts(spec: &str) -> Result<[u64; 4]> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 4 {
        bail!(
            "--counts expects 4 comma-separated integers, got {}",
            parts.len()
        );
    }
    let mut counts = [0u64; 4];
    for (slot, part) in counts.iter_mut().zip(parts) {
        *slot = part
            .trim()
            .parse()
            .with_context(|| format!("count `{part}`"))?;
    }
    Ok(counts)
}

fn load_extra_capacities(
    path: Option<&Path>,
    manifest: &mut RunManifest,
) -> Result<Vec<PlatformCapacity>> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => {
            let text = manifest.read_input(p)?;
            Ok(parse_capacity_csv(&text)?)
        }
    }
}

fn load_dataset(path: &Path, manifest: &mut RunManifest) -> Result<Dataset> {
    let text = manifest.read_input(path)?;
    Ok(read_csv(text.as_bytes())?)
}

fn load_model(path: &Path, manifest: &mut RunManifest) -> Result<Model> {
    let text = manifest.read_input(path)?;
    Ok(model_from_json(&text)?)
}

/// Loads every `*.json` model in a directory into a keyed set.
fn load_model_dir(dir: &Path, manifest: &mut RunManifest) -> Result<ModelSet> {
    let mut set = ModelSet::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading model directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && !p
                    .file_name()
                    .is_some_and(|n| n.to_string_lossy().ends_with(".manifest.json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .json model files in {}", dir.display());
    }
    for path in paths {
        set.insert(load_model(&path, manifest)?);
    }
    Ok(set)
}

/// Writes to the path, or stdout when absent; returns whether a file was
/// written (manifest placement follows the output).
fn write_output(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{content}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gen

#[derive(Args)]
struct GenArgs {
    /// Comma-separated blocks (conv1..conv4)
    #[arg(long, default_value = "conv1,conv2,conv3,conv4")]
    blocks: String,
    #[arg(long, default_value_t = 3)]
    dmin: u8,
    #[arg(long, default_value_t = 16)]
    dmax: u8,
    #[arg(long, default_value_t = 3)]
    cmin: u8,
    #[arg(long, default_value_t = 16)]
    cmax: u8,
    /// Relative noise sigma (0 disables)
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    platform: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn run_gen(args: GenArgs, config: &BTreeMap<String, String>) -> Result<()> {
    let mut manifest = RunManifest::new("gen");
    let blocks = parse_blocks(&args.blocks)?;
    let noise = config_or(args.noise, config, "noise", 0.0)?;
    let seed = config_or(args.seed, config, "seed", 42)?;
    let platform = config_or(args.platform, config, "platform", "zcu104".to_string())?;
    manifest.flag("blocks", &args.blocks);
    manifest.flag("dmin", args.dmin);
    manifest.flag("dmax", args.dmax);
    manifest.flag("cmin", args.cmin);
    manifest.flag("cmax", args.cmax);
    manifest.flag("noise", noise);
    manifest.flag("platform", &platform);
    manifest.seed(seed);

    let ds = generate_dataset(
        &blocks,
        (args.dmin, args.dmax),
        (args.cmin, args.cmax),
        &NoiseSpec { sigma: noise, seed },
        &platform,
    )?;
    write_output(args.output.as_deref(), &to_csv_string(&ds))?;
    manifest.emit(args.output.as_deref())
}

// ---------------------------------------------------------------------------
// ingest

#[derive(Args)]
struct IngestArgs {
    dataset: PathBuf,
    /// Validate only (always on; accepted for scripting symmetry)
    #[arg(long)]
    validate: bool,
}

fn run_ingest(args: IngestArgs) -> Result<()> {
    let mut manifest = RunManifest::new("ingest");
    let ds = load_dataset(&args.dataset, &mut manifest)?;
    let mut per_block = String::new();
    for block in BlockKind::ALL {
        let n = ds.for_block(block).count();
        if n > 0 {
            per_block.push_str(&format!("{block},{n}\n"));
        }
    }
    print!("ok,{} records\n{per_block}", ds.len());
    manifest.emit(None)
}

// ---------------------------------------------------------------------------
// correlate

#[derive(Args)]
struct CorrelateArgs {
    dataset: PathBuf,
    /// Restrict to one block (default: every block present)
    #[arg(long)]
    block: Option<BlockKind>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn run_correlate(args: CorrelateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("correlate");
    if let Some(b) = args.block {
        manifest.flag("block", b);
    }
    let ds = load_dataset(&args.dataset, &mut manifest)?;
    let blocks: Vec<BlockKind> = match args.block {
        Some(b) => vec![b],
        None => BlockKind::ALL
            .into_iter()
            .filter(|&b| ds.for_block(b).count() >= 2)
            .collect(),
    };
    if blocks.is_empty() {
        bail!("dataset holds no block with at least 2 records");
    }
    // long format: one row per matrix entry, script-friendly
    let mut out = String::from("block,x,y,r\n");
    for block in blocks {
        let m = correlation_matrix(&ds, block)?;
        for (i, xi) in m.labels.iter().enumerate() {
            for (j, yj) in m.labels.iter().enumerate() {
                out.push_str(&format!("{block},{xi},{yj},{:.6}\n", m.r[i][j]));
            }
        }
        if !m.excluded.is_empty() {
            eprintln!(
                "note: {block} columns identically zero, excluded: {}",
                m.excluded.join(", ")
            );
        }
    }
    write_output(args.output.as_deref(), &out)?;
    manifest.emit(args.output.as_deref())
}

// ---------------------------------------------------------------------------
// fit

#[derive(Args)]
struct FitArgs {
    dataset: PathBuf,
    #[arg(long, required_unless_present = "all", conflicts_with = "all")]
    block: Option<BlockKind>,
    #[arg(long, required_unless_present = "all", conflicts_with = "all")]
    resource: Option<ResourceKind>,
    /// Force an exact polynomial degree instead of automatic selection
    #[arg(long)]
    degree: Option<u32>,
    /// Fit every modeled (block, resource) pair; --output names a directory
    #[arg(long)]
    all: bool,
    #[arg(long, default_value_t = 0.9)]
    r2_threshold: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn fit_one(
    ds: &Dataset,
    block: BlockKind,
    resource: ResourceKind,
    degree: Option<u32>,
    r2_threshold: f64,
    alpha: f64,
) -> Result<Model> {
    if let Some(degree) = degree {
        if !(1..=4).contains(&degree) {
            bail!("--degree must be between 1 and 4");
        }
        return Ok(Model::Polynomial(fit_polynomial(
            ds, block, resource, degree,
        )?));
    }
    let outcome = select_model(ds, block, resource, r2_threshold, alpha)?;
    outcome.model.ok_or_else(|| {
        anyhow::anyhow!(
            "no model for ({block}, {resource}) reaches r2 {r2_threshold}; per-degree r2: {:?}",
            outcome.report.per_degree_r2
        )
    })
}

/// The (block, resource) pairs the pipeline models: LLUT/MLUT/FF everywhere,
/// CChain only where the block uses carry chains.
fn modeled_pairs() -> Vec<(BlockKind, ResourceKind)> {
    let mut pairs = Vec::new();
    for block in BlockKind::ALL {
        for resource in [ResourceKind::Llut, ResourceKind::Mlut, ResourceKind::Ff] {
            pairs.push((block, resource));
        }
        if convcast::model::descriptor(block).uses_cchain {
            pairs.push((block, ResourceKind::Cchain));
        }
    }
    pairs
}

fn run_fit(args: FitArgs) -> Result<()> {
    let mut manifest = RunManifest::new("fit");
    manifest.flag("r2_threshold", args.r2_threshold);
    manifest.flag("alpha", args.alpha);
    if let Some(d) = args.degree {
        manifest.flag("degree", d);
    }
    let ds = load_dataset(&args.dataset, &mut manifest)?;

    if args.all {
        let dir = args
            .output
            .as_deref()
            .context("--all needs --output naming a directory")?;
        fs::create_dir_all(dir)?;
        let pairs: Vec<_> = modeled_pairs()
            .into_iter()
            .filter(|&(b, _)| ds.for_block(b).count() > 0)
            .collect();
        if pairs.is_empty() {
            bail!("dataset holds no records for any block");
        }
        // independent fits; fan out one thread per (block, resource)
        let results: Vec<(BlockKind, ResourceKind, Result<Model>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = pairs
                .iter()
                .map(|&(b, r)| {
                    let ds = &ds;
                    scope.spawn(move || {
                        (
                            b,
                            r,
                            fit_one(ds, b, r, args.degree, args.r2_threshold, args.alpha),
                        )
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (block, resource, result) in results {
            let model = result.with_context(|| format!("fitting ({block}, {resource})"))?;
            let path = dir.join(format!("{block}_{resource}.json"));
            fs::write(&path, model_to_json(&model))?;
        }
        manifest.emit(Some(&dir.join("models")))?;
        return Ok(());
    }

    let (block, resource) = (args.block.unwrap(), args.resource.unwrap());
    manifest.flag("block", block);
    manifest.flag("resource", resource);
    let model = fit_one(
        &ds,
        block,
        resource,
        args.degree,
        args.r2_threshold,
        args.alpha,
    )?;
    write_output(args.output.as_deref(), &model_to_json(&model))?;
    manifest.emit(args.output.as_deref())
}

// ---------------------------------------------------------------------------
// validate

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn run_validate(args: ValidateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("validate");
    let model = load_model(&args.model, &mut manifest)?;
    let ds = load_dataset(&args.data, &mut manifest)?;
    let records: Vec<_> = ds.for_block(model.block()).collect();
    if records.is_empty() {
        bail!("no records for block {}", model.block());
    }
    let preds: Vec<f64> = records
        .iter()
        .map(|r| convcast::regression::predict(&model, r.cfg))
        .collect();
    let truths: Vec<f64> = records
        .iter()
        .map(|r| r.measured.get(model.resource()))
        .collect();
    let metrics = evaluate(&preds, &truths)?;
    let mut text = serde_json::to_string_pretty(&metrics)?;
    text.push('\n');
    write_output(args.output.as_deref(), &text)?;
    manifest.emit(args.output.as_deref())
}

// ---------------------------------------------------------------------------
// predict

#[derive(Args)]
struct PredictArgs {
    /// Single model file (point prediction mode)
    model: Option<PathBuf>,
    /// Directory of fitted models (usage-table mode, with --counts)
    #[arg(long, conflicts_with = "model")]
    models: Option<PathBuf>,
    #[arg(long)]
    d: u8,
    #[arg(long)]
    c: u8,
    /// Instance counts n1,n2,n3,n4 for the usage table
    #[arg(long, requires = "models")]
    counts: Option<String>,
    #[arg(long)]
    platform: Option<String>,
    #[arg(long)]
    capacity_file: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn run_predict(args: PredictArgs, config: &BTreeMap<String, String>) -> Result<()> {
    let mut manifest = RunManifest::new("predict");
    manifest.flag("d", args.d);
    manifest.flag("c", args.c);
    let cfg = ConfigPoint::new(args.d, args.c);

    if let Some(model_path) = &args.model {
        let model = load_model(model_path, &mut manifest)?;
        let p = predict_checked(&model, cfg);
        if p.extrapolated {
            eprintln!(
                "note: ({}, {}) lies outside the fitted domain",
                args.d, args.c
            );
        }
        // trim float dust so calibration points print exactly
        let value = (p.value * 1e9).round() / 1e9;
        write_output(args.output.as_deref(), &format!("{value}\n"))?;
        return manifest.emit(args.output.as_deref());
    }

    let models_dir = args
        .models
        .as_deref()
        .context("give a model file or --models DIR")?;
    let counts_spec = args
        .counts
        .as_deref()
        .context("usage-table mode needs --counts")?;
    let counts = parse_counts(counts_spec)?;
    manifest.flag("counts", counts_spec);
    let platform_id = config_or(args.platform, config, "platform", "zcu104".to_string())?;
    manifest.flag("platform", &platform_id);
    let extra = load_extra_capacities(args.capacity_file.as_deref(), &mut manifest)?;
    let platform = resolve_capacity(&platform_id, &extra)?;

    let set = load_model_dir(models_dir, &mut manifest)?;
    let allowed: Vec<BlockKind> = BlockKind::ALL
        .into_iter()
        .filter(|&b| counts[b.index()] > 0)
        .collect();
    let costs = build_cost_table(&set, cfg, &allowed)?;
    let (usage, total_convs) = predict_usage(&counts, &costs, &platform)?;
    write_output(
        args.output.as_deref(),
        &usage_csv(&counts, &usage, total_convs),
    )?;
    manifest.emit(args.output.as_deref())
}

fn usage_csv(counts: &[u64; 4], usage: &ResourceVector, total_convs: u64) -> String {
    let mut out = String::from("block,count\n");
    for block in BlockKind::ALL {
        out.push_str(&format!("{block},{}\n", counts[block.index()]));
    }
    for r in ResourceKind::ALL {
        out.push_str(&format!("usage_{r},{:.2}\n", usage.get(r)));
    }
    out.push_str(&format!("total_convs,{total_convs}\n"));
    out
}

// ---------------------------------------------------------------------------
// allocate

#[derive(Args)]
struct AllocateArgs {
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    d: u8,
    #[arg(long)]
    c: u8,
    /// Uniform budget fraction in (0, 1]
    #[arg(long)]
    budget: Option<f64>,
    /// Restrict to these blocks (comma-separated)
    #[arg(long)]
    only: Option<String>,
    /// Constrain MLUT too (needs a platform with MLUT capacity)
    #[arg(long)]
    include_mlut: bool,
    #[arg(long)]
    platform: Option<String>,
    #[arg(long)]
    capacity_file: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn run_allocate(args: AllocateArgs, config: &BTreeMap<String, String>) -> Result<()> {
    let mut manifest = RunManifest::new("allocate");
    manifest.flag("d", args.d);
    manifest.flag("c", args.c);
    let budget = config_or(args.budget, config, "budget", 0.8)?;
    if !(budget > 0.0 && budget <= 1.0) {
        bail!("--budget must be in (0, 1], got {budget}");
    }
    manifest.flag("budget", budget);
    let platform_id = config_or(args.platform, config, "platform", "zcu104".to_string())?;
    manifest.flag("platform", &platform_id);
    let allowed = match &args.only {
        Some(spec) => {
            manifest.flag("only", spec);
            parse_blocks(spec)?
        }
        None => BlockKind::ALL.to_vec(),
    };

    let extra = load_extra_capacities(args.capacity_file.as_deref(), &mut manifest)?;
    let platform = resolve_capacity(&platform_id, &extra)?;
    let cfg = ConfigPoint::new(args.d, args.c);
    let set = load_model_dir(&args.models, &mut manifest)?;
    let costs = build_cost_table(&set, cfg, &allowed)?;
    let mut request = AllocationRequest::new(platform, cfg, allowed, costs);
    request.budgets = ResourceVector::splat(budget);
    request.include_mlut = args.include_mlut;
    let plan = allocate_optimal(&request)?;
    write_output(
        args.output.as_deref(),
        &usage_csv(&plan.counts, &plan.usage_percent, plan.total_convs),
    )?;
    manifest.emit(args.output.as_deref())
}

// ---------------------------------------------------------------------------
// surface

#[derive(Args)]
struct SurfaceArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 3)]
    dmin: u8,
    #[arg(long, default_value_t = 16)]
    dmax: u8,
    #[arg(long, default_value_t = 3)]
    cmin: u8,
    #[arg(long, default_value_t = 16)]
    cmax: u8,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn run_surface(args: SurfaceArgs) -> Result<()> {
    let mut manifest = RunManifest::new("surface");
    for (k, v) in [
        ("dmin", args.dmin),
        ("dmax", args.dmax),
        ("cmin", args.cmin),
        ("cmax", args.cmax),
    ] {
        manifest.flag(k, v);
    }
    if args.dmin > args.dmax || args.cmin > args.cmax {
        bail!("inverted grid range");
    }
    let model = load_model(&args.model, &mut manifest)?;
    let mut out = String::from("data_bits,coeff_bits,value,extrapolated\n");
    for d in args.dmin..=args.dmax {
        for c in args.cmin..=args.cmax {
            let p = predict_checked(&model, ConfigPoint::new(d, c));
            out.push_str(&format!("{d},{c},{:.6},{}\n", p.value, p.extrapolated));
        }
    }
    write_output(args.output.as_deref(), &out)?;
    manifest.emit(args.output.as_deref())
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    block: BlockKind,
    #[arg(long)]
    d: u8,
    #[arg(long)]
    c: u8,
    /// Frame pixels: CSV grid of integers
    #[arg(long)]
    frame: PathBuf,
    /// Kernel coefficients: 3x3 CSV grid of integers
    #[arg(long)]
    kernel: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn read_int_grid(text: &str) -> Result<(usize, usize, Vec<i64>)> {
    let mut rows = 0usize;
    let mut cols = None;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<i64> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<i64>().with_context(|| {
                    format!("line {}: cell `{}` is not an integer", i + 1, cell.trim())
                })
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(w) if w != row.len() => {
                bail!(
                    "line {}: ragged grid ({} cells, expected {w})",
                    i + 1,
                    row.len()
                )
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.context("empty grid")?;
    Ok((rows, cols, values))
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("simulate");
    manifest.flag("block", args.block);
    manifest.flag("d", args.d);
    manifest.flag("c", args.c);
    let cfg = ConfigPoint::new(args.d, args.c);

    let frame_text = manifest.read_input(&args.frame)?;
    let (h, w, pixels) = read_int_grid(&frame_text).context("frame grid")?;
    let frame = Frame::new(h, w, args.d, pixels)?;

    let kernel_text = manifest.read_input(&args.kernel)?;
    let (kh, kw, coeffs) = read_int_grid(&kernel_text).context("kernel grid")?;
    if (kh, kw) != (3, 3) {
        bail!("kernel must be a 3x3 grid, got {kh}x{kw}");
    }
    let kernel = Kernel3x3::new(coeffs.try_into().expect("9 cells"), args.c)?;

    let (out, cycles) = convolve_frame(args.block, cfg, &frame, &kernel)?;
    let mut text = String::new();
    for r in 0..out.height {
        let row: Vec<String> = (0..out.width).map(|cl| out.at(r, cl).to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_output(args.output.as_deref(), &text)?;
    println!("cycles,{cycles}");
    manifest.emit(args.output.as_deref())
}

// ---------------------------------------------------------------------------

fn run() -> Result<()> {
    let cli = Cli::parse();
    let config = load_config()?;
    match cli.cmd {
        Cmd::Gen(a) => run_gen(a, &config),
        Cmd::Ingest(a) => run_ingest(a),
        Cmd::Correlate(a) => run_correlate(a),
        Cmd::Fit(a) => run_fit(a),
        Cmd::Validate(a) => run_validate(a),
        Cmd::Predict(a) => run_predict(a, &config),
        Cmd::Allocate(a) => run_allocate(a, &config),
        Cmd::Surface(a) => run_surface(a),
        Cmd::Simulate(a) => run_simulate(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // one line, machine-parsable: `error: <chain>`
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
