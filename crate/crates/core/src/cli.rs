//! The `pseudolabel` command line.
//!
//! Exit codes: 0 success, 1 domain or validation failure, 2 usage error.
//! Human-readable output goes to stdout, diagnostics to stderr, reports to
//! files.

// Doc comments double as `--help` text, where `<placeholders>` read better than code spans.
#![allow(rustdoc::invalid_html_tags)]

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::constraint::ConstraintTable;
use crate::io::{self, ReadOptions};
use crate::manifest::{load_manifest_set, stats, DatasetManifest, StatsTable};
use crate::metrics::{render_comparison, ComparisonRow, ConfusionMatrix, EvalReport};
use crate::ontology::{FallbackPolicy, OntologyRelation};
use crate::refine::RefineConfig;
use crate::sim::{self, Confusion, SceneSpec, TeacherNoise};
use crate::taxonomy::Taxonomy;
use crate::workspace::{refine_manifest, write_json, BatchOptions, IterationWorkspace};

#[derive(Debug, Parser)]
#[command(name = "pseudolabel", version, about = "Ground-truth constrained pseudo-label refinement")]
pub struct Cli {
    /// Worker threads for per-frame and per-trial work [default: available cores]
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: Option<u16>,
    /// Log more (repeat for debug output)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Output root for workspaces and reports
    #[arg(long, global = true, default_value = ".")]
    pub output: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an ontology against its two taxonomies
    Validate(ValidateArgs),
    /// Turn teacher predictions into constrained hard pseudo-labels
    Refine(RefineArgs),
    /// Compare predicted label maps with ground truth
    Evaluate(EvaluateArgs),
    /// Measure constraint masking on synthetic scenes
    Simulate(SimulateArgs),
    /// Frame counts per dataset for manifest sets
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Taxonomy of the dataset that has ground truth but no source labels
    #[arg(long)]
    pub extra: PathBuf,
    /// Taxonomy the teacher predicts
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub ontology: PathBuf,
    /// Treat warnings as errors
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Prediction root holding `<frame>/<aug>.sftp` [default: <output>/it<i>/predictions]
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// [default: <taxonomy>.tax next to the manifest]
    #[arg(long)]
    pub extra_taxonomy: Option<PathBuf>,
    #[arg(long)]
    pub source_taxonomy: PathBuf,
    /// [default: the manifest's ontology]
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub iteration: u32,
    /// Also write RGB renderings of the pseudo-labels
    #[arg(long)]
    pub colorize: bool,
    /// Override the ontology's fallback policy: void, error or unconstrained
    #[arg(long)]
    pub fallback: Option<FallbackPolicy>,
    /// Exit 0 even when some frames failed
    #[arg(long)]
    pub keep_going: bool,
    /// Comma-separated augmentation stems to expect [default: all 14]
    #[arg(long, value_delimiter = ',')]
    pub augs: Option<Vec<String>>,
    /// Also write masked, renormalized soft scores
    #[arg(long)]
    pub export_soft: bool,
    /// Accept scales outside the standard set
    #[arg(long)]
    pub allow_any_scale: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Manifest whose `gt` paths are the predicted label maps
    #[arg(long)]
    pub pred_manifest: PathBuf,
    #[arg(long)]
    pub gt_manifest: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Earlier evaluation report to compare against
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, default_value = "model")]
    pub model: String,
    #[arg(long, default_value_t = 1)]
    pub iteration: u32,
    /// [default: <output>/evaluation.json]
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub seed: u64,
    /// [default: the scene seed]
    #[arg(long)]
    pub teacher_seed: Option<u64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 12)]
    pub cells: usize,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// `from:to:gamma` over fine class names; repeatable
    #[arg(long = "confusion")]
    pub confusions: Vec<String>,
    /// Fine taxonomy [default: bundled]
    #[arg(long, requires_all = ["coarse", "ontology"])]
    pub fine: Option<PathBuf>,
    #[arg(long, requires_all = ["fine", "ontology"])]
    pub coarse: Option<PathBuf>,
    #[arg(long, requires_all = ["fine", "coarse"])]
    pub ontology: Option<PathBuf>,
    #[arg(long, default_value = "void")]
    pub fallback: FallbackPolicy,
    /// Directory for per-trial truth/unconstrained/constrained PNGs
    #[arg(long)]
    pub triptych: Option<PathBuf>,
    /// [default: <output>/simulation.json]
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Manifest-set files; each becomes one table labelled by its file stem
    pub files: Vec<PathBuf>,
    /// Also write the tables as JSON
    #[arg(long)]
    pub json: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn domain(msg: impl Into<String>) -> Failure {
    Failure::Domain(msg.into())
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();

    let workers = cli
        .workers
        .map(usize::from)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start {workers} workers: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Refine(a) => cmd_refine(a, &cli.output),
        Command::Evaluate(a) => cmd_evaluate(a, &cli.output),
        Command::Simulate(a) => cmd_simulate(a, &cli.output),
        Command::Stats(a) => cmd_stats(a),
    }
}

fn stdout_text(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

fn ensure_parent(path: &Path) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| domain(format!("{}: {e}", parent.display())))?;
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> CliResult<i32> {
    let extra = Taxonomy::load(&a.extra)?;
    let source = Taxonomy::load(&a.source)?;
    let rel = OntologyRelation::load(&a.ontology, &extra, &source)?;
    let diags = rel.validate();
    for d in diags.iter() {
        eprintln!("{d}");
    }
    let errors = diags.errors().count();
    let warnings = diags.warnings().count();
    stdout_text(&format!(
        "{}: {errors} error(s), {warnings} warning(s)\n",
        a.ontology.display()
    ));
    Ok(if errors > 0 || (a.strict && warnings > 0) { 1 } else { 0 })
}

fn cmd_refine(a: &RefineArgs, output: &Path) -> CliResult<i32> {
    let manifest = DatasetManifest::load(&a.manifest)?;
    let extra_path = a
        .extra_taxonomy
        .clone()
        .unwrap_or_else(|| manifest.root.join(format!("{}.tax", manifest.taxonomy)));
    let extra = Taxonomy::load(&extra_path)?;
    if extra.name() != manifest.taxonomy {
        return Err(domain(format!(
            "manifest uses taxonomy '{}' but {} defines '{}'",
            manifest.taxonomy,
            extra_path.display(),
            extra.name()
        )));
    }
    let source = Taxonomy::load(&a.source_taxonomy)?;
    let ont_path = match (&a.ontology, &manifest.ontology) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => manifest.resolve(p),
        (None, None) => {
            return Err(usage(format!(
                "dataset '{}' declares no ontology; pass --ontology",
                manifest.name
            )))
        }
    };
    let rel = OntologyRelation::load(&ont_path, &extra, &source)?;
    let diags = rel.validate();
    for d in diags.iter() {
        eprintln!("{d}");
    }
    let table = ConstraintTable::build(&rel)?;

    let ws = IterationWorkspace::new(output, a.iteration)?;
    let predictions = a.predictions.clone().unwrap_or_else(|| ws.predictions_dir());
    let opts = BatchOptions {
        refine: RefineConfig::with_fallback(a.fallback.unwrap_or(rel.fallback())),
        augs: a.augs.clone(),
        colorize: a.colorize,
        export_soft: a.export_soft,
        read: ReadOptions {
            allow_any_scale: a.allow_any_scale,
        },
    };
    let agg = refine_manifest(&manifest, &predictions, &table, &extra, &source, &ws, &opts)?;
    for f in &agg.failures {
        eprintln!("failed: {}: {}", f.frame, f.error);
    }
    stdout_text(&format!("{}\n", agg.summary()));
    Ok(if agg.frames_failed > 0 && !a.keep_going { 1 } else { 0 })
}

#[derive(Serialize)]
struct ComparisonOut<'a> {
    #[serde(flatten)]
    row: &'a ComparisonRow,
    diff: f64,
}

#[derive(Serialize)]
struct EvaluationOut<'a> {
    #[serde(flatten)]
    report: &'a EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<ComparisonOut<'a>>,
}

fn cmd_evaluate(a: &EvaluateArgs, output: &Path) -> CliResult<i32> {
    let tax = Taxonomy::load(&a.taxonomy)?;
    let preds = DatasetManifest::load(&a.pred_manifest)?;
    let gts = DatasetManifest::load(&a.gt_manifest)?;
    if preds.frames.len() != gts.frames.len() {
        return Err(domain(format!(
            "{} lists {} frames, {} lists {}",
            a.pred_manifest.display(),
            preds.frames.len(),
            a.gt_manifest.display(),
            gts.frames.len()
        )));
    }
    let by_id: HashMap<&str, &Path> = preds.frames.iter().map(|f| (f.id.as_str(), f.gt.as_path())).collect();
    let mut cm = ConfusionMatrix::for_taxonomy(&tax);
    for frame in &gts.frames {
        let pred_rel = by_id
            .get(frame.id.as_str())
            .ok_or_else(|| domain(format!("frame '{}' has no prediction", frame.id)))?;
        let gt = io::read_labelmap(gts.resolve(&frame.gt), &tax)?;
        let pred = io::read_labelmap(preds.resolve(pred_rel), &tax)?;
        cm.accumulate(&pred, &gt)
            .map_err(|e| domain(format!("frame '{}': {e}", frame.id)))?;
    }
    let report = cm.report(&tax);
    let mut text = format!("{report}\n");

    let row = match &a.baseline {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(|e| domain(format!("{}: {e}", path.display())))?;
            let base: EvalReport = serde_json::from_str(&raw)
                .map_err(|e| domain(format!("{}: not an evaluation report: {e}", path.display())))?;
            Some(ComparisonRow {
                model: a.model.clone(),
                iteration: a.iteration,
                init: base.miou,
                post: report.miou,
            })
        }
        None => None,
    };
    if let Some(row) = &row {
        text.push('\n');
        text.push_str(&render_comparison(std::slice::from_ref(row)));
    }
    stdout_text(&text);

    let path = a.report.clone().unwrap_or_else(|| output.join("evaluation.json"));
    ensure_parent(&path)?;
    let out = EvaluationOut {
        report: &report,
        comparison: row.as_ref().map(|r| ComparisonOut { row: r, diff: r.diff() }),
    };
    write_json(&path, &out)?;
    Ok(0)
}

fn parse_confusion(raw: &str, fine: &Taxonomy) -> CliResult<Confusion> {
    let parts: Vec<&str> = raw.split(':').collect();
    let [from, to, gamma] = parts[..] else {
        return Err(usage(format!("--confusion expects from:to:gamma, got '{raw}'")));
    };
    let class = |name: &str| {
        fine.find(name)
            .map(|c| c.id)
            .ok_or_else(|| usage(format!("unknown class '{name}' in taxonomy '{}'", fine.name())))
    };
    let gamma: f64 = gamma
        .parse()
        .map_err(|_| usage(format!("confusion strength '{gamma}' is not a number")))?;
    Ok(Confusion {
        from: class(from)?,
        to: class(to)?,
        gamma,
    })
}

fn cmd_simulate(a: &SimulateArgs, output: &Path) -> CliResult<i32> {
    let rel = match (&a.fine, &a.coarse, &a.ontology) {
        (Some(f), Some(c), Some(o)) => {
            let fine = Taxonomy::load(f)?;
            let coarse = Taxonomy::load(c)?;
            OntologyRelation::load(o, &coarse, &fine)?
        }
        _ => sim::bundled_relation(),
    };
    let fine = rel.source().clone();
    let spec = SceneSpec {
        height: a.height,
        width: a.width,
        num_cells: a.cells,
        fine: fine.clone(),
        seed: a.seed,
    };
    let noise = TeacherNoise {
        beta: a.beta,
        confusions: a
            .confusions
            .iter()
            .map(|c| parse_confusion(c, &fine))
            .collect::<CliResult<_>>()?,
        sigma: a.sigma,
        seed: a.teacher_seed.unwrap_or(a.seed),
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    noise.validate(fine.len()).map_err(|e| usage(e.to_string()))?;
    let cfg = RefineConfig::with_fallback(a.fallback);
    let trials = usize::try_from(a.trials).map_err(|_| usage("too many trials"))?;
    let report = sim::run_experiment(&spec, &noise, &rel, &cfg, trials)?;

    if let Some(dir) = &a.triptych {
        std::fs::create_dir_all(dir).map_err(|e| domain(format!("{}: {e}", dir.display())))?;
        let table = ConstraintTable::build(&rel)?;
        for i in 0..trials {
            let trial = sim::run_trial(&spec, &noise, &rel, &table, &cfg, i)?;
            let (w, h, rgb) = sim::triptych(&trial, &fine);
            let path = dir.join(format!("trial{i:03}.png"));
            std::fs::write(&path, io::encode_rgb(w, h, &rgb))
                .map_err(|e| domain(format!("{}: {e}", path.display())))?;
        }
    }

    let path = a.report.clone().unwrap_or_else(|| output.join("simulation.json"));
    ensure_parent(&path)?;
    write_json(&path, &report)?;
    stdout_text(&format!("{}\n", report.summary()));
    Ok(0)
}

fn cmd_stats(a: &StatsArgs) -> CliResult<i32> {
    let mut tables: Vec<StatsTable> = Vec::new();
    for path in &a.files {
        let set = load_manifest_set(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        tables.push(stats(&set, &label));
    }
    let text = tables.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n");
    stdout_text(&text);
    if let Some(path) = &a.json {
        ensure_parent(path)?;
        write_json(path, &tables)?;
    }
    Ok(0)
}
