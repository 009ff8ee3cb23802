//! The `hnf` command line: `train`, `eval`, `verify` and `curves`.
//!
//! Exit codes: 0 success, 2 configuration, 3 data or artifacts, 4 solver or
//! certification failure, 5 resource limit.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hnf_core::data::{Dataset, Split};
use hnf_core::matrixgen::derive_seed;
use hnf_core::trainer::{
    build_untrained, evaluate, train_with_clock, verify_invariants, verify_model, Front, InvariantReport,
    TrainedModel,
};

use crate::artifacts::{
    load_model, read_report_jsonl, read_run_manifest, report_rows, save_model, write_csv_rows, write_curves,
    write_report_jsonl, write_run_manifest, ArtifactPaths, DataEcho, RunManifest, SeedEcho, NETWORK_FILE,
    REPORT_CSV, REPORT_JSONL,
};
use crate::config::{ActivationArg, ScheduleArg, Settings, WeightsArg};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "hnf", version, about = "Train and inspect layer-wise HNF networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network and write its artifacts
    Train(TrainArgs),
    /// Re-evaluate a saved run
    Eval(EvalArgs),
    /// Check the geometric invariants of a saved or fresh network
    Verify(VerifyArgs),
    /// Emit accuracy-versus-size curve data as CSV
    Curves(CurvesArgs),
}

/// Settings shared by `train` and fresh `verify`. Every flag overrides the
/// same key from `--config`.
#[derive(Debug, Args, Default)]
pub struct SettingsArgs {
    /// Flat TOML settings file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// csv:PATH | idx:IMAGES,LABELS[,TEST_IMAGES,TEST_LABELS] | blobs[:P,Q,N,SEP]
    #[arg(long)]
    pub data: Option<String>,
    /// Label column: 0-based index, header name or "last"
    #[arg(long)]
    pub label_col: Option<String>,
    #[arg(long)]
    pub delimiter: Option<String>,
    /// Whether the CSV has a header row (detected when omitted)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub header: Option<bool>,
    /// Training samples in the seeded split (default: two thirds)
    #[arg(long)]
    pub train_count: Option<usize>,
    /// Seed of the train/test shuffle (default: --seed)
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// First-layer width before expansion
    #[arg(long)]
    pub n1: Option<usize>,
    /// Number of layers
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum)]
    pub weights: Option<WeightsArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use an extreme-learning-machine first layer
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub elm: Option<bool>,
    #[arg(long, value_enum)]
    pub elm_activation: Option<ActivationArg>,
    #[arg(long)]
    pub admm_iters: Option<usize>,
    /// auto | fixed | positive number
    #[arg(long)]
    pub admm_penalty: Option<String>,
    /// Residual balancing (default: on for auto penalty, off otherwise)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub admm_adaptive: Option<bool>,
    #[arg(long)]
    pub admm_tolerance: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub admm_warm_start: Option<bool>,
    #[arg(long, value_enum)]
    pub eps_schedule: Option<ScheduleArg>,
    /// Comma-separated widths for layers 2.. (default: match input)
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Standardize features with training-split statistics
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
}

impl SettingsArgs {
    pub fn resolve(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { s.$f = v.clone(); } )* };
        }
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if self.$f.is_some() { s.$f = self.$f.clone(); } )* };
        }
        set!(delimiter, n1, depth, weights, seed, elm, elm_activation, admm_iters, admm_penalty);
        set!(admm_tolerance, admm_warm_start, eps_schedule, standardize);
        set_opt!(data, label_col, header, train_count, split_seed, admm_adaptive, widths);
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub settings: SettingsArgs,
    /// Output directory
    #[arg(long, default_value = "hnf-run")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    Both,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run directory written by `train`
    #[arg(long, default_value = "hnf-run")]
    pub out: PathBuf,
    /// Data source (default: the one recorded in run.json)
    #[arg(long)]
    pub data: Option<String>,
    /// Evaluate a single layer (0 = baseline)
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub split: SplitArg,
    /// Also write the table as JSON lines
    #[arg(long)]
    pub jsonl: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Saved run to check; a fresh network is built from the settings when
    /// this directory has no network.json
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Run directory containing report.jsonl
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Explicit report path (overrides --out)
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write CSV here instead of stdout
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Curves(a) => cmd_curves(&a),
    }
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn fmt_opt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "-".into()
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let settings = a.settings.resolve()?;
    let cfg = settings.train_config()?;
    let started = unix_ms();
    let data = settings.load_data()?;
    let t0 = Instant::now();
    let mut clock = || t0.elapsed().as_millis() as u64;
    let (model, report) = train_with_clock(&data, &cfg, &mut clock)?;

    let dir = &a.out;
    save_model(dir, &model, &cfg.admm)?;
    let rows = report_rows(&report);
    write_report_jsonl(&dir.join(REPORT_JSONL), &rows)?;
    write_csv_rows(&dir.join(REPORT_CSV), &rows)?;

    let mut weights = Vec::new();
    if matches!(model.front, Front::Elm { .. }) {
        weights.push(PathBuf::from("front.hnfw"));
    }
    weights.extend((1..=model.network.depth()).map(|l| PathBuf::from(format!("layer{l}.hnfw"))));
    let meta = data.meta();
    let first = if cfg.elm_front { 2 } else { 1 };
    let run = RunManifest {
        library_version: env!("CARGO_PKG_VERSION").into(),
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        settings: settings.clone(),
        data: DataEcho {
            name: meta.name.clone(),
            p: meta.p,
            q: meta.q,
            n_train: meta.n_train,
            n_test: meta.n_test,
            label_names: meta.label_names.clone(),
        },
        artifacts: ArtifactPaths {
            network: NETWORK_FILE.into(),
            weights,
            maps: (0..model.maps.len()).map(|k| PathBuf::from(format!("map{k}.hnfm"))).collect(),
            report_jsonl: REPORT_JSONL.into(),
            report_csv: REPORT_CSV.into(),
        },
        seeds: SeedEcho {
            weights: cfg.seed,
            split: meta.split_seed,
            per_layer: (first..=cfg.depth)
                .map(|l| cfg.weight_kind.is_randomized().then(|| derive_seed(cfg.seed, l as u64)))
                .collect(),
        },
        monotonicity_certified: report.monotonicity_certified,
    };
    write_run_manifest(dir, &run)?;

    println!(
        "{:>5} {:>8} {:>14} {:>12} {:>9} {:>9} {:>6} {:>8}",
        "layer", "nodes", "epsilon", "train_cost", "train_acc", "test_acc", "iters", "ms"
    );
    for r in report.records() {
        println!(
            "{:>5} {:>8} {:>14} {:>12.6} {:>9.4} {:>9} {:>6} {:>8}",
            r.layer,
            r.nodes_cumulative,
            fmt_opt(r.epsilon),
            r.train_cost,
            r.train_acc,
            fmt_opt(r.test_acc),
            r.admm_iters,
            r.wall_ms
        );
    }
    if !report.monotonicity_certified {
        for r in &report.per_layer {
            if let Some(c) = r.certificate.filter(|c| !c.ok()) {
                eprintln!("layer {}: certificate failed: {c:?}", r.layer);
            }
        }
        return Err(Error::Certification("training cost monotonicity could not be certified".into()));
    }
    Ok(())
}

fn data_for_saved_run(dir: &Path, override_data: Option<&str>) -> Result<Dataset> {
    let mut settings = match read_run_manifest(dir) {
        Ok(run) => run.settings,
        Err(e) if override_data.is_none() => return Err(e),
        Err(_) => Settings::default(),
    };
    if let Some(d) = override_data {
        settings.data = Some(d.to_string());
    }
    settings.load_data()
}

#[derive(Debug, serde::Serialize)]
struct EvalRow {
    layer: usize,
    train_cost: Option<f64>,
    train_acc: Option<f64>,
    test_cost: Option<f64>,
    test_acc: Option<f64>,
}

fn model_layers(model: &TrainedModel) -> Vec<usize> {
    match model.front {
        Front::Raw => (0..=model.network.depth()).collect(),
        Front::Elm { .. } => (1..=model.depth()).collect(),
    }
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.out)?;
    let layers = match a.layer {
        Some(l) if l > model.depth() => {
            return Err(Error::Config(format!("layer {l} does not exist; the network has {} layers", model.depth())))
        }
        Some(l) => vec![l],
        None => model_layers(&model),
    };
    let data = data_for_saved_run(&a.out, a.data.as_deref())?;
    let want = |s: Split| match a.split {
        SplitArg::Both => !data.indices(s).is_empty(),
        SplitArg::Train => s == Split::Train,
        SplitArg::Test => s == Split::Test,
    };
    let mut rows = Vec::new();
    println!("{:>5} {:>12} {:>9} {:>12} {:>9}", "layer", "train_cost", "train_acc", "test_cost", "test_acc");
    for l in layers {
        let tr = want(Split::Train).then(|| evaluate(&model, &data, l, Split::Train)).transpose()?;
        let te = want(Split::Test).then(|| evaluate(&model, &data, l, Split::Test)).transpose()?;
        let row = EvalRow {
            layer: l,
            train_cost: tr.map(|e| e.cost),
            train_acc: tr.map(|e| e.accuracy),
            test_cost: te.map(|e| e.cost),
            test_acc: te.map(|e| e.accuracy),
        };
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        println!(
            "{:>5} {:>12} {:>9} {:>12} {:>9}",
            row.layer,
            f(row.train_cost),
            f(row.train_acc),
            f(row.test_cost),
            f(row.test_acc)
        );
        rows.push(row);
    }
    if let Some(p) = &a.jsonl {
        let mut text = String::new();
        for r in &rows {
            text.push_str(&serde_json::to_string(r).expect("row serializes"));
            text.push('\n');
        }
        std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn print_invariants(r: &InvariantReport) {
    println!("{:<30} {:>7} {:>8} {:>14}  status", "check", "trials", "failures", "worst_margin");
    for c in &r.checks {
        let status = if !c.applicable {
            "n/a"
        } else if c.failures == 0 {
            "ok"
        } else {
            "FAIL"
        };
        println!(
            "{:<30} {:>7} {:>8} {:>14.3e}  {}{}",
            c.name,
            c.trials,
            c.failures,
            c.worst_margin,
            status,
            c.note.as_ref().map(|n| format!(" ({n})")).unwrap_or_default()
        );
    }
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<()> {
    if a.trials == 0 {
        return Err(Error::Config("--trials must be at least 1".into()));
    }
    let saved = a.out.as_ref().filter(|d| d.join(NETWORK_FILE).exists());
    let report = match saved {
        Some(dir) => {
            let model = load_model(dir)?;
            let data = data_for_saved_run(dir, a.settings.data.as_deref())?;
            let seed = a.settings.seed.unwrap_or(0);
            verify_model(&model, &data, a.trials, seed)?
        }
        None => {
            let mut settings = a.settings.resolve()?;
            if settings.data.is_none() {
                settings.data = Some("blobs".into());
            }
            let cfg = settings.train_config()?;
            let data = settings.load_data()?;
            let (front, net) = build_untrained(&cfg, data.p())?;
            let x = data.split_x(Split::Train);
            let inputs = match &front {
                Front::Raw => x,
                Front::Elm { weight, activation } => hnf_core::solvers::elm_features(weight, &x, *activation)?,
            };
            verify_invariants(&net, &inputs, a.trials, settings.seed)?
        }
    };
    print_invariants(&report);
    if report.all_passed() {
        Ok(())
    } else {
        Err(Error::Certification("one or more invariant checks failed".into()))
    }
}

pub fn cmd_curves(a: &CurvesArgs) -> Result<()> {
    let path = match (&a.report, &a.out) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => d.join(REPORT_JSONL),
        (None, None) => return Err(Error::format("<report>", "give --out or --report")),
    };
    let rows = read_report_jsonl(&path)?;
    match &a.csv {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
            write_curves(f, &rows)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_curves(&mut lock, &rows)?;
            lock.flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}
