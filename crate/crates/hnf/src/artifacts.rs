//! On-disk layout of a trained run.
//!
//! ```text
//! DIR/network.json      network manifest (schema below)
//! DIR/front.hnfw        ELM first-layer weight, ELM mode only
//! DIR/layer{l}.hnfw     weight of HNF layer l (1-based within the chain)
//! DIR/map{k}.hnfm       read-out k (0 = baseline)
//! DIR/report.jsonl      one TrainReport record per line
//! DIR/report.csv        same records as CSV
//! DIR/run.json          RunManifest
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use hnf_core::data::Standardizer;
use hnf_core::layers::HnfNetwork;
use hnf_core::matrixgen::WeightKind;
use hnf_core::solvers::{Activation, AdmmConfig, AdmmStats, OutputMap, Penalty};
use hnf_core::trainer::{Certificate, Front, LayerRecord, TrainReport, TrainedModel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{read_map, read_weight, write_map, write_weight};

pub const NETWORK_FILE: &str = "network.json";
pub const REPORT_JSONL: &str = "report.jsonl";
pub const REPORT_CSV: &str = "report.csv";
pub const RUN_FILE: &str = "run.json";
pub const FORMAT_VERSION: u32 = 1;

pub fn kind_name(kind: WeightKind) -> &'static str {
    kind.name()
}

pub fn kind_from_name(s: &str) -> Option<WeightKind> {
    [WeightKind::RandomOrthonormal, WeightKind::DctOrthonormal, WeightKind::RawGaussian]
        .into_iter()
        .find(|k| k.name() == s)
}

pub fn activation_from_name(s: &str) -> Option<Activation> {
    match s {
        "relu" => Some(Activation::Relu),
        "sigmoid" => Some(Activation::Sigmoid),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub file: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrontEntry {
    Raw,
    Elm { weight: WeightEntry, activation: String },
}

/// Echo of the solver settings that produced a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverEcho {
    LeastSquares {
        ridge: f64,
    },
    Admm {
        iterations: usize,
        /// `null` for the automatic penalty.
        penalty: Option<f64>,
        adaptive: bool,
        tolerance: f64,
        warm_start: bool,
    },
}

impl SolverEcho {
    pub fn admm(cfg: &AdmmConfig) -> Self {
        SolverEcho::Admm {
            iterations: cfg.iterations,
            penalty: match cfg.penalty {
                Penalty::Auto => None,
                Penalty::Fixed(p) => Some(p),
            },
            adaptive: cfg.adaptive,
            tolerance: cfg.tolerance,
            warm_start: cfg.warm_start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmStatsEntry {
    pub iterations: usize,
    pub best_iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub final_penalty: f64,
}

impl From<AdmmStats> for AdmmStatsEntry {
    fn from(s: AdmmStats) -> Self {
        Self {
            iterations: s.iterations,
            best_iteration: s.best_iteration,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            final_penalty: s.final_penalty,
        }
    }
}

impl From<AdmmStatsEntry> for AdmmStats {
    fn from(s: AdmmStatsEntry) -> Self {
        Self {
            iterations: s.iterations,
            best_iteration: s.best_iteration,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            final_penalty: s.final_penalty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub file: String,
    pub rows: usize,
    pub cols: usize,
    /// `null` when unconstrained.
    pub epsilon: Option<f64>,
    pub train_cost: f64,
    pub layer_index: usize,
    pub solver: SolverEcho,
    pub admm: Option<AdmmStatsEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerEntry {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkManifest {
    pub format: u32,
    /// Raw input dimension `P`.
    pub data_dim: usize,
    /// Input dimension of the HNF chain (`P`, or `n1` behind an ELM front).
    pub chain_input_dim: usize,
    pub front: FrontEntry,
    pub layers: Vec<WeightEntry>,
    pub maps: Vec<MapEntry>,
    pub standardizer: Option<StandardizerEntry>,
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes weights, maps and `network.json` into `dir`.
pub fn save_model(dir: &Path, model: &TrainedModel, admm: &AdmmConfig) -> Result<NetworkManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let weight_entry = |file: String, w: &hnf_core::matrixgen::WeightMatrix| -> Result<WeightEntry> {
        write_weight(&dir.join(&file), w)?;
        Ok(WeightEntry {
            file,
            rows: w.rows(),
            cols: w.cols(),
            kind: kind_name(w.kind()).into(),
            seed: w.seed(),
        })
    };
    let (front, data_dim) = match &model.front {
        Front::Raw => (FrontEntry::Raw, model.network.input_dim()),
        Front::Elm { weight, activation } => (
            FrontEntry::Elm {
                weight: weight_entry("front.hnfw".into(), weight)?,
                activation: activation.name().into(),
            },
            weight.cols(),
        ),
    };
    let mut layers = Vec::new();
    for (i, layer) in model.network.layers().iter().enumerate() {
        layers.push(weight_entry(format!("layer{}.hnfw", i + 1), layer.weight())?);
    }
    let mut maps = Vec::new();
    for (k, m) in model.maps.iter().enumerate() {
        let file = format!("map{k}.hnfm");
        write_map(&dir.join(&file), &m.matrix)?;
        maps.push(MapEntry {
            file,
            rows: m.matrix.rows(),
            cols: m.matrix.cols(),
            epsilon: finite_or_none(m.epsilon),
            train_cost: m.train_cost,
            layer_index: m.layer_index,
            solver: if k == 0 {
                SolverEcho::LeastSquares { ridge: 0.0 }
            } else {
                SolverEcho::admm(admm)
            },
            admm: m.admm.map(Into::into),
        });
    }
    let manifest = NetworkManifest {
        format: FORMAT_VERSION,
        data_dim,
        chain_input_dim: model.network.input_dim(),
        front,
        layers,
        maps,
        standardizer: model.standardizer.as_ref().map(|s| StandardizerEntry {
            mean: s.mean.clone(),
            scale: s.scale.clone(),
        }),
    };
    write_json(&dir.join(NETWORK_FILE), &manifest)?;
    Ok(manifest)
}

/// Rebuilds a model from `dir/network.json`.
pub fn load_model(dir: &Path) -> Result<TrainedModel> {
    let path = dir.join(NETWORK_FILE);
    let manifest: NetworkManifest = read_json(&path)?;
    if manifest.format != FORMAT_VERSION {
        return Err(Error::format(&path, format!("unsupported format version {}", manifest.format)));
    }
    let load_weight = |e: &WeightEntry| -> Result<hnf_core::matrixgen::WeightMatrix> {
        let wpath = dir.join(&e.file);
        let w = read_weight(&wpath)?;
        if (w.rows(), w.cols()) != (e.rows, e.cols) || kind_name(w.kind()) != e.kind {
            return Err(Error::format(&wpath, "weight file disagrees with the manifest"));
        }
        Ok(w)
    };
    let front = match &manifest.front {
        FrontEntry::Raw => Front::Raw,
        FrontEntry::Elm { weight, activation } => Front::Elm {
            weight: load_weight(weight)?,
            activation: activation_from_name(activation)
                .ok_or_else(|| Error::format(&path, format!("unknown activation {activation:?}")))?,
        },
    };
    let weights = manifest.layers.iter().map(load_weight).collect::<Result<Vec<_>>>()?;
    let network = HnfNetwork::from_weights(manifest.chain_input_dim, weights)
        .map_err(|e| Error::format(&path, e.to_string()))?;
    let mut maps = Vec::new();
    for e in &manifest.maps {
        let mpath = dir.join(&e.file);
        let matrix = read_map(&mpath)?;
        if matrix.shape() != (e.rows, e.cols) {
            return Err(Error::format(&mpath, "map block disagrees with the manifest"));
        }
        maps.push(OutputMap {
            matrix,
            epsilon: e.epsilon.unwrap_or(f64::INFINITY),
            train_cost: e.train_cost,
            layer_index: e.layer_index,
            admm: e.admm.map(Into::into),
        });
    }
    if maps.len() != network.depth() + 1 {
        return Err(Error::format(
            &path,
            format!("{} maps for {} layers", maps.len(), network.depth()),
        ));
    }
    Ok(TrainedModel {
        front,
        network,
        maps,
        standardizer: manifest.standardizer.map(|s| Standardizer {
            mean: s.mean,
            scale: s.scale,
        }),
    })
}

/// One line of `report.jsonl` / one row of `report.csv`. Non-finite values
/// (the baseline budget, accuracy without a test split) are `null`/empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub layer: usize,
    pub kind: String,
    pub nodes_cumulative: usize,
    pub epsilon: Option<f64>,
    pub train_cost: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub admm_iters: usize,
    pub wall_ms: u64,
    pub certified: Option<bool>,
    pub witness_cost: Option<f64>,
    pub witness_norm_sq: Option<f64>,
    pub witness_prediction_gap: Option<f64>,
}

impl ReportRow {
    pub fn from_record(r: &LayerRecord, baseline: bool) -> Self {
        let c: Option<&Certificate> = r.certificate.as_ref();
        Self {
            layer: r.layer,
            kind: if baseline { "baseline" } else { "hnf" }.into(),
            nodes_cumulative: r.nodes_cumulative,
            epsilon: finite_or_none(r.epsilon),
            train_cost: r.train_cost,
            train_acc: r.train_acc,
            test_acc: finite_or_none(r.test_acc),
            admm_iters: r.admm_iters,
            wall_ms: r.wall_ms,
            certified: c.map(Certificate::ok),
            witness_cost: c.map(|c| c.witness_cost),
            witness_norm_sq: c.map(|c| c.witness_norm_sq),
            witness_prediction_gap: c.map(|c| c.witness_prediction_gap),
        }
    }
}

pub fn report_rows(report: &TrainReport) -> Vec<ReportRow> {
    std::iter::once(ReportRow::from_record(&report.baseline, true))
        .chain(report.per_layer.iter().map(|r| ReportRow::from_record(r, false)))
        .collect()
}

pub fn write_report_jsonl(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r).expect("report row serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report_jsonl(path: &Path) -> Result<Vec<ReportRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            column: None,
            message: e.to_string(),
        })?);
    }
    if rows.is_empty() {
        return Err(Error::format(path, "report is empty"));
    }
    Ok(rows)
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Curve point for plotting accuracy against network size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub layer: usize,
    pub nodes_cumulative: usize,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub train_cost: f64,
}

impl From<&ReportRow> for CurveRow {
    fn from(r: &ReportRow) -> Self {
        Self {
            layer: r.layer,
            nodes_cumulative: r.nodes_cumulative,
            train_acc: r.train_acc,
            test_acc: r.test_acc,
            train_cost: r.train_cost,
        }
    }
}

pub fn write_curves<W: std::io::Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CurveRow::from(r))
            .map_err(|e| Error::format("curves", e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("curves", e))
}

/// Everything needed to rerun a training job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub library_version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub settings: crate::config::Settings,
    pub data: DataEcho,
    pub artifacts: ArtifactPaths,
    pub seeds: SeedEcho,
    pub monotonicity_certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataEcho {
    pub name: String,
    pub p: usize,
    pub q: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub label_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactPaths {
    pub network: PathBuf,
    pub weights: Vec<PathBuf>,
    pub maps: Vec<PathBuf>,
    pub report_jsonl: PathBuf,
    pub report_csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEcho {
    pub weights: u64,
    pub split: Option<u64>,
    pub per_layer: Vec<Option<u64>>,
}

pub fn write_run_manifest(dir: &Path, run: &RunManifest) -> Result<()> {
    write_json(&dir.join(RUN_FILE), run)
}

pub fn read_run_manifest(dir: &Path) -> Result<RunManifest> {
    read_json(&dir.join(RUN_FILE))
}
