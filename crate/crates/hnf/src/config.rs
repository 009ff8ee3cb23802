//! Run settings: a flat TOML file whose keys mirror the command-line flags
//! (with `_` for `-`), overridden by any flag given explicitly.
//!
//! ```toml
//! data = "csv:letter.csv"
//! n1 = 250
//! depth = 3
//! weights = "random"        # random | dct | gaussian
//! eps_schedule = "exact"    # exact | doubling
//! admm_penalty = "auto"     # auto | fixed | <positive number>
//! ```

use std::path::{Path, PathBuf};

use hnf_core::data::{make_synthetic_blobs, Dataset};
use hnf_core::matrixgen::WeightKind;
use hnf_core::solvers::{Activation, AdmmConfig, Penalty};
use hnf_core::trainer::{EpsSchedule, TrainConfig, WidthRule, DEFAULT_MEMORY_BUDGET};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loaders::{load_csv, load_idx, load_idx_split, resplit, CsvOptions, LabelColumn};

pub const MEM_BUDGET_ENV: &str = "HNF_MEM_BUDGET";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WeightsArg {
    Random,
    Dct,
    Gaussian,
}

impl From<WeightsArg> for WeightKind {
    fn from(w: WeightsArg) -> Self {
        match w {
            WeightsArg::Random => WeightKind::RandomOrthonormal,
            WeightsArg::Dct => WeightKind::DctOrthonormal,
            WeightsArg::Gaussian => WeightKind::RawGaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ActivationArg {
    Relu,
    Sigmoid,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Sigmoid => Activation::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleArg {
    Exact,
    Doubling,
}

impl From<ScheduleArg> for EpsSchedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Exact => EpsSchedule::Exact,
            ScheduleArg::Doubling => EpsSchedule::Doubling,
        }
    }
}

/// Fully resolved settings; echoed verbatim into `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// `csv:PATH`, `idx:IMAGES,LABELS[,TEST_IMAGES,TEST_LABELS]` or
    /// `blobs[:P,Q,N,SEPARATION]`.
    pub data: Option<String>,
    pub label_col: Option<String>,
    pub delimiter: String,
    pub header: Option<bool>,
    pub train_count: Option<usize>,
    pub split_seed: Option<u64>,
    pub n1: usize,
    pub depth: usize,
    pub weights: WeightsArg,
    pub seed: u64,
    pub elm: bool,
    pub elm_activation: ActivationArg,
    pub admm_iters: usize,
    pub admm_penalty: String,
    pub admm_adaptive: Option<bool>,
    pub admm_tolerance: f64,
    pub admm_warm_start: bool,
    pub eps_schedule: ScheduleArg,
    pub widths: Option<Vec<usize>>,
    pub standardize: bool,
    pub memory_budget: Option<u64>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            data: None,
            label_col: None,
            delimiter: ",".into(),
            header: None,
            train_count: None,
            split_seed: None,
            n1: 250,
            depth: 3,
            weights: WeightsArg::Random,
            seed: 1,
            elm: false,
            elm_activation: ActivationArg::Relu,
            admm_iters: 100,
            admm_penalty: "auto".into(),
            admm_adaptive: None,
            admm_tolerance: 0.0,
            admm_warm_start: false,
            eps_schedule: ScheduleArg::Exact,
            widths: None,
            standardize: false,
            memory_budget: None,
        }
    }
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn penalty(&self) -> Result<Penalty> {
        match self.admm_penalty.as_str() {
            "auto" => Ok(Penalty::Auto),
            "fixed" => Ok(Penalty::per_kind_default(self.weights.into())),
            s => match s.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(Penalty::Fixed(v)),
                _ => Err(Error::Config(format!(
                    "admm penalty must be auto, fixed or a positive number, got {s:?}"
                ))),
            },
        }
    }

    /// Explicit setting, then `HNF_MEM_BUDGET`, then 4 GiB.
    pub fn resolved_memory_budget(&self) -> Result<u64> {
        if let Some(b) = self.memory_budget {
            return Ok(b);
        }
        match std::env::var(MEM_BUDGET_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{MEM_BUDGET_ENV} must be a byte count, got {v:?}"))),
            Err(_) => Ok(DEFAULT_MEMORY_BUDGET),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let penalty = self.penalty()?;
        let admm = AdmmConfig {
            iterations: self.admm_iters,
            penalty,
            adaptive: self.admm_adaptive.unwrap_or(penalty == Penalty::Auto),
            tolerance: self.admm_tolerance,
            warm_start: self.admm_warm_start,
        };
        Ok(TrainConfig {
            n1: self.n1,
            depth: self.depth,
            weight_kind: self.weights.into(),
            seed: self.seed,
            elm_front: self.elm,
            elm_activation: self.elm_activation.into(),
            admm,
            eps_schedule: self.eps_schedule.into(),
            width_rule: match &self.widths {
                Some(w) => WidthRule::Explicit(w.clone()),
                None => WidthRule::MatchInput,
            },
            memory_budget: self.resolved_memory_budget()?,
            standardize: self.standardize,
        })
    }

    pub fn csv_options(&self) -> Result<CsvOptions> {
        let delim = match self.delimiter.as_str() {
            "\\t" | "tab" => b'\t',
            s if s.len() == 1 => s.as_bytes()[0],
            s => return Err(Error::Config(format!("delimiter must be one byte, got {s:?}"))),
        };
        Ok(CsvOptions {
            label_column: self.label_col.as_deref().map(LabelColumn::parse).unwrap_or_default(),
            delimiter: delim,
            header: self.header,
        })
    }

    pub fn data_source(&self) -> Result<DataSource> {
        match &self.data {
            None => Err(Error::format("<data>", "no data source given (use --data)")),
            Some(s) => DataSource::parse(s),
        }
    }

    /// Loads and splits the configured dataset.
    pub fn load_data(&self) -> Result<Dataset> {
        let split_seed = self.split_seed.unwrap_or(self.seed);
        match self.data_source()? {
            DataSource::Csv(path) => resplit(load_csv(&path, &self.csv_options()?)?, self.train_count, split_seed),
            DataSource::Idx { images, labels, test: None } => {
                resplit(load_idx(&images, &labels)?, self.train_count, split_seed)
            }
            DataSource::Idx {
                images,
                labels,
                test: Some((ti, tl)),
            } => load_idx_split((&images, &labels), (&ti, &tl)),
            DataSource::Blobs { p, q, n, separation } => {
                let d = make_synthetic_blobs(p, q, n, separation, self.seed)?;
                match self.train_count {
                    Some(k) => Ok(d.with_random_split(k, split_seed)?),
                    None => Ok(d),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Idx {
        images: PathBuf,
        labels: PathBuf,
        test: Option<(PathBuf, PathBuf)>,
    },
    Blobs {
        p: usize,
        q: usize,
        n: usize,
        separation: f64,
    },
}

impl DataSource {
    pub const BLOBS_DEFAULT: (usize, usize, usize, f64) = (8, 3, 600, 4.0);

    pub fn parse(s: &str) -> Result<Self> {
        let (scheme, rest) = s.split_once(':').unwrap_or((s, ""));
        match scheme {
            "csv" if !rest.is_empty() => Ok(DataSource::Csv(rest.into())),
            "csv" => Err(Error::format("<data>", "csv source needs a path")),
            "idx" => {
                let parts: Vec<&str> = rest.split(',').collect();
                match parts.as_slice() {
                    [i, l] => Ok(DataSource::Idx {
                        images: i.into(),
                        labels: l.into(),
                        test: None,
                    }),
                    [i, l, ti, tl] => Ok(DataSource::Idx {
                        images: i.into(),
                        labels: l.into(),
                        test: Some((ti.into(), tl.into())),
                    }),
                    _ => Err(Error::Config(format!("idx source needs 2 or 4 comma-separated paths, got {rest:?}"))),
                }
            }
            "blobs" if rest.is_empty() => {
                let (p, q, n, separation) = Self::BLOBS_DEFAULT;
                Ok(DataSource::Blobs { p, q, n, separation })
            }
            "blobs" => {
                let parts: Vec<&str> = rest.split(',').collect();
                let bad = || Error::Config(format!("blobs source is blobs:P,Q,N,SEPARATION, got {s:?}"));
                if parts.len() != 4 {
                    return Err(bad());
                }
                Ok(DataSource::Blobs {
                    p: parts[0].trim().parse().map_err(|_| bad())?,
                    q: parts[1].trim().parse().map_err(|_| bad())?,
                    n: parts[2].trim().parse().map_err(|_| bad())?,
                    separation: parts[3].trim().parse().map_err(|_| bad())?,
                })
            }
            _ => Err(Error::Config(format!("unknown data source {s:?}; use csv:, idx: or blobs"))),
        }
    }
}
