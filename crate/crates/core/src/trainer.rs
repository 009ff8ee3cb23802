//! Layer-wise training: fixed weights, one constrained least-squares read-out
//! per layer, and a constructive certificate that the training cost never
//! goes up.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::data::{Dataset, Split, Standardizer};
use crate::error::{Error, Result};
use crate::layers::{
    expansion_distance_identity, pair_distance_report, weight_perturbation_check, HnfLayer, HnfNetwork,
};
use crate::linalg::{dist_sq, gemm, norm_sq, Matrix};
use crate::matrixgen::{derive_seed, make_raw_gaussian, make_weight, WeightKind, WeightMatrix};
use crate::solvers::{
    admm_constrained_ls_from, cost, elm_features, embed_previous_map, least_squares, Activation, AdmmConfig,
    OutputMap, EPSILON_FLOOR,
};

/// Default cap on the bytes held for one layer's features.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

/// Absolute-plus-relative slack used by every cost comparison.
pub const COST_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpsSchedule {
    /// `ε_l = ‖O_{l−1}·W†·U‖_F²`.
    Exact,
    /// `ε_l = 2·ε_{l−1}` after the first constrained layer.
    Doubling,
}

/// Pre-expansion width `n^(l)` for layers after the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WidthRule {
    /// `n^(l) = m^(l)`, the input dimension of the layer.
    MatchInput,
    /// Explicit widths for layers 2, 3, … in order.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n1: usize,
    /// Total depth. With an ELM front the ELM layer counts as layer 1.
    pub depth: usize,
    pub weight_kind: WeightKind,
    pub seed: u64,
    pub elm_front: bool,
    pub elm_activation: Activation,
    pub admm: AdmmConfig,
    pub eps_schedule: EpsSchedule,
    pub width_rule: WidthRule,
    pub memory_budget: u64,
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n1: 250,
            depth: 3,
            weight_kind: WeightKind::RandomOrthonormal,
            seed: 1,
            elm_front: false,
            elm_activation: Activation::Relu,
            admm: AdmmConfig::default(),
            eps_schedule: EpsSchedule::Exact,
            width_rule: WidthRule::MatchInput,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            standardize: false,
        }
    }
}

impl TrainConfig {
    /// Checks the config against input dimension `p`.
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.n1 == 0 {
            return Err(Error::Config("n1 must be at least 1".into()));
        }
        if !self.elm_front && self.weight_kind.is_orthonormal() && self.n1 < p {
            return Err(Error::Config(format!(
                "n1 = {} is below the input dimension {}; orthonormal first-layer weights need n1 >= P",
                self.n1, p
            )));
        }
        if self.eps_schedule == EpsSchedule::Doubling && !self.weight_kind.is_orthonormal() {
            return Err(Error::Config(
                "the doubling schedule only bounds the witness for orthonormal weights".into(),
            ));
        }
        if let WidthRule::Explicit(w) = &self.width_rule {
            let need = self.depth.saturating_sub(1);
            if w.len() < need {
                return Err(Error::Config(format!("{} explicit widths given, {} needed", w.len(), need)));
            }
            if w.iter().any(|&n| n == 0) {
                return Err(Error::Config("explicit widths must be positive".into()));
            }
        }
        self.admm.validate().map_err(|e| Error::Config(e.to_string()))
    }

    fn width(&self, layer: usize, m: usize) -> usize {
        match &self.width_rule {
            WidthRule::MatchInput => m,
            WidthRule::Explicit(w) => w[layer - 2],
        }
    }
}

/// What feeds the HNF chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Front {
    /// Raw inputs; the baseline is least squares on `x`.
    Raw,
    /// `activation(W₁·x)`; the baseline is the ELM read-out.
    Elm { weight: WeightMatrix, activation: Activation },
}

/// Evidence that a layer's cost does not exceed the previous one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub witness_norm_sq: f64,
    pub witness_cost: f64,
    /// Largest deviation between witness and previous predictions.
    pub witness_prediction_gap: f64,
    pub epsilon_exact: f64,
    pub witness_feasible: bool,
    pub witness_reproduces: bool,
    pub dominates_witness: bool,
    pub monotone: bool,
}

impl Certificate {
    pub fn ok(&self) -> bool {
        self.witness_feasible && self.witness_reproduces && self.dominates_witness && self.monotone
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub layer: usize,
    pub nodes_cumulative: usize,
    /// `f64::INFINITY` for the unconstrained baseline.
    pub epsilon: f64,
    pub train_cost: f64,
    pub train_acc: f64,
    /// NaN when the dataset has no test split.
    pub test_acc: f64,
    pub admm_iters: usize,
    pub wall_ms: u64,
    pub certificate: Option<Certificate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub baseline: LayerRecord,
    pub per_layer: Vec<LayerRecord>,
    pub monotonicity_certified: bool,
    pub standardized: bool,
}

impl TrainReport {
    /// Baseline followed by every layer.
    pub fn records(&self) -> impl Iterator<Item = &LayerRecord> {
        core::iter::once(&self.baseline).chain(&self.per_layer)
    }

    pub fn train_costs(&self) -> Vec<f64> {
        self.records().map(|r| r.train_cost).collect()
    }

    /// True when no cost exceeds its predecessor by more than the slack.
    pub fn costs_non_increasing(&self) -> bool {
        self.train_costs()
            .windows(2)
            .all(|w| w[1] <= w[0] + COST_SLACK * (1.0 + w[0]))
    }
}

/// Everything needed to reproduce predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub front: Front,
    pub network: HnfNetwork,
    /// `maps[0]` is the baseline, `maps[k]` reads out HNF layer `k`.
    pub maps: Vec<OutputMap>,
    pub standardizer: Option<Standardizer>,
}

impl TrainedModel {
    /// Report numbering of the last layer.
    pub fn depth(&self) -> usize {
        self.network.depth() + usize::from(matches!(self.front, Front::Elm { .. }))
    }

    fn map_for(&self, layer: usize) -> Result<(&OutputMap, usize)> {
        let elm = matches!(self.front, Front::Elm { .. });
        let (idx, hnf) = match (elm, layer) {
            (_, 0) => (0, 0),
            (true, 1) => (0, 0),
            (true, l) => (l - 1, l - 1),
            (false, l) => (l, l),
        };
        self.maps
            .get(idx)
            .filter(|_| hnf <= self.network.depth())
            .map(|m| (m, hnf))
            .ok_or_else(|| Error::State(format!("no trained map for layer {layer}")))
    }

    /// Inputs of the HNF chain for the given samples.
    pub fn chain_inputs(&self, data: &Dataset, split: Split) -> Result<Matrix> {
        let x = match &self.standardizer {
            Some(s) => s.apply(data)?.split_x(split),
            None => data.split_x(split),
        };
        match &self.front {
            Front::Raw => Ok(x),
            Front::Elm { weight, activation } => elm_features(weight, &x, *activation),
        }
    }

    /// Predictions `O_layer·ȳ^(layer)` for a split.
    pub fn predict(&self, data: &Dataset, split: Split, layer: usize) -> Result<Matrix> {
        let (map, hnf) = self.map_for(layer)?;
        let inputs = self.chain_inputs(data, split)?;
        let feats = self.network.forward_batch_to(&inputs, hnf)?;
        map.predict(&feats)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    pub accuracy: f64,
}

/// Fraction of columns whose argmax (lowest index on ties) matches `labels`.
pub fn accuracy(pred: &Matrix, labels: &[usize]) -> f64 {
    let (q, n) = pred.shape();
    if n == 0 {
        return f64::NAN;
    }
    let mut best = alloc::vec![0usize; n];
    let mut val: Vec<f64> = pred.row(0).to_vec();
    for i in 1..q {
        for (j, &v) in pred.row(i).iter().enumerate() {
            if v > val[j] {
                val[j] = v;
                best[j] = i;
            }
        }
    }
    let hits = best.iter().zip(labels).filter(|(a, b)| a == b).count();
    hits as f64 / n as f64
}

fn cost_of_predictions(pred: &Matrix, t: &Matrix) -> f64 {
    t.sub(pred).frobenius_norm_sq() / t.cols() as f64
}

/// Cost and accuracy of layer `layer` (0 = baseline) on a split.
pub fn evaluate(model: &TrainedModel, data: &Dataset, layer: usize, split: Split) -> Result<Evaluation> {
    if data.indices(split).is_empty() {
        return Err(Error::Data("the requested split is empty".into()));
    }
    let pred = model.predict(data, split, layer)?;
    if pred.rows() != data.q() {
        return Err(Error::Data(format!("model predicts {} classes, data has {}", pred.rows(), data.q())));
    }
    Ok(Evaluation {
        cost: cost_of_predictions(&pred, &data.split_t(split)),
        accuracy: accuracy(&pred, &data.split_labels(split)),
    })
}

fn check_budget(layer: usize, dim: usize, prev_dim: usize, samples: usize, budget: u64) -> Result<()> {
    let d = dim as u128;
    let bytes = 8 * (d * samples as u128 + prev_dim as u128 * samples as u128 + 3 * d * d);
    let required = u64::try_from(bytes).unwrap_or(u64::MAX);
    if required > budget {
        return Err(Error::Resource {
            layer,
            required,
            budget,
        });
    }
    Ok(())
}

/// [`train_with_clock`] without timing; every `wall_ms` is 0.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<(TrainedModel, TrainReport)> {
    train_with_clock(data, cfg, &mut || 0)
}

/// Trains the baseline and every HNF layer. `clock` returns milliseconds
/// from any fixed origin.
pub fn train_with_clock(
    data: &Dataset,
    cfg: &TrainConfig,
    clock: &mut dyn FnMut() -> u64,
) -> Result<(TrainedModel, TrainReport)> {
    cfg.validate(data.p())?;
    if data.train_indices().is_empty() {
        return Err(Error::Data("no training samples".into()));
    }
    let standardizer = if cfg.standardize {
        Some(Standardizer::fit(data)?)
    } else {
        None
    };
    let owned;
    let data = match &standardizer {
        Some(s) => {
            owned = s.apply(data)?;
            &owned
        }
        None => data,
    };
    let has_test = !data.test_indices().is_empty();
    let t_tr = data.train_t();
    let lab_tr = data.split_labels(Split::Train);
    let lab_te = data.split_labels(Split::Test);
    let n_all = data.n();
    let test_acc = |pred: &Matrix| if has_test { accuracy(pred, &lab_te) } else { f64::NAN };

    let start = clock();
    let (front, mut feat_tr, mut feat_te, base_layer, mut nodes) = if cfg.elm_front {
        check_budget(1, cfg.n1, data.p(), n_all, cfg.memory_budget)?;
        let w1 = front_weight(cfg, data.p())?;
        let f_tr = elm_features(&w1, &data.train_x(), cfg.elm_activation)?;
        let f_te = elm_features(&w1, &data.test_x(), cfg.elm_activation)?;
        let front = Front::Elm {
            weight: w1,
            activation: cfg.elm_activation,
        };
        (front, f_tr, f_te, 1, cfg.n1)
    } else {
        (Front::Raw, data.train_x(), data.test_x(), 0, 0)
    };
    let baseline_map = least_squares(&feat_tr, &t_tr, 0.0)
        .map_err(|e| solver_error(base_layer, e))?
        .with_layer(base_layer);
    let mut pred_tr = baseline_map.predict(&feat_tr)?;
    let pred_te = baseline_map.predict(&feat_te)?;
    let baseline = LayerRecord {
        layer: base_layer,
        nodes_cumulative: nodes,
        epsilon: f64::INFINITY,
        train_cost: baseline_map.train_cost,
        train_acc: accuracy(&pred_tr, &lab_tr),
        test_acc: test_acc(&pred_te),
        admm_iters: 0,
        wall_ms: clock().saturating_sub(start),
        certificate: None,
    };

    let mut network = HnfNetwork::new(feat_tr.rows(), Vec::new())?;
    let mut maps = alloc::vec![baseline_map];
    let mut per_layer = Vec::new();
    let mut certified = true;
    let mut prev_eps = f64::NAN;
    for layer in base_layer + 1..=cfg.depth {
        let start = clock();
        let m = feat_tr.rows();
        let n = layer_width(cfg, layer, m);
        check_budget(layer, 2 * n, m, n_all, cfg.memory_budget)?;
        let w = layer_weight(cfg, layer, m)?;
        let prev = maps.last().expect("baseline map present");
        let witness = embed_previous_map(&prev.matrix, &w).map_err(|e| solver_error(layer, e))?;
        let witness_norm_sq = witness.frobenius_norm_sq();
        let eps_exact = witness_norm_sq.max(EPSILON_FLOOR);
        let eps = match cfg.eps_schedule {
            EpsSchedule::Doubling if network.depth() > 0 => 2.0 * prev_eps,
            _ => eps_exact,
        };
        let hnf = HnfLayer::new(w);
        let y_tr = hnf.forward_batch(&feat_tr)?;
        let map = admm_constrained_ls_from(&y_tr, &t_tr, eps, &cfg.admm, Some(&witness))
            .map_err(|e| solver_error(layer, e))?
            .with_layer(layer);

        let witness_pred = gemm(1.0, &witness, false, &y_tr, false);
        let gap = witness_pred.max_abs_diff(&pred_tr);
        let witness_cost = cost_of_predictions(&witness_pred, &t_tr);
        drop(witness_pred);
        let prev_cost = prev.train_cost;
        let cert = Certificate {
            witness_norm_sq,
            witness_cost,
            witness_prediction_gap: gap,
            epsilon_exact: eps_exact,
            witness_feasible: witness_norm_sq <= eps * (1.0 + 1e-9),
            witness_reproduces: gap <= 1e-9 * (1.0 + pred_tr.max_abs()),
            dominates_witness: map.train_cost <= witness_cost + COST_SLACK,
            monotone: map.train_cost <= prev_cost + COST_SLACK * (1.0 + prev_cost),
        };
        certified &= cert.ok();

        let y_te = hnf.forward_batch(&feat_te)?;
        pred_tr = map.predict(&y_tr)?;
        let pred_te = map.predict(&y_te)?;
        nodes += 2 * n;
        per_layer.push(LayerRecord {
            layer,
            nodes_cumulative: nodes,
            epsilon: eps,
            train_cost: map.train_cost,
            train_acc: accuracy(&pred_tr, &lab_tr),
            test_acc: test_acc(&pred_te),
            admm_iters: map.admm.map_or(0, |s| s.iterations),
            wall_ms: clock().saturating_sub(start),
            certificate: Some(cert),
        });
        network.push(hnf)?;
        maps.push(map);
        prev_eps = eps;
        feat_tr = y_tr;
        feat_te = y_te;
    }

    let model = TrainedModel {
        front,
        network,
        maps,
        standardizer,
    };
    let report = TrainReport {
        baseline,
        per_layer,
        monotonicity_certified: certified,
        standardized: cfg.standardize,
    };
    Ok((model, report))
}

/// Pre-expansion width of HNF layer `layer` (report numbering) fed by `m`
/// inputs.
pub fn layer_width(cfg: &TrainConfig, layer: usize, m: usize) -> usize {
    let first = if cfg.elm_front { 2 } else { 1 };
    if layer == first {
        cfg.n1
    } else {
        cfg.width(layer, m)
    }
}

/// The fixed weight of HNF layer `layer` (report numbering).
pub fn layer_weight(cfg: &TrainConfig, layer: usize, m: usize) -> Result<WeightMatrix> {
    make_weight(cfg.weight_kind, layer_width(cfg, layer, m), m, derive_seed(cfg.seed, layer as u64))
}

/// The ELM first-layer weight.
pub fn front_weight(cfg: &TrainConfig, p: usize) -> Result<WeightMatrix> {
    make_raw_gaussian(cfg.n1, p, derive_seed(cfg.seed, 1))
}

/// The untrained front and chain that [`train`] would build for inputs of
/// dimension `p`.
pub fn build_untrained(cfg: &TrainConfig, p: usize) -> Result<(Front, HnfNetwork)> {
    cfg.validate(p)?;
    let (front, mut m, first) = if cfg.elm_front {
        let w = front_weight(cfg, p)?;
        let front = Front::Elm {
            weight: w,
            activation: cfg.elm_activation,
        };
        (front, cfg.n1, 2)
    } else {
        (Front::Raw, p, 1)
    };
    let mut net = HnfNetwork::new(m, Vec::new())?;
    for layer in first..=cfg.depth {
        let w = layer_weight(cfg, layer, m)?;
        m = 2 * w.rows();
        net.push(HnfLayer::new(w))?;
    }
    Ok((front, net))
}

fn solver_error(layer: usize, e: Error) -> Error {
    match e {
        Error::Resource { .. } | Error::Solver { .. } | Error::Data(_) | Error::Config(_) => e,
        other => Error::Solver {
            layer,
            message: other.to_string(),
        },
    }
}

/// Outcome of one family of checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Smallest margin seen; negative means a violation.
    pub worst_margin: f64,
    /// False when the check does not apply to this network.
    pub applicable: bool,
    pub note: Option<String>,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            trials: 0,
            failures: 0,
            worst_margin: f64::INFINITY,
            applicable: true,
            note: None,
        }
    }

    fn record(&mut self, margin: f64) {
        self.trials += 1;
        if !(margin >= 0.0) {
            self.failures += 1;
        }
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
    }

    fn skip(mut self, why: &str) -> Self {
        self.applicable = false;
        self.note = Some(why.into());
        self
    }

    pub fn passed(&self) -> bool {
        !self.applicable || self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub checks: Vec<CheckResult>,
}

impl InvariantReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_LOWER: &str = "distance-lower-bound";
pub const CHECK_UPPER: &str = "distance-upper-bound";
pub const CHECK_IDENTITY: &str = "expansion-distance-identity";
pub const CHECK_NORM: &str = "norm-preservation";
pub const CHECK_INVERSION: &str = "inversion-round-trip";
pub const CHECK_PERTURBATION: &str = "weight-perturbation-bound";

/// Runs every geometric check on `trials` samples drawn from the columns of
/// `inputs` (the network's own input space). Never fails on a violated
/// invariant; those are counted in the report.
pub fn verify_invariants(net: &HnfNetwork, inputs: &Matrix, trials: usize, seed: u64) -> Result<InvariantReport> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    if inputs.cols() == 0 {
        return Err(Error::Data("no inputs to sample from".into()));
    }
    if inputs.rows() != net.input_dim() {
        return Err(Error::Dimension(format!(
            "network takes {} inputs, samples have {}",
            net.input_dim(),
            inputs.rows()
        )));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let n = inputs.cols();
    let orthonormal = net.layers().iter().all(|l| l.weight().is_orthonormal());

    let mut lower = CheckResult::new(CHECK_LOWER);
    let mut upper = CheckResult::new(CHECK_UPPER);
    let mut ident = CheckResult::new(CHECK_IDENTITY);
    let mut norm = CheckResult::new(CHECK_NORM);
    let mut inv = CheckResult::new(CHECK_INVERSION);
    let mut pert = CheckResult::new(CHECK_PERTURBATION);

    let inverse = match net.inverse_map() {
        Ok(i) => Some(i),
        Err(e) => {
            inv.note = Some(e.to_string());
            None
        }
    };

    for _ in 0..trials {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n);
        if n > 1 && j == i {
            j = (j + 1) % n;
        }
        let x1 = inputs.column(i);
        let x2 = inputs.column(j);

        if orthonormal {
            let r = pair_distance_report(net, &x1, &x2)?;
            let (lo, hi) = r.sandwich_margins();
            lower.record(lo + 1e-9);
            upper.record(hi + 1e-9);
        }

        // identity at every layer input
        let f1 = net.forward(&x1)?;
        let f2 = net.forward(&x2)?;
        let mut q1: &[f64] = &x1;
        let mut q2: &[f64] = &x2;
        for (k, layer) in net.layers().iter().enumerate() {
            let w = layer.weight().matrix();
            let (lhs, rhs) = expansion_distance_identity(&w.matvec(q1), &w.matvec(q2))?;
            ident.record(1e-12 - (lhs - rhs).abs() / rhs.max(1.0));
            q1 = &f1[k];
            q2 = &f2[k];
        }

        let x2n = norm_sq(&x1);
        if let Some(last) = f1.last() {
            if orthonormal && x2n > 0.0 {
                norm.record(1e-9 - (norm_sq(last) - x2n).abs() / x2n);
            }
            match &inverse {
                Some(map) => {
                    let back = map.apply(last)?;
                    let rel = libm::sqrt(dist_sq(&back, &x1) / x2n.max(f64::MIN_POSITIVE));
                    inv.record(1e-6 - rel);
                }
                None => inv.record(f64::NEG_INFINITY),
            }
        }

        // perturb a random layer at a random scale
        if net.depth() > 0 {
            let k = rng.random_range(0..net.depth());
            let layer = &net.layers()[k];
            let (rows, cols) = layer.weight().matrix().shape();
            let scale = libm::pow(10.0, rng.random_range(-3.0..0.0));
            let dw = Matrix::from_fn(rows, cols, |_, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                scale * g
            });
            let q: &[f64] = if k == 0 { &x1 } else { &f1[k - 1] };
            let c = weight_perturbation_check(layer, &dw, q)?;
            let margin = if c.rhs > 0.0 { (c.rhs - c.lhs) / c.rhs + 1e-9 } else { -c.lhs };
            pert.record(margin);
        }
    }

    if !orthonormal {
        lower = lower.skip("weights are not orthonormal");
        upper = upper.skip("weights are not orthonormal");
        norm = norm.skip("weights are not orthonormal");
    }
    Ok(InvariantReport {
        checks: alloc::vec![lower, upper, ident, norm, inv, pert],
    })
}

/// [`verify_invariants`] on the chain inputs of a trained model.
pub fn verify_model(model: &TrainedModel, data: &Dataset, trials: usize, seed: u64) -> Result<InvariantReport> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let split = if data.train_indices().is_empty() {
        Split::Test
    } else {
        Split::Train
    };
    let inputs = model.chain_inputs(data, split)?;
    verify_invariants(&model.network, &inputs, trials, seed)
}

/// Cost of the stored map of `layer` recomputed on the training split.
pub fn recomputed_train_cost(model: &TrainedModel, data: &Dataset, layer: usize) -> Result<f64> {
    let (map, hnf) = model.map_for(layer)?;
    let inputs = model.chain_inputs(data, Split::Train)?;
    let feats = model.network.forward_batch_to(&inputs, hnf)?;
    cost(&map.matrix, &feats, &data.train_t())
}
