//! Closed-form least squares, the ELM solve, Frobenius-ball constrained least
//! squares by ADMM, and the budget schedule.
//!
//! Costs are sample averages: `cost(O) = (1/N)·‖T − O·Y‖_F²`.

use alloc::vec::Vec;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{dot, gemm, Cholesky, Matrix, SymmetricEigen};
use crate::matrixgen::{WeightKind, WeightMatrix};

/// Lower bound applied to every computed budget.
pub const EPSILON_FLOOR: f64 = 1e-12;

/// Fixed penalty for randomized weights.
pub const FIXED_PENALTY_RANDOM: f64 = 1e-7;
/// Fixed penalty for DCT weights.
pub const FIXED_PENALTY_DCT: f64 = 1e2;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdmmStats {
    pub iterations: usize,
    /// Iteration whose Z-iterate was returned (0 = the starting point).
    pub best_iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub final_penalty: f64,
}

/// A trained linear read-out `O_l` and its budget.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMap {
    pub matrix: Matrix,
    /// Budget on `‖O‖_F²`; `f64::INFINITY` for unconstrained solves.
    pub epsilon: f64,
    pub train_cost: f64,
    pub layer_index: usize,
    pub admm: Option<AdmmStats>,
}

impl OutputMap {
    pub fn with_layer(mut self, layer: usize) -> Self {
        self.layer_index = layer;
        self
    }

    pub fn norm_sq(&self) -> f64 {
        self.matrix.frobenius_norm_sq()
    }

    /// `‖O‖_F² ≤ ε·(1 + rtol)`; always true for unconstrained maps.
    pub fn is_feasible(&self, rtol: f64) -> bool {
        !self.epsilon.is_finite() || self.norm_sq() <= self.epsilon * (1.0 + rtol)
    }

    pub fn predict(&self, y: &Matrix) -> Result<Matrix> {
        if y.rows() != self.matrix.cols() {
            return Err(dim_err!("map takes {} features, got {}", self.matrix.cols(), y.rows()));
        }
        Ok(gemm(1.0, &self.matrix, false, y, false))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// Start at the mean eigenvalue of `(2/N)·Y·Yᵀ`.
    Auto,
    Fixed(f64),
}

impl Penalty {
    /// The fixed penalty for each weight kind.
    pub fn per_kind_default(kind: WeightKind) -> Self {
        match kind {
            WeightKind::DctOrthonormal => Penalty::Fixed(FIXED_PENALTY_DCT),
            _ => Penalty::Fixed(FIXED_PENALTY_RANDOM),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub iterations: usize,
    pub penalty: Penalty,
    /// Residual balancing: rescale the penalty when primal and dual
    /// residuals drift more than 10× apart.
    pub adaptive: bool,
    /// Stop once primal + dual residual falls to this value; 0 runs every
    /// iteration.
    pub tolerance: f64,
    /// Start from the supplied feasible point instead of zero.
    pub warm_start: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            penalty: Penalty::Auto,
            adaptive: true,
            tolerance: 0.0,
            warm_start: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Parameter("ADMM needs at least one iteration".into()));
        }
        if let Penalty::Fixed(p) = self.penalty {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Parameter(alloc::format!("ADMM penalty must be positive, got {p}")));
            }
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Parameter("ADMM tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + libm::exp(-x)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

fn check_pair(y: &Matrix, t: &Matrix) -> Result<()> {
    if y.cols() == 0 || t.cols() == 0 {
        return Err(Error::Data("no samples".into()));
    }
    if y.cols() != t.cols() {
        return Err(dim_err!("{} feature columns but {} target columns", y.cols(), t.cols()));
    }
    if y.rows() == 0 || t.rows() == 0 {
        return Err(dim_err!("features and targets need at least one row"));
    }
    if !y.is_finite() || !t.is_finite() {
        return Err(Error::Data("non-finite value in features or targets".into()));
    }
    Ok(())
}

/// `(1/N)·‖T − O·Y‖_F²`.
pub fn cost(o: &Matrix, y: &Matrix, t: &Matrix) -> Result<f64> {
    if o.cols() != y.rows() || o.rows() != t.rows() || y.cols() != t.cols() {
        return Err(dim_err!(
            "map {}x{}, features {}x{}, targets {}x{} do not chain",
            o.rows(),
            o.cols(),
            y.rows(),
            y.cols(),
            t.rows(),
            t.cols()
        ));
    }
    if y.cols() == 0 {
        return Err(Error::Data("no samples".into()));
    }
    let r = t.sub(&gemm(1.0, o, false, y, false));
    Ok(r.frobenius_norm_sq() / y.cols() as f64)
}

/// `O = T·Yᵀ·(Y·Yᵀ + ridge·I)⁻¹`, falling back to the pseudo-inverse when
/// the regularized Gram matrix is numerically singular.
pub fn least_squares(y: &Matrix, t: &Matrix, ridge: f64) -> Result<OutputMap> {
    check_pair(y, t)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Parameter(alloc::format!("ridge must be nonnegative, got {ridge}")));
    }
    let mut g = y.gram_rows();
    g.add_to_diagonal(ridge);
    let c = t.matmul_nt(y);
    let chol = Cholesky::new(&g).ok().filter(|ch| {
        let r = ch.diagonal_ratio();
        r * r > 1e-12
    });
    let o = match chol {
        Some(ch) => ch.solve_rows(&c),
        None => {
            let eig = SymmetricEigen::new(&g)?;
            let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
            let cutoff = top * g.rows() as f64 * f64::EPSILON;
            c.matmul(&eig.pseudo_inverse(cutoff))
        }
    };
    if !o.is_finite() {
        return Err(Error::Numerical("least-squares solve produced non-finite values".into()));
    }
    let train_cost = cost(&o, y, t)?;
    Ok(OutputMap {
        matrix: o,
        epsilon: f64::INFINITY,
        train_cost,
        layer_index: 0,
        admm: None,
    })
}

/// `activation(W₁·X)`, one column per sample.
pub fn elm_features(w1: &WeightMatrix, x: &Matrix, activation: Activation) -> Result<Matrix> {
    if w1.cols() != x.rows() {
        return Err(dim_err!("first-layer weight takes {} inputs, data has {}", w1.cols(), x.rows()));
    }
    let mut f = gemm(1.0, w1.matrix(), false, x, false);
    for v in f.as_mut_slice() {
        *v = activation.apply(*v);
    }
    Ok(f)
}

/// Extreme learning machine: random features then an unregularized
/// least-squares read-out.
pub fn elm_solve(
    w1: &WeightMatrix,
    x: &Matrix,
    t: &Matrix,
    activation: Activation,
) -> Result<(Matrix, OutputMap)> {
    let f = elm_features(w1, x, activation)?;
    let map = least_squares(&f, t, 0.0)?;
    Ok((f, map))
}

fn project_ball(m: &mut [f64], eps: f64) {
    let n2 = dot(m, m);
    if n2 > eps {
        let s = libm::sqrt(eps / n2);
        m.iter_mut().for_each(|v| *v *= s);
    }
}

/// Minimizes `(1/N)·‖T − O·Y‖_F²` subject to `‖O‖_F² ≤ eps`.
pub fn admm_constrained_ls(y: &Matrix, t: &Matrix, eps: f64, cfg: &AdmmConfig) -> Result<OutputMap> {
    admm_constrained_ls_from(y, t, eps, cfg, None)
}

/// As [`admm_constrained_ls`]; with `cfg.warm_start` set, `start` (projected
/// onto the ball) is the initial Z-iterate.
///
/// The splitting is `O = Z` with objective
/// `(1/N)·‖T − O·Y‖² + (ρ/2)·‖O − Z + Λ‖²`. The iteration runs in the
/// eigenbasis of `H = (2/N)·Y·Yᵀ`, where the O-update decouples column by
/// column. The returned map is the lowest-cost Z-iterate seen, so it is
/// always feasible.
pub fn admm_constrained_ls_from(
    y: &Matrix,
    t: &Matrix,
    eps: f64,
    cfg: &AdmmConfig,
    start: Option<&Matrix>,
) -> Result<OutputMap> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Parameter(alloc::format!("budget must be positive and finite, got {eps}")));
    }
    check_pair(y, t)?;
    cfg.validate()?;
    let (d, n) = y.shape();
    let q = t.rows();
    if let Some(s) = start {
        if s.shape() != (q, d) {
            return Err(dim_err!("starting map is {}x{}, expected {}x{}", s.rows(), s.cols(), q, d));
        }
    }

    let inv_n = 1.0 / n as f64;
    let mut h = y.gram_rows();
    h.scale_mut(2.0 * inv_n);
    let eig = SymmetricEigen::new(&h)?;
    drop(h);
    let w: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
    let vt = &eig.vectors_t;
    let t0 = t.frobenius_norm_sq() * inv_n;
    let b = gemm(2.0 * inv_n, t, false, y, true);
    let bt = gemm(1.0, &b, false, vt, true);
    drop(b);

    // cost(Z̃) = t0 − ⟨Z̃, B̃⟩ + ½·Σ_j w_j·‖z̃_j‖²
    let rotated_cost = |z: &Matrix| -> f64 {
        let mut lin = 0.0;
        let mut quad = 0.0;
        for r in 0..q {
            let zr = z.row(r);
            lin += dot(zr, bt.row(r));
            for j in 0..d {
                quad += w[j] * zr[j] * zr[j];
            }
        }
        t0 - lin + 0.5 * quad
    };

    let mut rho = match cfg.penalty {
        Penalty::Fixed(p) => p,
        Penalty::Auto => {
            let mean = w.iter().sum::<f64>() / d as f64;
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
    };

    let mut z = match (cfg.warm_start, start) {
        (true, Some(s)) => {
            let mut zs = gemm(1.0, s, false, vt, true);
            project_ball(zs.as_mut_slice(), eps);
            zs
        }
        _ => Matrix::zeros(q, d),
    };
    let mut u = Matrix::zeros(q, d);
    let mut o = Matrix::zeros(q, d);
    let mut best = z.clone();
    let mut best_cost = rotated_cost(&z);
    let mut stats = AdmmStats {
        final_penalty: rho,
        ..AdmmStats::default()
    };

    const MU: f64 = 10.0;
    const TAU: f64 = 2.0;
    for k in 1..=cfg.iterations {
        for r in 0..q {
            let (br, zr, ur) = (bt.row(r), z.row(r), u.row(r));
            let or = o.row_mut(r);
            for j in 0..d {
                or[j] = (br[j] + rho * (zr[j] - ur[j])) / (w[j] + rho);
            }
        }
        let mut z_new = o.add(&u);
        project_ball(z_new.as_mut_slice(), eps);

        let mut r2 = 0.0;
        let mut s2 = 0.0;
        {
            let (us, os, zn, zo) = (u.as_mut_slice(), o.as_slice(), z_new.as_slice(), z.as_slice());
            for i in 0..us.len() {
                let p = os[i] - zn[i];
                us[i] += p;
                r2 += p * p;
                let dz = zn[i] - zo[i];
                s2 += dz * dz;
            }
        }
        z = z_new;
        let r = libm::sqrt(r2);
        let s = rho * libm::sqrt(s2);
        stats.iterations = k;
        stats.primal_residual = r;
        stats.dual_residual = s;

        let c = rotated_cost(&z);
        if !c.is_finite() {
            return Err(Error::Numerical("ADMM iterate became non-finite".into()));
        }
        if c <= best_cost {
            best_cost = c;
            best.as_mut_slice().copy_from_slice(z.as_slice());
            stats.best_iteration = k;
        }
        if cfg.tolerance > 0.0 && r + s <= cfg.tolerance {
            break;
        }
        if cfg.adaptive {
            if r > MU * s {
                rho *= TAU;
                u.scale_mut(1.0 / TAU);
            } else if s > MU * r {
                rho /= TAU;
                u.scale_mut(TAU);
            }
        }
    }
    stats.final_penalty = rho;

    let mut out = gemm(1.0, &best, false, vt, false);
    project_ball(out.as_mut_slice(), eps);
    let train_cost = cost(&out, y, t)?;
    Ok(OutputMap {
        matrix: out,
        epsilon: eps,
        train_cost,
        layer_index: 0,
        admm: Some(stats),
    })
}

/// `O_prev·W†`, the block that the witness repeats with both signs.
fn pulled_back(o_prev: &Matrix, w: &WeightMatrix) -> Result<Matrix> {
    if o_prev.cols() != w.cols() {
        return Err(dim_err!(
            "previous map has {} columns, weight has {} columns",
            o_prev.cols(),
            w.cols()
        ));
    }
    let m = w.right_apply_pinv(o_prev)?;
    if !m.is_finite() {
        return Err(Error::Numerical("pseudo-inverse produced non-finite values".into()));
    }
    Ok(m)
}

/// `‖O_prev·W†·U_n‖_F² = 2·‖O_prev·W†‖_F²`, floored at [`EPSILON_FLOOR`].
pub fn epsilon_from_matrix(o_prev: &Matrix, w: &WeightMatrix) -> Result<f64> {
    let m = pulled_back(o_prev, w)?;
    Ok((2.0 * m.frobenius_norm_sq()).max(EPSILON_FLOOR))
}

/// Budget for the first constrained layer; `o_prev` is the raw
/// least-squares map (or the ELM map, with `w` the second weight).
pub fn epsilon_first_layer(o_prev: &OutputMap, w1: &WeightMatrix) -> Result<f64> {
    epsilon_from_matrix(&o_prev.matrix, w1)
}

pub fn epsilon_next_layer(o_prev: &OutputMap, w: &WeightMatrix) -> Result<f64> {
    epsilon_from_matrix(&o_prev.matrix, w)
}

/// The witness `[O_prev·W†, −O_prev·W†]`, which reproduces the previous
/// layer's predictions on the new features.
pub fn embed_previous_map(o_prev: &Matrix, w: &WeightMatrix) -> Result<Matrix> {
    let m = pulled_back(o_prev, w)?;
    let neg = m.scaled(-1.0);
    Ok(Matrix::hstack(&m, &neg))
}
