//! ReLU, the `[I; −I]` expansion and its `[I, −I]` left inverse, and the
//! layer/network maps built from them.
//!
//! Neither structural matrix is ever stored: expansion writes the positive
//! part into the first half of the output and the negated negative part into
//! the second half, and collapse subtracts the halves.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{dist_sq, gemm, norm_sq, Matrix, Qr};
use crate::matrixgen::{has_full_column_rank, WeightMatrix};

#[inline]
fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| pos(x)).collect()
}

pub fn relu_in_place(v: &mut [f64]) {
    for x in v {
        *x = pos(*x);
    }
}

/// `g(V_n z) = [z⁺; (−z)⁺]`.
pub fn vn_expand(z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * z.len()];
    vn_expand_into(z, &mut out);
    out
}

/// Writes `[z⁺; (−z)⁺]` into `out`, which must have length `2·len(z)`.
pub fn vn_expand_into(z: &[f64], out: &mut [f64]) {
    let n = z.len();
    assert_eq!(out.len(), 2 * n, "expansion buffer has the wrong length");
    let (hi, lo) = out.split_at_mut(n);
    for i in 0..n {
        hi[i] = pos(z[i]);
        lo[i] = pos(-z[i]);
    }
}

/// `U_n ȳ`: first half minus second half.
pub fn un_collapse(ybar: &[f64]) -> Result<Vec<f64>> {
    if ybar.len() % 2 != 0 {
        return Err(dim_err!("collapse needs an even length, got {}", ybar.len()));
    }
    let n = ybar.len() / 2;
    Ok((0..n).map(|i| ybar[i] - ybar[n + i]).collect())
}

/// One HNF layer: `q ↦ g(V_n W q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HnfLayer {
    weight: WeightMatrix,
}

impl HnfLayer {
    pub fn new(weight: WeightMatrix) -> Self {
        Self { weight }
    }

    pub fn weight(&self) -> &WeightMatrix {
        &self.weight
    }

    pub fn into_weight(self) -> WeightMatrix {
        self.weight
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        2 * self.weight.rows()
    }

    pub fn forward(&self, q: &[f64]) -> Result<Vec<f64>> {
        if q.len() != self.in_dim() {
            return Err(dim_err!("layer expects input of length {}, got {}", self.in_dim(), q.len()));
        }
        Ok(vn_expand(&self.weight.matrix().matvec(q)))
    }

    /// Forward map on the columns of `q` (`in_dim × N`).
    pub fn forward_batch(&self, q: &Matrix) -> Result<Matrix> {
        if q.rows() != self.in_dim() {
            return Err(dim_err!(
                "layer expects {} input rows, got {}",
                self.in_dim(),
                q.rows()
            ));
        }
        let z = gemm(1.0, self.weight.matrix(), false, q, false);
        Ok(expand_rows(&z))
    }
}

/// Row-wise expansion of a pre-activation batch: rows `0..n` get `Z⁺`,
/// rows `n..2n` get `(−Z)⁺`.
pub fn expand_rows(z: &Matrix) -> Matrix {
    let (n, cols) = z.shape();
    let mut out = Matrix::zeros(2 * n, cols);
    let src = z.as_slice();
    let (hi, lo) = out.as_mut_slice().split_at_mut(n * cols);
    for (k, &v) in src.iter().enumerate() {
        hi[k] = pos(v);
        lo[k] = pos(-v);
    }
    out
}

/// An ordered chain of HNF layers.
#[derive(Debug, Clone, PartialEq)]
pub struct HnfNetwork {
    input_dim: usize,
    layers: Vec<HnfLayer>,
}

impl HnfNetwork {
    /// Checks that consecutive dimensions chain.
    pub fn new(input_dim: usize, layers: Vec<HnfLayer>) -> Result<Self> {
        let mut d = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != d {
                return Err(dim_err!(
                    "layer {} expects input dimension {}, previous output is {}",
                    i + 1,
                    layer.in_dim(),
                    d
                ));
            }
            d = layer.out_dim();
        }
        Ok(Self { input_dim, layers })
    }

    pub fn from_weights(input_dim: usize, weights: Vec<WeightMatrix>) -> Result<Self> {
        Self::new(input_dim, weights.into_iter().map(HnfLayer::new).collect())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, HnfLayer::out_dim)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[HnfLayer] {
        &self.layers
    }

    /// Appends a layer whose input must match the current output.
    pub fn push(&mut self, layer: HnfLayer) -> Result<()> {
        if layer.in_dim() != self.output_dim() {
            return Err(dim_err!(
                "new layer expects input dimension {}, network outputs {}",
                layer.in_dim(),
                self.output_dim()
            ));
        }
        self.layers.push(layer);
        Ok(())
    }

    /// Every intermediate feature vector `ȳ^(1) … ȳ^(L)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_dim {
            return Err(dim_err!("network expects input of length {}, got {}", self.input_dim, x.len()));
        }
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let next = layer.forward(out.last().map_or(x, |v| v.as_slice()))?;
            out.push(next);
        }
        Ok(out)
    }

    /// Final features only.
    pub fn forward_final(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut all = self.forward(x)?;
        Ok(all.pop().unwrap_or_else(|| x.to_vec()))
    }

    /// Features after `upto` layers for every column of `x`, keeping only
    /// one intermediate batch alive at a time. `upto = 0` returns a copy of
    /// `x`.
    pub fn forward_batch_to(&self, x: &Matrix, upto: usize) -> Result<Matrix> {
        if upto > self.layers.len() {
            return Err(dim_err!("network has {} layers, asked for {}", self.layers.len(), upto));
        }
        if x.rows() != self.input_dim {
            return Err(dim_err!("network expects {} input rows, got {}", self.input_dim, x.rows()));
        }
        let mut cur = x.clone();
        for layer in &self.layers[..upto] {
            cur = layer.forward_batch(&cur)?;
        }
        Ok(cur)
    }

    /// Checks full column rank of every weight and prepares the per-layer
    /// left inverses.
    pub fn inverse_map(&self) -> Result<InverseMap> {
        let mut steps = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let w = layer.weight();
            if !has_full_column_rank(w) {
                return Err(Error::NotInvertible(alloc::format!(
                    "weight of layer {} is not full column rank",
                    i + 1
                )));
            }
            steps.push(if w.is_orthonormal() {
                Pinv::Transpose(w.matrix().clone())
            } else {
                Pinv::Qr(Qr::new(w.matrix())?)
            });
        }
        Ok(InverseMap {
            out_dim: self.output_dim(),
            steps,
        })
    }

    /// Recovers `x` from `ȳ^(L)`.
    pub fn invert(&self, ybar: &[f64]) -> Result<Vec<f64>> {
        self.inverse_map()?.apply(ybar)
    }
}

#[derive(Debug, Clone)]
enum Pinv {
    Transpose(Matrix),
    Qr(Qr),
}

/// Layer-by-layer inverse `ȳ^(l−1) = [W^(l)]† U ȳ^(l)`.
#[derive(Debug, Clone)]
pub struct InverseMap {
    out_dim: usize,
    steps: Vec<Pinv>,
}

impl InverseMap {
    pub fn apply(&self, ybar: &[f64]) -> Result<Vec<f64>> {
        if ybar.len() != self.out_dim {
            return Err(dim_err!("inverse expects length {}, got {}", self.out_dim, ybar.len()));
        }
        let mut cur = ybar.to_vec();
        for step in self.steps.iter().rev() {
            let z = un_collapse(&cur)?;
            cur = match step {
                Pinv::Transpose(w) => w.matvec_t(&z),
                Pinv::Qr(qr) => qr.solve(&z),
            };
        }
        Ok(cur)
    }
}

/// Squared distances between two inputs and between their features at
/// every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistances {
    pub input_dist_sq: f64,
    pub per_layer_dist_sq: Vec<f64>,
}

impl PairDistances {
    /// Worst relative margin of `2^(−l)·d² ≤ dist_l ≤ d²` over all layers,
    /// as `(lower, upper)`. Negative means violated.
    pub fn sandwich_margins(&self) -> (f64, f64) {
        let d2 = self.input_dist_sq;
        let scale = if d2 > 0.0 { d2 } else { 1.0 };
        let mut lower = f64::INFINITY;
        let mut upper = f64::INFINITY;
        for (l, &v) in self.per_layer_dist_sq.iter().enumerate() {
            let lo = d2 / (1u64 << (l + 1).min(63)) as f64;
            lower = lower.min((v - lo) / scale);
            upper = upper.min((d2 - v) / scale);
        }
        (lower, upper)
    }

    /// True when every layer satisfies the sandwich within relative `slack`.
    pub fn sandwich_holds(&self, slack: f64) -> bool {
        let (lo, hi) = self.sandwich_margins();
        lo >= -slack && hi >= -slack
    }
}

pub fn pair_distance_report(net: &HnfNetwork, x1: &[f64], x2: &[f64]) -> Result<PairDistances> {
    if x1.len() != x2.len() {
        return Err(dim_err!("pair has lengths {} and {}", x1.len(), x2.len()));
    }
    let f1 = net.forward(x1)?;
    let f2 = net.forward(x2)?;
    Ok(PairDistances {
        input_dist_sq: dist_sq(x1, x2),
        per_layer_dist_sq: f1.iter().zip(&f2).map(|(a, b)| dist_sq(a, b)).collect(),
    })
}

/// `‖ȳ₁ − ȳ₂‖²` against `½‖z₁−z₂‖² + ½‖|z₁|−|z₂|‖²` for `ȳ = vn_expand(z)`.
pub fn expansion_distance_identity(z1: &[f64], z2: &[f64]) -> Result<(f64, f64)> {
    if z1.len() != z2.len() {
        return Err(dim_err!("pair has lengths {} and {}", z1.len(), z2.len()));
    }
    let lhs = dist_sq(&vn_expand(z1), &vn_expand(z2));
    let mut d = 0.0;
    let mut a = 0.0;
    for (&u, &v) in z1.iter().zip(z2) {
        d += (u - v) * (u - v);
        let t = u.abs() - v.abs();
        a += t * t;
    }
    Ok((lhs, 0.5 * d + 0.5 * a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl PerturbationCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + 1e-9),
        }
    }
}

/// `‖g(V W q) − g(V (W+ΔW) q)‖²` against `‖ΔW‖_F²·‖q‖²`.
pub fn weight_perturbation_check(layer: &HnfLayer, dw: &Matrix, q: &[f64]) -> Result<PerturbationCheck> {
    let w = layer.weight().matrix();
    if dw.shape() != w.shape() {
        return Err(dim_err!(
            "perturbation is {}x{}, weight is {}x{}",
            dw.rows(),
            dw.cols(),
            w.rows(),
            w.cols()
        ));
    }
    let y = layer.forward(q)?;
    let y_d = vn_expand(&w.add(dw).matvec(q));
    Ok(PerturbationCheck::new(dist_sq(&y, &y_d), dw.frobenius_norm_sq() * norm_sq(q)))
}

/// Output change of a whole network under per-layer weight perturbations,
/// compared with two bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultilayerPerturbation {
    pub lhs: f64,
    /// `∏‖ΔW^(l)‖_F²·‖x‖²`.
    pub product: PerturbationCheck,
    /// `(∏(s_l + δ_l) − ∏ s_l)²·‖x‖²` with `δ_l = ‖ΔW^(l)‖_F` and `s_l` an
    /// upper bound on `‖W^(l)‖₂` (1 for orthonormal weights).
    pub telescoping: PerturbationCheck,
}

pub fn multilayer_perturbation_check(
    net: &HnfNetwork,
    dws: &[Matrix],
    x: &[f64],
) -> Result<MultilayerPerturbation> {
    if dws.len() != net.depth() {
        return Err(dim_err!("{} perturbations for {} layers", dws.len(), net.depth()));
    }
    let clean = net.forward_final(x)?;
    let mut cur = x.to_vec();
    let mut prod_f2 = 1.0;
    let mut s_prod = 1.0;
    let mut sd_prod = 1.0;
    for (layer, dw) in net.layers().iter().zip(dws) {
        let w = layer.weight().matrix();
        if dw.shape() != w.shape() {
            return Err(dim_err!(
                "perturbation is {}x{}, weight is {}x{}",
                dw.rows(),
                dw.cols(),
                w.rows(),
                w.cols()
            ));
        }
        cur = vn_expand(&w.add(dw).matvec(&cur));
        let delta = dw.frobenius_norm();
        let s = if layer.weight().is_orthonormal() {
            1.0
        } else {
            w.frobenius_norm()
        };
        prod_f2 *= delta * delta;
        s_prod *= s;
        sd_prod *= s + delta;
    }
    let lhs = dist_sq(&clean, &cur);
    let x2 = norm_sq(x);
    let t = sd_prod - s_prod;
    Ok(MultilayerPerturbation {
        lhs,
        product: PerturbationCheck::new(lhs, prod_f2 * x2),
        telescoping: PerturbationCheck::new(lhs, t * t * x2),
    })
}
