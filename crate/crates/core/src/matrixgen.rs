//! Factories for the fixed (never trained) per-layer weight matrices.
//!
//! Randomized matrices draw i.i.d. standard normals from
//! `Xoshiro256PlusPlus::seed_from_u64(seed)` via `rand_distr::StandardNormal`,
//! filled in row-major order. Orthonormal ones are the thin-QR `Q` factor of
//! that Gaussian draw, with the sign convention `R_ii > 0`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{Matrix, Qr, SymmetricEigen};

/// Maximum `‖WᵀW − I‖_max` accepted as orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Relative singular-value cutoff used when no explicit tolerance is given.
pub const DEFAULT_RANK_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightKind {
    RandomOrthonormal,
    DctOrthonormal,
    RawGaussian,
}

impl WeightKind {
    pub fn code(self) -> u8 {
        match self {
            WeightKind::RandomOrthonormal => 0,
            WeightKind::DctOrthonormal => 1,
            WeightKind::RawGaussian => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(WeightKind::RandomOrthonormal),
            1 => Some(WeightKind::DctOrthonormal),
            2 => Some(WeightKind::RawGaussian),
            _ => None,
        }
    }

    pub fn is_orthonormal(self) -> bool {
        !matches!(self, WeightKind::RawGaussian)
    }

    pub fn is_randomized(self) -> bool {
        !matches!(self, WeightKind::DctOrthonormal)
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightKind::RandomOrthonormal => "random-orthonormal",
            WeightKind::DctOrthonormal => "dct",
            WeightKind::RawGaussian => "gaussian",
        }
    }
}

/// A fixed `n × m` weight matrix together with how it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    entries: Matrix,
    kind: WeightKind,
    seed: Option<u64>,
}

impl WeightMatrix {
    /// Wraps existing entries, e.g. ones read back from disk. Only the
    /// shape is checked here; numerical properties are verified where
    /// they matter (rank checks, invariant reports).
    pub fn from_parts(entries: Matrix, kind: WeightKind, seed: Option<u64>) -> Result<Self> {
        let (n, m) = entries.shape();
        if n == 0 || m == 0 {
            return Err(dim_err!("weight matrix must be non-empty, got {}x{}", n, m));
        }
        if kind.is_orthonormal() && n < m {
            return Err(dim_err!("{} weights need rows >= cols, got {}x{}", kind.name(), n, m));
        }
        if kind.is_randomized() != seed.is_some() {
            return Err(Error::Parameter(alloc::format!(
                "{} weights {} a seed",
                kind.name(),
                if kind.is_randomized() { "need" } else { "cannot carry" }
            )));
        }
        Ok(Self { entries, kind, seed })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.entries.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.entries.cols()
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_matrix(self) -> Matrix {
        self.entries
    }

    pub fn orthonormality_defect(&self) -> f64 {
        self.entries.orthonormality_defect()
    }

    /// True when the kind promises orthonormal columns and the entries
    /// actually deliver them.
    pub fn is_orthonormal(&self) -> bool {
        self.kind.is_orthonormal()
            && self.rows() >= self.cols()
            && self.orthonormality_defect() <= ORTHONORMAL_TOL
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let gram = self.entries.matmul_tn(&self.entries);
        let eig = SymmetricEigen::new(&gram)?;
        let mut s: Vec<f64> = eig.values.iter().map(|&l| libm::sqrt(l.max(0.0))).collect();
        s.reverse();
        if self.rows() < self.cols() {
            // Only `rows` of them can be nonzero.
            for x in s.iter_mut().skip(self.rows()) {
                *x = 0.0;
            }
        }
        Ok(s)
    }

    /// Number of singular values above `rtol · σ_max`.
    pub fn numerical_rank(&self, rtol: f64) -> Result<usize> {
        let s = self.singular_values()?;
        let cut = rtol * s.first().copied().unwrap_or(0.0);
        Ok(s.iter().filter(|&&x| x > cut).count())
    }

    /// `C · W†`. Uses `Wᵀ` for verified orthonormal weights, thin QR
    /// otherwise.
    pub fn right_apply_pinv(&self, c: &Matrix) -> Result<Matrix> {
        if c.cols() != self.cols() {
            return Err(dim_err!(
                "cannot multiply a {}x{} map by the pseudo-inverse of a {}x{} weight",
                c.rows(),
                c.cols(),
                self.rows(),
                self.cols()
            ));
        }
        if self.is_orthonormal() {
            return Ok(c.matmul_nt(&self.entries));
        }
        Ok(self.qr_checked()?.right_apply_pinv(c))
    }

    /// `W† · z` for a single vector.
    pub fn apply_pinv(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.rows() {
            return Err(dim_err!("expected a vector of length {}, got {}", self.rows(), z.len()));
        }
        if self.is_orthonormal() {
            return Ok(self.entries.matvec_t(z));
        }
        Ok(self.qr_checked()?.solve(z))
    }

    fn qr_checked(&self) -> Result<Qr> {
        if self.rows() < self.cols() {
            return Err(Error::Numerical(alloc::format!(
                "a {}x{} weight has no left inverse",
                self.rows(),
                self.cols()
            )));
        }
        let qr = Qr::new(&self.entries)?;
        if !(qr.diagonal_ratio() > 1e-13) {
            return Err(Error::Numerical(
                "weight matrix is numerically rank deficient; pseudo-inverse is unstable".into(),
            ));
        }
        Ok(qr)
    }
}

fn gaussian(n: usize, m: usize, seed: u64) -> Matrix {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    Matrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng))
}

fn check_dims(n: usize, m: usize, need_tall: bool) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(dim_err!("weight dimensions must be positive, got {}x{}", n, m));
    }
    if need_tall && n < m {
        return Err(dim_err!("orthonormal columns need n >= m, got n={} m={}", n, m));
    }
    Ok(())
}

/// `n × m` matrix with orthonormal columns: the `Q` factor of a seeded
/// Gaussian draw.
pub fn make_random_orthonormal(n: usize, m: usize, seed: u64) -> Result<WeightMatrix> {
    check_dims(n, m, true)?;
    let q = Qr::new(&gaussian(n, m, seed))?.into_q();
    Ok(WeightMatrix {
        entries: q,
        kind: WeightKind::RandomOrthonormal,
        seed: Some(seed),
    })
}

/// First `m` columns of the `n × n` orthonormal DCT-II matrix, i.e. the
/// transform of an `m`-vector zero-padded to length `n`.
pub fn make_dct_orthonormal(n: usize, m: usize) -> Result<WeightMatrix> {
    check_dims(n, m, true)?;
    let nf = n as f64;
    let scale0 = libm::sqrt(1.0 / nf);
    let scale = libm::sqrt(2.0 / nf);
    let entries = Matrix::from_fn(n, m, |k, j| {
        let c = if k == 0 { scale0 } else { scale };
        c * libm::cos(PI * (2 * j + 1) as f64 * k as f64 / (2.0 * nf))
    });
    Ok(WeightMatrix {
        entries,
        kind: WeightKind::DctOrthonormal,
        seed: None,
    })
}

/// Plain i.i.d. `N(0, 1)` matrix, any shape. Used for the ELM front end and
/// for unnormalized random layers.
pub fn make_raw_gaussian(n: usize, m: usize, seed: u64) -> Result<WeightMatrix> {
    check_dims(n, m, false)?;
    Ok(WeightMatrix {
        entries: gaussian(n, m, seed),
        kind: WeightKind::RawGaussian,
        seed: Some(seed),
    })
}

/// Builds a weight of the given kind; `seed` is ignored for DCT.
pub fn make_weight(kind: WeightKind, n: usize, m: usize, seed: u64) -> Result<WeightMatrix> {
    match kind {
        WeightKind::RandomOrthonormal => make_random_orthonormal(n, m, seed),
        WeightKind::DctOrthonormal => make_dct_orthonormal(n, m),
        WeightKind::RawGaussian => make_raw_gaussian(n, m, seed),
    }
}

/// True iff the `m`-th largest singular value of `w` exceeds `tol`.
pub fn verify_full_column_rank(w: &WeightMatrix, tol: f64) -> bool {
    let (n, m) = (w.rows(), w.cols());
    if n < m {
        return false;
    }
    // Gershgorin on WᵀW: a small orthonormality defect pins every singular
    // value near one without an eigensolve.
    let defect = w.orthonormality_defect();
    let lower = 1.0 - m as f64 * defect;
    if lower > 0.0 && libm::sqrt(lower) > tol {
        return true;
    }
    match w.singular_values() {
        Ok(s) => s[m - 1] > tol,
        Err(_) => false,
    }
}

/// Rank check with the default relative tolerance `1e-6 · σ_max`.
pub fn has_full_column_rank(w: &WeightMatrix) -> bool {
    let sigma_max = if w.is_orthonormal() {
        1.0
    } else {
        match w.singular_values() {
            Ok(s) => s[0],
            Err(_) => return false,
        }
    };
    sigma_max > 0.0 && verify_full_column_rank(w, DEFAULT_RANK_RTOL * sigma_max)
}

/// SplitMix64 finalizer over `(seed, stream)`; gives each layer its own
/// well-separated seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
