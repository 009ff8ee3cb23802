//! Reference computations for the tests, written against plain nested
//! vectors so they share no code with the library.

#![allow(dead_code)]

use hnf_core::linalg::Matrix;

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = zeros(n, m);
    for i in 0..n {
        for p in 0..k {
            let v = a[i][p];
            for j in 0..m {
                out[i][j] += v * b[p][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Dense) -> Dense {
    let (r, c) = (a.len(), a.first().map_or(0, Vec::len));
    (0..c).map(|j| (0..r).map(|i| a[i][j]).collect()).collect()
}

pub fn fro_sq(a: &Dense) -> f64 {
    a.iter().flatten().map(|v| v * v).sum()
}

/// Solves `A·X = B` by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan(a: &Dense, b: &Dense) -> Option<Dense> {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Dense = a.iter().zip(b).map(|(ra, rb)| ra.iter().chain(rb).copied().collect()).collect();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[piv][col].abs() <= 1e-14 * scale {
            return None;
        }
        aug.swap(col, piv);
        let d = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..n + m {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// `(1/N)·‖T − O·Y‖_F²`.
pub fn avg_cost(o: &Dense, y: &Dense, t: &Dense) -> f64 {
    let p = mul(o, y);
    let n = t[0].len() as f64;
    t.iter().zip(&p).flat_map(|(a, b)| a.iter().zip(b)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
}

/// Minimizer of `(1/N)·‖T − O·Y‖²` over `‖O‖_F² ≤ eps`, from the Lagrangian
/// stationarity condition `O(λ) = B·(H + λI)⁻¹` with `H = (2/N)·Y·Yᵀ`,
/// `B = (2/N)·T·Yᵀ`, bisecting on `λ ≥ 0`.
pub fn bisection_constrained_ls(y: &Dense, t: &Dense, eps: f64) -> (Dense, f64) {
    let n = y[0].len() as f64;
    let d = y.len();
    let yt = transpose(y);
    let mut h = mul(y, &yt);
    h.iter_mut().flatten().for_each(|v| *v *= 2.0 / n);
    let mut b = mul(t, &yt);
    b.iter_mut().flatten().for_each(|v| *v *= 2.0 / n);
    let bt = transpose(&b);
    let o_at = |lam: f64| -> Option<Dense> {
        let mut a = h.clone();
        for (i, row) in a.iter_mut().enumerate().take(d) {
            row[i] += lam;
        }
        gauss_jordan(&a, &bt).map(|x| transpose(&x))
    };
    if let Some(o) = o_at(0.0) {
        if fro_sq(&o) <= eps {
            let c = avg_cost(&o, y, t);
            return (o, c);
        }
    }
    let mut lo = 0.0;
    let mut hi = fro_sq(&b).sqrt() / eps.sqrt() + 1.0;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        let o = o_at(mid).expect("positive shift is invertible");
        if fro_sq(&o) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let o = o_at(hi).expect("positive shift is invertible");
    let c = avg_cost(&o, y, t);
    (o, c)
}

/// `‖O_prev·W†·U‖_F²` with `W†` from the normal equations (or `Wᵀ` when
/// `orthonormal`) and `U = [I, −I]` stored densely.
pub fn materialized_epsilon(o_prev: &Dense, w: &Dense, orthonormal: bool) -> f64 {
    let n = w.len();
    let wt = transpose(w);
    let pinv = if orthonormal {
        wt
    } else {
        let g = mul(&wt, w);
        gauss_jordan(&g, &wt).expect("full column rank")
    };
    let mut u = zeros(n, 2 * n);
    for i in 0..n {
        u[i][i] = 1.0;
        u[i][n + i] = -1.0;
    }
    fro_sq(&mul(&mul(o_prev, &pinv), &u))
}
