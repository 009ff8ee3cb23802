use alloc::vec;
use alloc::vec::Vec;

use super::{axpy, dot, gemm, Matrix};
use crate::error::{dim_err, Error, Result};

/// Lower-triangular Cholesky factor `L` with `A = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(dim_err!("cholesky needs a square matrix, got {}x{}", n, a.cols()));
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let s = a[(j, j)] - dot(&l.row(j)[..j], &l.row(j)[..j]);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let ljj = libm::sqrt(s);
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let (head, tail) = l.as_mut_slice().split_at_mut(i * n);
                let lj = &head[j * n..j * n + j];
                let li = &mut tail[..n];
                li[j] = (a[(i, j)] - dot(&li[..j], lj)) / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// Smallest over largest diagonal entry of `L`; squared, this bounds
    /// the reciprocal condition number from above.
    pub fn diagonal_ratio(&self) -> f64 {
        let n = self.l.rows();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            lo = lo.min(self.l[(i, i)]);
            hi = hi.max(self.l[(i, i)]);
        }
        if n == 0 {
            1.0
        } else {
            lo / hi
        }
    }

    /// Solves `A·x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        for i in 0..n {
            let li = self.l.row(i);
            b[i] = (b[i] - dot(&li[..i], &b[..i])) / li[i];
        }
        for i in (0..n).rev() {
            b[i] /= self.l[(i, i)];
            let xi = b[i];
            let li = &self.l.row(i)[..i];
            axpy(-xi, li, &mut b[..i]);
        }
    }

    /// `C·A⁻¹` for a matrix `C` whose rows are right-hand sides.
    pub fn solve_rows(&self, c: &Matrix) -> Matrix {
        let mut out = c.clone();
        for i in 0..out.rows() {
            self.solve_in_place(out.row_mut(i));
        }
        out
    }

    /// Explicit `A⁻¹`.
    pub fn inverse(&self) -> Matrix {
        let n = self.l.rows();
        // L⁻¹ by forward substitution on the identity, then A⁻¹ = L⁻ᵀ·L⁻¹.
        let mut linv = Matrix::zeros(n, n);
        for j in 0..n {
            linv[(j, j)] = 1.0 / self.l[(j, j)];
            for i in j + 1..n {
                let li = self.l.row(i);
                let mut s = 0.0;
                for k in j..i {
                    s += li[k] * linv[(k, j)];
                }
                linv[(i, j)] = -s / li[i];
            }
        }
        let mut inv = gemm(1.0, &linv, true, &linv, false);
        inv.symmetrize();
        inv
    }
}

/// Thin Householder QR of an `n × m` matrix with `n ≥ m`, normalized so
/// that every diagonal entry of `R` is non-negative.
#[derive(Debug, Clone)]
pub struct Qr {
    q: Matrix,
    r: Matrix,
}

impl Qr {
    pub fn new(a: &Matrix) -> Result<Self> {
        let (n, m) = a.shape();
        if n < m {
            return Err(dim_err!("thin QR needs rows >= cols, got {}x{}", n, m));
        }
        // Work column-major so every reflector touches contiguous memory.
        let mut col = a.transpose().into_vec();
        let mut betas = vec![0.0; m];
        let mut diag = vec![0.0; m];
        for k in 0..m {
            let (head, rest) = col.split_at_mut(k * n);
            let _ = head;
            let (ck, others) = rest.split_at_mut(n);
            let x = &mut ck[k..];
            let norm = libm::sqrt(dot(x, x));
            if norm == 0.0 {
                diag[k] = 0.0;
                continue;
            }
            let alpha = if x[0] > 0.0 { -norm } else { norm };
            x[0] -= alpha;
            let vtv = dot(x, x);
            let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            betas[k] = beta;
            diag[k] = alpha;
            for j in 0..(m - k - 1) {
                let cj = &mut others[j * n + k..(j + 1) * n];
                let s = beta * dot(x, cj);
                axpy(-s, x, cj);
            }
        }

        let mut r = Matrix::zeros(m, m);
        for i in 0..m {
            r[(i, i)] = diag[i];
            for j in i + 1..m {
                r[(i, j)] = col[j * n + i];
            }
        }

        // Accumulate Q = H_0 … H_{m-1} [I; 0] backwards, column-major.
        let mut qcol = vec![0.0; n * m];
        for j in 0..m {
            qcol[j * n + j] = 1.0;
        }
        for k in (0..m).rev() {
            let beta = betas[k];
            if beta == 0.0 {
                continue;
            }
            let v = &col[k * n + k..(k + 1) * n];
            for j in k..m {
                let qj = &mut qcol[j * n + k..(j + 1) * n];
                let s = beta * dot(v, qj);
                axpy(-s, v, qj);
            }
        }

        let mut q = Matrix::from_vec(m, n, qcol)?.transpose();
        for k in 0..m {
            if r[(k, k)] < 0.0 {
                for j in k..m {
                    r[(k, j)] = -r[(k, j)];
                }
                for i in 0..n {
                    q[(i, k)] = -q[(i, k)];
                }
            }
        }
        Ok(Self { q, r })
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn into_q(self) -> Matrix {
        self.q
    }

    /// Smallest `|R_ii|` relative to the largest.
    pub fn diagonal_ratio(&self) -> f64 {
        let m = self.r.rows();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..m {
            let d = self.r[(i, i)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if m == 0 || hi == 0.0 {
            if m == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            lo / hi
        }
    }

    /// Least-squares solution of `A·x = b`, i.e. `A†·b` for full column rank.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.q.matvec_t(b);
        let m = self.r.rows();
        for i in (0..m).rev() {
            let ri = self.r.row(i);
            x[i] = (x[i] - dot(&ri[i + 1..], &x[i + 1..])) / ri[i];
        }
        x
    }

    /// `C·A†` for `C` with `m` columns: `C·R⁻¹·Qᵀ`.
    pub fn right_apply_pinv(&self, c: &Matrix) -> Matrix {
        let m = self.r.rows();
        assert_eq!(c.cols(), m, "right_apply_pinv dimension mismatch");
        let mut x = c.clone();
        for row in 0..x.rows() {
            let xr = x.row_mut(row);
            for i in 0..m {
                let ri = self.r.row(i);
                xr[i] /= ri[i];
                let xi = xr[i];
                axpy(-xi, &ri[i + 1..], &mut xr[i + 1..]);
            }
        }
        gemm(1.0, &x, false, &self.q, true)
    }
}

/// Eigendecomposition `A = V·diag(λ)·Vᵀ` of a symmetric matrix, with
/// eigenvalues ascending. Eigenvectors are stored as the rows of
/// `vectors_t` (that is, `Vᵀ`).
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors_t: Matrix,
}

impl SymmetricEigen {
    /// Householder tridiagonalization followed by implicit QL.
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(dim_err!("eigendecomposition needs a square matrix"));
        }
        if !a.is_finite() {
            return Err(Error::Numerical("non-finite entry in symmetric matrix".into()));
        }
        let (mut d, mut e, mut qt) = tridiagonalize(a);
        tql(&mut d, &mut e, &mut qt)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(core::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| d[i]).collect();
        let mut vectors_t = Matrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors_t.row_mut(dst).copy_from_slice(qt.row(src));
        }
        Ok(Self { values, vectors_t })
    }

    /// Pseudo-inverse of the decomposed matrix; eigenvalues at or below
    /// `cutoff` are treated as zero.
    pub fn pseudo_inverse(&self, cutoff: f64) -> Matrix {
        let n = self.values.len();
        let mut scaled = self.vectors_t.clone();
        for i in 0..n {
            let lam = self.values[i];
            let s = if lam > cutoff { 1.0 / lam } else { 0.0 };
            scaled.row_mut(i).iter_mut().for_each(|x| *x *= s);
        }
        let mut p = gemm(1.0, &self.vectors_t, true, &scaled, false);
        p.symmetrize();
        p
    }
}

/// Reduces symmetric `a` to tridiagonal form `a = Q·T·Qᵀ`. Returns the
/// diagonal, the off-diagonal (`e[i]` couples `i` and `i+1`, last entry 0)
/// and `Qᵀ`.
fn tridiagonalize(a: &Matrix) -> (Vec<f64>, Vec<f64>, Matrix) {
    let n = a.rows();
    let mut w = a.clone();
    w.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut reflectors: Vec<(usize, f64, Vec<f64>)> = Vec::new();
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(1) {
        d[k] = w[(k, k)];
        let x: Vec<f64> = w.row(k)[k + 1..].to_vec();
        let tail_sq = dot(&x[1..], &x[1..]);
        if tail_sq == 0.0 {
            e[k] = x[0];
            continue;
        }
        let norm = libm::sqrt(x[0] * x[0] + tail_sq);
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let beta = 2.0 / dot(&v, &v);
        e[k] = alpha;

        // p = β·A₂₂·v ; w = p − (β/2)(pᵀv)·v ; A₂₂ −= v·wᵀ + w·vᵀ
        let off = k + 1;
        let m = n - off;
        let pv = &mut p[..m];
        for i in 0..m {
            pv[i] = beta * dot(&w.row(off + i)[off..], &v);
        }
        let kappa = 0.5 * beta * dot(pv, &v);
        for i in 0..m {
            pv[i] -= kappa * v[i];
        }
        for i in 0..m {
            let (vi, wi) = (v[i], pv[i]);
            let row = &mut w.row_mut(off + i)[off..];
            for j in 0..m {
                row[j] -= vi * pv[j] + wi * v[j];
            }
        }
        reflectors.push((off, beta, v));
    }
    if n > 0 {
        d[n - 1] = w[(n - 1, n - 1)];
    }

    // Qᵀ = H_{last} ⋯ H_0, built by left-multiplying each reflector onto I.
    let mut qt = Matrix::identity(n);
    let mut u = vec![0.0; n];
    for (off, beta, v) in &reflectors {
        u.iter_mut().for_each(|x| *x = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            axpy(vi, qt.row(off + i), &mut u);
        }
        for (i, &vi) in v.iter().enumerate() {
            axpy(-beta * vi, &u, qt.row_mut(off + i));
        }
    }
    (d, e, qt)
}

/// Implicit QL with Wilkinson-style shifts on a symmetric tridiagonal
/// matrix, rotating the rows of `zt` along.
fn tql(d: &mut [f64], e: &mut [f64], zt: &mut Matrix) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Numerical("tridiagonal QL did not converge".into()));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_rows(zt, i, i + 1, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if !(e[l].abs() > eps * tst1) {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_rows(zt: &mut Matrix, i: usize, j: usize, c: f64, s: f64) {
    debug_assert!(i < j);
    let n = zt.cols();
    let (lo, hi) = zt.as_mut_slice().split_at_mut(j * n);
    let ri = &mut lo[i * n..(i + 1) * n];
    let rj = &mut hi[..n];
    for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, m: usize, seed: u64) -> Matrix {
        // Small deterministic LCG, enough for shape tests.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Matrix::from_fn(n, m, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn cholesky_solves_and_inverts() {
        let b = sample(6, 9, 3);
        let mut a = b.gram_rows();
        a.add_to_diagonal(0.1);
        let ch = Cholesky::new(&a).unwrap();
        let rhs = [1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let mut x = rhs;
        ch.solve_in_place(&mut x);
        let back = a.matvec(&x);
        for (u, v) in back.iter().zip(rhs) {
            assert!((u - v).abs() < 1e-10);
        }
        let inv = ch.inverse();
        let mut eye = a.matmul(&inv);
        eye.add_to_diagonal(-1.0);
        assert!(eye.max_abs() < 1e-9);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert_eq!(Cholesky::new(&a).unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn qr_reconstructs_with_positive_diagonal() {
        for &(n, m) in &[(5, 3), (4, 4), (7, 1), (12, 9)] {
            let a = sample(n, m, (n * 31 + m) as u64);
            let qr = Qr::new(&a).unwrap();
            assert!(qr.q().orthonormality_defect() < 1e-13);
            assert!(qr.q().matmul(qr.r()).max_abs_diff(&a) < 1e-13);
            for i in 0..m {
                assert!(qr.r()[(i, i)] >= 0.0);
                for j in 0..i {
                    assert_eq!(qr.r()[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn qr_pseudo_inverse_matches_normal_equations() {
        let a = sample(8, 3, 11);
        let qr = Qr::new(&a).unwrap();
        let c = sample(2, 3, 5);
        let got = qr.right_apply_pinv(&c);
        // C (AᵀA)⁻¹ Aᵀ
        let ata = a.matmul_tn(&a);
        let ch = Cholesky::new(&ata).unwrap();
        let want = ch.solve_rows(&c).matmul_nt(&a);
        assert!(got.max_abs_diff(&want) < 1e-10);
        let b = [0.3, -0.1, 0.7, 0.2, 0.0, 1.0, -0.4, 0.9];
        let x = qr.solve(&b);
        let want_x = ch.solve_rows(&Matrix::from_rows(&[a.matvec_t(&b)]));
        for (u, v) in x.iter().zip(want_x.row(0)) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn eigen_reconstructs() {
        for &n in &[1usize, 2, 3, 10, 37] {
            let b = sample(n, n + 2, n as u64);
            let a = b.gram_rows();
            let eig = SymmetricEigen::new(&a).unwrap();
            assert!(eig.vectors_t.orthonormality_defect() < 1e-12);
            let mut scaled = eig.vectors_t.clone();
            for i in 0..n {
                let l = eig.values[i];
                scaled.row_mut(i).iter_mut().for_each(|x| *x *= l);
            }
            let back = eig.vectors_t.matmul_tn(&scaled);
            assert!(back.max_abs_diff(&a) < 1e-12 * (1.0 + a.max_abs()));
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigen_of_diagonal_and_repeated() {
        let a = Matrix::from_rows(&[[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 3.0]]);
        let eig = SymmetricEigen::new(&a).unwrap();
        assert_eq!(eig.values, vec![1.0, 3.0, 3.0]);
        let p = eig.pseudo_inverse(1e-12);
        assert!((p[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pseudo_inverse_of_singular_matrix() {
        // rank-1: [1 1; 1 1] has pseudo-inverse [1 1; 1 1] / 4
        let a = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        let p = SymmetricEigen::new(&a).unwrap().pseudo_inverse(1e-12);
        assert!(p.max_abs_diff(&Matrix::from_rows(&[[0.25, 0.25], [0.25, 0.25]])) < 1e-15);
    }
}
