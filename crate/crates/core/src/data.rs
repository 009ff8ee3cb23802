//! In-memory datasets: inputs as columns, one-hot targets, and a train/test
//! partition.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{dim_err, Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub name: String,
    pub p: usize,
    pub q: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Original label for each class index.
    pub label_names: Vec<String>,
    /// Seed of the shuffle that produced the split, if any.
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    t: Matrix,
    labels: Vec<usize>,
    train: Vec<usize>,
    test: Vec<usize>,
    meta: DatasetMeta,
}

/// `Q × N` indicator matrix of `labels`.
pub fn one_hot(labels: &[usize], q: usize) -> Result<Matrix> {
    let mut t = Matrix::zeros(q, labels.len());
    for (j, &c) in labels.iter().enumerate() {
        if c >= q {
            return Err(Error::Data(alloc::format!("label {c} at sample {j} is outside 0..{q}")));
        }
        t[(c, j)] = 1.0;
    }
    Ok(t)
}

/// Class index of each one-hot column; errors on anything that is not
/// exactly one 1 and zeros elsewhere.
pub fn labels_from_one_hot(t: &Matrix) -> Result<Vec<usize>> {
    let (q, n) = t.shape();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut hit = None;
        for i in 0..q {
            let v = t[(i, j)];
            if v == 1.0 && hit.is_none() {
                hit = Some(i);
            } else if v != 0.0 {
                return Err(Error::Data(alloc::format!("target column {j} is not one-hot")));
            }
        }
        out.push(hit.ok_or_else(|| Error::Data(alloc::format!("target column {j} has no class")))?);
    }
    Ok(out)
}

/// Sorted `(train, test)` index lists from a seeded shuffle of `0..n`.
pub fn shuffled_split(n: usize, n_train: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train > n {
        return Err(Error::Parameter(alloc::format!("cannot take {n_train} training samples from {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(seed));
    let mut test = idx.split_off(n_train);
    idx.sort_unstable();
    test.sort_unstable();
    Ok((idx, test))
}

/// Two thirds of `n`, rounded to nearest.
pub fn default_train_count(n: usize) -> usize {
    (2 * n + 1) / 3
}

impl Dataset {
    /// `x` is `P × N`; `labels[j] < label_names.len()`. The split must
    /// partition `0..N`.
    pub fn new(
        name: impl Into<String>,
        x: Matrix,
        labels: Vec<usize>,
        label_names: Vec<String>,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let (p, n) = x.shape();
        if p == 0 {
            return Err(Error::Data("dataset has no features".into()));
        }
        if labels.len() != n {
            return Err(dim_err!("{} samples but {} labels", n, labels.len()));
        }
        let q = label_names.len();
        if q == 0 {
            return Err(Error::Data("dataset has no classes".into()));
        }
        let t = one_hot(&labels, q)?;
        let mut seen = alloc::vec![false; n];
        for &i in train.iter().chain(&test) {
            if i >= n {
                return Err(Error::Data(alloc::format!("split index {i} out of range for {n} samples")));
            }
            if seen[i] {
                return Err(Error::Data(alloc::format!("sample {i} appears twice in the split")));
            }
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Data(alloc::format!("sample {i} is in neither split")));
        }
        let meta = DatasetMeta {
            name: name.into(),
            p,
            q,
            n_train: train.len(),
            n_test: test.len(),
            label_names,
            split_seed: None,
        };
        Ok(Self {
            x,
            t,
            labels,
            train,
            test,
            meta,
        })
    }

    /// All samples in the training split, numbered class names.
    pub fn unsplit(name: impl Into<String>, x: Matrix, labels: Vec<usize>, q: usize) -> Result<Self> {
        let n = x.cols();
        let names = (0..q).map(|c| c.to_string()).collect();
        Self::new(name, x, labels, names, (0..n).collect(), Vec::new())
    }

    /// Replaces the partition with a seeded shuffle keeping `n_train`
    /// samples for training.
    pub fn with_random_split(mut self, n_train: usize, seed: u64) -> Result<Self> {
        let (train, test) = shuffled_split(self.n(), n_train, seed)?;
        self.meta.n_train = train.len();
        self.meta.n_test = test.len();
        self.meta.split_seed = Some(seed);
        self.train = train;
        self.test = test;
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.meta.p
    }

    pub fn q(&self) -> usize {
        self.meta.q
    }

    pub fn n(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn t(&self) -> &Matrix {
        &self.t
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.meta.name = name.into();
    }

    pub fn train_x(&self) -> Matrix {
        self.x.select_columns(&self.train)
    }

    pub fn train_t(&self) -> Matrix {
        self.t.select_columns(&self.train)
    }

    pub fn test_x(&self) -> Matrix {
        self.x.select_columns(&self.test)
    }

    pub fn test_t(&self) -> Matrix {
        self.t.select_columns(&self.test)
    }

    pub fn split_labels(&self, split: Split) -> Vec<usize> {
        self.indices(split).iter().map(|&i| self.labels[i]).collect()
    }

    pub fn indices(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn split_x(&self, split: Split) -> Matrix {
        self.x.select_columns(self.indices(split))
    }

    pub fn split_t(&self, split: Split) -> Matrix {
        self.t.select_columns(self.indices(split))
    }

    /// Same dataset with every feature row transformed by `f(row, value)`.
    pub fn map_features(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        let n = out.x.cols();
        for (k, v) in out.x.as_mut_slice().iter_mut().enumerate() {
            *v = f(k / n, *v);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

/// Per-feature affine map `(x − mean) / scale`, fitted on training columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Constant features get scale 1.
    pub fn fit(data: &Dataset) -> Result<Self> {
        let idx = data.train_indices();
        if idx.is_empty() {
            return Err(Error::Data("cannot standardize without training samples".into()));
        }
        let k = idx.len() as f64;
        let x = data.x();
        let mut mean = Vec::with_capacity(data.p());
        let mut scale = Vec::with_capacity(data.p());
        for r in 0..data.p() {
            let row = x.row(r);
            let m = idx.iter().map(|&j| row[j]).sum::<f64>() / k;
            let v = idx.iter().map(|&j| (row[j] - m) * (row[j] - m)).sum::<f64>() / k;
            let s = libm::sqrt(v);
            mean.push(m);
            scale.push(if s > 0.0 { s } else { 1.0 });
        }
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if self.mean.len() != data.p() {
            return Err(dim_err!("standardizer has {} features, data has {}", self.mean.len(), data.p()));
        }
        Ok(data.map_features(|r, v| (v - self.mean[r]) / self.scale[r]))
    }
}

/// `Q` unit-variance Gaussian clusters in `ℝ^P` whose means are pairwise
/// `separation` apart (`(separation/√2)·e_k`). Sample `j` belongs to class
/// `j mod Q`; the split is a seeded 2:1 shuffle.
pub fn make_synthetic_blobs(p: usize, q: usize, n: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if p == 0 || q == 0 || n == 0 {
        return Err(Error::Parameter("blobs need P, Q, N all positive".into()));
    }
    if q > n {
        return Err(Error::Parameter(alloc::format!("{q} classes cannot fit in {n} samples")));
    }
    if q > p {
        return Err(Error::Parameter(alloc::format!("{q} equidistant means need at least {q} dimensions, got {p}")));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::Parameter("separation must be finite and nonnegative".into()));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let offset = separation / core::f64::consts::SQRT_2;
    let labels: Vec<usize> = (0..n).map(|j| j % q).collect();
    let mut x = Matrix::zeros(p, n);
    for j in 0..n {
        for i in 0..p {
            let noise: f64 = StandardNormal.sample(&mut rng);
            x[(i, j)] = noise + if i == labels[j] { offset } else { 0.0 };
        }
    }
    let names = (0..q).map(|c| c.to_string()).collect();
    let (train, test) = shuffled_split(n, default_train_count(n), seed ^ 0x5EED_5EED)?;
    let mut d = Dataset::new("blobs", x, labels, names, train, test)?;
    d.meta.split_seed = Some(seed ^ 0x5EED_5EED);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn one_hot_round_trip() {
        let t = one_hot(&[1, 0, 2], 3).unwrap();
        assert_eq!(labels_from_one_hot(&t).unwrap(), [1, 0, 2]);
        assert!(one_hot(&[3], 3).is_err());
        let mut bad = t.clone();
        bad[(0, 0)] = 1.0;
        assert!(labels_from_one_hot(&bad).is_err());
    }

    #[test]
    fn split_must_partition() {
        let x = Matrix::zeros(2, 3);
        let names = vec!["a".into(), "b".into()];
        assert!(Dataset::new("d", x.clone(), vec![0, 1, 0], names.clone(), vec![0, 1], vec![2]).is_ok());
        assert!(Dataset::new("d", x.clone(), vec![0, 1, 0], names.clone(), vec![0, 1], vec![1, 2]).is_err());
        assert!(Dataset::new("d", x.clone(), vec![0, 1, 0], names.clone(), vec![0], vec![2]).is_err());
        assert!(Dataset::new("d", x, vec![0, 1, 2], names, vec![0, 1], vec![2]).is_err());
    }

    #[test]
    fn shuffled_split_sizes() {
        let (tr, te) = shuffled_split(20000, 13333, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (13333, 6667));
        assert_eq!(default_train_count(20000), 13333);
        assert_eq!(default_train_count(600), 400);
        let (tr2, _) = shuffled_split(20000, 13333, 1).unwrap();
        assert_eq!(tr, tr2);
    }

    #[test]
    fn blobs_are_deterministic_and_balanced() {
        let a = make_synthetic_blobs(8, 3, 600, 10.0, 4).unwrap();
        let b = make_synthetic_blobs(8, 3, 600, 10.0, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.p(), a.q(), a.n()), (8, 3, 600));
        assert_eq!((a.meta().n_train, a.meta().n_test), (400, 200));
        for c in 0..3 {
            assert_eq!(a.labels().iter().filter(|&&l| l == c).count(), 200);
        }
        assert!(make_synthetic_blobs(2, 3, 600, 1.0, 0).is_err());
        assert!(make_synthetic_blobs(8, 5, 4, 1.0, 0).is_err());
    }

    #[test]
    fn standardizer_centers_training_columns() {
        let d = make_synthetic_blobs(4, 2, 90, 3.0, 1).unwrap();
        let s = Standardizer::fit(&d).unwrap();
        let z = s.apply(&d).unwrap();
        let tx = z.train_x();
        for r in 0..4 {
            let row = tx.row(r);
            let m = row.iter().sum::<f64>() / row.len() as f64;
            let v = row.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / row.len() as f64;
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
