//! Classification datasets, standardization, and bootstrap resampling.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;

/// A numeric feature matrix with integer class labels.
///
/// Class ids are `0..n_classes()`; `class_names[id]` is the original label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    class_names: Vec<String>,
    var_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        class_names: Vec<String>,
        var_names: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = (features.rows(), features.cols());
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 cases, got {n}")));
        }
        if p < 1 {
            return Err(Error::InvalidData("need at least one predictor".into()));
        }
        if labels.len() != n {
            return Err(Error::InvalidData(format!("{} labels for {n} cases", labels.len())));
        }
        if var_names.len() != p {
            return Err(Error::InvalidData(format!(
                "{} variable names for {p} columns",
                var_names.len()
            )));
        }
        let g = class_names.len();
        if g < 2 {
            return Err(Error::InvalidData(format!("need at least 2 classes, got {g}")));
        }
        let mut seen = vec![false; g];
        for (i, &y) in labels.iter().enumerate() {
            if y >= g {
                return Err(Error::InvalidData(format!("case {i} has class id {y} >= {g}")));
            }
            seen[y] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidData(format!("class `{}` has no cases", class_names[c])));
        }
        for i in 0..n {
            if let Some(j) = features.row(i).iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "non-finite value at case {i}, variable `{}`",
                    var_names[j]
                )));
            }
        }
        Ok(Dataset { features, labels, class_names, var_names })
    }

    /// Builds a dataset from string labels, numbering classes by first appearance.
    pub fn from_labels<S: AsRef<str>>(
        features: Matrix,
        labels: &[S],
        var_names: Vec<String>,
    ) -> Result<Self> {
        let mut class_names: Vec<String> = Vec::new();
        let mut lookup: BTreeMap<&str, usize> = BTreeMap::new();
        let mut ids = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            let id = *lookup.entry(l).or_insert_with(|| {
                class_names.push(l.into());
                class_names.len() - 1
            });
            ids.push(id);
        }
        Dataset::new(features, ids, class_names, var_names)
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn p(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Same labels and names, different (same-shaped) features.
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        if features.rows() != self.n() || features.cols() != self.p() {
            return Err(Error::DimensionMismatch { expected: self.p(), found: features.cols() });
        }
        Ok(Dataset { features, ..self.clone() })
    }

    /// Case ids of each class, in ascending order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.n_classes()];
        for (i, &y) in self.labels.iter().enumerate() {
            members[y].push(i);
        }
        members
    }

    /// FNV-1a hash of the shape, feature bits, and labels.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(PRIME);
            }
        };
        eat(self.n() as u64);
        eat(self.p() as u64);
        for v in self.features.as_slice() {
            eat(v.to_bits());
        }
        for &y in &self.labels {
            eat(y as u64);
        }
        h
    }
}

/// Per-variable location and scale used to standardize features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl StandardizationParams {
    pub fn apply_row(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (x[j] - self.means[j]) / self.sds[j];
        }
    }

    pub fn apply(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.means.len() {
            return Err(Error::DimensionMismatch { expected: self.means.len(), found: m.cols() });
        }
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            self.apply_row(m.row(i), out.row_mut(i));
        }
        Ok(out)
    }

    pub fn invert(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.means.len() {
            return Err(Error::DimensionMismatch { expected: self.means.len(), found: m.cols() });
        }
        let mut out = m.clone();
        for i in 0..m.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.sds[j] + self.means[j];
            }
        }
        Ok(out)
    }
}

/// Centers each column to mean 0 and scales it to unit sample standard deviation.
pub fn standardize(d: &Dataset) -> Result<(Dataset, StandardizationParams)> {
    let (n, p) = (d.n(), d.p());
    let mut means = vec![0.0; p];
    let mut sds = vec![0.0; p];
    for j in 0..p {
        let col = d.features.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = libm::sqrt(ss / (n - 1) as f64);
        // relative test so that a constant column with rounding noise in the mean still fails
        let scale = col.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if !(sd > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::ConstantColumn { variable: d.var_names[j].clone() });
        }
        means[j] = mean;
        sds[j] = sd;
    }
    let params = StandardizationParams { means, sds };
    let features = params.apply(&d.features)?;
    Ok((d.with_features(features)?, params))
}

/// How bootstrap samples are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapKind {
    /// Resample within each class, preserving per-class counts.
    #[default]
    Stratified,
    /// Resample `n` cases from the whole dataset.
    Plain,
}

/// One bootstrap resample and its out-of-bag complement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapRecord {
    /// Drawn case ids, sorted, with repeats.
    pub in_bag: Vec<usize>,
    /// Ids never drawn, sorted.
    pub oob: Vec<usize>,
}

impl BootstrapRecord {
    pub fn draw<R: Rng + ?Sized>(d: &Dataset, kind: BootstrapKind, rng: &mut R) -> Self {
        let n = d.n();
        let mut in_bag = Vec::with_capacity(n);
        match kind {
            BootstrapKind::Stratified => {
                for members in d.class_members() {
                    for _ in 0..members.len() {
                        in_bag.push(members[rng.random_range(0..members.len())]);
                    }
                }
            }
            BootstrapKind::Plain => {
                for _ in 0..n {
                    in_bag.push(rng.random_range(0..n));
                }
            }
        }
        in_bag.sort_unstable();
        let mut drawn = vec![false; n];
        for &i in &in_bag {
            drawn[i] = true;
        }
        let oob = (0..n).filter(|&i| !drawn[i]).collect();
        BootstrapRecord { in_bag, oob }
    }

    /// Distinct in-bag ids.
    pub fn in_bag_distinct(&self) -> Vec<usize> {
        let mut ids = self.in_bag.clone();
        ids.dedup();
        ids
    }

    /// Membership mask over `0..n`.
    pub fn oob_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.oob {
            mask[i] = true;
        }
        mask
    }
}

/// Stratified bootstrap, deterministic in `seed`.
pub fn stratified_bootstrap(d: &Dataset, seed: u64) -> BootstrapRecord {
    BootstrapRecord::draw(d, BootstrapKind::Stratified, &mut stream_rng(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    fn toy() -> Dataset {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 7.0], [3.0, 9.0], [4.0, 4.0]]).unwrap();
        Dataset::from_labels(x, &["a", "b", "a", "c"], names(2)).unwrap()
    }

    #[test]
    fn labels_follow_first_appearance() {
        let d = toy();
        assert_eq!(d.labels(), &[0, 1, 0, 2]);
        assert_eq!(d.class_names(), &["a".to_string(), "b".into(), "c".into()]);
    }

    #[test]
    fn minimal_dataset_is_valid() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let d = Dataset::from_labels(x, &["u", "v"], names(1)).unwrap();
        assert_eq!((d.n(), d.p(), d.n_classes()), (2, 1, 2));
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(Dataset::from_labels(x, &["u", "u"], names(1)).is_err());
    }

    #[test]
    fn empty_class_and_nan_are_rejected() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let err = Dataset::new(x.clone(), vec![0, 0], vec!["a".into(), "b".into()], names(1));
        assert!(err.is_err());
        let bad = Matrix::from_rows(&[[0.0], [f64::NAN]]).unwrap();
        assert!(Dataset::from_labels(bad, &["a", "b"], names(1)).is_err());
    }

    #[test]
    fn standardize_small_column() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let d = Dataset::from_labels(x, &["a", "b", "a"], names(1)).unwrap();
        let (s, params) = standardize(&d).unwrap();
        assert_eq!(s.features().column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(params.means, vec![2.0]);
        assert_eq!(params.sds, vec![1.0]);
    }

    #[test]
    fn standardize_is_idempotent() {
        let (s, _) = standardize(&toy()).unwrap();
        let (s2, params) = standardize(&s).unwrap();
        for j in 0..2 {
            assert!(params.means[j].abs() < 1e-12);
            assert!((params.sds[j] - 1.0).abs() < 1e-12);
        }
        for (a, b) in s.features().as_slice().iter().zip(s2.features().as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_names_the_variable() {
        let x = Matrix::from_rows(&[[1.0, 3.0], [2.0, 3.0], [5.0, 3.0]]).unwrap();
        let d = Dataset::from_labels(x, &["a", "b", "a"], names(2)).unwrap();
        assert_eq!(standardize(&d).unwrap_err(), Error::ConstantColumn { variable: "x1".into() });
    }

    #[test]
    fn bootstrap_partitions_ids() {
        let d = toy();
        for seed in 0..50 {
            let b = stratified_bootstrap(&d, seed);
            assert_eq!(b.in_bag.len(), d.n());
            let distinct = b.in_bag_distinct();
            assert!(distinct.iter().all(|i| !b.oob.contains(i)));
            assert_eq!(distinct.len() + b.oob.len(), d.n());
        }
    }
}
