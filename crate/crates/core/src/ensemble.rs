//! Out-of-bag bookkeeping shared by every bagged tree ensemble: votes,
//! error rates, error-by-number-of-trees curves and proximities.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{BootstrapRecord, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A bagged ensemble of classification trees.
pub trait Ensemble {
    fn n_trees(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn n_vars(&self) -> usize;
    /// Fingerprint of the training dataset.
    fn fingerprint(&self) -> u64;
    fn bootstrap(&self, k: usize) -> &BootstrapRecord;
    /// Maps raw features into the scale the trees were fitted on.
    fn prepare(&self, features: &Matrix) -> Result<Matrix>;
    /// Leaf id reached by prepared case `x` in tree `k`.
    fn tree_leaf(&self, k: usize, x: &[f64]) -> usize;
    fn tree_predict(&self, k: usize, x: &[f64]) -> usize;
}

/// Errors unless `d` is the dataset the ensemble was trained on.
pub fn check_training_data<E: Ensemble + ?Sized>(e: &E, d: &Dataset) -> Result<()> {
    let found = d.fingerprint();
    if found != e.fingerprint() {
        return Err(Error::FingerprintMismatch { expected: e.fingerprint(), found });
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Majority-vote predictions with per-case vote proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub classes: Vec<usize>,
    /// `m × G` proportions over all trees.
    pub votes: Matrix,
}

/// Predicts raw cases by majority vote over all trees (ties → lowest class id).
pub fn predict<E: Ensemble + ?Sized>(e: &E, features: &Matrix) -> Result<Prediction> {
    if features.cols() != e.n_vars() {
        return Err(Error::DimensionMismatch { expected: e.n_vars(), found: features.cols() });
    }
    let x = e.prepare(features)?;
    let g = e.n_classes();
    let k = e.n_trees() as f64;
    let mut votes = Matrix::zeros(x.rows(), g);
    for i in 0..x.rows() {
        for t in 0..e.n_trees() {
            votes[(i, e.tree_predict(t, x.row(i)))] += 1.0;
        }
        votes.row_mut(i).iter_mut().for_each(|v| *v /= k);
    }
    let classes = votes.iter_rows().map(argmax).collect();
    Ok(Prediction { classes, votes })
}

/// Each tree's predictions for its own out-of-bag cases.
#[derive(Debug, Clone, PartialEq)]
pub struct OobPredictions {
    pub n_cases: usize,
    pub n_classes: usize,
    /// `per_tree[k]` holds `(case, predicted class)` for the OOB cases of tree `k`.
    pub per_tree: Vec<Vec<(usize, usize)>>,
    labels: Vec<usize>,
}

impl OobPredictions {
    pub fn compute<E: Ensemble + ?Sized>(e: &E, d: &Dataset) -> Result<Self> {
        check_training_data(e, d)?;
        let x = e.prepare(d.features())?;
        let per_tree = (0..e.n_trees())
            .map(|k| {
                e.bootstrap(k)
                    .oob
                    .iter()
                    .map(|&i| (i, e.tree_predict(k, x.row(i))))
                    .collect()
            })
            .collect();
        Ok(OobPredictions { n_cases: d.n(), n_classes: e.n_classes(), per_tree, labels: d.labels().to_vec() })
    }

    /// Misclassification rate of each tree on its OOB cases; `None` when a tree has none.
    pub fn per_tree_error(&self) -> Vec<Option<f64>> {
        self.per_tree
            .iter()
            .map(|preds| {
                if preds.is_empty() {
                    return None;
                }
                let wrong = preds.iter().filter(|(i, c)| self.labels[*i] != *c).count();
                Some(wrong as f64 / preds.len() as f64)
            })
            .collect()
    }

    pub fn votes(&self) -> VoteMatrix {
        self.votes_upto(self.per_tree.len())
    }

    /// Votes from trees `0..t` only.
    pub fn votes_upto(&self, t: usize) -> VoteMatrix {
        let mut counts = vec![0usize; self.n_cases * self.n_classes];
        let mut oob_counts = vec![0usize; self.n_cases];
        for preds in &self.per_tree[..t] {
            for &(i, c) in preds {
                counts[i * self.n_classes + c] += 1;
                oob_counts[i] += 1;
            }
        }
        VoteMatrix::from_counts(self.n_classes, &counts, oob_counts)
    }

    /// OOB error of the ensemble of trees `0..t`, for `t = 1..=K`.
    ///
    /// Cases not yet out-of-bag in any of the first `t` trees are left out;
    /// `None` when no case has been voted on.
    pub fn error_by_ntrees(&self) -> Vec<Option<f64>> {
        let g = self.n_classes;
        let mut counts = vec![0usize; self.n_cases * g];
        let mut voted = vec![false; self.n_cases];
        let mut curve = Vec::with_capacity(self.per_tree.len());
        for preds in &self.per_tree {
            for &(i, c) in preds {
                counts[i * g + c] += 1;
                voted[i] = true;
            }
            let mut n_voted = 0usize;
            let mut wrong = 0usize;
            for i in 0..self.n_cases {
                if !voted[i] {
                    continue;
                }
                n_voted += 1;
                if argmax_counts(&counts[i * g..(i + 1) * g]) != self.labels[i] {
                    wrong += 1;
                }
            }
            curve.push((n_voted > 0).then(|| wrong as f64 / n_voted as f64));
        }
        curve
    }
}

fn argmax_counts(v: &[usize]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Per-case proportions of OOB predictions falling in each class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteMatrix {
    /// `n × G`; rows of cases never out-of-bag are all zero and flagged by `oob_counts`.
    pub votes: Matrix,
    pub oob_counts: Vec<usize>,
}

impl VoteMatrix {
    fn from_counts(g: usize, counts: &[usize], oob_counts: Vec<usize>) -> Self {
        let n = oob_counts.len();
        let mut votes = Matrix::zeros(n, g);
        for i in 0..n {
            if oob_counts[i] == 0 {
                continue;
            }
            let total = oob_counts[i] as f64;
            for c in 0..g {
                votes[(i, c)] = counts[i * g + c] as f64 / total;
            }
        }
        VoteMatrix { votes, oob_counts }
    }

    pub fn n_cases(&self) -> usize {
        self.votes.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.votes.cols()
    }

    /// Vote proportions of case `i`, or `None` if it was never out-of-bag.
    pub fn row(&self, i: usize) -> Option<&[f64]> {
        (self.oob_counts[i] > 0).then(|| self.votes.row(i))
    }

    pub fn predicted(&self, i: usize) -> Option<usize> {
        self.row(i).map(argmax)
    }

    /// Rows as optional vectors, aligned with case ids.
    pub fn to_rows(&self) -> Vec<Option<Vec<f64>>> {
        (0..self.n_cases()).map(|i| self.row(i).map(<[f64]>::to_vec)).collect()
    }

    /// Misclassification rate of the argmax vote over voted cases.
    pub fn error(&self, labels: &[usize]) -> Result<f64> {
        let mut voted = 0usize;
        let mut wrong = 0usize;
        for (i, &y) in labels.iter().enumerate() {
            if let Some(c) = self.predicted(i) {
                voted += 1;
                if c != y {
                    wrong += 1;
                }
            }
        }
        if voted == 0 {
            return Err(Error::NoOobCases);
        }
        Ok(wrong as f64 / voted as f64)
    }
}

pub fn oob_votes<E: Ensemble + ?Sized>(e: &E, d: &Dataset) -> Result<VoteMatrix> {
    Ok(OobPredictions::compute(e, d)?.votes())
}

pub fn oob_error<E: Ensemble + ?Sized>(e: &E, d: &Dataset) -> Result<f64> {
    oob_votes(e, d)?.error(d.labels())
}

pub fn oob_error_per_tree<E: Ensemble + ?Sized>(e: &E, d: &Dataset) -> Result<Vec<Option<f64>>> {
    Ok(OobPredictions::compute(e, d)?.per_tree_error())
}

pub fn oob_error_by_ntrees<E: Ensemble + ?Sized>(e: &E, d: &Dataset) -> Result<Vec<Option<f64>>> {
    Ok(OobPredictions::compute(e, d)?.error_by_ntrees())
}

/// Which trees count toward a pair's proximity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximityMode {
    /// Every tree; the denominator is `K` for all pairs.
    #[default]
    AllTrees,
    /// Only trees where both cases are out-of-bag.
    OobOnly,
}

/// Proportion of trees in which each pair of cases shares a leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix {
    n: usize,
    mode: ProximityMode,
    /// Row-major counts of trees where the pair shares a leaf.
    shared: Vec<u32>,
    /// Row-major counts of trees that could count for the pair; `None`
    /// means every tree counts.
    denominators: Option<Vec<u32>>,
    trees: u32,
}

impl ProximityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> ProximityMode {
        self.mode
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        let den = self.pair_count(i, j);
        if den == 0 {
            0.0
        } else {
            f64::from(self.shared[i * self.n + j]) / f64::from(den)
        }
    }

    pub fn shared_count(&self, i: usize, j: usize) -> u32 {
        self.shared[i * self.n + j]
    }

    pub fn pair_count(&self, i: usize, j: usize) -> u32 {
        match &self.denominators {
            Some(den) => den[i * self.n + j],
            None => self.trees,
        }
    }

    /// Number of trees accumulated.
    pub fn n_trees(&self) -> u32 {
        self.trees
    }

    pub fn to_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }
}

/// Accumulates leaf co-occurrence counts tree by tree.
///
/// Accumulators over disjoint tree sets can be merged in any order.
#[derive(Debug, Clone)]
pub struct ProximityAccumulator {
    n: usize,
    mode: ProximityMode,
    shared: Vec<u32>,
    denominators: Vec<u32>,
    trees: u32,
}

impl ProximityAccumulator {
    pub fn new(n: usize, mode: ProximityMode) -> Self {
        let den = if mode == ProximityMode::OobOnly { n * n } else { 0 };
        ProximityAccumulator { n, mode, shared: vec![0; n * n], denominators: vec![0; den], trees: 0 }
    }

    /// Adds tree `k`, given prepared features of all training cases.
    pub fn add_tree<E: Ensemble + ?Sized>(&mut self, e: &E, k: usize, prepared: &Matrix) {
        let n = self.n;
        let members: Vec<usize> = match self.mode {
            ProximityMode::AllTrees => (0..n).collect(),
            ProximityMode::OobOnly => e.bootstrap(k).oob.clone(),
        };
        let mut by_leaf: Vec<(usize, usize)> =
            members.iter().map(|&i| (e.tree_leaf(k, prepared.row(i)), i)).collect();
        by_leaf.sort_unstable();
        let mut start = 0;
        while start < by_leaf.len() {
            let leaf = by_leaf[start].0;
            let mut end = start;
            while end < by_leaf.len() && by_leaf[end].0 == leaf {
                end += 1;
            }
            // ids within a leaf group are ascending, so (a, b) has a < b
            for x in start..end {
                let a = by_leaf[x].1;
                for &(_, b) in &by_leaf[x + 1..end] {
                    self.shared[a * n + b] += 1;
                }
            }
            start = end;
        }
        if self.mode == ProximityMode::OobOnly {
            for (x, &a) in members.iter().enumerate() {
                for &b in &members[x + 1..] {
                    self.denominators[a * n + b] += 1;
                }
            }
        }
        self.trees += 1;
    }

    pub fn merge(mut self, other: ProximityAccumulator) -> Self {
        for (a, b) in self.shared.iter_mut().zip(&other.shared) {
            *a += b;
        }
        for (a, b) in self.denominators.iter_mut().zip(&other.denominators) {
            *a += b;
        }
        self.trees += other.trees;
        self
    }

    pub fn finish(self) -> ProximityMatrix {
        let n = self.n;
        let mut shared = self.shared;
        let mut denominators = match self.mode {
            ProximityMode::AllTrees => None,
            ProximityMode::OobOnly => Some(self.denominators),
        };
        for i in 0..n {
            for j in 0..i {
                shared[i * n + j] = shared[j * n + i];
            }
            shared[i * n + i] = self.trees;
        }
        if let Some(den) = denominators.as_mut() {
            for i in 0..n {
                for j in 0..i {
                    den[i * n + j] = den[j * n + i];
                }
                den[i * n + i] = self.trees;
            }
        }
        ProximityMatrix { n, mode: self.mode, shared, denominators, trees: self.trees }
    }
}

pub fn proximity<E: Ensemble + ?Sized>(e: &E, d: &Dataset, mode: ProximityMode) -> Result<ProximityMatrix> {
    check_training_data(e, d)?;
    let x = e.prepare(d.features())?;
    let mut acc = ProximityAccumulator::new(d.n(), mode);
    for k in 0..e.n_trees() {
        acc.add_tree(e, k, &x);
    }
    Ok(acc.finish())
}
