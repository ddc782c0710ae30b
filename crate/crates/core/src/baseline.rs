//! Axis-aligned random forest (Gini CART trees grown to purity), used as the
//! comparison baseline for projection pursuit forests.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BootstrapKind, BootstrapRecord, Dataset};
use crate::ensemble::{self, Ensemble, Prediction, ProximityMatrix, ProximityMode, VoteMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CartNode {
    /// Cases with `x[var] <= threshold` go to `left`.
    Split { var: usize, threshold: f64, left: usize, right: usize },
    Leaf { class: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartTree {
    pub tree_id: usize,
    /// Root first; children are indices into this list.
    pub nodes: Vec<CartNode>,
}

impl CartTree {
    /// Index of the leaf node reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                CartNode::Split { var, threshold, left, right } => {
                    at = if x[*var] <= *threshold { *left } else { *right };
                }
                CartNode::Leaf { .. } => return at,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        match self.nodes[self.leaf_index(x)] {
            CartNode::Leaf { class } => class,
            CartNode::Split { .. } => unreachable!("leaf_index stops at a leaf"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, CartNode::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub n_trees: usize,
    /// Variables tried at each split.
    pub mtry: usize,
    pub seed: u64,
    #[serde(default)]
    pub bootstrap: BootstrapKind,
}

impl BaselineConfig {
    pub fn new(n_trees: usize, mtry: usize, seed: u64) -> Self {
        BaselineConfig { n_trees, mtry, seed, bootstrap: BootstrapKind::Stratified }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineForestModel {
    pub config: BaselineConfig,
    pub class_names: Vec<String>,
    pub var_names: Vec<String>,
    #[serde(with = "crate::serde_hex")]
    pub fingerprint: u64,
    pub trees: Vec<CartTree>,
    pub bootstrap: Vec<BootstrapRecord>,
    pub tree_oob_error: Vec<Option<f64>>,
}

pub struct FittedCart {
    pub tree: CartTree,
    pub bootstrap: BootstrapRecord,
    pub oob_error: Option<f64>,
}

/// Fits baseline trees independently; tree `k` uses stream `k` of the seed.
pub struct BaselineFitter<'a> {
    data: &'a Dataset,
    config: BaselineConfig,
}

impl<'a> BaselineFitter<'a> {
    pub fn new(d: &'a Dataset, config: BaselineConfig) -> Result<Self> {
        if config.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
        }
        if config.mtry == 0 || config.mtry > d.p() {
            return Err(Error::InvalidConfig(alloc::format!(
                "mtry must be in 1..={}, got {}",
                d.p(),
                config.mtry
            )));
        }
        Ok(BaselineFitter { data: d, config })
    }

    pub fn n_trees(&self) -> usize {
        self.config.n_trees
    }

    pub fn fit_tree(&self, k: usize) -> FittedCart {
        let d = self.data;
        let mut rng = stream_rng(self.config.seed, k as u64);
        let bootstrap = BootstrapRecord::draw(d, self.config.bootstrap, &mut rng);
        let tree = grow_cart(d, &bootstrap.in_bag, self.config.mtry, k, &mut rng);
        let oob_error = (!bootstrap.oob.is_empty()).then(|| {
            let wrong = bootstrap.oob.iter().filter(|&&i| tree.predict(d.row(i)) != d.labels()[i]).count();
            wrong as f64 / bootstrap.oob.len() as f64
        });
        FittedCart { tree, bootstrap, oob_error }
    }

    pub fn assemble(self, fitted: Vec<FittedCart>) -> Result<BaselineForestModel> {
        if fitted.len() != self.config.n_trees || fitted.iter().enumerate().any(|(k, f)| f.tree.tree_id != k) {
            return Err(Error::InvalidConfig("fitted trees must be complete and in tree-id order".into()));
        }
        let mut trees = Vec::new();
        let mut bootstrap = Vec::new();
        let mut tree_oob_error = Vec::new();
        for f in fitted {
            trees.push(f.tree);
            bootstrap.push(f.bootstrap);
            tree_oob_error.push(f.oob_error);
        }
        Ok(BaselineForestModel {
            config: self.config,
            class_names: self.data.class_names().to_vec(),
            var_names: self.data.var_names().to_vec(),
            fingerprint: self.data.fingerprint(),
            trees,
            bootstrap,
            tree_oob_error,
        })
    }
}

pub fn fit_baseline_rf(d: &Dataset, config: BaselineConfig) -> Result<BaselineForestModel> {
    let fitter = BaselineFitter::new(d, config)?;
    let fitted = (0..fitter.n_trees()).map(|k| fitter.fit_tree(k)).collect();
    fitter.assemble(fitted)
}

impl BaselineForestModel {
    pub fn predict(&self, features: &Matrix) -> Result<Prediction> {
        ensemble::predict(self, features)
    }

    pub fn oob_votes(&self, d: &Dataset) -> Result<VoteMatrix> {
        ensemble::oob_votes(self, d)
    }

    pub fn oob_error(&self, d: &Dataset) -> Result<f64> {
        ensemble::oob_error(self, d)
    }

    pub fn oob_error_by_ntrees(&self, d: &Dataset) -> Result<Vec<Option<f64>>> {
        ensemble::oob_error_by_ntrees(self, d)
    }

    pub fn proximity(&self, d: &Dataset, mode: ProximityMode) -> Result<ProximityMatrix> {
        ensemble::proximity(self, d, mode)
    }
}

impl Ensemble for BaselineForestModel {
    fn n_trees(&self) -> usize {
        self.trees.len()
    }

    fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    fn bootstrap(&self, k: usize) -> &BootstrapRecord {
        &self.bootstrap[k]
    }

    fn prepare(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.n_vars() {
            return Err(Error::DimensionMismatch { expected: self.n_vars(), found: features.cols() });
        }
        Ok(features.clone())
    }

    fn tree_leaf(&self, k: usize, x: &[f64]) -> usize {
        self.trees[k].leaf_index(x)
    }

    fn tree_predict(&self, k: usize, x: &[f64]) -> usize {
        self.trees[k].predict(x)
    }
}

struct BestSplit {
    var: usize,
    threshold: f64,
    score: f64,
}

fn grow_cart<R: Rng + ?Sized>(d: &Dataset, cases: &[usize], mtry: usize, tree_id: usize, rng: &mut R) -> CartTree {
    let g = d.n_classes();
    let mut nodes = vec![CartNode::Leaf { class: 0 }];
    let mut stack = vec![(0usize, cases.to_vec())];
    let mut vars: Vec<usize> = (0..d.p()).collect();
    while let Some((at, cases)) = stack.pop() {
        let counts = class_counts(d, &cases, g);
        let majority = majority(&counts);
        if counts[majority] == cases.len() {
            nodes[at] = CartNode::Leaf { class: majority };
            continue;
        }
        vars.shuffle(rng);
        // keep drawing variables past mtry only while none of them can split
        let mut best: Option<BestSplit> = None;
        for (tried, &var) in vars.iter().enumerate() {
            if tried >= mtry && best.is_some() {
                break;
            }
            if let Some(s) = best_split_on(d, &cases, var, g) {
                if best.as_ref().is_none_or(|b| s.score > b.score) {
                    best = Some(s);
                }
            }
        }
        let Some(best) = best else {
            nodes[at] = CartNode::Leaf { class: majority };
            continue;
        };
        let (left_cases, right_cases): (Vec<usize>, Vec<usize>) =
            cases.iter().partition(|&&i| d.row(i)[best.var] <= best.threshold);
        let left = nodes.len();
        nodes.push(CartNode::Leaf { class: 0 });
        let right = nodes.len();
        nodes.push(CartNode::Leaf { class: 0 });
        nodes[at] = CartNode::Split { var: best.var, threshold: best.threshold, left, right };
        stack.push((right, right_cases));
        stack.push((left, left_cases));
    }
    CartTree { tree_id, nodes }
}

fn class_counts(d: &Dataset, cases: &[usize], g: usize) -> Vec<usize> {
    let mut counts = vec![0; g];
    for &i in cases {
        counts[d.labels()[i]] += 1;
    }
    counts
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Best Gini split on one variable; `None` if the variable is constant here.
///
/// The score is `Σ n_lc²/n_l + Σ n_rc²/n_r`, which is maximal where the
/// weighted Gini impurity of the children is minimal.
fn best_split_on(d: &Dataset, cases: &[usize], var: usize, g: usize) -> Option<BestSplit> {
    let mut vals: Vec<(f64, usize)> = cases.iter().map(|&i| (d.row(i)[var], d.labels()[i])).collect();
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = vals.len();
    let mut right = vec![0usize; g];
    for &(_, y) in &vals {
        right[y] += 1;
    }
    let mut left = vec![0usize; g];
    let mut left_sq = 0.0;
    let mut right_sq: f64 = right.iter().map(|&c| (c * c) as f64).sum();
    let mut best: Option<BestSplit> = None;
    for i in 0..n - 1 {
        let y = vals[i].1;
        left_sq += (2 * left[y] + 1) as f64;
        left[y] += 1;
        right_sq -= (2 * right[y] - 1) as f64;
        right[y] -= 1;
        let (lo, hi) = (vals[i].0, vals[i + 1].0);
        if !(hi > lo) {
            continue;
        }
        let nl = (i + 1) as f64;
        let score = left_sq / nl + right_sq / (n as f64 - nl);
        if best.as_ref().is_none_or(|b| score > b.score) {
            let mid = lo / 2.0 + hi / 2.0;
            let threshold = if mid < hi { mid } else { lo };
            best = Some(BestSplit { var, threshold, score });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn single_variable_threshold_is_recovered() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [6.0], [7.0], [8.0]]).unwrap();
        let d = Dataset::from_labels(x, &["a", "a", "a", "b", "b", "b"], names(1)).unwrap();
        let ids: Vec<usize> = (0..6).collect();
        let tree = grow_cart(&d, &ids, 1, 0, &mut stream_rng(0, 0));
        match tree.nodes[0] {
            CartNode::Split { threshold, .. } => assert!(threshold > 2.0 && threshold < 6.0),
            _ => panic!("expected a split"),
        }
        assert_eq!(tree.n_leaves(), 2);
    }

    #[test]
    fn trees_grow_to_purity() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [0.0, 0.0], [1.0, 1.0]]).unwrap();
        let d = Dataset::from_labels(x, &["a", "a", "b", "b"], names(2)).unwrap();
        let ids: Vec<usize> = (0..4).collect();
        let tree = grow_cart(&d, &ids, 1, 0, &mut stream_rng(1, 0));
        for i in 0..4 {
            assert_eq!(tree.predict(d.row(i)), d.labels()[i]);
        }
    }

    #[test]
    fn indistinguishable_cases_become_majority_leaf() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let d = Dataset::from_labels(x, &["a", "b", "b"], names(1)).unwrap();
        let tree = grow_cart(&d, &[0, 1, 2], 1, 0, &mut stream_rng(0, 0));
        assert_eq!(tree.nodes, vec![CartNode::Leaf { class: 1 }]);
    }
}
