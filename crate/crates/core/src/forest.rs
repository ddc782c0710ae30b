//! Projection pursuit forests: bagged [`PPTreeModel`]s.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{standardize, BootstrapKind, BootstrapRecord, Dataset, StandardizationParams};
use crate::ensemble::{self, Ensemble, OobPredictions, Prediction, ProximityMatrix, ProximityMode, VoteMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pptree::{fit_pptree, PPTreeModel};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub vars_per_node: usize,
    pub seed: u64,
    #[serde(default)]
    pub bootstrap: BootstrapKind,
    /// Standardize every variable once, over the full training data.
    #[serde(default = "default_true")]
    pub standardize: bool,
}

fn default_true() -> bool {
    true
}

impl ForestConfig {
    pub fn new(n_trees: usize, vars_per_node: usize, seed: u64) -> Self {
        ForestConfig { n_trees, vars_per_node, seed, bootstrap: BootstrapKind::Stratified, standardize: true }
    }

    /// Defaults: 500 trees, `⌈√p⌉` variables per node.
    pub fn defaults_for(p: usize, seed: u64) -> Self {
        let mut v = 1;
        while v * v < p {
            v += 1;
        }
        ForestConfig::new(500, v, seed)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.vars_per_node == 0 || self.vars_per_node > p {
            return Err(Error::InvalidConfig(alloc::format!(
                "vars_per_node must be in 1..={p}, got {}",
                self.vars_per_node
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PPForestModel {
    pub config: ForestConfig,
    pub standardization: Option<StandardizationParams>,
    pub class_names: Vec<String>,
    pub var_names: Vec<String>,
    #[serde(with = "crate::serde_hex")]
    pub fingerprint: u64,
    pub trees: Vec<PPTreeModel>,
    pub bootstrap: Vec<BootstrapRecord>,
    /// Misclassification rate of each tree on its own OOB cases (`1 - acc_k`).
    pub tree_oob_error: Vec<Option<f64>>,
}

/// One tree together with its resample and OOB error.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedTree {
    pub tree: PPTreeModel,
    pub bootstrap: BootstrapRecord,
    pub oob_error: Option<f64>,
}

/// Shared state for fitting the trees of one forest, in any order.
///
/// Tree `k` draws all of its randomness from stream `k` of the configured
/// seed, so the result does not depend on which worker fits which tree.
pub struct ForestFitter<'a> {
    data: &'a Dataset,
    train: Dataset,
    standardization: Option<StandardizationParams>,
    config: ForestConfig,
}

impl<'a> ForestFitter<'a> {
    pub fn new(d: &'a Dataset, config: ForestConfig) -> Result<Self> {
        config.validate(d.p())?;
        let (train, standardization) = if config.standardize {
            let (s, params) = standardize(d)?;
            (s, Some(params))
        } else {
            (d.clone(), None)
        };
        Ok(ForestFitter { data: d, train, standardization, config })
    }

    pub fn n_trees(&self) -> usize {
        self.config.n_trees
    }

    pub fn fit_tree(&self, k: usize) -> Result<FittedTree> {
        let mut rng = stream_rng(self.config.seed, k as u64);
        let bootstrap = BootstrapRecord::draw(&self.train, self.config.bootstrap, &mut rng);
        let tree = fit_pptree(&self.train, &bootstrap.in_bag, self.config.vars_per_node, k, &mut rng)?;
        let oob_error = if bootstrap.oob.is_empty() {
            None
        } else {
            let wrong = bootstrap
                .oob
                .iter()
                .filter(|&&i| tree.predict(self.train.row(i)) != self.train.labels()[i])
                .count();
            Some(wrong as f64 / bootstrap.oob.len() as f64)
        };
        Ok(FittedTree { tree, bootstrap, oob_error })
    }

    /// Builds the model from trees `0..K` given in tree-id order.
    pub fn assemble(self, fitted: Vec<FittedTree>) -> Result<PPForestModel> {
        if fitted.len() != self.config.n_trees
            || fitted.iter().enumerate().any(|(k, f)| f.tree.tree_id != k)
        {
            return Err(Error::InvalidConfig("fitted trees must be complete and in tree-id order".into()));
        }
        let mut trees = Vec::with_capacity(fitted.len());
        let mut bootstrap = Vec::with_capacity(fitted.len());
        let mut tree_oob_error = Vec::with_capacity(fitted.len());
        for f in fitted {
            trees.push(f.tree);
            bootstrap.push(f.bootstrap);
            tree_oob_error.push(f.oob_error);
        }
        Ok(PPForestModel {
            config: self.config,
            standardization: self.standardization,
            class_names: self.data.class_names().to_vec(),
            var_names: self.data.var_names().to_vec(),
            fingerprint: self.data.fingerprint(),
            trees,
            bootstrap,
            tree_oob_error,
        })
    }
}

/// Fits a forest sequentially.
pub fn fit_forest(d: &Dataset, config: ForestConfig) -> Result<PPForestModel> {
    let fitter = ForestFitter::new(d, config)?;
    let fitted = (0..fitter.n_trees()).map(|k| fitter.fit_tree(k)).collect::<Result<Vec<_>>>()?;
    fitter.assemble(fitted)
}

impl PPForestModel {
    /// Majority vote over all trees; ties go to the lowest class id.
    pub fn predict(&self, features: &Matrix) -> Result<Prediction> {
        ensemble::predict(self, features)
    }

    /// `acc_k = 1 - tree_oob_error[k]`.
    pub fn tree_accuracy(&self) -> Vec<Option<f64>> {
        self.tree_oob_error.iter().map(|e| e.map(|e| 1.0 - e)).collect()
    }

    /// The training data in the scale the trees were fitted on.
    pub fn training_view(&self, d: &Dataset) -> Result<Dataset> {
        ensemble::check_training_data(self, d)?;
        d.with_features(self.prepare(d.features())?)
    }

    pub fn oob_predictions(&self, d: &Dataset) -> Result<OobPredictions> {
        OobPredictions::compute(self, d)
    }

    pub fn oob_votes(&self, d: &Dataset) -> Result<VoteMatrix> {
        ensemble::oob_votes(self, d)
    }

    pub fn oob_error(&self, d: &Dataset) -> Result<f64> {
        ensemble::oob_error(self, d)
    }

    pub fn oob_error_per_tree(&self, d: &Dataset) -> Result<Vec<Option<f64>>> {
        ensemble::oob_error_per_tree(self, d)
    }

    pub fn oob_error_by_ntrees(&self, d: &Dataset) -> Result<Vec<Option<f64>>> {
        ensemble::oob_error_by_ntrees(self, d)
    }

    pub fn proximity(&self, d: &Dataset, mode: ProximityMode) -> Result<ProximityMatrix> {
        ensemble::proximity(self, d, mode)
    }
}

impl Ensemble for PPForestModel {
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
        match &self.standardization {
            Some(params) => params.apply(features),
            None => Ok(features.clone()),
        }
    }

    fn tree_leaf(&self, k: usize, x: &[f64]) -> usize {
        self.trees[k].leaf_for(x).id
    }

    fn tree_predict(&self, k: usize, x: &[f64]) -> usize {
        self.trees[k].predict(x)
    }
}
