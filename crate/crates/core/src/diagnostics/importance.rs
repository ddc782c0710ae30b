use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::ensemble::{check_training_data, Ensemble};
use crate::error::Result;
use crate::forest::PPForestModel;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMeasure {
    /// Drop in OOB accuracy after permuting a variable.
    Permuted,
    /// Per-tree `Σ_nd |α_nd| / cl_nd`.
    CoefTree,
    /// Mean of the per-tree coefficient importances.
    Ppforest1,
    /// Accuracy- and index-weighted mean of absolute coefficients.
    Ppforest2,
}

/// Per-tree and forest-level importance of every variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub measure: ImportanceMeasure,
    /// `K × p`.
    pub per_tree: Vec<Vec<f64>>,
    /// Length `p`.
    pub global: Vec<f64>,
}

/// Permutation importance computed on each tree's OOB cases.
///
/// For tree `k` and variable `j`, the OOB values of `j` are shuffled and
/// `(correct − correct after shuffling) / |OOB_k|` is recorded. The global
/// value averages over trees that have OOB cases; trees without any get a
/// zero row and do not count toward the average.
pub fn permuted_importance<E: Ensemble + ?Sized>(e: &E, d: &Dataset, seed: u64) -> Result<ImportanceTable> {
    check_training_data(e, d)?;
    let x = e.prepare(d.features())?;
    let p = d.p();
    let y = d.labels();
    let mut per_tree = Vec::with_capacity(e.n_trees());
    let mut sum = vec![0.0; p];
    let mut used = 0usize;
    let mut row = vec![0.0; p];
    for k in 0..e.n_trees() {
        let oob = &e.bootstrap(k).oob;
        if oob.is_empty() {
            per_tree.push(vec![0.0; p]);
            continue;
        }
        let mut rng = stream_rng(seed, k as u64);
        let base = oob.iter().filter(|&&i| e.tree_predict(k, x.row(i)) == y[i]).count();
        let mut order: Vec<usize> = (0..oob.len()).collect();
        let mut imp = vec![0.0; p];
        for (j, slot) in imp.iter_mut().enumerate() {
            order.shuffle(&mut rng);
            let mut correct = 0usize;
            for (a, &i) in oob.iter().enumerate() {
                row.copy_from_slice(x.row(i));
                row[j] = x[(oob[order[a]], j)];
                if e.tree_predict(k, &row) == y[i] {
                    correct += 1;
                }
            }
            *slot = (base as f64 - correct as f64) / oob.len() as f64;
        }
        for (s, v) in sum.iter_mut().zip(&imp) {
            *s += v;
        }
        used += 1;
        per_tree.push(imp);
    }
    let global = if used == 0 { vec![0.0; p] } else { sum.iter().map(|s| s / used as f64).collect() };
    Ok(ImportanceTable { measure: ImportanceMeasure::Permuted, per_tree, global })
}

/// The two projection-coefficient importances of a forest.
///
/// `ppforest1` averages the per-tree `Σ_nd |α_nd| / cl_nd` over the `K` trees.
/// `ppforest2` is `Σ_k acc_k · (1/nn_k) Σ_nd Ix_nd |α_nd| / K`; its `per_tree`
/// rows hold the summand of each tree. A tree with no OOB cases has no
/// accuracy and contributes zero to `ppforest2`.
pub fn forest_coef_importance(f: &PPForestModel) -> (ImportanceTable, ImportanceTable) {
    let p = f.var_names.len();
    let k = f.trees.len() as f64;
    let mut tree_rows = Vec::with_capacity(f.trees.len());
    let mut weighted_rows = Vec::with_capacity(f.trees.len());
    for (tree, acc) in f.trees.iter().zip(f.tree_accuracy()) {
        tree_rows.push(tree.coef_importance());
        let mut w = vec![0.0; p];
        let nn = tree.nodes.len();
        if let (Some(acc), true) = (acc, nn > 0) {
            for node in &tree.nodes {
                let ix = node.index_value.value();
                for (&j, c) in node.projection.var_ids.iter().zip(&node.projection.coeffs) {
                    w[j] += ix * c.abs() / nn as f64;
                }
            }
            w.iter_mut().for_each(|v| *v *= acc);
        }
        weighted_rows.push(w);
    }
    let column_mean = |rows: &[Vec<f64>]| -> Vec<f64> {
        (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / k).collect()
    };
    let ppforest1 = ImportanceTable {
        measure: ImportanceMeasure::Ppforest1,
        global: column_mean(&tree_rows),
        per_tree: tree_rows,
    };
    let ppforest2 = ImportanceTable {
        measure: ImportanceMeasure::Ppforest2,
        global: column_mean(&weighted_rows),
        per_tree: weighted_rows,
    };
    (ppforest1, ppforest2)
}

/// Nodes per tree included in [`node_importance_export`].
pub const TOP_NODES: usize = 3;

/// Absolute projection coefficient of one sampled variable at one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeImportanceRecord {
    pub tree_id: usize,
    /// 1-based node id in fit order.
    pub node_rank: usize,
    pub var_id: usize,
    pub var_name: String,
    pub abs_coeff: f64,
    pub tree_oob_error: Option<f64>,
}

/// One record per (tree, node among the first [`TOP_NODES`], sampled variable).
pub fn node_importance_export(f: &PPForestModel) -> Vec<NodeImportanceRecord> {
    let mut out = Vec::new();
    for (tree, err) in f.trees.iter().zip(&f.tree_oob_error) {
        for node in tree.nodes.iter().take(TOP_NODES) {
            for (&j, c) in node.projection.var_ids.iter().zip(&node.projection.coeffs) {
                out.push(NodeImportanceRecord {
                    tree_id: tree.tree_id,
                    node_rank: node.id,
                    var_id: j,
                    var_name: f.var_names[j].clone(),
                    abs_coeff: c.abs(),
                    tree_oob_error: *err,
                });
            }
        }
    }
    out
}
