use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::importance::{
    forest_coef_importance, node_importance_export, permuted_importance, ImportanceTable,
    NodeImportanceRecord,
};
use super::mds::{mds_embed, Dissimilarity, MdsEmbedding};
use super::roc::{roc_one_vs_all, RocCurve};
use super::simplex::{simplex_coords, SimplexCoords};
use crate::baseline::BaselineForestModel;
use crate::data::Dataset;
use crate::ensemble::{proximity, Ensemble, OobPredictions, ProximityMode};
use crate::error::Result;
use crate::forest::PPForestModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleOptions {
    /// MDS output dimension; `None` means `G − 1`.
    pub mds_dims: Option<usize>,
    pub dissimilarity: Dissimilarity,
    pub proximity_mode: ProximityMode,
    pub importance_seed: u64,
    /// Largest `n` for which proximity (and hence MDS) is computed.
    pub max_proximity_n: usize,
}

impl Default for BundleOptions {
    fn default() -> Self {
        BundleOptions {
            mds_dims: None,
            dissimilarity: Dissimilarity::OneMinus,
            proximity_mode: ProximityMode::AllTrees,
            importance_seed: 0,
            max_proximity_n: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSection {
    pub permuted: ImportanceTable,
    /// Projection-coefficient measures; absent for axis-aligned forests.
    pub ppforest1: Option<ImportanceTable>,
    pub ppforest2: Option<ImportanceTable>,
    pub node_records: Vec<NodeImportanceRecord>,
}

/// Everything a client needs to draw the case, model and comparison views.
///
/// Per-case arrays are indexed by case id (row order of the training data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsBundle {
    /// `"ppf"` or `"rf"`.
    pub model_kind: String,
    pub class_names: Vec<String>,
    pub var_names: Vec<String>,
    pub labels: Vec<usize>,
    /// `n × G` OOB vote proportions; `null` rows were never out-of-bag.
    pub votes: Vec<Option<Vec<f64>>>,
    pub oob_counts: Vec<usize>,
    pub oob_error: Option<f64>,
    pub mds: Option<MdsEmbedding>,
    pub simplex: SimplexCoords,
    pub importance: ImportanceSection,
    pub roc: Vec<RocCurve>,
    /// OOB error of the first `t` trees, `t = 1..=K`.
    pub error_curve: Vec<Option<f64>>,
    pub per_tree_error: Vec<Option<f64>>,
}

struct Common {
    votes: Vec<Option<Vec<f64>>>,
    oob_counts: Vec<usize>,
    oob_error: Option<f64>,
    mds: Option<MdsEmbedding>,
    simplex: SimplexCoords,
    roc: Vec<RocCurve>,
    error_curve: Vec<Option<f64>>,
    per_tree_error: Vec<Option<f64>>,
}

fn common<E: Ensemble + ?Sized>(e: &E, d: &Dataset, opts: &BundleOptions) -> Result<Common> {
    let oob = OobPredictions::compute(e, d)?;
    let votes = oob.votes();
    let g = d.n_classes();
    let mds = if d.n() <= opts.max_proximity_n {
        let pm = proximity(e, d, opts.proximity_mode)?;
        let dims = opts.mds_dims.unwrap_or(g - 1).clamp(1, d.n() - 1);
        Some(mds_embed(&pm, dims, opts.dissimilarity)?)
    } else {
        None
    };
    // classes without both voted positives and negatives have no curve
    let roc = (0..g).filter_map(|c| roc_one_vs_all(&votes, d.labels(), c).ok()).collect();
    Ok(Common {
        votes: votes.to_rows(),
        oob_counts: votes.oob_counts.clone(),
        oob_error: votes.error(d.labels()).ok(),
        mds,
        simplex: simplex_coords(&votes),
        roc,
        error_curve: oob.error_by_ntrees(),
        per_tree_error: oob.per_tree_error(),
    })
}

fn assemble(kind: &str, d: &Dataset, c: Common, importance: ImportanceSection) -> DiagnosticsBundle {
    DiagnosticsBundle {
        model_kind: kind.into(),
        class_names: d.class_names().to_vec(),
        var_names: d.var_names().to_vec(),
        labels: d.labels().to_vec(),
        votes: c.votes,
        oob_counts: c.oob_counts,
        oob_error: c.oob_error,
        mds: c.mds,
        simplex: c.simplex,
        importance,
        roc: c.roc,
        error_curve: c.error_curve,
        per_tree_error: c.per_tree_error,
    }
}

pub fn ppf_bundle(f: &PPForestModel, d: &Dataset, opts: &BundleOptions) -> Result<DiagnosticsBundle> {
    let c = common(f, d, opts)?;
    let (ppforest1, ppforest2) = forest_coef_importance(f);
    let importance = ImportanceSection {
        permuted: permuted_importance(f, d, opts.importance_seed)?,
        ppforest1: Some(ppforest1),
        ppforest2: Some(ppforest2),
        node_records: node_importance_export(f),
    };
    Ok(assemble("ppf", d, c, importance))
}

pub fn baseline_bundle(b: &BaselineForestModel, d: &Dataset, opts: &BundleOptions) -> Result<DiagnosticsBundle> {
    let c = common(b, d, opts)?;
    let importance = ImportanceSection {
        permuted: permuted_importance(b, d, opts.importance_seed)?,
        ppforest1: None,
        ppforest2: None,
        node_records: Vec::new(),
    };
    Ok(assemble("rf", d, c, importance))
}
