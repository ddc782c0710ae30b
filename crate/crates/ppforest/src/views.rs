//! Response payloads shared by the HTTP service and the CLI exporter.

use ppforest_core::diagnostics::{mds_embed, Dissimilarity, MdsEmbedding, RocCurve};
use ppforest_core::pptree::{NodeConfusion, NodeProjection};
use ppforest_core::{DiagnosticsBundle, PPTreeModel, ProximityMatrix, ProximityMode};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::proximity_parallel;
use crate::registry::{ModelRegistryEntry, TrainedModel};

/// Largest `n` for which the dense proximity matrix is served.
pub const MAX_PROXIMITY_N: usize = 2000;
/// Largest `n` for which proximities (and MDS) are computed at all.
pub const MAX_MDS_N: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelList {
    pub models: Vec<ModelRegistryEntry>,
}

/// One internal node of a tree, with the in-bag cases that reached it while fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDetail {
    pub node_id: usize,
    /// Case ids, projected values and split of the node.
    pub projection: NodeProjection,
    /// True class of each case in `projection.case_ids`.
    pub labels: Vec<usize>,
    pub confusion: NodeConfusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDetail {
    pub model_id: String,
    pub tree_id: usize,
    pub class_names: Vec<String>,
    pub var_names: Vec<String>,
    pub tree: PPTreeModel,
    pub oob_error: Option<f64>,
    /// Distinct in-bag case ids.
    pub in_bag: Vec<usize>,
    pub oob: Vec<usize>,
    pub nodes: Vec<NodeDetail>,
}

/// Node detail for tree `k`. A node sees the in-bag cases of its classes.
pub fn tree_detail(m: &TrainedModel, k: usize) -> Result<TreeDetail> {
    let tree = m.ppf.trees.get(k).ok_or(ppforest_core::Error::UnknownTree(k))?;
    let boot = &m.ppf.bootstrap[k];
    let view = m.ppf.training_view(&m.dataset)?;
    let in_bag = boot.in_bag_distinct();
    let labels = view.labels();
    let mut nodes = Vec::with_capacity(tree.nodes.len());
    for node in &tree.nodes {
        let classes = node.classes();
        let cases: Vec<usize> = in_bag.iter().copied().filter(|&i| classes.binary_search(&labels[i]).is_ok()).collect();
        nodes.push(NodeDetail {
            node_id: node.id,
            labels: cases.iter().map(|&i| labels[i]).collect(),
            projection: tree.project_node(node.id, &view, &cases)?,
            confusion: tree.node_confusion(node.id, &view, &cases)?,
        });
    }
    Ok(TreeDetail {
        model_id: m.entry.model_id.clone(),
        tree_id: tree.tree_id,
        class_names: m.entry.class_names.clone(),
        var_names: m.entry.var_names.clone(),
        tree: tree.clone(),
        oob_error: m.ppf.tree_oob_error[k],
        in_bag,
        oob: boot.oob.clone(),
        nodes,
    })
}

/// Resolves a class given as an id or a name.
pub fn resolve_class(class_names: &[String], class: &str) -> Result<usize> {
    if let Some(i) = class_names.iter().position(|c| c == class) {
        return Ok(i);
    }
    match class.parse::<usize>() {
        Ok(i) if i < class_names.len() => Ok(i),
        _ => Err(Error::NotFound(format!("unknown class `{class}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResponse {
    pub model_id: String,
    pub class_names: Vec<String>,
    pub curves: Vec<RocCurve>,
}

/// ROC curves from the diagnostics, all classes or one.
pub fn roc_view(entry: &ModelRegistryEntry, bundle: &DiagnosticsBundle, class: Option<&str>) -> Result<RocResponse> {
    let curves = match class {
        None => bundle.roc.clone(),
        Some(c) => {
            let id = resolve_class(&bundle.class_names, c)?;
            let curve = bundle.roc.iter().find(|r| r.class == id).ok_or_else(|| {
                Error::NotFound(format!("class `{c}` has no ROC curve: it needs voted cases both in and out of the class"))
            })?;
            vec![curve.clone()]
        }
    };
    Ok(RocResponse { model_id: entry.model_id.clone(), class_names: bundle.class_names.clone(), curves })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdsParams {
    pub dims: usize,
    pub dissimilarity: Dissimilarity,
    pub mode: ProximityMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsResponse {
    pub model_id: String,
    pub dissimilarity: Dissimilarity,
    pub proximity_mode: ProximityMode,
    pub mds: MdsEmbedding,
}

pub fn forest_proximity(m: &TrainedModel, mode: ProximityMode, threads: usize) -> Result<ProximityMatrix> {
    if m.dataset.n() > MAX_MDS_N {
        return Err(Error::Config(format!("proximities are limited to n <= {MAX_MDS_N}, model has {}", m.dataset.n())));
    }
    proximity_parallel(&m.ppf, &m.dataset, mode, threads)
}

pub fn mds_view(m: &TrainedModel, p: MdsParams, threads: usize) -> Result<MdsResponse> {
    let n = m.dataset.n();
    if p.dims == 0 || p.dims >= n {
        return Err(Error::Config(format!("d must be in 1..={}, got {}", n - 1, p.dims)));
    }
    let pm = forest_proximity(m, p.mode, threads)?;
    Ok(MdsResponse {
        model_id: m.entry.model_id.clone(),
        dissimilarity: p.dissimilarity,
        proximity_mode: p.mode,
        mds: mds_embed(&pm, p.dims, p.dissimilarity)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityResponse {
    pub model_id: String,
    pub n: usize,
    pub mode: ProximityMode,
    /// `n × n`, row-major.
    pub values: Vec<Vec<f64>>,
}

pub fn proximity_view(m: &TrainedModel, mode: ProximityMode, threads: usize) -> Result<ProximityResponse> {
    let n = m.dataset.n();
    if n > MAX_PROXIMITY_N {
        return Err(Error::Config(format!(
            "dense proximities are served for n <= {MAX_PROXIMITY_N}, model has {n}; use the mds endpoint"
        )));
    }
    let pm = forest_proximity(m, mode, threads)?;
    Ok(ProximityResponse {
        model_id: m.entry.model_id.clone(),
        n,
        mode,
        values: (0..n).map(|i| (0..n).map(|j| pm.get(i, j)).collect()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResponse {
    pub model_id: String,
    pub ppf: DiagnosticsBundle,
    /// `null` when no baseline forest was trained.
    pub rf: Option<DiagnosticsBundle>,
}

pub fn compare_view(m: &TrainedModel) -> CompareResponse {
    CompareResponse { model_id: m.entry.model_id.clone(), ppf: m.diagnostics.clone(), rf: m.rf_diagnostics.clone() }
}
