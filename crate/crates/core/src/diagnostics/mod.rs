//! Ensemble-level diagnostics: variable importance, proximity embeddings,
//! vote-simplex coordinates, one-against-all ROC, and the bundle that
//! collects them for clients.

mod bundle;
mod importance;
mod mds;
mod roc;
mod simplex;

pub use bundle::{baseline_bundle, ppf_bundle, BundleOptions, DiagnosticsBundle, ImportanceSection};
pub use importance::{
    forest_coef_importance, node_importance_export, permuted_importance, ImportanceMeasure,
    ImportanceTable, NodeImportanceRecord, TOP_NODES,
};
pub use mds::{classical_mds, mds_embed, Dissimilarity, MdsEmbedding};
pub use roc::{roc_curve, roc_one_vs_all, RocCurve, RocPoint};
pub use simplex::{simplex_coords, simplex_point, simplex_vertices, SimplexCoords};
