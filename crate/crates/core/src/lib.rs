//! Projection pursuit forests and their ensemble diagnostics.
//!
//! Everything here is pure computation over in-memory data and is `no_std`
//! (with `alloc`). IO, parallel fitting and serving live in the `ppforest`
//! crate.
#![no_std]
// negated float comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod data;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod forest;
pub mod matrix;
pub mod ppindex;
pub mod pptree;
pub mod rng;
mod serde_hex;

pub use data::{standardize, stratified_bootstrap, BootstrapKind, BootstrapRecord, Dataset, StandardizationParams};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use ppindex::{lda_index, optimize_projection, IndexValue, Projection};
pub use ensemble::{Ensemble, ProximityMatrix, ProximityMode, VoteMatrix};
pub use forest::{fit_forest, ForestConfig, PPForestModel};
pub use pptree::{fit_pptree, PPNode, PPTreeModel};
pub use baseline::{fit_baseline_rf, BaselineConfig, BaselineForestModel};
pub use diagnostics::{ppf_bundle, baseline_bundle, BundleOptions, DiagnosticsBundle};
