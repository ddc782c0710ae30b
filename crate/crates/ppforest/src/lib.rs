//! File formats, parallel fitting, the model registry and the HTTP service
//! for projection pursuit forests.

pub mod cli;
pub mod error;
pub mod io;
pub mod parallel;
pub mod registry;
pub mod schema;
pub mod server;
pub mod views;

pub use error::{Error, Result};
pub use ppforest_core as core;
