//! Ordinal classification toolkit: soft labels, ordinal losses, cumulative link
//! heads, small trainable models, multi-view ensembles, metrics and the
//! statistics used to compare experiment grids.

pub mod clm;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod quadrature;
pub mod softlabel;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use types::{ConfusionMatrix, OrdinalLabel, ProbabilityVector};
