//! Gaussian graphical model selection under latent confounding.
//!
//! Four precision-matrix estimators (graphical lasso, CLIME, neighborhood
//! selection, and the sparse-plus-low-rank penalized likelihood), a hard
//! thresholding and tuning layer, a latent-variable simulation engine with
//! the eta diagnostic, and edge-recovery metrics.

pub mod clime;
pub mod error;
pub mod estimate;
pub mod glasso;
pub mod linalg;
pub mod lvglasso;
pub mod mat;
pub mod metrics;
pub mod neighborhood;
pub mod select;
pub mod simulate;

pub use error::{Error, Result};
pub use estimate::{Method, PrecisionEstimate, SolverOptions};
pub use mat::{DataMatrix, EdgeSet, SymMat};
