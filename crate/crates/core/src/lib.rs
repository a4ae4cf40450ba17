//! Block-wise Langevin samplers (MALA-within-Gibbs) for high-dimensional
//! Gaussian, log-Gaussian Cox and elliptic-inverse-problem posteriors.

pub mod concavity;
pub mod coupling;
pub mod cox;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod gmrf;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod partition;
pub mod pde;
pub mod samplers;
pub mod target;

pub use error::{Error, Result};
