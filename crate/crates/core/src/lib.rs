//! Robust subspace recovery and radial isotropic position.
//!
//! Given `m` points in `R^n` of which more than a `d/n` fraction lie in a
//! hidden `d`-dimensional subspace, the algorithms here recover the inlier
//! set: a Las Vegas sampler ([`randomized::randomized_find`]), a noise-stable
//! variant driven by a determinant gap, and a deterministic peeling algorithm
//! backed by basis-polytope membership queries. The [`isotropy`] module
//! solves Barthe's concave program to produce the transform that places a
//! point set in radial isotropic position, which doubles as a certificate
//! that no such subspace exists. [`sse`] generates structured hard instances
//! from small-set-expansion graphs.

pub mod config;
pub mod derandomized;
pub mod error;
pub mod instance;
pub mod io;
pub mod isotropy;
pub mod linalg;
pub mod matroid;
pub mod randomized;
pub mod sse;

pub use config::Tolerances;
pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
