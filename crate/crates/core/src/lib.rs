//! Persistence probabilities of Gaussian stationary processes driven by
//! declared spectral measures.
//!
//! A process is specified by its [`spectral::SpectralMeasure`]; from it the
//! crate builds covariances, samples paths, estimates the probability that the
//! process stays positive on `(0, N]`, evaluates analytic bounds on that
//! probability, and checks the supporting inequalities numerically.

pub mod bounds;
pub mod chebyshev;
pub mod error;
pub mod gauss_tools;
pub mod linalg;
pub mod normal;
pub mod persistence;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RngSpec;
pub use spectral::{catalog, Atom, DensityForm, DensitySegment, Domain, Moment, SpectralMeasure};
