//! Quadrature, transforms and special functions shared by the distribution builders.

pub mod dft;
pub mod erf;
pub mod grid;
pub mod quadrature;

pub use grid::{trapezoid, GridSpec};
pub use quadrature::{integrate_1d, QuadratureConfig, SingularityHint};

/// Radius (in units of the Gaussian width `w`, for an envelope `e^{-(x/w)²}`)
/// beyond which the envelope is below `1e-16` of its peak.
pub const GAUSSIAN_CUTOFF: f64 = 6.07;
