//! Numerics for the two-time distribution of zero-temperature Brownian
//! directed percolation (semi-discrete last-passage percolation).
//!
//! Module map:
//!
//! * [`specfun`]: real Airy functions and the Airy kernel.
//! * [`quad`]: Gauss rules, half-line and tensor quadrature, QMC, contours.
//! * [`tw`]: Tracy–Widom `F2` and the finite-`n` GUE largest-eigenvalue law.
//! * [`kernels`]: two-time scaling parameters and the limiting kernels.
//! * [`twotime`]: block determinants and the two-time distribution series.
//! * [`prelimit`]: finite-size geometric and Brownian contour formulas.
//! * [`identities`]: brute-force checks of symmetrization and contour identities.
//! * [`sim`]: Monte Carlo samplers and empirical statistics.

pub mod error;
pub mod identities;
pub mod kernels;
pub mod linalg;
pub mod prelimit;
pub mod quad;
pub mod sim;
pub mod specfun;
pub mod tw;
pub mod twotime;

pub use error::{Error, Result};
