//! Numerical laboratory for harmonizable operator scaling α-stable random sheets.
//!
//! The crate is organised bottom-up:
//! [`linalg`] (matrix exponentials, spectral projectors),
//! [`polar`] (radial part and direction with respect to a scaling matrix),
//! [`homogeneous`] (spectral shape functions ψ),
//! [`scale`] (the scale functionals Γ and σ),
//! [`synthesis`] (sample paths on grids) and
//! [`fracdim`] (box counting, Hölder and energy estimators).

pub mod error;
pub mod fracdim;
pub mod homogeneous;
pub mod linalg;
pub mod polar;
pub mod quad;
pub mod scale;
pub mod synthesis;

pub use error::{Error, Result};
