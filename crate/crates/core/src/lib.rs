//! ℓ-Volterra quadratic stochastic operators.
//!
//! The crate builds QSOs from heredity matrices, decides which class
//! `V_ell` an operator belongs to, enumerates extremal operators, and
//! analyses orbits: fixed points with Jacobian classification, cycles and
//! limit sets. Closed-form analysers cover the two-species family and the
//! symmetric three-species 2-Volterra family.

pub mod classify;
pub mod dynamics;
pub mod error;
pub mod families;
pub mod io;
pub mod qso;
pub mod report;
pub mod sample;

pub use error::{QsoError, Result, Violation};
pub use qso::{
    apply_canonical, canonical_form, validate, CanonicalForm, CubicMatrix, SimplexPoint,
};

/// Allowed deviation of a column sum from one.
pub const COLUMN_SUM_TOL: f64 = 1e-12;
/// Allowed difference between `P[i][j][k]` and `P[j][i][k]`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Points whose coordinates sum within this of one are renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-9;
/// Negative coordinates down to `-CLAMP_TOL` are rounding noise.
pub const CLAMP_TOL: f64 = 1e-15;
/// Entries above this are structurally nonzero.
pub const POSITIVE_THRESHOLD: f64 = 1e-15;
