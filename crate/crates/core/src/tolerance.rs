//! Numerical tolerances shared by every module.
//!
//! Construction checks (Hermiticity, normalization, trace) use
//! [`CONSTRUCTION`]; anything that went through time propagation or an
//! eigendecomposition is compared with [`PROPAGATION`]; positivity of density
//! matrices allows [`PSD_SLACK`] of negative eigenvalue.

/// Max-abs-entry tolerance for freshly constructed objects.
pub const CONSTRUCTION: f64 = 1e-10;

/// Tolerance after propagation or diagonalization.
pub const PROPAGATION: f64 = 1e-9;

/// Allowed negative eigenvalue of a density matrix.
pub const PSD_SLACK: f64 = 1e-8;

/// Allowed distance of a stabilizer expectation from +1 or -1.
pub const SYNDROME: f64 = 1e-6;
