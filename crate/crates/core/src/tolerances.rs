//! Shared numeric tolerances.
//!
//! Every module and test reads its notion of "zero" from here, so a single
//! change keeps the whole crate consistent. Values are deliberate choices,
//! not tuned per test.

/// Max allowed `|MᵀΩM − Ω|` entry for a matrix to count as symplectic.
pub const TOL_SYMP: f64 = 1e-9;

/// Max allowed operator-norm jump between consecutive path samples; larger
/// jumps mean the sampling is too coarse to track winding continuously.
pub const STEP_BOUND: f64 = 0.5;

/// Perturbation angle for degenerate-endpoint index computation; halved once
/// for the stability re-check.
pub const CZ_EPS: f64 = 1e-4;

/// Newton convergence threshold on the shooting residual norm.
pub const SHOOT_TOL: f64 = 1e-9;

/// Shooting iteration cap.
pub const SHOOT_MAX_ITER: usize = 50;

/// Singular values below this are truncated when forming the pseudo-inverse
/// Newton step (the solver runs on rank-deficient critical manifolds).
pub const PINV_TRUNC: f64 = 1e-10;

/// Singular values of `M − I` below this count as kernel directions, after
/// `M` has been scaled to unit norm.
pub const KERNEL_TOL: f64 = 1e-6;

/// Central finite-difference step, applied relative to the point scale.
pub const FD_STEP: f64 = 1e-6;

/// Allowed disagreement between an analytic gradient and its central
/// finite-difference check.
pub const TOL_GRAD: f64 = 1e-6;

/// Collar-coordinate Newton tolerance.
pub const COLLAR_TOL: f64 = 1e-12;

/// Collar-coordinate Newton iteration cap.
pub const COLLAR_MAX_ITER: usize = 50;

/// Agreement tolerance between an orbit's integrated action and its period.
pub const TOL_ACTION: f64 = 1e-6;

/// Residual tolerance for the closed / twisted magnetic orbit conditions.
pub const TOL_MAGNETIC: f64 = 1e-8;

/// State-norm bound beyond which an integration counts as blown up.
pub const BLOWUP_NORM: f64 = 1e6;

/// Total-dimension cap for brute-force homology enumeration.
pub const BRUTE_FORCE_CAP: usize = 12;
