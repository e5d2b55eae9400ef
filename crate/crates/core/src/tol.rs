//! Numeric tolerances, named once and shared by every module.
//!
//! The mathematics here is exact; tolerances only absorb floating-point
//! eigensolves and accumulated rounding.

/// Max entrywise |M - M†| for a matrix to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// State validation: smallest admissible eigenvalue and trace deviation.
pub const STATE_TOL: f64 = 1e-10;

/// Max entrywise |U†U - I| for a matrix to count as unitary.
pub const UNITARY_TOL: f64 = 1e-10;

/// Invariance checks on norms (unitary conjugation, label permutation).
pub const NORM_TOL: f64 = 1e-10;

/// Comparisons against closed-form values.
pub const CLOSED_FORM_TOL: f64 = 1e-9;

/// Algebraic identities that hold exactly up to rounding
/// (trace preservation, binomial-sum vs closed-form bounds).
pub const IDENTITY_TOL: f64 = 1e-12;

/// Residual ‖Mv - λv‖₂ allowed for the top eigenpair.
pub const EIG_RESIDUAL_TOL: f64 = 1e-9;

/// Relative width of the top eigenspace used for witness extraction.
pub const EIGENSPACE_TOL: f64 = 1e-8;

/// Per-sweep decrease allowed before alternating optimization counts
/// as non-monotone.
pub const SEESAW_MONOTONE_TOL: f64 = 1e-12;

/// Default seed for every stochastic entry point that is not given one.
pub const DEFAULT_SEED: u64 = 0xC10F_E5EED;

/// Default cap on the total Hilbert-space dimension of any operator.
pub const DEFAULT_MAX_DIM: usize = 1 << 14;

/// Active resource guard; `CLONEGAME_MAX_DIM` overrides the default.
pub fn max_total_dim() -> usize {
    static CACHED: std::sync::OnceLock<usize> = std::sync::OnceLock::new();
    *CACHED.get_or_init(|| {
        std::env::var("CLONEGAME_MAX_DIM")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(DEFAULT_MAX_DIM)
    })
}

/// Resource-guard check used by every constructor that allocates a
/// dense operator.
pub fn check_dim(dim: usize) -> crate::error::Result<()> {
    let max = max_total_dim();
    if dim > max {
        return Err(crate::error::Error::ResourceGuard { dim, max });
    }
    Ok(())
}
