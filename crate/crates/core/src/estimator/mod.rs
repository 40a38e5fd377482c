//! Time-varying regression coefficient estimation.
//!
//! The measurement model is `y_t = x_t'β_t + ε_t` with coefficients that are
//! only asked to drift slowly, `β_{t+1} − β_t ≈ 0`. Estimates minimise the
//! incompatibility cost
//!
//! ```text
//! C(β; μ) = Σ_t (y_t − x_t'β_t)² + μ Σ_t |β_{t+1} − β_t|²
//! ```
//!
//! Three estimators live here:
//!
//! - [`FlsState`]: the on-line FLS recursion on the quadratic cost-to-go
//!   `(S_t, s_t, r_t)`. Needs two symmetric solves per step.
//! - [`KfState`]: the Kalman filter with `V_ω = μ⁻¹I`, `V_ε = 1`, which yields
//!   the same estimates using only matrix-vector products. This is the
//!   production path.
//! - [`fls_smooth_batch`] / [`FlsSmoother`]: the off-line FLS smoother, a
//!   forward pass that records `(d_t, M_t)` followed by the backward pass
//!   `β_t = d_t + M_t β_{t+1}`.
//!
//! [`ols_fit`] gives the constant-coefficient reference that FLS approaches as
//! `δ → 0`.

mod export;
mod fls;
mod kalman;
mod ols;
mod smoother;

pub use export::{CoefficientPath, PathRow};
pub use fls::{fls_init, FlsPrior, FlsState};
pub use kalman::{KfDiagnostics, KfState};
pub use ols::ols_fit;
pub use smoother::{fls_smooth_batch, FlsSmoother, SmootherTape, TapeEntry};

use thiserror::Error;

/// Default diffuse prior variance: the Kalman path starts from `P_0 = κI`.
pub const DEFAULT_PRIOR_SCALE: f64 = 1e6;

/// Reciprocal condition number below which a symmetric system is treated as
/// singular.
pub const SINGULAR_RCOND: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("smoothing parameter delta must lie in the open interval (0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("regression dimension must be at least 1")]
    ZeroDimension,

    #[error("prior scale must be non-negative and finite, got {0}")]
    InvalidPriorScale(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// `S_{t−1} + x_t x_t'` is singular: the data seen so far do not pin down
    /// every coefficient. Typical with a zero prior and `p > 1`.
    #[error("underdetermined system at step {step}: reciprocal condition number {rcond:.3e}")]
    Underdetermined { step: usize, rcond: f64 },

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("rank-deficient design: rank {rank} < {p} columns")]
    RankDeficient { rank: usize, p: usize },

    #[error("need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    #[error("observation noise variance must be positive, got {0}")]
    InvalidNoise(f64),
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

/// The FLS smoothing parameter in both of its forms.
///
/// `delta ∈ (0, 1)` is the user-facing knob; `mu = (1 − delta)/delta` is the
/// weight on coefficient dynamics in the cost. Small `delta` (large `mu`)
/// pushes the fit towards constant coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    delta: f64,
    mu: f64,
}

impl Smoothing {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(EstimatorError::InvalidDelta(delta));
        }
        Ok(Self {
            delta,
            mu: (1.0 - delta) / delta,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Per-step coefficient drift variance of the equivalent state-space
    /// model, `V_ω = μ⁻¹` (times the identity).
    pub fn state_noise(&self) -> f64 {
        1.0 / self.mu
    }
}

pub(crate) fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EstimatorError::NonFinite(what))
    }
}

pub(crate) fn symmetrize(m: &mut nalgebra::DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_from_delta() {
        let s = Smoothing::new(0.98).unwrap();
        assert!((s.mu() - 0.02 / 0.98).abs() < 1e-16);
        assert!((s.mu() - 0.020408).abs() < 1e-6);
        assert_eq!(Smoothing::new(0.5).unwrap().mu(), 1.0);
    }

    #[test]
    fn endpoints_rejected() {
        for d in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(Smoothing::new(d).is_err(), "{d}");
        }
    }
}
