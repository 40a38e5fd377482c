use nalgebra::{DMatrix, DVector};

use super::{check_finite, symmetrize, EstimatorError, FlsPrior, Result, Smoothing};

/// Per-step outputs of [`KfState::update`].
#[derive(Debug, Clone, PartialEq)]
pub struct KfDiagnostics {
    /// Innovation `e_t = y_t − x_t'β̂_{t−1}`.
    pub innovation: f64,
    /// One-step forecast variance `Q_t = x_t'R_t x_t + V_ε`.
    pub forecast_var: f64,
    /// Gain `K_t = R_t x_t / Q_t`.
    pub gain: DVector<f64>,
}

/// Kalman filter for the random-walk coefficient model
///
/// ```text
/// β_{t+1} = β_t + ω_t,   Cov(ω_t) = V_ω I
/// y_t     = x_t'β_t + ε_t, Var(ε_t) = V_ε
/// ```
///
/// With `V_ω = μ⁻¹` and `V_ε = 1` this reproduces the on-line FLS estimates
/// without any matrix inversion: each step is a matrix-vector product and a
/// rank-one downdate.
#[derive(Debug, Clone)]
pub struct KfState {
    beta: DVector<f64>,
    cov: DMatrix<f64>,
    state_noise: f64,
    obs_noise: f64,
    t: usize,
    // R_t x_t, reused between steps
    rx: DVector<f64>,
}

impl KfState {
    /// General filter with `β̂_0 = 0` and `P_0 = prior_scale·I`.
    pub fn new(p: usize, state_noise: f64, obs_noise: f64, prior_scale: f64) -> Result<Self> {
        if p == 0 {
            return Err(EstimatorError::ZeroDimension);
        }
        if !(prior_scale >= 0.0 && prior_scale.is_finite()) {
            return Err(EstimatorError::InvalidPriorScale(prior_scale));
        }
        if !(state_noise >= 0.0 && state_noise.is_finite()) {
            return Err(EstimatorError::NonFinite("state noise"));
        }
        if !(obs_noise > 0.0 && obs_noise.is_finite()) {
            return Err(EstimatorError::InvalidNoise(obs_noise));
        }
        Ok(Self {
            beta: DVector::zeros(p),
            cov: DMatrix::identity(p, p) * prior_scale,
            state_noise,
            obs_noise,
            t: 0,
            rx: DVector::zeros(p),
        })
    }

    /// FLS-equivalent configuration: `V_ω = μ⁻¹`, `V_ε = 1`, `P_0 = κI`.
    pub fn fls_equivalent(p: usize, smoothing: Smoothing, kappa: f64) -> Result<Self> {
        Self::new(p, smoothing.state_noise(), 1.0, kappa)
    }

    /// Filter whose first predicted covariance equals the inverse of the FLS
    /// prior curvature, `R_1 = S_0⁻¹`, and whose initial estimate is
    /// `S_0⁻¹s_0`. Fails when `S_0` is singular or `S_0⁻¹ − μ⁻¹I` is not PSD.
    pub fn matched_to_fls(prior: &FlsPrior, smoothing: Smoothing) -> Result<Self> {
        let p = prior.dim();
        let ch = prior
            .curvature
            .clone()
            .cholesky()
            .ok_or(EstimatorError::NotPositiveDefinite("prior curvature S_0"))?;
        let mut cov = ch.inverse();
        let q = smoothing.state_noise();
        for i in 0..p {
            cov[(i, i)] -= q;
        }
        symmetrize(&mut cov);
        let min_eig = cov.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-12 * cov.norm().max(1.0) {
            return Err(EstimatorError::NotPositiveDefinite("S_0⁻¹ − μ⁻¹I"));
        }
        let beta = ch.solve(&prior.linear);
        let mut kf = Self::new(p, q, 1.0, 0.0)?;
        kf.cov = cov;
        kf.beta = beta;
        Ok(kf)
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// `P_t`
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn state_noise(&self) -> f64 {
        self.state_noise
    }

    pub fn obs_noise(&self) -> f64 {
        self.obs_noise
    }

    pub fn steps(&self) -> usize {
        self.t
    }

    /// `R_{t+1} = P_t + V_ω I`, the predicted covariance for the next step.
    pub fn predicted_covariance(&self) -> DMatrix<f64> {
        let mut r = self.cov.clone();
        for i in 0..self.dim() {
            r[(i, i)] += self.state_noise;
        }
        r
    }

    /// Consumes one observation. On error the state is left untouched.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<KfDiagnostics> {
        let p = self.dim();
        if x.len() != p {
            return Err(EstimatorError::DimensionMismatch {
                expected: p,
                actual: x.len(),
            });
        }
        check_finite(x, "regressors")?;
        check_finite(&[y], "response")?;
        let x = DVector::from_column_slice(x);

        // R_t = P_{t-1} + V_ω
        for i in 0..p {
            self.cov[(i, i)] += self.state_noise;
        }
        self.rx.gemv(1.0, &self.cov, &x, 0.0);
        let q = x.dot(&self.rx) + self.obs_noise;
        assert!(q > 0.0, "forecast variance must be positive, got {q}");
        let e = y - x.dot(&self.beta);

        // β_t = β_{t-1} + K e;  P_t = R_t − Q K K' = R_t − (Rx)(Rx)'/Q
        self.beta.axpy(e / q, &self.rx, 1.0);
        self.cov.ger(-1.0 / q, &self.rx, &self.rx, 1.0);
        symmetrize(&mut self.cov);
        self.t += 1;

        Ok(KfDiagnostics {
            innovation: e,
            forecast_var: q,
            gain: &self.rx / q,
        })
    }
}
