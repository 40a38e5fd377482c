use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{check_finite, symmetrize, EstimatorError, Result, Smoothing, SINGULAR_RCOND};

/// Initial quadratic cost `β'S_0β − 2β's_0` placed on the first coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct FlsPrior {
    pub curvature: DMatrix<f64>,
    pub linear: DVector<f64>,
}

impl FlsPrior {
    /// `S_0 = scale·I`, `s_0 = 0`.
    pub fn scaled(p: usize, scale: f64) -> Result<Self> {
        if p == 0 {
            return Err(EstimatorError::ZeroDimension);
        }
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(EstimatorError::InvalidPriorScale(scale));
        }
        Ok(Self {
            curvature: DMatrix::identity(p, p) * scale,
            linear: DVector::zeros(p),
        })
    }

    /// Diffuse prior matched to a Kalman filter started from `P_0 = κI`:
    /// `S_0 = (κ + μ⁻¹)⁻¹ I`, so that `S_0⁻¹ = P_0 + V_ω = R_1`.
    pub fn diffuse(p: usize, smoothing: Smoothing, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(EstimatorError::InvalidPriorScale(kappa));
        }
        Self::scaled(p, 1.0 / (kappa + smoothing.state_noise()))
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }
}

/// Forward state of the on-line FLS recursion.
///
/// The minimal cost of fitting observations `1..=t` given `β_{t+1}` is the
/// quadratic `β'S_tβ − 2β's_t + r_t`; the current estimate is `S_t⁻¹s_t`.
#[derive(Debug, Clone)]
pub struct FlsState {
    curvature: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
    beta: DVector<f64>,
    t: usize,
    smoothing: Smoothing,
}

/// `fls_init(p, δ, s0_scale)`: zero-mean prior with `S_0 = s0_scale·I`.
pub fn fls_init(p: usize, smoothing: Smoothing, s0_scale: f64) -> Result<FlsState> {
    Ok(FlsState::with_prior(&FlsPrior::scaled(p, s0_scale)?, smoothing))
}

/// Per-step quantities the off-line smoother needs from the forward pass.
pub(crate) struct StepRecord {
    pub d: DVector<f64>,
    pub m: DMatrix<f64>,
}

impl FlsState {
    pub fn with_prior(prior: &FlsPrior, smoothing: Smoothing) -> Self {
        let p = prior.dim();
        let beta = match Cholesky::new(prior.curvature.clone()) {
            Some(ch) => ch.solve(&prior.linear),
            None => DVector::zeros(p),
        };
        Self {
            curvature: prior.curvature.clone(),
            linear: prior.linear.clone(),
            constant: 0.0,
            beta,
            t: 0,
            smoothing,
        }
    }

    /// Default production prior, consistent with [`super::KfState::fls_equivalent`].
    pub fn diffuse(p: usize, smoothing: Smoothing, kappa: f64) -> Result<Self> {
        Ok(Self::with_prior(&FlsPrior::diffuse(p, smoothing, kappa)?, smoothing))
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// `S_t`
    pub fn curvature(&self) -> &DMatrix<f64> {
        &self.curvature
    }

    /// `s_t`
    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    /// `r_t`
    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn steps(&self) -> usize {
        self.t
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    /// Minimised incompatibility cost over the data seen so far (prior term
    /// included): `r_t + β̂'S_tβ̂ − 2β̂'s_t`.
    pub fn minimized_cost(&self) -> f64 {
        let sb = &self.curvature * &self.beta;
        self.constant + self.beta.dot(&sb) - 2.0 * self.beta.dot(&self.linear)
    }

    /// Consumes one observation. On error the state is left untouched.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.step(x, y).map(|_| ())
    }

    pub(crate) fn step(&mut self, x: &[f64], y: f64) -> Result<StepRecord> {
        let p = self.dim();
        if x.len() != p {
            return Err(EstimatorError::DimensionMismatch {
                expected: p,
                actual: x.len(),
            });
        }
        check_finite(x, "regressors")?;
        check_finite(&[y], "response")?;
        let mu = self.smoothing.mu();
        let x = DVector::from_column_slice(x);

        // A = S_{t-1} + x x',  b = s_{t-1} + x y
        let mut a = self.curvature.clone();
        a.ger(1.0, &x, &x, 1.0);
        let b = &self.linear + &x * y;

        let chol_a = factor(&a).ok_or(EstimatorError::Underdetermined {
            step: self.t + 1,
            rcond: 0.0,
        })?;
        let rcond = rcond_estimate(&chol_a);
        if rcond < SINGULAR_RCOND {
            return Err(EstimatorError::Underdetermined {
                step: self.t + 1,
                rcond,
            });
        }
        let beta = chol_a.solve(&b);

        // B = A + μI; M = μB⁻¹; d = B⁻¹b
        let mut bmat = a.clone();
        for i in 0..p {
            bmat[(i, i)] += mu;
        }
        let chol_b = factor(&bmat).ok_or(EstimatorError::NotPositiveDefinite("S + μI + xx'"))?;
        let d = chol_b.solve(&b);
        let mut m = chol_b.inverse();
        m *= mu;
        symmetrize(&mut m);

        // S_t = μB⁻¹A, s_t = μd
        let mut s_next = chol_b.solve(&a);
        s_next *= mu;
        symmetrize(&mut s_next);

        self.constant += y * y - b.dot(&d);
        self.linear = &d * mu;
        self.curvature = s_next;
        self.beta = beta;
        self.t += 1;
        Ok(StepRecord { d, m })
    }
}

fn factor(a: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(a.clone())
}

/// Cheap estimate of the reciprocal 2-norm condition number from the
/// Cholesky factor diagonal.
fn rcond_estimate(ch: &Cholesky<f64, Dyn>) -> f64 {
    let l = ch.l_dirty();
    let diag = l.diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    if hi == 0.0 {
        0.0
    } else {
        (lo / hi).powi(2)
    }
}
