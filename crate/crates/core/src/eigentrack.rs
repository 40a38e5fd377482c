//! Covariance-free incremental tracking of the leading eigenvectors of the
//! second-moment matrix `E(r_t r_t')` of a return stream.
//!
//! Each component keeps an unnormalised estimate `ĥ = λg` updated as the
//! running average of `r r' ĥ/‖ĥ‖`. Component `j > 1` runs the same recursion
//! on the residual of `r` after its projections onto components `1..j−1` have
//! been removed (sequential deflation).

use std::io::Write;

use nalgebra::DVector;
use thiserror::Error;

use crate::fmt_f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("cannot track {k} components in dimension {p}")]
    TooManyComponents { k: usize, p: usize },

    #[error("need at least one component")]
    NoComponents,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite sample")]
    NonFinite,

    #[error("tracker still warming up: {active} of {k} components active")]
    WarmingUp { active: usize, k: usize },

    #[error("amnesia must be finite and non-negative, got {0}")]
    InvalidAmnesia(f64),
}

pub type Result<T> = std::result::Result<T, EigenError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenConfig {
    /// Extra weight on new samples; 0 gives plain `1/t` averaging.
    pub amnesia: f64,
    /// Track the covariance (running-mean subtracted) instead of the raw
    /// second moment.
    pub subtract_mean: bool,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            amnesia: 0.0,
            subtract_mean: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenTracker {
    p: usize,
    h: Vec<DVector<f64>>,
    counts: Vec<usize>,
    n: usize,
    config: EigenConfig,
    mean: DVector<f64>,
    frozen: bool,
    max_residual_dot: f64,
}

/// Tracker for the top `k` components of `p`-dimensional samples.
pub fn eigen_init(p: usize, k: usize) -> Result<EigenTracker> {
    EigenTracker::new(p, k, EigenConfig::default())
}

impl EigenTracker {
    pub fn new(p: usize, k: usize, config: EigenConfig) -> Result<Self> {
        if k == 0 {
            return Err(EigenError::NoComponents);
        }
        if k > p {
            return Err(EigenError::TooManyComponents { k, p });
        }
        if !(config.amnesia >= 0.0 && config.amnesia.is_finite()) {
            return Err(EigenError::InvalidAmnesia(config.amnesia));
        }
        Ok(Self {
            p,
            h: vec![DVector::zeros(p); k],
            counts: vec![0; k],
            n: 0,
            config,
            mean: DVector::zeros(p),
            frozen: false,
            max_residual_dot: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn components(&self) -> usize {
        self.h.len()
    }

    /// Samples consumed (frozen-period samples excluded).
    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn active(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn is_warm(&self) -> bool {
        self.active() == self.components()
    }

    /// Stops (or resumes) updating; projections keep working.
    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Raw `ĥ_j` estimates.
    pub fn raw(&self) -> &[DVector<f64>] {
        &self.h
    }

    /// `λ̂_j = ‖ĥ_j‖`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.h.iter().map(|h| h.norm()).collect()
    }

    /// Largest `|u_{j+1}'ĝ_j|` seen between a deflated residual and the
    /// component it was deflated against, over all updates so far.
    pub fn max_deflation_error(&self) -> f64 {
        self.max_residual_dot
    }

    pub fn update(&mut self, r: &[f64]) -> Result<()> {
        if r.len() != self.p {
            return Err(EigenError::DimensionMismatch {
                expected: self.p,
                actual: r.len(),
            });
        }
        if !r.iter().all(|v| v.is_finite()) {
            return Err(EigenError::NonFinite);
        }
        if self.frozen {
            return Ok(());
        }
        self.n += 1;
        let mut u = DVector::from_column_slice(r);
        if self.config.subtract_mean {
            let w = 1.0 / self.n as f64;
            self.mean *= 1.0 - w;
            self.mean.axpy(w, &u, 1.0);
            u -= &self.mean;
        }

        // component j becomes active at sample j
        let reachable = self.components().min(self.n);
        for j in 0..reachable {
            let h = &mut self.h[j];
            let unorm = u.norm();
            if h.norm() == 0.0 {
                if unorm == 0.0 {
                    // nothing to seed from yet; later components see the same zero
                    break;
                }
                // first sample, or re-seed after collapse
                h.copy_from(&u);
            }
            self.counts[j] += 1;
            let m = self.counts[j] as f64;
            let l = self.config.amnesia.min(m - 1.0);
            let g_prev = &*h / h.norm();
            let proj = u.dot(&g_prev);
            *h *= (m - 1.0 - l) / m;
            h.axpy((1.0 + l) / m * proj, &u, 1.0);

            let hn = h.norm();
            if hn == 0.0 {
                break;
            }
            let g = &*h / hn;
            let c = u.dot(&g);
            u.axpy(-c, &g, 1.0);
            let resid = u.dot(&g).abs();
            self.max_residual_dot = self.max_residual_dot.max(resid);
        }
        Ok(())
    }

    /// Orthonormal, sign-fixed directions `ĝ_1..ĝ_k`. Inactive components
    /// come back as zero vectors.
    pub fn directions(&self) -> Vec<DVector<f64>> {
        let mut out: Vec<DVector<f64>> = Vec::with_capacity(self.components());
        for h in &self.h {
            let mut v = h.clone();
            for q in &out {
                let c = v.dot(q);
                v.axpy(-c, q, 1.0);
            }
            let n = v.norm();
            if n > 0.0 {
                v /= n;
                // re-orthogonalise once for stability
                for q in &out {
                    let c = v.dot(q);
                    v.axpy(-c, q, 1.0);
                }
                v /= v.norm();
                fix_sign(&mut v);
            }
            out.push(v);
        }
        out
    }

    /// `(ĝ_1'r, ..., ĝ_k'r)`.
    pub fn project(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.p {
            return Err(EigenError::DimensionMismatch {
                expected: self.p,
                actual: r.len(),
            });
        }
        if !self.is_warm() {
            return Err(EigenError::WarmingUp {
                active: self.active(),
                k: self.components(),
            });
        }
        let mut r = DVector::from_column_slice(r);
        if self.config.subtract_mean {
            r -= &self.mean;
        }
        Ok(self.directions().iter().map(|g| g.dot(&r)).collect())
    }
}

/// Largest-magnitude entry positive; ties go to the first index.
fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.neg_mut();
    }
}

/// Recorded eigenvalue and eigenvector snapshots.
#[derive(Debug, Clone, Default)]
pub struct EigenPath {
    rows: Vec<(usize, Vec<f64>, Vec<DVector<f64>>)>,
}

impl EigenPath {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, t: usize, tracker: &EigenTracker) {
        self.rows
            .push((t, tracker.eigenvalues(), tracker.directions()));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `t,lambda_1,...,lambda_k`
    pub fn write_eigenvalues_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let k = self.rows.first().map_or(0, |r| r.1.len());
        let mut header = String::from("t");
        for j in 1..=k {
            header.push_str(&format!(",lambda_{j}"));
        }
        writeln!(w, "{header}")?;
        for (t, lam, _) in &self.rows {
            let vals: Vec<String> = lam.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{t},{}", vals.join(","))?;
        }
        Ok(())
    }

    /// `t,g_1,...,g_p` for component `j` (0-based).
    pub fn write_component_csv<W: Write>(&self, j: usize, mut w: W) -> std::io::Result<()> {
        let p = self.rows.first().map_or(0, |r| r.2[j].len());
        let mut header = String::from("t");
        for i in 1..=p {
            header.push_str(&format!(",g_{i}"));
        }
        writeln!(w, "{header}")?;
        for (t, _, dirs) in &self.rows {
            let vals: Vec<String> = dirs[j].iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{t},{}", vals.join(","))?;
        }
        Ok(())
    }
}
