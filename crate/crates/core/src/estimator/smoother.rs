use nalgebra::{DMatrix, DVector};

use super::{EstimatorError, FlsPrior, FlsState, Result, Smoothing};

/// Forward-pass record for one observation: `β̂_t = d_t + M_t β_{t+1}`.
#[derive(Debug, Clone)]
pub struct TapeEntry {
    pub d: DVector<f64>,
    pub m: DMatrix<f64>,
}

/// The `(d_t, M_t)` records of a forward pass, one per observation consumed.
#[derive(Debug, Clone, Default)]
pub struct SmootherTape {
    entries: Vec<TapeEntry>,
}

impl SmootherTape {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TapeEntry] {
        &self.entries
    }
}

/// Off-line FLS: runs the on-line recursion while recording the tape, then
/// smooths backwards from the terminal estimate.
#[derive(Debug, Clone)]
pub struct FlsSmoother {
    state: FlsState,
    tape: SmootherTape,
    online: Vec<DVector<f64>>,
}

impl FlsSmoother {
    pub fn new(prior: &FlsPrior, smoothing: Smoothing) -> Self {
        Self {
            state: FlsState::with_prior(prior, smoothing),
            tape: SmootherTape::default(),
            online: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        let rec = self.state.step(x, y)?;
        self.tape.entries.push(TapeEntry { d: rec.d, m: rec.m });
        self.online.push(self.state.beta().clone());
        Ok(())
    }

    pub fn state(&self) -> &FlsState {
        &self.state
    }

    pub fn tape(&self) -> &SmootherTape {
        &self.tape
    }

    /// On-line estimates `β̂_t` produced during the forward pass.
    pub fn online_path(&self) -> &[DVector<f64>] {
        &self.online
    }

    /// Backward pass. Row `t` of the result is the smoothed `β̂_{t+1}`.
    pub fn smoothed_path(&self) -> Result<DMatrix<f64>> {
        let n = self.tape.len();
        if n == 0 {
            return Err(EstimatorError::InsufficientData {
                required: 1,
                actual: 0,
            });
        }
        let p = self.state.dim();
        let mut path = DMatrix::zeros(n, p);
        let mut next = self.state.beta().clone();
        path.row_mut(n - 1).copy_from(&next.transpose());
        for t in (0..n - 1).rev() {
            let e = &self.tape.entries[t];
            let cur = &e.d + &e.m * &next;
            path.row_mut(t).copy_from(&cur.transpose());
            next = cur;
        }
        Ok(path)
    }
}

/// Smoothed coefficient path for a whole batch (`xs` is `T × p`).
pub fn fls_smooth_batch(
    xs: &DMatrix<f64>,
    ys: &DVector<f64>,
    smoothing: Smoothing,
    prior: &FlsPrior,
) -> Result<DMatrix<f64>> {
    if xs.nrows() != ys.len() {
        return Err(EstimatorError::DimensionMismatch {
            expected: xs.nrows(),
            actual: ys.len(),
        });
    }
    if xs.ncols() != prior.dim() {
        return Err(EstimatorError::DimensionMismatch {
            expected: prior.dim(),
            actual: xs.ncols(),
        });
    }
    let mut sm = FlsSmoother::new(prior, smoothing);
    let mut row = vec![0.0; xs.ncols()];
    for t in 0..xs.nrows() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = xs[(t, j)];
        }
        sm.push(&row, ys[t])?;
    }
    sm.smoothed_path()
}
