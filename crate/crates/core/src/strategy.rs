//! Statistical-arbitrage layer: the spread between the target return and its
//! fitted "artificial asset", the plus-minus-one trading rule, contract
//! sizing, orders and daily monetary returns, and the backtest fold that ties
//! them to the estimators.
//!
//! Timing: the signal computed from `s_t` (close of day `t`) sets the position
//! `ϑ_t` held from that close; the P&L of day `t + 1` is earned on `ϑ_t`.

use std::io::Write;

use chrono::NaiveDate;
use thiserror::Error;

use crate::eigentrack::{EigenConfig, EigenError, EigenPath, EigenTracker};
use crate::estimator::{
    CoefficientPath, EstimatorError, FlsState, KfState, PathRow, Smoothing, DEFAULT_PRIOR_SCALE,
};
use crate::fmt_f64;
use crate::ingest::ReturnMatrix;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("sizing parameters must be positive and finite: {0}")]
    InvalidSizing(String),

    #[error("index price must be positive, got {0}")]
    NonPositivePrice(f64),

    #[error(transparent)]
    Estimator(#[from] EstimatorError),

    #[error(transparent)]
    Eigen(#[from] EigenError),
}

pub type Result<T> = std::result::Result<T, StrategyError>;

/// Contract sizing: one contract is worth `multiplier · p_t`; the system
/// trades `π_t = endowment / (multiplier · p_t)` contracts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizingConfig {
    pub multiplier: f64,
    pub endowment: f64,
    /// Charged on every contract traded. Zero by default.
    pub cost_per_contract: f64,
}

impl Default for SizingConfig {
    fn default() -> Self {
        Self {
            multiplier: 250.0,
            endowment: 1e8,
            cost_per_contract: 0.0,
        }
    }
}

impl SizingConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.multiplier) || !ok(self.endowment) {
            return Err(StrategyError::InvalidSizing(format!(
                "multiplier={}, endowment={}",
                self.multiplier, self.endowment
            )));
        }
        if !(self.cost_per_contract >= 0.0 && self.cost_per_contract.is_finite()) {
            return Err(StrategyError::InvalidSizing(format!(
                "cost_per_contract={}",
                self.cost_per_contract
            )));
        }
        Ok(())
    }

    /// `π_t`
    pub fn units(&self, index_price: f64) -> f64 {
        self.endowment / (self.multiplier * index_price)
    }
}

/// `s_t = a_t − r_t'β_t`.
pub fn spread(a: f64, r: &[f64], beta: &[f64]) -> f64 {
    assert_eq!(r.len(), beta.len(), "feature/coefficient dimension mismatch");
    a - r.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Short,
    Flat,
    Long,
}

impl Signal {
    pub fn value(self) -> i8 {
        match self {
            Signal::Short => -1,
            Signal::Flat => 0,
            Signal::Long => 1,
        }
    }
}

/// Plus-minus-one rule: bet on reversion, `−sign(s)`, flat on a zero spread.
pub fn signal(s: f64) -> Signal {
    if s > 0.0 {
        Signal::Short
    } else if s < 0.0 {
        Signal::Long
    } else {
        Signal::Flat
    }
}

/// `ϑ = signal · w / (multiplier · p)` contracts.
pub fn position(signal: Signal, index_price: f64, cfg: &SizingConfig) -> f64 {
    f64::from(signal.value()) * cfg.units(index_price)
}

/// Contracts to trade, rounded half away from zero.
pub fn order_size(current: f64, previous: f64) -> i64 {
    (current - previous).round() as i64
}

/// `f = multiplier · (p_now − p_prev) · held`.
pub fn daily_pnl(p_now: f64, p_prev: f64, held: f64, cfg: &SizingConfig) -> f64 {
    cfg.multiplier * (p_now - p_prev) * held
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    /// Inversion-free Kalman form (default).
    Kalman,
    /// Inversion-based on-line FLS recursion.
    Fls,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub smoothing: Smoothing,
    /// Diffuse prior variance `κ`.
    pub prior_scale: f64,
    pub kind: EstimatorKind,
}

impl EstimatorConfig {
    pub fn new(smoothing: Smoothing) -> Self {
        Self {
            smoothing,
            prior_scale: DEFAULT_PRIOR_SCALE,
            kind: EstimatorKind::Kalman,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureMode {
    /// Regress on every explanatory return.
    Raw,
    /// Regress on the projections onto the `k` leading tracked eigenvectors.
    Eigen {
        k: usize,
        config: EigenConfig,
        /// Stop updating the tracker after this many samples.
        freeze_after: Option<usize>,
    },
}

impl FeatureMode {
    pub fn eigen(k: usize) -> Self {
        FeatureMode::Eigen {
            k,
            config: EigenConfig::default(),
            freeze_after: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    PlusMinusOne,
    /// Always long; the baseline.
    BuyAndHold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktestConfig {
    pub estimator: EstimatorConfig,
    pub features: FeatureMode,
    pub sizing: SizingConfig,
    pub rule: Rule,
    /// Days at the start during which the estimator learns but no position
    /// is taken.
    pub warmup: usize,
}

impl BacktestConfig {
    pub fn new(smoothing: Smoothing) -> Self {
        Self {
            estimator: EstimatorConfig::new(smoothing),
            features: FeatureMode::Raw,
            sizing: SizingConfig::default(),
            rule: Rule::PlusMinusOne,
            warmup: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub date: NaiveDate,
    /// `s_t`; `None` while the feature extractor is warming up.
    pub spread: Option<f64>,
    pub signal: i8,
    /// `π_t`
    pub units: f64,
    /// `ϑ_t`, target contracts held from today's close.
    pub position: f64,
    /// `φ_t`, contracts traded today.
    pub order: i64,
    /// Executed contracts after today's order (cumulative orders).
    pub holdings: i64,
    /// `f_t`, earned on yesterday's position.
    pub pnl: f64,
    pub cum_pnl: f64,
    pub index_price: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TradeLedger {
    pub rows: Vec<LedgerRow>,
}

impl TradeLedger {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn pnl(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.pnl).collect()
    }

    /// Position that earned each day's P&L (`ϑ_{t−1}`, zero on day one).
    pub fn held(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.rows
            .iter()
            .map(|r| std::mem::replace(&mut prev, r.position))
            .collect()
    }

    /// `date,spread,signal,position,order,pnl,cum_pnl,index_price`
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "date,spread,signal,position,order,pnl,cum_pnl,index_price")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.date.format("%Y-%m-%d"),
                r.spread.map(fmt_f64).unwrap_or_default(),
                r.signal,
                fmt_f64(r.position),
                r.order,
                fmt_f64(r.pnl),
                fmt_f64(r.cum_pnl),
                fmt_f64(r.index_price)
            )?;
        }
        Ok(())
    }
}

/// Everything a backtest produces.
#[derive(Debug, Clone)]
pub struct BacktestOutput {
    pub ledger: TradeLedger,
    pub coefficients: CoefficientPath,
    pub eigen: Option<EigenPath>,
}

enum Estimator {
    Kalman(KfState),
    Fls(FlsState),
}

impl Estimator {
    fn new(cfg: &EstimatorConfig, p: usize) -> Result<Self> {
        Ok(match cfg.kind {
            EstimatorKind::Kalman => {
                Estimator::Kalman(KfState::fls_equivalent(p, cfg.smoothing, cfg.prior_scale)?)
            }
            EstimatorKind::Fls => {
                Estimator::Fls(FlsState::diffuse(p, cfg.smoothing, cfg.prior_scale)?)
            }
        })
    }

    fn update(&mut self, x: &[f64], y: f64) -> Result<Option<(f64, f64)>> {
        Ok(match self {
            Estimator::Kalman(kf) => {
                let d = kf.update(x, y)?;
                Some((d.innovation, d.forecast_var))
            }
            Estimator::Fls(fls) => {
                fls.update(x, y)?;
                None
            }
        })
    }

    fn beta(&self) -> &[f64] {
        match self {
            Estimator::Kalman(kf) => kf.beta().as_slice(),
            Estimator::Fls(fls) => fls.beta().as_slice(),
        }
    }
}

/// Runs the trading system over `returns`. `index_prices` are the traded
/// instrument's prices on the price-table dates, one more than the return
/// rows: `index_prices[i + 1]` is the price on `returns.dates[i]`.
pub fn run_backtest(
    returns: &ReturnMatrix,
    index_prices: &[f64],
    cfg: &BacktestConfig,
) -> Result<BacktestOutput> {
    let n = returns.rows();
    if index_prices.len() != n + 1 {
        return Err(StrategyError::Misaligned(format!(
            "{} return rows need {} index prices, got {}",
            n,
            n + 1,
            index_prices.len()
        )));
    }
    if returns.dates.len() != n || returns.explanatory.nrows() != n {
        return Err(StrategyError::Misaligned(
            "return matrix columns have different lengths".into(),
        ));
    }
    cfg.sizing.validate()?;
    if let Some(&bad) = index_prices.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(StrategyError::NonPositivePrice(bad));
    }

    let p = returns.dim();
    let (mut tracker, freeze_after) = match cfg.features {
        FeatureMode::Raw => (None, None),
        FeatureMode::Eigen {
            k,
            config,
            freeze_after,
        } => (Some(EigenTracker::new(p, k, config)?), freeze_after),
    };
    let feat_dim = tracker.as_ref().map_or(p, |t| t.components());
    let mut est = Estimator::new(&cfg.estimator, feat_dim)?;

    let mut ledger = TradeLedger::default();
    let mut coefficients = CoefficientPath::new();
    let mut eigen_path = tracker.as_ref().map(|_| EigenPath::new());

    let mut prev_position = 0.0;
    let mut holdings: i64 = 0;
    let mut cum = 0.0;
    for i in 0..n {
        let r = returns.row(i);
        let a = returns.target[i];
        let p_prev = index_prices[i];
        let p_now = index_prices[i + 1];

        let features = match tracker.as_mut() {
            None => Some(r),
            Some(tr) => {
                if freeze_after.is_some_and(|f| tr.samples() >= f) {
                    tr.set_frozen(true);
                }
                tr.update(&r)?;
                if let Some(path) = eigen_path.as_mut() {
                    path.record(i + 1, tr);
                }
                if tr.is_warm() {
                    Some(tr.project(&r)?)
                } else {
                    None
                }
            }
        };

        let s = match features {
            Some(x) => {
                let diag = est.update(&x, a)?;
                coefficients.push(PathRow {
                    t: i + 1,
                    beta: est.beta().to_vec(),
                    innovation: diag,
                });
                Some(spread(a, &x, est.beta()))
            }
            None => None,
        };

        let sig = if i < cfg.warmup {
            Signal::Flat
        } else {
            match cfg.rule {
                Rule::BuyAndHold => Signal::Long,
                Rule::PlusMinusOne => s.map_or(Signal::Flat, signal),
            }
        };
        let pos = position(sig, p_now, &cfg.sizing);
        let order = order_size(pos, holdings as f64);
        holdings += order;
        let pnl = daily_pnl(p_now, p_prev, prev_position, &cfg.sizing)
            - cfg.sizing.cost_per_contract * order.unsigned_abs() as f64;
        cum += pnl;
        ledger.rows.push(LedgerRow {
            date: returns.dates[i],
            spread: s,
            signal: sig.value(),
            units: cfg.sizing.units(p_now),
            position: pos,
            order,
            holdings,
            pnl,
            cum_pnl: cum,
            index_price: p_now,
        });
        prev_position = pos;
    }

    Ok(BacktestOutput {
        ledger,
        coefficients,
        eigen: eigen_path,
    })
}
