//! Streaming time-varying linear regression with flexible least squares (FLS)
//! and its inversion-free Kalman-filter form, incremental eigenvector tracking
//! for on-line dimensionality reduction, and a statistical-arbitrage backtest
//! layer built on top of them.
//!
//! Module map:
//!
//! - [`estimator`]: on-line FLS, the off-line FLS smoother, the equivalent
//!   Kalman filter and an OLS reference fit.
//! - [`eigentrack`]: covariance-free tracking of the leading eigenvectors of a
//!   return stream.
//! - [`ingest`]: price CSV loading, alignment, forward fill, log returns.
//! - [`strategy`]: spread, plus-minus-one rule, sizing, orders, P&L, backtest.
//! - [`metrics`]: Sharpe, drawdown, MSE split and the per-run report.
//! - [`synth`]: seeded generators for the drifting-coefficient simulation and
//!   for synthetic markets with a mean-reverting spread.

pub mod eigentrack;
pub mod estimator;
pub mod ingest;
pub mod metrics;
pub mod strategy;
pub mod synth;

mod fmt;

pub use fmt::fmt_f64;
