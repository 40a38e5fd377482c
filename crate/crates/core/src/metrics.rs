//! Performance summaries of a backtest ledger.

use std::io::Write;

use thiserror::Error;

use crate::fmt_f64;
use crate::strategy::TradeLedger;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("degenerate return series: zero standard deviation")]
    Degenerate,

    #[error("need at least {required} values, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("{0} sample is empty")]
    EmptySample(&'static str),

    #[error("split index {split} beyond series length {len}")]
    SplitOutOfRange { split: usize, len: usize },

    #[error("endowment must be positive, got {0}")]
    BadEndowment(f64),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (denominator `n − 1`).
fn stdev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Mean over sample standard deviation, not annualised.
pub fn sharpe(returns: &[f64]) -> Result<f64> {
    if returns.len() < 2 {
        return Err(MetricsError::TooShort {
            required: 2,
            actual: returns.len(),
        });
    }
    let sd = stdev(returns);
    if sd == 0.0 || !sd.is_finite() {
        return Err(MetricsError::Degenerate);
    }
    Ok(mean(returns) / sd)
}

/// Largest peak-to-trough fall of a cumulative return series, as a
/// percentage of `endowment`.
pub fn max_drawdown(cum: &[f64], endowment: f64) -> Result<f64> {
    if endowment.is_nan() || endowment <= 0.0 {
        return Err(MetricsError::BadEndowment(endowment));
    }
    let first = *cum.first().ok_or(MetricsError::TooShort {
        required: 1,
        actual: 0,
    })?;
    let mut peak = first;
    let mut worst = 0.0f64;
    for &c in cum {
        peak = peak.max(c);
        worst = worst.max(peak - c);
    }
    Ok(100.0 * worst / endowment)
}

/// Mean squared values before and from `split`.
pub fn mse_split(residuals: &[f64], split: usize) -> Result<(f64, f64)> {
    if split > residuals.len() {
        return Err(MetricsError::SplitOutOfRange {
            split,
            len: residuals.len(),
        });
    }
    let (a, b) = residuals.split_at(split);
    if a.is_empty() {
        return Err(MetricsError::EmptySample("in"));
    }
    if b.is_empty() {
        return Err(MetricsError::EmptySample("out"));
    }
    let ms = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    Ok((ms(a), ms(b)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportConfig {
    pub endowment: f64,
    pub days_per_year: f64,
    /// First evaluated day; earlier days only count towards in-sample MSE.
    pub split: usize,
}

impl ReportConfig {
    pub fn new(endowment: f64, split: usize) -> Self {
        Self {
            endowment,
            days_per_year: 252.0,
            split,
        }
    }
}

/// One row of the results table. Percentages are of the endowment.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    /// Mean daily % return over winning days.
    pub pct_gain: f64,
    /// Mean daily % return over losing days (negative).
    pub pct_loss: f64,
    pub mdd: f64,
    pub pct_win: f64,
    pub pct_lose: f64,
    pub ann_return: f64,
    pub ann_vol: f64,
    /// `ann_return / ann_vol`; absent for a flat or constant P&L.
    pub sharpe: Option<f64>,
    pub mse_in: Option<f64>,
    pub mse_out: Option<f64>,
}

pub const REPORT_COLUMNS: [&str; 10] = [
    "pct_gain", "pct_loss", "mdd", "pct_win", "pct_lose", "ann_return", "ann_vol", "sharpe",
    "mse_in", "mse_out",
];

impl BacktestReport {
    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        vec![
            fmt_f64(self.pct_gain),
            fmt_f64(self.pct_loss),
            fmt_f64(self.mdd),
            fmt_f64(self.pct_win),
            fmt_f64(self.pct_lose),
            fmt_f64(self.ann_return),
            fmt_f64(self.ann_vol),
            opt(self.sharpe),
            opt(self.mse_in),
            opt(self.mse_out),
        ]
    }
}

/// Fills every report field from a ledger. Financial figures use the days
/// from `cfg.split` on; MSE uses the recorded spreads before/after the split.
pub fn summarize(ledger: &TradeLedger, cfg: &ReportConfig) -> Result<BacktestReport> {
    if cfg.endowment.is_nan() || cfg.endowment <= 0.0 {
        return Err(MetricsError::BadEndowment(cfg.endowment));
    }
    let n = ledger.len();
    if cfg.split >= n {
        return Err(MetricsError::SplitOutOfRange { split: cfg.split, len: n });
    }
    let held = ledger.held();
    let rows = &ledger.rows[cfg.split..];
    let held = &held[cfg.split..];
    let days = rows.len() as f64;

    let pct: Vec<f64> = rows.iter().map(|r| 100.0 * r.pnl / cfg.endowment).collect();
    let gains: Vec<f64> = pct.iter().copied().filter(|v| *v > 0.0).collect();
    let losses: Vec<f64> = pct.iter().copied().filter(|v| *v < 0.0).collect();
    let avg = |v: &[f64]| if v.is_empty() { 0.0 } else { mean(v) };

    let mut wins = 0usize;
    let mut loses = 0usize;
    for (r, h) in rows.iter().zip(held) {
        if *h != 0.0 {
            if r.pnl > 0.0 {
                wins += 1;
            } else if r.pnl < 0.0 {
                loses += 1;
            }
        }
    }

    let mut cum = Vec::with_capacity(rows.len() + 1);
    let mut acc = 0.0;
    cum.push(acc);
    for r in rows {
        acc += r.pnl;
        cum.push(acc);
    }

    let (ann_return, ann_vol) = if pct.len() >= 2 {
        (mean(&pct) * cfg.days_per_year, stdev(&pct) * cfg.days_per_year.sqrt())
    } else {
        (mean(&pct) * cfg.days_per_year, 0.0)
    };
    let sharpe = sharpe(&pct).ok().map(|s| s * cfg.days_per_year.sqrt());

    let spreads = |rs: &[crate::strategy::LedgerRow]| -> Vec<f64> {
        rs.iter().filter_map(|r| r.spread).collect()
    };
    let ms = |v: Vec<f64>| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64)
        }
    };

    Ok(BacktestReport {
        pct_gain: avg(&gains),
        pct_loss: avg(&losses),
        mdd: max_drawdown(&cum, cfg.endowment)?,
        pct_win: 100.0 * wins as f64 / days,
        pct_lose: 100.0 * loses as f64 / days,
        ann_return,
        ann_vol,
        sharpe,
        mse_in: ms(spreads(&ledger.rows[..cfg.split])),
        mse_out: ms(spreads(rows)),
    })
}

/// One labelled report per configuration, columns in table order.
pub fn write_reports_csv<W: Write>(
    label: &str,
    rows: &[(String, BacktestReport)],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{label},{}", REPORT_COLUMNS.join(","))?;
    for (name, rep) in rows {
        writeln!(w, "{name},{}", rep.csv_fields().join(","))?;
    }
    Ok(())
}

/// Fixed-width table for terminals.
pub fn format_reports_table(label: &str, rows: &[(String, BacktestReport)]) -> String {
    let headers = [
        label, "% gain", "% loss", "MDD", "% WT", "% LT", "Ann.R.", "Ann.V.", "Sharpe",
        "in-MSE", "out-MSE",
    ];
    let mut out = String::new();
    for h in headers {
        out.push_str(&format!("{h:>10} "));
    }
    out.push('\n');
    let num = |v: f64| format!("{v:>10.3} ");
    let sci = |v: Option<f64>| match v {
        Some(v) => format!("{v:>10.3e} "),
        None => format!("{:>10} ", "-"),
    };
    for (name, r) in rows {
        out.push_str(&format!("{name:>10} "));
        for v in [r.pct_gain, r.pct_loss, r.mdd, r.pct_win, r.pct_lose, r.ann_return, r.ann_vol] {
            out.push_str(&num(v));
        }
        out.push_str(&match r.sharpe {
            Some(s) => num(s),
            None => format!("{:>10} ", "-"),
        });
        out.push_str(&sci(r.mse_in));
        out.push_str(&sci(r.mse_out));
        out.push('\n');
    }
    out
}
