//! Command implementations behind the `fls` binary.
//!
//! Every command computes all of its results before touching the output
//! directory, so a failing run leaves no partial files behind.

pub mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use fls_core::eigentrack::{EigenConfig, EigenPath};
use fls_core::estimator::{FlsPrior, FlsSmoother, Smoothing};
use fls_core::fmt_f64;
use fls_core::ingest::{self, CsvSchema, ReturnMatrix};
use fls_core::metrics::{format_reports_table, summarize, write_reports_csv, BacktestReport, ReportConfig};
use fls_core::strategy::{
    run_backtest, BacktestConfig, BacktestOutput, EstimatorKind, FeatureMode, SizingConfig,
};
use fls_core::synth::{gen_fig2, gen_market, Fig2Config, MarketConfig};

pub use config::{Features, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(String),

    #[error("output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Returns plus the traded instrument's prices (one more entry than rows).
#[derive(Debug, Clone)]
pub struct Market {
    pub returns: ReturnMatrix,
    pub index_prices: Vec<f64>,
    pub dropped: Vec<String>,
}

/// Loads and cleans the configured input, or generates the synthetic market.
pub fn prepare_market(cfg: &RunConfig) -> Result<Market, CliError> {
    let (table, dropped) = match &cfg.input {
        Some(path) => {
            let schema = CsvSchema {
                target: cfg.target.clone(),
                explanatory: cfg.explanatory.clone(),
            };
            let mut table = ingest::load_csv(path, &schema).map_err(data_err)?;
            if let Some(split) = &cfg.split_file {
                let events = ingest::load_split_file(split).map_err(data_err)?;
                table = ingest::apply_splits(&table, &events).map_err(data_err)?;
            }
            let (table, dropped) = ingest::clean(&table, cfg.max_missing).map_err(data_err)?;
            for d in &dropped {
                log::warn!("dropped sparse stream {d}");
            }
            (table, dropped)
        }
        None => {
            let m = gen_market(&MarketConfig {
                streams: cfg.synth_streams,
                factors: cfg.synth_factors,
                days: cfg.synth_days,
                spread_rate: cfg.synth_spread_rate,
                spread_vol: cfg.synth_spread_vol,
                factor_vol: cfg.synth_factor_vol,
                idio_vol: cfg.synth_idio_vol,
                seed: cfg.seed,
                ..MarketConfig::default()
            });
            (m.table, Vec::new())
        }
    };
    if table.explanatory_count() == 0 {
        return Err(CliError::Data("no explanatory streams left after cleaning".into()));
    }
    let returns = ingest::to_log_returns(&table).map_err(data_err)?;
    Ok(Market {
        returns,
        index_prices: table.target_prices(),
        dropped,
    })
}

/// First evaluated return row.
pub fn eval_start(cfg: &RunConfig, returns: &ReturnMatrix) -> Result<usize, CliError> {
    let split = match cfg.warmup_end_date()? {
        Some(d) => returns
            .dates
            .iter()
            .position(|x| *x >= d)
            .ok_or_else(|| CliError::Data(format!("warmup_end {d} is after the last date")))?,
        None => cfg.warmup_days,
    };
    if split >= returns.rows() {
        return Err(CliError::Data(format!(
            "evaluation starts at row {split} but only {} return rows exist",
            returns.rows()
        )));
    }
    Ok(split)
}

pub fn backtest_config(cfg: &RunConfig, delta: f64) -> Result<BacktestConfig, CliError> {
    let smoothing = Smoothing::new(delta).map_err(|e| CliError::Config(format!("deltas: {e}")))?;
    let mut bt = BacktestConfig::new(smoothing);
    bt.estimator.prior_scale = cfg.prior_scale;
    bt.estimator.kind = match cfg.estimator.as_str() {
        "fls" => EstimatorKind::Fls,
        _ => EstimatorKind::Kalman,
    };
    bt.features = match Features::parse(&cfg.features).map_err(CliError::Config)? {
        Features::Raw => FeatureMode::Raw,
        Features::Svd(k) => FeatureMode::Eigen {
            k,
            config: EigenConfig {
                amnesia: cfg.amnesia,
                ..EigenConfig::default()
            },
            freeze_after: cfg.freeze_eigen_after,
        },
    };
    bt.sizing = SizingConfig {
        multiplier: cfg.multiplier,
        endowment: cfg.endowment,
        cost_per_contract: cfg.cost_per_contract,
    };
    bt.warmup = cfg.warmup_days;
    Ok(bt)
}

pub struct GridRun {
    pub delta: f64,
    pub output: BacktestOutput,
    pub report: BacktestReport,
}

/// One backtest per δ, in parallel; results come back in grid order.
pub fn run_grid(cfg: &RunConfig, market: &Market) -> Result<Vec<GridRun>, CliError> {
    let grid = cfg.delta_grid()?;
    let split = eval_start(cfg, &market.returns)?;
    if let Features::Svd(k) = Features::parse(&cfg.features).map_err(CliError::Config)? {
        if k > market.returns.dim() {
            return Err(CliError::Config(format!(
                "features: svd:{k} exceeds the {} explanatory streams",
                market.returns.dim()
            )));
        }
    }
    let report_cfg = ReportConfig {
        endowment: cfg.endowment,
        days_per_year: cfg.days_per_year,
        split,
    };
    grid.par_iter()
        .map(|&delta| {
            let bt = backtest_config(cfg, delta)?;
            let output =
                run_backtest(&market.returns, &market.index_prices, &bt).map_err(data_err)?;
            let report = summarize(&output.ledger, &report_cfg).map_err(data_err)?;
            Ok(GridRun {
                delta,
                output,
                report,
            })
        })
        .collect()
}

/// File-name form of δ.
pub fn delta_label(delta: f64) -> String {
    format!("{delta}")
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_eigen(dir: &Path, path: &EigenPath, k: usize) -> Result<(), CliError> {
    write_file(&dir.join("eigenvalues.csv"), |w| path.write_eigenvalues_csv(w))?;
    for j in 1..=k {
        write_file(&dir.join(format!("eigenvector_{j}.csv")), |w| {
            path.write_component_csv(j - 1, w)
        })?;
    }
    Ok(())
}

/// Runs the δ-grid and writes ledgers, coefficient paths, the report and the
/// effective configuration. Returns the report table for display.
pub fn cmd_backtest(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.validate()?;
    let market = prepare_market(cfg)?;
    let runs = run_grid(cfg, &market)?;

    let dir = &cfg.out_dir;
    fs::create_dir_all(dir)?;
    for run in &runs {
        let label = delta_label(run.delta);
        write_file(&dir.join(format!("ledger_delta_{label}.csv")), |w| {
            run.output.ledger.write_csv(w)
        })?;
        write_file(&dir.join(format!("coefficients_delta_{label}.csv")), |w| {
            run.output.coefficients.write_csv(w)
        })?;
    }
    // the tracker does not depend on δ
    if let (Some(first), Features::Svd(k)) =
        (runs.first(), Features::parse(&cfg.features).map_err(CliError::Config)?)
    {
        if let Some(path) = &first.output.eigen {
            write_eigen(dir, path, k)?;
        }
    }
    let rows: Vec<(String, BacktestReport)> = runs
        .iter()
        .map(|r| (delta_label(r.delta), r.report.clone()))
        .collect();
    write_file(&dir.join("report.csv"), |w| write_reports_csv("delta", &rows, w))?;
    fs::write(dir.join("effective_config.toml"), cfg.to_toml())?;
    Ok(format_reports_table("delta", &rows))
}

/// Sharpe ratio per δ, written to `sharpe_sweep.csv`.
pub fn cmd_sweep_sharpe(cfg: &RunConfig) -> Result<Vec<(f64, Option<f64>)>, CliError> {
    cfg.validate()?;
    let market = prepare_market(cfg)?;
    let runs = run_grid(cfg, &market)?;
    let rows: Vec<(f64, Option<f64>)> = runs.iter().map(|r| (r.delta, r.report.sharpe)).collect();

    fs::create_dir_all(&cfg.out_dir)?;
    write_file(&cfg.out_dir.join("sharpe_sweep.csv"), |w| {
        writeln!(w, "delta,sharpe")?;
        for (d, s) in &rows {
            writeln!(w, "{},{}", fmt_f64(*d), s.map(fmt_f64).unwrap_or_default())?;
        }
        Ok(())
    })?;
    fs::write(cfg.out_dir.join("effective_config.toml"), cfg.to_toml())?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fig2Mode {
    Online,
    Offline,
    Both,
}

impl Fig2Mode {
    fn online(self) -> bool {
        matches!(self, Fig2Mode::Online | Fig2Mode::Both)
    }

    fn offline(self) -> bool {
        matches!(self, Fig2Mode::Offline | Fig2Mode::Both)
    }
}

/// Tracking errors of one estimated path against the simulated truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Summary {
    pub mode: &'static str,
    pub mse_walk: f64,
    pub mse_still: f64,
    pub mse_sine: f64,
    pub mse_all: f64,
    /// Sum of squared coefficient increments.
    pub roughness: f64,
}

pub struct Fig2Result {
    pub truth: Vec<f64>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub online: Option<Vec<f64>>,
    pub offline: Option<Vec<f64>>,
    pub summaries: Vec<Fig2Summary>,
}

fn summarize_path(mode: &'static str, est: &[f64], truth: &[f64], gen: &Fig2Config) -> Fig2Summary {
    // index i holds step i + 1
    let mse = |lo: usize, hi: usize| {
        let (lo, hi) = (lo.min(truth.len()), hi.min(truth.len()));
        if lo >= hi {
            return f64::NAN;
        }
        (lo..hi).map(|i| (est[i] - truth[i]).powi(2)).sum::<f64>() / (hi - lo) as f64
    };
    let jump = gen.jump_at.saturating_sub(1);
    let sine = gen.sine_from.saturating_sub(1);
    Fig2Summary {
        mode,
        mse_walk: mse(0, jump),
        mse_still: mse(jump, sine),
        mse_sine: mse(sine, truth.len()),
        mse_all: mse(0, truth.len()),
        roughness: est.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum(),
    }
}

/// Simulates the drifting-coefficient series and fits it on-line and/or
/// off-line.
pub fn run_fig2(gen: &Fig2Config, delta: f64, prior_scale: f64, mode: Fig2Mode) -> Result<Fig2Result, CliError> {
    let smoothing = Smoothing::new(delta).map_err(|e| CliError::Config(format!("delta: {e}")))?;
    let prior = FlsPrior::diffuse(1, smoothing, prior_scale)
        .map_err(|e| CliError::Config(format!("prior_scale: {e}")))?;
    let data = gen_fig2(gen);
    let mut sm = FlsSmoother::new(&prior, smoothing);
    for (x, y) in data.xs.iter().zip(&data.ys) {
        sm.push(&[*x], *y).map_err(data_err)?;
    }
    let online = mode
        .online()
        .then(|| sm.online_path().iter().map(|b| b[0]).collect::<Vec<f64>>());
    let offline = if mode.offline() {
        Some(sm.smoothed_path().map_err(data_err)?.column(0).iter().copied().collect::<Vec<f64>>())
    } else {
        None
    };
    let mut summaries = Vec::new();
    if let Some(p) = &online {
        summaries.push(summarize_path("online", p, &data.betas, gen));
    }
    if let Some(p) = &offline {
        summaries.push(summarize_path("offline", p, &data.betas, gen));
    }
    Ok(Fig2Result {
        truth: data.betas,
        xs: data.xs,
        ys: data.ys,
        online,
        offline,
        summaries,
    })
}

pub fn cmd_sim_fig2(seed: u64, delta: f64, mode: Fig2Mode, out_dir: &Path) -> Result<Vec<Fig2Summary>, CliError> {
    let res = run_fig2(
        &Fig2Config::with_seed(seed),
        delta,
        fls_core::estimator::DEFAULT_PRIOR_SCALE,
        mode,
    )?;
    fs::create_dir_all(out_dir)?;
    write_file(&out_dir.join("fig2_paths.csv"), |w| {
        let mut header = String::from("t,x,y,beta_true");
        if res.online.is_some() {
            header.push_str(",beta_online");
        }
        if res.offline.is_some() {
            header.push_str(",beta_offline");
        }
        writeln!(w, "{header}")?;
        for i in 0..res.truth.len() {
            write!(w, "{},{},{},{}", i + 1, fmt_f64(res.xs[i]), fmt_f64(res.ys[i]), fmt_f64(res.truth[i]))?;
            for path in [&res.online, &res.offline].into_iter().flatten() {
                write!(w, ",{}", fmt_f64(path[i]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    write_file(&out_dir.join("fig2_summary.csv"), |w| {
        writeln!(w, "mode,mse_walk,mse_still,mse_sine,mse_all,roughness")?;
        for s in &res.summaries {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.mode,
                fmt_f64(s.mse_walk),
                fmt_f64(s.mse_still),
                fmt_f64(s.mse_sine),
                fmt_f64(s.mse_all),
                fmt_f64(s.roughness)
            )?;
        }
        Ok(())
    })?;
    Ok(res.summaries)
}

/// Command-line overrides layered onto a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub deltas: Vec<f64>,
    pub features: Option<String>,
}

pub fn load_config(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(d) = &ov.out_dir {
        cfg.out_dir = d.clone();
    }
    if !ov.deltas.is_empty() {
        cfg.deltas = Some(ov.deltas.clone());
        cfg.delta = None;
    }
    if let Some(f) = &ov.features {
        cfg.features = f.clone();
    }
    Ok(cfg)
}
