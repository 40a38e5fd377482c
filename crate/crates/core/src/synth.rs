//! Seeded synthetic data.
//!
//! All generators draw from `ChaCha8Rng::seed_from_u64(seed)`, so output is a
//! pure function of the configuration and identical across platforms.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::ingest::PriceTable;

/// Single-regressor drifting-coefficient simulation: `y_t = x_t β_t + ε_t`,
/// `x_t = ar·x_{t−1} + z_t`, with a coefficient that random-walks, jumps,
/// sits nearly still and finally oscillates.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Config {
    pub steps: usize,
    pub beta1: f64,
    /// Step at which the coefficient jumps by `jump`.
    pub jump_at: usize,
    pub jump: f64,
    /// Increment sd before the jump.
    pub walk_sd: f64,
    /// Increment sd between the jump and the oscillating regime.
    pub still_sd: f64,
    /// First step of the `amp·sin(freq·t) + c_t` regime.
    pub sine_from: usize,
    pub sine_amp: f64,
    pub sine_freq: f64,
    /// `c_t ~ U[−c, c]`
    pub sine_noise: f64,
    /// `ε_t ~ U[−e, e]`
    pub obs_noise: f64,
    pub ar: f64,
    /// sd of the Gaussian innovation `z_t` driving `x_t`. Sets the
    /// signal-to-noise ratio against the fixed `±obs_noise` error.
    pub regressor_sd: f64,
    pub seed: u64,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            steps: 300,
            beta1: 7.0,
            jump_at: 100,
            jump: 4.0,
            walk_sd: 0.1,
            still_sd: 0.001,
            sine_from: 201,
            sine_amp: 5.0,
            sine_freq: 0.5,
            sine_noise: 2.0,
            obs_noise: 2.0,
            ar: 0.8,
            regressor_sd: 5.0,
            seed: 0,
        }
    }
}

impl Fig2Config {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Index `i` holds step `t = i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Data {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub betas: Vec<f64>,
}

pub fn gen_fig2(cfg: &Fig2Config) -> Fig2Data {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let walk = Normal::new(0.0, cfg.walk_sd).expect("walk sd");
    let still = Normal::new(0.0, cfg.still_sd).expect("still sd");
    let c_noise = Uniform::new_inclusive(-cfg.sine_noise, cfg.sine_noise).expect("sine noise");
    let z = Normal::new(0.0, cfg.regressor_sd).expect("regressor sd");
    let eps = Uniform::new_inclusive(-cfg.obs_noise, cfg.obs_noise).expect("obs noise");

    let n = cfg.steps;
    let mut betas = Vec::with_capacity(n);
    for t in 1..=n {
        let b = if t == 1 {
            cfg.beta1
        } else if t >= cfg.sine_from {
            cfg.sine_amp * (cfg.sine_freq * t as f64).sin() + c_noise.sample(&mut rng)
        } else {
            let prev = betas[t - 2];
            if t < cfg.jump_at {
                prev + walk.sample(&mut rng)
            } else if t == cfg.jump_at {
                prev + cfg.jump
            } else {
                prev + still.sample(&mut rng)
            }
        };
        betas.push(b);
    }
    let mut xs = Vec::with_capacity(n);
    let mut x = 0.0;
    for _ in 0..n {
        x = cfg.ar * x + z.sample(&mut rng);
        xs.push(x);
    }
    let ys = xs
        .iter()
        .zip(&betas)
        .map(|(x, b)| x * b + eps.sample(&mut rng))
        .collect();
    Fig2Data { xs, ys, betas }
}

/// Factor-model market with a target that tracks a fixed combination of the
/// explanatory streams up to a mean-reverting spread.
///
/// Stream returns: `r_t = L f_t + u_t`. Spread level:
/// `S_t = (1 − rate) S_{t−1} + vol·η_t`. Target return:
/// `a_t = w'r_t + S_t − S_{t−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    pub streams: usize,
    pub factors: usize,
    /// Return days; the price table has one more row.
    pub days: usize,
    /// `streams × factors` loadings; drawn from `N(1, 0.5²)` when absent.
    pub loadings: Option<DMatrix<f64>>,
    /// Target weights on the streams; drawn from `U[0, 2/streams]` when absent.
    pub weights: Option<Vec<f64>>,
    pub factor_drift: f64,
    pub factor_vol: f64,
    pub idio_vol: f64,
    pub spread_rate: f64,
    pub spread_vol: f64,
    pub stream_start: f64,
    pub target_start: f64,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            streams: 10,
            factors: 2,
            days: 750,
            loadings: None,
            weights: None,
            factor_drift: 0.0,
            factor_vol: 0.01,
            idio_vol: 0.005,
            spread_rate: 0.5,
            spread_vol: 0.005,
            stream_start: 50.0,
            target_start: 1400.0,
            start_date: NaiveDate::from_ymd_opt(2000, 1, 3).expect("date"),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketData {
    /// Target in column 0, streams after it.
    pub table: PriceTable,
    /// Spread level `S_1..S_days`.
    pub spread: Vec<f64>,
    pub weights: Vec<f64>,
    pub loadings: DMatrix<f64>,
}

/// Consecutive weekdays starting at `start` (rolled forward off a weekend).
pub fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

pub fn gen_market(cfg: &MarketConfig) -> MarketData {
    assert!(cfg.streams >= 1, "need at least one stream");
    assert!(
        cfg.spread_rate > 0.0 && cfg.spread_rate < 1.0,
        "spread mean-reversion rate must lie in (0, 1)"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = cfg.streams;
    let k = cfg.factors;

    let loadings = match &cfg.loadings {
        Some(l) => {
            assert_eq!(l.shape(), (p, k), "loadings shape");
            l.clone()
        }
        None => {
            let d = Normal::new(1.0, 0.5).expect("loading dist");
            DMatrix::from_fn(p, k, |_, _| d.sample(&mut rng))
        }
    };
    let weights = match &cfg.weights {
        Some(w) => {
            assert_eq!(w.len(), p, "weights length");
            w.clone()
        }
        None => (0..p).map(|_| rng.random_range(0.0..2.0 / p as f64)).collect(),
    };

    let fac = Normal::new(cfg.factor_drift, cfg.factor_vol).expect("factor vol");
    let idio = Normal::new(0.0, cfg.idio_vol).expect("idio vol");
    let shock = Normal::new(0.0, 1.0).expect("unit normal");

    let n = cfg.days;
    let w = DVector::from_vec(weights.clone());
    let mut prices = DMatrix::zeros(n + 1, p + 1);
    prices[(0, 0)] = cfg.target_start;
    for j in 0..p {
        prices[(0, j + 1)] = cfg.stream_start;
    }
    let mut log_t = cfg.target_start.ln();
    let mut log_s = vec![cfg.stream_start.ln(); p];
    let mut level = 0.0;
    let mut spread = Vec::with_capacity(n);
    for t in 0..n {
        let f = DVector::from_fn(k, |_, _| fac.sample(&mut rng));
        let mut r = &loadings * &f;
        for v in r.iter_mut() {
            *v += idio.sample(&mut rng);
        }
        let next = (1.0 - cfg.spread_rate) * level + cfg.spread_vol * shock.sample(&mut rng);
        let a = w.dot(&r) + (next - level);
        level = next;
        spread.push(level);

        log_t += a;
        prices[(t + 1, 0)] = log_t.exp();
        for j in 0..p {
            log_s[j] += r[j];
            prices[(t + 1, j + 1)] = log_s[j].exp();
        }
    }

    let mut labels = vec!["TARGET".to_string()];
    labels.extend((1..=p).map(|j| format!("S{j:03}")));
    MarketData {
        table: PriceTable::new(weekdays(cfg.start_date, n + 1), labels, prices),
        spread,
        weights,
        loadings,
    }
}
