#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct minimiser of
/// `Σ (y_t − x_t'β_t)² + μ Σ |β_{t+1} − β_t|² + β_1'S_0β_1 − 2β_1's_0`
/// by assembling the pT × pT block-tridiagonal normal equations densely.
pub fn brute_force_path(
    xs: &DMatrix<f64>,
    ys: &DVector<f64>,
    mu: f64,
    s0: &DMatrix<f64>,
    lin0: &DVector<f64>,
) -> DMatrix<f64> {
    let (t_len, p) = xs.shape();
    let n = t_len * p;
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut g = DVector::<f64>::zeros(n);
    for t in 0..t_len {
        let x = xs.row(t).transpose();
        let xx = &x * x.transpose();
        let neighbours = (t > 0) as usize + (t + 1 < t_len) as usize;
        for i in 0..p {
            for j in 0..p {
                h[(t * p + i, t * p + j)] += xx[(i, j)];
            }
            h[(t * p + i, t * p + i)] += mu * neighbours as f64;
            g[t * p + i] += x[i] * ys[t];
            if t + 1 < t_len {
                h[(t * p + i, (t + 1) * p + i)] -= mu;
                h[((t + 1) * p + i, t * p + i)] -= mu;
            }
        }
    }
    for i in 0..p {
        for j in 0..p {
            h[(i, j)] += s0[(i, j)];
        }
        g[i] += lin0[i];
    }
    let sol = h.lu().solve(&g).expect("oracle system is nonsingular");
    DMatrix::from_fn(t_len, p, |t, i| sol[t * p + i])
}

/// Value of the penalised cost (prior term included) for a given path.
pub fn fls_cost(
    xs: &DMatrix<f64>,
    ys: &DVector<f64>,
    mu: f64,
    s0: &DMatrix<f64>,
    lin0: &DVector<f64>,
    path: &DMatrix<f64>,
) -> f64 {
    let t_len = xs.nrows();
    let mut c = 0.0;
    for t in 0..t_len {
        let r = ys[t] - xs.row(t).dot(&path.row(t));
        c += r * r;
        if t + 1 < t_len {
            c += mu * (path.row(t + 1) - path.row(t)).norm_squared();
        }
    }
    let b1 = path.row(0).transpose();
    c + b1.dot(&(s0 * &b1)) - 2.0 * b1.dot(lin0)
}

/// Sum of squared coefficient increments `Σ ξ_t`.
pub fn roughness(path: &DMatrix<f64>) -> f64 {
    (1..path.nrows())
        .map(|t| (path.row(t) - path.row(t - 1)).norm_squared())
        .sum()
}

pub fn random_instance(rng: &mut ChaCha8Rng, t_len: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let xs = DMatrix::from_fn(t_len, p, |_, _| rng.random_range(-2.0..2.0));
    let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ys = DVector::from_fn(t_len, |t, _| {
        (0..p).map(|i| xs[(t, i)] * beta[i]).sum::<f64>() + rng.random_range(-0.5..0.5)
    });
    (xs, ys)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
