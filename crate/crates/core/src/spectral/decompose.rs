//! Numerical check of `F^n = λ^n π + R^n` with `π = C ν`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::Result;

use super::perron::perron;

/// Remainders below this are at roundoff level and excluded from the fit.
const FIT_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub lambda: f64,
    /// Row-major `π = C ν`, normalized so that `ν·C = 1`.
    pub pi: Vec<f64>,
    pub second_modulus: f64,
    /// `‖F^n/λ^n − π‖_max` for `n = 1..=n_max`.
    pub remainders: Vec<f64>,
    /// Geometric rate fitted to the remainders above roundoff level.
    pub fitted_rate: f64,
    /// `|λ₂|/λ`.
    pub predicted_rate: f64,
    /// `fitted_rate ≤ predicted_rate + slack`.
    pub certified: bool,
}

/// Tolerance added to the predicted rate when certifying the fit.
pub const RATE_SLACK: f64 = 1e-3;

pub fn spectral_decompose(f: &DMatrix<f64>, n_max: usize) -> Result<DecompositionReport> {
    let p = perron(f)?;
    let n = f.nrows();
    let mut pi = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            pi[(i, j)] = p.c[i] * p.nu[j];
        }
    }
    let g = f / p.lambda;
    let mut power = DMatrix::identity(n, n);
    let mut remainders = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        power = &power * &g;
        remainders.push((&power - &pi).amax());
    }
    let predicted_rate = if p.second_modulus.is_finite() {
        p.second_modulus / p.lambda
    } else {
        f64::NAN
    };
    let fitted_rate = fit_rate(&remainders);
    Ok(DecompositionReport {
        lambda: p.lambda,
        pi: pi.transpose().as_slice().to_vec(),
        second_modulus: p.second_modulus,
        remainders,
        fitted_rate,
        predicted_rate,
        certified: !(fitted_rate > predicted_rate + RATE_SLACK),
    })
}

/// Least-squares slope of `log r_n` over the second half of the usable range.
fn fit_rate(r: &[f64]) -> f64 {
    let usable: Vec<(f64, f64)> = r
        .iter()
        .enumerate()
        .take_while(|(_, &v)| v > FIT_FLOOR)
        .map(|(i, &v)| ((i + 1) as f64, v.ln()))
        .collect();
    if usable.len() < 2 {
        return 0.0;
    }
    let tail = &usable[usable.len() / 2..];
    if tail.len() < 2 {
        let (a, b) = (usable[usable.len() - 2], usable[usable.len() - 1]);
        return ((b.1 - a.1) / (b.0 - a.0)).exp();
    }
    let m = tail.len() as f64;
    let xbar = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let ybar = tail.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = tail.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    (sxy / sxx).exp()
}
