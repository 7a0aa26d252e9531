//! Local-limit error functionals and the Green-function asymptote.
//!
//! `A_n(x,u) = (2πn)^{d/2} P_u^(n)(0,x) − |Q_u|^{-1/2} e^{-Σ_u(x−n∇λ(u))/(2n)} C(u)ν(u)`,
//! optionally weighted by `(‖x − n∇λ(u)‖/√n)^γ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{
    convolution_power_with, green_partial, nearest_lattice_point, ConvolutionEngine,
    GreenOptions, LatticeKernel, DEFAULT_CELL_BUDGET,
};
use crate::spectral::{solve_direction, spectral_profile, SpectralProfile, LEVEL_TOL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LltReport {
    pub u: Vec<f64>,
    pub n: usize,
    pub gamma: f64,
    /// `max(inside, outside_bound)`.
    pub sup_error: f64,
    /// Maximizer over the support box.
    pub argmax: Vec<i64>,
    pub inside: f64,
    /// Analytic bound on the Gaussian term alone outside the support box.
    pub outside_bound: f64,
}

fn quad(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let d = v.len();
    (0..d)
        .map(|a| (0..d).map(|b| v[a] * m[(a, b)] * v[b]).sum::<f64>())
        .sum()
}

fn weight(dist: f64, n: usize, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else {
        (dist / (n as f64).sqrt()).powf(gamma)
    }
}

fn level_profile(kernel: &LatticeKernel, u: &[f64]) -> Result<SpectralProfile> {
    let prof = spectral_profile(kernel, u)?;
    if (prof.lambda() - 1.0).abs() > LEVEL_TOL {
        return Err(Error::Level { residual: (prof.lambda() - 1.0).abs(), tolerance: LEVEL_TOL });
    }
    Ok(prof)
}

/// `sup_x ‖Ã_n(x,u,γ)‖_max` over `Z^d`.
pub fn llt_error(kernel: &LatticeKernel, u: &[f64], n: usize, gamma: f64) -> Result<LltReport> {
    llt_error_with(kernel, u, n, gamma, DEFAULT_CELL_BUDGET)
}

pub fn llt_error_with(
    kernel: &LatticeKernel,
    u: &[f64],
    n: usize,
    gamma: f64,
    budget: u128,
) -> Result<LltReport> {
    let d = kernel.dim();
    if !(0.0..=2.0 * d as f64).contains(&gamma) {
        return Err(Error::Domain(format!("γ = {gamma} not in [0, {}]", 2 * d)));
    }
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let prof = level_profile(kernel, u)?;
    let (_, sigma, det_q) = prof.q_or_err()?;
    let tilted = kernel.tilt(u)?;
    let field = convolution_power_with(&tilted, n, ConvolutionEngine::Auto, budget)?;
    let levels = kernel.levels();
    let nf = n as f64;
    let scale = (2.0 * PI * nf).powf(d as f64 / 2.0);
    let amp = det_q.powf(-0.5);
    let center: Vec<f64> = prof.grad.iter().map(|g| g * nf).collect();
    let cnu: Vec<f64> = (0..levels * levels)
        .map(|i| prof.perron.c[i / levels] * prof.perron.nu[i % levels])
        .collect();
    let geom = field.geom().clone();
    let mut inside = 0.0f64;
    let mut argmax = vec![0i64; d];
    let mut y = vec![0.0; d];
    for (idx, x) in geom.iter_coords().enumerate() {
        for c in 0..d {
            y[c] = x[c] as f64 - center[c];
        }
        let g = amp * (-quad(sigma, &y) / (2.0 * nf)).exp();
        let dist = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let w = weight(dist, n, gamma);
        let mut e = 0.0f64;
        for k in 0..levels {
            for j in 0..levels {
                let a = scale * field.values(k, j)[idx] - g * cnu[k * levels + j];
                e = e.max(a.abs());
            }
        }
        let e = e * w;
        if e > inside {
            inside = e;
            argmax = x;
        }
    }
    // outside the box only the Gaussian term remains; Σ(y) ≥ σ_min ‖y‖²
    let smin = SymmetricEigen::new(sigma.clone()).eigenvalues.min();
    let lo = &geom.lo;
    let hi = geom.hi();
    let mut r0 = f64::INFINITY;
    for c in 0..d {
        let below = center[c] - (lo[c] as f64 - 1.0);
        let above = (hi[c] as f64 + 1.0) - center[c];
        r0 = r0.min(below.min(above));
    }
    let r0 = r0.max(0.0);
    let rstar = if gamma > 0.0 { (gamma * nf / smin).sqrt() } else { 0.0 };
    let r = r0.max(rstar);
    let cmax = cnu.iter().copied().fold(0.0, f64::max);
    let outside_bound = amp * cmax * (-smin * r * r / (2.0 * nf)).exp() * weight(r, n, gamma);
    Ok(LltReport {
        u: u.to_vec(),
        n,
        gamma,
        sup_error: inside.max(outside_bound),
        argmax,
        inside,
        outside_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenAsymptote {
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub target: Vec<i64>,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub n_max: usize,
    pub tail_bound: f64,
}

/// `(2πt)^{(d−1)/2} G_{k,j;u}(x, ⟨t∇λ(u)⟩)` against
/// `C(u)_k ν(u)_j / √(|Q_u| Σ_u(∇λ(u)))` with `u = u(θ)`.
///
/// `n_max` starts near `2t` and doubles until the tail is below
/// `1e-4` of the partial sum.
pub fn green_vs_asymptote(
    kernel: &LatticeKernel,
    theta: &[f64],
    t: f64,
    x: &[i64],
    k: usize,
    j: usize,
    opts: &GreenOptions,
) -> Result<GreenAsymptote> {
    let d = kernel.dim();
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    if x.len() != d || k >= kernel.levels() || j >= kernel.levels() {
        return Err(Error::Domain("source point or levels out of range".into()));
    }
    let dir = solve_direction(kernel, theta)?;
    let prof = level_profile(kernel, &dir.u)?;
    let (_, sigma, det_q) = prof.q_or_err()?;
    let rhs = prof.perron.c[k] * prof.perron.nu[j] / (det_q * quad(sigma, &prof.grad)).sqrt();
    let target = nearest_lattice_point(&prof.grad.iter().map(|g| g * t).collect::<Vec<_>>());
    let tilted = kernel.tilt(&dir.u)?;
    let mut n_max = (2.0 * t).ceil() as usize + 100;
    loop {
        let g = green_partial(&tilted, (x, k), (&target, j), n_max, opts)?;
        let done = !g.divergence_flag && g.tail_bound <= 1e-4 * g.partial;
        if done || n_max > (64.0 * t) as usize + 1000 {
            if !done {
                return Err(Error::Tolerance {
                    what: "Green tail at the asymptote target".into(),
                    gap: g.tail_bound,
                    tolerance: 1e-4 * g.partial,
                });
            }
            let lhs = (2.0 * PI * t).powf((d as f64 - 1.0) / 2.0) * g.partial;
            return Ok(GreenAsymptote {
                theta: dir.theta,
                u: dir.u,
                target,
                lhs,
                rhs,
                rel_error: (lhs - rhs).abs() / rhs,
                n_max,
                tail_bound: g.tail_bound,
            });
        }
        n_max *= 2;
    }
}
