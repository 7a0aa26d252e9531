//! The minimum of `λ` and the points of the level set `H = {λ = 1}`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::LatticeKernel;

use super::profile::{hessian_fd, lambda_and_grad};

/// `λ_min` must be below `1 − HYP2_MARGIN` for the level set to be a sphere.
pub const HYP2_MARGIN: f64 = 1e-10;

pub const LEVEL_RESIDUAL_MAX: f64 = 1e-11;
pub const DIRECTION_RESIDUAL_MAX: f64 = 1e-9;

const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinLambda {
    pub u_star: Vec<f64>,
    pub lambda_min: f64,
    pub hyp2_holds: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryDirection {
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub grad: Vec<f64>,
    pub residual_level: f64,
    pub residual_dir: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest `‖u‖` explored before declaring that no minimizer exists.
fn u_limit(kernel: &LatticeKernel) -> f64 {
    600.0 / kernel.support_radius().max(1) as f64
}

/// Global minimizer of the strictly convex `λ` by damped Newton.
pub fn min_lambda(kernel: &LatticeKernel) -> Result<MinLambda> {
    let d = kernel.dim();
    let mut u = vec![0.0; d];
    let limit = u_limit(kernel);
    for it in 0..MAX_NEWTON {
        let (lam, g) = lambda_and_grad(kernel, &u)?;
        let gn = norm(&g);
        if gn <= 1e-13 * lam.max(1e-300) {
            return Ok(finish_min(u, lam, it));
        }
        let h = hessian_fd(kernel, &u)?;
        let gv = DVector::from_column_slice(&g);
        let step = match h.clone().cholesky() {
            Some(ch) => -ch.solve(&gv),
            None => -gv.clone(),
        };
        if gn < 1e-7 * lam {
            let next: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (ln, gnext) = lambda_and_grad(kernel, &next)?;
            if norm(&gnext) >= gn {
                return Ok(finish_min(u, lam, it));
            }
            u = next;
            let _ = ln;
            continue;
        }
        let slope = gv.dot(&step);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            if let Ok((lc, _)) = lambda_and_grad(kernel, &cand) {
                if lc <= lam + 1e-4 * t * slope {
                    u = cand;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            return Err(Error::Numerical(format!(
                "line search stalled at u = {u:?}, λ = {lam}, ‖∇λ‖ = {gn:e}"
            )));
        }
        if norm(&u) > limit {
            return Err(Error::Numerical(format!(
                "λ has no minimizer: iterates left |u| ≤ {limit} (λ = {lam:e}); the support lies in a half-space"
            )));
        }
    }
    Err(Error::Numerical(format!(
        "min_lambda did not converge in {MAX_NEWTON} iterations (u = {u:?})"
    )))
}

fn finish_min(u: Vec<f64>, lambda_min: f64, iterations: usize) -> MinLambda {
    MinLambda {
        u_star: u,
        lambda_min,
        hyp2_holds: lambda_min < 1.0 - HYP2_MARGIN,
        iterations,
    }
}

/// Minimizer of `log λ(u) − t θ·u`, warm-started at `u0`; `None` when the
/// iterates run away (no minimizer for this `t`).
fn tilted_argmin(kernel: &LatticeKernel, theta: &[f64], t: f64, u0: &[f64]) -> Option<(Vec<f64>, f64)> {
    let limit = u_limit(kernel);
    let mut u = u0.to_vec();
    let objective = |lam: f64, u: &[f64]| lam.ln() - t * theta.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
    for _ in 0..MAX_NEWTON {
        let (lam, g) = lambda_and_grad(kernel, &u).ok()?;
        let r: Vec<f64> = g.iter().zip(theta).map(|(gi, th)| gi / lam - t * th).collect();
        if norm(&r) <= 1e-12 {
            return Some((u, lam.ln()));
        }
        let h = hessian_fd(kernel, &u).ok()?;
        let gv = DVector::from_column_slice(&g);
        let hl = h / lam - &gv * gv.transpose() / (lam * lam);
        let rv = DVector::from_column_slice(&r);
        let step = match hl.cholesky() {
            Some(ch) => -ch.solve(&rv),
            None => -rv.clone(),
        };
        let f0 = objective(lam, &u);
        let slope = rv.dot(&step);
        let mut tt = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + tt * b).collect();
            if let Ok((lc, _)) = lambda_and_grad(kernel, &cand) {
                if objective(lc, &cand) <= f0 + 1e-4 * tt * slope + 1e-15 * f0.abs() {
                    u = cand;
                    moved = true;
                    break;
                }
            }
            tt *= 0.5;
        }
        if !moved || norm(&u) > limit {
            return None;
        }
    }
    None
}

/// The unique `u ∈ H` whose gradient `∇λ(u)` points along `θ`.
pub fn solve_direction(kernel: &LatticeKernel, theta: &[f64]) -> Result<BoundaryDirection> {
    let min = min_lambda(kernel)?;
    solve_direction_from(kernel, theta, &min)
}

/// As [`solve_direction`], reusing a computed minimum.
pub fn solve_direction_from(kernel: &LatticeKernel, theta: &[f64], min: &MinLambda) -> Result<BoundaryDirection> {
    let d = kernel.dim();
    if theta.len() != d || theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("θ must be a finite vector in R^{d}")));
    }
    let tn = norm(theta);
    if tn == 0.0 {
        return Err(Error::Domain("θ must be nonzero".into()));
    }
    let theta: Vec<f64> = theta.iter().map(|v| v / tn).collect();
    if !min.hyp2_holds {
        return Err(Error::Assumption(format!(
            "min λ = {} is not below 1; the level set has no direction structure",
            min.lambda_min
        )));
    }
    // homotopy in the multiplier t: log λ(u_t) increases from log λ_min
    let mut lo = (0.0, min.u_star.clone(), min.lambda_min.ln());
    let mut hi: Option<(f64, Vec<f64>, f64)> = None;
    let mut t = 0.25;
    for _ in 0..80 {
        match tilted_argmin(kernel, &theta, t, &lo.1) {
            Some((u, l)) if l < 0.0 => {
                lo = (t, u, l);
                t *= 2.0;
            }
            Some((u, l)) => {
                hi = Some((t, u, l));
                break;
            }
            None => {
                hi = Some((t, Vec::new(), f64::INFINITY));
                break;
            }
        }
    }
    let Some(mut hi) = hi else {
        return Err(Error::Numerical("could not bracket the level set along θ".into()));
    };
    let mut best = lo.clone();
    for _ in 0..200 {
        if best.2.abs() < 1e-7 {
            break;
        }
        let tm = if hi.2.is_finite() {
            // regula falsi on log λ, kept inside the bracket
            let w = lo.2 / (lo.2 - hi.2);
            lo.0 + w.clamp(0.1, 0.9) * (hi.0 - lo.0)
        } else {
            0.5 * (lo.0 + hi.0)
        };
        match tilted_argmin(kernel, &theta, tm, &lo.1) {
            Some((u, l)) if l < 0.0 => {
                lo = (tm, u, l);
                best = lo.clone();
            }
            Some((u, l)) => {
                hi = (tm, u, l);
                best = hi.clone();
            }
            None => hi = (tm, Vec::new(), f64::INFINITY),
        }
        if hi.0 - lo.0 < 1e-15 * hi.0 {
            break;
        }
    }
    polish(kernel, &theta, best.1)
}

/// Damped Newton on `∇λ(u) = sθ`, `λ(u) = 1`.
fn polish(kernel: &LatticeKernel, theta: &[f64], mut u: Vec<f64>) -> Result<BoundaryDirection> {
    let d = theta.len();
    let residual = |u: &[f64], s: f64| -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let (lam, g) = lambda_and_grad(kernel, u)?;
        let mut r: Vec<f64> = g.iter().zip(theta).map(|(gi, th)| gi - s * th).collect();
        r.push(lam - 1.0);
        Ok((lam, g, r))
    };
    let (_, g0, _) = residual(&u, 0.0)?;
    let mut s = g0.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>().max(1e-12);
    for _ in 0..60 {
        let (lam, g, r) = residual(&u, s)?;
        let gn = norm(&g);
        let dir_res = norm(&g.iter().zip(theta).map(|(a, b)| a / gn - b).collect::<Vec<_>>());
        if (lam - 1.0).abs() <= 1e-14 && dir_res <= 1e-12 {
            break;
        }
        let h = hessian_fd(kernel, &u)?;
        let mut j = DMatrix::zeros(d + 1, d + 1);
        for a in 0..d {
            for b in 0..d {
                j[(a, b)] = h[(a, b)];
            }
            j[(a, d)] = -theta[a];
            j[(d, a)] = g[a];
        }
        let Some(step) = j.lu().solve(&(-DVector::from_column_slice(&r))) else {
            return Err(Error::Numerical("singular KKT system".into()));
        };
        let r0 = norm(&r);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = (0..d).map(|a| u[a] + t * step[a]).collect();
            let sc = s + t * step[d];
            if let Ok((_, _, rc)) = residual(&cand, sc) {
                if norm(&rc) < r0 {
                    u = cand;
                    s = sc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let (lam, g) = lambda_and_grad(kernel, &u)?;
    let gn = norm(&g);
    if gn == 0.0 {
        return Err(Error::Numerical("gradient vanishes at the solved point".into()));
    }
    let residual_level = (lam - 1.0).abs();
    let residual_dir = norm(&g.iter().zip(theta).map(|(a, b)| a / gn - b).collect::<Vec<_>>());
    if residual_level > LEVEL_RESIDUAL_MAX || residual_dir > DIRECTION_RESIDUAL_MAX {
        return Err(Error::Numerical(format!(
            "direction solve stopped with residuals level {residual_level:e}, direction {residual_dir:e}"
        )));
    }
    Ok(BoundaryDirection {
        theta: theta.to_vec(),
        u,
        grad: g,
        residual_level,
        residual_dir,
    })
}
