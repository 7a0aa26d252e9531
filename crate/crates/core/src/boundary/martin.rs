//! Martin kernels `K(x, y) = G(x, y)/G(x₀, y)` and their boundary values
//! `C(u)_k/C(u)_{k₀} e^{u·(x−x₀)}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{dot_i, green_partial, GreenEstimate, GreenOptions, KernelClass, LatticeKernel};
use crate::spectral::{min_lambda, perron_at, solve_direction_from, BoundaryDirection};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MartinMethod {
    RatioOfGreen,
    BoundaryFormula,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MartinTarget {
    Point { y: Vec<i64>, level: usize },
    Direction { theta: Vec<f64>, u: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartinValue {
    pub source: (Vec<i64>, usize),
    pub target: MartinTarget,
    pub base: (Vec<i64>, usize),
    pub value: f64,
    pub method: MartinMethod,
    /// Half-width of the interval implied by both tail bounds.
    pub error_bound: f64,
    /// Lower and upper ends of that interval.
    pub interval: (f64, f64),
}

/// Stops doubling `n_max` once both tails are below this fraction.
const AUTO_TAIL: f64 = 1e-7;

/// Ratio of truncated Green sums.
///
/// When the kernel has a level set of directions, both sums are computed for
/// the kernel tilted at `u(θ)` with `θ` pointing from the base to the target,
/// which keeps the terms of order one; the exponential factor is restored
/// exactly. `n_max = None` doubles the truncation until both tails are small.
pub fn martin_kernel_numeric(
    kernel: &LatticeKernel,
    src: (&[i64], usize),
    dst: (&[i64], usize),
    base: (&[i64], usize),
    n_max: Option<usize>,
    opts: &GreenOptions,
) -> Result<MartinValue> {
    let d = kernel.dim();
    for p in [src.0, dst.0, base.0] {
        if p.len() != d {
            return Err(Error::Domain(format!("points must have {d} coordinates")));
        }
    }
    for l in [src.1, dst.1, base.1] {
        if l >= kernel.levels() {
            return Err(Error::Domain("level out of range".into()));
        }
    }
    let target = MartinTarget::Point { y: dst.0.to_vec(), level: dst.1 };
    let owned = |p: (&[i64], usize)| (p.0.to_vec(), p.1);
    if src == base {
        return Ok(MartinValue {
            source: owned(src),
            target,
            base: owned(base),
            value: 1.0,
            method: MartinMethod::RatioOfGreen,
            error_bound: 0.0,
            interval: (1.0, 1.0),
        });
    }
    let tilt = tilt_toward(kernel, base.0, dst.0);
    let (work, u) = match &tilt {
        Some(dir) => (kernel.tilt(&dir.u)?, dir.u.clone()),
        None => (kernel.clone(), vec![0.0; d]),
    };
    let steps = dst
        .0
        .iter()
        .zip(base.0)
        .map(|(a, b)| (a - b).unsigned_abs())
        .sum::<u64>() as usize;
    // the tilted walk reaches the target after about ‖y − x₀‖/‖∇λ(u)‖ steps
    let travel = match &tilt {
        Some(dir) => {
            let dist = dst.0.iter().zip(base.0).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>().sqrt();
            let speed = dir.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if speed > 0.0 { (dist / speed).ceil() as usize } else { steps }
        }
        None => steps,
    };
    let cap = 64 * (travel.max(steps) + 200);
    let mut n = n_max.unwrap_or(2 * travel.max(steps) + 200);
    let (ga, gb) = loop {
        let ga = green_partial(&work, src, dst, n, opts)?;
        let gb = green_partial(&work, base, dst, n, opts)?;
        let growing = ga.divergence_flag || gb.divergence_flag;
        if growing && (n_max.is_some() || n >= cap) {
            let g = if ga.divergence_flag { &ga } else { &gb };
            return Err(Error::Recurrence(format!(
                "Green sum shows no decay at n_max = {} (ratio {})",
                g.n_max, g.ratio
            )));
        }
        let small = |g: &GreenEstimate| g.tail_bound <= AUTO_TAIL * g.partial;
        if !growing && (n_max.is_some() || (small(&ga) && small(&gb)) || n >= cap) {
            break (ga, gb);
        }
        n *= 2;
    };
    if gb.partial <= 0.0 {
        return Err(Error::Domain("base point does not reach the target within n_max".into()));
    }
    // undo the tilt: G(x,y) = G_u(x,y) e^{-u·(y−x)}
    let factor = (dot_i(&u, src.0) - dot_i(&u, base.0)).exp();
    let value = ga.partial / gb.partial * factor;
    let lower = ga.partial / (gb.partial + gb.tail_bound) * factor;
    let upper = (ga.partial + ga.tail_bound) / gb.partial * factor;
    Ok(MartinValue {
        source: owned(src),
        target,
        base: owned(base),
        value,
        method: MartinMethod::RatioOfGreen,
        error_bound: (value - lower).max(upper - value),
        interval: (lower, upper),
    })
}

fn tilt_toward(kernel: &LatticeKernel, base: &[i64], dst: &[i64]) -> Option<BoundaryDirection> {
    let theta: Vec<f64> = dst.iter().zip(base).map(|(a, b)| (a - b) as f64).collect();
    if theta.iter().all(|v| *v == 0.0) {
        return None;
    }
    let min = min_lambda(kernel).ok()?;
    if !min.hyp2_holds {
        return None;
    }
    solve_direction_from(kernel, &theta, &min).ok()
}

/// `C(u)_k/C(u)_{k₀} e^{u·(x−x₀)}` at `u = u(θ)`.
pub fn martin_kernel_boundary(
    kernel: &LatticeKernel,
    src: (&[i64], usize),
    theta: &[f64],
    base: (&[i64], usize),
) -> Result<MartinValue> {
    let min = min_lambda(kernel)?;
    let dir = solve_direction_from(kernel, theta, &min)?;
    martin_kernel_boundary_at(kernel, src, &dir, base)
}

/// As [`martin_kernel_boundary`] with a solved direction.
pub fn martin_kernel_boundary_at(
    kernel: &LatticeKernel,
    src: (&[i64], usize),
    dir: &BoundaryDirection,
    base: (&[i64], usize),
) -> Result<MartinValue> {
    if src.0.len() != kernel.dim() || base.0.len() != kernel.dim() {
        return Err(Error::Domain("points have the wrong dimension".into()));
    }
    if src.1 >= kernel.levels() || base.1 >= kernel.levels() {
        return Err(Error::Domain("level out of range".into()));
    }
    let c = perron_at(kernel, &dir.u)?.c;
    let value = if src == base {
        1.0
    } else {
        c[src.1] / c[base.1] * (dot_i(&dir.u, src.0) - dot_i(&dir.u, base.0)).exp()
    };
    Ok(MartinValue {
        source: (src.0.to_vec(), src.1),
        target: MartinTarget::Direction { theta: dir.theta.clone(), u: dir.u.clone() },
        base: (base.0.to_vec(), base.1),
        value,
        method: MartinMethod::BoundaryFormula,
        error_bound: 0.0,
        interval: (value, value),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicCheck {
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub radius: u64,
    pub max_residual: f64,
    pub argmax: (Vec<i64>, usize),
}

/// Largest relative defect `|P h − h|/h` of `h(x,k) = C(u)_k e^{u·x}` over
/// the box `[−radius, radius]^d × levels`.
pub fn minimal_harmonic_check(kernel: &LatticeKernel, theta: &[f64], radius: u64) -> Result<HarmonicCheck> {
    if kernel.class() != KernelClass::Markov {
        return Err(Error::Class(format!("harmonic check needs a markov kernel, got {}", kernel.class())));
    }
    let min = min_lambda(kernel)?;
    let dir = solve_direction_from(kernel, theta, &min)?;
    let c = perron_at(kernel, &dir.u)?.c;
    let d = kernel.dim();
    let r = radius as i64;
    let geom = crate::kernel::BoxGeom::from_corners(&vec![-r; d], &vec![r; d]);
    let h = |x: &[i64], k: usize| c[k] * dot_i(&dir.u, x).exp();
    let mut worst = (0.0f64, (vec![0i64; d], 0usize));
    let mut y = vec![0i64; d];
    for x in geom.iter_coords() {
        for k in 0..kernel.levels() {
            let mut ph = 0.0;
            for e in kernel.entries().iter().filter(|e| e.from == k) {
                for c in 0..d {
                    y[c] = x[c] + e.offset[c];
                }
                ph += e.weight * h(&y, e.to);
            }
            let hx = h(&x, k);
            let res = (ph - hx).abs() / hx;
            if res > worst.0 || (worst.0 == 0.0 && x.iter().all(|v| *v == 0) && k == 0) {
                worst = (res, (x.clone(), k));
            }
        }
    }
    Ok(HarmonicCheck {
        theta: dir.theta,
        u: dir.u,
        radius,
        max_residual: worst.0,
        argmax: worst.1,
    })
}
