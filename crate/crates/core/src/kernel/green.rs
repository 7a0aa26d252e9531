//! Truncated Green sums `Σ_{n≤n_max} p^(n)_{k,j}(x, y)` with a tail estimate.
//!
//! Two engines compute the same series. The direct engine steps the kernel
//! on a box pruned to states that can still reach the target before `n_max`
//! and records every term. The spectral engine evaluates the series on a
//! discrete Fourier grid large enough to avoid aliasing, summing the matrix
//! geometric series `Σ ψ(ξ)^n` per frequency; it records only the terms
//! needed for the tail fit.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{cmat_geometric, cmat_pow};

use super::geom::{check_budget, step_fields, BoxGeom, StepEntries};
use super::{LatticeKernel, DEFAULT_CELL_BUDGET};

/// Number of trailing terms used for the tail fit.
pub const TAIL_WINDOW: usize = 10;

/// Fitted per-step ratios at or above this value count as divergent.
const DIVERGENCE_RATIO: f64 = 1.0 - 1e-6;

/// Terms this small are treated as zero; below it roundoff dominates the
/// fitted ratio.
const UNDERFLOW_FLOOR: f64 = 1e-280;

/// Decay exponents at or below this value count as divergent.
const DIVERGENT_EXPONENT: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GreenEngine {
    /// Whichever of the two engines has the smaller estimated cost.
    #[default]
    Auto,
    Direct,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenOptions {
    pub engine: GreenEngine,
    /// Cap on stored cells for the direct engine and on grid points for the
    /// spectral engine.
    pub budget: u128,
}

impl Default for GreenOptions {
    fn default() -> Self {
        Self {
            engine: GreenEngine::Auto,
            budget: DEFAULT_CELL_BUDGET,
        }
    }
}

/// How the tail beyond `n_max` was modeled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailRegime {
    /// Fewer than [`TAIL_WINDOW`] terms were available.
    Undetermined,
    /// The last terms vanish.
    Vanishing,
    /// Terms decay like `r^n`.
    Geometric,
    /// Terms decay like `n^{-exponent}`; the fitted ratio drifts toward 1.
    Polynomial { exponent: f64 },
    /// Terms are still growing at `n_max`.
    Growing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenEstimate {
    pub partial: f64,
    pub n_max: usize,
    pub tail_bound: f64,
    pub divergence_flag: bool,
    /// Fitted per-step ratio over the last [`TAIL_WINDOW`] terms.
    pub ratio: f64,
    pub regime: TailRegime,
    /// Recorded `(n, p^(n))` pairs: every term for the direct engine, the
    /// fit windows for the spectral engine.
    pub terms: Vec<(usize, f64)>,
}

impl GreenEstimate {
    /// Partial sum plus the modeled tail.
    pub fn extrapolated(&self) -> f64 {
        self.partial + self.tail_bound
    }
}

/// Truncated Green sum from `src = (x, k)` to `dst = (y, j)`.
pub fn green_partial(
    kernel: &LatticeKernel,
    src: (&[i64], usize),
    dst: (&[i64], usize),
    n_max: usize,
    opts: &GreenOptions,
) -> Result<GreenEstimate> {
    let d = kernel.dim();
    if src.0.len() != d || dst.0.len() != d {
        return Err(Error::Domain(format!("points must have {d} coordinates")));
    }
    if src.1 >= kernel.levels() || dst.1 >= kernel.levels() {
        return Err(Error::Domain("level out of range".into()));
    }
    let z: Vec<i64> = dst.0.iter().zip(src.0).map(|(a, b)| a - b).collect();
    let engine = match opts.engine {
        GreenEngine::Auto => {
            let fits = spectral_grid(kernel, n_max).cells_u128() <= opts.budget;
            if fits && spectral_cost(kernel, n_max) < direct_cost(kernel, &z, n_max) {
                GreenEngine::Spectral
            } else {
                GreenEngine::Direct
            }
        }
        e => e,
    };
    match engine {
        GreenEngine::Spectral => spectral(kernel, src.1, dst.1, &z, n_max, opts.budget),
        _ => direct(kernel, src.1, dst.1, &z, n_max, opts.budget),
    }
}

fn forward_box(lo: &[i64], hi: &[i64], m: i64) -> (Vec<i64>, Vec<i64>) {
    (
        lo.iter().map(|a| a * m).collect(),
        hi.iter().map(|a| a * m).collect(),
    )
}

/// States at step `m` from which `z` is still reachable by step `n_max`.
fn pruned_box(lo: &[i64], hi: &[i64], z: &[i64], m: i64, n_max: i64) -> BoxGeom {
    let (flo, fhi) = forward_box(lo, hi, m);
    let s = n_max - m;
    let blo: Vec<i64> = z.iter().zip(hi).map(|(zc, h)| zc - (s * h).max(0)).collect();
    let bhi: Vec<i64> = z.iter().zip(lo).map(|(zc, l)| zc - (s * l).min(0)).collect();
    BoxGeom::from_corners(&flo, &fhi).intersect(&BoxGeom::from_corners(&blo, &bhi))
}

fn direct_cost(kernel: &LatticeKernel, z: &[i64], n_max: usize) -> f64 {
    let (lo, hi) = kernel.offset_bounds();
    let nnz = kernel.entries().len().max(1) as f64;
    (0..=n_max as i64)
        .map(|m| pruned_box(&lo, &hi, z, m, n_max as i64).cells_u128() as f64)
        .sum::<f64>()
        * nnz
}

fn spectral_grid(kernel: &LatticeKernel, n_max: usize) -> BoxGeom {
    let (lo, hi) = kernel.offset_bounds();
    let n = n_max as i64;
    let glo: Vec<i64> = lo.iter().map(|a| (a * n).min(0)).collect();
    let ghi: Vec<i64> = hi.iter().map(|a| (a * n).max(0)).collect();
    BoxGeom::from_corners(&glo, &ghi)
}

fn spectral_cost(kernel: &LatticeKernel, n_max: usize) -> f64 {
    let n = kernel.levels() as f64;
    let logn = (n_max.max(2) as f64).log2();
    let per_point = 5.0 * logn * n * n * n + 4.0 * TAIL_WINDOW as f64 * n * n
        + (kernel.entries().len() * kernel.dim()) as f64;
    spectral_grid(kernel, n_max).cells_u128() as f64 * per_point * 4.0
}

fn direct(
    kernel: &LatticeKernel,
    k: usize,
    j: usize,
    z: &[i64],
    n_max: usize,
    budget: u128,
) -> Result<GreenEstimate> {
    let levels = kernel.levels();
    let d = kernel.dim();
    let (lo, hi) = kernel.offset_bounds();
    let entries = StepEntries::new(kernel);
    let nm = n_max as i64;
    let mut geom = pruned_box(&lo, &hi, z, 0, nm);
    let mut fields = vec![vec![0.0; geom.cells()]; levels];
    if let Some(i) = geom.index(&vec![0; d]) {
        fields[k][i] = 1.0;
    }
    let mut terms = Vec::with_capacity(n_max + 1);
    for m in 0..=nm {
        let t = geom.index(z).map(|i| fields[j][i]).unwrap_or(0.0);
        terms.push(t);
        if m == nm {
            break;
        }
        let next = pruned_box(&lo, &hi, z, m + 1, nm);
        if next.is_empty() || geom.is_empty() {
            terms.resize(n_max + 1, 0.0);
            break;
        }
        check_budget(
            "pruned Green box",
            next.cells_u128() * levels as u128,
            budget,
        )?;
        fields = step_fields(&entries, levels, &fields, &geom, &next);
        geom = next;
    }
    let partial: f64 = terms.iter().sum();
    let late = &terms[(n_max + 1).saturating_sub(TAIL_WINDOW)..];
    let early = early_window_end(n_max).map(|end| (&terms[end + 1 - TAIL_WINDOW..=end], end));
    let tail = analyze_tail(late, n_max, early, UNDERFLOW_FLOOR);
    Ok(GreenEstimate {
        partial,
        n_max,
        tail_bound: tail.bound,
        divergence_flag: tail.divergent,
        ratio: tail.ratio,
        regime: tail.regime,
        terms: terms.into_iter().enumerate().collect(),
    })
}

/// End index of the earlier window used to detect polynomial decay.
fn early_window_end(n_max: usize) -> Option<usize> {
    (n_max >= 4 * TAIL_WINDOW).then_some(n_max / 2)
}

fn spectral(
    kernel: &LatticeKernel,
    k: usize,
    j: usize,
    z: &[i64],
    n_max: usize,
    budget: u128,
) -> Result<GreenEstimate> {
    let levels = kernel.levels();
    let d = kernel.dim();
    let grid = spectral_grid(kernel, n_max);
    check_budget("spectral Green grid", grid.cells_u128(), budget)?;
    let (lo, hi) = kernel.offset_bounds();
    let shape = grid.shape.clone();
    let width: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as usize).collect();
    // per-axis tables e^{iξΔ} and e^{-iξz}
    let mut step_tab: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    let mut phase_tab: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    for c in 0..d {
        let m = shape[c];
        let mut st = Vec::with_capacity(m * width[c]);
        let mut ph = Vec::with_capacity(m);
        for q in 0..m {
            let xi = 2.0 * PI * q as f64 / m as f64;
            for delta in lo[c]..=hi[c] {
                st.push(Complex64::from_polar(1.0, xi * delta as f64));
            }
            let zr = z[c].rem_euclid(m as i64) as f64;
            ph.push(Complex64::from_polar(1.0, -xi * zr));
        }
        step_tab.push(st);
        phase_tab.push(ph);
    }
    let late_start = (n_max + 1).saturating_sub(TAIL_WINDOW);
    let late_len = n_max + 1 - late_start;
    let early_end = early_window_end(n_max);
    let early_start = early_end.map(|e| e + 1 - TAIL_WINDOW);

    let entries = kernel.entries();
    let mut acc_sum = Complex64::new(0.0, 0.0);
    let mut acc_late = vec![Complex64::new(0.0, 0.0); late_len];
    let mut acc_early = vec![Complex64::new(0.0, 0.0); TAIL_WINDOW];
    let mut mass_late = vec![0.0; late_len];
    let mut mass_early = vec![0.0; TAIL_WINDOW];
    let mut q = vec![0usize; d];
    let mut psi = vec![Complex64::new(0.0, 0.0); levels * levels];
    let mut row = vec![Complex64::new(0.0, 0.0); levels];
    for flat in 0..grid.cells() {
        if flat > 0 {
            for c in (0..d).rev() {
                q[c] += 1;
                if q[c] < shape[c] {
                    break;
                }
                q[c] = 0;
            }
        }
        psi.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for e in entries {
            let mut f = Complex64::new(e.weight, 0.0);
            for c in 0..d {
                f *= step_tab[c][q[c] * width[c] + (e.offset[c] - lo[c]) as usize];
            }
            psi[e.from * levels + e.to] += f;
        }
        let mut phase = Complex64::new(1.0, 0.0);
        for c in 0..d {
            phase *= phase_tab[c][q[c]];
        }
        let (s, p) = cmat_geometric(&psi, levels, late_start as u64);
        let mut total = s[k * levels + j];
        row.copy_from_slice(&p[k * levels..(k + 1) * levels]);
        for (i, acc) in acc_late.iter_mut().enumerate() {
            total += row[j];
            *acc += row[j] * phase;
            if flat == 0 {
                mass_late[i] = row[j].re;
            }
            if i + 1 < late_len {
                row = vec_mat(&row, &psi, levels);
            }
        }
        acc_sum += total * phase;
        if let Some(es) = early_start {
            let p = cmat_pow(&psi, levels, es as u64);
            row.copy_from_slice(&p[k * levels..(k + 1) * levels]);
            for (i, acc) in acc_early.iter_mut().enumerate() {
                *acc += row[j] * phase;
                if flat == 0 {
                    mass_early[i] = row[j].re;
                }
                row = vec_mat(&row, &psi, levels);
            }
        }
    }
    let scale = 1.0 / grid.cells() as f64;
    let partial = (acc_sum.re * scale).max(0.0);
    let late: Vec<f64> = acc_late.iter().map(|c| c.re * scale).collect();
    let early: Vec<f64> = acc_early.iter().map(|c| c.re * scale).collect();
    let floor = 1e-13
        * mass_late
            .iter()
            .chain(mass_early.iter())
            .fold(0.0f64, |a, b| a.max(b.abs()));
    let tail = analyze_tail(
        &late,
        n_max,
        early_end.map(|e| (early.as_slice(), e)),
        floor,
    );
    let mut terms: Vec<(usize, f64)> = Vec::new();
    if let Some(es) = early_start {
        terms.extend(early.iter().enumerate().map(|(i, &t)| (es + i, t)));
    }
    terms.extend(late.iter().enumerate().map(|(i, &t)| (late_start + i, t)));
    Ok(GreenEstimate {
        partial,
        n_max,
        tail_bound: tail.bound,
        divergence_flag: tail.divergent,
        ratio: tail.ratio,
        regime: tail.regime,
        terms,
    })
}

fn vec_mat(row: &[Complex64], m: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (l, &x) in row.iter().enumerate() {
        for jj in 0..n {
            out[jj] += x * m[l * n + jj];
        }
    }
    out
}

struct TailFit {
    bound: f64,
    ratio: f64,
    regime: TailRegime,
    divergent: bool,
}

/// Per-step ratio from a window: log-linear fit over consecutive pair sums
/// (robust to period two), falling back to half-window sums.
fn window_ratio(w: &[f64], floor: f64) -> Option<f64> {
    let clean: Vec<f64> = w.iter().map(|&t| if t > floor { t } else { 0.0 }).collect();
    let pairs: Vec<f64> = clean.chunks_exact(2).map(|c| c[0] + c[1]).collect();
    if pairs.len() >= 2 && pairs.iter().all(|&p| p > 0.0) {
        let m = pairs.len() as f64;
        let xbar = (m - 1.0) / 2.0;
        let ybar = pairs.iter().map(|p| p.ln()).sum::<f64>() / m;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, p) in pairs.iter().enumerate() {
            let dx = i as f64 - xbar;
            sxy += dx * (p.ln() - ybar);
            sxx += dx * dx;
        }
        return Some((sxy / sxx / 2.0).exp());
    }
    let h = clean.len() / 2;
    let a: f64 = clean[..h].iter().sum();
    let b: f64 = clean[clean.len() - h..].iter().sum();
    match (a > 0.0, b > 0.0) {
        (_, false) => Some(0.0),
        (true, true) => Some((b / a).powf(1.0 / (clean.len() - h) as f64)),
        (false, true) => None,
    }
}

fn analyze_tail(late: &[f64], n_max: usize, early: Option<(&[f64], usize)>, floor: f64) -> TailFit {
    if late.len() < TAIL_WINDOW {
        return TailFit {
            bound: f64::INFINITY,
            ratio: f64::NAN,
            regime: TailRegime::Undetermined,
            divergent: false,
        };
    }
    let growing = TailFit {
        bound: f64::INFINITY,
        ratio: f64::INFINITY,
        regime: TailRegime::Growing,
        divergent: true,
    };
    let Some(r) = window_ratio(late, floor) else {
        return growing;
    };
    if r == 0.0 {
        return TailFit {
            bound: 0.0,
            ratio: 0.0,
            regime: TailRegime::Vanishing,
            divergent: false,
        };
    }
    if r >= 1.0 {
        return TailFit { ratio: r, ..growing };
    }
    let pair_last = late[late.len() - 2].max(0.0) + late[late.len() - 1].max(0.0);
    let late_sum: f64 = late.iter().map(|t| t.max(0.0)).sum();
    if let Some((ew, end)) = early {
        if let Some(re) = window_ratio(ew, floor) {
            let early_sum: f64 = ew.iter().map(|t| t.max(0.0)).sum();
            if re > 0.0 && re < 1.0 && (1.0 - r) < 0.75 * (1.0 - re) && early_sum > 0.0 {
                let c_late = n_max as f64 - (TAIL_WINDOW as f64 - 1.0) / 2.0;
                let c_early = end as f64 - (TAIL_WINDOW as f64 - 1.0) / 2.0;
                let a = (early_sum / late_sum).ln() / (c_late / c_early).ln();
                let divergent = a <= DIVERGENT_EXPONENT;
                let bound = if divergent {
                    f64::INFINITY
                } else {
                    late_sum / TAIL_WINDOW as f64 * n_max as f64 / (a - 1.0)
                };
                return TailFit {
                    bound,
                    ratio: r,
                    regime: TailRegime::Polynomial { exponent: a },
                    divergent,
                };
            }
        }
    }
    let rho = r * r;
    let divergent = r >= DIVERGENCE_RATIO;
    TailFit {
        bound: if divergent { f64::INFINITY } else { pair_last * rho / (1.0 - rho) },
        ratio: r,
        regime: TailRegime::Geometric,
        divergent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelEntry;

    fn nn(p: f64, q: f64) -> LatticeKernel {
        let mut e = vec![KernelEntry { offset: vec![1], from: 0, to: 0, weight: p }];
        if q > 0.0 {
            e.push(KernelEntry { offset: vec![-1], from: 0, to: 0, weight: q });
        }
        LatticeKernel::new(1, 1, e).unwrap()
    }

    fn opts(engine: GreenEngine) -> GreenOptions {
        GreenOptions { engine, ..Default::default() }
    }

    #[test]
    fn single_path_sub_markov() {
        let k = nn(0.5, 0.0);
        for engine in [GreenEngine::Direct, GreenEngine::Spectral] {
            for n_max in [3, 50] {
                let g = green_partial(&k, (&[0], 0), (&[3], 0), n_max, &opts(engine)).unwrap();
                assert!((g.partial - 0.125).abs() < 1e-14, "{engine:?} {n_max}");
            }
        }
        let g = green_partial(&k, (&[0], 0), (&[3], 0), 50, &opts(GreenEngine::Direct)).unwrap();
        assert_eq!(g.tail_bound, 0.0);
        assert!(!g.divergence_flag);
    }

    #[test]
    fn asymmetric_walk_closed_form() {
        let k = nn(0.7, 0.3);
        let g = green_partial(&k, (&[0], 0), (&[0], 0), 2000, &opts(GreenEngine::Direct)).unwrap();
        assert!((g.partial - 2.5).abs() < 1e-6);
        assert!(!g.divergence_flag);
        assert_eq!(g.regime, TailRegime::Geometric);
        let s = green_partial(&k, (&[0], 0), (&[0], 0), 2000, &opts(GreenEngine::Spectral)).unwrap();
        assert!((s.partial - g.partial).abs() < 1e-10);
        assert!((s.tail_bound - g.tail_bound).abs() < 1e-8);
    }

    #[test]
    fn recurrent_walk_flags_divergence() {
        let k = nn(0.5, 0.5);
        let g = green_partial(&k, (&[0], 0), (&[0], 0), 2000, &opts(GreenEngine::Direct)).unwrap();
        assert!(g.divergence_flag);
        assert!(matches!(g.regime, TailRegime::Polynomial { .. }));
    }

    #[test]
    fn off_diagonal_targets_agree_across_engines() {
        let k = nn(0.6, 0.3);
        for y in [-7i64, 0, 5, 30] {
            let a = green_partial(&k, (&[2], 0), (&[y], 0), 300, &opts(GreenEngine::Direct)).unwrap();
            let b = green_partial(&k, (&[2], 0), (&[y], 0), 300, &opts(GreenEngine::Spectral)).unwrap();
            assert!((a.partial - b.partial).abs() < 1e-12, "y={y}");
        }
    }

    #[test]
    fn partial_sums_nondecreasing() {
        let k = nn(0.6, 0.4);
        let mut prev = 0.0;
        for n_max in [0, 1, 5, 20, 100] {
            let g = green_partial(&k, (&[0], 0), (&[1], 0), n_max, &opts(GreenEngine::Direct)).unwrap();
            assert!(g.partial >= prev);
            prev = g.partial;
        }
    }
}
