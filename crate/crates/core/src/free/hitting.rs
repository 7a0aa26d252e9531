//! First-visit matrices `(P_V^W)_{v,w} = p_v^W(w)`.
//!
//! The truncated solve restricts the walk to `D_L = ∪_{u ∈ V∪W} u·{t : ψ(t) ≤ L}`
//! for a superharmonic certificate `e^{−ψ}` (see [`super::lyapunov`]), with
//! `W` absorbing, and brackets the answer. The lower system kills the walk
//! when it leaves `D_L`. The upper system charges an exit at `y` with
//! `min(1, e^{Ψ_r − ψ(w⁻¹y)})`, a bound on ever reaching `w`.
//!
//! Both systems are iterated monotonically (from 0 and from 1), so every
//! iterate is a valid bound.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit::sample_rng;

use super::lyapunov::{lyapunov_certificate, Lyapunov};
use super::walk::FreeWalkSpec;
use super::word::FreeWord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HittingMethod {
    MonteCarlo,
    TruncatedSolve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingBudget {
    /// Episodes per row for Monte Carlo.
    pub episodes: usize,
    /// Step cap per episode.
    pub max_steps: usize,
    /// An episode stops as escaped once it is this far beyond the targets.
    pub escape_radius: u64,
    /// Cap on states of the truncated solve.
    pub max_states: usize,
    /// Sandwich gap at which the truncated solve stops widening.
    pub tol: f64,
    pub seed: u64,
}

impl Default for HittingBudget {
    fn default() -> Self {
        Self {
            episodes: 100_000,
            max_steps: 100_000,
            escape_radius: 24,
            max_states: 2_000_000,
            tol: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingMatrix {
    pub rows: Vec<FreeWord>,
    pub cols: Vec<FreeWord>,
    /// Point estimates, row-major.
    pub values: Vec<Vec<f64>>,
    /// Lower and upper brackets: Wilson one-sigma interval for Monte Carlo,
    /// sandwich for the solve.
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    /// Monte Carlo half-widths or sandwich gaps.
    pub error: Vec<Vec<f64>>,
    /// Monte Carlo: fraction of episodes that never hit the targets.
    pub escape: Vec<f64>,
    pub method: HittingMethod,
    /// Laziness of the walk actually used.
    pub alpha: f64,
    /// Monte Carlo episodes per row, or number of truncation levels solved.
    pub effort: u64,
    /// Truncation level `L` of the solve.
    pub level: Option<f64>,
    pub states: usize,
}

impl HittingMatrix {
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.cols.len(), |i, j| self.values[i][j])
    }

    pub fn lower_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.cols.len(), |i, j| self.lower[i][j])
    }

    pub fn upper_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.cols.len(), |i, j| self.upper[i][j])
    }

    pub fn max_error(&self) -> f64 {
        self.error.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// `min P(v,w)/P(v',w)` over rows `v, v'` and columns `w` with positive
    /// entries; the empirical comparability constant.
    pub fn comparability(&self) -> f64 {
        let mut best = f64::INFINITY;
        for j in 0..self.cols.len() {
            let col: Vec<f64> = self.values.iter().map(|r| r[j]).collect();
            let hi = col.iter().copied().fold(0.0, f64::max);
            if hi > 0.0 {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                best = best.min(lo / hi);
            }
        }
        best
    }
}

pub fn hitting_matrix(
    spec: &FreeWalkSpec,
    rows: &[FreeWord],
    cols: &[FreeWord],
    method: HittingMethod,
    budget: &HittingBudget,
) -> Result<HittingMatrix> {
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::Domain("hitting matrix needs nonempty row and column sets".into()));
    }
    let (d1, d2) = spec.ranks();
    for g in rows.iter().chain(cols) {
        g.check_ranks(d1, d2)?;
    }
    let mut cols = cols.to_vec();
    cols.sort();
    cols.dedup();
    let (walk, alpha) = spec.effective();
    match method {
        HittingMethod::MonteCarlo => monte_carlo(&walk, alpha, rows, &cols, budget),
        HittingMethod::TruncatedSolve => truncated_solve(&walk, alpha, rows, &cols, budget),
    }
}

/// Wilson interval at one standard deviation.
fn wilson(k: u64, n: u64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let denom = 1.0 + 1.0 / n;
    let centre = (p + 0.5 / n) / denom;
    let half = (p * (1.0 - p) / n + 0.25 / (n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

const BLOCK: usize = 4096;

fn monte_carlo(
    walk: &FreeWalkSpec,
    alpha: f64,
    rows: &[FreeWord],
    cols: &[FreeWord],
    budget: &HittingBudget,
) -> Result<HittingMatrix> {
    if budget.episodes == 0 {
        return Err(Error::Statistical("Monte Carlo budget of zero episodes".into()));
    }
    let table = walk.sampler();
    let steps: Vec<&FreeWord> = walk.support().iter().map(|(w, _)| w).collect();
    let n = budget.episodes;
    let mut values = Vec::with_capacity(rows.len());
    let mut lower = Vec::with_capacity(rows.len());
    let mut upper = Vec::with_capacity(rows.len());
    let mut error = Vec::with_capacity(rows.len());
    let mut escape = Vec::with_capacity(rows.len());
    for (ri, v) in rows.iter().enumerate() {
        // targets relative to the start: X = v·Y
        let vinv = v.inverse();
        let rel: HashMap<FreeWord, usize> = cols.iter().enumerate().map(|(j, w)| (vinv.mul(w), j)).collect();
        let maxlen = rel.keys().map(FreeWord::length).max().unwrap_or(0);
        let stop = maxlen + budget.escape_radius;
        let counts: Vec<Vec<u64>> = (0..n.div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| {
                let mut c = vec![0u64; cols.len() + 1];
                for ep in b * BLOCK..((b + 1) * BLOCK).min(n) {
                    let mut rng = sample_rng(budget.seed, ((ri as u64) << 40) | ep as u64);
                    let mut y = FreeWord::identity();
                    let mut len: i64 = 0;
                    let mut outcome = cols.len();
                    for _ in 0..=budget.max_steps {
                        if len as u64 <= maxlen {
                            if let Some(&j) = rel.get(&y) {
                                outcome = j;
                                break;
                            }
                        }
                        if len as u64 > stop {
                            break;
                        }
                        len += y.mul_assign(steps[table.sample(&mut rng)]);
                    }
                    c[outcome] += 1;
                }
                c
            })
            .collect();
        let mut total = vec![0u64; cols.len() + 1];
        for c in &counts {
            for (t, x) in total.iter_mut().zip(c) {
                *t += x;
            }
        }
        let mut row_v = Vec::with_capacity(cols.len());
        let mut row_l = Vec::with_capacity(cols.len());
        let mut row_u = Vec::with_capacity(cols.len());
        let mut row_e = Vec::with_capacity(cols.len());
        for &k in &total[..cols.len()] {
            let p = k as f64 / n as f64;
            let (lo, hi) = wilson(k, n as u64);
            row_v.push(p);
            row_l.push(lo);
            row_u.push(hi);
            row_e.push(0.5 * (hi - lo));
        }
        values.push(row_v);
        lower.push(row_l);
        upper.push(row_u);
        error.push(row_e);
        escape.push(total[cols.len()] as f64 / n as f64);
    }
    Ok(HittingMatrix {
        rows: rows.to_vec(),
        cols: cols.to_vec(),
        values,
        lower,
        upper,
        error,
        escape,
        method: HittingMethod::MonteCarlo,
        alpha,
        effort: n as u64,
        level: None,
        states: 0,
    })
}

/// Sparse transitions of the truncated chain.
struct Truncated {
    /// CSR rows over interior states: `(state, mass)`.
    start: Vec<usize>,
    next: Vec<(u32, f64)>,
    /// Mass sent straight into each target, `states × cols`.
    hit: Vec<f64>,
    /// Upper-system exit charges, `states × cols`.
    exit: Vec<f64>,
}

fn build_truncated(
    walk: &FreeWalkSpec,
    lyap: &Lyapunov,
    states: &[FreeWord],
    index: &HashMap<FreeWord, usize>,
    target: &HashMap<FreeWord, usize>,
    cols: &[FreeWord],
) -> Truncated {
    let m = cols.len();
    let mut start = Vec::with_capacity(states.len() + 1);
    let mut next = Vec::new();
    let mut hit = vec![0.0; states.len() * m];
    let mut exit = vec![0.0; states.len() * m];
    start.push(0);
    for (i, x) in states.iter().enumerate() {
        if !target.contains_key(x) {
            for (xi, p) in walk.support() {
                let y = x.mul(xi);
                if let Some(&j) = target.get(&y) {
                    hit[i * m + j] += p;
                } else if let Some(&k) = index.get(&y) {
                    next.push((k as u32, *p));
                } else {
                    for (j, w) in cols.iter().enumerate() {
                        exit[i * m + j] += p * lyap.reach_bound(&y, w);
                    }
                }
            }
        }
        start.push(next.len());
    }
    Truncated { start, next, hit, exit }
}

/// Gauss–Seidel sweeps of `h = P h + b` from `init` until the largest change
/// is below `1e−15` or the sweep cap is reached.
fn sweep(t: &Truncated, m: usize, is_target: &[bool], b: &[f64], init: f64) -> Vec<f64> {
    let n = is_target.len();
    let mut h = vec![init; n * m];
    for (i, &tg) in is_target.iter().enumerate() {
        if tg {
            h[i * m..(i + 1) * m].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let mut acc = vec![0.0; m];
    for _ in 0..20_000 {
        let mut change: f64 = 0.0;
        for i in 0..n {
            if is_target[i] {
                continue;
            }
            acc.copy_from_slice(&b[i * m..(i + 1) * m]);
            for &(k, p) in &t.next[t.start[i]..t.start[i + 1]] {
                let k = k as usize;
                for j in 0..m {
                    acc[j] += p * h[k * m + j];
                }
            }
            for j in 0..m {
                change = change.max((acc[j] - h[i * m + j]).abs());
                h[i * m + j] = acc[j];
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    h
}

fn truncated_solve(
    walk: &FreeWalkSpec,
    alpha: f64,
    rows: &[FreeWord],
    cols: &[FreeWord],
    budget: &HittingBudget,
) -> Result<HittingMatrix> {
    if budget.max_states == 0 {
        return Err(Error::Tolerance {
            what: "hitting sandwich with a state budget of zero".into(),
            gap: f64::INFINITY,
            tolerance: budget.tol,
        });
    }
    let lyap = lyapunov_certificate(walk)?.ok_or_else(|| Error::Tolerance {
        what: "hitting sandwich: no superharmonic decay certificate for this walk".into(),
        gap: f64::INFINITY,
        tolerance: budget.tol,
    })?;
    let target: HashMap<FreeWord, usize> = cols.iter().cloned().enumerate().map(|(j, w)| (w, j)).collect();
    let m = cols.len();
    let mut centers: Vec<FreeWord> = rows.iter().chain(cols).cloned().collect();
    centers.sort();
    centers.dedup();
    // exits are charged at most m·e^{Ψ_r − L}; start halfway to that level
    let mut level = lyap.psi_r + lyap.rate() + 0.5 * (m as f64 / budget.tol).ln().max(0.0);
    let mut last_gap = f64::INFINITY;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let shell = lyap
            .level_set(level, budget.max_states)
            .map_err(|_| tolerance_err(last_gap, budget))?;
        let mut index: HashMap<FreeWord, usize> = HashMap::new();
        let mut states: Vec<FreeWord> = Vec::new();
        for c in &centers {
            for b in &shell {
                let x = c.mul(b);
                if !index.contains_key(&x) {
                    if states.len() >= budget.max_states {
                        return Err(tolerance_err(last_gap, budget));
                    }
                    index.insert(x.clone(), states.len());
                    states.push(x);
                }
            }
        }
        let t = build_truncated(walk, &lyap, &states, &index, &target, cols);
        let is_target: Vec<bool> = states.iter().map(|x| target.contains_key(x)).collect();
        let lo = sweep(&t, m, &is_target, &t.hit, 0.0);
        let b_hi: Vec<f64> = t.hit.iter().zip(&t.exit).map(|(a, b)| a + b).collect();
        let hi = sweep(&t, m, &is_target, &b_hi, 1.0);
        let mut lower = Vec::with_capacity(rows.len());
        let mut upper = Vec::with_capacity(rows.len());
        let mut gap: f64 = 0.0;
        for v in rows {
            if let Some(&j) = target.get(v) {
                let mut e = vec![0.0; m];
                e[j] = 1.0;
                lower.push(e.clone());
                upper.push(e);
                continue;
            }
            let i = index[v];
            let l: Vec<f64> = lo[i * m..(i + 1) * m].to_vec();
            let u: Vec<f64> = hi[i * m..(i + 1) * m].iter().zip(&l).map(|(u, l)| u.max(*l)).collect();
            gap = gap.max(l.iter().zip(&u).map(|(a, b)| b - a).fold(0.0, f64::max));
            lower.push(l);
            upper.push(u);
        }
        last_gap = gap;
        if gap < budget.tol {
            let values: Vec<Vec<f64>> = lower
                .iter()
                .zip(&upper)
                .map(|(l, u)| l.iter().zip(u).map(|(a, b)| 0.5 * (a + b)).collect())
                .collect();
            let error: Vec<Vec<f64>> = lower
                .iter()
                .zip(&upper)
                .map(|(l, u)| l.iter().zip(u).map(|(a, b)| b - a).collect())
                .collect();
            return Ok(HittingMatrix {
                rows: rows.to_vec(),
                cols: cols.to_vec(),
                values,
                lower,
                upper,
                error,
                escape: Vec::new(),
                method: HittingMethod::TruncatedSolve,
                alpha,
                effort: rounds,
                level: Some(level),
                states: states.len(),
            });
        }
        // exit charges scale like e^{−L}
        level += (gap / budget.tol).ln().clamp(0.5, 8.0) + 0.25;
    }
}

fn tolerance_err(gap: f64, budget: &HittingBudget) -> Error {
    Error::Tolerance {
        what: format!("hitting sandwich within {} states", budget.max_states),
        gap,
        tolerance: budget.tol,
    }
}
