//! Superharmonic certificates `φ = e^{−ψ}` with a letter-additive
//! `ψ(t) = Σ_letters cost(ℓ)`, where a letter `v` of factor `f` costs
//! `c_f + Σ_i (κ⁺_{f,i} v_i⁺ + κ⁻_{f,i} v_i⁻)`.
//!
//! If `Σ_ξ μ(ξ) e^{−(ψ(tξ) − ψ(t))} ≤ 1` for every `t` with `|t| > r(μ)`, the
//! walk started at `y` reaches `w` with probability at most
//! `e^{Ψ_r − ψ(w⁻¹y)}`, `Ψ_r = max ψ` over `B(e, r(μ))`. The increment
//! `ψ(tξ) − ψ(t)` depends on `t` only through its last `r(μ)` units of
//! length and the next letter clamped coordinatewise at `r(μ) + 1`, so the
//! condition is checked on all words with
//! `r(μ) < |t| ≤ r(μ) + max(d₁,d₂)(r(μ) + 1)`.
//!
//! The increment is linear in the weights, so the feasible weights form a
//! convex set. The search starts from the best isotropic certificate
//! `ψ = β(|t| + c·s(t))` and then raises one weight at a time.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};

use super::walk::{ball, FreeWalkSpec, DEFAULT_BALL_BUDGET};
use super::word::{FreeWord, Letter};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LetterWeights {
    /// `c_f`, charged once per letter.
    pub letter: f64,
    /// `κ⁺_{f,i}`.
    pub plus: Vec<f64>,
    /// `κ⁻_{f,i}`.
    pub minus: Vec<f64>,
}

impl LetterWeights {
    fn cost(&self, v: &[i64]) -> f64 {
        let mut s = self.letter;
        for (i, x) in v.iter().enumerate() {
            s += if *x > 0 { self.plus[i] * *x as f64 } else { -self.minus[i] * *x as f64 };
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lyapunov {
    pub factors: [LetterWeights; 2],
    /// `max ψ` over `B(e, r(μ))`.
    pub psi_r: f64,
    /// `β` of the isotropic certificate the search started from.
    pub isotropic_beta: f64,
}

impl Lyapunov {
    pub fn letter_cost(&self, l: &Letter) -> f64 {
        self.factors[(l.factor - 1) as usize].cost(&l.v)
    }

    pub fn psi(&self, t: &FreeWord) -> f64 {
        t.letters().iter().map(|l| self.letter_cost(l)).sum()
    }

    /// Smallest weight per unit of length.
    pub fn rate(&self) -> f64 {
        self.factors
            .iter()
            .flat_map(|f| f.plus.iter().chain(&f.minus))
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Upper bound on the probability that the walk from `y` ever reaches `w`.
    pub fn reach_bound(&self, y: &FreeWord, w: &FreeWord) -> f64 {
        (self.psi_r - self.psi(&w.inverse().mul(y))).exp().min(1.0)
    }

    /// `{t : ψ(t) ≤ level}` in canonical order.
    pub fn level_set(&self, level: f64, budget: usize) -> Result<Vec<FreeWord>> {
        let letters: [Vec<(Vec<i64>, f64)>; 2] = [self.letters_within(0, level), self.letters_within(1, level)];
        let mut out = vec![FreeWord::identity()];
        let mut frontier = vec![(FreeWord::identity(), 0.0)];
        while let Some((w, cost)) = frontier.pop() {
            for f in [1u8, 2] {
                if w.last_factor() == Some(f) {
                    continue;
                }
                for (v, c) in &letters[(f - 1) as usize] {
                    if cost + c > level {
                        continue;
                    }
                    if out.len() >= budget {
                        return Err(Error::Resource {
                            what: format!("level set ψ ≤ {level:.3}"),
                            required: out.len() as u128 + 1,
                            budget: budget as u128,
                        });
                    }
                    let mut next = w.clone();
                    next.mul_assign(&FreeWord::letter(f, v.clone()));
                    out.push(next.clone());
                    frontier.push((next, cost + c));
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Nonzero letters of one factor with cost at most `level`.
    fn letters_within(&self, factor: usize, level: f64) -> Vec<(Vec<i64>, f64)> {
        let wts = &self.factors[factor];
        let d = wts.plus.len();
        let mut out = Vec::new();
        let mut v = vec![0i64; d];
        fn rec(w: &LetterWeights, i: usize, v: &mut Vec<i64>, spent: f64, level: f64, out: &mut Vec<(Vec<i64>, f64)>) {
            if i == v.len() {
                if v.iter().any(|x| *x != 0) {
                    out.push((v.clone(), w.letter + spent));
                }
                return;
            }
            rec(w, i + 1, v, spent, level, out);
            for (sign, k) in [(1i64, w.plus[i]), (-1, w.minus[i])] {
                let mut n = 1;
                while w.letter + spent + k * n as f64 <= level {
                    v[i] = sign * n;
                    rec(w, i + 1, v, spent + k * n as f64, level, out);
                    n += 1;
                }
                v[i] = 0;
            }
        }
        if d > 0 {
            rec(wts, 0, &mut v, 0.0, level, &mut out);
        }
        out
    }
}

const SIZE_WEIGHTS: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0];

/// Parameters: `[c₁, κ⁺₁.., κ⁻₁.., c₂, κ⁺₂.., κ⁻₂..]`.
fn layout(d1: usize, d2: usize) -> (usize, [usize; 2]) {
    (2 + 2 * d1 + 2 * d2, [0, 1 + 2 * d1])
}

/// Gradient of `ψ` in the parameters for one word.
fn features(t: &FreeWord, dims: [usize; 2], offsets: [usize; 2], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for l in t.letters() {
        let f = (l.factor - 1) as usize;
        let o = offsets[f];
        out[o] += 1.0;
        for (i, x) in l.v.iter().enumerate() {
            if *x > 0 {
                out[o + 1 + i] += *x as f64;
            } else {
                out[o + 1 + dims[f] + i] -= *x as f64;
            }
        }
    }
    out
}

/// Each constraint is `Σ_k p_k e^{−a_k·θ} ≤ 1`.
struct Constraints {
    rows: Vec<Vec<(f64, Vec<f64>)>>,
}

impl Constraints {
    fn feasible(&self, theta: &[f64]) -> bool {
        self.rows.iter().all(|row| {
            row.iter()
                .map(|(p, a)| p * (-a.iter().zip(theta).map(|(x, y)| x * y).sum::<f64>()).exp())
                .sum::<f64>()
                <= 1.0
        })
    }
}

fn to_weights(theta: &[f64], dims: [usize; 2], offsets: [usize; 2]) -> [LetterWeights; 2] {
    let mk = |f: usize| {
        let o = offsets[f];
        LetterWeights {
            letter: theta[o],
            plus: theta[o + 1..o + 1 + dims[f]].to_vec(),
            minus: theta[o + 1 + dims[f]..o + 1 + 2 * dims[f]].to_vec(),
        }
    };
    [mk(0), mk(1)]
}

/// Largest `s ≥ 0` with `theta + s·e_i` feasible, to relative precision.
fn room(cons: &Constraints, theta: &[f64], i: usize) -> f64 {
    let mut probe = theta.to_vec();
    let mut at = |s: f64| {
        probe[i] = theta[i] + s;
        cons.feasible(&probe)
    };
    let mut hi = theta[i].max(0.1);
    let mut lo = 0.0;
    while at(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return lo;
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if at(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Superharmonic certificate for the walk, or `None` if not even an
/// isotropic one exists.
pub fn lyapunov_certificate(spec: &FreeWalkSpec) -> Result<Option<Lyapunov>> {
    let r = spec.r_mu();
    if r == 0 {
        return Ok(None);
    }
    let (d1, d2) = spec.ranks();
    let dims = [d1, d2];
    let (n, offsets) = layout(d1, d2);
    let span = r + (d1.max(d2) as u64) * (r + 1);
    let mut seen: BTreeSet<Vec<(u64, Vec<i64>)>> = BTreeSet::new();
    let mut rows = Vec::new();
    for t in ball(d1, d2, span, DEFAULT_BALL_BUDGET)?.into_iter().filter(|t| t.length() > r) {
        let base = features(&t, dims, offsets, n);
        let row: Vec<(f64, Vec<f64>)> = spec
            .support()
            .iter()
            .map(|(xi, p)| {
                let a: Vec<f64> = features(&t.mul(xi), dims, offsets, n).iter().zip(&base).map(|(x, y)| x - y).collect();
                (*p, a)
            })
            .collect();
        // identical increment patterns give identical constraints
        let key = row
            .iter()
            .map(|(p, a)| (p.to_bits(), a.iter().map(|x| x.round() as i64).collect()))
            .collect();
        if seen.insert(key) {
            rows.push(row);
        }
    }
    let cons = Constraints { rows };

    let isotropic = |beta: f64, c: f64| -> Vec<f64> {
        let mut th = vec![beta; n];
        th[offsets[0]] = beta * c;
        th[offsets[1]] = beta * c;
        th
    };
    let mut best: Option<(f64, f64)> = None;
    for &c in &SIZE_WEIGHTS {
        if !cons.feasible(&isotropic(1e-6, c)) {
            continue;
        }
        let (mut lo, mut hi) = (1e-6, 1.0);
        while cons.feasible(&isotropic(hi, c)) && hi < 64.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cons.feasible(&isotropic(mid, c)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if best.is_none_or(|(b, _)| lo > b) {
            best = Some((lo, c));
        }
    }
    let Some((beta, c)) = best else {
        return Ok(None);
    };
    // back off slightly so single weights can move
    let mut theta: Vec<f64> = isotropic(beta, c).iter().map(|v| v * (1.0 - 1e-9)).collect();
    // half steps keep the weights from being claimed by whichever goes first
    for _ in 0..24 {
        let mut moved = false;
        for i in 0..n {
            let s = room(&cons, &theta, i);
            if s > 1e-6 * theta[i].max(1e-3) {
                theta[i] += 0.5 * s;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    for i in 0..n {
        theta[i] += room(&cons, &theta, i);
    }
    let factors = to_weights(&theta, dims, offsets);
    let mut lyap = Lyapunov { factors, psi_r: 0.0, isotropic_beta: beta };
    lyap.psi_r = ball(d1, d2, r, DEFAULT_BALL_BUDGET)?.iter().map(|t| lyap.psi(t)).fold(0.0, f64::max);
    Ok(Some(lyap))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> FreeWord {
        s.parse().unwrap()
    }

    #[test]
    fn free_group_certificate_is_ln3() {
        let lazy = FreeWalkSpec::simple(1, 1).lazified(0.9).unwrap();
        let l = lyapunov_certificate(&lazy).unwrap().unwrap();
        // e^{−|t| ln 3} is harmonic off the identity
        assert!((l.isotropic_beta - 3f64.ln()).abs() < 1e-6, "{l:?}");
        assert!((l.rate() - 3f64.ln()).abs() < 1e-6, "{l:?}");
    }

    #[test]
    fn drift_raises_the_forward_weight() {
        let s = FreeWalkSpec::new(
            1,
            1,
            vec![(w("a"), 0.3), (w("a^-1"), 0.1), (w("b"), 0.2), (w("b^-1"), 0.1), (w("e"), 0.3)],
        )
        .unwrap();
        let l = lyapunov_certificate(&s).unwrap().unwrap();
        assert!((l.isotropic_beta - (4.0f64 / 3.0).ln()).abs() < 1e-6);
        assert!(l.factors[0].plus[0] > 2.0 * l.factors[0].minus[0], "{l:?}");
        // the bound must dominate exact supermartingale checks on long words
        for t in [w("a^-7"), w("a^5 b^-3"), w("b^2 a^-1 b"), w("a^3 b a^-2")] {
            let mean: f64 = s.support().iter().map(|(xi, p)| p * (-(l.psi(&t.mul(xi)))).exp()).sum();
            assert!(mean <= (-l.psi(&t)).exp() * (1.0 + 1e-12), "{t}");
        }
    }

    #[test]
    fn level_set_counts() {
        let lazy = FreeWalkSpec::simple(1, 1).lazified(0.9).unwrap();
        let l = lyapunov_certificate(&lazy).unwrap().unwrap();
        let k = l.rate();
        // isotropic weights: the level set is a word-length ball
        assert_eq!(l.level_set(2.0 * k + 1e-6, 1000).unwrap().len(), 17);
        assert!(l.level_set(20.0 * k, 100).is_err());
    }
}
