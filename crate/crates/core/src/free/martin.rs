//! Martin-ratio traces `K̂(g, g_n) = P̂(g → g_n)/P̂(e → g_n)`.
//!
//! The direct estimator runs the walk from `g` and from `e` and counts
//! visits to `g_n`. The factorized estimator writes
//! `P(x → g_n) = p_x^{V₁} · P₁ ⋯ P_{m−1} · p_{V_m}^{g_n}` over transitional
//! sets shared by `x = g` and `x = e`, and brackets every factor by a
//! truncated solve.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

use super::hitting::{hitting_matrix, HittingBudget, HittingMethod};
use super::transitional::transitional_chain;
use super::walk::{estimate_r_mu, FreeWalkSpec};
use super::word::FreeWord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MartinEstimator {
    Direct,
    Factorized,
}

/// Hits needed from each start before a direct estimate counts.
pub const MIN_HITS: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub target: FreeWord,
    pub value: f64,
    /// One-sigma error (direct) or half-width of the bracket (factorized).
    pub error: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// Transitional sets used by the factorized estimator.
    pub sets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartinTrace {
    pub g: FreeWord,
    pub estimator: MartinEstimator,
    pub points: Vec<TracePoint>,
    /// `(|K̂_{n+1} − K̂_n|, error_n + error_{n+1})`.
    pub diffs: Vec<(f64, f64)>,
}

pub fn martin_ratio_trace(
    spec: &FreeWalkSpec,
    g: &FreeWord,
    targets: &[FreeWord],
    estimator: MartinEstimator,
    budget: &HittingBudget,
) -> Result<MartinTrace> {
    let (d1, d2) = spec.ranks();
    g.check_ranks(d1, d2)?;
    let e = FreeWord::identity();
    let mut points = Vec::with_capacity(targets.len());
    for t in targets {
        t.check_ranks(d1, d2)?;
        let p = if g.is_identity() {
            TracePoint { target: t.clone(), value: 1.0, error: 0.0, numerator: 1.0, denominator: 1.0, sets: 0 }
        } else {
            match estimator {
                MartinEstimator::Direct => direct_point(spec, g, &e, t, budget)?,
                MartinEstimator::Factorized => factorized_point(spec, g, &e, t, budget)?,
            }
        };
        points.push(p);
    }
    let diffs = points
        .windows(2)
        .map(|w| ((w[1].value - w[0].value).abs(), w[0].error + w[1].error))
        .collect();
    Ok(MartinTrace { g: g.clone(), estimator, points, diffs })
}

fn direct_point(spec: &FreeWalkSpec, g: &FreeWord, e: &FreeWord, t: &FreeWord, budget: &HittingBudget) -> Result<TracePoint> {
    let h = hitting_matrix(spec, &[g.clone(), e.clone()], &[t.clone()], HittingMethod::MonteCarlo, budget)?;
    let n = budget.episodes as f64;
    let (a, b) = (h.values[0][0], h.values[1][0]);
    let (ka, kb) = (a * n, b * n);
    if ka < MIN_HITS || kb < MIN_HITS {
        return Err(Error::Statistical(format!(
            "only {ka} and {kb} hits of {t} in {n} episodes; relative precision {:.3}",
            1.0 / ka.min(kb).max(1.0).sqrt()
        )));
    }
    let sa = (a * (1.0 - a) / n).sqrt();
    let sb = (b * (1.0 - b) / n).sqrt();
    let value = a / b;
    let error = value * ((sa / a).powi(2) + (sb / b).powi(2)).sqrt();
    Ok(TracePoint { target: t.clone(), value, error, numerator: a, denominator: b, sets: 0 })
}

fn factorized_point(spec: &FreeWalkSpec, g: &FreeWord, e: &FreeWord, t: &FreeWord, budget: &HittingBudget) -> Result<TracePoint> {
    let big_r = estimate_r_mu(&spec.effective().0, 4 * spec.r_mu().max(1) + 4)?.radius;
    let ginv = g.inverse();
    let path_g = ginv.mul(t);
    let sets: Vec<_> = transitional_chain(spec, e, t, big_r + 1)?
        .into_iter()
        .filter(|v| {
            ginv.mul(&v.center).is_prefix_of(&path_g)
                && !ginv.mul(&v.center).is_identity()
                && !v.words.contains(g)
                && v.words.iter().all(|x| x.distance(t) > big_r)
        })
        .collect();
    let starts = vec![g.clone(), e.clone()];
    let (lo, hi) = if sets.is_empty() {
        let h = hitting_matrix(spec, &starts, &[t.clone()], HittingMethod::TruncatedSolve, budget)?;
        (
            (h.lower[0][0], h.lower[1][0]),
            (h.upper[0][0], h.upper[1][0]),
        )
    } else {
        // keep consecutive sets separated after filtering
        let mut chain = vec![sets[0].clone()];
        for s in &sets[1..] {
            if super::transitional::set_distance(&chain.last().unwrap().words, &s.words) > big_r {
                chain.push(s.clone());
            }
        }
        let first = hitting_matrix(spec, &starts, &chain[0].words, HittingMethod::TruncatedSolve, budget)?;
        let last = hitting_matrix(spec, &chain.last().unwrap().words, &[t.clone()], HittingMethod::TruncatedSolve, budget)?;
        let mut f_lo = DVector::from_iterator(last.rows.len(), last.lower.iter().map(|r| r[0]));
        let mut f_hi = DVector::from_iterator(last.rows.len(), last.upper.iter().map(|r| r[0]));
        for pair in chain.windows(2).rev() {
            let p = hitting_matrix(spec, &pair[0].words, &pair[1].words, HittingMethod::TruncatedSolve, budget)?;
            let reorder = |m: DMatrix<f64>| reorder_cols(m, &p.cols, &pair[1].words);
            f_lo = reorder(p.lower_matrix()) * f_lo;
            f_hi = reorder(p.upper_matrix()) * f_hi;
        }
        let first_lo = reorder_cols(first.lower_matrix(), &first.cols, &chain[0].words);
        let first_hi = reorder_cols(first.upper_matrix(), &first.cols, &chain[0].words);
        let a_lo = (first_lo.row(0) * &f_lo)[0];
        let b_lo = (first_lo.row(1) * &f_lo)[0];
        let a_hi = (first_hi.row(0) * &f_hi)[0];
        let b_hi = (first_hi.row(1) * &f_hi)[0];
        ((a_lo, b_lo), (a_hi, b_hi))
    };
    if !(lo.1 > 0.0) {
        return Err(Error::Tolerance {
            what: format!("lower bound on P(e → {t}) is zero"),
            gap: hi.1 - lo.1,
            tolerance: budget.tol,
        });
    }
    let k_lo = lo.0 / hi.1;
    let k_hi = hi.0 / lo.1;
    let a = 0.5 * (lo.0 + hi.0);
    let b = 0.5 * (lo.1 + hi.1);
    Ok(TracePoint {
        target: t.clone(),
        value: a / b,
        error: 0.5 * (k_hi - k_lo),
        numerator: a,
        denominator: b,
        sets: if sets.is_empty() { 0 } else { sets.len() },
    })
}

/// Permutes the columns of `m` (ordered as `have`) into the order `want`.
fn reorder_cols(m: DMatrix<f64>, have: &[FreeWord], want: &[FreeWord]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), want.len(), |i, j| {
        let k = have.iter().position(|w| *w == want[j]).expect("same word set");
        m[(i, k)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> FreeWord {
        s.parse().unwrap()
    }

    #[test]
    fn identity_source_gives_one() {
        let s = FreeWalkSpec::simple(1, 1);
        let tr = martin_ratio_trace(&s, &w("e"), &[w("a b"), w("a b^2")], MartinEstimator::Direct, &HittingBudget::default())
            .unwrap();
        assert!(tr.points.iter().all(|p| p.value == 1.0));
    }

    #[test]
    fn tree_ratio_is_three() {
        let s = FreeWalkSpec::simple(1, 1);
        let budget = HittingBudget::default();
        let targets: Vec<FreeWord> = (1..4).map(|n| w(&format!("a b^{n}"))).collect();
        let tr = martin_ratio_trace(&s, &w("a"), &targets, MartinEstimator::Factorized, &budget).unwrap();
        for p in &tr.points {
            assert!((p.value - 3.0).abs() < 1e-3 + p.error, "{p:?}");
        }
    }
}
