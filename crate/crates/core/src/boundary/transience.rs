//! Transience classification with growth-curve evidence from `G_n(0,0)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{
    green_partial, reachability_check, GreenEngine, GreenOptions, IrreducibilityVerdict,
    KernelClass, LatticeKernel, TailRegime,
};
use crate::spectral::drift;

/// Minimum coefficient of determination for a growth fit to count as evidence.
pub const MIN_R_SQUARED: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Transient,
    Recurrent,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Transient => "transient",
            Verdict::Recurrent => "recurrent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictBasis {
    /// `d ≥ 3`.
    HighDimension,
    NonCentered,
    /// Centered with `d ≤ 2`.
    CenteredLowDimension,
    /// Row masses below one: mass leaks at every step.
    SubMarkov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthLaw {
    /// `G_n ≈ a + b√n`.
    Sqrt,
    /// `G_n ≈ a + b ln n`.
    Log,
    /// `G_n ≈ a + b n^{1−d/2}` with `b < 0`; `a` estimates `G(0,0)`.
    PowerApproach,
    /// Geometric convergence of the partial sums.
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthEvidence {
    pub n_max: usize,
    pub law: GrowthLaw,
    /// Fit coefficients `(a, b)`; empty for geometric convergence.
    pub fit: Vec<f64>,
    pub r_squared: f64,
    pub consistent: bool,
    /// `(n, G_n(0,0))` at the fitted sample points.
    pub samples: Vec<(usize, f64)>,
    /// Estimate of `G(0,0)` for transient kernels.
    pub green: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransienceReport {
    pub verdict: Verdict,
    pub basis: VerdictBasis,
    pub drift: Option<Vec<f64>>,
    pub evidence: GrowthEvidence,
}

fn default_n_max(d: usize) -> usize {
    match d {
        1 => 10_000,
        2 => 600,
        3 => 160,
        _ => 60,
    }
}

pub fn classify_transience(kernel: &LatticeKernel) -> Result<TransienceReport> {
    classify_transience_with(kernel, None)
}

pub fn classify_transience_with(kernel: &LatticeKernel, n_max: Option<usize>) -> Result<TransienceReport> {
    let d = kernel.dim();
    let (verdict, basis, p) = match kernel.class() {
        KernelClass::General => {
            return Err(Error::Class("transience is classified for markov and sub-markov kernels only".into()))
        }
        KernelClass::StrictlySubMarkov => (Verdict::Transient, VerdictBasis::SubMarkov, None),
        KernelClass::Markov => {
            let (p, centered) = drift(kernel)?;
            let (v, b) = if d >= 3 {
                (Verdict::Transient, VerdictBasis::HighDimension)
            } else if !centered {
                (Verdict::Transient, VerdictBasis::NonCentered)
            } else {
                (Verdict::Recurrent, VerdictBasis::CenteredLowDimension)
            };
            (v, b, Some(p))
        }
    };
    let reach = reachability_check(kernel, 2, 8 * kernel.support_radius().max(1) + 8);
    if reach.verdict == IrreducibilityVerdict::NotIrreducibleWitness {
        return Err(Error::Precondition(format!("kernel is not irreducible: {}", reach.reason)));
    }
    let n_max = n_max.unwrap_or_else(|| default_n_max(d));
    let origin = vec![0i64; d];
    let opts = GreenOptions { engine: GreenEngine::Direct, ..Default::default() };
    let g = green_partial(kernel, (&origin, 0), (&origin, 0), n_max, &opts)?;
    let mut partial = Vec::with_capacity(g.terms.len());
    let mut acc = 0.0;
    for &(_, t) in &g.terms {
        acc += t;
        partial.push(acc);
    }
    let samples = sample_points(n_max)
        .into_iter()
        .map(|n| (n, partial[n]))
        .collect::<Vec<_>>();
    let law = match (verdict, basis) {
        (Verdict::Recurrent, _) if d == 1 => GrowthLaw::Sqrt,
        (Verdict::Recurrent, _) => GrowthLaw::Log,
        (_, VerdictBasis::HighDimension) => GrowthLaw::PowerApproach,
        _ => GrowthLaw::Geometric,
    };
    let evidence = match law {
        GrowthLaw::Geometric => {
            let converged = !g.divergence_flag
                && matches!(g.regime, TailRegime::Geometric | TailRegime::Vanishing)
                && g.tail_bound <= 1e-6 * g.partial.max(1e-300);
            GrowthEvidence {
                n_max,
                law,
                fit: Vec::new(),
                r_squared: f64::NAN,
                consistent: converged,
                samples,
                green: Some(g.extrapolated()),
            }
        }
        _ => {
            let basis_fn = |n: f64| match law {
                GrowthLaw::Sqrt => n.sqrt(),
                GrowthLaw::Log => n.ln(),
                _ => n.powf(1.0 - d as f64 / 2.0),
            };
            let xs: Vec<f64> = samples.iter().map(|(n, _)| basis_fn(*n as f64)).collect();
            let ys: Vec<f64> = samples.iter().map(|(_, s)| *s).collect();
            let (a, b, r2) = linear_fit(&xs, &ys);
            let consistent = r2 >= MIN_R_SQUARED
                && match law {
                    GrowthLaw::PowerApproach => b < 0.0,
                    _ => b > 0.0,
                };
            GrowthEvidence {
                n_max,
                law,
                fit: vec![a, b],
                r_squared: r2,
                consistent,
                samples,
                green: (verdict == Verdict::Transient).then_some(a),
            }
        }
    };
    Ok(TransienceReport { verdict, basis, drift: p, evidence })
}

/// About 40 log-spaced even step counts between `n_max/10` and `n_max`.
fn sample_points(n_max: usize) -> Vec<usize> {
    let lo = (n_max / 10).max(4) as f64;
    let hi = n_max as f64;
    let mut out: Vec<usize> = (0..40)
        .map(|i| {
            let n = (lo * (hi / lo).powf(i as f64 / 39.0)).round() as usize;
            (n / 2 * 2).min(n_max / 2 * 2)
        })
        .collect();
    out.dedup();
    out
}

/// Least squares `y ≈ a + b x` with `R²`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ybar).powi(2)).sum();
    let b = sxy / sxx;
    let a = ybar - b * xbar;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, b, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{k1, srw, sub_markov_1d};

    #[test]
    fn one_dimensional_verdicts() {
        let r = classify_transience(&srw(1)).unwrap();
        assert_eq!(r.verdict, Verdict::Recurrent);
        assert!(r.evidence.consistent, "{:?}", r.evidence.r_squared);
        let t = classify_transience(&k1()).unwrap();
        assert_eq!(t.verdict, Verdict::Transient);
        assert!((t.evidence.green.unwrap() - 2.5).abs() < 1e-6, "{:?} {}", t.evidence.green, t.evidence.consistent);
        let s = classify_transience(&sub_markov_1d()).unwrap();
        assert_eq!((s.verdict, s.basis), (Verdict::Transient, VerdictBasis::SubMarkov));
        assert!(s.evidence.consistent);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (a, b, r2) = linear_fit(&xs, &ys);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
