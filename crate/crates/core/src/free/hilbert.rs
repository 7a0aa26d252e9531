//! Hilbert projective metric on the positive cone and Birkhoff contraction.
//!
//! For positive `x, y` the line through their projections onto the simplex
//! meets the boundary at two points; with affine coordinates `u < x̃ < ỹ < v`
//! the cross-ratio is `[x, y] = (v − x̃)(u − ỹ) / ((u − x̃)(v − ỹ))`, and
//! `log [x, y] = log(max_i x_i/y_i · max_j y_j/x_j)`. Two normalizations are
//! in use: the full logarithm (Birkhoff) and half of it.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HilbertConvention {
    /// `d = log [x, y]`.
    #[default]
    Birkhoff,
    /// `d = ½ log [x, y]`.
    HalfCrossRatio,
}

impl HilbertConvention {
    fn scale(self) -> f64 {
        match self {
            HilbertConvention::Birkhoff => 1.0,
            HilbertConvention::HalfCrossRatio => 0.5,
        }
    }
}

fn check_positive(x: &[f64]) -> Result<()> {
    if x.is_empty() || x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Domain("Hilbert distance needs strictly positive finite vectors".into()));
    }
    Ok(())
}

/// `log(max_i x_i/y_i · max_j y_j/x_j)`.
pub fn hilbert_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_positive(x)?;
    check_positive(y)?;
    if x.len() != y.len() {
        return Err(Error::Domain("vectors of different lengths".into()));
    }
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for (a, b) in x.iter().zip(y) {
        let r = a.ln() - b.ln();
        hi = hi.max(r);
        lo = lo.min(r);
    }
    Ok((hi - lo).max(0.0))
}

pub fn hilbert_distance_with(x: &[f64], y: &[f64], conv: HilbertConvention) -> Result<f64> {
    Ok(conv.scale() * hilbert_distance(x, y)?)
}

/// The cross-ratio `[x, y]` computed from the boundary points of the line
/// through the simplex projections of `x` and `y`.
pub fn cross_ratio(x: &[f64], y: &[f64]) -> Result<f64> {
    check_positive(x)?;
    check_positive(y)?;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let px: Vec<f64> = x.iter().map(|v| v / sx).collect();
    let py: Vec<f64> = y.iter().map(|v| v / sy).collect();
    // p(t) = px + t (py − px); coordinates vanish at t = −px_i / (py_i − px_i)
    let (mut u, mut v) = (f64::NEG_INFINITY, f64::INFINITY);
    for (a, b) in px.iter().zip(&py) {
        let slope = b - a;
        if slope > 0.0 {
            u = u.max(-a / slope);
        } else if slope < 0.0 {
            v = v.min(-a / slope);
        }
    }
    if !u.is_finite() || !v.is_finite() {
        return Ok(1.0);
    }
    Ok((v - 0.0) * (u - 1.0) / ((u - 0.0) * (v - 1.0)))
}

/// Zeros of `t` are divided into columns: each column is zero or positive.
pub fn check_column_divided(t: &DMatrix<f64>) -> Result<()> {
    if t.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain("matrix entries must be finite and nonnegative".into()));
    }
    let mut any = false;
    for c in t.column_iter() {
        let pos = c.iter().filter(|v| **v > 0.0).count();
        if pos != 0 && pos != c.len() {
            return Err(Error::Domain("zeros of the matrix are not divided into columns".into()));
        }
        any |= pos != 0;
    }
    if !any {
        return Err(Error::Domain("matrix is zero".into()));
    }
    Ok(())
}

/// `Δ(T)`: the largest distance between two nonzero columns.
pub fn diameter(t: &DMatrix<f64>) -> Result<f64> {
    diameter_with(t, HilbertConvention::Birkhoff)
}

pub fn diameter_with(t: &DMatrix<f64>, conv: HilbertConvention) -> Result<f64> {
    check_column_divided(t)?;
    let cols: Vec<Vec<f64>> = t
        .column_iter()
        .filter(|c| c[0] > 0.0)
        .map(|c| c.iter().copied().collect())
        .collect();
    let mut best: f64 = 0.0;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            best = best.max(hilbert_distance_with(&cols[i], &cols[j], conv)?);
        }
    }
    Ok(best)
}

/// `δ(T) = tanh(Δ(T)/4)`.
pub fn contraction_coefficient(t: &DMatrix<f64>, conv: HilbertConvention) -> Result<f64> {
    Ok((diameter_with(t, conv)? / 4.0).tanh())
}

/// `T·x = Tx/‖Tx‖`.
pub fn apply(t: &DMatrix<f64>, x: &[f64]) -> Result<Vec<f64>> {
    if t.ncols() != x.len() {
        return Err(Error::Domain("matrix and vector sizes differ".into()));
    }
    let y = t * nalgebra::DVector::from_column_slice(x);
    let n = y.norm();
    if !(n > 0.0) {
        return Err(Error::Domain("image vector is zero".into()));
    }
    Ok(y.iter().map(|v| v / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    /// `T₁⋯T_n·x` for `n = 1..`.
    pub iterates: Vec<Vec<f64>>,
    /// `d_H(iterate_n, iterate_{n+1})`.
    pub steps: Vec<f64>,
    /// `Δ(T_i)` for each factor.
    pub diameters: Vec<f64>,
    /// `max Δ(T_i)`.
    pub diameter: f64,
    /// `tanh(Δ/4)`.
    pub delta: f64,
    /// `δ^{n−1} Δ`.
    pub envelope: Vec<f64>,
    pub certified: bool,
}

/// Normalized products `T₁⋯T_n·x` with their Cauchy increments.
pub fn chained_product(mats: &[DMatrix<f64>], x: &[f64]) -> Result<ChainReport> {
    check_positive(x)?;
    if mats.is_empty() {
        return Err(Error::Domain("empty matrix chain".into()));
    }
    let diameters = mats.iter().map(diameter).collect::<Result<Vec<_>>>()?;
    let diameter = diameters.iter().copied().fold(0.0, f64::max);
    let delta = (diameter / 4.0).tanh();
    let mut left: DMatrix<f64> = DMatrix::identity(mats[0].nrows(), mats[0].nrows());
    let mut iterates = Vec::with_capacity(mats.len());
    for t in mats {
        if left.ncols() != t.nrows() {
            return Err(Error::Domain("matrix chain sizes do not match".into()));
        }
        left = &left * t;
        let m = left.max();
        if m > 0.0 {
            left /= m;
        }
        iterates.push(apply(&left, x)?);
    }
    let steps = iterates
        .windows(2)
        .map(|w| hilbert_distance(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    let envelope: Vec<f64> = (0..steps.len()).map(|n| delta.powi(n as i32) * diameter).collect();
    let certified = steps.iter().zip(&envelope).all(|(s, e)| *s <= e + 1e-12);
    Ok(ChainReport { iterates, steps, diameters, diameter, delta, envelope, certified })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub convention: HilbertConvention,
    pub trials: usize,
    pub dim: usize,
    pub seed: u64,
    /// Smallest `δ(T) d(x, y) − d(Tx, Ty)` observed.
    pub min_slack: f64,
    /// Trials with slack below `−1e−12`.
    pub violations: usize,
}

/// Tests `d(Tx, Ty) ≤ tanh(Δ(T)/4) d(x, y)` on random positive matrices with
/// entries uniform in `(0, 1]` and random positive vector pairs.
pub fn contraction_experiment(conv: HilbertConvention, trials: usize, dim: usize, seed: u64) -> Result<ContractionReport> {
    if dim < 2 {
        return Err(Error::Domain("dimension must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = |rng: &mut ChaCha8Rng| 1.0 - rng.random::<f64>();
    let mut min_slack = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..trials {
        let t = DMatrix::from_fn(dim, dim, |_, _| pos(&mut rng));
        let x: Vec<f64> = (0..dim).map(|_| pos(&mut rng)).collect();
        let y: Vec<f64> = (0..dim).map(|_| pos(&mut rng)).collect();
        let delta = contraction_coefficient(&t, conv)?;
        let lhs = hilbert_distance_with(&apply(&t, &x)?, &apply(&t, &y)?, conv)?;
        let rhs = delta * hilbert_distance_with(&x, &y, conv)?;
        let slack = rhs - lhs;
        min_slack = min_slack.min(slack);
        if slack < -1e-12 {
            violations += 1;
        }
    }
    Ok(ContractionReport { convention: conv, trials, dim, seed, min_slack, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projective_distance() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(hilbert_distance(&x, &x).unwrap(), 0.0);
        assert!(hilbert_distance(&x, &[2.0, 4.0, 6.0]).unwrap().abs() < 1e-15);
        let e2 = 2f64.exp();
        assert!((hilbert_distance(&[1.0, 1.0], &[1.0, e2]).unwrap() - 2.0).abs() < 1e-14);
        assert!((hilbert_distance_with(&[1.0, 1.0], &[1.0, e2], HilbertConvention::HalfCrossRatio).unwrap() - 1.0).abs() < 1e-14);
        assert!(hilbert_distance(&[1.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn cross_ratio_matches_ratio_form() {
        for (x, y) in [
            (vec![1.0, 1.0], vec![1.0, 2f64.exp()]),
            (vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]),
            (vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 1.0, 2.0, 2.5]),
        ] {
            let a = cross_ratio(&x, &y).unwrap().ln();
            let b = hilbert_distance(&x, &y).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn rank_one_has_zero_diameter() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 6.0]);
        assert!(diameter(&t).unwrap() < 1e-15);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(diameter(&bad), Err(Error::Domain(_))));
        let zero_col = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert_eq!(diameter(&zero_col).unwrap(), 0.0);
    }

    #[test]
    fn chain_of_rank_one_is_immediate() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 6.0]);
        let r = chained_product(&[t.clone(), t.clone(), t], &[0.3, 0.7]).unwrap();
        assert!(r.steps.iter().all(|s| *s < 1e-14));
        assert!(r.certified);
    }
}
