//! Sequences separating two boundary points.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{nearest_lattice_point, LatticeKernel};
use crate::spectral::{min_lambda, solve_direction_from};

use super::martin::martin_kernel_boundary_at;

/// Values above this stop the sequence.
pub const OVERFLOW_GUARD: f64 = 1e300;

/// "Tends to infinity" means the last value exceeds the first by this factor.
pub const GROWTH_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationWitness {
    /// Direction of travel `θ` with `θ·u₁ > 0 > θ·u₂` (or `= 0` when `u_i = 0`).
    pub theta: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    /// Lattice points `⟨mθ⟩`, `m = 1..`.
    pub points: Vec<Vec<i64>>,
    /// `K((x_m, 1), θ₁)`.
    pub seq1: Vec<f64>,
    /// `K((x_m, 1), θ₂)`.
    pub seq2: Vec<f64>,
    pub overflow: bool,
    pub first_diverges: bool,
    pub second_vanishes: bool,
    pub ratio_diverges: bool,
}

/// Evaluates both boundary kernels along `x_m = ⟨mθ⟩` for `m = 1..=n`, with
/// base `(0, level 1)` and source level 1.
pub fn separation_witness(kernel: &LatticeKernel, theta1: &[f64], theta2: &[f64], n: usize) -> Result<SeparationWitness> {
    let min = min_lambda(kernel)?;
    let a = solve_direction_from(kernel, theta1, &min)?;
    let b = solve_direction_from(kernel, theta2, &min)?;
    let d = kernel.dim();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect();
    if norm(&diff) < 1e-9 {
        return Err(Error::Contradiction(format!(
            "directions {theta1:?} and {theta2:?} solved to the same point {:?}",
            a.u
        )));
    }
    let (n1, n2) = (norm(&a.u), norm(&b.u));
    let mut theta: Vec<f64> = if n1 < 1e-9 {
        b.u.iter().map(|v| -v / n2).collect()
    } else if n2 < 1e-9 {
        a.u.iter().map(|v| v / n1).collect()
    } else {
        a.u.iter().zip(&b.u).map(|(x, y)| x / n1 - y / n2).collect()
    };
    let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).sum::<f64>();
    if norm(&theta) < 1e-12 || dot(&theta, &a.u) < 0.0 || dot(&theta, &b.u) > 0.0 {
        theta = diff.clone();
    }
    let tn = norm(&theta);
    theta.iter_mut().for_each(|v| *v /= tn);
    let origin = vec![0i64; d];
    let mut points = Vec::with_capacity(n);
    let mut seq1 = Vec::with_capacity(n);
    let mut seq2 = Vec::with_capacity(n);
    let mut overflow = false;
    for m in 1..=n {
        let x = nearest_lattice_point(&theta.iter().map(|t| t * m as f64).collect::<Vec<_>>());
        let v1 = martin_kernel_boundary_at(kernel, (&x, 0), &a, (&origin, 0))?.value;
        let v2 = martin_kernel_boundary_at(kernel, (&x, 0), &b, (&origin, 0))?.value;
        if !(v1 < OVERFLOW_GUARD) {
            overflow = true;
            break;
        }
        points.push(x);
        seq1.push(v1);
        seq2.push(v2);
    }
    let (first_diverges, second_vanishes, ratio_diverges) = match (seq1.first(), seq1.last(), seq2.first(), seq2.last()) {
        (Some(&f1), Some(&l1), Some(&f2), Some(&l2)) => (
            overflow || l1 > GROWTH_FACTOR * f1,
            l2 < f2 / GROWTH_FACTOR,
            overflow || l1 / l2 > GROWTH_FACTOR * f1 / f2,
        ),
        _ => (overflow, false, overflow),
    };
    Ok(SeparationWitness {
        theta,
        u1: a.u,
        u2: b.u,
        points,
        seq1,
        seq2,
        overflow,
        first_diverges,
        second_vanishes,
        ratio_diverges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::k1;

    #[test]
    fn scalar_separation() {
        let w = separation_witness(&k1(), &[1.0], &[-1.0], 50).unwrap();
        assert_eq!(w.theta, vec![1.0]);
        assert!(w.seq1.iter().all(|v| (v - 1.0).abs() < 1e-9));
        for (m, v) in w.seq2.iter().enumerate() {
            assert!((v / (3.0f64 / 7.0).powi(m as i32 + 1) - 1.0).abs() < 1e-8);
        }
        assert!(w.second_vanishes && w.ratio_diverges && !w.first_diverges);
    }

    #[test]
    fn swapping_directions_swaps_sequences() {
        let a = separation_witness(&k1(), &[1.0], &[-1.0], 20).unwrap();
        let b = separation_witness(&k1(), &[-1.0], &[1.0], 20).unwrap();
        assert_eq!(b.theta, vec![-1.0]);
        for m in 0..20 {
            assert!((a.seq2[m] * b.seq1[m] - 1.0).abs() < 1e-8);
            assert!((a.seq1[m] - b.seq2[m]).abs() < 1e-9);
        }
    }
}
