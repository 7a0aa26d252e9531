//! Perron–Frobenius data of nonnegative primitive matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dominance gaps below this threshold are treated as ties.
pub const GAP_TOL: f64 = 1e-10;

/// Matrices larger than this use power iteration instead of a dense solve.
const DENSE_LIMIT: usize = 64;

/// Dominant eigenvalue with positive left (`nu`) and right (`c`) eigenvectors.
///
/// `perron` normalizes `Σ ν = 1` and `ν·C = 1`; the profile functions rescale
/// to the tilt-dependent normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronData {
    pub lambda: f64,
    pub nu: Vec<f64>,
    pub c: Vec<f64>,
    /// `λ − |λ₂|`.
    pub gap: f64,
    /// Modulus of the subdominant eigenvalue.
    pub second_modulus: f64,
}

/// Whether some power of the zero pattern is entrywise positive, checked up
/// to the Wielandt bound `(N−1)² + 1` by repeated squaring.
pub fn is_primitive(f: &DMatrix<f64>) -> bool {
    let n = f.nrows();
    let mut a: Vec<bool> = (0..n * n).map(|i| f[(i / n, i % n)] > 0.0).collect();
    let bound = (n - 1) * (n - 1) + 1;
    let mut power = 1usize;
    loop {
        if a.iter().all(|&v| v) {
            return true;
        }
        if power >= bound {
            return false;
        }
        let mut b = vec![false; n * n];
        for i in 0..n {
            for l in 0..n {
                if a[i * n + l] {
                    for j in 0..n {
                        b[i * n + j] |= a[l * n + j];
                    }
                }
            }
        }
        a = b;
        power *= 2;
    }
}

pub fn perron(f: &DMatrix<f64>) -> Result<PerronData> {
    let n = f.nrows();
    if n == 0 || f.ncols() != n {
        return Err(Error::Domain("matrix must be square and nonempty".into()));
    }
    if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain("matrix must be finite and nonnegative".into()));
    }
    if !is_primitive(f) {
        return Err(Error::Primitivity(format!(
            "no power up to {} is entrywise positive",
            (n - 1) * (n - 1) + 1
        )));
    }
    if n == 1 {
        return Ok(PerronData {
            lambda: f[(0, 0)],
            nu: vec![1.0],
            c: vec![1.0],
            gap: f[(0, 0)],
            second_modulus: 0.0,
        });
    }
    let (lambda0, second) = if n <= DENSE_LIMIT {
        dense_spectrum(f)
    } else {
        (power_estimate(f), f64::NAN)
    };
    if !(lambda0 > 0.0) {
        return Err(Error::Primitivity("dominant eigenvalue is not positive".into()));
    }
    if second.is_finite() && lambda0 - second < GAP_TOL * lambda0.max(1.0) {
        return Err(Error::Primitivity(format!(
            "dominant eigenvalue {lambda0} is not isolated (second modulus {second})"
        )));
    }
    let c = inverse_iteration(f, lambda0)?;
    let nu = inverse_iteration(&f.transpose(), lambda0)?;
    let fc = f * &c;
    let lambda = nu.dot(&fc) / nu.dot(&c);
    let (c, nu) = (c.as_slice().to_vec(), nu.as_slice().to_vec());
    let mut data = PerronData {
        lambda,
        nu,
        c,
        gap: if second.is_finite() { lambda - second } else { f64::NAN },
        second_modulus: second,
    };
    normalize(&mut data);
    Ok(data)
}

/// Rescales to `Σ ν = 1`, `ν·C = 1`.
fn normalize(p: &mut PerronData) {
    let s: f64 = p.nu.iter().sum();
    p.nu.iter_mut().for_each(|v| *v /= s);
    let dot: f64 = p.nu.iter().zip(&p.c).map(|(a, b)| a * b).sum();
    p.c.iter_mut().for_each(|v| *v /= dot);
}

fn dense_spectrum(f: &DMatrix<f64>) -> (f64, f64) {
    let eig = f.complex_eigenvalues();
    let mut best = 0usize;
    for i in 1..eig.len() {
        if eig[i].re > eig[best].re {
            best = i;
        }
    }
    let lambda = eig[best].re;
    let second = eig
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    (lambda, second)
}

fn power_estimate(f: &DMatrix<f64>) -> f64 {
    let n = f.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let y = f * &x;
        let s = y.sum();
        let next = y / s;
        let diff = (&next - &x).amax();
        x = next;
        lambda = s;
        if diff < 1e-15 {
            break;
        }
    }
    lambda
}

/// Positive eigenvector for the simple eigenvalue near `lambda`.
fn inverse_iteration(f: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
    let n = f.nrows();
    let shift = lambda * (1.0 + 1e-9) + 1e-300;
    let a = f - DMatrix::identity(n, n) * shift;
    let lu = a.lu();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..6 {
        let Some(y) = lu.solve(&x) else {
            return Err(Error::Numerical("singular shifted matrix in inverse iteration".into()));
        };
        let s = y.sum();
        x = y / s;
    }
    let max = x.amax();
    if x.iter().any(|&v| v < -1e-12 * max) {
        return Err(Error::Primitivity("dominant eigenvector is not positive".into()));
    }
    Ok(x.map(|v| v.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_stochastic() {
        let f = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.7, 0.3]);
        let p = perron(&f).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-14);
        assert!((p.nu[0] - 7.0 / 12.0).abs() < 1e-14);
        assert!((p.nu[1] - 5.0 / 12.0).abs() < 1e-14);
        assert!((p.c[0] - 1.0).abs() < 1e-14 && (p.c[1] - 1.0).abs() < 1e-14);
        assert!((p.second_modulus - 0.2).abs() < 1e-14);
    }

    #[test]
    fn scalar_case() {
        let p = perron(&DMatrix::from_element(1, 1, 0.37)).unwrap();
        assert_eq!((p.lambda, p.nu.clone(), p.c.clone()), (0.37, vec![1.0], vec![1.0]));
    }

    #[test]
    fn period_two_rejected() {
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(perron(&f), Err(Error::Primitivity(_))));
    }

    #[test]
    fn primitivity_needs_high_power() {
        // Wielandt matrix: primitive with exponent exactly (n-1)^2 + 1
        let n = 5;
        let mut f = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            f[(i, i + 1)] = 1.0;
        }
        f[(n - 1, 0)] = 1.0;
        f[(n - 1, 1)] = 1.0;
        assert!(is_primitive(&f));
        let p = perron(&f).unwrap();
        let fc = &f * DVector::from_column_slice(&p.c);
        for i in 0..n {
            assert!((fc[i] - p.lambda * p.c[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_invariance() {
        let f = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.1, 0.0, 0.3, 0.9, 0.4, 0.0, 0.1]);
        let a = perron(&f).unwrap();
        let b = perron(&(f * 3.5)).unwrap();
        assert!((b.lambda - 3.5 * a.lambda).abs() < 1e-12);
    }
}
