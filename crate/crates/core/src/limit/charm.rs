//! Characteristic matrices `ψ_u(ξ)` and `χ_u(ξ) = ψ_u(ξ) e^{-i∇λ(u)·ξ}`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{dot_i, LatticeKernel};
use crate::linalg::{cmat_max_diff, cmat_pow};
use crate::spectral::{lambda_and_grad, spectral_profile, LEVEL_TOL};

/// Largest exponent accepted by [`clt_curve`].
pub const MAX_POWER: u64 = 1 << 30;

#[derive(Debug, Clone, PartialEq)]
pub struct CharMatrix {
    pub xi: Vec<f64>,
    pub levels: usize,
    /// Row-major `N × N`.
    pub psi: Vec<Complex64>,
    pub chi: Vec<Complex64>,
}

/// `ψ_u(ξ)_{k,j} = Σ_x p_{k,j}(0,x) e^{u·x} e^{iξ·x}`.
pub fn psi(kernel: &LatticeKernel, u: &[f64], xi: &[f64]) -> Result<Vec<Complex64>> {
    let d = kernel.dim();
    if u.len() != d || xi.len() != d {
        return Err(Error::Domain(format!("u and ξ must have {d} components")));
    }
    if xi.iter().chain(u).any(|v| !v.is_finite()) {
        return Err(Error::Domain("u and ξ must be finite".into()));
    }
    let n = kernel.levels();
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for e in kernel.entries() {
        let mag = e.weight * dot_i(u, &e.offset).exp();
        if !mag.is_finite() {
            return Err(Error::Domain(format!("e^(u·x) overflows at offset {:?}", e.offset)));
        }
        m[e.from * n + e.to] += Complex64::from_polar(mag, dot_i(xi, &e.offset));
    }
    Ok(m)
}

pub fn char_matrix(kernel: &LatticeKernel, u: &[f64], xi: &[f64]) -> Result<CharMatrix> {
    let grad = lambda_and_grad(kernel, u)?.1;
    char_matrix_with_grad(kernel, u, xi, &grad)
}

pub fn char_matrix_with_grad(kernel: &LatticeKernel, u: &[f64], xi: &[f64], grad: &[f64]) -> Result<CharMatrix> {
    let p = psi(kernel, u, xi)?;
    let phase = Complex64::from_polar(1.0, -grad.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>());
    Ok(CharMatrix {
        xi: xi.to_vec(),
        levels: kernel.levels(),
        chi: p.iter().map(|z| z * phase).collect(),
        psi: p,
    })
}

/// Eigenvalue of largest modulus of a complex matrix.
pub fn dominant_eigenvalue(m: &[Complex64], n: usize) -> Complex64 {
    if n == 1 {
        return m[0];
    }
    let mat = DMatrix::from_row_slice(n, n, m);
    let eig = mat
        .schur()
        .eigenvalues()
        .expect("complex Schur form is triangular");
    eig.iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("nonempty spectrum")
}

/// `λ_u(ξ)`: the eigenvalue of `χ_u(ξ)` continuing `λ(u)` from `ξ = 0`.
pub fn lambda_xi(kernel: &LatticeKernel, u: &[f64], xi: &[f64], grad: &[f64]) -> Result<Complex64> {
    let c = char_matrix_with_grad(kernel, u, xi, grad)?;
    Ok(dominant_eigenvalue(&c.chi, c.levels))
}

/// `Q_u` from second central differences of `−λ_u(ξ)` at `ξ = 0`.
pub fn q_from_char(kernel: &LatticeKernel, u: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let d = kernel.dim();
    let (lam, grad) = lambda_and_grad(kernel, u)?;
    let at = |xi: Vec<f64>| -> Result<f64> { Ok(lambda_xi(kernel, u, &xi, &grad)?.re) };
    let mut q = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let mut pp = vec![0.0; d];
            let mut pm = vec![0.0; d];
            let mut mp = vec![0.0; d];
            let mut mm = vec![0.0; d];
            pp[a] += h;
            pp[b] += h;
            pm[a] += h;
            pm[b] -= h;
            mp[a] -= h;
            mp[b] += h;
            mm[a] -= h;
            mm[b] -= h;
            let v = (at(pp)? - at(pm)? - at(mp)? + at(mm)?) / (4.0 * h * h);
            q[(a, b)] = -v / lam;
            q[(b, a)] = -v / lam;
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltPoint {
    pub n: u64,
    pub power: Vec<Complex64>,
    pub limit: Vec<f64>,
    pub error: f64,
}

/// `[χ_u(ξ/√n)]^n` against `e^{-Q_u(ξ)/2} C(u) ν(u)`.
pub fn clt_curve(kernel: &LatticeKernel, u: &[f64], xi: &[f64], n: u64) -> Result<CltPoint> {
    if n == 0 || n > MAX_POWER {
        return Err(Error::Domain(format!("n must be in 1..={MAX_POWER}")));
    }
    let prof = spectral_profile(kernel, u)?;
    if (prof.lambda() - 1.0).abs() > LEVEL_TOL {
        return Err(Error::Level { residual: (prof.lambda() - 1.0).abs(), tolerance: LEVEL_TOL });
    }
    let (q, _, _) = prof.q_or_err()?;
    let levels = kernel.levels();
    let s = (n as f64).sqrt();
    let scaled: Vec<f64> = xi.iter().map(|v| v / s).collect();
    let c = char_matrix_with_grad(kernel, u, &scaled, &prof.grad)?;
    let power = cmat_pow(&c.chi, levels, n);
    let qx: f64 = (0..xi.len())
        .map(|a| (0..xi.len()).map(|b| xi[a] * q[(a, b)] * xi[b]).sum::<f64>())
        .sum();
    let g = (-0.5 * qx).exp();
    let mut limit = vec![0.0; levels * levels];
    for k in 0..levels {
        for j in 0..levels {
            limit[k * levels + j] = g * prof.perron.c[k] * prof.perron.nu[j];
        }
    }
    let lc: Vec<Complex64> = limit.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let error = cmat_max_diff(&power, &lc);
    Ok(CltPoint { n, power, limit, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelEntry;

    fn k1() -> LatticeKernel {
        LatticeKernel::new(
            1,
            1,
            vec![
                KernelEntry { offset: vec![1], from: 0, to: 0, weight: 0.7 },
                KernelEntry { offset: vec![-1], from: 0, to: 0, weight: 0.3 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn psi_at_pi() {
        let p = psi(&k1(), &[0.0], &[std::f64::consts::PI]).unwrap();
        assert!((p[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn chi_at_zero_is_f() {
        let c = char_matrix(&k1(), &[0.2], &[0.0]).unwrap();
        let f = 0.7 * 0.2f64.exp() + 0.3 * (-0.2f64).exp();
        assert!((c.psi[0].re - f).abs() < 1e-15 && (c.chi[0].re - f).abs() < 1e-15);
    }

    #[test]
    fn clt_scalar_limit() {
        let mut prev = f64::INFINITY;
        for n in [100, 1000, 10_000] {
            let p = clt_curve(&k1(), &[0.0], &[1.0], n).unwrap();
            assert!((p.limit[0] - (-0.42f64).exp()).abs() < 1e-8);
            assert!(p.error < prev);
            prev = p.error;
        }
        assert!(prev < 0.02);
    }

    #[test]
    fn q_matches_char_differences() {
        let q = q_from_char(&k1(), &[0.0], 1e-3).unwrap();
        assert!((q[(0, 0)] - 0.84).abs() < 1e-6);
    }

    #[test]
    fn off_level_clt_is_level_error() {
        assert!(matches!(clt_curve(&k1(), &[0.3], &[1.0], 10), Err(Error::Level { .. })));
    }
}
