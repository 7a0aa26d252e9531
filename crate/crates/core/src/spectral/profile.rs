//! The tilted level matrix `F(u)` and derivatives of its Perron root `λ(u)`.
//!
//! Normalization: `Σ_j ν(0)_j = 1`, then `ν(0)·C(u) = 1` and `ν(u)·C(u) = 1`.
//! With this choice `∇λ(u) = ν(u) ∇F(u) C(u)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{dot_i, KernelClass, LatticeKernel};

use super::perron::{perron, PerronData};

/// `|λ(u) − 1|` at most this for `Q_u` to be formed.
pub const LEVEL_TOL: f64 = 1e-9;

/// Centered when `‖p⃗‖` is at most this.
pub const CENTERED_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    pub u: Vec<f64>,
    pub f: DMatrix<f64>,
    pub perron: PerronData,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
    /// `∇²λ − ∇λ ∇λᵀ`, present when `λ(u) = 1` within [`LEVEL_TOL`].
    pub q: Option<DMatrix<f64>>,
    pub sigma: Option<DMatrix<f64>>,
    pub det_q: Option<f64>,
}

impl SpectralProfile {
    pub fn lambda(&self) -> f64 {
        self.perron.lambda
    }

    /// `Q_u`, or a level error when `λ(u) ≠ 1`.
    pub fn q_or_err(&self) -> Result<(&DMatrix<f64>, &DMatrix<f64>, f64)> {
        match (&self.q, &self.sigma, self.det_q) {
            (Some(q), Some(s), Some(det)) => Ok((q, s, det)),
            _ => Err(Error::Level {
                residual: (self.perron.lambda - 1.0).abs(),
                tolerance: LEVEL_TOL,
            }),
        }
    }
}

/// `F_{k,j}(u) = Σ_x p_{k,j}(0,x) e^{u·x}`.
pub fn assemble_f(kernel: &LatticeKernel, u: &[f64]) -> Result<DMatrix<f64>> {
    check_u(kernel, u)?;
    let n = kernel.levels();
    let mut f: DMatrix<f64> = DMatrix::zeros(n, n);
    for e in kernel.entries() {
        let w = e.weight * dot_i(u, &e.offset).exp();
        if !w.is_finite() {
            return Err(Error::Domain(format!(
                "e^(u·x) overflows at offset {:?}, levels ({}, {})",
                e.offset,
                e.from + 1,
                e.to + 1
            )));
        }
        f[(e.from, e.to)] += w;
    }
    if f.iter().any(|v: &f64| !v.is_finite()) {
        return Err(Error::Domain("F(u) overflows".into()));
    }
    Ok(f)
}

/// `∂F/∂u_c` for each coordinate `c`.
pub fn assemble_grad_f(kernel: &LatticeKernel, u: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    check_u(kernel, u)?;
    let n = kernel.levels();
    let mut g = vec![DMatrix::zeros(n, n); kernel.dim()];
    for e in kernel.entries() {
        let w = e.weight * dot_i(u, &e.offset).exp();
        for (c, gc) in g.iter_mut().enumerate() {
            gc[(e.from, e.to)] += w * e.offset[c] as f64;
        }
    }
    Ok(g)
}

fn check_u(kernel: &LatticeKernel, u: &[f64]) -> Result<()> {
    if u.len() != kernel.dim() {
        return Err(Error::Domain(format!(
            "u has {} components, kernel dimension is {}",
            u.len(),
            kernel.dim()
        )));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite u {u:?}")));
    }
    Ok(())
}

/// Perron data of `F(u)` under the tilt-dependent normalization.
pub fn perron_at(kernel: &LatticeKernel, u: &[f64]) -> Result<PerronData> {
    let nu0 = perron(&assemble_f(kernel, &vec![0.0; kernel.dim()])?)?.nu;
    perron_at_with(kernel, u, &nu0)
}

fn perron_at_with(kernel: &LatticeKernel, u: &[f64], nu0: &[f64]) -> Result<PerronData> {
    let mut p = perron(&assemble_f(kernel, u)?)?;
    let s: f64 = nu0.iter().zip(&p.c).map(|(a, b)| a * b).sum();
    p.c.iter_mut().for_each(|v| *v /= s);
    let t: f64 = p.nu.iter().zip(&p.c).map(|(a, b)| a * b).sum();
    p.nu.iter_mut().for_each(|v| *v /= t);
    Ok(p)
}

/// `λ(u)`.
pub fn lambda_at(kernel: &LatticeKernel, u: &[f64]) -> Result<f64> {
    Ok(perron(&assemble_f(kernel, u)?)?.lambda)
}

/// `(λ(u), ∇λ(u))` from `ν ∇F C` with `ν·C = 1`.
pub fn lambda_and_grad(kernel: &LatticeKernel, u: &[f64]) -> Result<(f64, Vec<f64>)> {
    let p = perron(&assemble_f(kernel, u)?)?;
    let g = grad_from(kernel, u, &p)?;
    Ok((p.lambda, g))
}

fn grad_from(kernel: &LatticeKernel, u: &[f64], p: &PerronData) -> Result<Vec<f64>> {
    let nu = DVector::from_column_slice(&p.nu);
    let c = DVector::from_column_slice(&p.c);
    let dot = nu.dot(&c);
    Ok(assemble_grad_f(kernel, u)?
        .iter()
        .map(|g| nu.dot(&(g * &c)) / dot)
        .collect())
}

/// Central differences of the analytic gradient, Richardson-extrapolated once.
pub fn hessian_fd(kernel: &LatticeKernel, u: &[f64]) -> Result<DMatrix<f64>> {
    let d = u.len();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = 1e-5 * (1.0 + norm);
    let diff = |c: usize, h: f64| -> Result<Vec<f64>> {
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[c] += h;
        um[c] -= h;
        let gp = lambda_and_grad(kernel, &up)?.1;
        let gm = lambda_and_grad(kernel, &um)?.1;
        Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let mut hess = DMatrix::zeros(d, d);
    for c in 0..d {
        let coarse = diff(c, h)?;
        let fine = diff(c, h / 2.0)?;
        for r in 0..d {
            hess[(r, c)] = (4.0 * fine[r] - coarse[r]) / 3.0;
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Full profile at `u`. `Q`, `Σ` and `|Q|` are filled only on the unit level.
pub fn spectral_profile(kernel: &LatticeKernel, u: &[f64]) -> Result<SpectralProfile> {
    let f = assemble_f(kernel, u)?;
    let nu0 = perron(&assemble_f(kernel, &vec![0.0; kernel.dim()])?)?.nu;
    let p = perron_at_with(kernel, u, &nu0)?;
    let grad = grad_from(kernel, u, &p)?;
    let hess = hessian_fd(kernel, u)?;
    let (mut q, mut sigma, mut det_q) = (None, None, None);
    if (p.lambda - 1.0).abs() <= LEVEL_TOL {
        let g = DVector::from_column_slice(&grad);
        let qm = &hess - &g * g.transpose();
        let chol = qm.clone().cholesky().ok_or_else(|| {
            Error::Numerical(format!("Q_u is not positive definite at u = {u:?}"))
        })?;
        det_q = Some(qm.determinant());
        sigma = Some(chol.inverse());
        q = Some(qm);
    }
    Ok(SpectralProfile {
        u: u.to_vec(),
        f,
        perron: p,
        grad,
        hess,
        q,
        sigma,
        det_q,
    })
}

/// Mean displacement `p⃗ = Σ ν(0)_k x p_{k,j}(0,x)` and the centered flag.
pub fn drift(kernel: &LatticeKernel) -> Result<(Vec<f64>, bool)> {
    if kernel.class() != KernelClass::Markov {
        return Err(Error::Class(format!(
            "drift needs a markov kernel, got {}",
            kernel.class()
        )));
    }
    let nu0 = perron(&assemble_f(kernel, &vec![0.0; kernel.dim()])?)?.nu;
    let mut p = vec![0.0; kernel.dim()];
    for e in kernel.entries() {
        for (c, pc) in p.iter_mut().enumerate() {
            *pc += nu0[e.from] * e.weight * e.offset[c] as f64;
        }
    }
    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((p, norm <= CENTERED_TOL))
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

    fn k2() -> LatticeKernel {
        let e = |o: i64, f: usize, t: usize, w: f64| KernelEntry { offset: vec![o], from: f, to: t, weight: w };
        LatticeKernel::new(
            1,
            2,
            vec![e(1, 0, 0, 0.5), e(0, 0, 1, 0.5), e(0, 1, 0, 0.4), e(-1, 1, 0, 0.3), e(0, 1, 1, 0.3)],
        )
        .unwrap()
    }

    #[test]
    fn scalar_profile_at_origin() {
        let p = spectral_profile(&k1(), &[0.0]).unwrap();
        assert!((p.lambda() - 1.0).abs() < 1e-14);
        assert!((p.grad[0] - 0.4).abs() < 1e-14);
        assert!((p.hess[(0, 0)] - 1.0).abs() < 1e-8);
        let (q, s, det) = p.q_or_err().unwrap();
        assert!((q[(0, 0)] - 0.84).abs() < 1e-8);
        assert!((s[(0, 0)] * 0.84 - 1.0).abs() < 1e-8);
        assert!((det - 0.84).abs() < 1e-8);
    }

    #[test]
    fn scalar_profile_at_second_root() {
        let p = spectral_profile(&k1(), &[(3.0f64 / 7.0).ln()]).unwrap();
        assert!((p.lambda() - 1.0).abs() < 1e-14);
        assert!((p.grad[0] + 0.4).abs() < 1e-14);
        assert!((p.q_or_err().unwrap().0[(0, 0)] - 0.84).abs() < 1e-8);
    }

    #[test]
    fn off_level_profile_has_no_q() {
        let p = spectral_profile(&k1(), &[0.3]).unwrap();
        assert!(p.q.is_none());
        assert!(matches!(p.q_or_err(), Err(Error::Level { .. })));
    }

    #[test]
    fn ladder_matrix_and_drift() {
        let f = assemble_f(&k2(), &[0.0]).unwrap();
        assert_eq!(f, DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.7, 0.3]));
        let (p, centered) = drift(&k2()).unwrap();
        assert!((p[0] - 1.0 / 6.0).abs() < 1e-14);
        assert!(!centered);
        let (_, g) = lambda_and_grad(&k2(), &[0.0]).unwrap();
        assert!((g[0] - p[0]).abs() < 1e-12);
    }

    #[test]
    fn normalization_chain() {
        let k = k2();
        let nu0 = perron_at(&k, &[0.0]).unwrap().nu;
        assert!((nu0.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let p = perron_at(&k, &[0.8]).unwrap();
        let a: f64 = nu0.iter().zip(&p.c).map(|(x, y)| x * y).sum();
        let b: f64 = p.nu.iter().zip(&p.c).map(|(x, y)| x * y).sum();
        assert!((a - 1.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
    }

    #[test]
    fn drift_requires_markov() {
        let k = k1().scaled(0.5).unwrap();
        assert!(matches!(drift(&k), Err(Error::Class(_))));
    }

    #[test]
    fn overflow_reported() {
        assert!(matches!(assemble_f(&k1(), &[800.0]), Err(Error::Domain(_))));
    }
}
