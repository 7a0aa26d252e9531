//! Exact convolution powers `p^(n)` on their full support box.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::cmat_pow;

use super::geom::{check_budget, step_fields, BoxGeom, StepEntries};
use super::{LatticeKernel, DEFAULT_CELL_BUDGET};

/// Dense field of `p^(n)_{k,j}(0, x)` over a box containing its support.
#[derive(Debug, Clone, PartialEq)]
pub struct MassField {
    steps: usize,
    levels: usize,
    geom: BoxGeom,
    /// `values[k * levels + j]` is the array over `geom`.
    values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionEngine {
    /// Transform-based for `d = 2` boxes above 10^6 cells, direct otherwise.
    #[default]
    Auto,
    Direct,
    Fourier,
}

const FOURIER_THRESHOLD: usize = 1_000_000;

impl MassField {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn geom(&self) -> &BoxGeom {
        &self.geom
    }

    /// Array over [`Self::geom`] for the level pair `(k, j)`.
    pub fn values(&self, k: usize, j: usize) -> &[f64] {
        &self.values[k * self.levels + j]
    }

    /// `p^(n)_{k,j}(0, x)`, zero outside the box.
    pub fn get(&self, x: &[i64], k: usize, j: usize) -> f64 {
        self.geom
            .index(x)
            .map(|i| self.values[k * self.levels + j][i])
            .unwrap_or(0.0)
    }

    /// `Σ_{x,j} p^(n)_{k,j}(0, x)`.
    pub fn row_mass(&self, k: usize) -> f64 {
        (0..self.levels)
            .map(|j| self.values(k, j).iter().sum::<f64>())
            .sum()
    }

    /// Convolution of two fields: `(p^(m) * p^(n))_{k,j}(0,x) = Σ_{y,l} p^(m)_{k,l}(0,y) p^(n)_{l,j}(0,x−y)`.
    pub fn convolve(&self, other: &MassField) -> Result<MassField> {
        if self.levels != other.levels || self.geom.dim() != other.geom.dim() {
            return Err(Error::Domain("fields have different shapes".into()));
        }
        let n = self.levels;
        let lo: Vec<i64> = self.geom.lo.iter().zip(&other.geom.lo).map(|(a, b)| a + b).collect();
        let hi: Vec<i64> = self
            .geom
            .hi()
            .iter()
            .zip(other.geom.hi())
            .map(|(a, b)| a + b)
            .collect();
        let geom = BoxGeom::from_corners(&lo, &hi);
        let mut values = vec![vec![0.0; geom.cells()]; n * n];
        let ocoords: Vec<Vec<i64>> = other.geom.iter_coords().collect();
        for a in 0..self.geom.cells() {
            let y = self.geom.coords(a);
            for k in 0..n {
                for l in 0..n {
                    let pa = self.values(k, l)[a];
                    if pa == 0.0 {
                        continue;
                    }
                    for (b, z) in ocoords.iter().enumerate() {
                        let x: Vec<i64> = y.iter().zip(z).map(|(p, q)| p + q).collect();
                        let idx = geom.index(&x).expect("sum lies in the sum box");
                        for j in 0..n {
                            values[k * n + j][idx] += pa * other.values(l, j)[b];
                        }
                    }
                }
            }
        }
        Ok(MassField {
            steps: self.steps + other.steps,
            levels: n,
            geom,
            values,
        })
    }
}

/// `p^(n)` with the default engine and cell budget.
pub fn convolution_power(kernel: &LatticeKernel, n: usize) -> Result<MassField> {
    convolution_power_with(kernel, n, ConvolutionEngine::Auto, DEFAULT_CELL_BUDGET)
}

/// `p^(n)` on the box `[n·lo, n·hi]`, where `lo, hi` bound the offsets.
/// `budget` caps the number of stored cells (box cells times `N²`).
pub fn convolution_power_with(
    kernel: &LatticeKernel,
    n: usize,
    engine: ConvolutionEngine,
    budget: u128,
) -> Result<MassField> {
    let levels = kernel.levels();
    let d = kernel.dim();
    if n == 0 {
        let geom = BoxGeom::point(&vec![0; d]);
        let mut values = vec![vec![0.0]; levels * levels];
        for k in 0..levels {
            values[k * levels + k][0] = 1.0;
        }
        return Ok(MassField {
            steps: 0,
            levels,
            geom,
            values,
        });
    }
    let (lo, hi) = kernel.offset_bounds();
    let nn = n as i64;
    let geom = BoxGeom::from_corners(
        &lo.iter().map(|a| a * nn).collect::<Vec<_>>(),
        &hi.iter().map(|a| a * nn).collect::<Vec<_>>(),
    );
    let required = geom.cells_u128() * (levels * levels) as u128;
    check_budget(&format!("{n}-step convolution power"), required, budget)?;
    let use_fourier = match engine {
        ConvolutionEngine::Direct => false,
        ConvolutionEngine::Fourier => true,
        ConvolutionEngine::Auto => d == 2 && geom.cells() > FOURIER_THRESHOLD,
    };
    if use_fourier {
        // complex storage doubles the footprint
        check_budget(&format!("{n}-step transform grid"), 2 * required, budget)?;
        return Ok(fourier_power(kernel, n, &lo, geom));
    }
    let entries = StepEntries::new(kernel);
    let mut values = vec![Vec::new(); levels * levels];
    for k in 0..levels {
        let mut g = BoxGeom::point(&vec![0; d]);
        let mut fields = vec![vec![0.0]; levels];
        fields[k][0] = 1.0;
        for m in 1..=nn {
            let ng = BoxGeom::from_corners(
                &lo.iter().map(|a| a * m).collect::<Vec<_>>(),
                &hi.iter().map(|a| a * m).collect::<Vec<_>>(),
            );
            fields = step_fields(&entries, levels, &fields, &g, &ng);
            g = ng;
        }
        for (j, f) in fields.into_iter().enumerate() {
            values[k * levels + j] = f;
        }
    }
    Ok(MassField {
        steps: n,
        levels,
        geom,
        values,
    })
}

fn fourier_power(kernel: &LatticeKernel, n: usize, lo: &[i64], geom: BoxGeom) -> MassField {
    let levels = kernel.levels();
    let shape = geom.shape.clone();
    let total = geom.cells();
    let mut planner = FftPlanner::<f64>::new();
    let mut arrays = vec![vec![Complex64::new(0.0, 0.0); total]; levels * levels];
    for e in kernel.entries() {
        let rel: Vec<i64> = e.offset.iter().zip(lo).map(|(a, b)| a - b).collect();
        let idx = geom_index_rel(&shape, &rel);
        arrays[e.from * levels + e.to][idx] += e.weight;
    }
    for a in arrays.iter_mut() {
        fft_nd(&mut planner, a, &shape, false);
    }
    let mut m = vec![Complex64::new(0.0, 0.0); levels * levels];
    for q in 0..total {
        for (p, a) in arrays.iter().enumerate() {
            m[p] = a[q];
        }
        let pw = cmat_pow(&m, levels, n as u64);
        for (p, a) in arrays.iter_mut().enumerate() {
            a[q] = pw[p];
        }
    }
    let scale = 1.0 / total as f64;
    let mut values = Vec::with_capacity(levels * levels);
    for mut a in arrays {
        fft_nd(&mut planner, &mut a, &shape, true);
        values.push(a.iter().map(|c| (c.re * scale).max(0.0)).collect());
    }
    MassField {
        steps: n,
        levels,
        geom,
        values,
    }
}

fn geom_index_rel(shape: &[usize], rel: &[i64]) -> usize {
    rel.iter()
        .zip(shape)
        .fold(0usize, |acc, (&r, &s)| acc * s + r as usize)
}

/// In-place multidimensional DFT over a row-major array (unnormalized).
pub(crate) fn fft_nd(
    planner: &mut FftPlanner<f64>,
    data: &mut [Complex64],
    shape: &[usize],
    inverse: bool,
) {
    let total: usize = shape.iter().product();
    let mut stride = total;
    for &len in shape {
        stride /= len;
        if len == 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let block = len * stride;
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        for base in (0..total).step_by(block) {
            for s in 0..stride {
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + s + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[base + s + i * stride] = *v;
                }
            }
        }
    }
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
    fn zero_steps_is_kronecker() {
        let f = convolution_power(&k1(), 0).unwrap();
        assert_eq!(f.get(&[0], 0, 0), 1.0);
        assert_eq!(f.get(&[1], 0, 0), 0.0);
    }

    #[test]
    fn two_steps_enumerated() {
        let f = convolution_power(&k1(), 2).unwrap();
        assert!((f.get(&[0], 0, 0) - 0.42).abs() < 1e-15);
        assert!((f.get(&[2], 0, 0) - 0.49).abs() < 1e-15);
        assert!((f.get(&[-2], 0, 0) - 0.09).abs() < 1e-15);
        assert_eq!(f.get(&[1], 0, 0), 0.0);
    }

    #[test]
    fn budget_reports_required_size() {
        let err = convolution_power_with(&k1(), 100, ConvolutionEngine::Direct, 10).unwrap_err();
        assert_eq!(
            err,
            Error::Resource { what: "100-step convolution power".into(), required: 201, budget: 10 }
        );
    }

    #[test]
    fn fourier_matches_direct_in_two_dimensions() {
        let k = LatticeKernel::new(
            2,
            2,
            vec![
                KernelEntry { offset: vec![1, 0], from: 0, to: 0, weight: 0.3 },
                KernelEntry { offset: vec![0, -1], from: 0, to: 1, weight: 0.4 },
                KernelEntry { offset: vec![-1, 2], from: 0, to: 0, weight: 0.3 },
                KernelEntry { offset: vec![0, 1], from: 1, to: 0, weight: 0.5 },
                KernelEntry { offset: vec![1, 1], from: 1, to: 1, weight: 0.5 },
            ],
        )
        .unwrap();
        let a = convolution_power_with(&k, 12, ConvolutionEngine::Direct, u128::MAX).unwrap();
        let b = convolution_power_with(&k, 12, ConvolutionEngine::Fourier, u128::MAX).unwrap();
        assert_eq!(a.geom(), b.geom());
        for k in 0..2 {
            for j in 0..2 {
                for (x, y) in a.values(k, j).iter().zip(b.values(k, j)) {
                    assert!((x - y).abs() < 1e-14);
                }
            }
        }
    }
}
