//! Integer boxes and the row-wise stepping routine shared by convolution
//! powers and Green sums.

use crate::error::{Error, Result};

use super::LatticeKernel;

/// Axis-aligned box `lo ≤ x < lo + shape` in `Z^d`, stored row-major with the
/// last coordinate contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxGeom {
    pub lo: Vec<i64>,
    pub shape: Vec<usize>,
}

impl BoxGeom {
    /// Box with inclusive corners `lo ..= hi`; empty when `hi < lo` anywhere.
    pub fn from_corners(lo: &[i64], hi: &[i64]) -> Self {
        let shape = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| if b >= a { (b - a + 1) as usize } else { 0 })
            .collect();
        Self {
            lo: lo.to_vec(),
            shape,
        }
    }

    pub fn point(x: &[i64]) -> Self {
        Self::from_corners(x, x)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn hi(&self) -> Vec<i64> {
        self.lo
            .iter()
            .zip(&self.shape)
            .map(|(&a, &s)| a + s as i64 - 1)
            .collect()
    }

    pub fn cells(&self) -> usize {
        self.shape.iter().product()
    }

    /// Cell count without overflow, for budget checks.
    pub fn cells_u128(&self) -> u128 {
        self.shape.iter().map(|&s| s as u128).product()
    }

    pub fn is_empty(&self) -> bool {
        self.shape.contains(&0)
    }

    pub fn index(&self, x: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for c in 0..self.dim() {
            let off = x[c] - self.lo[c];
            if off < 0 || off as usize >= self.shape[c] {
                return None;
            }
            idx = idx * self.shape[c] + off as usize;
        }
        Some(idx)
    }

    pub fn coords(&self, mut flat: usize) -> Vec<i64> {
        let d = self.dim();
        let mut x = vec![0i64; d];
        for c in (0..d).rev() {
            x[c] = self.lo[c] + (flat % self.shape[c]) as i64;
            flat /= self.shape[c];
        }
        x
    }

    pub fn intersect(&self, other: &BoxGeom) -> BoxGeom {
        let (h1, h2) = (self.hi(), other.hi());
        let lo: Vec<i64> = self.lo.iter().zip(&other.lo).map(|(a, b)| *a.max(b)).collect();
        let hi: Vec<i64> = h1.iter().zip(&h2).map(|(a, b)| *a.min(b)).collect();
        BoxGeom::from_corners(&lo, &hi)
    }

    pub fn iter_coords(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.cells()).map(move |i| self.coords(i))
    }
}

/// Kernel entries flattened for the stepping loop.
pub(crate) struct StepEntries {
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    pub offset: Vec<Vec<i64>>,
    pub weight: Vec<f64>,
}

impl StepEntries {
    pub fn new(kernel: &LatticeKernel) -> Self {
        let e = kernel.entries();
        Self {
            from: e.iter().map(|e| e.from).collect(),
            to: e.iter().map(|e| e.to).collect(),
            offset: e.iter().map(|e| e.offset.clone()).collect(),
            weight: e.iter().map(|e| e.weight).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }
}

/// One application of the kernel to per-level fields:
/// `new_j(x) = Σ_{entries l→j, Δ} old_l(x − Δ)·w`, evaluated on `new_geom`.
///
/// The loop order is fixed, so results do not depend on anything but the
/// inputs.
pub(crate) fn step_fields(
    entries: &StepEntries,
    levels: usize,
    old: &[Vec<f64>],
    old_geom: &BoxGeom,
    new_geom: &BoxGeom,
) -> Vec<Vec<f64>> {
    let cells = new_geom.cells();
    let mut new = vec![vec![0.0; cells]; levels];
    if cells == 0 || old_geom.is_empty() {
        return new;
    }
    let d = new_geom.dim();
    let last = d - 1;
    let row_len = new_geom.shape[last];
    let rows = cells / row_len;
    let outer_new = BoxGeom {
        lo: new_geom.lo[..last].to_vec(),
        shape: new_geom.shape[..last].to_vec(),
    };
    let outer_old = BoxGeom {
        lo: old_geom.lo[..last].to_vec(),
        shape: old_geom.shape[..last].to_vec(),
    };
    let old_row_len = old_geom.shape[last];
    let mut src_outer = vec![0i64; last];
    for r in 0..rows {
        let outer = if last == 0 { Vec::new() } else { outer_new.coords(r) };
        for e in 0..entries.len() {
            let off = &entries.offset[e];
            for c in 0..last {
                src_outer[c] = outer[c] - off[c];
            }
            let old_row = if last == 0 {
                Some(0)
            } else {
                outer_old.index(&src_outer)
            };
            let Some(old_row) = old_row else { continue };
            // new x in [nlo, nlo+row_len), source x - Δ in [olo, olo+old_row_len)
            let nlo = new_geom.lo[last];
            let olo = old_geom.lo[last] + off[last];
            let start = nlo.max(olo);
            let end = (nlo + row_len as i64).min(olo + old_row_len as i64);
            if start >= end {
                continue;
            }
            let len = (end - start) as usize;
            let dst0 = r * row_len + (start - nlo) as usize;
            let src0 = old_row * old_row_len + (start - olo) as usize;
            let w = entries.weight[e];
            let src = &old[entries.from[e]][src0..src0 + len];
            let dst = &mut new[entries.to[e]][dst0..dst0 + len];
            for (a, b) in dst.iter_mut().zip(src) {
                *a += w * b;
            }
        }
    }
    new
}

pub(crate) fn check_budget(what: &str, required: u128, budget: u128) -> Result<()> {
    if required > budget {
        return Err(Error::Resource {
            what: what.to_string(),
            required,
            budget,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_coords_round_trip() {
        let g = BoxGeom::from_corners(&[-2, 3, 0], &[1, 5, 4]);
        assert_eq!(g.cells(), 4 * 3 * 5);
        for i in 0..g.cells() {
            assert_eq!(g.index(&g.coords(i)), Some(i));
        }
        assert_eq!(g.index(&[2, 3, 0]), None);
    }

    #[test]
    fn intersection_can_be_empty() {
        let a = BoxGeom::from_corners(&[0], &[3]);
        let b = BoxGeom::from_corners(&[5], &[9]);
        assert!(a.intersect(&b).is_empty());
        assert_eq!(a.intersect(&BoxGeom::from_corners(&[2], &[9])).shape, vec![2]);
    }
}
