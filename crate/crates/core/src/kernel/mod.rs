//! Finitely supported, translation-invariant kernels on `Z^d × {1..N}`.
//!
//! A kernel is stored as a sorted list of entries `(Δx, from, to) → weight`
//! meaning `p((x, from), (x + Δx, to)) = weight` for every `x ∈ Z^d`.
//! Levels are 0-based in the API and 1-based in the JSON document.

mod field;
mod geom;
mod green;
mod reach;

pub use field::{convolution_power, convolution_power_with, ConvolutionEngine, MassField};
pub use geom::BoxGeom;
pub use green::{
    green_partial, GreenEngine, GreenEstimate, GreenOptions, TailRegime, TAIL_WINDOW,
};
pub use reach::{reachability_check, IrreducibilityReport, IrreducibilityVerdict};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row masses within this distance of 1 count as stochastic.
pub const MASS_TOL: f64 = 1e-12;

/// Default cap on the number of `f64` cells a single computation may hold.
pub const DEFAULT_CELL_BUDGET: u128 = 1 << 26;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelEntry {
    pub offset: Vec<i64>,
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelClass {
    Markov,
    StrictlySubMarkov,
    General,
}

impl std::fmt::Display for KernelClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelClass::Markov => "markov",
            KernelClass::StrictlySubMarkov => "strictly-sub-markov",
            KernelClass::General => "general",
        })
    }
}

/// A validated kernel. Immutable once built; every transformation returns a
/// new kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeKernel {
    dim: usize,
    levels: usize,
    entries: Vec<KernelEntry>,
    support_radius: u64,
    row_masses: Vec<f64>,
    class: KernelClass,
}

/// JSON form: `{"d": .., "N": .., "entries": [{"dx": [..], "from": 1, "to": 1, "w": ..}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelDoc {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub entries: Vec<EntryDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryDoc {
    pub dx: Vec<i64>,
    pub from: usize,
    pub to: usize,
    pub w: f64,
}

impl LatticeKernel {
    /// Validates and canonicalizes a list of entries. Zero weights are
    /// accepted and dropped.
    pub fn new(dim: usize, levels: usize, entries: Vec<KernelEntry>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Schema("lattice dimension d must be positive".into()));
        }
        if levels == 0 {
            return Err(Error::Schema("level count N must be positive".into()));
        }
        let mut map: BTreeMap<(usize, usize, Vec<i64>), f64> = BTreeMap::new();
        for e in entries {
            if e.offset.len() != dim {
                return Err(Error::Schema(format!(
                    "offset {:?} has {} coordinates, expected {dim}",
                    e.offset,
                    e.offset.len()
                )));
            }
            if e.from >= levels || e.to >= levels {
                return Err(Error::Schema(format!(
                    "level pair ({}, {}) outside 1..={levels}",
                    e.from + 1,
                    e.to + 1
                )));
            }
            if !e.weight.is_finite() {
                return Err(Error::Schema(format!("non-finite weight at {:?}", e.offset)));
            }
            if e.weight < 0.0 {
                return Err(Error::Schema(format!(
                    "negative weight {} at offset {:?}, levels ({}, {})",
                    e.weight,
                    e.offset,
                    e.from + 1,
                    e.to + 1
                )));
            }
            let key = (e.from, e.to, e.offset.clone());
            if map.insert(key, e.weight).is_some() {
                return Err(Error::Schema(format!(
                    "duplicate entry for offset {:?}, levels ({}, {})",
                    e.offset,
                    e.from + 1,
                    e.to + 1
                )));
            }
        }
        let entries: Vec<KernelEntry> = map
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|((from, to, offset), weight)| KernelEntry {
                offset,
                from,
                to,
                weight,
            })
            .collect();
        Ok(Self::from_canonical(dim, levels, entries))
    }

    fn from_canonical(dim: usize, levels: usize, entries: Vec<KernelEntry>) -> Self {
        let support_radius = entries
            .iter()
            .map(|e| l1_norm(&e.offset))
            .max()
            .unwrap_or(0);
        let mut row_masses = vec![0.0; levels];
        for e in &entries {
            row_masses[e.from] += e.weight;
        }
        let class = classify(&row_masses);
        Self {
            dim,
            levels,
            entries,
            support_radius,
            row_masses,
            class,
        }
    }

    pub fn from_doc(doc: &KernelDoc) -> Result<Self> {
        if doc.n == 0 {
            return Err(Error::Schema("level count N must be positive".into()));
        }
        let mut entries = Vec::with_capacity(doc.entries.len());
        for e in &doc.entries {
            if e.from == 0 || e.to == 0 {
                return Err(Error::Schema("levels are 1-based".into()));
            }
            entries.push(KernelEntry {
                offset: e.dx.clone(),
                from: e.from - 1,
                to: e.to - 1,
                weight: e.w,
            });
        }
        Self::new(doc.d, doc.n, entries)
    }

    /// Parses the JSON kernel document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: KernelDoc =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_doc(&doc)
    }

    pub fn to_doc(&self) -> KernelDoc {
        KernelDoc {
            d: self.dim,
            n: self.levels,
            entries: self
                .entries
                .iter()
                .map(|e| EntryDoc {
                    dx: e.offset.clone(),
                    from: e.from + 1,
                    to: e.to + 1,
                    w: e.weight,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("kernel document serializes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Entries with positive weight, sorted by `(from, to, offset)`.
    pub fn entries(&self) -> &[KernelEntry] {
        &self.entries
    }

    /// Largest ℓ1 norm among offsets carrying positive weight.
    pub fn support_radius(&self) -> u64 {
        self.support_radius
    }

    pub fn row_masses(&self) -> &[f64] {
        &self.row_masses
    }

    pub fn class(&self) -> KernelClass {
        self.class
    }

    /// Weight at `(Δx, from, to)`, zero when absent.
    pub fn weight(&self, offset: &[i64], from: usize, to: usize) -> f64 {
        self.entries
            .binary_search_by(|e| {
                (e.from, e.to, e.offset.as_slice()).cmp(&(from, to, offset))
            })
            .map(|i| self.entries[i].weight)
            .unwrap_or(0.0)
    }

    /// Componentwise minimum and maximum of the offsets in the support.
    /// Both are zero vectors for an empty kernel.
    pub fn offset_bounds(&self) -> (Vec<i64>, Vec<i64>) {
        let mut lo = vec![0i64; self.dim];
        let mut hi = vec![0i64; self.dim];
        for (i, e) in self.entries.iter().enumerate() {
            for c in 0..self.dim {
                if i == 0 || e.offset[c] < lo[c] {
                    lo[c] = e.offset[c];
                }
                if i == 0 || e.offset[c] > hi[c] {
                    hi[c] = e.offset[c];
                }
            }
        }
        (lo, hi)
    }

    /// `(1-α)δ + αp`. Adds the lazy mass at `Δx = 0` on the diagonal.
    pub fn lazify(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!("laziness α = {alpha} not in (0, 1]")));
        }
        if alpha == 1.0 {
            return Ok(self.clone());
        }
        let mut map: BTreeMap<(usize, usize, Vec<i64>), f64> = self
            .entries
            .iter()
            .map(|e| ((e.from, e.to, e.offset.clone()), alpha * e.weight))
            .collect();
        for k in 0..self.levels {
            *map.entry((k, k, vec![0; self.dim])).or_insert(0.0) += 1.0 - alpha;
        }
        let entries = map
            .into_iter()
            .map(|((from, to, offset), weight)| KernelEntry {
                offset,
                from,
                to,
                weight,
            })
            .collect();
        Ok(Self::from_canonical(self.dim, self.levels, entries))
    }

    /// Exponential tilt `p_u(0, x) = p(0, x) e^{u·x}`.
    pub fn tilt(&self, u: &[f64]) -> Result<Self> {
        if u.len() != self.dim {
            return Err(Error::Domain(format!(
                "tilt vector has {} components, kernel dimension is {}",
                u.len(),
                self.dim
            )));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite tilt {u:?}")));
        }
        let mut entries = self.entries.clone();
        for e in &mut entries {
            let w = e.weight * dot_i(u, &e.offset).exp();
            if !w.is_finite() {
                return Err(Error::Domain(format!(
                    "tilted weight overflows at offset {:?}",
                    e.offset
                )));
            }
            e.weight = w;
        }
        Ok(Self::from_canonical(self.dim, self.levels, entries))
    }

    /// Multiplies every weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Domain(format!("scale factor {c} must be positive")));
        }
        let entries = self
            .entries
            .iter()
            .map(|e| KernelEntry {
                weight: e.weight * c,
                ..e.clone()
            })
            .collect();
        Ok(Self::from_canonical(self.dim, self.levels, entries))
    }
}

fn classify(masses: &[f64]) -> KernelClass {
    if masses.iter().all(|m| (m - 1.0).abs() <= MASS_TOL) {
        KernelClass::Markov
    } else if masses.iter().all(|&m| m <= 1.0 + MASS_TOL)
        && masses.iter().any(|&m| m < 1.0 - MASS_TOL)
    {
        KernelClass::StrictlySubMarkov
    } else {
        KernelClass::General
    }
}

pub(crate) fn l1_norm(x: &[i64]) -> u64 {
    x.iter().map(|c| c.unsigned_abs()).sum()
}

pub(crate) fn dot_i(u: &[f64], x: &[i64]) -> f64 {
    u.iter().zip(x).map(|(a, &b)| a * b as f64).sum()
}

/// Closest lattice vector; a coordinate of the form `m + 1/2` goes to `m`.
pub fn nearest_lattice_point(v: &[f64]) -> Vec<i64> {
    v.iter().map(|&c| (c - 0.5).ceil() as i64).collect()
}
