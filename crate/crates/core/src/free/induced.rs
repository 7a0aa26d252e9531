//! First-return kernel on a neighborhood `E_{k₁}` of a factor coset.
//!
//! For factor `i`, `E_{k₁} = {a·h : a ∈ Z^{d_i}, h ∈ H}` where `H` holds the
//! words of `B(e, k₁)` that are trivial or start in the other factor;
//! `a·h_j ↔ (a, j)`. Levels are the elements of `H` reachable from `e`.
//! When `k₁ ≥ r(μ)`, a walk outside `E_{k₁}` keeps its projection onto the
//! coset, so the first return from `a·h` (`|h| > k₁`) is the first visit of
//! `a·H`; those visits come from truncated-solve hitting matrices.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{reachability_check, IrreducibilityVerdict, KernelClass, KernelEntry, LatticeKernel};
use crate::spectral::min_lambda;

use super::hitting::{hitting_matrix, HittingBudget, HittingMethod};
use super::walk::{ball, reachable_subset, FreeWalkSpec, DEFAULT_BALL_BUDGET};
use super::word::FreeWord;

/// Some row mass must stay this far below one for the kernel to count as
/// strictly sub-markov. Rows of levels deep inside `E_{k₁}` keep mass one.
pub const SUB_MARKOV_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InducedValidation {
    pub class: String,
    pub max_row_mass: f64,
    pub min_row_mass: f64,
    /// Class is strictly sub-markov and some row leaks at least
    /// [`SUB_MARKOV_MARGIN`].
    pub strictly_sub_markov: bool,
    pub support_radius: u64,
    pub r_mu: u64,
    pub support_within_r_mu: bool,
    pub irreducibility: String,
    pub hyp1: bool,
    pub hyp2: bool,
}

impl InducedValidation {
    pub fn passed(&self) -> bool {
        self.strictly_sub_markov && self.support_within_r_mu && self.hyp1 && self.hyp2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InducedKernel {
    /// Midpoints of the sandwiched first-return probabilities.
    pub kernel: LatticeKernel,
    pub lower: LatticeKernel,
    pub upper: LatticeKernel,
    pub factor: u8,
    pub prefix: FreeWord,
    pub k1: u64,
    /// `h_1, …, h_N`.
    pub levels: Vec<FreeWord>,
    /// Laziness of the walk actually used.
    pub alpha: f64,
    pub max_gap: f64,
    pub validation: InducedValidation,
}

impl InducedKernel {
    /// `(x, j)` for a word of `E_{k₁}` written relative to the prefix.
    pub fn coordinates(&self, g: &FreeWord) -> Option<(Vec<i64>, usize)> {
        let rel = self.prefix.inverse().mul(g);
        let (x, h) = split(&rel, self.factor, self.dim());
        self.levels.iter().position(|l| *l == h).map(|j| (x, j))
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }
}

/// `g = x·h` with `x` in the factor and `h` trivial or starting elsewhere.
fn split(g: &FreeWord, factor: u8, d: usize) -> (Vec<i64>, FreeWord) {
    match g.letters().first() {
        Some(l) if l.factor == factor => {
            let x = l.v.clone();
            (x.clone(), FreeWord::letter(factor, x.iter().map(|v| -v).collect()).mul(g))
        }
        _ => (vec![0; d], g.clone()),
    }
}

pub fn induced_kernel(
    spec: &FreeWalkSpec,
    factor: u8,
    prefix: &FreeWord,
    k1: u64,
    budget: &HittingBudget,
) -> Result<InducedKernel> {
    if factor != 1 && factor != 2 {
        return Err(Error::Domain(format!("factor must be 1 or 2, got {factor}")));
    }
    let (d1, d2) = spec.ranks();
    prefix.check_ranks(d1, d2)?;
    if prefix.last_factor() == Some(factor) {
        return Err(Error::Domain("the prefix must end outside the chosen factor".into()));
    }
    let r = spec.r_mu();
    if k1 < r {
        return Err(Error::Precondition(format!("k1 = {k1} is below r(μ) = {r}")));
    }
    let d = if factor == 1 { d1 } else { d2 };
    let (walk, alpha) = spec.effective();
    let other: Vec<FreeWord> = ball(d1, d2, k1, DEFAULT_BALL_BUDGET)?
        .into_iter()
        .filter(|h| h.first_factor() != Some(factor))
        .collect();
    let reach = reachable_subset(&walk, &other, k1 + 4 * r.max(1) + 4)?;
    let levels: Vec<FreeWord> = other.into_iter().zip(reach).filter(|(_, ok)| *ok).map(|(h, _)| h).collect();
    let level_of: HashMap<&FreeWord, usize> = levels.iter().enumerate().map(|(j, h)| (h, j)).collect();
    // weights keyed by (from, to, offset): (lower, upper)
    let mut acc: BTreeMap<(usize, usize, Vec<i64>), (f64, f64)> = BTreeMap::new();
    // outside states h with (from level, offset, mass)
    let mut outside: BTreeMap<FreeWord, Vec<(usize, Vec<i64>, f64)>> = BTreeMap::new();
    for (k, hk) in levels.iter().enumerate() {
        for (xi, p) in walk.support() {
            let y = hk.mul(xi);
            let (x, h) = split(&y, factor, d);
            if h.length() <= k1 {
                let j = *level_of.get(&h).ok_or_else(|| {
                    Error::Contradiction(format!("step from level {hk} lands on unreachable word {h}"))
                })?;
                let e = acc.entry((k, j, x)).or_insert((0.0, 0.0));
                e.0 += p;
                e.1 += p;
            } else {
                outside.entry(h).or_default().push((k, x, *p));
            }
        }
    }
    let mut max_gap: f64 = 0.0;
    if !outside.is_empty() {
        let rows: Vec<FreeWord> = outside.keys().cloned().collect();
        let hm = hitting_matrix(&walk, &rows, &levels, HittingMethod::TruncatedSolve, budget)?;
        max_gap = hm.max_error();
        for (ri, h) in rows.iter().enumerate() {
            for (k, x, p) in &outside[h] {
                for (ci, w) in hm.cols.iter().enumerate() {
                    let j = level_of[w];
                    let (lo, hi) = (hm.lower[ri][ci], hm.upper[ri][ci]);
                    if hi > 0.0 {
                        let e = acc.entry((*k, j, x.clone())).or_insert((0.0, 0.0));
                        e.0 += p * lo;
                        e.1 += p * hi;
                    }
                }
            }
        }
    }
    let build = |pick: &dyn Fn(f64, f64) -> f64| -> Result<LatticeKernel> {
        let entries = acc
            .iter()
            .map(|((k, j, x), (lo, hi))| KernelEntry { offset: x.clone(), from: *k, to: *j, weight: pick(*lo, *hi) })
            .collect();
        LatticeKernel::new(d, levels.len(), entries)
    };
    let kernel = build(&|lo, hi| 0.5 * (lo + hi))?;
    let lower = build(&|lo, _| lo)?;
    let upper = build(&|_, hi| hi)?;
    let validation = validate(&kernel, &upper, r)?;
    Ok(InducedKernel {
        kernel,
        lower,
        upper,
        factor,
        prefix: prefix.clone(),
        k1,
        levels,
        alpha,
        max_gap,
        validation,
    })
}

fn validate(kernel: &LatticeKernel, upper: &LatticeKernel, r_mu: u64) -> Result<InducedValidation> {
    let max_row_mass = upper.row_masses().iter().copied().fold(0.0, f64::max);
    let min_row_mass = upper.row_masses().iter().copied().fold(f64::INFINITY, f64::min);
    let support_radius = kernel.support_radius();
    let reach = reachability_check(kernel, 2, 8 * support_radius.max(1) + 8);
    let irreducible = reach.verdict != IrreducibilityVerdict::NotIrreducibleWitness;
    let hyp2 = match min_lambda(kernel) {
        Ok(m) => m.hyp2_holds,
        Err(_) => false,
    };
    let class = kernel.class();
    Ok(InducedValidation {
        class: class.to_string(),
        max_row_mass,
        min_row_mass,
        strictly_sub_markov: class == KernelClass::StrictlySubMarkov && min_row_mass < 1.0 - SUB_MARKOV_MARGIN,
        support_radius,
        r_mu,
        support_within_r_mu: support_radius <= r_mu,
        irreducibility: format!("{:?}", reach.verdict),
        hyp1: irreducible && !kernel.entries().is_empty(),
        hyp2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> FreeWord {
        s.parse().unwrap()
    }

    #[test]
    fn free_group_neighborhood() {
        let s = FreeWalkSpec::simple(1, 1);
        let ik = induced_kernel(&s, 1, &w("e"), 1, &HittingBudget::default()).unwrap();
        assert_eq!(ik.levels, vec![w("e"), w("b^-1"), w("b")]);
        assert!(ik.validation.passed(), "{:?}", ik.validation);
        assert_eq!(ik.coordinates(&w("a^3 b")), Some((vec![3], 2)));
    }

    #[test]
    fn walk_inside_one_factor() {
        let s = FreeWalkSpec::new(1, 1, vec![(w("a"), 0.5), (w("a^-1"), 0.5)]).unwrap();
        let ik = induced_kernel(&s, 1, &w("e"), 1, &HittingBudget::default()).unwrap();
        assert_eq!(ik.levels, vec![w("e")]);
        assert_eq!(ik.kernel.class(), KernelClass::Markov);
        assert!((ik.kernel.weight(&[1], 0, 0) - 0.45).abs() < 1e-12);
        assert!(matches!(
            induced_kernel(&FreeWalkSpec::new(1, 1, vec![(w("a^2"), 0.5), (w("a^-2"), 0.5)]).unwrap(), 1, &w("e"), 1, &HittingBudget::default()),
            Err(Error::Precondition(_))
        ));
    }
}
