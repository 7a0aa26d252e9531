//! Transitional sets `V = g·B(x, r(μ))` for prefixes `x` of `g⁻¹h`: every
//! path of the walk from `g` to `h` visits `V`.

use serde::Serialize;

use crate::error::Result;

use super::walk::{ball, FreeWalkSpec, DEFAULT_BALL_BUDGET};
use super::word::FreeWord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionalSet {
    /// The prefix `x` of `g⁻¹h`.
    pub prefix: FreeWord,
    /// `g·x`.
    pub center: FreeWord,
    /// Elements in canonical order of their offsets from the center, so
    /// translated copies index alike.
    pub words: Vec<FreeWord>,
}

/// Smallest distance between elements of two sets.
pub fn set_distance(a: &[FreeWord], b: &[FreeWord]) -> u64 {
    let mut best = u64::MAX;
    for x in a {
        for y in b {
            best = best.min(x.distance(y));
        }
    }
    best
}

/// Disjoint transitional sets between `g` and `h`, ordered along the
/// geodesic, built greedily from the proper nontrivial prefixes of `g⁻¹h`.
/// Consecutive sets are at distance at least `spacing`, and neither `g` nor
/// `h` lies in any set.
pub fn transitional_chain(spec: &FreeWalkSpec, g: &FreeWord, h: &FreeWord, spacing: u64) -> Result<Vec<TransitionalSet>> {
    let (d1, d2) = spec.ranks();
    let r = spec.r_mu();
    let offsets = ball(d1, d2, r, DEFAULT_BALL_BUDGET)?;
    let path = g.inverse().mul(h);
    let mut out: Vec<TransitionalSet> = Vec::new();
    for p in 1..path.size() {
        let x = path.prefix(p)?;
        let center = g.mul(&x);
        let words: Vec<FreeWord> = offsets.iter().map(|b| center.mul(b)).collect();
        if words.iter().any(|v| v == g || v == h) {
            continue;
        }
        if let Some(prev) = out.last() {
            if set_distance(&prev.words, &words) < spacing.max(1) {
                continue;
            }
        }
        out.push(TransitionalSet { prefix: x, center, words });
    }
    Ok(out)
}
