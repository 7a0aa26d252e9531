//! Left-invariant random walks `p(g, h) = μ(g⁻¹h)` on `Z^{d₁} ⋆ Z^{d₂}`.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit::{sample_rng, AliasTable};

use super::word::FreeWord;

/// Laziness applied when `μ(e) = 0`.
pub const DEFAULT_LAZINESS: f64 = 0.9;

/// Default cap on the number of words enumerated in a ball.
pub const DEFAULT_BALL_BUDGET: usize = 2_000_000;

const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FreeWalkSpec {
    d1: usize,
    d2: usize,
    /// Support in canonical order with positive masses.
    mu: Vec<(FreeWord, f64)>,
}

#[derive(Serialize, Deserialize)]
struct WalkDoc {
    d1: usize,
    d2: usize,
    mu: Vec<MassDoc>,
}

#[derive(Serialize, Deserialize)]
struct MassDoc {
    word: FreeWord,
    p: f64,
}

impl FreeWalkSpec {
    pub fn new(d1: usize, d2: usize, mu: Vec<(FreeWord, f64)>) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::Schema("factor ranks must be positive".into()));
        }
        let mut merged: Vec<(FreeWord, f64)> = Vec::with_capacity(mu.len());
        let mut seen = HashSet::new();
        for (w, p) in mu {
            w.check_ranks(d1, d2)?;
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Schema(format!("mass of {w} must be finite and nonnegative")));
            }
            if !seen.insert(w.clone()) {
                return Err(Error::Schema(format!("word {w} listed twice")));
            }
            if p > 0.0 {
                merged.push((w, p));
            }
        }
        let total: f64 = merged.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Schema(format!("masses sum to {total}, expected 1")));
        }
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self { d1, d2, mu: merged })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: WalkDoc = serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        Self::new(doc.d1, doc.d2, doc.mu.into_iter().map(|m| (m.word, m.p)).collect())
    }

    pub fn to_json(&self) -> String {
        let doc = WalkDoc {
            d1: self.d1,
            d2: self.d2,
            mu: self.mu.iter().map(|(w, p)| MassDoc { word: w.clone(), p: *p }).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("walk serializes")
    }

    /// Simple random walk on the generators `±e_i` of both factors.
    pub fn simple(d1: usize, d2: usize) -> Self {
        let m = 2 * (d1 + d2);
        let mut mu = Vec::with_capacity(m);
        for (f, d) in [(1u8, d1), (2u8, d2)] {
            for i in 0..d {
                for s in [1, -1] {
                    let mut v = vec![0; d];
                    v[i] = s;
                    mu.push((FreeWord::letter(f, v), 1.0 / m as f64));
                }
            }
        }
        Self::new(d1, d2, mu).expect("simple walk is valid")
    }

    pub fn ranks(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn support(&self) -> &[(FreeWord, f64)] {
        &self.mu
    }

    pub fn mass_at_identity(&self) -> f64 {
        self.mu.iter().find(|(w, _)| w.is_identity()).map_or(0.0, |(_, p)| *p)
    }

    /// `r(μ) = max{|g| : μ(g) > 0}`.
    pub fn r_mu(&self) -> u64 {
        self.mu.iter().map(|(w, _)| w.length()).max().unwrap_or(0)
    }

    /// `k(μ) = |B(e, r(μ))|`.
    pub fn k_mu(&self) -> Result<usize> {
        Ok(ball(self.d1, self.d2, self.r_mu(), DEFAULT_BALL_BUDGET)?.len())
    }

    /// `(1 − α) δ_e + α μ`.
    pub fn lazified(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!("laziness must lie in (0, 1], got {alpha}")));
        }
        let mut mu: Vec<(FreeWord, f64)> = self.mu.iter().map(|(w, p)| (w.clone(), alpha * p)).collect();
        match mu.iter_mut().find(|(w, _)| w.is_identity()) {
            Some(e) => e.1 += 1.0 - alpha,
            None if alpha < 1.0 => mu.push((FreeWord::identity(), 1.0 - alpha)),
            None => {}
        }
        let total: f64 = mu.iter().map(|(_, p)| p).sum();
        mu.iter_mut().for_each(|(_, p)| *p /= total);
        Self::new(self.d1, self.d2, mu)
    }

    /// The walk used for hitting probabilities: lazified with
    /// [`DEFAULT_LAZINESS`] when `μ(e) = 0`, together with the laziness used.
    pub fn effective(&self) -> (Self, f64) {
        if self.mass_at_identity() > 0.0 {
            (self.clone(), 1.0)
        } else {
            (
                self.lazified(DEFAULT_LAZINESS).expect("laziness in range"),
                DEFAULT_LAZINESS,
            )
        }
    }

    pub(crate) fn sampler(&self) -> AliasTable {
        AliasTable::new(&self.mu.iter().map(|(_, p)| *p).collect::<Vec<_>>())
    }
}

/// Every vector of `Z^d` with `ℓ¹` norm exactly `k`.
pub(crate) fn sphere_vectors(d: usize, k: u64) -> Vec<Vec<i64>> {
    fn rec(d: usize, k: u64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == d - 1 {
            let k = k as i64;
            if k == 0 {
                cur.push(0);
                out.push(cur.clone());
                cur.pop();
            } else {
                for s in [-k, k] {
                    cur.push(s);
                    out.push(cur.clone());
                    cur.pop();
                }
            }
            return;
        }
        for a in -(k as i64)..=(k as i64) {
            cur.push(a);
            rec(d, k - a.unsigned_abs(), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, k, &mut Vec::with_capacity(d), &mut out);
    out
}

/// `B(e, r)` in canonical order.
pub fn ball(d1: usize, d2: usize, r: u64, budget: usize) -> Result<Vec<FreeWord>> {
    let spheres: [Vec<Vec<Vec<i64>>>; 2] = [
        (0..=r).map(|k| if k == 0 { Vec::new() } else { sphere_vectors(d1, k) }).collect(),
        (0..=r).map(|k| if k == 0 { Vec::new() } else { sphere_vectors(d2, k) }).collect(),
    ];
    let mut out = vec![FreeWord::identity()];
    let mut frontier: Vec<(FreeWord, u64)> = vec![(FreeWord::identity(), 0)];
    while let Some((w, len)) = frontier.pop() {
        for f in [1u8, 2u8] {
            if w.last_factor() == Some(f) {
                continue;
            }
            for k in 1..=r - len {
                for v in &spheres[(f - 1) as usize][k as usize] {
                    let mut next = w.clone();
                    next.mul_assign(&FreeWord::letter(f, v.clone()));
                    if out.len() >= budget {
                        return Err(Error::Resource {
                            what: format!("ball of radius {r}"),
                            required: out.len() as u128 + 1,
                            budget: budget as u128,
                        });
                    }
                    out.push(next.clone());
                    if len + k < r {
                        frontier.push((next, len + k));
                    }
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// One run of the walk: `g_{t+1} = g_t ξ_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub start: FreeWord,
    /// Index into the support of `μ` for each increment.
    pub increments: Vec<usize>,
    /// `|g_t|` for `t = 0..=steps`.
    pub lengths: Vec<u64>,
    pub end: FreeWord,
}

impl Trajectory {
    /// The positions `g_0, …, g_steps`.
    pub fn positions(&self, spec: &FreeWalkSpec) -> Vec<FreeWord> {
        let mut g = self.start.clone();
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        out.push(g.clone());
        for &i in &self.increments {
            g.mul_assign(&spec.mu[i].0);
            out.push(g.clone());
        }
        out
    }
}

/// Samples `steps` increments from `μ` as given, without lazification.
pub fn sample_path(spec: &FreeWalkSpec, start: &FreeWord, steps: usize, seed: u64) -> Trajectory {
    let table = spec.sampler();
    let mut rng = sample_rng(seed, 0);
    let mut g = start.clone();
    let mut len = g.length() as i64;
    let mut increments = Vec::with_capacity(steps);
    let mut lengths = Vec::with_capacity(steps + 1);
    lengths.push(len as u64);
    for _ in 0..steps {
        let i = table.sample(&mut rng);
        len += g.mul_assign(&spec.mu[i].0);
        increments.push(i);
        lengths.push(len as u64);
    }
    Trajectory { start: start.clone(), increments, lengths, end: g }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmuReport {
    /// `R(μ)`.
    pub radius: u64,
    pub r_mu: u64,
    /// Elements of `B(e, r(μ))` reached by a positive path inside `B(e, R(μ))`.
    pub reached: usize,
    /// Elements of `B(e, r(μ))` not reached inside the largest searched ball.
    pub unreached: Vec<FreeWord>,
    pub max_radius: u64,
}

/// Smallest `R` such that every element of `B(e, r(μ))` that is reachable at
/// all within `B(e, max_radius)` is reached by a positive path staying in
/// `B(e, R)`. Steps follow the support of `μ` minus the identity.
pub fn estimate_r_mu(spec: &FreeWalkSpec, max_radius: u64) -> Result<RmuReport> {
    let r = spec.r_mu();
    if max_radius < r.max(1) {
        return Err(Error::Domain(format!("search radius {max_radius} is below r(μ) = {r}")));
    }
    let targets = ball(spec.d1, spec.d2, r, DEFAULT_BALL_BUDGET)?;
    let steps: Vec<&FreeWord> = spec.mu.iter().map(|(w, _)| w).filter(|w| !w.is_identity()).collect();
    let reached_within = |radius: u64| -> Result<HashSet<FreeWord>> {
        let mut seen: HashSet<FreeWord> = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(FreeWord::identity());
        queue.push_back(FreeWord::identity());
        while let Some(g) = queue.pop_front() {
            for s in &steps {
                let h = g.mul(s);
                if h.length() <= radius && !seen.contains(&h) {
                    if seen.len() >= DEFAULT_BALL_BUDGET {
                        return Err(Error::Resource {
                            what: format!("reachability search in radius {radius}"),
                            required: seen.len() as u128 + 1,
                            budget: DEFAULT_BALL_BUDGET as u128,
                        });
                    }
                    seen.insert(h.clone());
                    queue.push_back(h);
                }
            }
        }
        Ok(seen)
    };
    let widest = reached_within(max_radius)?;
    let goal: Vec<&FreeWord> = targets.iter().filter(|h| widest.contains(h)).collect();
    let unreached: Vec<FreeWord> = targets.iter().filter(|h| !widest.contains(h)).cloned().collect();
    if goal.len() <= 1 && targets.len() > 1 {
        return Err(Error::Inconclusive(format!(
            "no element of B(e, {r}) other than e is reached within radius {max_radius}"
        )));
    }
    for radius in 1..=max_radius {
        let seen = if radius == max_radius { widest.clone() } else { reached_within(radius)? };
        if goal.iter().all(|h| seen.contains(*h)) {
            return Ok(RmuReport { radius, r_mu: r, reached: goal.len(), unreached, max_radius });
        }
    }
    unreachable!("the widest search reaches every goal element")
}

/// Elements of `cands` reached from `e` by positive paths inside `B(e, radius)`.
pub(crate) fn reachable_subset(spec: &FreeWalkSpec, cands: &[FreeWord], radius: u64) -> Result<Vec<bool>> {
    let steps: Vec<&FreeWord> = spec.mu.iter().map(|(w, _)| w).filter(|w| !w.is_identity()).collect();
    let mut index: HashMap<&FreeWord, usize> = HashMap::new();
    for (i, c) in cands.iter().enumerate() {
        index.insert(c, i);
    }
    let mut hit = vec![false; cands.len()];
    let mut seen: HashSet<FreeWord> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(FreeWord::identity());
    queue.push_back(FreeWord::identity());
    while let Some(g) = queue.pop_front() {
        if let Some(&i) = index.get(&g) {
            hit[i] = true;
        }
        for s in &steps {
            let h = g.mul(s);
            if h.length() <= radius && seen.insert(h.clone()) {
                if seen.len() > DEFAULT_BALL_BUDGET {
                    return Err(Error::Resource {
                        what: format!("reachability search in radius {radius}"),
                        required: seen.len() as u128,
                        budget: DEFAULT_BALL_BUDGET as u128,
                    });
                }
                queue.push_back(h);
            }
        }
    }
    Ok(hit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> FreeWord {
        s.parse().unwrap()
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(ball(1, 1, 0, 100).unwrap(), vec![FreeWord::identity()]);
        let b1 = ball(1, 1, 1, 100).unwrap();
        assert_eq!(b1.len(), 5);
        let b2 = ball(1, 1, 2, 100).unwrap();
        assert_eq!(b2.len(), 17);
        assert!(b1.iter().all(|g| b2.contains(g)));
        assert!(matches!(ball(1, 1, 6, 100), Err(Error::Resource { .. })));
        // in Z^2 ⋆ Z: 1 + 4 + 2 letters of length one
        assert_eq!(ball(2, 1, 1, 100).unwrap().len(), 7);
    }

    #[test]
    fn schema_checks() {
        assert!(FreeWalkSpec::new(1, 1, vec![(w("a"), 0.5), (w("b"), 0.4)]).is_err());
        assert!(FreeWalkSpec::new(1, 1, vec![(w("a[1,0]"), 1.0)]).is_err());
        let s = FreeWalkSpec::simple(1, 1);
        let back = FreeWalkSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        assert_eq!((s.r_mu(), s.k_mu().unwrap()), (1, 5));
    }

    #[test]
    fn identity_walk_stays_put() {
        let s = FreeWalkSpec::new(1, 1, vec![(FreeWord::identity(), 1.0)]).unwrap();
        let t = sample_path(&s, &w("a b"), 20, 1);
        assert!(t.positions(&s).iter().all(|g| *g == w("a b")));
    }

    #[test]
    fn r_mu_examples() {
        let lazy = FreeWalkSpec::simple(1, 1).lazified(0.9).unwrap();
        assert_eq!(estimate_r_mu(&lazy, 6).unwrap().radius, 1);
        let even = FreeWalkSpec::new(
            1,
            1,
            vec![(w("a^2"), 0.2), (w("a^-2"), 0.2), (w("b^2"), 0.2), (w("b^-2"), 0.2), (FreeWord::identity(), 0.2)],
        )
        .unwrap();
        let rep = estimate_r_mu(&even, 6).unwrap();
        assert_eq!(rep.radius, 2);
        assert!(rep.unreached.contains(&w("a")));
    }
}
