//! Bounded reachability search: a sound semi-decision for irreducibility.

use std::collections::VecDeque;

use serde::Serialize;

use super::geom::BoxGeom;
use super::LatticeKernel;

/// States explored by the breadth-first search are capped at this count.
const SEARCH_CAP: u128 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IrreducibilityVerdict {
    IrreducibleUpToRadius,
    NotIrreducibleWitness,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrreducibilityReport {
    pub verdict: IrreducibilityVerdict,
    pub radius: u64,
    pub steps: u64,
    /// Whether every level reaches every level in the level digraph.
    pub levels_strongly_connected: bool,
    /// States of the target box reached from `(0, k)` for every start level `k`.
    pub reached: u64,
    pub box_states: u64,
    /// A state `(x, level)` proven unreachable from `(0, from_level)`.
    pub witness: Option<(Vec<i64>, usize, usize)>,
    pub reason: String,
}

/// Checks whether every state of `[-radius, radius]^d × levels` is reached
/// from `(0, k)` for every level `k` by paths of at most `steps` steps.
///
/// `not-irreducible-witness` is only returned with a proof: a level digraph
/// that is not strongly connected, a coordinate that never decreases (or
/// never increases), or a coordinate whose offsets share a common factor.
pub fn reachability_check(kernel: &LatticeKernel, radius: u64, steps: u64) -> IrreducibilityReport {
    let d = kernel.dim();
    let levels = kernel.levels();
    let radius = radius.max(1);
    let steps = steps.max(1);
    let strongly = level_graph_strongly_connected(kernel);
    let r = radius as i64;
    let target = BoxGeom::from_corners(&vec![-r; d], &vec![r; d]);
    let box_states = (target.cells() * levels) as u64;
    let mut report = IrreducibilityReport {
        verdict: IrreducibilityVerdict::Inconclusive,
        radius,
        steps,
        levels_strongly_connected: strongly,
        reached: 0,
        box_states,
        witness: None,
        reason: String::new(),
    };
    if let Some((x, j, k, reason)) = witness(kernel, strongly) {
        report.verdict = IrreducibilityVerdict::NotIrreducibleWitness;
        report.witness = Some((x, j, k));
        report.reason = reason;
        return report;
    }
    // explore a box no larger than what `steps` steps can cover
    let reach = (steps as i64).saturating_mul(kernel.support_radius().max(1) as i64);
    let mut er = reach.max(r);
    loop {
        let side = (2 * er + 1) as u128;
        if side.pow(d as u32) * levels as u128 <= SEARCH_CAP || er <= r {
            break;
        }
        er = (er + r) / 2;
    }
    let explore = BoxGeom::from_corners(&vec![-er; d], &vec![er; d]);
    let mut min_reached = u64::MAX;
    for k in 0..levels {
        let reached = bfs_count(kernel, &explore, &target, k, steps);
        min_reached = min_reached.min(reached);
    }
    report.reached = min_reached;
    if min_reached == box_states && strongly {
        report.verdict = IrreducibilityVerdict::IrreducibleUpToRadius;
        report.reason = "every box state reached from every level".into();
    } else {
        report.reason = format!("{min_reached} of {box_states} box states reached within {steps} steps");
    }
    report
}

fn bfs_count(kernel: &LatticeKernel, explore: &BoxGeom, target: &BoxGeom, k: usize, steps: u64) -> u64 {
    let levels = kernel.levels();
    let cells = explore.cells();
    let mut dist = vec![u32::MAX; cells * levels];
    let origin = explore.index(&vec![0; kernel.dim()]).expect("origin inside");
    dist[origin * levels + k] = 0;
    let mut queue = VecDeque::from([(origin, k)]);
    let mut count = 0u64;
    while let Some((cell, lvl)) = queue.pop_front() {
        let x = explore.coords(cell);
        if target.index(&x).is_some() {
            count += 1;
        }
        let dd = dist[cell * levels + lvl];
        if dd as u64 >= steps {
            continue;
        }
        for e in kernel.entries().iter().filter(|e| e.from == lvl) {
            let y: Vec<i64> = x.iter().zip(&e.offset).map(|(a, b)| a + b).collect();
            if let Some(c) = explore.index(&y) {
                let s = c * levels + e.to;
                if dist[s] == u32::MAX {
                    dist[s] = dd + 1;
                    queue.push_back((c, e.to));
                }
            }
        }
    }
    count
}

fn level_graph_strongly_connected(kernel: &LatticeKernel) -> bool {
    let n = kernel.levels();
    let mut adj = vec![vec![false; n]; n];
    for e in kernel.entries() {
        adj[e.from][e.to] = true;
    }
    (0..n).all(|s| {
        let mut seen = vec![false; n];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(a) = stack.pop() {
            for b in 0..n {
                if adj[a][b] && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen.iter().all(|&v| v)
    })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Returns `(x, to_level, from_level, reason)` for a provably unreachable state.
fn witness(kernel: &LatticeKernel, strongly: bool) -> Option<(Vec<i64>, usize, usize, String)> {
    let d = kernel.dim();
    let levels = kernel.levels();
    if !strongly {
        let mut adj = vec![vec![false; levels]; levels];
        for e in kernel.entries() {
            adj[e.from][e.to] = true;
        }
        for s in 0..levels {
            let mut seen = vec![false; levels];
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(a) = stack.pop() {
                for b in 0..levels {
                    if adj[a][b] && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
            if let Some(t) = seen.iter().position(|v| !v) {
                return Some((
                    vec![0; d],
                    t,
                    s,
                    format!("level {} never reaches level {}", s + 1, t + 1),
                ));
            }
        }
    }
    for c in 0..d {
        let coords: Vec<i64> = kernel.entries().iter().map(|e| e.offset[c]).collect();
        let mut x = vec![0i64; d];
        if coords.iter().all(|&v| v >= 0) {
            x[c] = -1;
            return Some((x, 0, 0, format!("coordinate {} never decreases", c + 1)));
        }
        if coords.iter().all(|&v| v <= 0) {
            x[c] = 1;
            return Some((x, 0, 0, format!("coordinate {} never increases", c + 1)));
        }
        let g = coords.iter().fold(0u64, |g, v| gcd(g, v.unsigned_abs()));
        if g > 1 {
            x[c] = 1;
            return Some((x, 0, 0, format!("coordinate {} moves in multiples of {g}", c + 1)));
        }
    }
    None
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
    fn nearest_neighbor_walk_is_irreducible() {
        for radius in [1, 5, 17] {
            let r = reachability_check(&k1(), radius, 2 * radius);
            assert_eq!(r.verdict, IrreducibilityVerdict::IrreducibleUpToRadius);
        }
    }

    #[test]
    fn monotone_walk_has_witness() {
        let k = LatticeKernel::new(1, 1, vec![KernelEntry { offset: vec![1], from: 0, to: 0, weight: 1.0 }])
            .unwrap();
        let r = reachability_check(&k, 5, 10);
        assert_eq!(r.verdict, IrreducibilityVerdict::NotIrreducibleWitness);
        assert_eq!(r.witness, Some((vec![-1], 0, 0)));
    }

    #[test]
    fn too_few_steps_is_inconclusive() {
        let r = reachability_check(&k1(), 10, 5);
        assert_eq!(r.verdict, IrreducibilityVerdict::Inconclusive);
    }
}
