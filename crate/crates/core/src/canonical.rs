//! Reference kernels with known closed-form behaviour.

use crate::kernel::{KernelEntry, LatticeKernel};

fn entry(offset: &[i64], from: usize, to: usize, weight: f64) -> KernelEntry {
    KernelEntry {
        offset: offset.to_vec(),
        from,
        to,
        weight,
    }
}

fn build(dim: usize, levels: usize, entries: Vec<KernelEntry>) -> LatticeKernel {
    LatticeKernel::new(dim, levels, entries).expect("reference kernels are valid")
}

/// Nearest-neighbour walk on `Z` with `p(+1) = p`, `p(−1) = 1 − p`.
pub fn nearest_neighbor(p: f64) -> LatticeKernel {
    build(1, 1, vec![entry(&[1], 0, 0, p), entry(&[-1], 0, 0, 1.0 - p)])
}

/// `p(+1) = 0.7`, `p(−1) = 0.3`.
pub fn k1() -> LatticeKernel {
    nearest_neighbor(0.7)
}

/// Two-level ladder on `Z` with `F(0) = [[0.5, 0.5], [0.7, 0.3]]` and drift 1/6.
pub fn k2_ladder() -> LatticeKernel {
    build(
        1,
        2,
        vec![
            entry(&[1], 0, 0, 0.5),
            entry(&[0], 0, 1, 0.5),
            entry(&[0], 1, 0, 0.4),
            entry(&[-1], 1, 0, 0.3),
            entry(&[0], 1, 1, 0.3),
        ],
    )
}

/// Simple random walk on `Z^d`.
pub fn srw(dim: usize) -> LatticeKernel {
    let w = 1.0 / (2 * dim) as f64;
    let mut e = Vec::new();
    for c in 0..dim {
        for s in [-1, 1] {
            let mut o = vec![0; dim];
            o[c] = s;
            e.push(entry(&o, 0, 0, w));
        }
    }
    build(dim, 1, e)
}

/// Centered two-level walk on `Z^2`: level 1 moves horizontally, level 2
/// vertically, and each switches level with probability 1/2.
pub fn centered_2d_ladder() -> LatticeKernel {
    build(
        2,
        2,
        vec![
            entry(&[1, 0], 0, 0, 0.25),
            entry(&[-1, 0], 0, 0, 0.25),
            entry(&[0, 0], 0, 1, 0.5),
            entry(&[0, 1], 1, 1, 0.25),
            entry(&[0, -1], 1, 1, 0.25),
            entry(&[0, 0], 1, 0, 0.5),
        ],
    )
}

/// Aperiodic two-level walk on `Z^2` with nonzero drift.
pub fn drifted_2d_ladder() -> LatticeKernel {
    build(
        2,
        2,
        vec![
            entry(&[1, 0], 0, 0, 0.3),
            entry(&[0, 1], 0, 0, 0.2),
            entry(&[-1, 0], 0, 0, 0.1),
            entry(&[0, -1], 0, 0, 0.1),
            entry(&[0, 0], 0, 1, 0.3),
            entry(&[0, 0], 1, 0, 0.4),
            entry(&[1, 1], 1, 1, 0.2),
            entry(&[-1, 0], 1, 1, 0.2),
            entry(&[0, -1], 1, 1, 0.2),
        ],
    )
}

/// Two-level walk on `Z^2` with drift `(0.35, 0.35)`: level 1 favours the
/// first axis, level 2 the second, and diagonal steps switch levels.
pub fn skew_2d_ladder() -> LatticeKernel {
    build(
        2,
        2,
        vec![
            entry(&[1, 0], 0, 0, 0.35),
            entry(&[0, 1], 0, 0, 0.15),
            entry(&[-1, 0], 0, 0, 0.1),
            entry(&[0, -1], 0, 0, 0.1),
            entry(&[0, 0], 0, 1, 0.1),
            entry(&[1, 1], 0, 1, 0.2),
            entry(&[0, 1], 1, 1, 0.35),
            entry(&[1, 0], 1, 1, 0.15),
            entry(&[0, -1], 1, 1, 0.1),
            entry(&[-1, 0], 1, 1, 0.1),
            entry(&[0, 0], 1, 0, 0.1),
            entry(&[1, 1], 1, 0, 0.2),
        ],
    )
}

/// Symmetric strictly sub-markov walk on `Z` with row mass 0.6.
pub fn sub_markov_1d() -> LatticeKernel {
    build(1, 1, vec![entry(&[1], 0, 0, 0.3), entry(&[-1], 0, 0, 0.3)])
}
