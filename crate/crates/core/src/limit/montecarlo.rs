//! Monte Carlo central limit experiment for markov kernels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{KernelClass, LatticeKernel};
use crate::spectral::drift;

/// Samples per reduction block; fixed so sums do not depend on thread count.
const BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltMcReport {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub drift: Vec<f64>,
    /// Mean of `(X_n − n p⃗)/√n`.
    pub mean: Vec<f64>,
    /// Row-major `d × d` covariance of `(X_n − n p⃗)/√n`.
    pub cov: Vec<f64>,
    /// Empirical distribution of the level at time `n`.
    pub level_freq: Vec<f64>,
}

/// Walker alias table for one row of the kernel.
#[derive(Debug, Clone)]
pub(crate) struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    pub(crate) fn new(weights: &[f64]) -> Self {
        let m = weights.len();
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * m as f64 / total).collect();
        let mut prob = vec![1.0; m];
        let mut alias: Vec<usize> = (0..m).collect();
        let mut small: Vec<usize> = (0..m).filter(|&i| scaled[i] < 1.0).collect();
        let mut large: Vec<usize> = (0..m).filter(|&i| scaled[i] >= 1.0).collect();
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        Self { prob, alias }
    }

    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.prob.len() as f64;
        let i = (u as usize).min(self.prob.len() - 1);
        if u - (i as f64) < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// Independent stream for sample `index` under `seed`.
pub(crate) fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

struct Moments {
    sum: Vec<f64>,
    sum2: Vec<f64>,
    levels: Vec<u64>,
}

pub fn clt_monte_carlo(kernel: &LatticeKernel, n: usize, samples: usize, seed: u64) -> Result<CltMcReport> {
    if kernel.class() != KernelClass::Markov {
        return Err(Error::Class(format!("Monte Carlo needs a markov kernel, got {}", kernel.class())));
    }
    if samples < 2 || n == 0 {
        return Err(Error::Domain("need n ≥ 1 and at least 2 samples".into()));
    }
    let d = kernel.dim();
    let levels = kernel.levels();
    let (p, _) = drift(kernel)?;
    let rows: Vec<Vec<usize>> = (0..levels)
        .map(|k| (0..kernel.entries().len()).filter(|&i| kernel.entries()[i].from == k).collect())
        .collect();
    let tables: Vec<AliasTable> = rows
        .iter()
        .map(|r| AliasTable::new(&r.iter().map(|&i| kernel.entries()[i].weight).collect::<Vec<_>>()))
        .collect();
    let entries = kernel.entries();
    let sqrt_n = (n as f64).sqrt();
    let blocks = samples.div_ceil(BLOCK);
    let partials: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut m = Moments { sum: vec![0.0; d], sum2: vec![0.0; d * d], levels: vec![0; levels] };
            let mut x = vec![0i64; d];
            let mut y = vec![0.0; d];
            for s in b * BLOCK..((b + 1) * BLOCK).min(samples) {
                let mut rng = sample_rng(seed, s as u64);
                x.iter_mut().for_each(|v| *v = 0);
                let mut lvl = 0usize;
                for _ in 0..n {
                    let e = &entries[rows[lvl][tables[lvl].sample(&mut rng)]];
                    for c in 0..d {
                        x[c] += e.offset[c];
                    }
                    lvl = e.to;
                }
                for c in 0..d {
                    y[c] = (x[c] as f64 - n as f64 * p[c]) / sqrt_n;
                    m.sum[c] += y[c];
                }
                for a in 0..d {
                    for c in 0..d {
                        m.sum2[a * d + c] += y[a] * y[c];
                    }
                }
                m.levels[lvl] += 1;
            }
            m
        })
        .collect();
    let mut sum = vec![0.0; d];
    let mut sum2 = vec![0.0; d * d];
    let mut counts = vec![0u64; levels];
    for m in &partials {
        for c in 0..d {
            sum[c] += m.sum[c];
        }
        for i in 0..d * d {
            sum2[i] += m.sum2[i];
        }
        for k in 0..levels {
            counts[k] += m.levels[k];
        }
    }
    let s = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|v| v / s).collect();
    let mut cov = vec![0.0; d * d];
    for a in 0..d {
        for c in 0..d {
            cov[a * d + c] = (sum2[a * d + c] - s * mean[a] * mean[c]) / (s - 1.0);
        }
    }
    Ok(CltMcReport {
        n,
        samples,
        seed,
        drift: p,
        mean,
        cov,
        level_freq: counts.iter().map(|&c| c as f64 / s).collect(),
    })
}
