//! `martin-lab free ...`

use std::path::PathBuf;

use clap::{Subcommand, ValueEnum};
use rayon::prelude::*;

use martin_core::free::{
    ball, contraction_experiment, estimate_r_mu, hitting_matrix, induced_kernel, martin_ratio_trace, sample_path,
    transitional_chain, FreeWalkSpec, FreeWord, HilbertConvention, HittingBudget, HittingMethod, MartinEstimator,
    DEFAULT_BALL_BUDGET,
};

use crate::output::{num, Artifact, CliResult, Csv, Ctx, Outcome};
use crate::{parse_word, parse_words, Words};

#[derive(Subcommand, Debug)]
pub enum FreeCmd {
    /// Sample paths of the walk and report the speed |g_n|/n.
    Simulate {
        walk: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long, value_parser = parse_word, default_value = "e")]
        start: FreeWord,
    },
    /// The ball B(e, R) in the word metric.
    Ball {
        #[arg(long)]
        d1: usize,
        #[arg(long)]
        d2: usize,
        #[arg(long)]
        radius: u64,
    },
    /// Hitting matrix P(v, w) = P_v(first visit to W is at w).
    Hit {
        walk: PathBuf,
        /// Start words separated by `;`.
        #[arg(long = "V", value_parser = parse_words, allow_hyphen_values = true)]
        v: Words,
        /// Target words separated by `;`.
        #[arg(long = "W", value_parser = parse_words, allow_hyphen_values = true)]
        w: Words,
        #[arg(long, value_enum, default_value_t = Method::Solve)]
        method: Method,
    },
    /// Transitional sets along the geodesic from g to h.
    Transitional {
        walk: PathBuf,
        #[arg(long, value_parser = parse_word, default_value = "e")]
        g: FreeWord,
        #[arg(long, value_parser = parse_word)]
        h: FreeWord,
        /// Minimal distance between consecutive sets; defaults to R(μ)+1.
        #[arg(long)]
        spacing: Option<u64>,
    },
    /// Martin ratios K(g, h_n) along a sequence of targets.
    Martin {
        walk: PathBuf,
        #[arg(long, value_parser = parse_word)]
        g: FreeWord,
        /// Targets separated by `;`.
        #[arg(long, value_parser = parse_words)]
        targets: Words,
        #[arg(long, value_enum, default_value_t = Estimator::Direct)]
        estimator: Estimator,
    },
    /// Hilbert-metric contraction on random positive matrices.
    Contract {
        #[arg(long, value_enum, default_value_t = Convention::Both)]
        convention: Convention,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 5)]
        dim: usize,
    },
    /// First-return kernel on a neighbourhood of a factor coset, as a kernel
    /// document.
    Induce {
        walk: PathBuf,
        #[arg(long, default_value_t = 1)]
        factor: u8,
        #[arg(long, value_parser = parse_word, default_value = "e")]
        prefix: FreeWord,
        /// Neighbourhood radius; defaults to r(μ).
        #[arg(long)]
        k1: Option<u64>,
    },
    /// The connection radius R(μ).
    Rmu {
        walk: PathBuf,
        #[arg(long)]
        max_radius: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Mc,
    Solve,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Estimator {
    Direct,
    Factorized,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum Convention {
    Birkhoff,
    Half,
    Both,
}

impl FreeCmd {
    pub fn name(&self) -> &'static str {
        match self {
            FreeCmd::Simulate { .. } => "simulate",
            FreeCmd::Ball { .. } => "ball",
            FreeCmd::Hit { .. } => "hit",
            FreeCmd::Transitional { .. } => "transitional",
            FreeCmd::Martin { .. } => "martin",
            FreeCmd::Contract { .. } => "contract",
            FreeCmd::Induce { .. } => "induce",
            FreeCmd::Rmu { .. } => "rmu",
        }
    }
}

/// `--budget` is the episode count for Monte Carlo and the state cap for
/// truncated solves.
fn hitting_budget(ctx: &Ctx, method: HittingMethod) -> HittingBudget {
    let mut b = HittingBudget { seed: ctx.opts.seed, ..HittingBudget::default() };
    if let Some(t) = ctx.opts.tol {
        b.tol = t;
    }
    if let Some(n) = ctx.opts.budget {
        match method {
            HittingMethod::MonteCarlo => b.episodes = n as usize,
            HittingMethod::TruncatedSolve => b.max_states = n as usize,
        }
    }
    b
}

fn default_max_radius(spec: &FreeWalkSpec) -> u64 {
    4 * spec.r_mu().max(1) + 4
}

pub fn run(cmd: &FreeCmd, ctx: &mut Ctx) -> CliResult<Outcome> {
    match cmd {
        FreeCmd::Simulate { walk, steps, paths, start } => {
            let spec = ctx.walk(walk)?;
            let seed = ctx.opts.seed;
            let ends: Vec<(u64, FreeWord)> = (0..*paths as u64)
                .into_par_iter()
                .map(|i| {
                    let t = sample_path(&spec, start, *steps, seed.wrapping_add(i));
                    (*t.lengths.last().unwrap_or(&0), t.end)
                })
                .collect();
            let mut csv = Csv::new(&["path", "length", "speed", "end"]);
            let denom = (*steps).max(1) as f64;
            let speeds: Vec<f64> = ends.iter().map(|(l, _)| *l as f64 / denom).collect();
            for (i, ((l, end), s)) in ends.iter().zip(&speeds).enumerate() {
                csv.row(&[i.to_string(), l.to_string(), s.to_string(), format!("\"{end}\"")]);
            }
            let mean = speeds.iter().sum::<f64>() / speeds.len().max(1) as f64;
            let var = speeds.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (speeds.len().max(2) - 1) as f64;
            let summary = format!("paths={paths} steps={steps} speed={} stderr={}", num(mean), num((var / speeds.len().max(1) as f64).sqrt()));
            Ok(Outcome::new(summary, csv.finish()))
        }
        FreeCmd::Ball { d1, d2, radius } => {
            let words = ball(*d1, *d2, *radius, DEFAULT_BALL_BUDGET)?;
            let mut csv = Csv::new(&["word", "length"]);
            for w in &words {
                csv.row(&[format!("\"{w}\""), w.length().to_string()]);
            }
            Ok(Outcome::new(format!("size={}", words.len()), csv.finish()))
        }
        FreeCmd::Hit { walk, v, w, method } => {
            let spec = ctx.walk(walk)?;
            let method = match method {
                Method::Mc => HittingMethod::MonteCarlo,
                Method::Solve => HittingMethod::TruncatedSolve,
            };
            let budget = hitting_budget(ctx, method);
            let hm = hitting_matrix(&spec, &v.0, &w.0, method, &budget)?;
            let mut csv = Csv::new(&["row", "col", "value", "lower", "upper", "error"]);
            let mut lines = Vec::new();
            for (i, r) in hm.rows.iter().enumerate() {
                for (j, c) in hm.cols.iter().enumerate() {
                    csv.row(&[
                        format!("\"{r}\""),
                        format!("\"{c}\""),
                        hm.values[i][j].to_string(),
                        hm.lower[i][j].to_string(),
                        hm.upper[i][j].to_string(),
                        hm.error[i][j].to_string(),
                    ]);
                    lines.push(format!("P({r}, {c})={} ± {}", num(hm.values[i][j]), num(hm.error[i][j])));
                }
            }
            lines.push(format!("alpha={} max_error={} states={}", num(hm.alpha), num(hm.max_error()), hm.states));
            Ok(Outcome::new(lines.join("\n"), csv.finish()))
        }
        FreeCmd::Transitional { walk, g, h, spacing } => {
            let spec = ctx.walk(walk)?;
            let spacing = match spacing {
                Some(s) => *s,
                None => estimate_r_mu(&spec, default_max_radius(&spec))?.radius + 1,
            };
            let sets = transitional_chain(&spec, g, h, spacing)?;
            let mut lines = vec![format!("sets={} spacing={spacing}", sets.len())];
            lines.extend(sets.iter().map(|s| format!("center={} size={}", s.center, s.words.len())));
            Ok(Outcome::new(lines.join("\n"), Artifact::json(&sets)))
        }
        FreeCmd::Martin { walk, g, targets, estimator } => {
            let spec = ctx.walk(walk)?;
            let (est, method) = match estimator {
                Estimator::Direct => (MartinEstimator::Direct, HittingMethod::MonteCarlo),
                Estimator::Factorized => (MartinEstimator::Factorized, HittingMethod::TruncatedSolve),
            };
            let budget = hitting_budget(ctx, method);
            let trace = martin_ratio_trace(&spec, g, &targets.0, est, &budget)?;
            let mut csv = Csv::new(&["target", "value", "error", "sets"]);
            let mut lines = Vec::new();
            for p in &trace.points {
                csv.row(&[format!("\"{}\"", p.target), p.value.to_string(), p.error.to_string(), p.sets.to_string()]);
                lines.push(format!("K({g}, {})={} ± {}", p.target, num(p.value), num(p.error)));
            }
            Ok(Outcome::new(lines.join("\n"), csv.finish()))
        }
        FreeCmd::Contract { convention, trials, dim } => {
            let convs: Vec<HilbertConvention> = match convention {
                Convention::Birkhoff => vec![HilbertConvention::Birkhoff],
                Convention::Half => vec![HilbertConvention::HalfCrossRatio],
                Convention::Both => vec![HilbertConvention::Birkhoff, HilbertConvention::HalfCrossRatio],
            };
            let reports = convs
                .iter()
                .map(|c| contraction_experiment(*c, *trials, *dim, ctx.opts.seed))
                .collect::<martin_core::Result<Vec<_>>>()?;
            let lines: Vec<String> = reports
                .iter()
                .map(|r| {
                    let name = serde_json::to_value(r.convention).expect("convention serializes");
                    format!(
                        "convention={} violations={} min_slack={}",
                        name.as_str().unwrap_or_default(),
                        r.violations,
                        num(r.min_slack)
                    )
                })
                .collect();
            Ok(Outcome::new(lines.join("\n"), Artifact::json(&reports)))
        }
        FreeCmd::Induce { walk, factor, prefix, k1 } => {
            let spec = ctx.walk(walk)?;
            let k1 = k1.unwrap_or_else(|| spec.r_mu());
            let budget = hitting_budget(ctx, HittingMethod::TruncatedSolve);
            let ik = induced_kernel(&spec, *factor, prefix, k1, &budget)?;
            let v = &ik.validation;
            let levels: Vec<String> = ik.levels.iter().map(|l| l.to_string()).collect();
            let summary = format!(
                "levels={}\nclass={} min_row_mass={} max_row_mass={}\nstrictly_sub_markov={} support_within_r_mu={} hyp1={} hyp2={}\nmax_gap={}",
                levels.join(";"),
                v.class,
                num(v.min_row_mass),
                num(v.max_row_mass),
                v.strictly_sub_markov,
                v.support_within_r_mu,
                v.hyp1,
                v.hyp2,
                num(ik.max_gap)
            );
            Ok(Outcome::new(summary, Artifact::Json(ik.kernel.to_json() + "\n")))
        }
        FreeCmd::Rmu { walk, max_radius } => {
            let spec = ctx.walk(walk)?;
            let max_radius = max_radius.unwrap_or_else(|| default_max_radius(&spec));
            let r = estimate_r_mu(&spec, max_radius)?;
            let summary = format!("R={} r={} reached={} unreached={}", r.radius, r.r_mu, r.reached, r.unreached.len());
            Ok(Outcome::new(summary, Artifact::json(&r)))
        }
    }
}
