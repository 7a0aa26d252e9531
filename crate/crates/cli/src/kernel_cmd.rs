//! `martin-lab kernel ...`

use std::path::PathBuf;

use clap::{Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use martin_core::boundary::{
    classify_transience_with, martin_kernel_boundary, martin_kernel_numeric, minimal_harmonic_check,
    separation_witness,
};
use martin_core::kernel::{
    convolution_power_with, green_partial, reachability_check, ConvolutionEngine, GreenEngine, GreenOptions,
    LatticeKernel, TailRegime, DEFAULT_CELL_BUDGET,
};
use martin_core::limit::{clt_curve, clt_monte_carlo, llt_error_with};
use martin_core::spectral::{drift, solve_direction, spectral_profile};

use nalgebra::DMatrix;

use crate::output::{ints, num, nums, Artifact, Csv, CliResult, Ctx, Outcome};
use crate::{parse_counts, parse_point, parse_vec, Counts, Point, Vector};

#[derive(Subcommand, Debug)]
pub enum KernelCmd {
    /// Parse, classify and check irreducibility on a box.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = 3)]
        radius: u64,
    },
    /// The n-step transition array p^(n).
    Power {
        file: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Truncated Green sum with tail bound.
    Green {
        file: PathBuf,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        src: Point,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        dst: Point,
        #[arg(long)]
        nmax: usize,
        #[arg(long, value_enum, default_value_t = Engine::Auto)]
        engine: Engine,
    },
    /// Perron data, gradient and Q at a tilt u.
    Spectral {
        file: PathBuf,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        u: Vector,
    },
    /// Drift vector and whether the kernel is centered.
    Drift { file: PathBuf },
    /// The point u(θ) of the level set λ = 1 with normal θ.
    Boundary {
        file: PathBuf,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        theta: Vector,
    },
    /// Local limit error sup_x |A_n(x)| for one or more n.
    Llt {
        file: PathBuf,
        #[arg(long = "u-from-theta", value_parser = parse_vec, allow_hyphen_values = true)]
        u_from_theta: Option<Vector>,
        /// Comma-separated list.
        #[arg(long, value_parser = parse_counts)]
        n: Counts,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
    },
    /// Characteristic-matrix power against its Gaussian limit.
    Clt {
        file: PathBuf,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        xi: Vector,
        #[arg(long, value_parser = parse_counts)]
        n: Counts,
    },
    /// Monte Carlo covariance and level frequencies of (X_n − n p⃗)/√n.
    CltMc {
        file: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        samples: usize,
    },
    /// Martin kernel K(src, dst) = G(src, dst)/G(base, dst).
    Martin {
        file: PathBuf,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        src: Point,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        dst: Point,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        base: Option<Point>,
        #[arg(long)]
        nmax: Option<usize>,
    },
    /// Martin kernel at the boundary point of direction θ.
    MartinBoundary {
        file: PathBuf,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        theta: Vector,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        src: Option<Point>,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        base: Option<Point>,
    },
    /// Relative defect |Ph − h|/h of the boundary harmonic function.
    HarmonicCheck {
        file: PathBuf,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        theta: Vector,
        #[arg(long, default_value_t = 10)]
        radius: u64,
    },
    /// Recurrent or transient, with growth-law evidence.
    Classify {
        file: PathBuf,
        #[arg(long)]
        nmax: Option<usize>,
    },
    /// Sequence separating the boundary points of two directions.
    Separate {
        file: PathBuf,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        theta1: Vector,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        theta2: Vector,
        #[arg(long, default_value_t = 40)]
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Engine {
    Auto,
    Direct,
    Spectral,
}

impl KernelCmd {
    pub fn name(&self) -> &'static str {
        match self {
            KernelCmd::Validate { .. } => "validate",
            KernelCmd::Power { .. } => "power",
            KernelCmd::Green { .. } => "green",
            KernelCmd::Spectral { .. } => "spectral",
            KernelCmd::Drift { .. } => "drift",
            KernelCmd::Boundary { .. } => "boundary",
            KernelCmd::Llt { .. } => "llt",
            KernelCmd::Clt { .. } => "clt",
            KernelCmd::CltMc { .. } => "clt-mc",
            KernelCmd::Martin { .. } => "martin",
            KernelCmd::MartinBoundary { .. } => "martin-boundary",
            KernelCmd::HarmonicCheck { .. } => "harmonic-check",
            KernelCmd::Classify { .. } => "classify",
            KernelCmd::Separate { .. } => "separate",
        }
    }
}

fn cell_budget(ctx: &Ctx) -> u128 {
    ctx.opts.budget.map(u128::from).unwrap_or(DEFAULT_CELL_BUDGET)
}

fn green_options(ctx: &Ctx, engine: Engine) -> GreenOptions {
    GreenOptions {
        engine: match engine {
            Engine::Auto => GreenEngine::Auto,
            Engine::Direct => GreenEngine::Direct,
            Engine::Spectral => GreenEngine::Spectral,
        },
        budget: cell_budget(ctx),
    }
}

fn origin(kernel: &LatticeKernel) -> Point {
    Point { x: vec![0; kernel.dim()], level: 0 }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn regime(r: &TailRegime) -> String {
    match r {
        TailRegime::Undetermined => "undetermined".into(),
        TailRegime::Vanishing => "vanishing".into(),
        TailRegime::Geometric => "geometric".into(),
        TailRegime::Polynomial { exponent } => format!("polynomial({})", num(*exponent)),
        TailRegime::Growing => "growing".into(),
    }
}

pub fn run(cmd: &KernelCmd, ctx: &mut Ctx) -> CliResult<Outcome> {
    match cmd {
        KernelCmd::Validate { file, radius } => {
            let k = ctx.kernel(file)?;
            let steps = 8 * (*radius + k.support_radius().max(1)) + 8;
            let reach = reachability_check(&k, *radius, steps);
            #[derive(Serialize)]
            struct Report<'a> {
                d: usize,
                #[serde(rename = "N")]
                n: usize,
                class: String,
                support_radius: u64,
                row_masses: &'a [f64],
                irreducibility: &'a martin_core::kernel::IrreducibilityReport,
            }
            let summary = format!(
                "d={} N={} class={} support_radius={} row_masses={} irreducibility={}",
                k.dim(),
                k.levels(),
                k.class(),
                k.support_radius(),
                nums(k.row_masses()),
                serde_json::to_value(reach.verdict).expect("verdict serializes").as_str().unwrap_or_default()
            );
            let report = Report {
                d: k.dim(),
                n: k.levels(),
                class: k.class().to_string(),
                support_radius: k.support_radius(),
                row_masses: k.row_masses(),
                irreducibility: &reach,
            };
            Ok(Outcome::new(summary, Artifact::json(&report)))
        }
        KernelCmd::Power { file, n } => {
            let k = ctx.kernel(file)?;
            let field = convolution_power_with(&k, *n, ConvolutionEngine::Auto, cell_budget(ctx))?;
            let d = k.dim();
            let mut header: Vec<String> = vec!["from".into(), "to".into()];
            header.extend((1..=d).map(|i| format!("x{i}")));
            header.push("p".into());
            let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
            for a in 0..k.levels() {
                for b in 0..k.levels() {
                    let vals = field.values(a, b);
                    for (x, v) in field.geom().iter_coords().zip(vals) {
                        if *v != 0.0 {
                            let mut row = vec![(a + 1).to_string(), (b + 1).to_string()];
                            row.extend(x.iter().map(|c| c.to_string()));
                            row.push(v.to_string());
                            csv.row(&row);
                        }
                    }
                }
            }
            let masses: Vec<f64> = (0..k.levels()).map(|a| field.row_mass(a)).collect();
            Ok(Outcome::new(format!("n={n} row_masses={}", nums(&masses)), csv.finish()))
        }
        KernelCmd::Green { file, src, dst, nmax, engine } => {
            let k = ctx.kernel(file)?;
            let g = green_partial(&k, src.as_ref(), dst.as_ref(), *nmax, &green_options(ctx, *engine))?;
            let summary = format!(
                "partial={} tail_bound={} extrapolated={} divergent={} ratio={} regime={}",
                num(g.partial),
                num(g.tail_bound),
                num(g.extrapolated()),
                g.divergence_flag,
                num(g.ratio),
                regime(&g.regime)
            );
            let mut csv = Csv::new(&["n", "term"]);
            for (n, t) in &g.terms {
                csv.row(&[n.to_string(), t.to_string()]);
            }
            Ok(Outcome::new(summary, csv.finish()))
        }
        KernelCmd::Spectral { file, u } => {
            let k = ctx.kernel(file)?;
            let p = spectral_profile(&k, &u.0)?;
            let mut lines = vec![
                format!("lambda={}", num(p.lambda())),
                format!("nu={}", nums(&p.perron.nu)),
                format!("c={}", nums(&p.perron.c)),
                format!("grad={}", nums(&p.grad)),
                format!("gap={}", num(p.perron.gap)),
                format!("level_residual={}", num((p.lambda() - 1.0).abs())),
            ];
            #[derive(Serialize)]
            struct Report {
                u: Vec<f64>,
                lambda: f64,
                nu: Vec<f64>,
                c: Vec<f64>,
                grad: Vec<f64>,
                hess: Vec<Vec<f64>>,
                q: Option<Vec<Vec<f64>>>,
                det_q: Option<f64>,
                gap: f64,
            }
            if let (Some(q), Some(det)) = (&p.q, p.det_q) {
                lines.push(format!("q={}", nums(&rows(q).concat())));
                lines.push(format!("det_q={}", num(det)));
            }
            let report = Report {
                u: p.u.clone(),
                lambda: p.lambda(),
                nu: p.perron.nu.clone(),
                c: p.perron.c.clone(),
                grad: p.grad.clone(),
                hess: rows(&p.hess),
                q: p.q.as_ref().map(rows),
                det_q: p.det_q,
                gap: p.perron.gap,
            };
            Ok(Outcome::new(lines.join("\n"), Artifact::json(&report)))
        }
        KernelCmd::Drift { file } => {
            let k = ctx.kernel(file)?;
            let (v, centered) = drift(&k)?;
            #[derive(Serialize)]
            struct Report {
                drift: Vec<f64>,
                centered: bool,
            }
            let summary = format!("drift={} centered={centered}", nums(&v));
            Ok(Outcome::new(summary, Artifact::json(&Report { drift: v, centered })))
        }
        KernelCmd::Boundary { file, theta } => {
            let k = ctx.kernel(file)?;
            let b = solve_direction(&k, &theta.0)?;
            let summary = format!(
                "u={}\ngrad={}\nresidual_level={}\nresidual_dir={}",
                nums(&b.u),
                nums(&b.grad),
                num(b.residual_level),
                num(b.residual_dir)
            );
            Ok(Outcome::new(summary, Artifact::json(&b)))
        }
        KernelCmd::Llt { file, u_from_theta, n, gamma } => {
            let k = ctx.kernel(file)?;
            let u = match u_from_theta {
                Some(theta) => solve_direction(&k, &theta.0)?.u,
                None => vec![0.0; k.dim()],
            };
            let budget = cell_budget(ctx);
            let reports = n
                .0
                .par_iter()
                .map(|&m| llt_error_with(&k, &u, m, *gamma, budget))
                .collect::<martin_core::Result<Vec<_>>>()?;
            let mut csv = Csv::new(&["n", "sup_error", "inside", "outside_bound"]);
            let mut lines = vec![format!("u={}", nums(&u))];
            for r in &reports {
                csv.row(&[r.n.to_string(), r.sup_error.to_string(), r.inside.to_string(), r.outside_bound.to_string()]);
                lines.push(format!("n={} sup_error={} argmax={}", r.n, num(r.sup_error), ints(&r.argmax)));
            }
            Ok(Outcome::new(lines.join("\n"), csv.finish()))
        }
        KernelCmd::Clt { file, xi, n } => {
            let k = ctx.kernel(file)?;
            let u = vec![0.0; k.dim()];
            let points = n
                .0
                .par_iter()
                .map(|&m| clt_curve(&k, &u, &xi.0, m as u64))
                .collect::<martin_core::Result<Vec<_>>>()?;
            let mut csv = Csv::new(&["n", "error"]);
            let mut lines = Vec::new();
            for p in &points {
                csv.row(&[p.n.to_string(), p.error.to_string()]);
                lines.push(format!("n={} error={}", p.n, num(p.error)));
            }
            Ok(Outcome::new(lines.join("\n"), csv.finish()))
        }
        KernelCmd::CltMc { file, n, samples } => {
            let k = ctx.kernel(file)?;
            let r = clt_monte_carlo(&k, *n, *samples, ctx.opts.seed)?;
            let summary = format!(
                "drift={}\nmean={}\ncov={}\nlevel_freq={}",
                nums(&r.drift),
                nums(&r.mean),
                nums(&r.cov),
                nums(&r.level_freq)
            );
            Ok(Outcome::new(summary, Artifact::json(&r)))
        }
        KernelCmd::Martin { file, src, dst, base, nmax } => {
            let k = ctx.kernel(file)?;
            let base = base.clone().unwrap_or_else(|| origin(&k));
            let opts = green_options(ctx, Engine::Auto);
            let v = martin_kernel_numeric(&k, src.as_ref(), dst.as_ref(), base.as_ref(), *nmax, &opts)?;
            let summary =
                format!("value={} error_bound={} interval={},{}", num(v.value), num(v.error_bound), num(v.interval.0), num(v.interval.1));
            Ok(Outcome::new(summary, Artifact::json(&v)))
        }
        KernelCmd::MartinBoundary { file, theta, src, base } => {
            let k = ctx.kernel(file)?;
            let src = src.clone().unwrap_or_else(|| origin(&k));
            let base = base.clone().unwrap_or_else(|| origin(&k));
            let v = martin_kernel_boundary(&k, src.as_ref(), &theta.0, base.as_ref())?;
            Ok(Outcome::new(format!("value={}", num(v.value)), Artifact::json(&v)))
        }
        KernelCmd::HarmonicCheck { file, theta, radius } => {
            let k = ctx.kernel(file)?;
            let h = minimal_harmonic_check(&k, &theta.0, *radius)?;
            let summary = format!("u={} max_residual={}", nums(&h.u), num(h.max_residual));
            Ok(Outcome::new(summary, Artifact::json(&h)))
        }
        KernelCmd::Classify { file, nmax } => {
            let k = ctx.kernel(file)?;
            let r = classify_transience_with(&k, *nmax)?;
            Ok(Outcome::new(r.verdict.to_string(), Artifact::json(&r)))
        }
        KernelCmd::Separate { file, theta1, theta2, n } => {
            let k = ctx.kernel(file)?;
            let w = separation_witness(&k, &theta1.0, &theta2.0, *n)?;
            let mut header: Vec<String> = vec!["m".into()];
            header.extend((1..=k.dim()).map(|i| format!("x{i}")));
            header.extend(["k1".into(), "k2".into()]);
            let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
            for (m, ((x, a), b)) in w.points.iter().zip(&w.seq1).zip(&w.seq2).enumerate() {
                let mut row = vec![(m + 1).to_string()];
                row.extend(x.iter().map(|c| c.to_string()));
                row.extend([a.to_string(), b.to_string()]);
                csv.row(&row);
            }
            let summary = format!(
                "theta={} first_diverges={} second_vanishes={} ratio_diverges={} overflow={}",
                nums(&w.theta),
                w.first_diverges,
                w.second_vanishes,
                w.ratio_diverges,
                w.overflow
            );
            Ok(Outcome::new(summary, csv.finish()))
        }
    }
}
