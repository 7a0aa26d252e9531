//! Perron–Frobenius data of the tilted level matrix `F(u)` and the geometry
//! of the convex function `u ↦ λ(u)`.

mod decompose;
mod level;
mod perron;
mod profile;

pub use decompose::{spectral_decompose, DecompositionReport, RATE_SLACK};
pub use level::{
    min_lambda, solve_direction, solve_direction_from, BoundaryDirection, MinLambda,
    DIRECTION_RESIDUAL_MAX, HYP2_MARGIN, LEVEL_RESIDUAL_MAX,
};
pub use perron::{is_primitive, perron, PerronData, GAP_TOL};
pub use profile::{
    assemble_f, assemble_grad_f, drift, hessian_fd, lambda_and_grad, lambda_at, perron_at,
    spectral_profile, SpectralProfile, CENTERED_TOL, LEVEL_TOL,
};
