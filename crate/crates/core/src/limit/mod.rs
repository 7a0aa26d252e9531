//! Characteristic matrices, central and local limit theorems, and the
//! Green-function asymptote along a direction.

mod charm;
mod llt;
mod montecarlo;

pub use charm::{
    char_matrix, char_matrix_with_grad, clt_curve, dominant_eigenvalue, lambda_xi, psi,
    q_from_char, CharMatrix, CltPoint, MAX_POWER,
};
pub use llt::{green_vs_asymptote, llt_error, llt_error_with, GreenAsymptote, LltReport};
pub use montecarlo::{clt_monte_carlo, CltMcReport};

pub(crate) use montecarlo::{sample_rng, AliasTable};
