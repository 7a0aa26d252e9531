//! Random walks on free products `Z^{d₁} ⋆ Z^{d₂}`: word algebra, sampling,
//! transitional sets, hitting matrices and their Hilbert-metric contraction,
//! Martin-ratio traces and induced first-return kernels.

mod hilbert;
mod hitting;
mod induced;
mod lyapunov;
mod martin;
mod transitional;
mod walk;
mod word;

pub use hilbert::{
    apply, chained_product, check_column_divided, contraction_coefficient, contraction_experiment, cross_ratio,
    diameter, diameter_with, hilbert_distance, hilbert_distance_with, ChainReport, ContractionReport,
    HilbertConvention,
};
pub use hitting::{hitting_matrix, HittingBudget, HittingMatrix, HittingMethod};
pub use lyapunov::{lyapunov_certificate, LetterWeights, Lyapunov};
pub use induced::{induced_kernel, InducedKernel, InducedValidation, SUB_MARKOV_MARGIN};
pub use martin::{martin_ratio_trace, MartinEstimator, MartinTrace, TracePoint, MIN_HITS};
pub use transitional::{set_distance, transitional_chain, TransitionalSet};
pub use walk::{
    ball, estimate_r_mu, sample_path, FreeWalkSpec, RmuReport, Trajectory, DEFAULT_BALL_BUDGET, DEFAULT_LAZINESS,
};
pub use word::{FreeWord, Letter};
