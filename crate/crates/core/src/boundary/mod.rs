//! Martin kernels, harmonic functions, separation of boundary points and the
//! transience classifier.

mod martin;
mod separation;
mod transience;

pub use martin::{
    martin_kernel_boundary, martin_kernel_boundary_at, martin_kernel_numeric,
    minimal_harmonic_check, HarmonicCheck, MartinMethod, MartinTarget, MartinValue,
};
pub use separation::{separation_witness, SeparationWitness, GROWTH_FACTOR, OVERFLOW_GUARD};
pub use transience::{
    classify_transience, classify_transience_with, GrowthEvidence, GrowthLaw, TransienceReport,
    Verdict, VerdictBasis, MIN_R_SQUARED,
};
