//! Invariant measures, correctors and effective coefficients.

mod corrector;
mod effective;
mod functional;
mod mixing;
mod occupation;
mod oracle1d;

pub use corrector::{corrector, corrector_residual, CorrectorField, CorrectorKind};
pub use effective::{
    effective_a_displacement, effective_ac, effective_d, ergodic_average, EffectiveCoefficients, Provenance,
};
pub use functional::averaged_functional;
pub use mixing::{mixing_estimate, MixingReport};
pub use occupation::{
    centering_residual, estimate_invariant, estimate_invariant_batched, CenteringReport, OccupationEnsemble,
    OccupationGrid,
};
pub use oracle1d::{poisson_oracle_1d, poisson_solve_1d, Oracle1d};
