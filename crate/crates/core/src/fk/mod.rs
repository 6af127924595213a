//! Feynman–Kac Monte Carlo for the Dirichlet and Cauchy problems, at scale
//! ε and in the homogenized limit.

mod domain;
mod elliptic;
mod exit;
mod parabolic;

pub use domain::Domain;
pub use elliptic::{elliptic_eps, elliptic_hom, EllipticProblem, FkEstimate};
pub use exit::{exit_time_mc, Dynamics, ExitSamples, LimitModel, MAX_CAPPED_FRACTION};
pub use parabolic::{
    check_e_centered, cosine_corrector_1d, parabolic_eps, parabolic_hom, ParabolicEstimate, ParabolicProblem,
    RAW_CHECK_MIN_EPS,
};
