//! Range of the effective diffusivity from the topology of the support.

mod consistency;
mod hnf;
mod period;
mod support;

pub use consistency::{consistency_check, principal_angle_deg, ConsistencyReport};
pub use hnf::{hermite_normal_form, in_lattice};
pub use period::{image_span, loop_displacement, period_lattice, PeriodLattice};
pub use support::{extract_support, SupportMask, DEFAULT_THETA, MIN_SUPPORT_SAMPLES};
