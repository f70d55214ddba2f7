//! Discrete-time systems, the integrator-extended closed loop, compact-set
//! sampling and sampled model distances.

mod distance;
mod map;
mod plant;
mod sampler;

pub use distance::{jacobian_distance, model_distance, sampled_max, sup_over, SupEstimate};
pub use map::{SystemMap, Trajectory, VectorMap, BLOW_UP};
pub use plant::{build_extended, ExtendedSystem, PlantModel};
pub use sampler::{scale_to_level, unit_direction, CompactSetSampler, SamplingPlan, SetShape};
