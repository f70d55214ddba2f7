//! Quadratic certificates for the linearization, generic Lyapunov
//! functions, and the radial counterexample whose sublevel sets are never
//! path-connected.
//!
//! The tool cannot certify that a sublevel set is homeomorphic to a ball.
//! It can falsify this for radial functions (component counting) and give
//! heuristic support for star-shapedness (one crossing per ray).

mod counterexample;
mod function;
mod quadratic;
mod radial;
mod sublevel;

pub use counterexample::{
    counterexample_V, counterexample_decrease, grid_jump, joint_jump, shell_index, DecreaseCheck, RadialPiecewiseV,
};
pub use function::LyapunovFunction;
pub use quadratic::{
    default_decay, find_epsilon, lmi_margin, lmi_margin_of, solve_stein, ContractionCertificate, QuadraticForm,
};
pub use radial::{
    check_radial, radial_components, sublevel_boundary_sampler, BoundarySamples, DirectionFailure, LevelSource,
    RadialComponents,
};
pub use sublevel::SublevelSet;
