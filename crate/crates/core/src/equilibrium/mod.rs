//! Locating the perturbed equilibrium and checking, on samples, that it is
//! invariant, locally contracting, unique on the annulus and attracting.

mod solver;
mod verify;

use serde::Serialize;

pub use solver::{find_fixed_point, FixedPoint, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use verify::{
    basin_check, uniqueness_annulus, verify_invariance, verify_local_contraction, BasinReport, ContractionReport,
    InvarianceReport, UniquenessReport, CONTRACTION_SLACK,
};

/// Everything known about a located equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub x_e: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub spectral_radius: f64,
    /// `x_eᵀΠx_e <= ε/2`
    pub in_half_ellipsoid: bool,
    /// `V(x_e) <= c̲` when a sublevel pair is configured
    pub in_lower_sublevel: Option<bool>,
    pub invariance: InvarianceReport,
    pub contraction: ContractionReport,
    pub uniqueness: Option<UniquenessReport>,
    pub basin: Option<BasinReport>,
}

impl EquilibriumReport {
    pub fn pass(&self) -> bool {
        self.in_half_ellipsoid
            && self.in_lower_sublevel.unwrap_or(true)
            && self.invariance.pass
            && self.contraction.pass
            && self.uniqueness.as_ref().is_none_or(|u| u.pass)
            && self.basin.as_ref().is_none_or(|b| b.fraction == 1.0)
    }
}
