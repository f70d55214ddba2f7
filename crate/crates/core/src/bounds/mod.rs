//! Explicit perturbation budgets: the existence budget from the `p`/`q`
//! construction and the budgets `δ1..δ4` guaranteeing a perturbed
//! equilibrium, its local exponential stability and its basin.

mod budgets;
mod prop1;

pub use budgets::{
    assemble_bounds, delta1, delta2, delta4, CertificateCheck, Delta4Report, GlobalLyapunovCertificate,
    TotalStabilityBounds,
};
pub use prop1::{direction_grid, prop1_delta, prop1_pq, Prop1Budget, Prop1Problem};
