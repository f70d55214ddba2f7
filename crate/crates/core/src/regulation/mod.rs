//! Integral action for constant-output regulation: generalized integrators,
//! plant mismatch measures and their budgets, forwarding synthesis of the
//! stabilizer and closed-loop simulation.

mod budget;
mod forwarding;
mod integrator;
mod simulate;

pub use budget::{
    delta_quantities, integrator_constants, lipschitz_alpha, mu, prop2_budget, prop3_budget, DeltaReport,
    MismatchBudget,
};
pub use forwarding::{
    adaptive_simpson, integrator_drive, monomial_exponents, solve_m_linear, solve_m_numeric, ForwardingController,
    ForwardingSettings, MappingM, PolynomialM,
};
pub use integrator::{
    check_integrator, GeneralizedIntegrator, IntegratorCheck, IntegratorCondition, IntegratorViolation,
};
pub use simulate::{locate_equilibrium, simulate_regulation, RegulationEquilibrium, RegulationVerdict};
