use nalgebra::DVector;
use serde::Serialize;

use super::integrator::GeneralizedIntegrator;
use crate::dynamics::{sup_over, CompactSetSampler, PlantModel, SupEstimate, VectorMap};
use crate::linalg::spectral_norm;
use crate::{Error, Result};

/// Sampled suprema of the six plant mismatch quantities. The first three
/// are taken over `C̄`, the Jacobian terms over `C̲`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaReport {
    /// `|φ̂ - φ + ĝ(ξ,α) - g(ξ,α)|`
    pub delta_xi: SupEstimate,
    /// `|ĥ(ξ,α) - h(ξ)|`
    pub delta_y: SupEstimate,
    /// `|k(ξ, ĥ(ξ,α)) - k(ξ, h(ξ))|`
    pub delta_z: SupEstimate,
    /// `|∂φ̂/∂ξ - ∂φ/∂ξ + ∂ĝ/∂ξ - ∂g/∂ξ|`
    pub delta_dxi: SupEstimate,
    /// `|∂ĝ/∂u - ∂g/∂u|`
    pub delta_du: SupEstimate,
    /// `|∂ĥ/∂ξ - ∂h/∂ξ| + |∂ĥ/∂u|`
    pub delta_dy: SupEstimate,
    /// `sup L1(ξ)` over `C̄`
    pub l: f64,
    /// `Δ_z <= L Δ_y`
    pub z_bound_holds: bool,
}

impl DeltaReport {
    /// `sup Δ_ξ + sup Δ_y`, an upper estimate of `sup (Δ_ξ + Δ_y)`.
    pub fn value_mismatch(&self) -> f64 {
        self.delta_xi.value + self.delta_y.value
    }

    /// `sup Δ_∂ξ + sup Δ_∂u + sup Δ_∂y`.
    pub fn jacobian_mismatch(&self) -> f64 {
        self.delta_dxi.value + self.delta_du.value + self.delta_dy.value
    }
}

struct Split {
    xi: DVector<f64>,
    u: DVector<f64>,
}

fn split(q: usize, alpha: &VectorMap, x: &DVector<f64>) -> Result<Split> {
    Ok(Split {
        xi: x.rows(0, q).into_owned(),
        u: alpha.eval(x)?,
    })
}

pub fn delta_quantities(
    plant: &PlantModel,
    plant_hat: &PlantModel,
    alpha: &VectorMap,
    k: &GeneralizedIntegrator,
    c_bar: &CompactSetSampler,
    c_lower: &CompactSetSampler,
) -> Result<DeltaReport> {
    let (q, m, p) = (plant.q, plant.m, plant.p);
    if (plant_hat.q, plant_hat.m, plant_hat.p) != (q, m, p) {
        return Err(Error::Dimension(
            "nominal and perturbed plants differ in dimensions".into(),
        ));
    }
    if alpha.n_in() != q + p || alpha.n_out() != m || k.q != q || k.p != p {
        return Err(Error::Dimension(
            "controller or integrator does not match the plant".into(),
        ));
    }
    if c_bar.dim() != q + p || c_lower.dim() != q + p {
        return Err(Error::Dimension(format!("sets must live in R^{}", q + p)));
    }

    let delta_xi = sup_over(c_bar, |x| {
        let s = split(q, alpha, x)?;
        Ok((plant_hat.next_state(&s.xi, &s.u)? - plant.next_state(&s.xi, &s.u)?).norm())
    })?;
    let delta_y = sup_over(c_bar, |x| {
        let s = split(q, alpha, x)?;
        Ok((plant_hat.output(&s.xi, &s.u)? - plant.output(&s.xi, &s.u)?).norm())
    })?;
    let delta_z = sup_over(c_bar, |x| {
        let s = split(q, alpha, x)?;
        let y_hat = plant_hat.output(&s.xi, &s.u)?;
        let y = plant.output(&s.xi, &s.u)?;
        Ok((k.eval(&s.xi, &y_hat)? - k.eval(&s.xi, &y)?).norm())
    })?;

    let delta_dxi = sup_over(c_lower, |x| {
        let s = split(q, alpha, x)?;
        let xu = PlantModel::stack(&s.xi, &s.u);
        let (g_hat, _) = plant_hat.split(&plant_hat.g.jacobian(&xu)?);
        let (g, _) = plant.split(&plant.g.jacobian(&xu)?);
        let d = plant_hat.phi.jacobian(&s.xi)? - plant.phi.jacobian(&s.xi)? + g_hat - g;
        Ok(spectral_norm(&d))
    })?;
    let delta_du = sup_over(c_lower, |x| {
        let s = split(q, alpha, x)?;
        let xu = PlantModel::stack(&s.xi, &s.u);
        let (_, g_hat) = plant_hat.split(&plant_hat.g.jacobian(&xu)?);
        let (_, g) = plant.split(&plant.g.jacobian(&xu)?);
        Ok(spectral_norm(&(g_hat - g)))
    })?;
    let delta_dy = sup_over(c_lower, |x| {
        let s = split(q, alpha, x)?;
        let xu = PlantModel::stack(&s.xi, &s.u);
        let (h_hat_xi, h_hat_u) = plant_hat.split(&plant_hat.h.jacobian(&xu)?);
        let (h_xi, _) = plant.split(&plant.h.jacobian(&xu)?);
        Ok(spectral_norm(&(h_hat_xi - h_xi)) + spectral_norm(&h_hat_u))
    })?;

    let l = sup_l1(k, c_bar);
    let z_bound_holds = delta_z.value <= l * delta_y.value + 1e-12;
    Ok(DeltaReport {
        delta_xi,
        delta_y,
        delta_z,
        delta_dxi,
        delta_du,
        delta_dy,
        l,
        z_bound_holds,
    })
}

fn sup_l1(k: &GeneralizedIntegrator, set: &CompactSetSampler) -> f64 {
    set.all()
        .iter()
        .map(|x| k.l1(&x.rows(0, k.q).into_owned()))
        .fold(0.0, f64::max)
}

/// `L = sup L1` over `C̄` and `Lk = sup max(L1, L2)` over `C̲`, raised to at
/// least `L`.
pub fn integrator_constants(
    k: &GeneralizedIntegrator,
    c_bar: &CompactSetSampler,
    c_lower: &CompactSetSampler,
) -> (f64, f64) {
    let l = sup_l1(k, c_bar);
    let lk = c_lower
        .all()
        .iter()
        .map(|x| {
            let xi = x.rows(0, k.q).into_owned();
            k.l1(&xi).max(k.l2(&xi))
        })
        .fold(l, f64::max);
    (l, lk)
}

/// `Lα = sup max(|∂α/∂ξ|, |∂α/∂z|)` over the samples of `C̲`.
pub fn lipschitz_alpha(alpha: &VectorMap, q: usize, c_lower: &CompactSetSampler) -> Result<f64> {
    let p = alpha.n_in() - q;
    Ok(sup_over(c_lower, |x| {
        let j = alpha.jacobian(x)?;
        Ok(spectral_norm(&j.columns(0, q).into_owned()).max(spectral_norm(&j.columns(q, p).into_owned())))
    })?
    .value)
}

/// Existence-only budget `δ / (1 + L)`.
pub fn prop2_budget(delta: f64, l: f64) -> f64 {
    delta / (1.0 + l)
}

/// Constants behind the regulation budget. Both norm-equivalence constants
/// are 1 for the Euclidean and spectral norms used throughout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchBudget {
    pub ell: f64,
    pub ell_bar: f64,
    pub l: f64,
    pub l_alpha: f64,
    pub l_k: f64,
    /// `max(ℓ(1+L), ℓ̄(1 + 2(Lα + Lk + Lα Lk)))`
    pub mu: f64,
    pub delta3: f64,
    pub delta4: Option<f64>,
    pub safety: f64,
    /// `min(δ3, δ4) / μ · safety`
    pub delta_bar: f64,
}

impl MismatchBudget {
    /// Whether the measured mismatches fit the budget.
    pub fn admits(&self, report: &DeltaReport) -> bool {
        report.value_mismatch() <= self.delta_bar && report.jacobian_mismatch() <= self.delta_bar
    }
}

pub fn mu(l: f64, l_alpha: f64, l_k: f64) -> f64 {
    (1.0 + l).max(1.0 + 2.0 * (l_alpha + l_k + l_alpha * l_k))
}

pub fn prop3_budget(
    delta3: f64,
    delta4: Option<f64>,
    l_alpha: f64,
    l_k: f64,
    l: f64,
    safety: f64,
) -> Result<MismatchBudget> {
    if !(delta3 > 0.0) {
        return Err(Error::Precondition(format!("δ3 = {delta3} must be positive")));
    }
    if [l_alpha, l_k, l].iter().any(|c| !(*c >= 0.0)) || delta4.is_some_and(|d| !(d >= 0.0)) {
        return Err(Error::Precondition(
            "Lipschitz constants and δ4 must be nonnegative".into(),
        ));
    }
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::Precondition(format!(
            "safety factor {safety} must lie in (0, 1]"
        )));
    }
    let mu = mu(l, l_alpha, l_k);
    let base = delta4.map_or(delta3, |d| delta3.min(d));
    Ok(MismatchBudget {
        ell: 1.0,
        ell_bar: 1.0,
        l,
        l_alpha,
        l_k,
        mu,
        delta3,
        delta4,
        safety,
        delta_bar: base / mu * safety,
    })
}
