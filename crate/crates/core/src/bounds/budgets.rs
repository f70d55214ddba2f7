use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::{CompactSetSampler, SamplingPlan, SystemMap};
use crate::lyapunov::{ContractionCertificate, LyapunovFunction, QuadraticForm, SublevelSet};
use crate::{Error, Result};

/// Existence budget: `√(ε(1-a)² / (8 λ_max(Π) (3+a)))`.
pub fn delta1(epsilon: f64, a: f64, lambda_max: f64) -> f64 {
    (epsilon * (1.0 - a).powi(2) / (8.0 * lambda_max * (3.0 + a))).sqrt()
}

/// Local-stability budget on the Jacobian mismatch: `(1-a) / (2√(10+6a))`.
pub fn delta2(a: f64) -> f64 {
    (1.0 - a) / (2.0 * (10.0 + 6.0 * a).sqrt())
}

/// A user-supplied global Lyapunov function `𝑽` with decrease factor `ρ`
/// on `{𝑽 <= L̄}`.
#[derive(Clone)]
pub struct GlobalLyapunovCertificate {
    pub v: LyapunovFunction,
    pub level: f64,
    /// optional lower comparison function `α1(|x|) <= 𝑽(x)`
    pub alpha1: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for GlobalLyapunovCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GlobalLyapunovCertificate")
            .field("v", &self.v)
            .field("level", &self.level)
            .field("alpha1", &self.alpha1.is_some())
            .finish()
    }
}

/// Sampled validation of a global certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateCheck {
    /// `max 𝑽(f(x)) - ρ𝑽(x)` over the samples
    pub worst_decrease: f64,
    pub samples: usize,
    pub seed: u64,
}

impl GlobalLyapunovCertificate {
    pub fn new(v: LyapunovFunction, level: f64) -> Result<Self> {
        let rho = v.rho();
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Precondition(format!("ρ = {rho} must lie in (0, 1)")));
        }
        if !(level > 0.0) {
            return Err(Error::Precondition(format!("level {level} must be positive")));
        }
        Ok(GlobalLyapunovCertificate { v, level, alpha1: None })
    }

    pub fn with_alpha1<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, alpha1: F) -> Self {
        self.alpha1 = Some(Arc::new(alpha1));
        self
    }

    pub fn rho(&self) -> f64 {
        self.v.rho()
    }

    /// A level `c` with `{𝑽 <= c}` inside the ball of radius `d`, from `α1`.
    pub fn level_within_distance(&self, d: f64) -> Option<f64> {
        self.alpha1.as_ref().map(|a| a(d))
    }

    pub fn sublevel(&self) -> SublevelSet {
        SublevelSet::new(self.v.clone(), self.level)
    }

    /// Checks `𝑽(0) = 0`, `𝑽 > 0` away from the origin and
    /// `𝑽(f(x)) <= ρ𝑽(x)` on sampled `{𝑽 <= L̄}`.
    pub fn validate(&self, f: &SystemMap, plan: SamplingPlan) -> Result<CertificateCheck> {
        let n = self.v.dim();
        let v0 = self.v.value(&DVector::zeros(n))?;
        if v0.abs() > 1e-12 {
            return Err(Error::CertificateViolated {
                detail: format!("V(0) = {v0} is not zero"),
                witness: vec![0.0; n],
            });
        }
        let pts = self.sublevel().samples(plan)?;
        let rho = self.rho();
        let mut worst = f64::NEG_INFINITY;
        for x in &pts {
            let vx = self.v.value(x)?;
            if x.norm() > 1e-12 && vx <= 0.0 {
                return Err(Error::CertificateViolated {
                    detail: format!("V(x) = {vx} is not positive away from the origin"),
                    witness: x.as_slice().to_vec(),
                });
            }
            let vy = self.v.value(&f.step(x)?)?;
            let margin = vy - rho * vx;
            worst = worst.max(margin);
            if margin > 1e-12 * vx.max(1.0) {
                return Err(Error::CertificateViolated {
                    detail: format!("V(f(x)) = {vy} exceeds ρV(x) = {}", rho * vx),
                    witness: x.as_slice().to_vec(),
                });
            }
        }
        Ok(CertificateCheck {
            worst_decrease: worst,
            samples: pts.len(),
            seed: plan.seed,
        })
    }
}

/// Ingredients of the domain-of-attraction budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delta4Report {
    /// largest level with sampled `{𝑽 <= v̲}` inside `{xᵀΠx <= ε/2}`
    pub v_lower: f64,
    /// sampled separation between `{𝑽 = L̄}` and the boundary of `C̄`
    pub term1: f64,
    /// `(1 - ρ) v̲ / sup |∇𝑽|`
    pub term2: f64,
    pub sup_gradient: f64,
    pub rho: f64,
    pub level: f64,
    pub delta4: f64,
    pub closest_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub samples: usize,
    pub seed: u64,
    pub note: String,
}

/// `min(term1, (1-ρ) v̲ / sup|∇𝑽|)`.
pub fn delta4(
    cert: &GlobalLyapunovCertificate,
    c_bar: &CompactSetSampler,
    pi: &QuadraticForm,
    epsilon: f64,
    plan: SamplingPlan,
) -> Result<Delta4Report> {
    let v = &cert.v;
    let n = v.dim();
    if pi.dim() != n || c_bar.dim() != n {
        return Err(Error::Dimension("certificate, Π and C̄ differ in dimension".into()));
    }
    let half = CompactSetSampler::new(
        pi.sublevel(epsilon / 2.0),
        SamplingPlan::boundary_only(plan.boundary.max(2), plan.seed),
    )?
    .boundary();
    for x in &half {
        if v.value(x)? > cert.level {
            return Err(Error::Precondition(format!(
                "{{xᵀΠx <= ε/2}} is not inside {{V <= {}}}",
                cert.level
            )));
        }
    }
    let region = cert.sublevel().samples(plan)?;

    // v̲: smallest 𝑽 on or outside the ε/2 ellipsoid
    let mut v_lower = f64::INFINITY;
    for x in half
        .iter()
        .chain(region.iter().filter(|x| pi.value(x) >= epsilon / 2.0))
    {
        v_lower = v_lower.min(v.value(x)?);
    }
    if !(v_lower > 0.0 && v_lower.is_finite()) {
        return Err(Error::Precondition(
            "no positive level fits inside the ε/2 ellipsoid".into(),
        ));
    }

    let mut sup_gradient: f64 = 0.0;
    for x in &region {
        sup_gradient = sup_gradient.max(v.gradient(x)?.norm());
    }
    if !(sup_gradient > 0.0) {
        return Err(Error::NonFinite("gradient of V vanishes on the sampled region".into()));
    }
    let rho = cert.rho();
    let term2 = (1.0 - rho) * v_lower / sup_gradient;

    let mut term1 = f64::INFINITY;
    let mut closest_pair = None;
    let escapes = c_bar
        .all()
        .into_iter()
        .find(|x| v.value(x).map(|val| val > cert.level).unwrap_or(true));
    if let Some(x) = escapes {
        term1 = 0.0;
        closest_pair = Some((x.as_slice().to_vec(), x.as_slice().to_vec()));
    } else {
        let outer = cert.sublevel().boundary(plan.boundary.max(2), plan.seed)?;
        for a in &outer {
            for b in c_bar.boundary() {
                let d = (a - &b).norm();
                if d < term1 {
                    term1 = d;
                    closest_pair = Some((a.as_slice().to_vec(), b.as_slice().to_vec()));
                }
            }
        }
    }
    Ok(Delta4Report {
        v_lower,
        term1,
        term2,
        sup_gradient,
        rho,
        level: cert.level,
        delta4: term1.min(term2),
        closest_pair,
        samples: region.len(),
        seed: plan.seed,
        note: "separation is a minimum over sampled boundary pairs, an upper estimate of the exact infimum".into(),
    })
}

/// All budgets and their ingredients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalStabilityBounds {
    pub epsilon: f64,
    pub a: f64,
    pub lambda_max: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub delta4: Option<Delta4Report>,
    pub safety: f64,
    /// `min(δ3, δ4) · safety`, or `δ3 · safety` without a global certificate
    pub delta: f64,
    pub formulas: Vec<String>,
    pub basin_scope: String,
}

pub fn assemble_bounds(
    cert: &ContractionCertificate,
    d4: Option<Delta4Report>,
    safety: f64,
) -> Result<TotalStabilityBounds> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::Precondition(format!(
            "safety factor {safety} must lie in (0, 1]"
        )));
    }
    let lambda_max = cert.pi.lambda_max();
    let d1 = delta1(cert.epsilon, cert.a, lambda_max);
    let d2 = delta2(cert.a);
    let d3 = d1.min(d2);
    let (raw, basin_scope) = match &d4 {
        Some(r) => (
            d3.min(r.delta4),
            "domain of attraction contains C̄ (sampled evidence)".to_string(),
        ),
        None => (
            d3,
            "basin claim limited to {xᵀΠx <= ε}: no global certificate supplied".to_string(),
        ),
    };
    Ok(TotalStabilityBounds {
        epsilon: cert.epsilon,
        a: cert.a,
        lambda_max,
        delta1: d1,
        delta2: d2,
        delta3: d3,
        delta4: d4,
        safety,
        delta: raw * safety,
        formulas: vec![
            "delta1 = sqrt(epsilon*(1-a)^2 / (8*lambda_max*(3+a)))".into(),
            "delta2 = (1-a) / (2*sqrt(10+6a))".into(),
            "delta3 = min(delta1, delta2)".into(),
            "delta4 = min(term1, (1-rho)*v_lower/sup_gradient)".into(),
            "delta = min(delta3, delta4) * safety".into(),
        ],
        basin_scope,
    })
}
