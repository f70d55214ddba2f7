use nalgebra::{DMatrix, DVector};

use crate::dynamics::{sampled_max, CompactSetSampler, SamplingPlan, SetShape, SystemMap};
use crate::linalg::{lambda_max_sym, lambda_min_sym, max_asymmetry, quad, spectral_norm, spectral_radius};
use crate::{Error, Result};

/// A symmetric positive definite `Π` defining `V(x) = xᵀΠx`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pi: DMatrix<f64>,
    lambda_max: f64,
    lambda_min: f64,
}

impl QuadraticForm {
    pub fn new(pi: DMatrix<f64>) -> Result<Self> {
        if !pi.is_square() || pi.is_empty() {
            return Err(Error::Dimension(format!("Π must be square, got {:?}", pi.shape())));
        }
        let scale = pi.abs().max().max(1.0);
        if max_asymmetry(&pi) > 1e-12 * scale {
            return Err(Error::Precondition("Π is not symmetric".into()));
        }
        let pi = (&pi + pi.transpose()) * 0.5;
        let lambda_min = lambda_min_sym(&pi);
        if !(lambda_min > 0.0) {
            return Err(Error::Precondition(format!(
                "Π is not positive definite: λ_min = {lambda_min:e}"
            )));
        }
        let lambda_max = lambda_max_sym(&pi);
        Ok(QuadraticForm {
            pi,
            lambda_max,
            lambda_min,
        })
    }

    pub fn identity(n: usize) -> Self {
        QuadraticForm::new(DMatrix::identity(n, n)).expect("identity is positive definite")
    }

    pub fn scalar(p: f64) -> Result<Self> {
        QuadraticForm::new(DMatrix::from_element(1, 1, p))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.pi
    }

    pub fn dim(&self) -> usize {
        self.pi.nrows()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        quad(&self.pi, x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.pi * x * 2.0
    }

    /// `{x : xᵀΠx <= level}`.
    pub fn sublevel(&self, level: f64) -> SetShape {
        SetShape::ellipsoid(self.pi.clone(), level)
    }

    pub fn scaled(&self, kappa: f64) -> Result<Self> {
        QuadraticForm::new(&self.pi * kappa)
    }
}

/// Solves `AᵀΠA - aΠ = -I` through the Kronecker-vectorized system
/// `(Aᵀ⊗Aᵀ - aI) vec Π = -vec I`.
pub fn solve_stein(a_mat: &DMatrix<f64>, a: f64) -> Result<QuadraticForm> {
    if !a_mat.is_square() || a_mat.is_empty() {
        return Err(Error::Dimension(format!("A must be square, got {:?}", a_mat.shape())));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Precondition(format!("decay a = {a} must lie in (0, 1)")));
    }
    let rho = spectral_radius(a_mat);
    if rho * rho >= a {
        return Err(Error::Precondition(format!(
            "spectral radius {rho} of A must be below sqrt(a) = {}",
            a.sqrt()
        )));
    }
    let n = a_mat.nrows();
    let at = a_mat.transpose();
    let mut k = at.kronecker(&at);
    for i in 0..n * n {
        k[(i, i)] -= a;
    }
    let rhs = -DVector::from_column_slice(DMatrix::<f64>::identity(n, n).as_slice());
    let lu = k.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned("Kronecker system is singular".into()))?;
    let pi = DMatrix::from_column_slice(n, n, sol.as_slice());
    let pi = (&pi + pi.transpose()) * 0.5;
    let residual = spectral_norm(&(&at * &pi * a_mat - &pi * a + DMatrix::identity(n, n)));
    let scale = spectral_norm(&pi).max(1.0);
    if !(residual <= 1e-10 * scale) {
        return Err(Error::IllConditioned(format!("Stein residual {residual:e} too large")));
    }
    QuadraticForm::new(pi)
}

/// `a = (ρ(A)² + 1) / 2`.
pub fn default_decay(a_mat: &DMatrix<f64>) -> Result<f64> {
    let rho = spectral_radius(a_mat);
    if rho >= 1.0 {
        return Err(Error::UnstableLinearization(rho));
    }
    Ok((rho * rho + 1.0) / 2.0)
}

/// `λ_max` of `Ψ = [[-(1+a)/2 Π, JᵀΠ], [ΠJ, -Π]]` with `J = ∂f/∂x(x)`.
pub fn lmi_margin(f: &SystemMap, pi: &QuadraticForm, a: f64, x: &DVector<f64>) -> Result<f64> {
    let j = f.jacobian(x)?;
    Ok(lmi_margin_of(&j, pi, a))
}

pub fn lmi_margin_of(j: &DMatrix<f64>, pi: &QuadraticForm, a: f64) -> f64 {
    let n = pi.dim();
    let p = pi.matrix();
    let pj = p * j;
    let mut psi = DMatrix::zeros(2 * n, 2 * n);
    psi.view_mut((0, 0), (n, n)).copy_from(&(p * (-(1.0 + a) / 2.0)));
    psi.view_mut((0, n), (n, n)).copy_from(&pj.transpose());
    psi.view_mut((n, 0), (n, n)).copy_from(&pj);
    psi.view_mut((n, n), (n, n)).copy_from(&(-p));
    lambda_max_sym(&psi)
}

/// `(Π, a, ε)` with the LMI verified on sampled `{xᵀΠx <= ε}`.
#[derive(Debug, Clone)]
pub struct ContractionCertificate {
    pub pi: QuadraticForm,
    pub a: f64,
    pub epsilon: f64,
    /// largest sampled LMI margin on the certified sublevel
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    /// `λ_max(JᵀΠJ - aΠ)` at the origin
    pub origin_margin: f64,
    pub samples: usize,
    pub seed: u64,
}

impl ContractionCertificate {
    /// A certificate whose ingredients are taken as given (no sampling).
    pub fn assumed(pi: QuadraticForm, a: f64, epsilon: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Precondition(format!("decay a = {a} must lie in (0, 1)")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Precondition(format!("ε = {epsilon} must be positive")));
        }
        let n = pi.dim();
        Ok(ContractionCertificate {
            pi,
            a,
            epsilon,
            worst_margin: f64::NAN,
            worst_point: vec![0.0; n],
            origin_margin: f64::NAN,
            samples: 0,
            seed: 0,
        })
    }
}

const GRID_HALVINGS: usize = 60;
const BISECTION_STEPS: usize = 20;

/// Largest `ε` in `(0, r_max]` such that every sampled point of
/// `{xᵀΠx <= ε}` has a nonpositive LMI margin: halve from `r_max` until a
/// level passes, then bisect 20 times between the last failing and first
/// passing levels.
pub fn find_epsilon(
    f: &SystemMap,
    pi: &QuadraticForm,
    a: f64,
    r_max: f64,
    plan: SamplingPlan,
) -> Result<ContractionCertificate> {
    let n = f.dim();
    if pi.dim() != n {
        return Err(Error::Dimension("Π and f differ in dimension".into()));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Precondition(format!("decay a = {a} must lie in (0, 1)")));
    }
    if !(r_max > 0.0) {
        return Err(Error::Precondition("search radius must be positive".into()));
    }
    let origin = DVector::zeros(n);
    let j0 = f.jacobian(&origin)?;
    let rho = spectral_radius(&j0);
    if rho >= 1.0 {
        return Err(Error::UnstableLinearization(rho));
    }
    let p = pi.matrix();
    let origin_margin = lambda_max_sym(&(j0.transpose() * p * &j0 - p * a));
    if origin_margin > 1e-10 {
        return Err(Error::Precondition(format!(
            "(Π, a) does not certify the linearization: λ_max(JᵀΠJ - aΠ) = {origin_margin:e}"
        )));
    }
    if lmi_margin_of(&j0, pi, a) >= 0.0 {
        return Err(Error::NoEpsilon("LMI margin at the origin is not negative".into()));
    }

    // unit-level samples, scaled to each candidate level
    let unit = CompactSetSampler::new(pi.sublevel(1.0), plan)?.all();
    let check = |eps: f64| -> Result<(f64, usize)> {
        let s = eps.sqrt();
        let pts: Vec<DVector<f64>> = unit.iter().map(|x| x * s).collect();
        let (worst, idx) = sampled_max(&pts, |x| lmi_margin(f, pi, a, x))?;
        Ok((worst, idx.unwrap_or(0)))
    };

    let mut fail = None;
    let mut pass = None;
    let mut eps = r_max;
    for _ in 0..=GRID_HALVINGS {
        let (worst, _) = check(eps)?;
        if worst <= 0.0 {
            pass = Some(eps);
            break;
        }
        fail = Some(eps);
        eps /= 2.0;
    }
    let Some(mut lo) = pass else {
        return Err(Error::NoEpsilon(format!("LMI fails on every level down to {eps:e}")));
    };
    if let Some(mut hi) = fail {
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if check(mid)?.0 <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let (worst, idx) = check(lo)?;
    Ok(ContractionCertificate {
        pi: pi.clone(),
        a,
        epsilon: lo,
        worst_margin: worst,
        worst_point: (&unit[idx] * lo.sqrt()).as_slice().to_vec(),
        origin_margin,
        samples: unit.len(),
        seed: plan.seed,
    })
}
