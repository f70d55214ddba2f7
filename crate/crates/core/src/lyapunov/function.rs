use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use super::quadratic::QuadraticForm;
use crate::dynamics::{sup_over, CompactSetSampler, SupEstimate, SystemMap};
use crate::expr::{compile_map, parse_str, InputLayout};
use crate::{Error, Result};

type ValueFn = dyn Fn(&DVector<f64>) -> Result<f64> + Send + Sync;
type GradFn = dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync;

/// A Lyapunov function `V >= 0` with decrease factor `ρ`:
/// `V(f(x)) <= ρ V(x)` on its working region.
#[derive(Clone)]
pub struct LyapunovFunction {
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradFn>>,
    rho: f64,
    quadratic: Option<QuadraticForm>,
    search_radius: f64,
}

impl fmt::Debug for LyapunovFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovFunction")
            .field("dim", &self.dim)
            .field("rho", &self.rho)
            .field("quadratic", &self.quadratic.is_some())
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl LyapunovFunction {
    pub fn new<F>(dim: usize, value: F, rho: f64) -> Self
    where
        F: Fn(&DVector<f64>) -> Result<f64> + Send + Sync + 'static,
    {
        LyapunovFunction {
            dim,
            value: Arc::new(value),
            gradient: None,
            rho,
            quadratic: None,
            search_radius: 10.0,
        }
    }

    pub fn quadratic(form: QuadraticForm, rho: f64) -> Self {
        let (fv, fg) = (form.clone(), form.clone());
        LyapunovFunction {
            dim: form.dim(),
            value: Arc::new(move |x| Ok(fv.value(x))),
            gradient: Some(Arc::new(move |x| Ok(fg.gradient(x)))),
            rho,
            quadratic: Some(form),
            search_radius: 10.0,
        }
    }

    /// `V` given as an expression in `x1..xn` with a symbolic gradient.
    pub fn from_expr(dim: usize, source: &str, rho: f64, params: &[f64]) -> Result<Self> {
        let map = Arc::new(compile_map(
            vec![parse_str(source)?],
            InputLayout::states(dim),
            1,
            params,
        )?);
        let mv = Arc::clone(&map);
        Ok(LyapunovFunction {
            dim,
            value: Arc::new(move |x| Ok(mv.eval(x.as_slice())?[0])),
            gradient: Some(Arc::new(move |x| {
                Ok(DVector::from_row_slice(map.jacobian(x.as_slice())?.as_slice()))
            })),
            rho,
            quadratic: None,
            search_radius: 10.0,
        })
    }

    pub fn with_gradient<G>(mut self, g: G) -> Self
    where
        G: Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(g));
        self
    }

    /// Radius scanned when locating level crossings along rays.
    pub fn with_search_radius(mut self, r: f64) -> Self {
        self.search_radius = r;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn search_radius(&self) -> f64 {
        self.search_radius
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticForm> {
        self.quadratic.as_ref()
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!(
                "V expects length {}, got {}",
                self.dim,
                x.len()
            )));
        }
        (self.value)(x)
    }

    /// Analytic gradient when available, else central differences.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if let Some(g) = &self.gradient {
            return g(x);
        }
        let h = 1e-6 * x.norm().max(1.0);
        let mut out = DVector::zeros(self.dim);
        let mut xp = x.clone();
        for j in 0..self.dim {
            xp[j] = x[j] + h;
            let vp = self.value(&xp)?;
            xp[j] = x[j] - h;
            let vm = self.value(&xp)?;
            xp[j] = x[j];
            out[j] = (vp - vm) / (2.0 * h);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("finite-difference gradient".into()));
        }
        Ok(out)
    }

    /// Sampled `max V(f(x)) - ρV(x)` over `set`; nonpositive when the
    /// decrease condition holds on the samples.
    pub fn decrease_violation(&self, f: &SystemMap, set: &CompactSetSampler) -> Result<SupEstimate> {
        sup_over(set, |x| Ok(self.value(&f.step(x)?)? - self.rho * self.value(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{SamplingPlan, SetShape};

    #[test]
    fn expression_function_and_gradient() {
        let v = LyapunovFunction::from_expr(2, "x1^2 + 2*x2^2", 0.5, &[]).unwrap();
        let x = DVector::from_vec(vec![1.0, -1.0]);
        assert_eq!(v.value(&x).unwrap(), 3.0);
        assert_eq!(v.gradient(&x).unwrap().as_slice(), &[2.0, -4.0]);
    }

    #[test]
    fn finite_difference_gradient() {
        let v = LyapunovFunction::new(1, |x| Ok(x[0] * x[0]), 0.5);
        let g = v.gradient(&DVector::from_element(1, 0.3)).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-8);
    }

    #[test]
    fn decrease_on_linear_map() {
        let v = LyapunovFunction::quadratic(QuadraticForm::identity(1), 0.25);
        let f = SystemMap::from_exprs(&["0.5*x1"], &[]).unwrap();
        let set = CompactSetSampler::new(SetShape::ball(1, 1.0), SamplingPlan::new(64, 2, 0)).unwrap();
        assert!(v.decrease_violation(&f, &set).unwrap().value <= 1e-15);
        let v = v.with_rho(0.2);
        assert!(v.decrease_violation(&f, &set).unwrap().value > 0.0);
    }
}
