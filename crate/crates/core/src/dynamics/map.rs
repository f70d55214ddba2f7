use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::sampler::SetShape;
use crate::expr::{compile_map, parse_str, CompiledMap, InputLayout};
use crate::{Error, Result};

type EvalFn = dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync;
type JacFn = dyn Fn(&DVector<f64>) -> Result<DMatrix<f64>> + Send + Sync;

/// Components of `|x|` beyond this are treated as a blow-up.
pub const BLOW_UP: f64 = 1e12;

/// A map `R^n_in -> R^n_out` with an optional analytic Jacobian.
#[derive(Clone)]
pub struct VectorMap {
    n_in: usize,
    n_out: usize,
    eval: Arc<EvalFn>,
    jac: Option<Arc<JacFn>>,
}

impl fmt::Debug for VectorMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorMap")
            .field("n_in", &self.n_in)
            .field("n_out", &self.n_out)
            .field("analytic_jacobian", &self.jac.is_some())
            .finish()
    }
}

impl VectorMap {
    pub fn new<F>(n_in: usize, n_out: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        VectorMap {
            n_in,
            n_out,
            eval: Arc::new(move |x| Ok(f(x))),
            jac: None,
        }
    }

    pub fn try_new<F>(n_in: usize, n_out: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync + 'static,
    {
        VectorMap {
            n_in,
            n_out,
            eval: Arc::new(f),
            jac: None,
        }
    }

    pub fn with_jacobian<J>(mut self, j: J) -> Self
    where
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(move |x| Ok(j(x))));
        self
    }

    pub fn try_with_jacobian<J>(mut self, j: J) -> Self
    where
        J: Fn(&DVector<f64>) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(j));
        self
    }

    /// Drops the analytic Jacobian so finite differences are used.
    pub fn without_jacobian(mut self) -> Self {
        self.jac = None;
        self
    }

    pub fn compiled(map: CompiledMap) -> Self {
        let map = Arc::new(map);
        let (n_in, n_out) = (map.n_in(), map.n_out());
        let m_eval = Arc::clone(&map);
        let m_jac = map;
        VectorMap {
            n_in,
            n_out,
            eval: Arc::new(move |x| Ok(DVector::from_vec(m_eval.eval(x.as_slice())?))),
            jac: Some(Arc::new(move |x| Ok(m_jac.jacobian(x.as_slice())?))),
        }
    }

    /// Parses and compiles one expression per output coordinate.
    pub fn parse<S: AsRef<str>>(layout: InputLayout, exprs: &[S], params: &[f64]) -> Result<Self> {
        let asts = exprs
            .iter()
            .map(|s| parse_str(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let n_out = asts.len();
        Ok(VectorMap::compiled(compile_map(asts, layout, n_out, params)?))
    }

    pub fn linear(a: DMatrix<f64>) -> Self {
        VectorMap::affine(a, None)
    }

    pub fn affine(a: DMatrix<f64>, b: Option<DVector<f64>>) -> Self {
        let (n_out, n_in) = a.shape();
        let b = b.unwrap_or_else(|| DVector::zeros(n_out));
        let a_jac = a.clone();
        VectorMap::new(n_in, n_out, move |x| &a * x + &b).with_jacobian(move |_| a_jac.clone())
    }

    pub fn zero(n_in: usize, n_out: usize) -> Self {
        VectorMap::linear(DMatrix::zeros(n_out, n_in))
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    fn check_in(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n_in {
            return Err(Error::Dimension(format!(
                "argument has length {}, map expects {}",
                x.len(),
                self.n_in
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_in(x)?;
        let y = (self.eval)(x)?;
        if y.len() != self.n_out {
            return Err(Error::Dimension(format!(
                "map returned length {}, declared {}",
                y.len(),
                self.n_out
            )));
        }
        Ok(y)
    }

    pub fn eval_slice(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.eval(&DVector::from_column_slice(x))
    }

    /// Analytic Jacobian when available, else central differences with
    /// step `1e-6 * max(1, |x|)`.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_in(x)?;
        match &self.jac {
            Some(j) => {
                let m = j(x)?;
                if m.shape() != (self.n_out, self.n_in) {
                    return Err(Error::Dimension(format!(
                        "Jacobian has shape {:?}, expected ({}, {})",
                        m.shape(),
                        self.n_out,
                        self.n_in
                    )));
                }
                Ok(m)
            }
            None => self.fd_jacobian(x),
        }
    }

    pub fn fd_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_in(x)?;
        let h = 1e-6 * x.norm().max(1.0);
        let mut jac = DMatrix::zeros(self.n_out, self.n_in);
        let mut xp = x.clone();
        for j in 0..self.n_in {
            xp[j] = x[j] + h;
            let fp = self.eval(&xp)?;
            xp[j] = x[j] - h;
            let fm = self.eval(&xp)?;
            xp[j] = x[j];
            jac.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        Ok(jac)
    }
}

/// A discrete-time system `x+ = f(x)` on `R^n`.
#[derive(Clone, Debug)]
pub struct SystemMap {
    map: VectorMap,
    c1_region: Option<SetShape>,
}

/// States `x_0..x_N` of a simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub outputs: Option<Vec<DVector<f64>>>,
    pub blow_up: bool,
}

impl Trajectory {
    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds x0")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

impl SystemMap {
    pub fn new(map: VectorMap) -> Result<Self> {
        if map.n_in() != map.n_out() {
            return Err(Error::Dimension(format!(
                "system map must be square, got {} -> {}",
                map.n_in(),
                map.n_out()
            )));
        }
        Ok(SystemMap { map, c1_region: None })
    }

    pub fn from_exprs<S: AsRef<str>>(exprs: &[S], params: &[f64]) -> Result<Self> {
        let n = exprs.len();
        SystemMap::new(VectorMap::parse(InputLayout::states(n), exprs, params)?)
    }

    pub fn from_fn<F>(n: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        SystemMap {
            map: VectorMap::new(n, n, f),
            c1_region: None,
        }
    }

    pub fn linear(a: DMatrix<f64>) -> Result<Self> {
        SystemMap::new(VectorMap::linear(a))
    }

    pub fn affine(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if b.len() != a.nrows() {
            return Err(Error::Dimension("offset length differs from matrix rows".into()));
        }
        SystemMap::new(VectorMap::affine(a, Some(b)))
    }

    /// Declares where the map is C¹; Jacobians requested elsewhere log a warning.
    pub fn with_c1_region(mut self, region: SetShape) -> Self {
        self.c1_region = Some(region);
        self
    }

    pub fn c1_region(&self) -> Option<&SetShape> {
        self.c1_region.as_ref()
    }

    pub fn map(&self) -> &VectorMap {
        &self.map
    }

    pub fn dim(&self) -> usize {
        self.map.n_in()
    }

    pub fn step(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self.map.eval(x)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "f(x) is not finite at x = {:?}",
                x.as_slice()
            )));
        }
        Ok(y)
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if let Some(region) = &self.c1_region {
            if !region.contains(x, 1e-12) {
                log::warn!(
                    "Jacobian requested outside the declared C1 region at {:?}",
                    x.as_slice()
                );
            }
        }
        self.map.jacobian(x)
    }

    /// Runs `steps` iterations; stops early with `blow_up` set when a state
    /// is non-finite or exceeds `1e12` in norm.
    pub fn simulate(&self, x0: &DVector<f64>, steps: usize) -> Result<Trajectory> {
        if x0.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "initial state has length {}, system has dimension {}",
                x0.len(),
                self.dim()
            )));
        }
        let mut states = Vec::with_capacity(steps + 1);
        states.push(x0.clone());
        let mut blow_up = false;
        for _ in 0..steps {
            match self.step(states.last().expect("non-empty")) {
                Ok(x) => {
                    let big = x.norm() > BLOW_UP;
                    states.push(x);
                    if big {
                        blow_up = true;
                        break;
                    }
                }
                Err(Error::NonFinite(_)) => {
                    blow_up = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(Trajectory {
            states,
            outputs: None,
            blow_up,
        })
    }

    /// Checks `|f(0)| <= 1e-12`.
    pub fn check_origin_equilibrium(&self) -> Result<()> {
        let x0 = DVector::zeros(self.dim());
        let r = self.step(&x0)?.norm();
        if r > 1e-12 {
            return Err(Error::Precondition(format!(
                "origin is not an equilibrium: |f(0)| = {r:e}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sys(src: &[&str]) -> SystemMap {
        SystemMap::from_exprs(src, &[]).unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn step_examples() {
        assert_eq!(sys(&["0.5*x1"]).step(&v(&[2.0])).unwrap()[0], 1.0);
        assert_eq!(sys(&["0.5*x1+0.1*sin(x1)"]).step(&v(&[0.0])).unwrap()[0], 0.0);
        assert_abs_diff_eq!(
            sys(&["0.5*x1+0.01"]).step(&v(&[0.02])).unwrap()[0],
            0.02,
            epsilon = 1e-17
        );
    }

    #[test]
    fn non_finite_step_is_error() {
        let s = sys(&["exp(x1)"]);
        assert!(matches!(s.step(&v(&[1000.0])), Err(Error::NonFinite(_))));
    }

    #[test]
    fn simulate_examples() {
        let s = sys(&["0.5*x1"]);
        let t = s.simulate(&v(&[1.0]), 3).unwrap();
        let xs: Vec<f64> = t.states.iter().map(|x| x[0]).collect();
        assert_eq!(xs, vec![1.0, 0.5, 0.25, 0.125]);
        assert!(!t.blow_up);
        assert_eq!(s.simulate(&v(&[1.0]), 0).unwrap().len(), 1);
        let t = sys(&["2*x1"]).simulate(&v(&[1.0]), 60).unwrap();
        assert!(t.blow_up);
        assert!(t.len() < 61);
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(sys(&["0.5*x1"]).jacobian(&v(&[3.0])).unwrap()[(0, 0)], 0.5);
        let j = sys(&["x2", "-x1"]).jacobian(&v(&[1.0, 2.0])).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let j = sys(&["0.5*x1+0.1*sin(x1)"]).jacobian(&v(&[0.0])).unwrap();
        assert_abs_diff_eq!(j[(0, 0)], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn finite_difference_fallback() {
        let s = SystemMap::from_fn(1, |x| x.map(|v| 0.5 * v + 0.1 * v.sin()));
        assert!(!s.map().has_analytic_jacobian());
        assert_abs_diff_eq!(s.jacobian(&v(&[0.0])).unwrap()[(0, 0)], 0.6, epsilon = 1e-9);
    }

    #[test]
    fn non_square_rejected() {
        assert!(SystemMap::new(VectorMap::zero(2, 1)).is_err());
        assert!(sys(&["x1"]).step(&v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn origin_equilibrium_check() {
        assert!(sys(&["0.5*x1"]).check_origin_equilibrium().is_ok());
        assert!(sys(&["0.5*x1+0.01"]).check_origin_equilibrium().is_err());
    }
}
