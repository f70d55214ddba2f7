use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::{CompactSetSampler, PlantModel, VectorMap};
use crate::linalg::spectral_norm;
use crate::{Error, Result};

type Modulus = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;

/// Integral action `z+ = z + k(ξ, y)` with Lipschitz moduli in `y`:
/// `L1(ξ)` for `k` and `L2(ξ)` for `∂k/∂ξ`.
#[derive(Clone)]
pub struct GeneralizedIntegrator {
    pub q: usize,
    pub p: usize,
    /// `k` on the stacked argument `(ξ, y)`
    pub k: VectorMap,
    l1: Arc<Modulus>,
    l2: Arc<Modulus>,
}

impl fmt::Debug for GeneralizedIntegrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralizedIntegrator")
            .field("q", &self.q)
            .field("p", &self.p)
            .field("k", &self.k)
            .finish()
    }
}

impl GeneralizedIntegrator {
    pub fn new<A, B>(q: usize, k: VectorMap, l1: A, l2: B) -> Result<Self>
    where
        A: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        B: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        if k.n_in() < q || k.n_in() - q != k.n_out() {
            return Err(Error::Dimension(format!(
                "integrator must map R^{q} x R^p to R^p, got {} -> {}",
                k.n_in(),
                k.n_out()
            )));
        }
        Ok(GeneralizedIntegrator {
            q,
            p: k.n_out(),
            k,
            l1: Arc::new(l1),
            l2: Arc::new(l2),
        })
    }

    /// Constant moduli.
    pub fn with_constants(q: usize, k: VectorMap, l1: f64, l2: f64) -> Result<Self> {
        Self::new(q, k, move |_| l1, move |_| l2)
    }

    /// The standard integrator `k(ξ,y) = y` with `L1 = 1`, `L2 = 0`.
    pub fn standard(q: usize, p: usize) -> Self {
        let mut sel = DMatrix::zeros(p, q + p);
        sel.view_mut((0, q), (p, p)).fill_with_identity();
        Self::with_constants(q, VectorMap::linear(sel), 1.0, 0.0).expect("dimensions match")
    }

    pub fn eval(&self, xi: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.k.eval(&PlantModel::stack(xi, y))
    }

    pub fn l1(&self, xi: &DVector<f64>) -> f64 {
        (self.l1)(xi)
    }

    pub fn l2(&self, xi: &DVector<f64>) -> f64 {
        (self.l2)(xi)
    }

    fn d_xi(&self, xi: &DVector<f64>, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self
            .k
            .jacobian(&PlantModel::stack(xi, y))?
            .columns(0, self.q)
            .into_owned())
    }
}

/// Which integrator condition a sample violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorCondition {
    /// `k(ξ,0) = 0`
    VanishesAtZero,
    /// `k(ξ,y) != 0` for `y != 0`
    NonzeroOffZero,
    /// `|k(ξ,y_a) - k(ξ,y_b)| <= L1(ξ)|y_a - y_b|`
    LipschitzK,
    /// `|∂k/∂ξ(ξ,y_a) - ∂k/∂ξ(ξ,y_b)| <= L2(ξ)|y_a - y_b|`
    LipschitzDxi,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorViolation {
    pub condition: IntegratorCondition,
    /// the sample `(ξ, y_a, y_b)`
    pub point: Vec<f64>,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorCheck {
    pub pass: bool,
    pub samples: usize,
    /// largest `|k(ξ,y_a)-k(ξ,y_b)| / |y_a-y_b|` seen
    pub observed_l1: f64,
    /// largest `|∂k/∂ξ(ξ,y_a)-∂k/∂ξ(ξ,y_b)| / |y_a-y_b|` seen
    pub observed_l2: f64,
    pub violations: Vec<IntegratorViolation>,
}

const ZERO_TOL: f64 = 1e-12;
const LIPSCHITZ_SLACK: f64 = 1e-9;
const MAX_VIOLATIONS: usize = 16;

/// Checks the three integrator conditions on samples `(ξ, y_a, y_b)` of
/// dimension `q + 2p`.
pub fn check_integrator(k: &GeneralizedIntegrator, sampler: &CompactSetSampler) -> Result<IntegratorCheck> {
    let (q, p) = (k.q, k.p);
    if sampler.dim() != q + 2 * p {
        return Err(Error::Dimension(format!(
            "integrator samples must have dimension q + 2p = {}, got {}",
            q + 2 * p,
            sampler.dim()
        )));
    }
    let pts = sampler.all();
    let mut violations = Vec::new();
    let mut push = |condition, point: &DVector<f64>, excess: f64| {
        if violations.len() < MAX_VIOLATIONS {
            violations.push(IntegratorViolation {
                condition,
                point: point.as_slice().to_vec(),
                excess,
            });
        }
    };
    let (mut observed_l1, mut observed_l2) = (0.0f64, 0.0f64);
    let zero = DVector::zeros(p);
    for s in &pts {
        let xi = s.rows(0, q).into_owned();
        let ya = s.rows(q, p).into_owned();
        let yb = s.rows(q + p, p).into_owned();

        let k0 = k.eval(&xi, &zero)?.norm();
        if k0 > ZERO_TOL {
            push(IntegratorCondition::VanishesAtZero, s, k0);
        }
        let ka = k.eval(&xi, &ya)?;
        let kb = k.eval(&xi, &yb)?;
        for (y, ky) in [(&ya, &ka), (&yb, &kb)] {
            if y.norm() > ZERO_TOL && ky.norm() == 0.0 {
                push(IntegratorCondition::NonzeroOffZero, s, y.norm());
            }
        }
        let dy = (&ya - &yb).norm();
        let dk = (&ka - &kb).norm();
        let dj = spectral_norm(&(k.d_xi(&xi, &ya)? - k.d_xi(&xi, &yb)?));
        if dy > 0.0 {
            observed_l1 = observed_l1.max(dk / dy);
            observed_l2 = observed_l2.max(dj / dy);
        }
        let ex1 = dk - k.l1(&xi) * dy;
        if ex1 > LIPSCHITZ_SLACK * dy.max(1.0) {
            push(IntegratorCondition::LipschitzK, s, ex1);
        }
        let ex2 = dj - k.l2(&xi) * dy;
        if ex2 > LIPSCHITZ_SLACK * dy.max(1.0) {
            push(IntegratorCondition::LipschitzDxi, s, ex2);
        }
    }
    Ok(IntegratorCheck {
        pass: violations.is_empty(),
        samples: pts.len(),
        observed_l1,
        observed_l2,
        violations,
    })
}
