use nalgebra::{DMatrix, DVector};

use super::map::{SystemMap, VectorMap};
use super::sampler::{CompactSetSampler, SamplingPlan, SetShape};
use crate::{Error, Result};

/// Controlled plant `ξ+ = φ(ξ) + g(ξ,u)`, `y = h(ξ,u)`.
///
/// `g` and `h` take the stacked argument `(ξ, u)`. Nominal plants have an
/// `h` that ignores `u`; perturbed ones may not.
#[derive(Clone, Debug)]
pub struct PlantModel {
    pub q: usize,
    pub m: usize,
    pub p: usize,
    pub phi: VectorMap,
    pub g: VectorMap,
    pub h: VectorMap,
}

/// Where `h(0)=0` and `g(ξ,0)=0` are checked for nominal plants.
const NOMINAL_CHECK_SAMPLES: usize = 64;

impl PlantModel {
    /// A plant with dimension checks only (`p <= m` included).
    pub fn new(phi: VectorMap, g: VectorMap, h: VectorMap) -> Result<Self> {
        let q = phi.n_in();
        let dim_err = |what: &str| Err(Error::Dimension(what.to_string()));
        if phi.n_out() != q {
            return dim_err("φ must map R^q to R^q");
        }
        if g.n_out() != q || g.n_in() < q {
            return dim_err("g must map R^q x R^m to R^q");
        }
        let m = g.n_in() - q;
        if h.n_in() != q + m {
            return dim_err("h must take (ξ, u) with the same m as g");
        }
        let p = h.n_out();
        if p > m {
            return Err(Error::Precondition(format!("needs p <= m, got p = {p}, m = {m}")));
        }
        Ok(PlantModel { q, m, p, phi, g, h })
    }

    /// A nominal plant: additionally checks `h(0)=0` and `g(ξ,0)=0` on
    /// sampled `ξ` in `[-1,1]^q`.
    pub fn nominal(phi: VectorMap, g: VectorMap, h: VectorMap) -> Result<Self> {
        let plant = PlantModel::new(phi, g, h)?;
        let h0 = plant.output(&DVector::zeros(plant.q), &DVector::zeros(plant.m))?;
        if h0.norm() > 1e-12 {
            return Err(Error::Precondition(format!("h(0) = {:?} is not zero", h0.as_slice())));
        }
        let sampler = CompactSetSampler::new(
            SetShape::cube(plant.q, 1.0),
            SamplingPlan::new(NOMINAL_CHECK_SAMPLES, 0, 0),
        )?;
        let u0 = DVector::zeros(plant.m);
        for xi in sampler.interior() {
            let gx = plant.input_term(&xi, &u0)?;
            if gx.norm() > 1e-12 {
                return Err(Error::Precondition(format!(
                    "g(ξ, 0) = {:?} is not zero at ξ = {:?}",
                    gx.as_slice(),
                    xi.as_slice()
                )));
            }
        }
        Ok(plant)
    }

    pub fn stack(xi: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(xi.len() + u.len(), xi.iter().chain(u.iter()).copied())
    }

    pub fn drift(&self, xi: &DVector<f64>) -> Result<DVector<f64>> {
        self.phi.eval(xi)
    }

    pub fn input_term(&self, xi: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.g.eval(&Self::stack(xi, u))
    }

    pub fn output(&self, xi: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.h.eval(&Self::stack(xi, u))
    }

    /// `φ(ξ) + g(ξ,u)`.
    pub fn next_state(&self, xi: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.drift(xi)? + self.input_term(xi, u)?)
    }

    /// Splits a Jacobian over `(ξ,u)` into its `ξ` and `u` blocks.
    pub fn split(&self, j: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let rows = j.nrows();
        (
            j.view((0, 0), (rows, self.q)).into_owned(),
            j.view((0, self.q), (rows, self.m)).into_owned(),
        )
    }
}

/// Closed loop on `x = (ξ, z)` with integrator `z+ = z + k(ξ, y)` and
/// feedback `u = α(ξ, z)`.
#[derive(Clone, Debug)]
pub struct ExtendedSystem {
    pub plant: PlantModel,
    /// `k(ξ, y)` on the stacked argument `(ξ, y)`
    pub k: VectorMap,
    /// `α(ξ, z)` on the stacked argument `(ξ, z)`
    pub alpha: VectorMap,
    system: SystemMap,
}

impl ExtendedSystem {
    pub fn system(&self) -> &SystemMap {
        &self.system
    }

    pub fn dim(&self) -> usize {
        self.plant.q + self.plant.p
    }

    pub fn split_state(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let q = self.plant.q;
        (x.rows(0, q).into_owned(), x.rows(q, self.plant.p).into_owned())
    }

    pub fn control(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.alpha.eval(x)
    }

    /// Regulated output `h(ξ, α(ξ,z))`.
    pub fn output(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (xi, _) = self.split_state(x);
        self.plant.output(&xi, &self.control(x)?)
    }
}

/// Composes plant, integrator and controller into the closed loop
/// `(φ(ξ) + g(ξ, α(ξ,z)), z + k(ξ, h(ξ, α(ξ,z))))`.
pub fn build_extended(plant: PlantModel, k: VectorMap, alpha: VectorMap) -> Result<ExtendedSystem> {
    let (q, m, p) = (plant.q, plant.m, plant.p);
    if k.n_in() != q + p || k.n_out() != p {
        return Err(Error::Dimension(format!(
            "integrator must map R^{q} x R^{p} to R^{p}, got {} -> {}",
            k.n_in(),
            k.n_out()
        )));
    }
    if alpha.n_in() != q + p || alpha.n_out() != m {
        return Err(Error::Dimension(format!(
            "controller must map R^{q} x R^{p} to R^{m}, got {} -> {}",
            alpha.n_in(),
            alpha.n_out()
        )));
    }
    let n = q + p;
    let (pl, kk, al) = (plant.clone(), k.clone(), alpha.clone());
    let eval = move |x: &DVector<f64>| -> Result<DVector<f64>> {
        let xi = x.rows(0, q).into_owned();
        let z = x.rows(q, p).into_owned();
        let u = al.eval(x)?;
        let xi_next = pl.next_state(&xi, &u)?;
        let y = pl.output(&xi, &u)?;
        let z_next = z + kk.eval(&PlantModel::stack(&xi, &y))?;
        Ok(PlantModel::stack(&xi_next, &z_next))
    };
    let (pl, kk, al) = (plant.clone(), k.clone(), alpha.clone());
    let jac = move |x: &DVector<f64>| -> Result<DMatrix<f64>> {
        let xi = x.rows(0, q).into_owned();
        let u = al.eval(x)?;
        let (a_xi, a_z) = {
            let j = al.jacobian(x)?;
            (j.columns(0, q).into_owned(), j.columns(q, p).into_owned())
        };
        let xu = PlantModel::stack(&xi, &u);
        let (g_xi, g_u) = pl.split(&pl.g.jacobian(&xu)?);
        let (h_xi, h_u) = pl.split(&pl.h.jacobian(&xu)?);
        let y = pl.h.eval(&xu)?;
        let kj = kk.jacobian(&PlantModel::stack(&xi, &y))?;
        let k_xi = kj.columns(0, q).into_owned();
        let k_y = kj.columns(q, p).into_owned();

        let y_xi = &h_xi + &h_u * &a_xi;
        let y_z = &h_u * &a_z;
        let mut out = DMatrix::zeros(n, n);
        out.view_mut((0, 0), (q, q))
            .copy_from(&(pl.phi.jacobian(&xi)? + g_xi + &g_u * &a_xi));
        out.view_mut((0, q), (q, p)).copy_from(&(&g_u * &a_z));
        out.view_mut((q, 0), (p, q)).copy_from(&(k_xi + &k_y * y_xi));
        out.view_mut((q, q), (p, p))
            .copy_from(&(DMatrix::identity(p, p) + &k_y * y_z));
        Ok(out)
    };
    let system = SystemMap::new(VectorMap::try_new(n, n, eval).try_with_jacobian(jac))?;
    Ok(ExtendedSystem {
        plant,
        k,
        alpha,
        system,
    })
}
