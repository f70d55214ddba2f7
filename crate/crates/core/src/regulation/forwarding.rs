use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::integrator::GeneralizedIntegrator;
use crate::dynamics::{CompactSetSampler, PlantModel, VectorMap};
use crate::lyapunov::QuadraticForm;
use crate::{Error, Result};

/// `K` with `M(ξ) = Kξ` solving `K A = K + C_k`, i.e. `K = C_k (A - I)⁻¹`.
pub fn solve_m_linear(a: &DMatrix<f64>, c_k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = a.nrows();
    if a.ncols() != q || c_k.ncols() != q {
        return Err(Error::Dimension(format!(
            "A must be square and C_k must have {q} columns"
        )));
    }
    let shifted = a - DMatrix::identity(q, q);
    let smallest = shifted.clone().svd(false, false).singular_values.min();
    if smallest <= 1e-12 {
        return Err(Error::Resonance(format!(
            "A - I is singular (smallest singular value {smallest:e}): 1 is an eigenvalue of A"
        )));
    }
    let kt = shifted
        .transpose()
        .lu()
        .solve(&c_k.transpose())
        .ok_or_else(|| Error::Resonance("A - I is singular".into()))?;
    let k = kt.transpose();
    let residual = (&k * a - &k - c_k).norm();
    if residual > 1e-10 * k.norm().max(1.0) {
        return Err(Error::IllConditioned(format!("mapping residual {residual:e}")));
    }
    Ok(k)
}

/// Multi-indices of total degree `1..=degree` in `q` variables, graded.
pub fn monomial_exponents(q: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(q: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == q - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(q, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if q == 0 {
        return out;
    }
    for d in 1..=degree as u32 {
        rec(q, d, &mut Vec::with_capacity(q), &mut out);
    }
    out
}

fn monomial(e: &[u32], x: &DVector<f64>) -> f64 {
    e.iter().zip(x.iter()).map(|(&k, &v)| v.powi(k as i32)).product()
}

fn monomial_grad(e: &[u32], x: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        e.len(),
        (0..e.len()).map(|i| {
            if e[i] == 0 {
                return 0.0;
            }
            e.iter()
                .zip(x.iter())
                .enumerate()
                .map(|(j, (&k, &v))| {
                    if j == i {
                        k as f64 * v.powi(k as i32 - 1)
                    } else {
                        v.powi(k as i32)
                    }
                })
                .product()
        }),
    )
}

/// Polynomial `M` fitted by ridge least squares.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialM {
    pub exponents: Vec<Vec<u32>>,
    /// one row per output, one column per monomial
    pub coefficients: Vec<Vec<f64>>,
    pub degree: usize,
    pub ridge: f64,
    pub residual_rms: f64,
    pub rank_deficient: bool,
    pub samples: usize,
}

impl PolynomialM {
    fn coef(&self) -> DMatrix<f64> {
        let p = self.coefficients.len();
        let nb = self.exponents.len();
        DMatrix::from_fn(p, nb, |i, j| self.coefficients[i][j])
    }

    fn features(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.exponents.len(), self.exponents.iter().map(|e| monomial(e, x)))
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        self.coef() * self.features(x)
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let q = x.len();
        let mut d = DMatrix::zeros(self.exponents.len(), q);
        for (r, e) in self.exponents.iter().enumerate() {
            d.row_mut(r).copy_from(&monomial_grad(e, x).transpose());
        }
        self.coef() * d
    }
}

/// Fits `M` in the span of monomials of degree `1..=degree` to
/// `M(φ(ξ)) - M(ξ) = k(ξ, h(ξ))` over the samples, with ridge `λ_r`.
pub fn solve_m_numeric(
    phi: &VectorMap,
    drive: &VectorMap,
    degree: usize,
    sampler: &CompactSetSampler,
    ridge: f64,
) -> Result<PolynomialM> {
    let q = phi.n_in();
    if drive.n_in() != q || sampler.dim() != q {
        return Err(Error::Dimension("φ, k∘h and the sample set differ in dimension".into()));
    }
    if degree == 0 || !(ridge >= 0.0) {
        return Err(Error::Precondition(
            "degree must be positive and ridge nonnegative".into(),
        ));
    }
    let exponents = monomial_exponents(q, degree);
    let nb = exponents.len();
    let p = drive.n_out();
    let pts = sampler.all();
    let ns = pts.len();
    let mut a = DMatrix::zeros(ns + nb, nb);
    let mut b = DMatrix::zeros(ns + nb, p);
    for (r, x) in pts.iter().enumerate() {
        let fx = phi.eval(x)?;
        for (c, e) in exponents.iter().enumerate() {
            a[(r, c)] = monomial(e, &fx) - monomial(e, x);
        }
        b.row_mut(r).copy_from(&drive.eval(x)?.transpose());
    }
    let sv = a.rows(0, ns).into_owned().svd(false, false).singular_values;
    let rank_deficient = ns < nb || sv.min() <= 1e-10 * sv.max().max(f64::MIN_POSITIVE);
    if rank_deficient {
        log::warn!("mapping fit is rank deficient; the ridge term selects the solution");
    }
    for c in 0..nb {
        a[(ns + c, c)] = ridge.sqrt();
    }
    let coef_t = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    let fitted = a.rows(0, ns) * &coef_t - b.rows(0, ns);
    let residual_rms = if ns == 0 {
        0.0
    } else {
        (fitted.norm_squared() / ns as f64).sqrt()
    };
    Ok(PolynomialM {
        coefficients: (0..p).map(|i| coef_t.column(i).iter().copied().collect()).collect(),
        exponents,
        degree,
        ridge,
        residual_rms,
        rank_deficient,
        samples: ns,
    })
}

/// The forwarding mapping in either form.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingM {
    Linear(Vec<Vec<f64>>),
    Polynomial(PolynomialM),
}

impl MappingM {
    pub fn linear(k: &DMatrix<f64>) -> Self {
        MappingM::Linear(k.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            MappingM::Linear(rows) => DVector::from_iterator(
                rows.len(),
                rows.iter().map(|r| r.iter().zip(x.iter()).map(|(a, b)| a * b).sum()),
            ),
            MappingM::Polynomial(p) => p.eval(x),
        }
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            MappingM::Linear(rows) => DMatrix::from_fn(rows.len(), x.len(), |i, j| rows[i][j]),
            MappingM::Polynomial(p) => p.jacobian(x),
        }
    }
}

/// `ξ ↦ k(ξ, h(ξ, 0))`.
pub fn integrator_drive(plant: &PlantModel, k: &GeneralizedIntegrator) -> VectorMap {
    let (pl, kk) = (plant.clone(), k.clone());
    VectorMap::try_new(plant.q, k.p, move |xi| {
        let y = pl.output(xi, &DVector::zeros(pl.m))?;
        kk.eval(xi, &y)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForwardingSettings {
    /// stopping tolerance on `|Δu|`
    pub tol: f64,
    /// search range for the bisection fallback
    pub u_max: f64,
    /// absolute tolerance of the adaptive Simpson rule
    pub quad_tol: f64,
    pub max_iter: usize,
}

impl Default for ForwardingSettings {
    fn default() -> Self {
        ForwardingSettings {
            tol: 1e-12,
            u_max: 10.0,
            quad_tol: 1e-10,
            max_iter: 100,
        }
    }
}

/// SISO forwarding feedback built from `W`, `M` and the nominal plant.
///
/// With `η = z - M(ξ)` and `V(ζ) = W(ξ) + η²`, the control solves
/// `u = -(1/u) ∫₀^u ∂V/∂ζ(ζ+(v)) G(ζ+(v), v) dv` where
/// `ξ+(v) = φ(ξ) + g(ξ,v)` and `η+(v) = z + k(ξ,h(ξ)) - M(ξ+(v))`.
#[derive(Debug, Clone)]
pub struct ForwardingController {
    pub plant: PlantModel,
    pub integrator: GeneralizedIntegrator,
    pub m: MappingM,
    pub w: QuadraticForm,
    pub settings: ForwardingSettings,
}

impl ForwardingController {
    pub fn new(
        plant: PlantModel,
        integrator: GeneralizedIntegrator,
        m: MappingM,
        w: QuadraticForm,
        settings: ForwardingSettings,
    ) -> Result<Self> {
        if plant.m != 1 || plant.p != 1 {
            return Err(Error::Precondition(format!(
                "forwarding is single-input single-output, got m = {}, p = {}",
                plant.m, plant.p
            )));
        }
        if integrator.q != plant.q || integrator.p != 1 || w.dim() != plant.q {
            return Err(Error::Dimension("integrator or W does not match the plant".into()));
        }
        let c = ForwardingController {
            plant,
            integrator,
            m,
            w,
            settings,
        };
        let u0 = c.control(&DVector::zeros(c.plant.q), 0.0)?;
        if u0.abs() > 1e-10 {
            return Err(Error::Synthesis(format!("α(0, 0) = {u0:e} is not zero")));
        }
        Ok(c)
    }

    /// Sampled `sup |M(φ(ξ)) - M(ξ) - k(ξ, h(ξ))|`.
    pub fn m_residual(&self, samples: &[DVector<f64>]) -> Result<f64> {
        let drive = integrator_drive(&self.plant, &self.integrator);
        let mut worst: f64 = 0.0;
        for xi in samples {
            let r = self.m.eval(&self.plant.drift(xi)?) - self.m.eval(xi) - drive.eval(xi)?;
            worst = worst.max(r.norm());
        }
        Ok(worst)
    }

    /// The integrand `∂V/∂ζ(ζ+(v)) G(ζ+(v), v)` at state `(ξ, z)`.
    pub fn integrand(&self, xi: &DVector<f64>, z: f64, v: f64) -> Result<f64> {
        let u = DVector::from_element(1, v);
        let y0 = self.plant.output(xi, &DVector::zeros(1))?;
        let z_next = z + self.integrator.eval(xi, &y0)?[0];
        let xi_next = self.plant.next_state(xi, &u)?;
        let eta_next = z_next - self.m.eval(&xi_next)[0];
        let (_, g_u) = self
            .plant
            .split(&self.plant.g.jacobian(&PlantModel::stack(&xi_next, &u))?);
        let g_u = g_u.column(0).into_owned();
        let m_xi = self.m.jacobian(&xi_next);
        let w_term = self.w.gradient(&xi_next).dot(&g_u);
        let eta_term = -2.0 * eta_next * (m_xi * &g_u)[0];
        Ok(w_term + eta_term)
    }

    /// `s(u) = u + (1/u) ∫₀^u (…) dv`, computed as `u + ∫₀¹ (…)(t u) dt` so
    /// that `u = 0` needs no special case.
    pub fn residual(&self, xi: &DVector<f64>, z: f64, u: f64) -> Result<f64> {
        let f = |t: f64| self.integrand(xi, z, t * u);
        Ok(u + adaptive_simpson(&f, 0.0, 1.0, self.settings.quad_tol)?)
    }

    /// `ᾱ(ξ, z - M(ξ))` in the original coordinates.
    pub fn control(&self, xi: &DVector<f64>, z: f64) -> Result<f64> {
        let s = &self.settings;
        let mut u = -self.integrand(xi, z, 0.0)?;
        let mut r = self.residual(xi, z, u)?;
        let mut beta = 1.0;
        for _ in 0..s.max_iter {
            if r == 0.0 {
                return Ok(u);
            }
            let mut accepted = None;
            while beta >= 1e-6 {
                let cand = u - beta * r;
                let rc = self.residual(xi, z, cand)?;
                if rc.abs() < r.abs() {
                    accepted = Some((cand, rc));
                    break;
                }
                beta *= 0.5;
            }
            let Some((cand, rc)) = accepted else { break };
            let du = (cand - u).abs();
            u = cand;
            r = rc;
            if du <= s.tol {
                return Ok(u);
            }
        }
        log::debug!("damped iteration stalled at u = {u}; bisecting");
        self.bisect(xi, z, u)
    }

    fn bisect(&self, xi: &DVector<f64>, z: f64, guess: f64) -> Result<f64> {
        let s = &self.settings;
        let n = 400;
        let grid: Vec<f64> = (0..=n)
            .map(|i| -s.u_max + 2.0 * s.u_max * i as f64 / n as f64)
            .collect();
        let vals = grid
            .iter()
            .map(|&u| self.residual(xi, z, u))
            .collect::<Result<Vec<_>>>()?;
        let mut best: Option<(f64, f64, f64, f64)> = None;
        for i in 0..n {
            let (a, b, fa, fb) = (grid[i], grid[i + 1], vals[i], vals[i + 1]);
            if fa == 0.0 {
                return Ok(a);
            }
            if fa.signum() != fb.signum() {
                let dist = (0.5 * (a + b) - guess).abs();
                if best.is_none_or(|(ba, bb, _, _)| dist < (0.5 * (ba + bb) - guess).abs()) {
                    best = Some((a, b, fa, fb));
                }
            }
        }
        let Some((mut a, mut b, mut fa, _)) = best else {
            return Err(Error::Synthesis(format!(
                "no sign change of the control residual in [-{0}, {0}] at ξ = {1:?}, z = {z}",
                s.u_max,
                xi.as_slice()
            )));
        };
        while b - a > s.tol {
            let mid = 0.5 * (a + b);
            if mid == a || mid == b {
                break;
            }
            let fm = self.residual(xi, z, mid)?;
            if fm == 0.0 {
                return Ok(mid);
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// The feedback as a map on `(ξ, z)`; its Jacobian uses finite differences.
    pub fn as_alpha(&self) -> VectorMap {
        let c = self.clone();
        let q = self.plant.q;
        VectorMap::try_new(q + 1, 1, move |x| {
            let xi = x.rows(0, q).into_owned();
            Ok(DVector::from_element(1, c.control(&xi, x[q])?))
        })
    }
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> Result<f64>>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return Ok(left + right + diff / 15.0);
        }
        Ok(rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
    let (fa, fb) = (f(a)?, f(b)?);
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{SamplingPlan, SetShape};
    use crate::expr::{InputLayout, VarKind};
    use approx::assert_abs_diff_eq;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn linear_mapping() {
        assert_eq!(solve_m_linear(&m1(0.5), &m1(1.0)).unwrap()[(0, 0)], -2.0);
        assert_eq!(solve_m_linear(&m1(0.5), &m1(0.0)).unwrap()[(0, 0)], 0.0);
        assert!(matches!(solve_m_linear(&m1(1.0), &m1(1.0)), Err(Error::Resonance(_))));
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let k = solve_m_linear(&a, &c).unwrap();
        assert!((&k * &a - &k - &c).norm() < 1e-14);
    }

    #[test]
    fn exponents_are_graded() {
        assert_eq!(monomial_exponents(1, 3), vec![vec![1], vec![2], vec![3]]);
        let e = monomial_exponents(2, 2);
        assert_eq!(e, vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    fn set() -> CompactSetSampler {
        CompactSetSampler::new(SetShape::interval(-1.0, 1.0), SamplingPlan::new(50, 2, 0)).unwrap()
    }

    fn states(src: &str) -> VectorMap {
        VectorMap::parse(InputLayout::states(1), &[src], &[]).unwrap()
    }

    #[test]
    fn numeric_mapping_fits() {
        let fit = solve_m_numeric(&states("0.5*x1"), &states("x1"), 1, &set(), 1e-12).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0][0], -2.0, epsilon = 1e-8);
        let fit = solve_m_numeric(&states("0.5*x1"), &states("x1^3"), 3, &set(), 1e-12).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0][2], -8.0 / 7.0, epsilon = 1e-8);
        assert!(fit.coefficients[0][0].abs() < 1e-8 && fit.coefficients[0][1].abs() < 1e-8);
        assert!(fit.residual_rms < 1e-10);
        let fit = solve_m_numeric(&states("0.5*x1"), &states("0*x1"), 2, &set(), 1e-8).unwrap();
        assert!(fit.coefficients[0].iter().all(|c| *c == 0.0));
    }

    #[test]
    fn polynomial_jacobian() {
        let fit = solve_m_numeric(&states("0.5*x1"), &states("x1^3"), 3, &set(), 1e-12).unwrap();
        let x = DVector::from_element(1, 0.7);
        let m = MappingM::Polynomial(fit);
        let h = 1e-6;
        let fd =
            (m.eval(&DVector::from_element(1, 0.7 + h))[0] - m.eval(&DVector::from_element(1, 0.7 - h))[0]) / (2.0 * h);
        assert_abs_diff_eq!(m.jacobian(&x)[(0, 0)], fd, epsilon = 1e-7);
    }

    fn linear_plant(g: &str) -> PlantModel {
        let xu = || InputLayout::new(vec![(VarKind::X, 1), (VarKind::U, 1)]);
        PlantModel::nominal(
            states("0.5*x1"),
            VectorMap::parse(xu(), &[g], &[]).unwrap(),
            VectorMap::parse(xu(), &["x1"], &[]).unwrap(),
        )
        .unwrap()
    }

    fn controller(g: &str) -> ForwardingController {
        ForwardingController::new(
            linear_plant(g),
            GeneralizedIntegrator::standard(1, 1),
            MappingM::linear(&m1(-2.0)),
            QuadraticForm::identity(1),
            ForwardingSettings::default(),
        )
        .unwrap()
    }

    #[test]
    fn forwarding_on_linear_plant() {
        let c = controller("u1");
        let x = |v: f64| DVector::from_element(1, v);
        assert_eq!(c.control(&x(0.0), 0.0).unwrap(), 0.0);
        // integrand ξ + 4η + 10v gives u = -(9ξ + 4z)/6
        assert_abs_diff_eq!(c.control(&x(0.1), 0.0).unwrap(), -0.15, epsilon = 1e-10);
        assert_abs_diff_eq!(
            c.control(&x(-0.3), 0.7).unwrap(),
            -(9.0 * -0.3 + 4.0 * 0.7) / 6.0,
            epsilon = 1e-10
        );
        assert_eq!(c.m_residual(&[x(0.3), x(-1.0)]).unwrap(), 0.0);
        let bisected = c.bisect(&x(0.1), 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(bisected, -0.15, epsilon = 1e-10);
    }

    #[test]
    fn inert_input_gives_zero_control() {
        let c = controller("0*u1");
        assert_eq!(c.control(&DVector::from_element(1, 0.4), -0.2).unwrap(), 0.0);
    }

    #[test]
    fn mimo_rejected() {
        let xu = || InputLayout::new(vec![(VarKind::X, 1), (VarKind::U, 2)]);
        let plant = PlantModel::new(
            states("0.5*x1"),
            VectorMap::parse(xu(), &["u1 + u2"], &[]).unwrap(),
            VectorMap::parse(xu(), &["x1"], &[]).unwrap(),
        )
        .unwrap();
        let r = ForwardingController::new(
            plant,
            GeneralizedIntegrator::standard(1, 1),
            MappingM::linear(&m1(-2.0)),
            QuadraticForm::identity(1),
            ForwardingSettings::default(),
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn simpson_integrates_polynomials() {
        let v = adaptive_simpson(&|t: f64| Ok(t.powi(4)), 0.0, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 6.4, epsilon = 1e-11);
        let v = adaptive_simpson(&|t: f64| Ok(t.sin()), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-11);
    }
}
