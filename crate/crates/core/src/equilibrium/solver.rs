use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::{SystemMap, BLOW_UP};
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub picard_steps: usize,
}

impl FixedPoint {
    pub fn point(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }
}

fn residual(f: &SystemMap, x: &DVector<f64>) -> Result<DVector<f64>> {
    match f.step(x) {
        Ok(y) => Ok(y - x),
        Err(Error::NonFinite(_)) => Err(Error::Divergence(BLOW_UP)),
        Err(e) => Err(e),
    }
}

/// Newton on `g(x) = f(x) - x`, halving the step until `|g|` decreases.
/// A Picard step `x <- f(x)` is taken instead when `I - ∂f/∂x` is singular
/// (smallest singular value below `1e-12`) or no damped step decreases `|g|`.
pub fn find_fixed_point(f: &SystemMap, x0: &DVector<f64>, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("initial guess is not finite".into()));
    }
    let n = f.dim();
    let mut x = x0.clone();
    let mut g = residual(f, &x)?;
    let (mut newton_steps, mut picard_steps) = (0, 0);
    for iter in 0..=max_iter {
        let gn = g.norm();
        if gn <= tol {
            return Ok(FixedPoint {
                x: x.as_slice().to_vec(),
                residual: gn,
                iterations: iter,
                newton_steps,
                picard_steps,
            });
        }
        if iter == max_iter {
            break;
        }
        let m = DMatrix::identity(n, n) - f.jacobian(&x)?;
        let smallest = m.clone().svd(false, false).singular_values.min();
        let mut accepted = None;
        if smallest > 1e-12 {
            if let Some(d) = m.lu().solve(&g) {
                let mut t = 1.0;
                while t > 1e-10 {
                    let cand = &x + &d * t;
                    if let Ok(gc) = residual(f, &cand) {
                        if gc.norm() < gn {
                            accepted = Some((cand, gc));
                            break;
                        }
                    }
                    t *= 0.5;
                }
            }
        }
        match accepted {
            Some((xn, gnext)) => {
                x = xn;
                g = gnext;
                newton_steps += 1;
            }
            None => {
                x = &x + &g;
                g = residual(f, &x)?;
                picard_steps += 1;
            }
        }
        if x.norm() > BLOW_UP {
            return Err(Error::Divergence(BLOW_UP));
        }
    }
    Err(Error::MaxIterations(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sys(src: &str) -> SystemMap {
        SystemMap::from_exprs(&[src], &[]).unwrap()
    }

    fn x(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    #[test]
    fn affine_map_fixed_point() {
        let fp = find_fixed_point(&sys("0.5*x1+0.01"), &x(0.0), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_abs_diff_eq!(fp.x[0], 0.02, epsilon = 1e-15);
        assert!(fp.residual <= DEFAULT_TOL);
    }

    #[test]
    fn unperturbed_origin() {
        let fp = find_fixed_point(&sys("0.5*x1"), &x(1.0), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(fp.x[0].abs() < 1e-12);
    }

    #[test]
    fn translation_has_no_fixed_point() {
        let r = find_fixed_point(&sys("x1+1"), &x(0.0), DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!(matches!(r, Err(Error::MaxIterations(_)) | Err(Error::Divergence(_))));
    }

    #[test]
    fn expansive_picard_diverges() {
        // Newton matrix I - 1 = 0 everywhere; Picard runs off to infinity
        let r = find_fixed_point(&sys("x1 + 1 + x1^2*0"), &x(1e11), DEFAULT_TOL, DEFAULT_MAX_ITER);
        assert!(r.is_err());
    }

    #[test]
    fn nonlinear_root_and_restart() {
        let f = sys("0.5*x1 + 0.1*sin(x1) + 0.05");
        let fp = find_fixed_point(&f, &x(3.0), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let again = find_fixed_point(&f, &fp.point(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(again.x, fp.x);
        assert_eq!(again.iterations, 0);
    }
}
