//! Small dense linear-algebra helpers. Vectors use the Euclidean norm and
//! matrices the spectral norm throughout the crate.

use nalgebra::{DMatrix, DVector};

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    DVector::from_vec(ev)
}

pub fn lambda_max_sym(a: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(a)
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn lambda_min_sym(a: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(a).iter().copied().fold(f64::INFINITY, f64::min)
}

/// `xᵀ P x`.
pub fn quad(p: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(p * x))
}

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).abs().max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn radius_of_rotation() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]);
        assert_abs_diff_eq!(spectral_radius(&r), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn norm_of_nonnormal() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert_abs_diff_eq!(spectral_norm(&a), 2.0, epsilon = 1e-14);
        assert_eq!(spectral_radius(&a), 0.0);
    }

    #[test]
    fn symmetric_extremes() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_abs_diff_eq!(lambda_max_sym(&a), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(lambda_min_sym(&a), 1.0, epsilon = 1e-14);
    }
}
