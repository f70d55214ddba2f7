use nalgebra::DVector;
use serde::Serialize;

/// The radial piecewise-linear Lyapunov function for `x+ = x/2` whose
/// sublevel sets are never path-connected.
///
/// With `i` the unique integer such that `2^i <= r < 2^(i+1)`, `r = |x|`:
/// `V = 6r - 5·2^i` for `r < 1.5·2^i`, else `V = -4r + 5·2^(i+1)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RadialPiecewiseV;

/// The shell index `i` with `2^i <= r < 2^(i+1)`, for `r > 0`.
pub fn shell_index(r: f64) -> i32 {
    debug_assert!(r > 0.0 && r.is_finite());
    let mut i = r.log2().floor() as i32;
    // guard against rounding in log2 near powers of two
    if pow2(i) > r {
        i -= 1;
    } else if pow2(i + 1) <= r {
        i += 1;
    }
    i
}

fn pow2(i: i32) -> f64 {
    2f64.powi(i)
}

impl RadialPiecewiseV {
    pub fn radial(&self, r: f64) -> f64 {
        let r = r.abs();
        if r == 0.0 {
            return 0.0;
        }
        let i = shell_index(r);
        let base = pow2(i);
        if r < 1.5 * base {
            6.0 * r - 5.0 * base
        } else {
            -4.0 * r + 10.0 * base
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.radial(x.norm())
    }

    /// `(r, V(r))` on `points` uniformly spaced radii over `[0, r_max]`.
    pub fn profile(&self, r_max: f64, points: usize) -> Vec<(f64, f64)> {
        let steps = points.saturating_sub(1).max(1);
        (0..points)
            .map(|k| {
                let r = r_max * k as f64 / steps as f64;
                (r, self.radial(r))
            })
            .collect()
    }
}

/// `V(x)` of the counterexample.
#[allow(non_snake_case)]
pub fn counterexample_V(x: &DVector<f64>) -> f64 {
    RadialPiecewiseV.value(x)
}

/// Result of the per-shell decrease check for `x+ = x/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecreaseCheck {
    pub radius: f64,
    pub shell: i32,
    /// 1 on `[2^i, 1.5·2^i)`, 2 on `[1.5·2^i, 2^(i+1))`
    pub branch: u8,
    pub decrease: f64,
    /// `-2^(i-1)` on branch 1, `-2^i` on branch 2
    pub bound: f64,
    pub strict: bool,
    pub holds: bool,
}

/// `V(x/2) - V(x)` together with the branch bound. The bound is attained
/// at `|x| = 2^i`, so `holds` uses `<=` and `strict` records `<`.
pub fn counterexample_decrease(x: &DVector<f64>) -> DecreaseCheck {
    let v = RadialPiecewiseV;
    let r = x.norm();
    let decrease = v.value(&(x * 0.5)) - v.value(x);
    let shell = if r > 0.0 { shell_index(r) } else { i32::MIN };
    let (branch, bound) = if r == 0.0 {
        (0, 0.0)
    } else if r < 1.5 * pow2(shell) {
        (1, -pow2(shell - 1))
    } else {
        (2, -pow2(shell))
    };
    DecreaseCheck {
        radius: r,
        shell,
        branch,
        decrease,
        bound,
        strict: decrease < bound,
        holds: decrease <= bound,
    }
}

/// Largest `|V(r⁻) - V(r⁺)|` across the branch joints `1.5·2^i` and `2^i`
/// for shells meeting `[lo, hi]`, probed at `r(1 ± 1e-13)`.
pub fn joint_jump(lo: f64, hi: f64) -> f64 {
    let v = RadialPiecewiseV;
    let mut worst: f64 = 0.0;
    for i in shell_index(lo)..=shell_index(hi) {
        for joint in [pow2(i), 1.5 * pow2(i)] {
            let h = joint * 1e-13;
            let left = v.radial(joint - h);
            let right = v.radial(joint);
            worst = worst.max((left - right).abs() - 6.0 * h);
        }
    }
    worst.max(0.0)
}

/// Largest excess of `|V(r_{k+1}) - V(r_k)|` over the Lipschitz bound
/// `6·(r_{k+1} - r_k)` on a uniform grid, combined with [`joint_jump`].
/// Zero for a continuous profile up to rounding.
pub fn grid_jump(lo: f64, hi: f64, points: usize) -> f64 {
    let v = RadialPiecewiseV;
    let steps = points.saturating_sub(1).max(1);
    let r = |k: usize| lo + (hi - lo) * k as f64 / steps as f64;
    let mut worst: f64 = 0.0;
    let mut prev = v.radial(r(0));
    for k in 1..=steps {
        let (r0, r1) = (r(k - 1), r(k));
        let cur = v.radial(r1);
        let slack = 6.0 * (r1 - r0) + 1e-14 * r1;
        worst = worst.max((cur - prev).abs() - slack);
        prev = cur;
    }
    worst.max(joint_jump(lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_jump_is_zero_for_continuous_profile() {
        assert!(grid_jump(2f64.powi(-6), 64.0, 100_000) < 1e-9);
    }

    fn x(r: f64) -> DVector<f64> {
        DVector::from_element(1, r)
    }

    #[test]
    fn values() {
        assert_eq!(counterexample_V(&x(0.0)), 0.0);
        assert_eq!(counterexample_V(&x(1.0)), 1.0);
        assert_eq!(counterexample_V(&x(1.5)), 4.0);
        assert_eq!(counterexample_V(&x(-1.5)), 4.0);
        assert_eq!(counterexample_V(&DVector::from_vec(vec![0.6, 0.8])), 1.0);
    }

    #[test]
    fn joint_values() {
        let v = RadialPiecewiseV;
        for i in -5..6 {
            let b = 2f64.powi(i);
            assert_eq!(v.radial(1.5 * b), 4.0 * b);
            assert_eq!(v.radial(2.0 * b), 2.0 * b);
            assert!((v.radial(1.5 * b * (1.0 - 1e-15)) - 4.0 * b).abs() < 1e-12 * b.max(1.0));
            assert!((v.radial(2.0 * b * (1.0 - 1e-16)) - 2.0 * b).abs() < 1e-12 * b.max(1.0));
        }
        assert!(joint_jump(2f64.powi(-6), 64.0) < 1e-9);
    }

    #[test]
    fn shell_index_at_powers() {
        assert_eq!(shell_index(1.0), 0);
        assert_eq!(shell_index(0.999_999_999_999), -1);
        assert_eq!(shell_index(2.0), 1);
        assert_eq!(shell_index(0.75), -1);
    }

    #[test]
    fn decrease_examples() {
        let d = counterexample_decrease(&x(1.0));
        assert_eq!(d.decrease, -0.5);
        assert_eq!(d.bound, -0.5);
        assert!(d.holds && !d.strict);
        let d = counterexample_decrease(&x(1.75));
        assert_eq!(d.decrease, -1.5);
        assert_eq!(d.bound, -1.0);
        assert!(d.strict);
        let d = counterexample_decrease(&x(0.5));
        assert_eq!(d.decrease, -0.25);
        assert!(d.holds);
    }

    #[test]
    fn profile_spacing() {
        let p = RadialPiecewiseV.profile(4.0, 5);
        assert_eq!(p.len(), 5);
        assert_eq!(p[1], (1.0, 1.0));
    }
}
