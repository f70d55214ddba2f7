use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{unit_direction, CompactSetSampler, SamplingPlan, SetShape};
use crate::{Error, Result};

use super::function::LyapunovFunction;
use super::quadratic::QuadraticForm;

/// Maximal radius intervals where a radial `V` is at most `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialComponents {
    pub level: f64,
    pub count: usize,
    pub intervals: Vec<(f64, f64)>,
    /// For `n >= 2`, the sublevel set is path-connected iff this holds.
    pub path_connected: bool,
}

const RADIAL_TOL: f64 = 1e-9;
const RADIAL_DIRECTIONS: usize = 16;
const RADIAL_PROBES: usize = 64;
const REFINE_STEPS: usize = 80;

/// Verifies that `v` depends on `|x|` only, on seeded directions and radii
/// in `(0, r_max]`. Returns the worst direction dependence.
pub fn check_radial<F>(v: &F, dim: usize, r_max: f64) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ad1a1);
    let e1 = axis(dim);
    let dirs: Vec<DVector<f64>> = if dim == 1 {
        vec![-e1.clone()]
    } else {
        (0..RADIAL_DIRECTIONS).map(|_| unit_direction(dim, &mut rng)).collect()
    };
    let mut worst: f64 = 0.0;
    for k in 1..=RADIAL_PROBES {
        // irrational-ish fractions avoid landing only on special radii
        let r = r_max * ((k as f64 * 0.618_033_988_749_895) % 1.0).max(1.0 / RADIAL_PROBES as f64);
        let reference = v(&(&e1 * r));
        for d in &dirs {
            worst = worst.max((v(&(d * r)) - reference).abs());
        }
    }
    if worst > RADIAL_TOL {
        return Err(Error::NonRadial(worst));
    }
    Ok(worst)
}

fn axis(dim: usize) -> DVector<f64> {
    let mut e = DVector::zeros(dim);
    e[0] = 1.0;
    e
}

/// Scans `r ∈ [0, r_max]` on `grid` uniform steps and returns the maximal
/// intervals where `V(r e1) <= c`. Interval ends are refined by bisection
/// between the neighbouring grid points.
pub fn radial_components<F>(v: &F, dim: usize, c: f64, r_max: f64, grid: usize) -> Result<RadialComponents>
where
    F: Fn(&DVector<f64>) -> f64,
{
    if dim == 0 || grid == 0 || !(r_max > 0.0) {
        return Err(Error::Precondition("need dim >= 1, grid >= 1 and r_max > 0".into()));
    }
    check_radial(v, dim, r_max)?;
    let e1 = axis(dim);
    let g = |r: f64| v(&(&e1 * r));
    let inside = |r: f64| g(r) <= c;
    let r_at = |k: usize| r_max * k as f64 / grid as f64;

    // boundary between an inside point `a` and an outside point `b`
    let refine = |mut a: f64, mut b: f64| {
        for _ in 0..REFINE_STEPS {
            let mid = 0.5 * (a + b);
            if mid == a || mid == b {
                break;
            }
            if inside(mid) {
                a = mid;
            } else {
                b = mid;
            }
        }
        a
    };

    let mut intervals = Vec::new();
    let mut start: Option<f64> = None;
    let mut prev_in = false;
    for k in 0..=grid {
        let r = r_at(k);
        let now_in = inside(r);
        match (prev_in, now_in) {
            (false, true) => {
                start = Some(if k == 0 { 0.0 } else { refine(r, r_at(k - 1)) });
            }
            (true, false) => {
                let s = start.take().expect("interval opened");
                intervals.push((s, refine(r_at(k - 1), r)));
            }
            _ => {}
        }
        prev_in = now_in;
    }
    if let Some(s) = start {
        intervals.push((s, r_max));
    }
    let count = intervals.len();
    let path_connected = count == 1 && intervals[0].0 == 0.0;
    Ok(RadialComponents {
        level: c,
        count,
        intervals,
        path_connected,
    })
}

/// Outcome of boundary sampling for one direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionFailure {
    pub direction: Vec<f64>,
    /// every level crossing found along the ray
    pub roots: Vec<f64>,
    pub reason: String,
}

/// Points on `{V = c}` plus the directions where the ray does not cross the
/// level exactly once.
#[derive(Debug, Clone)]
pub struct BoundarySamples {
    pub sampler: CompactSetSampler,
    pub failures: Vec<DirectionFailure>,
}

/// What to sample the level set of.
pub enum LevelSource<'a> {
    Quadratic(&'a QuadraticForm),
    Function(&'a LyapunovFunction),
}

const RAY_GRID: usize = 1024;

/// Samples `{V = c}`. Quadratic forms use direction normalization, which is
/// exact. Generic functions bisect each ray up to `|V(x) - c| <= 1e-10`,
/// scanning `[0, search_radius]` for crossings first.
pub fn sublevel_boundary_sampler(source: LevelSource<'_>, c: f64, n: usize, seed: u64) -> Result<BoundarySamples> {
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("level c = {c} must be positive")));
    }
    match source {
        LevelSource::Quadratic(pi) => {
            let sampler = CompactSetSampler::new(pi.sublevel(c), SamplingPlan::boundary_only(n, seed))?;
            let pts = sampler.boundary();
            Ok(BoundarySamples {
                sampler: CompactSetSampler::new(SetShape::Points(pts), sampler.plan())?,
                failures: Vec::new(),
            })
        }
        LevelSource::Function(v) => {
            let dim = v.dim();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut points = Vec::new();
            let mut failures = Vec::new();
            let r_max = v.search_radius();
            for k in 0..n {
                let d = if k < 2 * dim {
                    let mut e = DVector::zeros(dim);
                    e[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                    e
                } else {
                    unit_direction(dim, &mut rng)
                };
                let roots = ray_roots(v, &d, c, r_max)?;
                match roots.as_slice() {
                    [r] => points.push(&d * *r),
                    [] => failures.push(DirectionFailure {
                        direction: d.as_slice().to_vec(),
                        roots,
                        reason: format!("no crossing of level {c} within radius {r_max}"),
                    }),
                    _ => failures.push(DirectionFailure {
                        direction: d.as_slice().to_vec(),
                        roots,
                        reason: "multiple crossings: sublevel set is not star-shaped".into(),
                    }),
                }
            }
            let plan = SamplingPlan::boundary_only(points.len(), seed);
            Ok(BoundarySamples {
                sampler: CompactSetSampler::new(SetShape::Points(points), plan)?,
                failures,
            })
        }
    }
}

/// Radii where `r ↦ V(r d)` crosses `c` from below, refined to
/// `|V - c| <= 1e-10`.
fn ray_roots(v: &LyapunovFunction, d: &DVector<f64>, c: f64, r_max: f64) -> Result<Vec<f64>> {
    let g = |r: f64| -> Result<f64> { Ok(v.value(&(d * r))? - c) };
    let mut roots = Vec::new();
    let mut prev_r = 0.0;
    let mut prev = g(0.0)?;
    for k in 1..=RAY_GRID {
        let r = r_max * k as f64 / RAY_GRID as f64;
        let cur = g(r)?;
        if prev <= 0.0 && cur > 0.0 {
            let (mut a, mut b) = (prev_r, r);
            let mut ga = prev;
            for _ in 0..200 {
                if ga.abs() <= 1e-10 {
                    break;
                }
                let mid = 0.5 * (a + b);
                if mid == a || mid == b {
                    break;
                }
                let gm = g(mid)?;
                if gm <= 0.0 {
                    a = mid;
                    ga = gm;
                } else {
                    b = mid;
                }
            }
            roots.push(a);
        }
        prev = cur;
        prev_r = r;
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::RadialPiecewiseV;
    use nalgebra::DMatrix;

    fn cex(x: &DVector<f64>) -> f64 {
        RadialPiecewiseV.value(x)
    }

    #[test]
    fn counterexample_level_1_2() {
        let rc = radial_components(&cex, 2, 1.2, 4.0, 4096).unwrap();
        assert_eq!(rc.count, 2);
        let (a, b) = (rc.intervals[0], rc.intervals[1]);
        assert_eq!(a.0, 0.0);
        assert!((a.1 - 0.616_666_666_666_7).abs() < 1e-9);
        assert!((b.0 - 0.95).abs() < 1e-9);
        assert!((b.1 - 1.033_333_333_333_3).abs() < 1e-9);
        assert!(!rc.path_connected);
    }

    #[test]
    fn counterexample_level_2_5() {
        let rc = radial_components(&cex, 2, 2.5, 4.0, 4096).unwrap();
        assert_eq!(rc.count, 2);
        assert!((rc.intervals[1].0 - 1.875).abs() < 1e-9);
        assert!((rc.intervals[1].1 - 2.083_333_333_333_3).abs() < 1e-9);
    }

    #[test]
    fn quadratic_is_connected() {
        let rc = radial_components(&|x: &DVector<f64>| x.norm_squared(), 2, 1.0, 4.0, 1024).unwrap();
        assert_eq!(rc.count, 1);
        assert!((rc.intervals[0].1 - 1.0).abs() < 1e-12);
        assert!(rc.path_connected);
    }

    #[test]
    fn non_radial_rejected() {
        let r = radial_components(&|x: &DVector<f64>| x[0] * x[0] + 2.0 * x[1] * x[1], 2, 1.0, 2.0, 64);
        assert!(matches!(r, Err(Error::NonRadial(_))));
    }

    #[test]
    fn quadratic_boundary_samples() {
        let pi = QuadraticForm::identity(2);
        let b = sublevel_boundary_sampler(LevelSource::Quadratic(&pi), 1.0, 4, 0).unwrap();
        let pts = b.sampler.all();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|x| (x.norm() - 1.0).abs() < 1e-15));
        let pi = QuadraticForm::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]))).unwrap();
        let b = sublevel_boundary_sampler(LevelSource::Quadratic(&pi), 1.0, 50, 3).unwrap();
        for x in b.sampler.all() {
            assert!((4.0 * x[0] * x[0] + x[1] * x[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generic_boundary_by_bisection() {
        let v = LyapunovFunction::new(2, |x| Ok(x.norm_squared() + x[0].powi(4)), 0.5).with_search_radius(3.0);
        let b = sublevel_boundary_sampler(LevelSource::Function(&v), 1.0, 32, 1).unwrap();
        assert!(b.failures.is_empty());
        for x in b.sampler.all() {
            assert!((v.value(&x).unwrap() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn counterexample_boundary_flags_multiple_roots() {
        let v = LyapunovFunction::new(2, |x| Ok(RadialPiecewiseV.value(x)), 0.5).with_search_radius(4.0);
        let b = sublevel_boundary_sampler(LevelSource::Function(&v), 1.2, 8, 1).unwrap();
        assert_eq!(b.failures.len(), 8);
        let first = b.failures[0].roots[0];
        assert!((first - 0.616_666_666_666_7).abs() < 1e-9);
    }
}
