use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::linalg::quad;
use crate::{Error, Result};

/// Compact sets the analyses sample over.
#[derive(Debug, Clone, PartialEq)]
pub enum SetShape {
    /// `|x - center| <= radius`
    Ball { center: DVector<f64>, radius: f64 },
    /// `lo <= x <= hi` componentwise
    Box { lo: DVector<f64>, hi: DVector<f64> },
    /// `(x-center)ᵀ Π (x-center) <= level`
    Ellipsoid {
        center: DVector<f64>,
        pi: DMatrix<f64>,
        level: f64,
    },
    /// `inner <= (x-center)ᵀ Π (x-center) <= outer`
    Annulus {
        center: DVector<f64>,
        pi: DMatrix<f64>,
        inner: f64,
        outer: f64,
    },
    /// An explicit finite set.
    Points(Vec<DVector<f64>>),
}

impl SetShape {
    pub fn ball(n: usize, radius: f64) -> Self {
        SetShape::Ball {
            center: DVector::zeros(n),
            radius,
        }
    }

    pub fn cube(n: usize, half_width: f64) -> Self {
        SetShape::Box {
            lo: DVector::from_element(n, -half_width),
            hi: DVector::from_element(n, half_width),
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        SetShape::Box {
            lo: DVector::from_element(1, lo),
            hi: DVector::from_element(1, hi),
        }
    }

    pub fn ellipsoid(pi: DMatrix<f64>, level: f64) -> Self {
        SetShape::Ellipsoid {
            center: DVector::zeros(pi.nrows()),
            pi,
            level,
        }
    }

    pub fn annulus(pi: DMatrix<f64>, inner: f64, outer: f64) -> Self {
        SetShape::Annulus {
            center: DVector::zeros(pi.nrows()),
            pi,
            inner,
            outer,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SetShape::Ball { center, .. } | SetShape::Ellipsoid { center, .. } | SetShape::Annulus { center, .. } => {
                center.len()
            }
            SetShape::Box { lo, .. } => lo.len(),
            SetShape::Points(p) => p.first().map_or(0, |x| x.len()),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        let bad = |msg: &str| Err(Error::Precondition(msg.to_string()));
        match self {
            SetShape::Ball { radius, .. } if !(*radius >= 0.0) => bad("ball radius must be >= 0"),
            SetShape::Box { lo, hi } => {
                if hi.len() != n {
                    return Err(Error::Dimension("box bounds differ in length".into()));
                }
                if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h)) {
                    return bad("box needs lo <= hi");
                }
                Ok(())
            }
            SetShape::Ellipsoid { pi, level, .. } => {
                check_pi(pi, n)?;
                if !(*level >= 0.0) {
                    return bad("ellipsoid level must be >= 0");
                }
                Ok(())
            }
            SetShape::Annulus { pi, inner, outer, .. } => {
                check_pi(pi, n)?;
                if !(0.0 <= *inner && inner <= outer) {
                    return bad("annulus needs 0 <= inner <= outer");
                }
                Ok(())
            }
            SetShape::Points(p) if p.iter().any(|x| x.len() != n) => {
                Err(Error::Dimension("points differ in dimension".into()))
            }
            _ => Ok(()),
        }
    }

    /// Membership with absolute slack `tol`.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            SetShape::Ball { center, radius } => (x - center).norm() <= radius + tol,
            SetShape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            SetShape::Ellipsoid { center, pi, level } => quad(pi, &(x - center)) <= level + tol,
            SetShape::Annulus {
                center,
                pi,
                inner,
                outer,
            } => {
                let v = quad(pi, &(x - center));
                v >= inner - tol && v <= outer + tol
            }
            SetShape::Points(p) => p.iter().any(|q| (x - q).norm() <= tol),
        }
    }

    /// Distance-like boundary residual: zero on the boundary.
    pub fn boundary_residual(&self, x: &DVector<f64>) -> f64 {
        match self {
            SetShape::Ball { center, radius } => ((x - center).norm() - radius).abs(),
            SetShape::Box { lo, hi } => {
                let inside = self.contains(x, 0.0);
                let face = x
                    .iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .map(|(v, (l, h))| (v - l).abs().min((v - h).abs()))
                    .fold(f64::INFINITY, f64::min);
                if inside {
                    face
                } else {
                    f64::INFINITY
                }
            }
            SetShape::Ellipsoid { center, pi, level } => (quad(pi, &(x - center)) - level).abs(),
            SetShape::Annulus {
                center,
                pi,
                inner,
                outer,
            } => {
                let v = quad(pi, &(x - center));
                (v - inner).abs().min((v - outer).abs())
            }
            SetShape::Points(_) => 0.0,
        }
    }
}

fn check_pi(pi: &DMatrix<f64>, n: usize) -> Result<()> {
    if pi.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Π has shape {:?}, expected ({n}, {n})",
            pi.shape()
        )));
    }
    if pi.clone().cholesky().is_none() {
        return Err(Error::Precondition("Π must be positive definite".into()));
    }
    Ok(())
}

/// Sample counts and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplingPlan {
    pub interior: usize,
    pub boundary: usize,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            interior: 4096,
            boundary: 1024,
            seed: 0,
        }
    }
}

impl SamplingPlan {
    pub fn new(interior: usize, boundary: usize, seed: u64) -> Self {
        SamplingPlan {
            interior,
            boundary,
            seed,
        }
    }

    pub fn boundary_only(boundary: usize, seed: u64) -> Self {
        SamplingPlan::new(0, boundary, seed)
    }
}

/// Deterministic sample streams over a [`SetShape`].
///
/// Interior samples start with the center; boundary samples start with the
/// `±` principal-axis points (balls, ellipsoids, annuli) or the corners
/// (boxes up to dimension 10). The rest come from ChaCha8 streams 0
/// (interior) and 1 (boundary) seeded by the plan.
#[derive(Debug, Clone)]
pub struct CompactSetSampler {
    shape: SetShape,
    plan: SamplingPlan,
}

impl CompactSetSampler {
    pub fn new(shape: SetShape, plan: SamplingPlan) -> Result<Self> {
        shape.validate()?;
        Ok(CompactSetSampler { shape, plan })
    }

    pub fn shape(&self) -> &SetShape {
        &self.shape
    }

    pub fn plan(&self) -> SamplingPlan {
        self.plan
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// Same set, different plan.
    pub fn with_plan(&self, plan: SamplingPlan) -> Self {
        CompactSetSampler {
            shape: self.shape.clone(),
            plan,
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.plan.seed);
        rng.set_stream(stream);
        rng
    }

    pub fn interior(&self) -> Vec<DVector<f64>> {
        let count = self.plan.interior;
        if let SetShape::Points(p) = &self.shape {
            return p.clone();
        }
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return out;
        }
        if let Some(c) = self.anchor_center() {
            out.push(c);
        }
        let mut rng = self.rng(0);
        while out.len() < count {
            out.push(self.draw_interior(&mut rng));
        }
        out
    }

    pub fn boundary(&self) -> Vec<DVector<f64>> {
        let count = self.plan.boundary;
        if let SetShape::Points(p) = &self.shape {
            return p.clone();
        }
        let mut out: Vec<_> = self.boundary_anchors().into_iter().take(count).collect();
        let mut rng = self.rng(1);
        while out.len() < count {
            out.push(self.draw_boundary(&mut rng));
        }
        out
    }

    /// Interior samples followed by boundary samples.
    pub fn all(&self) -> Vec<DVector<f64>> {
        let mut v = self.interior();
        if !matches!(self.shape, SetShape::Points(_)) {
            v.extend(self.boundary());
        }
        v
    }

    fn anchor_center(&self) -> Option<DVector<f64>> {
        match &self.shape {
            SetShape::Ball { center, .. } | SetShape::Ellipsoid { center, .. } => Some(center.clone()),
            SetShape::Box { lo, hi } => Some((lo + hi) * 0.5),
            SetShape::Annulus { center, pi, inner, .. } => {
                // a point on the inner shell
                let n = center.len();
                let mut e = DVector::zeros(n);
                if n > 0 {
                    e[0] = 1.0;
                }
                Some(center + scale_to_level(pi, &e, *inner))
            }
            SetShape::Points(_) => None,
        }
    }

    fn boundary_anchors(&self) -> Vec<DVector<f64>> {
        let n = self.dim();
        let axes = || {
            (0..n).flat_map(move |i| {
                [1.0, -1.0].into_iter().map(move |s| {
                    let mut e = DVector::zeros(n);
                    e[i] = s;
                    e
                })
            })
        };
        match &self.shape {
            SetShape::Ball { center, radius } => axes().map(|e| center + e * *radius).collect(),
            SetShape::Ellipsoid { center, pi, level } => {
                axes().map(|e| center + scale_to_level(pi, &e, *level)).collect()
            }
            SetShape::Annulus {
                center,
                pi,
                inner,
                outer,
            } => {
                let mut v: Vec<_> = axes().map(|e| center + scale_to_level(pi, &e, *outer)).collect();
                v.extend(axes().map(|e| center + scale_to_level(pi, &e, *inner)));
                v
            }
            SetShape::Box { lo, hi } if n <= 10 => (0..1usize << n)
                .map(|mask| DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }))
                .collect(),
            _ => Vec::new(),
        }
    }

    fn draw_interior(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let n = self.dim();
        match &self.shape {
            SetShape::Ball { center, radius } => {
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                center + unit_direction(n, rng) * r
            }
            SetShape::Box { lo, hi } => DVector::from_fn(n, |i, _| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()),
            SetShape::Ellipsoid { center, pi, level } => {
                // uniform in the ellipsoid: level fraction t^(2/n)
                let t = rng.random::<f64>().powf(2.0 / n as f64);
                center + scale_to_level(pi, &unit_direction(n, rng), level * t)
            }
            SetShape::Annulus {
                center,
                pi,
                inner,
                outer,
            } => {
                let h = n as f64 / 2.0;
                let (a, b) = (inner.powf(h), outer.powf(h));
                let t = (a + (b - a) * rng.random::<f64>()).powf(1.0 / h);
                center + scale_to_level(pi, &unit_direction(n, rng), t.clamp(*inner, *outer))
            }
            SetShape::Points(_) => unreachable!("finite sets are returned verbatim"),
        }
    }

    fn draw_boundary(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let n = self.dim();
        match &self.shape {
            SetShape::Ball { center, radius } => center + unit_direction(n, rng) * *radius,
            SetShape::Box { lo, hi } => {
                let mut x = DVector::from_fn(n, |i, _| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>());
                let i = rng.random_range(0..n);
                x[i] = if rng.random::<bool>() { hi[i] } else { lo[i] };
                x
            }
            SetShape::Ellipsoid { center, pi, level } => center + scale_to_level(pi, &unit_direction(n, rng), *level),
            SetShape::Annulus {
                center,
                pi,
                inner,
                outer,
            } => {
                let level = if rng.random::<bool>() { *outer } else { *inner };
                center + scale_to_level(pi, &unit_direction(n, rng), level)
            }
            SetShape::Points(_) => unreachable!("finite sets are returned verbatim"),
        }
    }
}

/// Uniformly distributed unit vector.
pub fn unit_direction(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Rescales `d` so that `xᵀΠx = level` exactly (up to rounding).
pub fn scale_to_level(pi: &DMatrix<f64>, d: &DVector<f64>, level: f64) -> DVector<f64> {
    let q = quad(pi, d);
    if level == 0.0 || q == 0.0 {
        return DVector::zeros(d.len());
    }
    d * (level / q).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(i: usize, b: usize) -> SamplingPlan {
        SamplingPlan::new(i, b, 7)
    }

    #[test]
    fn samples_stay_in_set() {
        let pi = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let shapes = vec![
            SetShape::ball(3, 2.0),
            SetShape::cube(2, 0.5),
            SetShape::ellipsoid(pi.clone(), 0.7),
            SetShape::annulus(pi, 0.2, 0.9),
        ];
        for shape in shapes {
            let s = CompactSetSampler::new(shape.clone(), plan(500, 200)).unwrap();
            assert_eq!(s.interior().len(), 500);
            assert_eq!(s.boundary().len(), 200);
            for x in s.all() {
                assert!(shape.contains(&x, 1e-10), "{shape:?} {x:?}");
            }
            for x in s.boundary() {
                assert!(shape.boundary_residual(&x) <= 1e-10, "{shape:?} {x:?}");
            }
        }
    }

    #[test]
    fn identical_seed_identical_stream() {
        let s = CompactSetSampler::new(SetShape::ball(2, 1.0), plan(100, 50)).unwrap();
        assert_eq!(s.all(), s.all());
        let t = s.with_plan(SamplingPlan::new(100, 50, 8));
        assert_ne!(s.all(), t.all());
    }

    #[test]
    fn unit_circle_four_points() {
        let s = CompactSetSampler::new(
            SetShape::ellipsoid(DMatrix::identity(2, 2), 1.0),
            SamplingPlan::boundary_only(4, 0),
        )
        .unwrap();
        let b = s.boundary();
        assert_eq!(b.len(), 4);
        for x in b {
            assert!((x.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ellipse_boundary_exact() {
        let pi = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let s = CompactSetSampler::new(SetShape::ellipsoid(pi, 1.0), plan(0, 64)).unwrap();
        for x in s.boundary() {
            assert!((4.0 * x[0] * x[0] + x[1] * x[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_sets_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(CompactSetSampler::new(SetShape::ellipsoid(bad, 1.0), plan(1, 1)).is_err());
        assert!(CompactSetSampler::new(SetShape::interval(1.0, 0.0), plan(1, 1)).is_err());
    }
}
