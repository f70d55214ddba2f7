use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::function::LyapunovFunction;
use super::radial::{sublevel_boundary_sampler, LevelSource};
use crate::dynamics::{unit_direction, CompactSetSampler, SamplingPlan, SetShape};
use crate::{Error, Result};

/// `{x : V(x) <= level}`.
#[derive(Debug, Clone)]
pub struct SublevelSet {
    pub v: LyapunovFunction,
    pub level: f64,
}

/// Rejection sampling gives up after this many draws per requested sample.
const MAX_DRAWS_PER_SAMPLE: usize = 64;

impl SublevelSet {
    pub fn new(v: LyapunovFunction, level: f64) -> Self {
        SublevelSet { v, level }
    }

    pub fn contains(&self, x: &DVector<f64>) -> Result<bool> {
        Ok(self.v.value(x)? <= self.level)
    }

    /// Points on `{V = level}`. Exact for quadratic `V`; ray bisection
    /// otherwise, skipping rays that do not cross exactly once.
    pub fn boundary(&self, n: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
        if self.level <= 0.0 {
            return Ok(vec![DVector::zeros(self.v.dim())]);
        }
        let source = match self.v.as_quadratic() {
            Some(q) => LevelSource::Quadratic(q),
            None => LevelSource::Function(&self.v),
        };
        Ok(sublevel_boundary_sampler(source, self.level, n, seed)?.sampler.all())
    }

    /// Interior samples followed by boundary samples. Generic `V` is
    /// sampled by rejection from the ball of its search radius.
    pub fn samples(&self, plan: SamplingPlan) -> Result<Vec<DVector<f64>>> {
        let n = self.v.dim();
        if let Some(q) = self.v.as_quadratic() {
            if self.level <= 0.0 {
                return Ok(vec![DVector::zeros(n)]);
            }
            return Ok(CompactSetSampler::new(q.sublevel(self.level), plan)?.all());
        }
        let mut pts = vec![DVector::zeros(n)];
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(2);
        let r = self.v.search_radius();
        let mut draws = 0;
        while pts.len() < plan.interior && draws < MAX_DRAWS_PER_SAMPLE * plan.interior {
            draws += 1;
            let x = unit_direction(n, &mut rng) * (r * rng.random::<f64>().powf(1.0 / n as f64));
            if self.contains(&x)? {
                pts.push(x);
            }
        }
        if pts.len() < plan.interior.min(2) {
            return Err(Error::Precondition(format!(
                "could not sample {{V <= {}}} inside radius {r}",
                self.level
            )));
        }
        pts.extend(self.boundary(plan.boundary, plan.seed)?);
        Ok(pts)
    }

    /// `{lower <= V <= upper}` samples; empty when `lower == upper`.
    pub fn annulus_samples(
        v: &LyapunovFunction,
        lower: f64,
        upper: f64,
        plan: SamplingPlan,
    ) -> Result<Vec<DVector<f64>>> {
        if !(0.0 < lower && lower <= upper) {
            return Err(Error::Precondition(format!(
                "annulus needs 0 < lower <= upper, got ({lower}, {upper})"
            )));
        }
        if lower == upper {
            return Ok(Vec::new());
        }
        if let Some(q) = v.as_quadratic() {
            let shape = SetShape::annulus(q.matrix().clone(), lower, upper);
            return Ok(CompactSetSampler::new(shape, plan)?.all());
        }
        let outer = SublevelSet::new(v.clone(), upper);
        let mut pts = Vec::new();
        for x in outer.samples(SamplingPlan::new(plan.interior, 0, plan.seed))? {
            if v.value(&x)? >= lower {
                pts.push(x);
            }
        }
        pts.extend(outer.boundary(plan.boundary / 2 + plan.boundary % 2, plan.seed)?);
        pts.extend(SublevelSet::new(v.clone(), lower).boundary(plan.boundary / 2, plan.seed ^ 1)?);
        Ok(pts)
    }
}
