use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::map::SystemMap;
use super::sampler::CompactSetSampler;
use crate::linalg::spectral_norm;
use crate::{Error, Result};

/// A sampled supremum: a lower estimate of the true supremum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupEstimate {
    pub value: f64,
    pub argmax: Option<Vec<f64>>,
    pub samples: usize,
    pub seed: u64,
}

impl SupEstimate {
    pub fn label(&self) -> String {
        format!("sampled ({}, {})", self.samples, self.seed)
    }
}

/// Parallel max of `score` over `points`. Ties go to the lowest index, so
/// the result does not depend on thread scheduling.
pub fn sampled_max<F>(points: &[DVector<f64>], score: F) -> Result<(f64, Option<usize>)>
where
    F: Fn(&DVector<f64>) -> Result<f64> + Sync,
{
    let scores: Vec<f64> = points.par_iter().map(&score).collect::<Result<Vec<_>>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            return Err(Error::NonFinite(format!("NaN score at sample {i}")));
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    Ok(match best {
        Some((i, s)) => (s, Some(i)),
        None => (f64::NEG_INFINITY, None),
    })
}

/// Sampled supremum over all points of a sampler; empty sets give 0.
pub fn sup_over<F>(sampler: &CompactSetSampler, score: F) -> Result<SupEstimate>
where
    F: Fn(&DVector<f64>) -> Result<f64> + Sync,
{
    let pts = sampler.all();
    let (value, idx) = sampled_max(&pts, score)?;
    Ok(SupEstimate {
        value: if idx.is_some() { value } else { 0.0 },
        argmax: idx.map(|i| pts[i].as_slice().to_vec()),
        samples: pts.len(),
        seed: sampler.plan().seed,
    })
}

fn same_dim(f: &SystemMap, g: &SystemMap, set: &CompactSetSampler) -> Result<()> {
    if f.dim() != g.dim() || f.dim() != set.dim() {
        return Err(Error::Dimension(format!(
            "maps of dimension {} and {} over a set of dimension {}",
            f.dim(),
            g.dim(),
            set.dim()
        )));
    }
    Ok(())
}

/// `max |f̂(x) - f(x)|` over the samples.
pub fn model_distance(f: &SystemMap, f_hat: &SystemMap, set: &CompactSetSampler) -> Result<SupEstimate> {
    same_dim(f, f_hat, set)?;
    sup_over(set, |x| Ok((f_hat.step(x)? - f.step(x)?).norm()))
}

/// `max ‖∂f̂/∂x - ∂f/∂x‖₂` over the samples.
pub fn jacobian_distance(f: &SystemMap, f_hat: &SystemMap, set: &CompactSetSampler) -> Result<SupEstimate> {
    same_dim(f, f_hat, set)?;
    sup_over(set, |x| Ok(spectral_norm(&(f_hat.jacobian(x)? - f.jacobian(x)?))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{SamplingPlan, SetShape};
    use approx::assert_abs_diff_eq;

    fn sys(src: &str) -> SystemMap {
        SystemMap::from_exprs(&[src], &[]).unwrap()
    }

    fn unit_ball() -> CompactSetSampler {
        CompactSetSampler::new(SetShape::ball(1, 1.0), SamplingPlan::new(200, 20, 3)).unwrap()
    }

    #[test]
    fn model_distance_examples() {
        let d = model_distance(&sys("0.5*x1"), &sys("0.5*x1+0.01"), &unit_ball()).unwrap();
        assert_abs_diff_eq!(d.value, 0.01, epsilon = 1e-15);
        let d = model_distance(&sys("0.5*x1"), &sys("0.5*x1"), &unit_ball()).unwrap();
        assert_eq!(d.value, 0.0);
        let d = model_distance(&sys("0.5*x1"), &sys("0.55*x1"), &unit_ball()).unwrap();
        assert_abs_diff_eq!(d.value, 0.05, epsilon = 1e-15);
        assert_eq!(d.argmax.unwrap()[0].abs(), 1.0);
    }

    #[test]
    fn jacobian_distance_examples() {
        let d = jacobian_distance(&sys("0.5*x1"), &sys("0.55*x1"), &unit_ball()).unwrap();
        assert_abs_diff_eq!(d.value, 0.05, epsilon = 1e-15);
        let d = jacobian_distance(&sys("0.5*x1"), &sys("0.5*x1+0.01*sin(x1)"), &unit_ball()).unwrap();
        assert_abs_diff_eq!(d.value, 0.01, epsilon = 1e-15);
        assert_eq!(d.argmax.unwrap(), vec![0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let g = SystemMap::from_exprs(&["x1", "x2"], &[]).unwrap();
        assert!(model_distance(&sys("x1"), &g, &unit_ball()).is_err());
    }
}
