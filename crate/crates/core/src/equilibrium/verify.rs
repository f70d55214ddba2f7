use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::solver::{find_fixed_point, DEFAULT_MAX_ITER};
use crate::dynamics::{sampled_max, CompactSetSampler, SamplingPlan, SystemMap};
use crate::linalg::spectral_radius;
use crate::lyapunov::{LyapunovFunction, QuadraticForm, SublevelSet};
use crate::{Error, Result};

/// Forward invariance of `{xᵀΠx <= ε/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub pass: bool,
    /// `max f̂(x)ᵀΠf̂(x) / (ε/2)`
    pub worst_ratio: f64,
    pub witness: Option<Vec<f64>>,
    pub boundary_samples: usize,
    pub interior_samples: usize,
    pub seed: u64,
}

/// Samples the boundary and interior of `{xᵀΠx <= ε/2}` and checks
/// `f̂(x)ᵀΠf̂(x) <= ε/2`.
pub fn verify_invariance(
    f_hat: &SystemMap,
    pi: &QuadraticForm,
    epsilon: f64,
    plan: SamplingPlan,
) -> Result<InvarianceReport> {
    if pi.dim() != f_hat.dim() {
        return Err(Error::Dimension("Π and f̂ differ in dimension".into()));
    }
    let half = epsilon / 2.0;
    let pts = CompactSetSampler::new(pi.sublevel(half), plan)?.all();
    let (worst, idx) = sampled_max(&pts, |x| Ok(pi.value(&f_hat.step(x)?) / half))?;
    let pass = worst <= 1.0;
    Ok(InvarianceReport {
        pass,
        worst_ratio: worst,
        witness: idx.filter(|_| !pass).map(|i| pts[i].as_slice().to_vec()),
        boundary_samples: plan.boundary,
        interior_samples: plan.interior,
        seed: plan.seed,
    })
}

/// Slack on the contraction ratio test.
pub const CONTRACTION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub pass: bool,
    /// `max (f̂(x)-x_e)ᵀΠ(f̂(x)-x_e) / x̃ᵀΠx̃`
    pub worst_ratio: f64,
    /// `(3+a)/4`
    pub bound: f64,
    pub spectral_radius: f64,
    pub witness: Option<Vec<f64>>,
    pub samples: usize,
    pub seed: u64,
}

/// Checks the quadratic contraction `V̂(x̃+) <= ((3+a)/4) V̂(x̃)` with
/// `x̃ = x - x_e` for sampled `x ∈ {xᵀΠx <= ε}`, and `ρ(∂f̂/∂x(x_e)) < 1`.
/// The ratio test passes up to [`CONTRACTION_SLACK`].
pub fn verify_local_contraction(
    f_hat: &SystemMap,
    x_e: &DVector<f64>,
    pi: &QuadraticForm,
    a: f64,
    epsilon: f64,
    plan: SamplingPlan,
) -> Result<ContractionReport> {
    if pi.dim() != f_hat.dim() || x_e.len() != f_hat.dim() {
        return Err(Error::Dimension("Π, x_e and f̂ differ in dimension".into()));
    }
    let pts = CompactSetSampler::new(pi.sublevel(epsilon), plan)?.all();
    let (worst, idx) = sampled_max(&pts, |x| {
        let dx = x - x_e;
        let den = pi.value(&dx);
        if den < 1e-24 {
            return Ok(0.0);
        }
        Ok(pi.value(&(f_hat.step(x)? - x_e)) / den)
    })?;
    let bound = (3.0 + a) / 4.0;
    let rho = spectral_radius(&f_hat.jacobian(x_e)?);
    let pass = worst <= bound + CONTRACTION_SLACK && rho < 1.0;
    Ok(ContractionReport {
        pass,
        worst_ratio: worst.max(0.0),
        bound,
        spectral_radius: rho,
        witness: idx.filter(|_| !pass).map(|i| pts[i].as_slice().to_vec()),
        samples: pts.len(),
        seed: plan.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub pass: bool,
    /// no annulus to check
    pub vacuous: bool,
    /// sampled `max V(f̂(x)) - ρ̃V(x)` on the annulus, negative when it holds
    pub worst_decrease: f64,
    pub decrease_witness: Option<Vec<f64>>,
    /// distinct fixed points reached from annulus seeds
    pub fixed_points: Vec<Vec<f64>>,
    /// fixed points inside `{V <= c̄}` but outside `{V <= c̲}`
    pub misplaced: Vec<Vec<f64>>,
    pub seeds: usize,
    pub note: String,
}

/// Verifies that `f̂` has no fixed point in `{c̲ <= V <= c̄}`: sampled
/// `V(f̂(x)) < ρ̃V(x)` there, and Newton runs from annulus seeds converge only
/// to points of `{V <= c̲}` (or leave `{V <= c̄}` entirely).
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_annulus(
    f_hat: &SystemMap,
    v: &LyapunovFunction,
    c_lower: f64,
    c_upper: f64,
    rho_tilde: f64,
    plan: SamplingPlan,
    seeds: usize,
    tol: f64,
) -> Result<UniquenessReport> {
    let note =
        "uniqueness holds only on the annulus; several equilibria inside {V <= c_lower} are not excluded".to_string();
    let annulus = SublevelSet::annulus_samples(v, c_lower, c_upper, plan)?;
    if annulus.is_empty() {
        return Ok(UniquenessReport {
            pass: true,
            vacuous: true,
            worst_decrease: f64::NEG_INFINITY,
            decrease_witness: None,
            fixed_points: Vec::new(),
            misplaced: Vec::new(),
            seeds: 0,
            note,
        });
    }
    let (worst, idx) = sampled_max(&annulus, |x| Ok(v.value(&f_hat.step(x)?)? - rho_tilde * v.value(x)?))?;
    let decrease_ok = worst < 0.0;

    let seed_pts = SublevelSet::annulus_samples(v, c_lower, c_upper, SamplingPlan::new(seeds, 0, plan.seed ^ 0x5eed))?;
    let seed_pts: Vec<_> = seed_pts.into_iter().take(seeds).collect();
    let found: Vec<Option<DVector<f64>>> = seed_pts
        .par_iter()
        .map(|x0| {
            find_fixed_point(f_hat, x0, tol, DEFAULT_MAX_ITER)
                .ok()
                .map(|fp| fp.point())
        })
        .collect();
    let mut distinct: Vec<DVector<f64>> = Vec::new();
    for p in found.into_iter().flatten() {
        if distinct.iter().all(|q| (q - &p).norm() > 10.0 * tol) {
            distinct.push(p);
        }
    }
    let mut misplaced = Vec::new();
    for p in &distinct {
        let val = v.value(p)?;
        if val > c_lower && val <= c_upper {
            misplaced.push(p.as_slice().to_vec());
        }
    }
    Ok(UniquenessReport {
        pass: decrease_ok && misplaced.is_empty(),
        vacuous: false,
        worst_decrease: worst,
        decrease_witness: idx.filter(|_| !decrease_ok).map(|i| annulus[i].as_slice().to_vec()),
        fixed_points: distinct.iter().map(|p| p.as_slice().to_vec()).collect(),
        misplaced,
        seeds: seed_pts.len(),
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinReport {
    pub fraction: f64,
    pub converged: usize,
    pub total: usize,
    /// largest final distance `|x_N - x_e|` and its starting point
    pub worst_distance: f64,
    pub worst_start: Option<Vec<f64>>,
    /// up to ten non-convergent starting points
    pub witnesses: Vec<Vec<f64>>,
    pub steps: usize,
    pub tol: f64,
    pub label: String,
}

/// Simulates `steps` iterations from every sample of `c_bar` and counts
/// trajectories ending within `tol` of `x_e`. Sampled evidence only.
pub fn basin_check(
    f_hat: &SystemMap,
    x_e: &DVector<f64>,
    c_bar: &CompactSetSampler,
    steps: usize,
    tol: f64,
) -> Result<BasinReport> {
    let starts = c_bar.all();
    let dists = starts
        .par_iter()
        .map(|x0| {
            let t = f_hat.simulate(x0, steps)?;
            Ok(if t.blow_up {
                f64::INFINITY
            } else {
                (t.last() - x_e).norm()
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut converged = 0;
    let mut worst = (0.0, None);
    let mut witnesses = Vec::new();
    for (x0, d) in starts.iter().zip(&dists) {
        if *d <= tol {
            converged += 1;
        } else if witnesses.len() < 10 {
            witnesses.push(x0.as_slice().to_vec());
        }
        if *d > worst.0 || worst.1.is_none() {
            worst = (*d, Some(x0.as_slice().to_vec()));
        }
    }
    let total = starts.len();
    Ok(BasinReport {
        fraction: if total == 0 {
            0.0
        } else {
            converged as f64 / total as f64
        },
        converged,
        total,
        worst_distance: worst.0,
        worst_start: worst.1,
        witnesses,
        steps,
        tol,
        label: format!("sampled evidence ({total}, {})", c_bar.plan().seed),
    })
}
