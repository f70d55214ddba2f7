use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{unit_direction, SamplingPlan, SystemMap};
use crate::lyapunov::{LyapunovFunction, SublevelSet};
use crate::{Error, Result};

/// The existence budget built from the `p`/`q` functions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop1Budget {
    pub c_upper: f64,
    pub c_lower: f64,
    pub rho: f64,
    pub rho_tilde: f64,
    pub delta: f64,
    pub p_at_delta: f64,
    pub q_at_delta: f64,
    /// `"p"` or `"q"`: which function turns nonnegative just above `delta`
    pub binding: String,
    /// sampled `max V(f(x)) - ρV(x)` on the upper sublevel set
    pub certificate_margin: f64,
    pub samples_upper: usize,
    pub samples_annulus: usize,
    pub directions: usize,
    pub seed: u64,
}

const GRID_DIRECTIONS: usize = 64;
const BISECTION_STEPS: usize = 60;
const MAX_DOUBLINGS: usize = 40;

/// Unit directions for the inner maximization over `|v| = 1`: `±1` in one
/// dimension, 64 equally spaced angles in two, and `±e_i` followed by seeded
/// random directions (64 in total) above.
pub fn direction_grid(n: usize, seed: u64) -> Vec<DVector<f64>> {
    match n {
        0 => Vec::new(),
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..GRID_DIRECTIONS)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / GRID_DIRECTIONS as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        _ => {
            let mut out = Vec::new();
            for i in 0..n {
                for s in [1.0, -1.0] {
                    let mut e = DVector::zeros(n);
                    e[i] = s;
                    out.push(e);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(3);
            while out.len() < GRID_DIRECTIONS {
                out.push(unit_direction(n, &mut rng));
            }
            out
        }
    }
}

struct Sample {
    y: DVector<f64>,
    vx: f64,
    extra: Vec<DVector<f64>>,
}

/// Precomputed samples for evaluating `p` and `q` at many `s`.
pub struct Prop1Problem<'a> {
    v: &'a LyapunovFunction,
    c_upper: f64,
    rho_tilde: f64,
    upper: Vec<Sample>,
    annulus: Vec<Sample>,
    dirs: Vec<DVector<f64>>,
    certificate_margin: f64,
    seed: u64,
}

impl<'a> Prop1Problem<'a> {
    pub fn new(
        v: &'a LyapunovFunction,
        f: &SystemMap,
        c_upper: f64,
        c_lower: f64,
        rho_tilde: f64,
        plan: SamplingPlan,
    ) -> Result<Self> {
        let rho = v.rho();
        if !(c_lower > 0.0 && c_lower <= c_upper) {
            return Err(Error::Precondition(format!(
                "levels must satisfy 0 < c_lower <= c_upper, got ({c_lower}, {c_upper})"
            )));
        }
        if !(rho < rho_tilde && rho_tilde < 1.0) {
            return Err(Error::Precondition(format!(
                "slack must satisfy ρ < ρ̃ < 1, got ρ = {rho}, ρ̃ = {rho_tilde}"
            )));
        }
        if v.dim() != f.dim() {
            return Err(Error::Dimension("V and f differ in dimension".into()));
        }
        let make = |x: &DVector<f64>| -> Result<Sample> {
            let y = f.step(x)?;
            let vx = v.value(x)?;
            let g = match v.as_quadratic() {
                Some(q) => Some(q.matrix() * &y),
                None => v.gradient(&y).ok(),
            };
            let extra = match g {
                Some(g) if g.norm() > 1e-300 => {
                    let d = &g / g.norm();
                    vec![d.clone(), -d]
                }
                _ => Vec::new(),
            };
            Ok(Sample { y, vx, extra })
        };
        let upper_pts = SublevelSet::new(v.clone(), c_upper).samples(plan)?;
        let upper = upper_pts.par_iter().map(make).collect::<Result<Vec<_>>>()?;
        let mut certificate_margin = f64::NEG_INFINITY;
        for (x, s) in upper_pts.iter().zip(&upper) {
            let vy = v.value(&s.y)?;
            let margin = vy - rho * s.vx;
            certificate_margin = certificate_margin.max(margin);
            if margin > 1e-12 * s.vx.max(1.0) {
                return Err(Error::CertificateViolated {
                    detail: format!("V(f(x)) = {vy} exceeds ρV(x) = {}", rho * s.vx),
                    witness: x.as_slice().to_vec(),
                });
            }
        }
        let ann_pts = SublevelSet::annulus_samples(v, c_lower, c_upper, plan)?;
        let annulus = ann_pts.par_iter().map(make).collect::<Result<Vec<_>>>()?;
        Ok(Prop1Problem {
            v,
            c_upper,
            rho_tilde,
            upper,
            annulus,
            dirs: direction_grid(v.dim(), plan.seed),
            certificate_margin,
            seed: plan.seed,
        })
    }

    fn worst(&self, s: &Sample, step: f64) -> Result<f64> {
        let mut best = self.v.value(&s.y)?;
        if step == 0.0 {
            return Ok(best);
        }
        for d in self.dirs.iter().chain(&s.extra) {
            best = best.max(self.v.value(&(&s.y + d * step))?);
        }
        Ok(best)
    }

    /// `p(s) = max V(f(x) + s v) - c̄` over sampled `x ∈ {V <= c̄}`, `|v| = 1`.
    pub fn p(&self, step: f64) -> Result<f64> {
        let vals = self
            .upper
            .par_iter()
            .map(|s| self.worst(s, step))
            .collect::<Result<Vec<_>>>()?;
        Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max) - self.c_upper)
    }

    /// `q(s) = max V(f(x) + s v) - ρ̃V(x)` over the sampled annulus;
    /// `-inf` when the annulus is empty.
    pub fn q(&self, step: f64) -> Result<f64> {
        let vals = self
            .annulus
            .par_iter()
            .map(|s| Ok(self.worst(s, step)? - self.rho_tilde * s.vx))
            .collect::<Result<Vec<_>>>()?;
        Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    fn feasible(&self, step: f64) -> Result<bool> {
        Ok(self.p(step)? < 0.0 && self.q(step)? < 0.0)
    }
}

/// Evaluates `(p(s), q(s))` on fresh samples.
pub fn prop1_pq(
    v: &LyapunovFunction,
    f: &SystemMap,
    c_upper: f64,
    c_lower: f64,
    rho_tilde: f64,
    plan: SamplingPlan,
    step: f64,
) -> Result<(f64, f64)> {
    let problem = Prop1Problem::new(v, f, c_upper, c_lower, rho_tilde, plan)?;
    Ok((problem.p(step)?, problem.q(step)?))
}

/// Largest `s` (60-step bisection) with sampled `p(s) < 0` and `q(s) < 0`.
pub fn prop1_delta(
    v: &LyapunovFunction,
    f: &SystemMap,
    c_upper: f64,
    c_lower: f64,
    rho_tilde: f64,
    plan: SamplingPlan,
) -> Result<Prop1Budget> {
    let problem = Prop1Problem::new(v, f, c_upper, c_lower, rho_tilde, plan)?;
    if !problem.feasible(0.0)? {
        return Err(Error::BudgetCollapsed("p(0) or q(0) is not negative".into()));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while problem.feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Precondition(
                "p and q stay negative for every tested s; V must grow without bound".into(),
            ));
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if problem.feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(Error::BudgetCollapsed("no positive s keeps p and q negative".into()));
    }
    let binding = if problem.p(hi)? >= 0.0 { "p" } else { "q" };
    Ok(Prop1Budget {
        c_upper,
        c_lower,
        rho: v.rho(),
        rho_tilde,
        delta: lo,
        p_at_delta: problem.p(lo)?,
        q_at_delta: problem.q(lo)?,
        binding: binding.to_string(),
        certificate_margin: problem.certificate_margin,
        samples_upper: problem.upper.len(),
        samples_annulus: problem.annulus.len(),
        directions: problem.dirs.len(),
        seed: problem.seed,
    })
}
