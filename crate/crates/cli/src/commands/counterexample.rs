use serde::Serialize;

use totalstab::dynamics::{CompactSetSampler, SamplingPlan, SetShape};
use totalstab::lyapunov::{
    check_radial, counterexample_V, counterexample_decrease, grid_jump, radial_components, RadialComponents,
    RadialPiecewiseV,
};

use super::{Context, Outcome};
use crate::config::CounterexampleSpec;
use crate::error::CliError;
use crate::report::{write_json, write_profile_csv, Meta, Report};

const R_LO: f64 = 1.0 / 64.0;
const JUMP_TOL: f64 = 1e-9;

#[derive(Debug, Serialize)]
pub struct DecreaseSummary {
    pub samples: usize,
    pub holds: bool,
    pub strict_everywhere: bool,
    /// samples where the bound is attained with equality
    pub attained: usize,
    /// largest `decrease - bound`; `<= 0` when the bound holds
    pub worst_slack: f64,
    pub worst_radius: f64,
}

#[derive(Debug, Serialize)]
pub struct CounterexampleBody {
    pub dimension: usize,
    pub radial_deviation: f64,
    pub continuity_jump: f64,
    pub continuity_range: [f64; 2],
    pub decrease: DecreaseSummary,
    pub levels: Vec<RadialComponents>,
    pub disconnected_levels: usize,
}

fn decrease_summary(spec: &CounterexampleSpec, seed: u64) -> Result<DecreaseSummary, CliError> {
    let n = spec.shell_samples.max(1);
    let dirs = CompactSetSampler::new(
        SetShape::ball(spec.dimension, 1.0),
        SamplingPlan::boundary_only(n, seed),
    )?
    .boundary();
    let span = (spec.r_max / R_LO).log2();
    let mut summary = DecreaseSummary {
        samples: 0,
        holds: true,
        strict_everywhere: true,
        attained: 0,
        worst_slack: f64::NEG_INFINITY,
        worst_radius: 0.0,
    };
    let mut radii: Vec<f64> = (0..n)
        .map(|k| R_LO * 2f64.powf(span * (k as f64 + 0.5) / n as f64))
        .collect();
    // shell starts, where the bound is attained
    let mut i = R_LO.log2().floor() as i32;
    while 2f64.powi(i) <= spec.r_max {
        radii.push(2f64.powi(i));
        i += 1;
    }
    for (k, r) in radii.iter().enumerate() {
        let x = &dirs[k % dirs.len()] * *r;
        let check = counterexample_decrease(&x);
        summary.samples += 1;
        summary.holds &= check.holds;
        summary.strict_everywhere &= check.strict;
        if check.holds && !check.strict {
            summary.attained += 1;
        }
        let slack = check.decrease - check.bound;
        if slack > summary.worst_slack {
            summary.worst_slack = slack;
            summary.worst_radius = check.radius;
        }
    }
    Ok(summary)
}

pub fn run(ctx: &Context) -> Result<Outcome, CliError> {
    let spec = ctx
        .cfg
        .counterexample
        .clone()
        .ok_or_else(|| CliError::Config("missing `counterexample` section".into()))?;
    if spec.dimension == 0 || !(spec.r_max > R_LO) {
        return Err(CliError::Config(format!(
            "counterexample: need dimension >= 1 and r_max > {R_LO}"
        )));
    }
    let v = |x: &nalgebra::DVector<f64>| counterexample_V(x);
    let radial_deviation = check_radial(&v, spec.dimension, spec.r_max)?;
    let profile = RadialPiecewiseV.profile(spec.r_max, spec.profile_points);
    write_profile_csv(&ctx.out, "counterexample_profile", &profile)?;

    let continuity_jump = grid_jump(R_LO, spec.r_max, spec.grid);
    let decrease = decrease_summary(&spec, ctx.cfg.seed)?;
    let levels = spec
        .levels
        .iter()
        .map(|&c| radial_components(&v, spec.dimension, c, spec.r_max, spec.grid))
        .collect::<Result<Vec<_>, _>>()?;
    let disconnected_levels = levels.iter().filter(|l| l.count >= 2).count();
    let pass = decrease.holds && continuity_jump < JUMP_TOL;
    let body = CounterexampleBody {
        dimension: spec.dimension,
        radial_deviation,
        continuity_jump,
        continuity_range: [R_LO, spec.r_max],
        decrease,
        levels,
        disconnected_levels,
    };
    let report = Report {
        meta: Meta::new("counterexample", &ctx.config_text, &ctx.cfg),
        pass,
        body,
    };
    let json = write_json(&ctx.out, "counterexample", &report)?;
    Ok(Outcome { pass, json })
}
