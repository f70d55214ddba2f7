use serde::Serialize;

use totalstab::dynamics::{jacobian_distance, model_distance, CompactSetSampler, SupEstimate, SystemMap};

use super::{certify, nominal_map, Context, Outcome};
use crate::error::{in_field, CliError};
use crate::report::{write_json, Meta, Report};

#[derive(Debug, Serialize)]
pub struct DistanceBody {
    /// `C̄` when configured, otherwise `{xᵀΠx <= ε}`
    pub region: String,
    pub model: SupEstimate,
    pub jacobian: SupEstimate,
    /// `min(δ1, δ2) · safety`; absent when no local certificate exists
    pub delta: Option<f64>,
    pub within_budget: Option<bool>,
}

pub fn measure(ctx: &Context, f: &SystemMap, f_hat: &SystemMap, delta: Option<f64>) -> Result<DistanceBody, CliError> {
    let n = f.dim();
    let (region, set) = match ctx.c_bar(n)? {
        Some(s) => ("c_bar".to_string(), s),
        None => {
            let analysis = certify(ctx, f)?;
            let shape = analysis.certificate.pi.sublevel(analysis.epsilon);
            (
                "certified_ellipsoid".to_string(),
                CompactSetSampler::new(shape, ctx.cfg.plan())?,
            )
        }
    };
    let model = model_distance(f, f_hat, &set)?;
    let jacobian = jacobian_distance(f, f_hat, &set)?;
    let within_budget = delta.map(|d| model.value <= d && jacobian.value <= d);
    Ok(DistanceBody {
        region,
        model,
        jacobian,
        delta,
        within_budget,
    })
}

pub fn perturbed_map(ctx: &Context) -> Result<SystemMap, CliError> {
    let spec = ctx.system()?;
    let src = spec
        .f_hat
        .as_ref()
        .ok_or_else(|| CliError::Config("system.f_hat is required for this command".into()))?;
    in_field(SystemMap::from_exprs(src, &spec.f_hat_params), "system.f_hat")
}

pub fn run(ctx: &Context) -> Result<Outcome, CliError> {
    let f = nominal_map(ctx.system()?)?;
    let f_hat = perturbed_map(ctx)?;
    let delta = super::bounds::compute(ctx, &f).ok().map(|b| b.bounds.delta);
    let body = measure(ctx, &f, &f_hat, delta)?;
    let pass = body.within_budget.unwrap_or(false);
    let report = Report {
        meta: Meta::new("distance", &ctx.config_text, &ctx.cfg),
        pass,
        body,
    };
    let json = write_json(&ctx.out, "distance", &report)?;
    Ok(Outcome { pass, json })
}
