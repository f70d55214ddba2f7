use nalgebra::DVector;
use serde::Serialize;

use totalstab::bounds::TotalStabilityBounds;
use totalstab::dynamics::CompactSetSampler;
use totalstab::equilibrium::{
    basin_check, find_fixed_point, uniqueness_annulus, verify_invariance, verify_local_contraction, EquilibriumReport,
};
use totalstab::linalg::spectral_radius;

use super::distance::{measure, perturbed_map, DistanceBody};
use super::{nominal_map, Context, Outcome};
use crate::error::CliError;
use crate::report::{write_json, write_states_csv, Meta, Report};

#[derive(Debug, Serialize)]
pub struct EquilibriumBody {
    pub bounds: TotalStabilityBounds,
    pub distance: DistanceBody,
    pub equilibrium: EquilibriumReport,
}

pub fn run(ctx: &Context) -> Result<Outcome, CliError> {
    let f = nominal_map(ctx.system()?)?;
    let f_hat = perturbed_map(ctx)?;
    let n = f.dim();
    let plan = ctx.cfg.plan();
    let tol = ctx.cfg.tolerances;

    let computed = super::bounds::compute(ctx, &f)?;
    let cert = &computed.analysis.certificate;
    let distance = measure(ctx, &f, &f_hat, Some(computed.bounds.delta))?;

    let eq_spec = ctx.cfg.equilibrium.as_ref();
    let x0 = match eq_spec.and_then(|e| e.x0.clone()) {
        Some(x) if x.len() != n => {
            return Err(CliError::Config(format!(
                "equilibrium.x0: length {}, expected {n}",
                x.len()
            )));
        }
        Some(x) => DVector::from_vec(x),
        None => DVector::zeros(n),
    };
    let fp = find_fixed_point(&f_hat, &x0, tol.fixed_point, tol.max_iter)?;
    let x_e = fp.point();
    let rho = spectral_radius(&f_hat.jacobian(&x_e)?);
    let invariance = verify_invariance(&f_hat, &cert.pi, cert.epsilon, plan)?;
    let contraction = verify_local_contraction(&f_hat, &x_e, &cert.pi, cert.a, cert.epsilon, plan)?;

    let global = ctx.global_certificate(n)?;
    let mut uniqueness = None;
    let mut in_lower_sublevel = None;
    if let (Some(g), Some(e)) = (&global, eq_spec) {
        if let (Some(lo), Some(hi), Some(rt)) = (e.c_lower, e.c_upper, e.rho_tilde) {
            in_lower_sublevel = Some(g.v.value(&x_e)? <= lo);
            uniqueness = Some(uniqueness_annulus(
                &f_hat,
                &g.v,
                lo,
                hi,
                rt,
                plan,
                e.uniqueness_seeds,
                tol.fixed_point,
            )?);
        }
    }

    let basin_set = match ctx.c_bar(n)? {
        Some(s) => s,
        None => CompactSetSampler::new(cert.pi.sublevel(cert.epsilon), plan)?,
    };
    let basin = basin_check(&f_hat, &x_e, &basin_set, tol.basin_steps, tol.basin_tol)?;
    let start = basin
        .worst_start
        .clone()
        .map(DVector::from_vec)
        .unwrap_or_else(|| x0.clone());
    let trajectory = f_hat.simulate(&start, tol.basin_steps)?;
    write_states_csv(&ctx.out, "equilibrium_trajectory", &trajectory.states)?;

    let equilibrium = EquilibriumReport {
        x_e: fp.x.clone(),
        residual: fp.residual,
        iterations: fp.iterations,
        spectral_radius: rho,
        in_half_ellipsoid: cert.pi.value(&x_e) <= cert.epsilon / 2.0,
        in_lower_sublevel,
        invariance,
        contraction,
        uniqueness,
        basin: Some(basin),
    };
    let pass = equilibrium.pass();
    let body = EquilibriumBody {
        bounds: computed.bounds,
        distance,
        equilibrium,
    };
    let report = Report {
        meta: Meta::new("equilibrium", &ctx.config_text, &ctx.cfg),
        pass,
        body,
    };
    let json = write_json(&ctx.out, "equilibrium", &report)?;
    Ok(Outcome { pass, json })
}
