use serde::Serialize;

use totalstab::bounds::{assemble_bounds, delta4, prop1_delta, CertificateCheck, Prop1Budget, TotalStabilityBounds};
use totalstab::dynamics::SystemMap;

use super::{certify, nominal_map, Analysis, Context, Outcome};
use crate::error::CliError;
use crate::report::{write_json, Meta, Report};

#[derive(Debug, Serialize)]
pub struct BoundsBody {
    pub analysis: Analysis,
    pub certificate_check: Option<CertificateCheck>,
    pub bounds: TotalStabilityBounds,
    pub prop1: Option<Prop1Budget>,
}

/// Local certificate, optional global certificate and all budgets.
pub fn compute(ctx: &Context, f: &SystemMap) -> Result<BoundsBody, CliError> {
    let n = f.dim();
    let analysis = certify(ctx, f)?;
    let plan = ctx.cfg.plan();
    let global = ctx.global_certificate(n)?;
    let mut certificate_check = None;
    let mut d4 = None;
    let mut prop1 = None;
    if let Some(cert) = &global {
        certificate_check = Some(cert.validate(f, plan)?);
        if let Some(c_bar) = ctx.c_bar(n)? {
            d4 = Some(delta4(cert, &c_bar, &analysis.certificate.pi, analysis.epsilon, plan)?);
        }
        if let Some(eq) = &ctx.cfg.equilibrium {
            if let (Some(lo), Some(hi), Some(rt)) = (eq.c_lower, eq.c_upper, eq.rho_tilde) {
                prop1 = Some(prop1_delta(&cert.v, f, hi, lo, rt, plan)?);
            }
        }
    }
    let bounds = assemble_bounds(&analysis.certificate, d4, ctx.cfg.safety)?;
    Ok(BoundsBody {
        analysis,
        certificate_check,
        bounds,
        prop1,
    })
}

pub fn run(ctx: &Context) -> Result<Outcome, CliError> {
    let f = nominal_map(ctx.system()?)?;
    let body = compute(ctx, &f)?;
    let pass = body.bounds.delta > 0.0;
    let report = Report {
        meta: Meta::new("bounds", &ctx.config_text, &ctx.cfg),
        pass,
        body,
    };
    let json = write_json(&ctx.out, "bounds", &report)?;
    Ok(Outcome { pass, json })
}
