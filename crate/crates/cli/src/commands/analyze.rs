use super::{certify, nominal_map, Analysis, Context, Outcome};
use crate::error::CliError;
use crate::report::{write_json, Meta, Report};

pub fn run(ctx: &Context) -> Result<Outcome, CliError> {
    let f = nominal_map(ctx.system()?)?;
    let analysis: Analysis = certify(ctx, &f)?;
    let pass = analysis.worst_margin <= 0.0;
    let report = Report {
        meta: Meta::new("analyze", &ctx.config_text, &ctx.cfg),
        pass,
        body: analysis,
    };
    let json = write_json(&ctx.out, "analyze", &report)?;
    Ok(Outcome { pass, json })
}
