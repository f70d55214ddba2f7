use nalgebra::DVector;
use serde::Serialize;

use totalstab::bounds::assemble_bounds;
use totalstab::dynamics::{build_extended, CompactSetSampler, PlantModel, SetShape, VectorMap};
use totalstab::expr::{InputLayout, VarKind};
use totalstab::lyapunov::{default_decay, find_epsilon, solve_stein, QuadraticForm};
use totalstab::regulation::{
    check_integrator, delta_quantities, integrator_constants, integrator_drive, lipschitz_alpha, prop2_budget,
    prop3_budget, simulate_regulation, solve_m_linear, solve_m_numeric, DeltaReport, ForwardingController,
    ForwardingSettings, GeneralizedIntegrator, IntegratorCheck, MappingM, MismatchBudget, RegulationVerdict,
};

use super::{rows, Context, Outcome};
use crate::config::{matrix, ControllerSpec, ForwardingSpec, MappingSpec, PlantSpec, RegulationSpec};
use crate::error::{in_field, CliError};
use crate::report::{write_json, write_states_csv, Meta, Report};

#[derive(Debug, Serialize)]
pub struct ForwardingInfo {
    pub mapping: MappingM,
    /// sampled `sup |M(φ(ξ)) - M(ξ) - k(ξ, h(ξ, 0))|`
    pub mapping_residual: f64,
    pub settings: ForwardingSettings,
}

#[derive(Debug, Serialize)]
pub struct Nominal {
    pub eigenvalues: Vec<[f64; 2]>,
    pub spectral_radius: f64,
    pub a: f64,
    pub pi: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub delta3: f64,
}

#[derive(Debug, Serialize)]
pub struct RegulateBody {
    pub q: usize,
    pub m: usize,
    pub p: usize,
    pub controller: String,
    pub forwarding: Option<ForwardingInfo>,
    pub integrator: IntegratorCheck,
    pub nominal: Nominal,
    /// existence-only budget `δ3 · safety / (1 + L)`
    pub existence_budget: f64,
    pub budget: MismatchBudget,
    pub mismatch: DeltaReport,
    pub within_budget: bool,
    pub simulation: RegulationVerdict,
}

fn plant(spec: &PlantSpec, r: &RegulationSpec, nominal: bool) -> Result<PlantModel, CliError> {
    let name = if nominal { "plant" } else { "plant_hat" };
    let xu = InputLayout::new(vec![(VarKind::X, r.q), (VarKind::U, r.m)]);
    let phi = in_field(
        VectorMap::parse(InputLayout::states(r.q), &spec.phi, &spec.params),
        &format!("regulation.{name}.phi"),
    )?;
    let g = in_field(
        VectorMap::parse(xu.clone(), &spec.g, &spec.params),
        &format!("regulation.{name}.g"),
    )?;
    let h = in_field(
        VectorMap::parse(xu, &spec.h, &spec.params),
        &format!("regulation.{name}.h"),
    )?;
    Ok(if nominal {
        PlantModel::nominal(phi, g, h)?
    } else {
        PlantModel::new(phi, g, h)?
    })
}

fn integrator(r: &RegulationSpec) -> Result<GeneralizedIntegrator, CliError> {
    match &r.integrator {
        None => Ok(GeneralizedIntegrator::standard(r.q, r.p)),
        Some(k) => {
            let layout = InputLayout::new(vec![(VarKind::X, r.q), (VarKind::Y, r.p)]);
            let map = in_field(VectorMap::parse(layout, &k.k, &[]), "regulation.integrator.k")?;
            Ok(GeneralizedIntegrator::with_constants(r.q, map, k.l1, k.l2)?)
        }
    }
}

fn forwarding(
    ctx: &Context,
    spec: &ForwardingSpec,
    plant: &PlantModel,
    k: &GeneralizedIntegrator,
) -> Result<(VectorMap, ForwardingInfo), CliError> {
    let q = plant.q;
    let drive = integrator_drive(plant, k);
    let origin = DVector::zeros(q);
    let probe = CompactSetSampler::new(SetShape::cube(q, 1.0), ctx.cfg.plan())?;
    let mapping = match &spec.mapping {
        MappingSpec::Linear => {
            let m = solve_m_linear(&plant.phi.jacobian(&origin)?, &drive.jacobian(&origin)?)?;
            MappingM::linear(&m)
        }
        MappingSpec::Numeric {
            degree,
            ridge,
            half_width,
        } => {
            let set = CompactSetSampler::new(SetShape::cube(q, *half_width), ctx.cfg.plan())?;
            MappingM::Polynomial(solve_m_numeric(&plant.phi, &drive, *degree, &set, *ridge)?)
        }
    };
    let settings = ForwardingSettings {
        tol: spec.tol,
        u_max: spec.u_max,
        ..ForwardingSettings::default()
    };
    let w = QuadraticForm::new(matrix(&spec.w, "regulation.controller.forwarding.w")?)?;
    let controller = ForwardingController::new(plant.clone(), k.clone(), mapping.clone(), w, settings)?;
    let mapping_residual = controller.m_residual(&probe.all())?;
    Ok((
        controller.as_alpha(),
        ForwardingInfo {
            mapping,
            mapping_residual,
            settings,
        },
    ))
}

pub fn run(ctx: &Context) -> Result<Outcome, CliError> {
    let r = ctx
        .cfg
        .regulation
        .clone()
        .ok_or_else(|| CliError::Config("missing `regulation` section".into()))?;
    let plan = ctx.cfg.plan();
    let nominal_plant = plant(&r.plant, &r, true)?;
    let plant_hat = plant(&r.plant_hat, &r, false)?;
    let k = integrator(&r)?;

    let (alpha, controller, forwarding_info) = match &r.controller {
        ControllerSpec::Alpha(src) => {
            let layout = InputLayout::new(vec![(VarKind::X, r.q), (VarKind::Z, r.p)]);
            let alpha = in_field(VectorMap::parse(layout, src, &[]), "regulation.controller.alpha")?;
            (alpha, "alpha", None)
        }
        ControllerSpec::Forwarding(spec) => {
            let (alpha, info) = forwarding(ctx, spec, &nominal_plant, &k)?;
            (alpha, "forwarding", Some(info))
        }
    };

    let box_set = CompactSetSampler::new(SetShape::cube(r.q + 2 * r.p, r.integrator_box), plan)?;
    let integrator_check = check_integrator(&k, &box_set)?;

    let n = r.q + r.p;
    let ext = build_extended(nominal_plant.clone(), k.k.clone(), alpha.clone())?;
    let sys = ext.system();
    sys.check_origin_equilibrium()?;
    let j0 = sys.jacobian(&DVector::zeros(n))?;
    let mut eigenvalues: Vec<[f64; 2]> = j0.complex_eigenvalues().iter().map(|c| [c.re, c.im]).collect();
    eigenvalues.sort_by(|x, y| x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1])));
    let rho = totalstab::linalg::spectral_radius(&j0);
    if rho >= 1.0 {
        return Err(totalstab::Error::UnstableLinearization(rho).into());
    }
    let a = default_decay(&j0)?;
    let pi = solve_stein(&j0, a)?;
    let cert = find_epsilon(sys, &pi, a, r.r_max, plan)?;
    let delta3 = assemble_bounds(&cert, None, 1.0)?.delta3;

    let ellipsoid = || CompactSetSampler::new(cert.pi.sublevel(cert.epsilon), plan);
    let c_bar = match ctx.c_bar(n)? {
        Some(s) => s,
        None => ellipsoid()?,
    };
    let c_lower = match ctx.c_lower_shape(n)? {
        Some(shape) => CompactSetSampler::new(shape, plan)?,
        None => ellipsoid()?,
    };
    let l_alpha = lipschitz_alpha(&alpha, r.q, &c_lower)?;
    let (l, l_k) = integrator_constants(&k, &c_bar, &c_lower);
    let budget = prop3_budget(delta3, None, l_alpha, l_k, l, ctx.cfg.safety)?;
    let existence_budget = prop2_budget(delta3 * ctx.cfg.safety, l);
    let mismatch = delta_quantities(&nominal_plant, &plant_hat, &alpha, &k, &c_bar, &c_lower)?;
    let within_budget = budget.admits(&mismatch);

    let perturbed = build_extended(plant_hat, k.k.clone(), alpha)?;
    let simulation = simulate_regulation(&perturbed, &DVector::from_vec(r.x0.clone()), r.steps, r.y_tol)?;
    write_states_csv(&ctx.out, "regulation_trajectory", &simulation.states)?;

    let pass = integrator_check.pass && simulation.pass;
    let body = RegulateBody {
        q: r.q,
        m: r.m,
        p: r.p,
        controller: controller.to_string(),
        forwarding: forwarding_info,
        integrator: integrator_check,
        nominal: Nominal {
            eigenvalues,
            spectral_radius: rho,
            a,
            pi: rows(cert.pi.matrix()),
            epsilon: cert.epsilon,
            delta3,
        },
        existence_budget,
        budget,
        mismatch,
        within_budget,
        simulation,
    };
    let report = Report {
        meta: Meta::new("regulate", &ctx.config_text, &ctx.cfg),
        pass,
        body,
    };
    let json = write_json(&ctx.out, "regulate", &report)?;
    Ok(Outcome { pass, json })
}
