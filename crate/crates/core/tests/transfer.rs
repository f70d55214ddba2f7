//! Perturbations inside the computed budgets keep an equilibrium, its local
//! contraction, its basin and (with integral action) output regulation.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use totalstab::bounds::{assemble_bounds, delta1, delta2};
use totalstab::dynamics::{
    build_extended, jacobian_distance, model_distance, CompactSetSampler, PlantModel, SamplingPlan, SetShape,
    SystemMap, VectorMap,
};
use totalstab::equilibrium::{
    basin_check, find_fixed_point, verify_invariance, verify_local_contraction, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use totalstab::expr::{InputLayout, VarKind};
use totalstab::lyapunov::{default_decay, find_epsilon, solve_stein, ContractionCertificate, QuadraticForm};
use totalstab::regulation::{
    delta_quantities, integrator_constants, lipschitz_alpha, prop3_budget, simulate_regulation, GeneralizedIntegrator,
};

#[test]
fn scalar_perturbations_keep_a_stable_equilibrium() {
    let pi = QuadraticForm::identity(1);
    let (a, eps) = (0.25, 1.0);
    let d1 = delta1(eps, a, 1.0);
    let d2 = delta2(a);
    let f = SystemMap::from_exprs(&["0.5*x1"], &[]).unwrap();
    let set = CompactSetSampler::new(SetShape::interval(-1.0, 1.0), SamplingPlan::new(2000, 2, 5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..20 {
        let b: f64 = rng.random_range(-1.0..1.0);
        let c: f64 = rng.random_range(-1.0..1.0);
        let w: f64 = rng.random_range(0.5..3.0);
        let src = "0.5*x1 + s1 + s2*sin(s3*x1)";
        let raw = SystemMap::from_exprs(&[src], &[b, c, w]).unwrap();
        let d0 = model_distance(&f, &raw, &set).unwrap().value;
        let dj = jacobian_distance(&f, &raw, &set).unwrap().value;
        let s = (0.9 * d1 / d0).min(0.9 * d2 / dj);
        let f_hat = SystemMap::from_exprs(&[src], &[s * b, s * c, w]).unwrap();
        assert!(model_distance(&f, &f_hat, &set).unwrap().value <= 0.9 * d1 + 1e-15);
        assert!(jacobian_distance(&f, &f_hat, &set).unwrap().value <= 0.9 * d2 + 1e-15);

        let fp = find_fixed_point(&f_hat, &DVector::zeros(1), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let xe = fp.point();
        assert!(pi.value(&xe) <= eps / 2.0, "trial {trial}: x_e = {}", xe[0]);
        let inv = verify_invariance(&f_hat, &pi, eps, SamplingPlan::new(1000, 10_000, trial)).unwrap();
        assert!(inv.pass, "trial {trial}: invariance ratio {}", inv.worst_ratio);
        let con = verify_local_contraction(&f_hat, &xe, &pi, a, eps, SamplingPlan::new(2000, 16, trial)).unwrap();
        assert!(con.pass && con.worst_ratio <= (3.0 + a) / 4.0 + 1e-9);
        let seeds = CompactSetSampler::new(SetShape::interval(-1.0, 1.0), SamplingPlan::new(998, 2, trial)).unwrap();
        let basin = basin_check(&f_hat, &xe, &seeds, 200, 1e-8).unwrap();
        assert_eq!(basin.total, 1000);
        assert_eq!(basin.fraction, 1.0, "trial {trial}: {:?}", basin.witnesses);
    }
}

fn xu() -> InputLayout {
    InputLayout::new(vec![(VarKind::X, 1), (VarKind::U, 1)])
}

#[test]
fn regulation_survives_budgeted_mismatch() {
    let plant = PlantModel::nominal(
        VectorMap::parse(InputLayout::states(1), &["0.5*x1"], &[]).unwrap(),
        VectorMap::parse(xu(), &["u1"], &[]).unwrap(),
        VectorMap::parse(xu(), &["x1"], &[]).unwrap(),
    )
    .unwrap();
    let alpha = VectorMap::parse(
        InputLayout::new(vec![(VarKind::X, 1), (VarKind::Z, 1)]),
        &["-0.2*x1 - 0.1*z1"],
        &[],
    )
    .unwrap();
    let k = GeneralizedIntegrator::standard(1, 1);
    let nominal = build_extended(plant.clone(), k.k.clone(), alpha.clone()).unwrap();
    let j0 = nominal.system().jacobian(&DVector::zeros(2)).unwrap();
    let a = default_decay(&j0).unwrap();
    let pi = solve_stein(&j0, a).unwrap();
    let cert: ContractionCertificate =
        find_epsilon(nominal.system(), &pi, a, 1.0, SamplingPlan::new(256, 64, 0)).unwrap();
    let bounds = assemble_bounds(&cert, None, 1.0).unwrap();

    let region = CompactSetSampler::new(pi.sublevel(cert.epsilon), SamplingPlan::new(400, 64, 3)).unwrap();
    let l_alpha = lipschitz_alpha(&alpha, 1, &region).unwrap();
    let (l, l_k) = integrator_constants(&k, &region, &region);
    let budget = prop3_budget(bounds.delta3, None, l_alpha, l_k, l, 0.9).unwrap();
    assert!((budget.mu - 3.8).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let p: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let hat = |s: f64| {
            PlantModel::new(
                VectorMap::parse(
                    InputLayout::states(1),
                    &["0.5*x1 + s1 + s2*sin(x1)"],
                    &[s * p[0], s * p[1]],
                )
                .unwrap(),
                VectorMap::parse(xu(), &["(1 + s1)*u1"], &[s * p[2]]).unwrap(),
                VectorMap::parse(xu(), &["x1 + s1"], &[s * p[3]]).unwrap(),
            )
            .unwrap()
        };
        let raw = delta_quantities(&plant, &hat(1.0), &alpha, &k, &region, &region).unwrap();
        let s = 0.999 * (budget.delta_bar / raw.value_mismatch()).min(budget.delta_bar / raw.jacobian_mismatch());
        let plant_hat = hat(s);
        let report = delta_quantities(&plant, &plant_hat, &alpha, &k, &region, &region).unwrap();
        assert!(budget.admits(&report), "trial {trial}");
        assert!(report.z_bound_holds);

        let ext = build_extended(plant_hat, k.k.clone(), alpha.clone()).unwrap();
        let verdict = simulate_regulation(&ext, &DVector::zeros(2), 400, 1e-8).unwrap();
        assert!(verdict.pass, "trial {trial}: tail |y| = {}", verdict.tail_output);
        let eq = verdict.equilibrium.unwrap();
        assert!(eq.integrator_value <= 1e-10 && eq.y[0].abs() <= 1e-10);
        assert!(pi.value(&DVector::from_vec(vec![eq.xi[0], eq.z[0]])) <= cert.epsilon);
    }
}
