//! Acceptance criteria 1-9. Each criterion prints one PASS/FAIL line; the
//! process exits nonzero when any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use totalstab::bounds::{delta1, delta2, delta4, GlobalLyapunovCertificate};
use totalstab::dynamics::{
    build_extended, jacobian_distance, model_distance, CompactSetSampler, PlantModel, SamplingPlan, SetShape,
    SystemMap, VectorMap,
};
use totalstab::equilibrium::{
    basin_check, find_fixed_point, verify_invariance, verify_local_contraction, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use totalstab::expr::{compile_map, parse_str, InputLayout, VarKind};
use totalstab::linalg::spectral_radius;
use totalstab::lyapunov::{
    counterexample_V, counterexample_decrease, grid_jump, radial_components, LyapunovFunction, QuadraticForm,
};
use totalstab::regulation::{
    integrator_drive, simulate_regulation, solve_m_linear, solve_m_numeric, ForwardingController, ForwardingSettings,
    GeneralizedIntegrator, MappingM,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_formulas() -> Outcome {
    // 50-digit mpmath evaluations of the two closed forms
    const DELTA1_ORACLE: f64 = 0.14708710135363802;
    const DELTA2_ORACLE: f64 = 0.11058146711617285;
    const DELTA2_QUOTED: f64 = 0.110585;
    let d1 = delta1(1.0, 0.25, 1.0);
    let d2 = delta2(0.25);
    let ok =
        (d1 - 0.147087).abs() <= 1e-6 && (d1 - DELTA1_ORACLE).abs() <= 1e-15 && (d2 - DELTA2_ORACLE).abs() <= 1e-15;
    check(
        ok,
        format!(
            "delta1 = {d1:.9}, delta2 = {d2:.9} (high-precision {DELTA2_ORACLE:.9}; quoted {DELTA2_QUOTED} is off by {:.1e})",
            (DELTA2_QUOTED - DELTA2_ORACLE).abs()
        ),
    )
}

fn c2_counterexample() -> Outcome {
    let jump = grid_jump(2f64.powi(-6), 2f64.powi(6), 100_000);

    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (mut holds, mut strict) = (0usize, 0usize);
    let shells = 10_000;
    for _ in 0..shells {
        let r = 2f64.powf(rng.random_range(-6.0..6.0));
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let d = counterexample_decrease(&DVector::from_vec(vec![r * t.cos(), r * t.sin()]));
        holds += d.holds as usize;
        strict += d.strict as usize;
    }
    // the bound is attained exactly at shell starts |x| = 2^i
    let at_joint = counterexample_decrease(&DVector::from_vec(vec![1.0, 0.0]));

    let v = |x: &DVector<f64>| counterexample_V(x);
    let comp = radial_components(&v, 2, 1.2, 8.0, 20_000).map_err(|e| e.to_string())?;
    let ends: Vec<f64> = comp
        .intervals
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .filter(|&e| e > 0.0)
        .collect();
    let expected = [0.61667, 0.95, 1.03333];
    let ends_ok = comp.count == 2 && ends.len() == 3 && ends.iter().zip(expected).all(|(e, x)| (e - x).abs() <= 1e-3);

    let mut min_count = usize::MAX;
    for k in 0..50 {
        let c = 10f64.powf(-2.0 + 3.0 * k as f64 / 49.0);
        // the second component sits below r = c and can be a thin shell
        // around a power of two, so the scan is fine and short
        let comp = radial_components(&v, 2, c, 1.1 * c, 200_000).map_err(|e| e.to_string())?;
        min_count = min_count.min(comp.count);
    }
    check(
        jump < 1e-9 && holds == shells && ends_ok && min_count >= 2,
        format!(
            "jump {jump:.1e}; decrease bound holds on {holds}/{shells} shells ({strict} strict, equality at |x|=2^i: {}); c=1.2 ends {ends:.5?}; min components over 50 levels {min_count}",
            at_joint.holds && !at_joint.strict
        ),
    )
}

fn c3_fixed_point() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=5);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let rho = spectral_radius(&m);
        let a = if rho > 1e-9 {
            m * (rng.random_range(0.1..0.95) / rho)
        } else {
            m
        };
        let b = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let exact = (DMatrix::identity(n, n) - &a).lu().solve(&b).ok_or("singular I - A")?;
        let f = SystemMap::affine(a, b).map_err(|e| e.to_string())?;
        let fp = find_fixed_point(&f, &DVector::zeros(n), 1e-12, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
        worst = worst.max((fp.point() - exact).norm());
    }
    check(
        worst <= 1e-9,
        format!("50 random stable affine maps, worst |x - (I-A)^-1 b| = {worst:.1e}"),
    )
}

fn c4_transfer() -> Outcome {
    let pi = QuadraticForm::identity(1);
    let (a, eps) = (0.25, 1.0);
    let (d1, d2) = (delta1(eps, a, 1.0), delta2(a));
    let f = SystemMap::from_exprs(&["0.5*x1"], &[]).map_err(|e| e.to_string())?;
    let set = CompactSetSampler::new(SetShape::interval(-1.0, 1.0), SamplingPlan::new(2000, 2, 5))
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let src = "0.5*x1 + s1 + s2*sin(s3*x1)";
    let mut worst_ratio: f64 = 0.0;
    for trial in 0..20u64 {
        let mut run = || -> Result<f64, totalstab::Error> {
            let (b, c, w): (f64, f64, f64) = (
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.5..3.0),
            );
            let raw = SystemMap::from_exprs(&[src], &[b, c, w])?;
            let s = (0.9 * d1 / model_distance(&f, &raw, &set)?.value)
                .min(0.9 * d2 / jacobian_distance(&f, &raw, &set)?.value);
            let f_hat = SystemMap::from_exprs(&[src], &[s * b, s * c, w])?;
            let fp = find_fixed_point(&f_hat, &DVector::zeros(1), DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let xe = fp.point();
            let inv = verify_invariance(&f_hat, &pi, eps, SamplingPlan::new(1000, 10_000, trial))?;
            let con = verify_local_contraction(&f_hat, &xe, &pi, a, eps, SamplingPlan::new(2000, 16, trial))?;
            let seeds = CompactSetSampler::new(SetShape::interval(-1.0, 1.0), SamplingPlan::new(998, 2, trial))?;
            let basin = basin_check(&f_hat, &xe, &seeds, 200, 1e-8)?;
            let ok = model_distance(&f, &f_hat, &set)?.value <= 0.9 * d1 + 1e-15
                && jacobian_distance(&f, &f_hat, &set)?.value <= 0.9 * d2 + 1e-15
                && pi.value(&xe) <= eps / 2.0
                && inv.pass
                && con.worst_ratio <= (3.0 + a) / 4.0 + 1e-9
                && basin.total == 1000
                && basin.fraction == 1.0;
            Ok(if ok { con.worst_ratio } else { f64::INFINITY })
        };
        let r = run().map_err(|e| format!("trial {trial}: {e}"))?;
        if !r.is_finite() {
            return Err(format!("trial {trial} violates a conclusion"));
        }
        worst_ratio = worst_ratio.max(r);
    }
    check(
        true,
        format!("20 perturbations at 0.9*(delta1, delta2): all equilibria certified, worst contraction ratio {worst_ratio:.4} <= {:.4}", (3.0 + a) / 4.0),
    )
}

fn c5_delta4() -> Outcome {
    let v = LyapunovFunction::from_expr(1, "x1^2", 0.25, &[]).map_err(|e| e.to_string())?;
    let cert = GlobalLyapunovCertificate::new(v, 1.0).map_err(|e| e.to_string())?;
    let plan = SamplingPlan::new(4000, 400, 5);
    let c_bar = CompactSetSampler::new(SetShape::interval(-0.8, 0.8), plan).map_err(|e| e.to_string())?;
    let r = delta4(&cert, &c_bar, &QuadraticForm::identity(1), 1.0, plan).map_err(|e| e.to_string())?;
    check(
        (r.v_lower - 0.5).abs() <= 1e-6 && (r.delta4 - 0.1875).abs() <= 1e-4,
        format!("v_lower = {:.9}, delta4 = {:.9}", r.v_lower, r.delta4),
    )
}

fn xu() -> InputLayout {
    InputLayout::new(vec![(VarKind::X, 1), (VarKind::U, 1)])
}

fn scalar_plant(phi: &str, params: &[f64]) -> Result<PlantModel, totalstab::Error> {
    PlantModel::new(
        VectorMap::parse(InputLayout::states(1), &[phi], params)?,
        VectorMap::parse(xu(), &["u1"], &[])?,
        VectorMap::parse(xu(), &["x1"], &[])?,
    )
}

fn c6_regulation() -> Outcome {
    let run = || -> Result<Outcome, totalstab::Error> {
        let alpha = VectorMap::parse(
            InputLayout::new(vec![(VarKind::X, 1), (VarKind::Z, 1)]),
            &["-0.2*x1 - 0.1*z1"],
            &[],
        )?;
        let k = GeneralizedIntegrator::standard(1, 1);
        let ext = build_extended(scalar_plant("0.5*x1 + s1", &[0.05])?, k.k.clone(), alpha)?;
        let j = ext.system().jacobian(&DVector::zeros(2))?;
        let mut eig: Vec<f64> = j.complex_eigenvalues().iter().map(|c| c.re).collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let verdict = simulate_regulation(&ext, &DVector::zeros(2), 400, 1e-8)?;
        let last = verdict.states.last().expect("trajectory");
        let err = (last - DVector::from_vec(vec![0.0, 0.5])).norm();
        let tail = verdict.outputs[200..].iter().map(|y| y[0].abs()).fold(0.0, f64::max);
        let ok = (eig[0] - 0.8).abs() <= 1e-10 && (eig[1] - 0.5).abs() <= 1e-10 && err <= 1e-8 && tail < 1e-8;
        Ok(check(
            ok && verdict.pass,
            format!("eigenvalues {eig:.12?}; |x_400 - (0, 0.5)| = {err:.1e}; max |y_k| for k >= 200 = {tail:.1e}"),
        ))
    };
    run().map_err(|e| e.to_string())?
}

/// Root of `u + Q(u)/u` bracketed on a grid of `[-1, 1]` and refined by
/// bisection, with `Q` from the composite trapezoid rule.
fn brute_force_control(c: &ForwardingController, xi: f64, z: f64) -> Result<f64, totalstab::Error> {
    let x = DVector::from_element(1, xi);
    let r = |u: f64, n: usize| -> Result<f64, totalstab::Error> {
        if u == 0.0 {
            return c.integrand(&x, z, 0.0);
        }
        let h = u / n as f64;
        let mut q = 0.5 * (c.integrand(&x, z, 0.0)? + c.integrand(&x, z, u)?);
        for i in 1..n {
            q += c.integrand(&x, z, i as f64 * h)?;
        }
        Ok(u + q * h / u)
    };
    let grid: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 * 0.01).collect();
    let vals = grid.iter().map(|&u| r(u, 200)).collect::<Result<Vec<_>, _>>()?;
    let best = (0..grid.len())
        .min_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()))
        .expect("grid");
    let (mut lo, mut hi) = if best > 0 && vals[best - 1].signum() != vals[best].signum() {
        (grid[best - 1], grid[best])
    } else if best + 1 < grid.len() && vals[best + 1].signum() != vals[best].signum() {
        (grid[best], grid[best + 1])
    } else {
        return Ok(grid[best]);
    };
    let flo = r(lo, 2000)?.signum();
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if r(mid, 2000)?.signum() == flo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn c7_forwarding() -> Outcome {
    let run = || -> Result<Outcome, totalstab::Error> {
        let m = solve_m_linear(&DMatrix::from_element(1, 1, 0.5), &DMatrix::from_element(1, 1, 1.0))?;
        let m_exact = m[(0, 0)] == -2.0;

        let plant = scalar_plant("0.5*x1", &[])?;
        let k = GeneralizedIntegrator::standard(1, 1);
        let samples = CompactSetSampler::new(SetShape::interval(-1.0, 1.0), SamplingPlan::new(200, 2, 7))?;
        let fit = solve_m_numeric(&plant.phi, &integrator_drive(&plant, &k), 3, &samples, 0.0)?;
        let probe = [-0.9, -0.3, 0.2, 0.7];
        let fit_err = probe
            .iter()
            .map(|&x| (fit.eval(&DVector::from_element(1, x))[0] + 2.0 * x).abs())
            .fold(0.0, f64::max);

        let c = ForwardingController::new(
            plant.clone(),
            k.clone(),
            MappingM::linear(&m),
            QuadraticForm::identity(1),
            ForwardingSettings::default(),
        )?;
        let u0 = c.control(&DVector::zeros(1), 0.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut oracle_err: f64 = 0.0;
        for _ in 0..10 {
            let (xi, z) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            let u = c.control(&DVector::from_element(1, xi), z)?;
            oracle_err = oracle_err.max((u - brute_force_control(&c, xi, z)?).abs());
        }
        let ext = build_extended(plant, k.k.clone(), c.as_alpha())?;
        let rho = spectral_radius(&ext.system().jacobian(&DVector::zeros(2))?);
        Ok(check(
            m_exact && fit_err <= 1e-8 && u0 == 0.0 && oracle_err <= 1e-6 && rho < 1.0,
            format!(
                "M = {}; numeric fit error {fit_err:.1e}; alpha(0,0) = {u0}; oracle error {oracle_err:.1e}; closed-loop spectral radius {rho:.6}",
                m[(0, 0)]
            ),
        ))
    };
    run().map_err(|e| e.to_string())?
}

fn c8_expressions() -> Outcome {
    const FIXTURES: [&str; 10] = [
        "x1^2 + 3*x1*x2 - x2^3",
        "sin(x1)*cos(x2)",
        "exp(0.3*x1) - tanh(x2)",
        "(x1 - 2*x2)/(1 + x1^2)",
        "sqrt(2 + x1^2 + x2^2)",
        "sqrt(3 + sin(x1*x2))",
        "tanh(2*x1) + x2*exp(-x1^2)",
        "-x1*x2 + 0.5*(x1 + x2)^4",
        "cos(x1 + x2)^2 - sin(x1 - x2)",
        "x1/(2 + cos(x2)) + tanh(x1*x2)",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let (mut worst_fd, mut worst_rt): (f64, f64) = (0.0, 0.0);
    for src in FIXTURES {
        let e = parse_str(src).map_err(|e| format!("{src}: {e}"))?;
        let printed = parse_str(&e.to_string()).map_err(|e| format!("{src} reprint: {e}"))?;
        let map = compile_map(vec![e], InputLayout::states(2), 1, &[]).map_err(|e| e.to_string())?;
        let back = compile_map(vec![printed], InputLayout::states(2), 1, &[]).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let x = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let j = map.jacobian(&x).map_err(|e| e.to_string())?;
            for i in 0..2 {
                let h = 1e-6 * x[i].abs().max(1.0);
                let (mut up, mut dn) = (x, x);
                up[i] += h;
                dn[i] -= h;
                let fd = (map.eval(&up).map_err(|e| e.to_string())?[0] - map.eval(&dn).map_err(|e| e.to_string())?[0])
                    / (2.0 * h);
                worst_fd = worst_fd.max((j[(0, i)] - fd).abs() / fd.abs().max(1.0));
            }
            let a = map.eval(&x).map_err(|e| e.to_string())?[0];
            let b = back.eval(&x).map_err(|e| e.to_string())?[0];
            worst_rt = worst_rt.max((a - b).abs());
        }
    }
    check(
        worst_fd <= 1e-6 && worst_rt == 0.0,
        format!("1000 points: worst relative Jacobian error {worst_fd:.1e}, round-trip difference {worst_rt:e}"),
    )
}

const SCALAR_CONFIG: &str = r#"{
  "seed": 42,
  "sampling": { "interior": 400, "boundary": 64 },
  "system": {
    "dim": 1,
    "f": ["0.5*x1"],
    "f_hat": ["0.5*x1 + 0.01 + 0.005*sin(2*x1)"],
    "decay": 0.25,
    "pi": [[1.0]]
  },
  "certificate": { "v": "x1^2", "rho": 0.25, "level": 1.0 },
  "sets": { "c_bar": { "kind": "box", "lo": [-0.8], "hi": [0.8] } },
  "equilibrium": { "x0": [0.0] }
}"#;

const REGULATION_CONFIG: &str = r#"{
  "seed": 11,
  "sampling": { "interior": 400, "boundary": 64 },
  "regulation": {
    "q": 1, "m": 1, "p": 1,
    "plant": { "phi": ["0.5*x1"], "g": ["u1"], "h": ["x1"] },
    "plant_hat": { "phi": ["0.5*x1 + s1"], "g": ["u1"], "h": ["x1"], "params": [0.05] },
    "controller": { "alpha": ["-0.2*x1 - 0.1*z1"] },
    "x0": [0.0, 0.0],
    "steps": 400,
    "y_tol": 1e-8
  }
}"#;

const FORWARDING_CONFIG: &str = r#"{
  "seed": 3,
  "sampling": { "interior": 48, "boundary": 8 },
  "regulation": {
    "q": 1, "m": 1, "p": 1,
    "plant": { "phi": ["0.5*x1"], "g": ["u1"], "h": ["x1"] },
    "plant_hat": { "phi": ["0.5*x1 + 0.002*sin(x1)"], "g": ["u1"], "h": ["x1 + 0.001"] },
    "controller": { "forwarding": { "w": [[1.0]], "mapping": "linear" } },
    "x0": [0.1, 0.0],
    "steps": 300,
    "y_tol": 1e-8
  }
}"#;

const COUNTEREXAMPLE_CONFIG: &str = r#"{
  "seed": 1,
  "counterexample": { "levels": [0.5, 1.2, 3.0], "grid": 5000, "shell_samples": 2000 }
}"#;

fn run_cli(dir: &Path, command: &str, config: &Path, out: &str) -> Result<(i32, Vec<u8>), String> {
    let output = Command::new(env!("CARGO_BIN_EXE_totalstab"))
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(dir.join(out))
        .output()
        .map_err(|e| e.to_string())?;
    Ok((output.status.code().unwrap_or(-1), output.stdout))
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let jobs = [
        ("analyze", "scalar", SCALAR_CONFIG),
        ("bounds", "scalar", SCALAR_CONFIG),
        ("equilibrium", "scalar", SCALAR_CONFIG),
        ("distance", "scalar", SCALAR_CONFIG),
        ("regulate", "regulation", REGULATION_CONFIG),
        ("regulate", "forwarding", FORWARDING_CONFIG),
        ("counterexample", "counterexample", COUNTEREXAMPLE_CONFIG),
    ];
    let mut compared = 0;
    for (command, name, text) in jobs {
        let config = dir.path().join(format!("{name}.json"));
        std::fs::write(&config, text).map_err(|e| e.to_string())?;
        let first = run_cli(dir.path(), command, &config, &format!("{name}-1"))?;
        let second = run_cli(dir.path(), command, &config, &format!("{name}-2"))?;
        if first.0 != 0 {
            return Err(format!("{command} on {name} exited with {}", first.0));
        }
        if first != second {
            return Err(format!("{command} on {name}: stdout differs between runs"));
        }
        for entry in std::fs::read_dir(dir.path().join(format!("{name}-1"))).map_err(|e| e.to_string())? {
            let file = entry.map_err(|e| e.to_string())?.file_name();
            let a = std::fs::read(dir.path().join(format!("{name}-1")).join(&file)).map_err(|e| e.to_string())?;
            let b = std::fs::read(dir.path().join(format!("{name}-2")).join(&file)).map_err(|e| e.to_string())?;
            if a != b {
                return Err(format!("{command}: {} differs between runs", file.to_string_lossy()));
            }
            compared += 1;
        }
    }
    check(
        true,
        format!("6 commands run twice, {compared} report files byte-identical"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("formula fidelity", c1_formulas),
        ("counterexample suite", c2_counterexample),
        ("equilibrium oracle equivalence", c3_fixed_point),
        ("perturbation transfer", c4_transfer),
        ("delta4 pipeline", c5_delta4),
        ("regulation", c6_regulation),
        ("forwarding", c7_forwarding),
        ("expression layer", c8_expressions),
        ("determinism", c9_determinism),
    ];
    let start = Instant::now();
    let results: Vec<(Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    (f(), t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| (Err("panicked".into()), 0.0)))
            .collect()
    });
    let mut failed = 0;
    for (i, ((name, _), (r, secs))) in criteria.iter().zip(&results).enumerate() {
        match r {
            Ok(detail) => println!("criterion {}: PASS {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of 9 criteria passed in {:.1}s",
        9 - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
