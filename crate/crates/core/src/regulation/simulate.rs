use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::{ExtendedSystem, PlantModel};
use crate::equilibrium::{find_fixed_point, DEFAULT_MAX_ITER};
use crate::{Error, Result};

/// Closed-loop equilibrium located from the end of a converged run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegulationEquilibrium {
    pub xi: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    /// `|k(ξ_e, y_e)|`, zero at any equilibrium since `z+ = z`
    pub integrator_value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegulationVerdict {
    pub pass: bool,
    pub steps: usize,
    pub y_tol: f64,
    /// `max |y_k|` over `k >= N/2`
    pub tail_output: f64,
    /// `|x_N - x_{N-1}|`
    pub final_increment: f64,
    pub converged: bool,
    pub blow_up: bool,
    pub final_xi: Vec<f64>,
    pub final_z: Vec<f64>,
    pub final_y: Vec<f64>,
    pub equilibrium: Option<RegulationEquilibrium>,
    #[serde(skip)]
    pub states: Vec<DVector<f64>>,
    #[serde(skip)]
    pub outputs: Vec<DVector<f64>>,
}

/// Runs `steps` iterations of the closed loop. Passes when `|y_k| <= y_tol`
/// for all `k >= steps/2` and the last increment `|x_N - x_{N-1}|` is at
/// most `y_tol`.
pub fn simulate_regulation(
    ext: &ExtendedSystem,
    x0: &DVector<f64>,
    steps: usize,
    y_tol: f64,
) -> Result<RegulationVerdict> {
    let traj = ext.system().simulate(x0, steps)?;
    let outputs = traj.states.iter().map(|x| ext.output(x)).collect::<Result<Vec<_>>>();
    let outputs = match outputs {
        Ok(o) => o,
        Err(Error::NonFinite(_)) if traj.blow_up => Vec::new(),
        Err(e) => return Err(e),
    };
    let (xi, z) = ext.split_state(traj.last());
    let final_y = outputs.last().map(|y| y.as_slice().to_vec()).unwrap_or_default();
    if traj.blow_up {
        return Ok(RegulationVerdict {
            pass: false,
            steps,
            y_tol,
            tail_output: f64::INFINITY,
            final_increment: f64::INFINITY,
            converged: false,
            blow_up: true,
            final_xi: xi.as_slice().to_vec(),
            final_z: z.as_slice().to_vec(),
            final_y,
            equilibrium: None,
            states: traj.states,
            outputs,
        });
    }
    let tail_output = outputs[steps / 2..].iter().map(|y| y.norm()).fold(0.0, f64::max);
    let n = traj.states.len();
    let final_increment = if n >= 2 {
        (&traj.states[n - 1] - &traj.states[n - 2]).norm()
    } else {
        0.0
    };
    let converged = final_increment <= y_tol;
    let equilibrium = if converged {
        locate_equilibrium(ext, traj.last()).ok()
    } else {
        None
    };
    Ok(RegulationVerdict {
        pass: converged && tail_output <= y_tol,
        steps,
        y_tol,
        tail_output,
        final_increment,
        converged,
        blow_up: false,
        final_xi: xi.as_slice().to_vec(),
        final_z: z.as_slice().to_vec(),
        final_y,
        equilibrium,
        states: traj.states,
        outputs,
    })
}

/// Polishes an approximate closed-loop equilibrium and reports the
/// integrator value there.
pub fn locate_equilibrium(ext: &ExtendedSystem, guess: &DVector<f64>) -> Result<RegulationEquilibrium> {
    let fp = find_fixed_point(ext.system(), guess, 1e-13, DEFAULT_MAX_ITER)?;
    let x = fp.point();
    let (xi, z) = ext.split_state(&x);
    let y = ext.output(&x)?;
    let kv = ext.k.eval(&PlantModel::stack(&xi, &y))?;
    Ok(RegulationEquilibrium {
        xi: xi.as_slice().to_vec(),
        z: z.as_slice().to_vec(),
        y: y.as_slice().to_vec(),
        integrator_value: kv.norm(),
        residual: fp.residual,
    })
}
