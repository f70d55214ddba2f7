use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use totalstab::dynamics::{SamplingPlan, SetShape};

use crate::error::CliError;

/// Top-level run configuration. Every field not marked optional must be
/// present; unknown fields are rejected.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub system: Option<SystemSpec>,
    pub certificate: Option<CertificateSpec>,
    pub sets: Option<Sets>,
    pub equilibrium: Option<EquilibriumSpec>,
    pub regulation: Option<RegulationSpec>,
    pub counterexample: Option<CounterexampleSpec>,
}

fn default_safety() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub interior: usize,
    pub boundary: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            interior: 4096,
            boundary: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub fixed_point: f64,
    pub max_iter: usize,
    pub basin_steps: usize,
    pub basin_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            fixed_point: 1e-10,
            max_iter: 200,
            basin_steps: 200,
            basin_tol: 1e-8,
        }
    }
}

/// Nominal map `f` and optional perturbed map `f̂`, one expression per
/// coordinate in `x1..xn` and parameters `s1..`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub dim: usize,
    pub f: Vec<String>,
    #[serde(default)]
    pub params: Vec<f64>,
    pub f_hat: Option<Vec<String>>,
    #[serde(default)]
    pub f_hat_params: Vec<f64>,
    /// upper end of the ε search
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    /// decay `a`; defaults to `(ρ(J)² + 1) / 2`
    pub decay: Option<f64>,
    /// `Π` by rows; defaults to the Stein solution
    pub pi: Option<Vec<Vec<f64>>>,
}

fn default_r_max() -> f64 {
    1.0
}

/// Global Lyapunov function `V` with decrease factor `ρ` on `{V <= level}`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    pub v: String,
    pub rho: f64,
    pub level: f64,
    #[serde(default)]
    pub params: Vec<f64>,
    pub search_radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    Ball { radius: f64, center: Option<Vec<f64>> },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ellipsoid { pi: Vec<Vec<f64>>, level: f64 },
}

impl SetSpec {
    pub fn shape(&self, dim: usize, field: &str) -> Result<SetShape, CliError> {
        let shape = match self {
            SetSpec::Ball { radius, center } => {
                let c = center.clone().unwrap_or_else(|| vec![0.0; dim]);
                SetShape::Ball {
                    center: DVector::from_vec(c),
                    radius: *radius,
                }
            }
            SetSpec::Box { lo, hi } => SetShape::Box {
                lo: DVector::from_vec(lo.clone()),
                hi: DVector::from_vec(hi.clone()),
            },
            SetSpec::Ellipsoid { pi, level } => SetShape::ellipsoid(matrix(pi, field)?, *level),
        };
        if shape.dim() != dim {
            return Err(CliError::Config(format!(
                "{field}: set has dimension {}, expected {dim}",
                shape.dim()
            )));
        }
        Ok(shape)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Sets {
    pub c_bar: Option<SetSpec>,
    pub c_lower: Option<SetSpec>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSpec {
    pub x0: Option<Vec<f64>>,
    /// sublevel pair and slack for the annulus uniqueness check
    pub c_lower: Option<f64>,
    pub c_upper: Option<f64>,
    pub rho_tilde: Option<f64>,
    #[serde(default = "default_uniqueness_seeds")]
    pub uniqueness_seeds: usize,
}

fn default_uniqueness_seeds() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub phi: Vec<String>,
    pub g: Vec<String>,
    pub h: Vec<String>,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    /// `k(ξ, y)` per output in `x1..`, `y1..`
    pub k: Vec<String>,
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum MappingSpec {
    Linear,
    Numeric { degree: usize, ridge: f64, half_width: f64 },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardingSpec {
    /// `W(ξ) = ξᵀPξ` by rows
    pub w: Vec<Vec<f64>>,
    pub mapping: MappingSpec,
    #[serde(default = "default_u_max")]
    pub u_max: f64,
    #[serde(default = "default_forwarding_tol")]
    pub tol: f64,
}

fn default_u_max() -> f64 {
    10.0
}

fn default_forwarding_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ControllerSpec {
    /// `α(ξ, z)` per input in `x1..`, `z1..`
    Alpha(Vec<String>),
    Forwarding(ForwardingSpec),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RegulationSpec {
    pub q: usize,
    pub m: usize,
    pub p: usize,
    pub plant: PlantSpec,
    pub plant_hat: PlantSpec,
    pub integrator: Option<IntegratorSpec>,
    pub controller: ControllerSpec,
    pub x0: Vec<f64>,
    pub steps: usize,
    pub y_tol: f64,
    /// half-width of the `(ξ, y_a, y_b)` box used to check the integrator
    #[serde(default = "default_integrator_box")]
    pub integrator_box: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

fn default_integrator_box() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSpec {
    #[serde(default = "default_ce_dim")]
    pub dimension: usize,
    #[serde(default)]
    pub levels: Vec<f64>,
    #[serde(default = "default_ce_rmax")]
    pub r_max: f64,
    #[serde(default = "default_ce_grid")]
    pub grid: usize,
    #[serde(default = "default_ce_profile")]
    pub profile_points: usize,
    #[serde(default = "default_ce_shells")]
    pub shell_samples: usize,
}

fn default_ce_dim() -> usize {
    2
}

fn default_ce_rmax() -> f64 {
    8.0
}

fn default_ce_grid() -> usize {
    20_000
}

fn default_ce_profile() -> usize {
    401
}

fn default_ce_shells() -> usize {
    10_000
}

pub fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(CliError::Config(format!(
            "{field}: matrix rows must be non-empty and equally long"
        )));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok((cfg, text))
    }

    pub fn plan(&self) -> SamplingPlan {
        SamplingPlan::new(self.sampling.interior, self.sampling.boundary, self.seed)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad(format!("safety: {} must lie in (0, 1]", self.safety));
        }
        if let Some(s) = &self.system {
            if s.f.len() != s.dim {
                return bad(format!("system.f: {} expressions for dimension {}", s.f.len(), s.dim));
            }
            if let Some(fh) = &s.f_hat {
                if fh.len() != s.dim {
                    return bad(format!(
                        "system.f_hat: {} expressions for dimension {}",
                        fh.len(),
                        s.dim
                    ));
                }
            }
            if let Some(pi) = &s.pi {
                if pi.len() != s.dim || pi.iter().any(|r| r.len() != s.dim) {
                    return bad(format!("system.pi: must be {0} x {0}", s.dim));
                }
            }
        }
        if let Some(r) = &self.regulation {
            for (name, plant) in [("plant", &r.plant), ("plant_hat", &r.plant_hat)] {
                if plant.phi.len() != r.q || plant.g.len() != r.q || plant.h.len() != r.p {
                    return bad(format!(
                        "regulation.{name}: needs {} phi, {} g and {} h expressions",
                        r.q, r.q, r.p
                    ));
                }
            }
            if r.x0.len() != r.q + r.p {
                return bad(format!(
                    "regulation.x0: length {} but q + p = {}",
                    r.x0.len(),
                    r.q + r.p
                ));
            }
            if let ControllerSpec::Alpha(a) = &r.controller {
                if a.len() != r.m {
                    return bad(format!(
                        "regulation.controller.alpha: {} expressions for m = {}",
                        a.len(),
                        r.m
                    ));
                }
            }
            if let Some(k) = &r.integrator {
                if k.k.len() != r.p {
                    return bad(format!(
                        "regulation.integrator.k: {} expressions for p = {}",
                        k.k.len(),
                        r.p
                    ));
                }
            }
        }
        Ok(())
    }
}
