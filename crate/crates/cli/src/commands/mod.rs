mod analyze;
mod bounds;
mod counterexample;
mod distance;
mod equilibrium;
mod regulate;

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use totalstab::bounds::GlobalLyapunovCertificate;
use totalstab::dynamics::{CompactSetSampler, SetShape, SystemMap};
use totalstab::lyapunov::{ContractionCertificate, LyapunovFunction, QuadraticForm};

use crate::config::{RunConfig, SystemSpec};
use crate::error::{in_field, CliError};

pub use analyze::run as analyze;
pub use bounds::run as bounds;
pub use counterexample::run as counterexample;
pub use distance::run as distance;
pub use equilibrium::run as equilibrium;
pub use regulate::run as regulate;

pub struct Context {
    pub cfg: RunConfig,
    pub config_text: String,
    pub out: PathBuf,
}

/// What a command produced: the JSON text already written and the verdict.
pub struct Outcome {
    pub pass: bool,
    pub json: String,
}

impl Context {
    pub fn system(&self) -> Result<&SystemSpec, CliError> {
        self.cfg
            .system
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `system` section".into()))
    }

    pub fn c_bar(&self, dim: usize) -> Result<Option<CompactSetSampler>, CliError> {
        let spec = self.cfg.sets.as_ref().and_then(|s| s.c_bar.as_ref());
        spec.map(|s| Ok(CompactSetSampler::new(s.shape(dim, "sets.c_bar")?, self.cfg.plan())?))
            .transpose()
    }

    pub fn c_lower_shape(&self, dim: usize) -> Result<Option<SetShape>, CliError> {
        let spec = self.cfg.sets.as_ref().and_then(|s| s.c_lower.as_ref());
        spec.map(|s| s.shape(dim, "sets.c_lower")).transpose()
    }

    pub fn global_certificate(&self, dim: usize) -> Result<Option<GlobalLyapunovCertificate>, CliError> {
        let Some(c) = &self.cfg.certificate else {
            return Ok(None);
        };
        let mut v = in_field(
            LyapunovFunction::from_expr(dim, &c.v, c.rho, &c.params),
            "certificate.v",
        )?;
        if let Some(r) = c.search_radius {
            v = v.with_search_radius(r);
        }
        Ok(Some(GlobalLyapunovCertificate::new(v, c.level)?))
    }
}

pub fn nominal_map(spec: &SystemSpec) -> Result<SystemMap, CliError> {
    in_field(SystemMap::from_exprs(&spec.f, &spec.params), "system.f")
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Linearization and local certificate of a nominal map.
#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    /// `[re, im]` pairs, sorted
    pub eigenvalues: Vec<[f64; 2]>,
    pub spectral_radius: f64,
    pub a: f64,
    pub pi: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    pub origin_margin: f64,
    pub lmi_samples: usize,
    #[serde(skip)]
    pub certificate: ContractionCertificate,
}

pub fn certify(ctx: &Context, f: &SystemMap) -> Result<Analysis, CliError> {
    let spec = ctx.system()?;
    let n = f.dim();
    f.check_origin_equilibrium()?;
    let j0 = f.jacobian(&DVector::zeros(n))?;
    let mut eigenvalues: Vec<[f64; 2]> = j0.complex_eigenvalues().iter().map(|c| [c.re, c.im]).collect();
    eigenvalues.sort_by(|x, y| x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1])));
    let rho = totalstab::linalg::spectral_radius(&j0);
    if rho >= 1.0 {
        return Err(totalstab::Error::UnstableLinearization(rho).into());
    }
    let a = match spec.decay {
        Some(a) => a,
        None => totalstab::lyapunov::default_decay(&j0)?,
    };
    let pi = match &spec.pi {
        Some(p) => QuadraticForm::new(crate::config::matrix(p, "system.pi")?)?,
        None => totalstab::lyapunov::solve_stein(&j0, a)?,
    };
    let cert = totalstab::lyapunov::find_epsilon(f, &pi, a, spec.r_max, ctx.cfg.plan())?;
    Ok(Analysis {
        eigenvalues,
        spectral_radius: rho,
        a,
        pi: rows(cert.pi.matrix()),
        epsilon: cert.epsilon,
        worst_margin: cert.worst_margin,
        worst_point: cert.worst_point.clone(),
        origin_margin: cert.origin_margin,
        lmi_samples: cert.samples,
        certificate: cert,
    })
}
