//! Run configuration: flat key-value ASCII with dotted section keys.
//!
//! ```text
//! # comment
//! mesh = meshes/naca0012.m2d
//! scheme = dgp1
//! freestream.mach = 0.8
//! freestream.aoa = 1.25
//! param.kind = ffd
//! ffd.nx = 4
//! ffd.box = -0.05 -0.1 1.05 0.1
//! ...
//! ```
//!
//! Unknown keys are rejected so typos fail fast. The full key table lives
//! in the README.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::disc::Scheme;
use crate::error::{Error, Result};
use crate::euler::RiemannSolver;
use crate::solver::{AvIndicator, AvVariant, Precond, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Ffd,
    HicksHenne,
}

#[derive(Clone, Debug)]
pub struct FfdConfig {
    pub nx: usize,
    pub ny: usize,
    /// xmin ymin xmax ymax.
    pub bbox: [f64; 4],
    pub move_x: bool,
    pub bound_frac: f64,
}

#[derive(Clone, Debug)]
pub struct HhConfig {
    pub n_bumps: usize,
    pub t: f64,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mesh: PathBuf,
    pub scheme: Scheme,
    pub mach: f64,
    pub aoa_deg: f64,
    pub gamma: f64,
    pub param_kind: ParamKind,
    pub ffd: FfdConfig,
    pub hh: HhConfig,
    pub rbf_radius: f64,
    pub rbf_regularization: f64,
    pub solver: SolverConfig,
    pub adjoint_sigma_rel: f64,
    pub adjoint_random_steps: bool,
    pub adjoint_seed: u64,
    pub gradcheck_sigma_rel: f64,
    pub gradcheck_tol: f64,
    pub opt_max_iter: usize,
    pub opt_kkt_tol: f64,
    pub opt_noise_floor: f64,
    pub opt_merit_rho_margin: f64,
    pub opt_remap: bool,
    pub deform_design: Vec<f64>,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: PathBuf::new(),
            scheme: Scheme::DgP1,
            mach: 0.8,
            aoa_deg: 1.25,
            gamma: 1.4,
            param_kind: ParamKind::Ffd,
            ffd: FfdConfig {
                nx: 4,
                ny: 2,
                bbox: [-0.05, -0.1, 1.05, 0.1],
                move_x: false,
                bound_frac: 0.25,
            },
            hh: HhConfig {
                n_bumps: 8,
                t: 3.0,
                bound: 0.05,
            },
            rbf_radius: 10.0,
            rbf_regularization: 1e-12,
            solver: SolverConfig::new(Scheme::DgP1),
            adjoint_sigma_rel: 1e-6,
            adjoint_random_steps: false,
            adjoint_seed: 0,
            gradcheck_sigma_rel: 1e-4,
            gradcheck_tol: 1e-3,
            opt_max_iter: 30,
            opt_kkt_tol: 1e-6,
            opt_noise_floor: 1e-5,
            opt_merit_rho_margin: 1.1,
            opt_remap: true,
            deform_design: Vec::new(),
            output: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn parse_file(path: impl AsRef<Path>) -> Result<RunConfig> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
        let mut cfg = Self::parse_str(&text)?;
        // mesh paths are relative to the config file
        if cfg.mesh.is_relative() {
            if let Some(dir) = path.as_ref().parent() {
                cfg.mesh = dir.join(&cfg.mesh);
            }
        }
        Ok(cfg)
    }

    pub fn parse_str(text: &str) -> Result<RunConfig> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", ln + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if map.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }
        Self::from_map(map)
    }

    fn from_map(map: BTreeMap<String, String>) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut scheme_set = false;
        for (key, value) in &map {
            let v = value.as_str();
            match key.as_str() {
                "mesh" => cfg.mesh = PathBuf::from(v),
                "scheme" => {
                    cfg.scheme = Scheme::parse(v)?;
                    scheme_set = true;
                }
                "freestream.mach" => cfg.mach = num(key, v)?,
                "freestream.aoa" => cfg.aoa_deg = num(key, v)?,
                "freestream.gamma" => cfg.gamma = num(key, v)?,
                "param.kind" => {
                    cfg.param_kind = match v {
                        "ffd" => ParamKind::Ffd,
                        "hh" => ParamKind::HicksHenne,
                        other => {
                            return Err(Error::Config(format!("unknown param.kind `{other}`")))
                        }
                    }
                }
                "ffd.nx" => cfg.ffd.nx = num_usize(key, v)?,
                "ffd.ny" => cfg.ffd.ny = num_usize(key, v)?,
                "ffd.box" => {
                    let nums = num_list(key, v, 4)?;
                    cfg.ffd.bbox = [nums[0], nums[1], nums[2], nums[3]];
                }
                "ffd.axes" => {
                    cfg.ffd.move_x = match v {
                        "y" => false,
                        "xy" => true,
                        other => return Err(Error::Config(format!("ffd.axes must be y or xy, got `{other}`"))),
                    }
                }
                "ffd.bound_frac" => cfg.ffd.bound_frac = num(key, v)?,
                "hh.n" => cfg.hh.n_bumps = num_usize(key, v)?,
                "hh.t" => cfg.hh.t = num(key, v)?,
                "hh.bound" => cfg.hh.bound = num(key, v)?,
                "rbf.radius" => cfg.rbf_radius = num(key, v)?,
                "rbf.regularization" => cfg.rbf_regularization = num(key, v)?,
                "solver.cfl0" => cfg.solver.cfl0 = num(key, v)?,
                "solver.cfl_max" => cfg.solver.cfl_max = num(key, v)?,
                "solver.theta_min" => cfg.solver.theta_min = num(key, v)?,
                "solver.theta_max" => cfg.solver.theta_max = num(key, v)?,
                "solver.tol" => cfg.solver.tol_rel = num(key, v)?,
                "solver.max_steps" => cfg.solver.max_steps = num_usize(key, v)?,
                "solver.riemann" => {
                    cfg.solver.riemann = match v {
                        "llf" => RiemannSolver::Llf,
                        "hllc" => RiemannSolver::Hllc,
                        other => return Err(Error::Config(format!("unknown riemann solver `{other}`"))),
                    }
                }
                "solver.fv2_freeze_tol" => cfg.solver.fv2_freeze_tol = num(key, v)?,
                "av.c_eps" => cfg.solver.av_c_eps = num(key, v)?,
                "av.beta" => cfg.solver.av_beta = num(key, v)?,
                "av.variant" => {
                    cfg.solver.av_variant = match v {
                        "volume" => AvVariant::VolumeResidual,
                        "face" => AvVariant::FaceFlux,
                        other => return Err(Error::Config(format!("unknown av.variant `{other}`"))),
                    }
                }
                "av.indicator" => {
                    cfg.solver.av_indicator = match v {
                        "always" => AvIndicator::Always,
                        "modal" => AvIndicator::ModalDecay { cutoff: 1e-4 },
                        other => return Err(Error::Config(format!("unknown av.indicator `{other}`"))),
                    }
                }
                "av.modal_cutoff" => {
                    cfg.solver.av_indicator = AvIndicator::ModalDecay { cutoff: num(key, v)? }
                }
                "linear.tol" => cfg.solver.gmres_tol = num(key, v)?,
                "linear.adjoint_tol" => cfg.solver.adjoint_tol = num(key, v)?,
                "linear.restart" => cfg.solver.gmres_restart = num_usize(key, v)?,
                "linear.max_iters" => cfg.solver.gmres_max_iters = num_usize(key, v)?,
                "linear.precond" => {
                    cfg.solver.precond = match v {
                        "ilu0" => Precond::Ilu0,
                        "bjacobi" => Precond::BlockJacobi,
                        "none" => Precond::None,
                        other => return Err(Error::Config(format!("unknown preconditioner `{other}`"))),
                    }
                }
                "adjoint.sigma_rel" => cfg.adjoint_sigma_rel = num(key, v)?,
                "adjoint.random_steps" => cfg.adjoint_random_steps = boolean(key, v)?,
                "adjoint.seed" => cfg.adjoint_seed = num_usize(key, v)? as u64,
                "gradcheck.sigma_rel" => cfg.gradcheck_sigma_rel = num(key, v)?,
                "gradcheck.tol" => cfg.gradcheck_tol = num(key, v)?,
                "opt.max_iter" => cfg.opt_max_iter = num_usize(key, v)?,
                "opt.kkt_tol" => cfg.opt_kkt_tol = num(key, v)?,
                "opt.noise_floor" => cfg.opt_noise_floor = num(key, v)?,
                "opt.merit_rho_margin" => cfg.opt_merit_rho_margin = num(key, v)?,
                "opt.remap" => cfg.opt_remap = boolean(key, v)?,
                "deform.design" => {
                    cfg.deform_design = v
                        .split_whitespace()
                        .map(|t| t.parse::<f64>().map_err(|_| bad(key, t)))
                        .collect::<Result<Vec<f64>>>()?;
                }
                "output" => cfg.output = PathBuf::from(v),
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        if !scheme_set {
            return Err(Error::Config("missing required key `scheme`".into()));
        }
        if cfg.mesh.as_os_str().is_empty() {
            return Err(Error::Config("missing required key `mesh`".into()));
        }
        cfg.solver.scheme = cfg.scheme;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mach <= 0.0 || self.gamma <= 1.0 {
            return Err(Error::Config("freestream requires mach > 0 and gamma > 1".into()));
        }
        if self.rbf_radius <= 0.0 {
            return Err(Error::Config("rbf.radius must be positive".into()));
        }
        if self.adjoint_sigma_rel <= 0.0 || self.gradcheck_sigma_rel <= 0.0 {
            return Err(Error::Config("perturbation scales must be positive".into()));
        }
        self.solver.validate()
    }

    /// Serializes back to the config grammar (used by checkpoints).
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mesh = {}", self.mesh.display());
        let _ = writeln!(s, "scheme = {}", self.scheme.name());
        let _ = writeln!(s, "freestream.mach = {:.16e}", self.mach);
        let _ = writeln!(s, "freestream.aoa = {:.16e}", self.aoa_deg);
        let _ = writeln!(s, "freestream.gamma = {:.16e}", self.gamma);
        let _ = writeln!(
            s,
            "param.kind = {}",
            match self.param_kind {
                ParamKind::Ffd => "ffd",
                ParamKind::HicksHenne => "hh",
            }
        );
        let _ = writeln!(s, "ffd.nx = {}", self.ffd.nx);
        let _ = writeln!(s, "ffd.ny = {}", self.ffd.ny);
        let _ = writeln!(
            s,
            "ffd.box = {:.16e} {:.16e} {:.16e} {:.16e}",
            self.ffd.bbox[0], self.ffd.bbox[1], self.ffd.bbox[2], self.ffd.bbox[3]
        );
        let _ = writeln!(s, "ffd.axes = {}", if self.ffd.move_x { "xy" } else { "y" });
        let _ = writeln!(s, "ffd.bound_frac = {:.16e}", self.ffd.bound_frac);
        s
    }
}

fn bad(key: &str, v: &str) -> Error {
    Error::Config(format!("bad value `{v}` for key `{key}`"))
}

fn num(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| bad(key, v))
}

fn num_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| bad(key, v))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, v)),
    }
}

fn num_list(key: &str, v: &str, n: usize) -> Result<Vec<f64>> {
    let nums: Result<Vec<f64>> = v
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad(key, t)))
        .collect();
    let nums = nums?;
    if nums.len() != n {
        return Err(Error::Config(format!(
            "key `{key}` expects {n} numbers, got {}",
            nums.len()
        )));
    }
    Ok(nums)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
mesh = m.m2d
scheme = dgp1
";

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::parse_str(MINIMAL).unwrap();
        assert_eq!(cfg.scheme, Scheme::DgP1);
        assert_eq!(cfg.mach, 0.8);
        assert_eq!(cfg.rbf_radius, 10.0);
    }

    #[test]
    fn invalid_scheme_rejected_before_compute() {
        let text = "mesh = m.m2d\nscheme = dg9\n";
        let err = RunConfig::parse_str(text).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{MINIMAL}solver.warp_factor = 9\n");
        assert!(RunConfig::parse_str(&text).is_err());
    }

    #[test]
    fn values_and_comments() {
        let text = "\
# drag minimization case
mesh = naca.m2d
scheme = fv2
freestream.mach = 0.726   # RAE condition
ffd.box = -0.1 -0.2 1.1 0.2
opt.remap = false
av.variant = face
";
        let cfg = RunConfig::parse_str(text).unwrap();
        assert_eq!(cfg.scheme, Scheme::Fv2);
        assert_eq!(cfg.mach, 0.726);
        assert_eq!(cfg.ffd.bbox, [-0.1, -0.2, 1.1, 0.2]);
        assert!(!cfg.opt_remap);
        assert_eq!(cfg.solver.av_variant, AvVariant::FaceFlux);
    }

    #[test]
    fn av_constant_range_enforced() {
        let text = format!("{MINIMAL}av.c_eps = 0.9\n");
        assert!(RunConfig::parse_str(&text).is_err());
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = format!("{MINIMAL}scheme = fv1\n");
        assert!(RunConfig::parse_str(&text).is_err());
    }
}
