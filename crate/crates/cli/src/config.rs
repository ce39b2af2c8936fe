//! Flat run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use heisgs::cc::{DEFAULT_STRIDE, SYNTH_EPS, SYNTH_RADII};
use heisgs::critical_exponent;
use heisgs::solvers::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    MountainPass,
    ConstrainedMin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub method: SolveMethod,
    pub p: f64,
    pub radius: f64,
    pub grid: usize,
    pub eps: f64,
    pub step_size: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub path_points: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Exhaustion radii.
    pub radii: Vec<f64>,
    pub jobs: usize,
    pub csv: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    /// Mass exponent of the classifier.
    pub q: f64,
    /// Classifier threshold.
    pub mass_eps: f64,
    pub profile_radii: Vec<f64>,
    pub stride: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        RunConfig {
            method: SolveMethod::MountainPass,
            p: s.p,
            radius: s.ball_radius,
            grid: s.nodes_per_axis,
            eps: s.eps,
            step_size: s.step_size,
            max_iters: s.max_iters,
            grad_tol: s.grad_tol,
            path_points: s.path_points,
            seed: s.seed,
            out: None,
            report: None,
            radii: vec![2.0, 3.0, 4.0, 5.0, 6.0],
            jobs: 0,
            csv: None,
            inputs: Vec::new(),
            q: 2.0,
            mass_eps: SYNTH_EPS,
            profile_radii: SYNTH_RADII.to_vec(),
            stride: DEFAULT_STRIDE,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            p: self.p,
            ball_radius: self.radius,
            nodes_per_axis: self.grid,
            eps: self.eps,
            step_size: self.step_size,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            path_points: self.path_points,
            seed: self.seed,
        }
    }

    /// Range checks, run before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let pc = critical_exponent(1)
            .map(|r| *r.numer() as f64 / *r.denom() as f64)
            .expect("n = 1");
        if !(self.p > 1.0 && self.p < pc) {
            return Err(CliError::usage(format!("p = {} outside (1, {pc})", self.p)));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(CliError::usage(format!(
                "radius = {} must be positive",
                self.radius
            )));
        }
        if self.grid < heisgs::grid::MIN_NODES {
            return Err(CliError::usage(format!(
                "grid = {} below {}",
                self.grid,
                heisgs::grid::MIN_NODES
            )));
        }
        self.solver()
            .validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        if self.radii.iter().any(|k| !(*k > 0.0) || !k.is_finite())
            || self.radii.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(CliError::usage(
                "radii must be positive and strictly increasing",
            ));
        }
        if self.profile_radii.is_empty()
            || self
                .profile_radii
                .iter()
                .any(|r| !(*r > 0.0) || !r.is_finite())
        {
            return Err(CliError::usage("profile radii must be positive"));
        }
        if !(self.q >= 1.0) || !self.q.is_finite() {
            return Err(CliError::usage("q must be at least 1"));
        }
        if !(self.mass_eps > 0.0 && self.mass_eps < 0.5) {
            return Err(CliError::usage("classifier eps must lie in (0, 1/2)"));
        }
        if self.stride == 0 {
            return Err(CliError::usage("stride must be positive"));
        }
        Ok(())
    }
}
