//! Ground-state solvers: mountain-pass path deformation, normalized
//! descent on the `L^{p+1}` sphere, an independent Nehari minimizer, domain
//! exhaustion and decay fitting.

mod compare;
mod constrained;
mod decay;
mod exhaustion;
mod mountain_pass;
mod nehari;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{EnergyBreakdown, Functional};
use crate::grid::{build_ball_grid, Domain, ScalarField, MIN_NODES};
use crate::group::{gauge, GroupPoint};
use crate::linalg::{dot, norm_sq};
use crate::scalar::Real;

pub use compare::{
    align_max, compare_methods, field_distance, positivity, MethodComparison, Positivity,
    BRIDGE_TOL, BULK, ENERGY_TOL, FIELD_TOL, NEHARI_TOL,
};
pub use constrained::{constraint_defect, solve_constrained_min, solve_constrained_min_on};
pub use decay::{fit_decay, fit_decay_with_radius, DecayFit};
pub use exhaustion::{
    exhaust_domains, ExhaustionReport, ExhaustionRow, DECAY_R2_FLOOR, EXHAUSTION_REL_TOL,
    MAX_VALUE_FLOOR, XI_SETTLE_RADIUS,
};
pub use mountain_pass::{solve_mountain_pass, solve_mountain_pass_on, PathState};
pub use nehari::{solve_nehari, solve_nehari_on};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub p: f64,
    pub ball_radius: f64,
    pub nodes_per_axis: usize,
    pub eps: f64,
    /// Initial step length; later steps come from the line search.
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once `||residual||_2 / ||u||_2` drops below this.
    pub grad_tol: f64,
    pub path_points: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            p: 2.0,
            ball_radius: 6.0,
            nodes_per_axis: 48,
            eps: 1.0,
            step_size: 0.05,
            max_iters: 20_000,
            grad_tol: 1e-7,
            path_points: 17,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        Functional::new(self.p, self.eps)?;
        if !(self.ball_radius > 0.0) || !self.ball_radius.is_finite() {
            return Err(Error::config("ball radius must be positive"));
        }
        if self.nodes_per_axis < MIN_NODES {
            return Err(Error::config(format!(
                "grid must have at least {MIN_NODES} nodes per axis"
            )));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::config("step size must be positive"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::config("grad_tol must be positive"));
        }
        if self.path_points < 9 {
            return Err(Error::config("path needs at least 9 points"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be positive"));
        }
        Ok(())
    }

    pub fn functional(&self) -> Result<Functional<f64>> {
        Functional::new(self.p, self.eps)
    }

    pub fn domain(&self) -> Result<Arc<Domain<f64>>> {
        self.validate()?;
        build_ball_grid(self.ball_radius, self.nodes_per_axis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MountainPass,
    ConstrainedMin,
    Nehari,
}

/// Result of one solve. `field` is the PDE-normalized solution.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub method: Method,
    #[serde(skip)]
    pub field: ScalarField<f64>,
    /// `c_k` for the mountain pass and Nehari solvers, `alpha` for the
    /// constrained one.
    pub level: f64,
    pub multiplier: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub breakdown: EnergyBreakdown,
    pub max_point: GroupPoint<f64>,
    pub max_value: f64,
    pub min_value: f64,
    pub diagnostics: Criticality,
}

/// The three criticality measures of a PDE-normalized field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criticality {
    /// `||residual||_2 / ||u||_2`.
    pub relative_residual: f64,
    /// `<grad J(u), u>_h / ||u||^2`.
    pub relative_nehari: f64,
    /// `|J(u) - (p-1)/(2(p+1)) ||u||^2| / J(u)`.
    pub relative_identity: f64,
    pub nehari_t: f64,
}

impl Criticality {
    pub fn measure(func: &Functional<f64>, u: &ScalarField<f64>) -> Self {
        let w = u.grid().cell_volume();
        let au = func.apply_a(u.domain(), u.values());
        let g = func.grad_from(u.values(), &au);
        let un = norm_sq(u.values());
        let e2 = dot(&au, u.values()) * w;
        let j = func.j_from(u.values(), &au, w);
        let p = func.p();
        let kappa = (p - 1.0) / (2.0 * (p + 1.0));
        let b = func.nl_sum(u.values()) * w;
        Criticality {
            relative_residual: if un > 0.0 {
                (norm_sq(&g) / un).sqrt()
            } else {
                0.0
            },
            relative_nehari: if e2 > 0.0 {
                dot(&g, u.values()) * w / e2
            } else {
                0.0
            },
            relative_identity: if j != 0.0 {
                ((j - kappa * e2) / j).abs()
            } else {
                0.0
            },
            nehari_t: if b > 0.0 && e2 > 0.0 {
                (e2 / b).powf(1.0 / (p - 1.0))
            } else {
                f64::NAN
            },
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.relative_residual < tol
            && self.relative_nehari.abs() < tol
            && self.relative_identity < tol
    }
}

pub(crate) fn finish_report(
    method: Method,
    func: &Functional<f64>,
    field: ScalarField<f64>,
    level: f64,
    multiplier: Option<f64>,
    converged: bool,
    iterations: usize,
    trace: Vec<TraceEntry>,
) -> SolveReport {
    let (imax, max_value) = field.argmax().unwrap_or((0, 0.0));
    SolveReport {
        method,
        level,
        multiplier,
        converged,
        iterations,
        trace,
        breakdown: func.breakdown(&field),
        max_point: field.grid().node_point(imax),
        max_value,
        min_value: field.min_masked().unwrap_or(0.0),
        diagnostics: Criticality::measure(func, &field),
        field,
    }
}

/// Centered bump `exp(-rho^2)` on the mask.
pub fn gauge_bump<F: Real>(domain: &Arc<Domain<F>>) -> ScalarField<F> {
    ScalarField::from_fn(domain.clone(), |x, y, t| {
        let r = gauge(&GroupPoint::h1(x, y, t));
        (-r * r).exp()
    })
}

/// `t b` for the centered bump `b`, with `t` doubled from 1 until
/// `J(t b) < 0`.
pub fn pick_u0<F: Real>(domain: &Arc<Domain<F>>, func: &Functional<F>) -> Result<ScalarField<F>> {
    if domain.interior_count() == 0 {
        return Err(Error::config("domain has no interior nodes"));
    }
    let b = gauge_bump(domain);
    let mut t = F::one();
    for _ in 0..=60 {
        let u = b.scaled(t);
        if func.eval_j(&u) < F::zero() {
            return Ok(u);
        }
        t = t + t;
    }
    Err(Error::config(
        "no negative-energy multiple of the bump after 60 doublings",
    ))
}

/// Relative criticality tolerance used to call a solve converged in the
/// triple check.
pub const CRITICALITY_TOL: f64 = 1e-3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        for bad in [
            SolverConfig {
                p: 3.0,
                ..Default::default()
            },
            SolverConfig {
                p: 1.0,
                ..Default::default()
            },
            SolverConfig {
                ball_radius: 0.0,
                ..Default::default()
            },
            SolverConfig {
                nodes_per_axis: 7,
                ..Default::default()
            },
            SolverConfig {
                path_points: 8,
                ..Default::default()
            },
            SolverConfig {
                grad_tol: 0.0,
                ..Default::default()
            },
            SolverConfig {
                step_size: -1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
        let json = r#"{"p": 2.0, "bogus": 1}"#;
        assert!(serde_json::from_str::<SolverConfig>(json).is_err());
        let partial: SolverConfig = serde_json::from_str(r#"{"p": 1.5}"#).unwrap();
        assert_eq!(partial.p, 1.5);
        assert_eq!(partial.nodes_per_axis, 48);
    }

    #[test]
    fn u0_has_negative_energy_and_extends() {
        use crate::grid::BallLattice;
        let lat = BallLattice::for_ball(3.0f64, 20).unwrap();
        let small = lat.domain(2.0).unwrap();
        let f = Functional::new(2.0, 1.0).unwrap();
        let u0 = pick_u0(&small, &f).unwrap();
        let j = f.eval_j(&u0);
        assert!(j < 0.0);
        let big = lat.domain(3.0).unwrap();
        let v = u0.extend_to(&big).unwrap();
        assert!((f.eval_j(&v) - j).abs() <= 1e-12 * j.abs());
    }
}
