//! Mountain-pass levels on a nested family of gauge balls.
//!
//! All balls live on one lattice (spacing set by the largest radius), so a
//! field on `B_k` zero-extends exactly into `B_{k'}` for `k < k'`, and the
//! endpoint `u0` picked on the smallest ball is reused for every radius.

use rayon::prelude::*;
use serde::Serialize;

use super::decay::fit_decay;
use super::mountain_pass::solve_mountain_pass_on;
use super::{pick_u0, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::BallLattice;
use crate::group::{gauge, GroupPoint};

/// Relative slack in `c_{k+1} <= c_k`.
pub const EXHAUSTION_REL_TOL: f64 = 1e-6;
/// Lower bound on the PDE-normalized maximum, with discretization slack.
pub const MAX_VALUE_FLOOR: f64 = 0.95;
/// Required quality of the decay fit.
pub const DECAY_R2_FLOOR: f64 = 0.98;
/// Radius from which the max point must have settled.
pub const XI_SETTLE_RADIUS: f64 = 4.0;

#[derive(Clone, Debug, Serialize)]
pub struct ExhaustionRow {
    pub k: f64,
    pub c_k: f64,
    pub converged: bool,
    pub iterations: usize,
    pub relative_residual: f64,
    pub max_value: f64,
    pub min_value: f64,
    pub xi: GroupPoint<f64>,
    pub xi_gauge: f64,
    /// `NaN` when the fit had too little data.
    pub delta: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExhaustionReport {
    pub lattice: BallLattice<f64>,
    pub rows: Vec<ExhaustionRow>,
    /// Radii whose solve returned an error, with the message.
    pub failures: Vec<(f64, String)>,
    pub monotone: bool,
    pub xi_bound: f64,
    pub xi_settled: bool,
    pub violations: Vec<String>,
    #[serde(skip)]
    pub solves: Vec<SolveReport>,
}

impl ExhaustionReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.violations.is_empty()
    }
}

/// Runs the mountain pass on `B_k` for each radius. `config.nodes_per_axis`
/// fixes the lattice of the largest ball; `jobs` bounds the number of
/// concurrent solves (`0` uses the global pool).
pub fn exhaust_domains(
    radii: &[f64],
    config: &SolverConfig,
    jobs: usize,
) -> Result<ExhaustionReport> {
    config.validate()?;
    if radii.is_empty() {
        return Err(Error::config("no radii given"));
    }
    if radii.iter().any(|k| !(*k > 0.0) || !k.is_finite()) || radii.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::config(
            "radii must be positive and strictly increasing",
        ));
    }
    let kmax = radii[radii.len() - 1];
    let lattice = BallLattice::for_ball(kmax, config.nodes_per_axis)?;
    let func = config.functional()?;
    let small = lattice.domain(radii[0])?;
    let u0 = pick_u0(&small, &func)?;

    let solve = |k: f64| -> Result<SolveReport> {
        let domain = lattice.domain(k)?;
        let cfg = SolverConfig {
            ball_radius: k,
            ..config.clone()
        };
        solve_mountain_pass_on(&domain, &u0.extend_to(&domain)?, &cfg)
    };
    let results: Vec<Result<SolveReport>> = if jobs == 0 {
        radii.par_iter().map(|k| solve(*k)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
        pool.install(|| radii.par_iter().map(|k| solve(*k)).collect())
    };

    let mut rows = Vec::new();
    let mut solves = Vec::new();
    let mut failures = Vec::new();
    let mut violations = Vec::new();
    for (k, res) in radii.iter().zip(results) {
        let r = match res {
            Ok(r) => r,
            Err(e) => {
                failures.push((*k, e.to_string()));
                continue;
            }
        };
        let (delta, r2) = match fit_decay(&r.field) {
            Ok(fit) => (fit.delta, fit.r_squared),
            Err(e) => {
                violations.push(format!("k={k}: decay fit failed: {e}"));
                (f64::NAN, f64::NAN)
            }
        };
        let row = ExhaustionRow {
            k: *k,
            c_k: r.level,
            converged: r.converged,
            iterations: r.iterations,
            relative_residual: r.diagnostics.relative_residual,
            max_value: r.max_value,
            min_value: r.min_value,
            xi: r.max_point.clone(),
            xi_gauge: gauge(&r.max_point),
            delta,
            r2,
        };
        if !row.converged {
            violations.push(format!(
                "k={k}: not converged after {} iterations",
                row.iterations
            ));
        }
        if row.max_value < MAX_VALUE_FLOOR {
            violations.push(format!(
                "k={k}: max value {} below {MAX_VALUE_FLOOR}",
                row.max_value
            ));
        }
        if !(row.delta > 0.0 && row.r2 > DECAY_R2_FLOOR) && !row.delta.is_nan() {
            violations.push(format!(
                "k={k}: decay fit delta={} r2={}",
                row.delta, row.r2
            ));
        }
        rows.push(row);
        solves.push(r);
    }

    let mut monotone = true;
    for w in rows.windows(2) {
        if w[1].c_k > w[0].c_k * (1.0 + EXHAUSTION_REL_TOL) {
            monotone = false;
            violations.push(format!(
                "c_k increased: c({})={} < c({})={}",
                w[0].k, w[0].c_k, w[1].k, w[1].c_k
            ));
        }
    }
    let xi_bound = rows.iter().map(|r| r.xi_gauge).fold(0.0, f64::max);
    // one cell, measured in the gauge
    let cell = gauge(&GroupPoint::h1(lattice.h_xy, lattice.h_xy, lattice.h_t));
    let settled: Vec<f64> = rows
        .iter()
        .filter(|r| r.k >= XI_SETTLE_RADIUS)
        .map(|r| r.xi_gauge)
        .collect();
    let spread = settled.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b))
        - settled.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let xi_settled = settled.len() < 2 || spread <= cell;
    if !xi_settled {
        violations.push(format!(
            "max points for k >= {XI_SETTLE_RADIUS} spread over {spread} in gauge, cell is {cell}"
        ));
    }
    Ok(ExhaustionReport {
        lattice,
        rows,
        failures,
        monotone,
        xi_bound,
        xi_settled,
        violations,
        solves,
    })
}
