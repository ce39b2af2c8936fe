//! Minimization of `I` on `M = { int u_+^{p+1} = 1 }`.
//!
//! Each step moves along the projected gradient `A u - lambda u_+^p`,
//! `lambda = 2 I(u)`, which is the gradient of the scale-free quotient
//! `I(u) / C(u)^{2/(p+1)}` on `M`, then rescales back onto `M`. Step
//! lengths come from Barzilai-Borwein with Armijo backtracking on the
//! quotient, so `I` never increases between accepted iterates.

use std::sync::Arc;

use rayon::prelude::*;

use super::{finish_report, gauge_bump, Method, SolveReport, SolverConfig, TraceEntry};
use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::grid::{Domain, ScalarField};
use crate::linalg::{dot, lincomb, norm_sq, scale_in_place};

const ARMIJO: f64 = 1e-4;
const REFRESH: usize = 50;
const MAX_BACKTRACK: usize = 60;
/// Relative slack in the decrease test for rounding in `I`.
const ROUNDOFF: f64 = 1e-14;

pub fn solve_constrained_min(config: &SolverConfig) -> Result<SolveReport> {
    let domain = config.domain()?;
    solve_constrained_min_on(&domain, config)
}

pub fn solve_constrained_min_on(
    domain: &Arc<Domain<f64>>,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    let func = config.functional()?;
    let p = config.p;
    let p1 = p + 1.0;
    let w = domain.grid().cell_volume();
    let mass = |u: &[f64]| func.nl_sum(u) * w;

    let mut u = gauge_bump(domain).into_values();
    let c0 = mass(&u);
    if !(c0 > 0.0) {
        return Err(Error::algorithm("initial bump has no mass"));
    }
    scale_in_place(&mut u, c0.powf(-1.0 / p1));
    let mut au = func.apply_a(domain, &u);
    let mut quad = dot(&au, &u) * w;
    let mut trace = Vec::new();
    let mut tau = config.step_size;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    let mut iters = 0;

    for it in 0..config.max_iters {
        iters = it;
        if it % REFRESH == 0 && it > 0 {
            au = func.apply_a(domain, &u);
            quad = dot(&au, &u) * w;
        }
        let lambda = quad;
        let g: Vec<f64> = au
            .par_iter()
            .zip(u.par_iter())
            .map(|(a, v)| a - lambda * Functional::<f64>::pos_pow(*v, p))
            .collect();
        let gg = norm_sq(&g);
        let rel = (gg / norm_sq(&u)).sqrt();
        let i_now = 0.5 * quad;
        trace.push(TraceEntry {
            iteration: it,
            energy: i_now,
            grad_norm: rel,
        });
        if rel < config.grad_tol {
            converged = true;
            break;
        }
        if let Some((pu, pg)) = &prev {
            let s: Vec<f64> = lincomb(&u, -1.0, pu);
            let y: Vec<f64> = lincomb(&g, -1.0, pg);
            let sy = dot(&s, &y);
            if sy > 0.0 {
                tau = (dot(&s, &s) / sy).clamp(1e-8, 1e4);
            }
        }
        let ag = func.apply_a(domain, &g);
        let q_ug = dot(&au, &g) * w;
        let q_gg = dot(&ag, &g) * w;
        let quotient = |t: f64| {
            let v = lincomb(&u, -t, &g);
            let q = quad - 2.0 * t * q_ug + t * t * q_gg;
            let c = mass(&v);
            (0.5 * q / c.powf(2.0 / p1), c, v)
        };
        let mut accepted = None;
        let mut t = tau;
        for _ in 0..MAX_BACKTRACK {
            let (r, c, v) = quotient(t);
            if c > 0.0 && r.is_finite() && r <= i_now - ARMIJO * t * gg * w + ROUNDOFF * i_now.abs()
            {
                accepted = Some((t, r, c, v));
                break;
            }
            t *= 0.5;
        }
        let Some((t, r, c, v)) = accepted else {
            // no decrease along the gradient: stationary to working precision
            break;
        };
        if !(c > 1e-300) {
            return Err(Error::algorithm("iterate lost its positive mass"));
        }
        let s = c.powf(-1.0 / p1);
        let mut new_au = lincomb(&au, -t, &ag);
        scale_in_place(&mut new_au, s);
        let mut new_u = v;
        scale_in_place(&mut new_u, s);
        let new_quad = dot(&new_au, &new_u) * w;
        if 0.5 * new_quad > i_now * (1.0 + 1e-12) {
            return Err(Error::algorithm(format!(
                "I increased from {i_now} to {}",
                0.5 * new_quad
            )));
        }
        debug_assert!((0.5 * new_quad - r).abs() <= 1e-9 * r.abs());
        prev = Some((std::mem::replace(&mut u, new_u), g));
        au = new_au;
        quad = new_quad;
        tau = t;
    }

    let alpha = 0.5 * quad;
    let lambda = quad;
    let scale = lambda.powf(1.0 / (p - 1.0));
    let mut ustar = u;
    scale_in_place(&mut ustar, scale);
    let field = ScalarField::from_raw(domain.clone(), ustar);
    Ok(finish_report(
        Method::ConstrainedMin,
        &func,
        field,
        alpha,
        Some(lambda),
        converged,
        iters,
        trace,
    ))
}

/// `|int u_+^{p+1} - 1|` for the unscaled minimizer behind a constrained
/// report; `None` for reports without a multiplier.
pub fn constraint_defect(report: &SolveReport, p: f64) -> Option<f64> {
    let lambda = report.multiplier?;
    let s = lambda.powf(-1.0 / (p - 1.0));
    let w = report.field.grid().cell_volume();
    let c: f64 = report
        .field
        .values()
        .iter()
        .map(|v| Functional::<f64>::pos_pow(v * s, p + 1.0))
        .sum();
    Some((c * w - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_ball_converges() {
        let cfg = SolverConfig {
            ball_radius: 3.0,
            nodes_per_axis: 20,
            grad_tol: 1e-8,
            ..Default::default()
        };
        let r = solve_constrained_min(&cfg).unwrap();
        assert!(r.converged, "{} iterations", r.iterations);
        assert!(r.level > 0.0);
        assert!(constraint_defect(&r, 2.0).unwrap() < 1e-10);
        assert!(r.diagnostics.relative_residual < 1e-6);
        assert!(r.diagnostics.relative_identity < 1e-6);
        for pair in r.trace.windows(2) {
            assert!(pair[1].energy <= pair[0].energy * (1.0 + 1e-12));
        }
        // bridge identity
        let lam = r.multiplier.unwrap();
        let c = (2.0 - 1.0) / (2.0 * 3.0) * lam.powf(3.0);
        assert!((c - r.breakdown.j).abs() < 1e-6 * c);
    }
}
