//! Direct minimization of the Nehari ray maximum
//! `F(u) = max_t J(t u) = kappa a^{(p+1)/(p-1)} b^{-2/(p-1)}`,
//! `a = ||u||^2`, `b = int u_+^{p+1}`, by L-BFGS. Shares no code path with
//! the mountain-pass solver beyond the energy operator.

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;

use super::{finish_report, gauge_bump, Method, SolveReport, SolverConfig, TraceEntry};
use crate::error::{Error, Result};
use crate::functionals::{nehari_from_parts, Functional};
use crate::grid::{Domain, ScalarField};
use crate::linalg::{dot, lincomb, norm_sq, scale_in_place};

const MEMORY: usize = 8;
const ARMIJO: f64 = 1e-4;
const ROUNDOFF: f64 = 1e-13;

pub fn solve_nehari(config: &SolverConfig) -> Result<SolveReport> {
    let domain = config.domain()?;
    solve_nehari_on(&domain, config)
}

struct State {
    u: Vec<f64>,
    au: Vec<f64>,
    a: f64,
    b: f64,
    f: f64,
}

pub fn solve_nehari_on(domain: &Arc<Domain<f64>>, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let func = config.functional()?;
    let p = config.p;
    let w = domain.grid().cell_volume();
    let kappa = (p - 1.0) / (2.0 * (p + 1.0));
    let value = |a: f64, b: f64| kappa * a.powf((p + 1.0) / (p - 1.0)) * b.powf(-2.0 / (p - 1.0));
    let make = |u: Vec<f64>, au: Vec<f64>| {
        let a = dot(&au, &u) * w;
        let b = func.nl_sum(&u) * w;
        State {
            f: value(a, b),
            u,
            au,
            a,
            b,
        }
    };
    // gradient of F up to the positive factor 2(p+1)/(p-1) F
    let direction = |s: &State| -> Vec<f64> {
        let (ia, ib) = (1.0 / s.a, 1.0 / s.b);
        s.au.par_iter()
            .zip(s.u.par_iter())
            .map(|(au, v)| au * ia - Functional::<f64>::pos_pow(*v, p) * ib)
            .collect()
    };

    let u = gauge_bump(domain).into_values();
    let au = func.apply_a(domain, &u);
    let mut st = make(u, au);
    if !(st.b > 0.0) {
        return Err(Error::algorithm("initial bump has no mass"));
    }
    let gscale = |s: &State| 2.0 * (p + 1.0) / (p - 1.0) * s.f;
    let mut g: Vec<f64> = direction(&st);
    scale_in_place(&mut g, gscale(&st));
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;

    for it in 0..config.max_iters {
        iters = it;
        // residual of the Nehari-scaled field t* u
        let ratio = st.a / st.b;
        let res: f64 = (0..st.u.len())
            .into_par_iter()
            .map(|i| {
                let r = st.au[i] - ratio * Functional::<f64>::pos_pow(st.u[i], p);
                r * r
            })
            .sum();
        let rel = (res / norm_sq(&st.u)).sqrt();
        trace.push(TraceEntry {
            iteration: it,
            energy: st.f,
            grad_norm: rel,
        });
        if rel < config.grad_tol {
            converged = true;
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let al = rho * dot(s, &q);
            q = lincomb(&q, -al, y);
            alphas.push(al);
        }
        if let Some((s, y, _)) = hist.back() {
            scale_in_place(&mut q, dot(s, y) / dot(y, y));
        } else {
            scale_in_place(
                &mut q,
                config.step_size * (norm_sq(&st.u) / norm_sq(&g)).sqrt(),
            );
        }
        for ((s, y, rho), al) in hist.iter().zip(alphas.into_iter().rev()) {
            let be = rho * dot(y, &q);
            q = lincomb(&q, al - be, s);
        }
        let mut slope = -dot(&g, &q) * w;
        if !(slope < 0.0) {
            hist.clear();
            q = g.clone();
            slope = -dot(&g, &q) * w;
        }
        let aq = func.apply_a(domain, &q);
        let q_uq = dot(&st.au, &q) * w;
        let q_qq = dot(&aq, &q) * w;
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let v = lincomb(&st.u, -t, &q);
            let a = st.a - 2.0 * t * q_uq + t * t * q_qq;
            let b = func.nl_sum(&v) * w;
            if b > 0.0 && a > 0.0 {
                let f = value(a, b);
                if f <= st.f + ARMIJO * t * slope + ROUNDOFF * st.f {
                    next = Some((v, lincomb(&st.au, -t, &aq), a, b, f));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((v, av, a, b, f)) = next else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let mut new = State {
            u: v,
            au: av,
            a,
            b,
            f,
        };
        if it % 50 == 49 {
            let au = func.apply_a(domain, &new.u);
            new = make(new.u, au);
        }
        let mut ng = direction(&new);
        scale_in_place(&mut ng, gscale(&new));
        let s = lincomb(&new.u, -1.0, &st.u);
        let y = lincomb(&ng, -1.0, &g);
        let sy = dot(&s, &y);
        if sy > 1e-16 * norm_sq(&s).sqrt() * norm_sq(&y).sqrt() {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > MEMORY {
                hist.pop_front();
            }
        }
        st = new;
        g = ng;
    }

    let (tstar, level) = nehari_from_parts(p, st.a, st.b)?;
    let mut ustar = st.u;
    scale_in_place(&mut ustar, tstar);
    let field = ScalarField::from_raw(domain.clone(), ustar);
    Ok(finish_report(
        Method::Nehari,
        &func,
        field,
        level,
        None,
        converged,
        iters,
        trace,
    ))
}
