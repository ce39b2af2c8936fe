//! Mountain-pass path deformation.
//!
//! The path starts as the segment `t u0`, `t in [0, 1]`, sampled at `P`
//! points, and its highest point is located exactly on the polyline. From
//! then on the path is kept in the form
//!
//! ```text
//! 0 -> v -> T v -> T u0 -> u0
//! ```
//!
//! where the peak `v` sits at the top of its own ray and `T` is large enough
//! that the last three legs have negative energy, so the path maximum is
//! exactly `J(v)`. Each iteration takes one descent step on `J` at the peak
//! (Barzilai-Borwein length, Armijo backtracking on the maximum of the
//! deformed path) and the samples are periodically redistributed by arc
//! length in the energy norm on each side of the pinned peak.
//!
//! `A` is linear, so every sample carries `A u` and interpolated points get
//! theirs for free; one stencil application per iteration suffices.

use std::sync::Arc;

use rayon::prelude::*;

use super::{finish_report, pick_u0, Method, SolveReport, SolverConfig, TraceEntry};
use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::grid::{Domain, ScalarField};
use crate::linalg::{dot, lincomb, lincomb2, norm_sq, par_sum};

const ARMIJO: f64 = 1e-4;
const RESAMPLE_EVERY: usize = 25;
const ROUNDOFF: f64 = 1e-13;
const REFRESH: usize = 50;
const MAX_BACKTRACK: usize = 60;

#[derive(Clone, Debug)]
struct Sample {
    u: Vec<f64>,
    au: Vec<f64>,
    j: f64,
}

/// Ordered path samples from `0` to `u0`.
#[derive(Clone, Debug)]
pub struct PathState {
    domain: Arc<Domain<f64>>,
    samples: Vec<Sample>,
}

impl PathState {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.j).collect()
    }

    pub fn field(&self, i: usize) -> ScalarField<f64> {
        ScalarField::from_raw(self.domain.clone(), self.samples[i].u.clone())
    }

    fn argmax(&self) -> usize {
        let mut m = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if s.j > self.samples[m].j {
                m = i;
            }
        }
        m
    }
}

struct Ctx<'a> {
    func: &'a Functional<f64>,
    domain: &'a Arc<Domain<f64>>,
    w: f64,
}

impl Ctx<'_> {
    fn sample(&self, u: Vec<f64>) -> Sample {
        let au = self.func.apply_a(self.domain, &u);
        let j = self.func.j_from(&u, &au, self.w);
        Sample { u, au, j }
    }

    fn combine(&self, a: &Sample, sa: f64, b: &Sample, sb: f64) -> Sample {
        let u = lincomb2(sa, &a.u, sb, &b.u);
        let au = lincomb2(sa, &a.au, sb, &b.au);
        let j = self.func.j_from(&u, &au, self.w);
        Sample { u, au, j }
    }

    fn dist(&self, a: &Sample, b: &Sample) -> f64 {
        let n = a.u.len();
        let q = par_sum(n, |i| (a.au[i] - b.au[i]) * (a.u[i] - b.u[i]));
        (q * self.w).max(0.0).sqrt()
    }

    /// Maximizer of `s -> J((1 - s) a + s b)` on `[0, 1]` and its value.
    fn segment_max(&self, a: &Sample, b: &Sample) -> (f64, f64) {
        let p = self.func.p();
        let w = self.w;
        let d = lincomb(&b.u, -1.0, &a.u);
        let ad = lincomb(&b.au, -1.0, &a.au);
        let qad = dot(&a.au, &d) * w;
        let qdd = dot(&ad, &d) * w;
        let qaa = dot(&a.au, &a.u) * w;
        let n = d.len();
        // value, first and second derivative of J along the segment
        let eval = |s: f64| -> (f64, f64, f64) {
            let (nl, d1, d2) = (0..n)
                .into_par_iter()
                .with_min_len(4096)
                .map(|i| {
                    let v = a.u[i] + s * d[i];
                    if v <= 0.0 {
                        (0.0, 0.0, 0.0)
                    } else {
                        let vp = Functional::<f64>::pos_pow(v, p);
                        (vp * v, vp * d[i], p * vp / v * d[i] * d[i])
                    }
                })
                .reduce(|| (0.0, 0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
            let j = 0.5 * qaa + s * qad + 0.5 * s * s * qdd - w * nl / (p + 1.0);
            (j, qad + s * qdd - w * d1, qdd - w * d2)
        };
        let (j0, g0, _) = eval(0.0);
        let (j1, g1, _) = eval(1.0);
        if g0 <= 0.0 || g1 >= 0.0 {
            // monotone on the segment: the max sits at an end
            return if j0 >= j1 { (0.0, j0) } else { (1.0, j1) };
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut s = 0.5;
        for _ in 0..60 {
            let (_, g, h) = eval(s);
            if g > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let newton = if h < 0.0 { s - g / h } else { f64::NAN };
            s = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-13 || g.abs() < 1e-15 * (qdd.abs() + qad.abs()) {
                break;
            }
        }
        (s, eval(s).0)
    }

    /// Lays out `0 -> v -> T v -> T u0 -> u0` with the peak at the middle
    /// index and samples spaced uniformly in arc length on each side.
    fn rebuild(&self, path: &mut PathState, peak: &Sample, end: &Sample) -> Result<()> {
        let n = path.samples.len();
        let mid = (n - 1) / 2;
        let zero = Sample {
            u: vec![0.0; peak.u.len()],
            au: vec![0.0; peak.u.len()],
            j: 0.0,
        };
        let mut t = 2.0;
        let far = loop {
            let fv = self.combine(peak, t, peak, 0.0);
            let fe = self.combine(end, t, end, 0.0);
            let negative = (0..=8).all(|k| {
                let s = k as f64 / 8.0;
                self.combine(&fv, 1.0 - s, &fe, s).j < 0.0
            });
            if negative {
                break (fv, fe);
            }
            t *= 2.0;
            if t > 1e6 {
                return Err(Error::algorithm("no negative far field for the path"));
            }
        };
        let left = self.redistribute(&[zero, peak.clone()], mid + 1);
        let right = self.redistribute(&[peak.clone(), far.0, far.1, end.clone()], n - mid);
        let mut out = left;
        out.extend(right.into_iter().skip(1));
        let top = peak.j + ROUNDOFF * peak.j.abs();
        if let Some((i, s)) = out.iter().enumerate().find(|(i, s)| *i != mid && s.j > top) {
            return Err(Error::algorithm(format!(
                "path sample {i} at {} exceeds the peak {}",
                s.j, peak.j
            )));
        }
        path.samples = out;
        Ok(())
    }

    /// Largest `J` over the whole polyline, by exact maximization on each
    /// segment.
    fn path_max(&self, path: &PathState) -> f64 {
        path.samples
            .windows(2)
            .map(|w| self.segment_max(&w[0], &w[1]).1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn redistribute(&self, pts: &[Sample], count: usize) -> Vec<Sample> {
        let mut cum = vec![0.0];
        for pair in pts.windows(2) {
            let l = self.dist(&pair[0], &pair[1]);
            cum.push(cum.last().unwrap() + l);
        }
        let total = *cum.last().unwrap();
        let mut out = Vec::with_capacity(count);
        out.push(pts[0].clone());
        for k in 1..count - 1 {
            let target = total * k as f64 / (count - 1) as f64;
            let seg = cum
                .partition_point(|c| *c <= target)
                .clamp(1, pts.len() - 1);
            let len = cum[seg] - cum[seg - 1];
            let s = if len > 0.0 {
                (target - cum[seg - 1]) / len
            } else {
                0.0
            };
            out.push(self.combine(&pts[seg - 1], 1.0 - s, &pts[seg], s));
        }
        out.push(pts[pts.len() - 1].clone());
        out
    }
}

pub fn solve_mountain_pass(config: &SolverConfig) -> Result<SolveReport> {
    let domain = config.domain()?;
    let func = config.functional()?;
    let u0 = pick_u0(&domain, &func)?;
    solve_mountain_pass_on(&domain, &u0, config)
}

/// Runs the path deformation on `domain` from the endpoint `u0`, which must
/// have negative energy.
pub fn solve_mountain_pass_on(
    domain: &Arc<Domain<f64>>,
    u0: &ScalarField<f64>,
    config: &SolverConfig,
) -> Result<SolveReport> {
    Ok(run(domain, u0, config)?.0)
}

pub(crate) fn run(
    domain: &Arc<Domain<f64>>,
    u0: &ScalarField<f64>,
    config: &SolverConfig,
) -> Result<(SolveReport, PathState)> {
    config.validate()?;
    let func = config.functional()?;
    if !Arc::ptr_eq(u0.domain(), domain) && **u0.domain() != **domain {
        return Err(Error::domain("endpoint lives on a different domain"));
    }
    let ctx = Ctx {
        func: &func,
        domain,
        w: domain.grid().cell_volume(),
    };
    let end = ctx.sample(u0.values().to_vec());
    if !(end.j < 0.0) {
        return Err(Error::config("path endpoint must have negative energy"));
    }
    let pn = config.path_points;
    let zero = Sample {
        u: vec![0.0; end.u.len()],
        au: vec![0.0; end.u.len()],
        j: 0.0,
    };
    let samples: Vec<Sample> = (0..pn)
        .map(|i| ctx.combine(&zero, 0.0, &end, i as f64 / (pn - 1) as f64))
        .collect();
    let mut path = PathState {
        domain: domain.clone(),
        samples,
    };

    // highest point of the initial segment
    let m = path.argmax();
    if m == 0 || m + 1 == pn {
        return Err(Error::algorithm(format!(
            "path maximum collapsed onto endpoint {m}"
        )));
    }
    let (sl, jl) = ctx.segment_max(&path.samples[m - 1], &path.samples[m]);
    let (sr, jr) = ctx.segment_max(&path.samples[m], &path.samples[m + 1]);
    let mut peak = if jl >= jr && jl > path.samples[m].j {
        ctx.combine(&path.samples[m - 1], 1.0 - sl, &path.samples[m], sl)
    } else if jr > path.samples[m].j {
        ctx.combine(&path.samples[m], 1.0 - sr, &path.samples[m + 1], sr)
    } else {
        path.samples[m].clone()
    };
    ctx.rebuild(&mut path, &peak, &end)?;

    let w = ctx.w;
    let p = func.p();
    let kappa = (p - 1.0) / (2.0 * (p + 1.0));
    let mut trace = Vec::new();
    let mut tau = config.step_size;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    let mut iters = 0;

    for it in 0..config.max_iters {
        iters = it;
        if it % REFRESH == 0 && it > 0 {
            peak = ctx.sample(std::mem::take(&mut peak.u));
        }
        if it % RESAMPLE_EVERY == 0 && it > 0 {
            ctx.rebuild(&mut path, &peak, &end)?;
        }
        let g = func.grad_from(&peak.u, &peak.au);
        let gg = norm_sq(&g);
        let rel = (gg / norm_sq(&peak.u)).sqrt();
        trace.push(TraceEntry {
            iteration: it,
            energy: peak.j,
            grad_norm: rel,
        });
        if rel < config.grad_tol {
            converged = true;
            break;
        }
        if let Some((pu, pg)) = &prev {
            let s = lincomb(&peak.u, -1.0, pu);
            let y = lincomb(&g, -1.0, pg);
            let sy = dot(&s, &y);
            if sy > 0.0 {
                tau = (dot(&s, &s) / sy).clamp(1e-8, 1e4);
            }
        }
        let ag = func.apply_a(domain, &g);
        let quad = dot(&peak.au, &peak.u) * w;
        let q_ug = dot(&peak.au, &g) * w;
        let q_gg = dot(&ag, &g) * w;
        // maximum of the deformed path = top of the new peak's ray
        let deformed = |t: f64| {
            let v = lincomb(&peak.u, -t, &g);
            let a = quad - 2.0 * t * q_ug + t * t * q_gg;
            let b = func.nl_sum(&v) * w;
            let top = if a > 0.0 && b > 0.0 {
                kappa * a.powf((p + 1.0) / (p - 1.0)) * b.powf(-2.0 / (p - 1.0))
            } else {
                f64::INFINITY
            };
            (top, a, b, v)
        };
        let mut step = None;
        let mut t = tau;
        for _ in 0..MAX_BACKTRACK {
            let (top, a, b, v) = deformed(t);
            if top <= peak.j - ARMIJO * t * gg * w + ROUNDOFF * peak.j.abs() {
                step = Some((t, top, a, b, v));
                break;
            }
            t *= 0.5;
        }
        let Some((t, top, a, b, v)) = step else {
            break;
        };
        let lift = (a / b).powf(1.0 / (p - 1.0));
        let mut au = lincomb(&peak.au, -t, &ag);
        au.iter_mut().for_each(|x| *x *= lift);
        let mut u = v;
        u.iter_mut().for_each(|x| *x *= lift);
        prev = Some((std::mem::replace(&mut peak.u, u), g));
        peak.au = au;
        peak.j = top;
        if !(peak.j > 0.0) {
            return Err(Error::algorithm(
                "path maximum collapsed onto the zero endpoint",
            ));
        }
        tau = t;
    }

    peak = ctx.sample(std::mem::take(&mut peak.u));
    ctx.rebuild(&mut path, &peak, &end)?;
    let path_top = ctx.path_max(&path);
    if path_top > peak.j * (1.0 + 1e-9) {
        return Err(Error::algorithm(format!(
            "path maximum {path_top} above the peak {}",
            peak.j
        )));
    }
    let field = ScalarField::from_raw(domain.clone(), peak.u.clone());
    Ok((
        finish_report(
            Method::MountainPass,
            &func,
            field,
            peak.j,
            None,
            converged,
            iters,
            trace,
        ),
        path,
    ))
}
