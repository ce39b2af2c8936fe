//! Energies `J`, `I`, their exact discrete gradients, the PDE residual and
//! the Nehari ray.
//!
//! With `A = -eps^2 Delta_h + 1` and quadrature weight `w = h_x h_y h_t`:
//!
//! ```text
//! I(u) = w/2 <A u, u>
//! J(u) = I(u) - w/(p+1) sum u_+^{p+1}
//! ```
//!
//! The gradient returned is the representer in the weighted `L^2` product,
//! `A u - u_+^p`, so `<grad J(u), v>_h` is the directional derivative.

#[cfg(test)]
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{energy_operator, lq_norm, Domain, ScalarField};
use crate::linalg::{dot, norm_sq, par_sum};
use crate::scalar::Real;

/// Largest admissible exponent for `n = 1`.
pub const CRITICAL_P: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "I")]
    pub i: f64,
    pub e_norm_sq: f64,
    pub lp1_norm: f64,
    pub residual_l2: f64,
    pub p: f64,
}

/// Exponent and scale of `eps^2 Delta_H u - u + u^p = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Functional<F> {
    p: F,
    eps: F,
}

impl<F: Real> Functional<F> {
    pub fn new(p: F, eps: F) -> Result<Self> {
        if !(p > F::one() && p < F::lit(CRITICAL_P)) {
            return Err(Error::config(format!(
                "exponent p must lie in (1, 3), got {p}"
            )));
        }
        if !(eps > F::zero()) || !eps.is_finite() {
            return Err(Error::config("eps must be positive"));
        }
        Ok(Functional { p, eps })
    }

    pub fn p(&self) -> F {
        self.p
    }

    pub fn eps(&self) -> F {
        self.eps
    }

    pub fn eps2(&self) -> F {
        self.eps * self.eps
    }

    /// `u_+^e` with a multiplication-only path for small integer `e`.
    #[inline]
    pub(crate) fn pos_pow(v: F, e: F) -> F {
        if v <= F::zero() {
            return F::zero();
        }
        if e == F::lit(2.0) {
            v * v
        } else if e == F::lit(3.0) {
            v * v * v
        } else {
            v.powf(e)
        }
    }

    pub(crate) fn apply_a(&self, domain: &Domain<F>, u: &[F]) -> Vec<F> {
        energy_operator(domain, u, self.eps2())
    }

    /// `sum u_+^{p+1}` without the weight.
    pub(crate) fn nl_sum(&self, u: &[F]) -> F {
        let e = self.p + F::one();
        par_sum(u.len(), |i| Self::pos_pow(u[i], e))
    }

    /// `A u - u_+^p`, zero off the mask because both terms are.
    pub(crate) fn grad_from(&self, u: &[F], au: &[F]) -> Vec<F> {
        let p = self.p;
        au.par_iter()
            .zip(u.par_iter())
            .map(|(a, v)| *a - Self::pos_pow(*v, p))
            .collect()
    }

    /// `J` from precomputed `A u`.
    pub(crate) fn j_from(&self, u: &[F], au: &[F], w: F) -> F {
        w * (F::lit(0.5) * dot(au, u) - self.nl_sum(u) / (self.p + F::one()))
    }

    pub fn eval_i(&self, u: &ScalarField<F>) -> F {
        let au = self.apply_a(u.domain(), u.values());
        F::lit(0.5) * dot(&au, u.values()) * u.grid().cell_volume()
    }

    pub fn eval_j(&self, u: &ScalarField<F>) -> F {
        let au = self.apply_a(u.domain(), u.values());
        self.j_from(u.values(), &au, u.grid().cell_volume())
    }

    /// `||u||^2 = <A u, u>_h`.
    pub fn norm_sq(&self, u: &ScalarField<F>) -> F {
        F::lit(2.0) * self.eval_i(u)
    }

    /// `int u_+^{p+1}`.
    pub fn positive_mass(&self, u: &ScalarField<F>) -> F {
        self.nl_sum(u.values()) * u.grid().cell_volume()
    }

    pub fn grad_j(&self, u: &ScalarField<F>) -> ScalarField<F> {
        let au = self.apply_a(u.domain(), u.values());
        ScalarField::from_raw(u.domain().clone(), self.grad_from(u.values(), &au))
    }

    /// `eps^2 Delta_h u - u + u_+^p` on masked nodes.
    pub fn residual(&self, u: &ScalarField<F>) -> ScalarField<F> {
        self.grad_j(u).scaled(-F::one())
    }

    /// `||residual||_2 / ||u||_2`, zero for the zero field.
    pub fn relative_residual(&self, u: &ScalarField<F>) -> F {
        let r = self.residual(u);
        let un = norm_sq(u.values());
        if un == F::zero() {
            return F::zero();
        }
        (norm_sq(r.values()) / un).sqrt()
    }

    /// `J(u) - (p-1)/(2(p+1)) ||u||^2`, which vanishes at critical points.
    pub fn critical_identity_defect(&self, u: &ScalarField<F>) -> F {
        let p = self.p;
        let kappa = (p - F::one()) / (F::lit(2.0) * (p + F::one()));
        self.eval_j(u) - kappa * self.norm_sq(u)
    }

    /// Maximizer `t*` of `t -> J(t u)` and the maximum `J(t* u)`.
    pub fn nehari_scale(&self, u: &ScalarField<F>) -> Result<(F, F)> {
        let a = self.norm_sq(u);
        let b = self.positive_mass(u);
        nehari_from_parts(self.p, a, b)
    }

    pub fn breakdown(&self, u: &ScalarField<F>) -> EnergyBreakdown {
        let w = u.grid().cell_volume();
        let au = self.apply_a(u.domain(), u.values());
        let quad = dot(&au, u.values()) * w;
        let nl = self.nl_sum(u.values()) * w;
        let p1 = self.p + F::one();
        let i = F::lit(0.5) * quad;
        let j = i - nl / p1;
        let g = self.grad_from(u.values(), &au);
        let un = norm_sq(u.values());
        let res = if un == F::zero() {
            F::zero()
        } else {
            (norm_sq(&g) / un).sqrt()
        };
        EnergyBreakdown {
            j: j.as_f64(),
            i: i.as_f64(),
            e_norm_sq: quad.as_f64(),
            lp1_norm: nl.max(F::zero()).powf(F::one() / p1).as_f64(),
            residual_l2: res.as_f64(),
            p: self.p.as_f64(),
        }
    }
}

/// Nehari ray maximum from `a = ||u||^2` and `b = int u_+^{p+1}`:
/// `t* = (a / b)^{1/(p-1)}`, `J(t* u) = (p-1)/(2(p+1)) a^{(p+1)/(p-1)} b^{-2/(p-1)}`.
pub(crate) fn nehari_from_parts<F: Real>(p: F, a: F, b: F) -> Result<(F, F)> {
    if !(b > F::zero()) {
        return Err(Error::domain("field has no positive mass"));
    }
    if !(a > F::zero()) {
        return Err(Error::domain("field has zero norm"));
    }
    let one = F::one();
    let pm1 = p - one;
    let t = (a / b).powf(one / pm1);
    let jmax = pm1 / (F::lit(2.0) * (p + one)) * a * t * t;
    Ok((t, jmax))
}

/// `J(u)` for a field and exponent, with `eps = 1`.
pub fn eval_j<F: Real>(u: &ScalarField<F>, p: F) -> Result<F> {
    Ok(Functional::new(p, F::one())?.eval_j(u))
}

/// `I(u)`, the quadratic part of `J` with `eps = 1`.
pub fn eval_i<F: Real>(u: &ScalarField<F>) -> F {
    let au = energy_operator(u.domain(), u.values(), F::one());
    F::lit(0.5) * dot(&au, u.values()) * u.grid().cell_volume()
}

pub fn grad_j<F: Real>(u: &ScalarField<F>, p: F) -> Result<ScalarField<F>> {
    Ok(Functional::new(p, F::one())?.grad_j(u))
}

pub fn residual<F: Real>(u: &ScalarField<F>, p: F, eps: F) -> Result<ScalarField<F>> {
    Ok(Functional::new(p, eps)?.residual(u))
}

pub fn nehari_scale<F: Real>(u: &ScalarField<F>, p: F) -> Result<(F, F)> {
    Functional::new(p, F::one())?.nehari_scale(u)
}

pub fn critical_identity_defect<F: Real>(u: &ScalarField<F>, p: F) -> Result<F> {
    Ok(Functional::new(p, F::one())?.critical_identity_defect(u))
}

/// Samples `t -> J(t u)` on `ts`.
pub fn ray_energies<F: Real>(func: &Functional<F>, u: &ScalarField<F>, ts: &[F]) -> Vec<F> {
    let i = func.eval_i(u);
    let b = func.positive_mass(u);
    let p1 = func.p() + F::one();
    ts.iter()
        .map(|&t| t * t * i - t.abs().powf(p1) * if t >= F::zero() { b } else { F::zero() } / p1)
        .collect()
}

/// Directional derivative check: relative error of `<grad J(u), v>_h`
/// against the central difference with step `h`.
pub fn gradient_check<F: Real>(
    func: &Functional<F>,
    u: &ScalarField<F>,
    v: &ScalarField<F>,
    h: F,
) -> Result<F> {
    u.check_same(v)?;
    let g = func.grad_j(u);
    let analytic = dot(g.values(), v.values()) * u.grid().cell_volume();
    let plus = u.zip_with(v, |a, b| a + h * b)?;
    let minus = u.zip_with(v, |a, b| a - h * b)?;
    let numeric = (func.eval_j(&plus) - func.eval_j(&minus)) / (F::lit(2.0) * h);
    let scale = analytic.abs().max(numeric.abs());
    if scale == F::zero() {
        return Ok(F::zero());
    }
    Ok((analytic - numeric).abs() / scale)
}

/// Energy on the sphere `||u|| = r` sampled along a family of directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RimReport {
    /// `max int |u|^{p+1} / ||u||^{p+1}` over the family.
    pub embedding_constant: f64,
    /// Radius maximizing `r^2/2 - C r^{p+1}/(p+1)`.
    pub radius: f64,
    /// That maximum, `(1/2 - 1/(p+1)) r^2`.
    pub alpha0: f64,
    pub min_energy: f64,
    pub members: usize,
}

impl RimReport {
    pub fn holds(&self) -> bool {
        self.alpha0 > 0.0 && self.min_energy >= self.alpha0
    }
}

/// Measures the embedding constant `C` on `family`, picks the radius where
/// `J(t u) >= t^2/2 - t^{p+1} C/(p+1)` is largest and evaluates `J` on the
/// sphere of that radius in every direction of the family. Zero members are
/// skipped.
pub fn mountain_pass_rim<F: Real>(
    func: &Functional<F>,
    family: &[ScalarField<F>],
) -> Result<RimReport> {
    let p = func.p();
    let p1 = p + F::one();
    let mut dirs = Vec::new();
    let mut c = F::zero();
    for u in family.iter().filter(|u| !u.is_zero()) {
        let e = func.norm_sq(u);
        let m = lq_norm(u, p1)?.powf(p1);
        c = c.max(m / e.powf(p1 / F::lit(2.0)));
        dirs.push((u, e));
    }
    if dirs.is_empty() || !(c > F::zero()) {
        return Err(Error::domain("rim needs a direction with mass"));
    }
    let r = c.powf(-F::one() / (p - F::one()));
    let alpha0 = (F::lit(0.5) - F::one() / p1) * r * r;
    let min_energy = dirs
        .iter()
        .map(|(u, e)| func.eval_j(&u.scaled(r / e.sqrt())))
        .fold(F::infinity(), F::min);
    Ok(RimReport {
        embedding_constant: c.as_f64(),
        radius: r.as_f64(),
        alpha0: alpha0.as_f64(),
        min_energy: min_energy.as_f64(),
        members: dirs.len(),
    })
}
