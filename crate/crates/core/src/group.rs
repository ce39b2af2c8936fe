//! Heisenberg group calculus in real coordinates `(x_1..x_n, y_1..y_n, t)`.
//!
//! The group law is the one for which
//! `X_i = d/dx_i + 2 y_i d/dt` and `Y_i = d/dy_i - 2 x_i d/dt`
//! are left-invariant:
//!
//! ```text
//! (x, y, t) . (x', y', t') = (x + x', y + y', t + t' + 2(<y, x'> - <x, y'>))
//! ```
//!
//! Everything here is exact or analytic and serves as the oracle for the
//! discrete operators in [`crate::grid`].

use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{GroupScalar, Real};

/// A point of `H^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub t: T,
}

impl<T: GroupScalar> GroupPoint<T> {
    pub fn new(x: Vec<T>, y: Vec<T>, t: T) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dimension {
                left: x.len(),
                right: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::domain("group dimension n must be at least 1"));
        }
        Ok(GroupPoint { x, y, t })
    }

    /// Point of `H^1`.
    pub fn h1(x: T, y: T, t: T) -> Self {
        GroupPoint {
            x: vec![x],
            y: vec![y],
            t,
        }
    }

    pub fn identity(n: usize) -> Self {
        GroupPoint {
            x: vec![T::zero(); n],
            y: vec![T::zero(); n],
            t: T::zero(),
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn inverse(&self) -> Self {
        GroupPoint {
            x: self.x.iter().cloned().map(|v| -v).collect(),
            y: self.y.iter().cloned().map(|v| -v).collect(),
            t: -self.t.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_zero()) && self.t.is_zero()
    }
}

impl<F: Real> GroupPoint<F> {
    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite()) && self.t.is_finite()
    }
}

impl<T: fmt::Display> fmt::Display for GroupPoint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for v in self.x.iter().chain(self.y.iter()) {
            write!(f, "{v}, ")?;
        }
        write!(f, "{})", self.t)
    }
}

/// Group product `a . b`.
pub fn group_mul<T: GroupScalar>(a: &GroupPoint<T>, b: &GroupPoint<T>) -> Result<GroupPoint<T>> {
    if a.n() != b.n() {
        return Err(Error::Dimension {
            left: a.n(),
            right: b.n(),
        });
    }
    let two = T::one() + T::one();
    let mut symplectic = T::zero();
    for i in 0..a.n() {
        symplectic = symplectic + a.y[i].clone() * b.x[i].clone() - a.x[i].clone() * b.y[i].clone();
    }
    Ok(GroupPoint {
        x: a.x
            .iter()
            .zip(&b.x)
            .map(|(p, q)| p.clone() + q.clone())
            .collect(),
        y: a.y
            .iter()
            .zip(&b.y)
            .map(|(p, q)| p.clone() + q.clone())
            .collect(),
        t: a.t.clone() + b.t.clone() + two * symplectic,
    })
}

/// Gauge `(sum_i (x_i^2 + y_i^2)^2 + t^2)^(1/4)`.
///
/// Each plane contributes its own fourth power; for `n = 1` this is the
/// usual Koranyi norm.
pub fn gauge<F: Real>(z: &GroupPoint<F>) -> F {
    let planes: F =
        z.x.iter()
            .zip(&z.y)
            .map(|(x, y)| {
                let r2 = *x * *x + *y * *y;
                r2 * r2
            })
            .sum();
    (planes + z.t * z.t).sqrt().sqrt()
}

/// Fourth power of the gauge for `n = 1` coordinates; avoids the roots in
/// hot loops that only compare against a radius.
#[inline]
pub fn gauge4_h1<F: Real>(x: F, y: F, t: F) -> F {
    let r2 = x * x + y * y;
    r2 * r2 + t * t
}

/// Parabolic dilation `(x, y, t) -> (l x, l y, l^2 t)`.
pub fn dilate<T: GroupScalar + PartialOrd>(lambda: T, z: &GroupPoint<T>) -> Result<GroupPoint<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::domain("dilation factor must be positive"));
    }
    Ok(GroupPoint {
        x: z.x.iter().map(|v| lambda.clone() * v.clone()).collect(),
        y: z.y.iter().map(|v| lambda.clone() * v.clone()).collect(),
        t: lambda.clone() * lambda * z.t.clone(),
    })
}

/// `Q = 2n + 2`.
pub fn homogeneous_dimension(n: usize) -> Result<usize> {
    if n < 1 {
        return Err(Error::domain("n must be at least 1"));
    }
    Ok(2 * n + 2)
}

/// `(Q + 2) / (Q - 2)` as an exact fraction.
pub fn critical_exponent(n: usize) -> Result<Ratio<i64>> {
    let q = homogeneous_dimension(n)? as i64;
    Ok(Ratio::new(q + 2, q - 2))
}

/// Left-invariant generators of the Lie algebra (0-based plane index).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    X(usize),
    Y(usize),
    T,
}

impl Generator {
    /// `exp(s V)` as a group element.
    pub fn exp<F: Real>(self, s: F, n: usize) -> Result<GroupPoint<F>> {
        let mut p = GroupPoint::identity(n);
        match self {
            Generator::X(i) | Generator::Y(i) if i >= n => {
                return Err(Error::Dimension {
                    left: i + 1,
                    right: n,
                })
            }
            Generator::X(i) => p.x[i] = s,
            Generator::Y(i) => p.y[i] = s,
            Generator::T => p.t = s,
        }
        Ok(p)
    }
}

/// Euclidean partial derivatives up to the order the horizontal calculus
/// needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<F> {
    pub value: F,
    pub dx: Vec<F>,
    pub dy: Vec<F>,
    pub dt: F,
    pub dxx: Vec<F>,
    pub dyy: Vec<F>,
    pub dtt: F,
    pub dxt: Vec<F>,
    pub dyt: Vec<F>,
}

impl<F: Real> Jet2<F> {
    pub fn left_invariant(&self, gen: Generator, z: &GroupPoint<F>) -> F {
        let two = F::lit(2.0);
        match gen {
            Generator::X(i) => self.dx[i] + two * z.y[i] * self.dt,
            Generator::Y(i) => self.dy[i] - two * z.x[i] * self.dt,
            Generator::T => self.dt,
        }
    }

    /// `sum_i X_i^2 + Y_i^2` expanded in Euclidean derivatives.
    pub fn sublaplacian(&self, z: &GroupPoint<F>) -> F {
        let four = F::lit(4.0);
        let mut acc = F::zero();
        for i in 0..z.n() {
            let (x, y) = (z.x[i], z.y[i]);
            acc += self.dxx[i]
                + self.dyy[i]
                + four * (x * x + y * y) * self.dtt
                + four * y * self.dxt[i]
                - four * x * self.dyt[i];
        }
        acc
    }
}

type Evaluator<F> = Arc<dyn Fn(&GroupPoint<F>) -> F + Send + Sync>;
type JetFn<F> = Arc<dyn Fn(&GroupPoint<F>) -> Jet2<F> + Send + Sync>;

/// A scalar function on `H^n` with optional closed-form derivatives.
#[derive(Clone)]
pub struct TestFunction<F> {
    eval: Evaluator<F>,
    jet: Option<JetFn<F>>,
}

impl<F> fmt::Debug for TestFunction<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("analytic", &self.jet.is_some())
            .finish()
    }
}

impl<F: Real> TestFunction<F> {
    pub fn new(eval: impl Fn(&GroupPoint<F>) -> F + Send + Sync + 'static) -> Self {
        TestFunction {
            eval: Arc::new(eval),
            jet: None,
        }
    }

    pub fn with_jet(
        eval: impl Fn(&GroupPoint<F>) -> F + Send + Sync + 'static,
        jet: impl Fn(&GroupPoint<F>) -> Jet2<F> + Send + Sync + 'static,
    ) -> Self {
        TestFunction {
            eval: Arc::new(eval),
            jet: Some(Arc::new(jet)),
        }
    }

    pub fn eval(&self, z: &GroupPoint<F>) -> F {
        (self.eval)(z)
    }

    pub fn jet(&self, z: &GroupPoint<F>) -> Option<Jet2<F>> {
        self.jet.as_ref().map(|j| j(z))
    }

    pub fn has_jet(&self) -> bool {
        self.jet.is_some()
    }

    /// `z -> f(g . z)`.
    pub fn compose_left(&self, g: GroupPoint<F>) -> Self {
        let f = self.eval.clone();
        TestFunction::new(move |z| f(&group_mul(&g, z).expect("matching dimensions")))
    }

    /// `z -> f(delta_lambda z)`.
    pub fn compose_dilation(&self, lambda: F) -> Self {
        let f = self.eval.clone();
        TestFunction::new(move |z| f(&dilate(lambda, z).expect("positive dilation")))
    }

    /// Numerical left-invariant derivative, itself a test function.
    pub fn derivative(&self, gen: Generator) -> Self {
        let f = self.clone();
        TestFunction::new(move |z| apply_left_invariant(gen, &f, z).unwrap_or_else(|_| F::nan()))
    }

    pub fn from_polynomial(poly: Polynomial<F>) -> Self {
        let p = Arc::new(poly);
        let pe = p.clone();
        TestFunction::with_jet(move |z| pe.eval(z), move |z| p.jet(z))
    }

    /// `exp(-a |x - x0|^2 - a |y - y0|^2 - b (t - t0)^2)` in Euclidean
    /// coordinates, with its closed-form jet.
    pub fn gaussian(center: GroupPoint<F>, a: F, b: F) -> Self {
        let c = center.clone();
        let eval = move |z: &GroupPoint<F>| gaussian_jet(&c, a, b, z).value;
        TestFunction::with_jet(eval, move |z| gaussian_jet(&center, a, b, z))
    }
}

fn gaussian_jet<F: Real>(c: &GroupPoint<F>, a: F, b: F, z: &GroupPoint<F>) -> Jet2<F> {
    let two = F::lit(2.0);
    let n = z.n();
    let dxs: Vec<F> = (0..n).map(|i| z.x[i] - c.x[i]).collect();
    let dys: Vec<F> = (0..n).map(|i| z.y[i] - c.y[i]).collect();
    let dtv = z.t - c.t;
    let r2: F = dxs.iter().chain(dys.iter()).map(|v| *v * *v).sum();
    let g = (-a * r2 - b * dtv * dtv).exp();
    let gt = -two * b * dtv * g;
    Jet2 {
        value: g,
        dx: dxs.iter().map(|&d| -two * a * d * g).collect(),
        dy: dys.iter().map(|&d| -two * a * d * g).collect(),
        dt: gt,
        dxx: dxs.iter().map(|&d| (four_sq(a, d) - two * a) * g).collect(),
        dyy: dys.iter().map(|&d| (four_sq(a, d) - two * a) * g).collect(),
        dtt: (four_sq(b, dtv) - two * b) * g,
        dxt: dxs.iter().map(|&d| -two * a * d * gt).collect(),
        dyt: dys.iter().map(|&d| -two * a * d * gt).collect(),
    }
}

#[inline]
fn four_sq<F: Real>(a: F, d: F) -> F {
    F::lit(4.0) * a * a * d * d
}

/// Base step and Richardson order for flow derivatives.
pub const FLOW_BASE_STEP: f64 = 1e-3;

/// Derivative of `f` along the one-parameter subgroup `s -> z . exp(s V)`,
/// by central differences with one Richardson extrapolation step
/// (`(4 D(h/2) - D(h)) / 3`, error `O(h^4)`).
pub fn apply_left_invariant<F: Real>(
    gen: Generator,
    f: &TestFunction<F>,
    z: &GroupPoint<F>,
) -> Result<F> {
    flow_derivative(gen, f, z, F::one())
}

/// Same as [`apply_left_invariant`] with the flow direction scaled by
/// `orientation`; the calculus self-check uses `-1` on `Y` as a mutation
/// probe.
pub(crate) fn flow_derivative<F: Real>(
    gen: Generator,
    f: &TestFunction<F>,
    z: &GroupPoint<F>,
    orientation: F,
) -> Result<F> {
    let n = z.n();
    let central = |h: F| -> Result<F> {
        let fwd = f.eval(&group_mul(z, &gen.exp(orientation * h, n)?)?);
        let bwd = f.eval(&group_mul(z, &gen.exp(-orientation * h, n)?)?);
        Ok((fwd - bwd) / (F::lit(2.0) * h))
    };
    let h = F::lit(FLOW_BASE_STEP);
    let coarse = central(h)?;
    let fine = central(h / F::lit(2.0))?;
    let d = (F::lit(4.0) * fine - coarse) / F::lit(3.0);
    if !d.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite flow derivative along {gen:?} at {z}"
        )));
    }
    Ok(d)
}

/// Polynomial in `(x_1..x_n, y_1..y_n, t)` with an explicit derivative table.
/// Variable `i < n` is `x_i`, `n <= i < 2n` is `y_{i-n}`, `2n` is `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<T> {
    n: usize,
    terms: Vec<(T, Vec<u32>)>,
}

impl<T: GroupScalar> Polynomial<T> {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nvars(&self) -> usize {
        2 * self.n + 1
    }

    pub fn terms(&self) -> &[(T, Vec<u32>)] {
        &self.terms
    }

    pub fn monomial(n: usize, coef: T, exps: Vec<u32>) -> Result<Self> {
        if exps.len() != 2 * n + 1 {
            return Err(Error::Dimension {
                left: exps.len(),
                right: 2 * n + 1,
            });
        }
        let mut p = Polynomial::zero(n);
        p.push(coef, exps);
        Ok(p)
    }

    pub fn var(n: usize, index: usize) -> Self {
        let mut exps = vec![0; 2 * n + 1];
        exps[index] = 1;
        let mut p = Polynomial::zero(n);
        p.push(T::one(), exps);
        p
    }

    pub fn x(n: usize, i: usize) -> Self {
        Self::var(n, i)
    }
    pub fn y(n: usize, i: usize) -> Self {
        Self::var(n, n + i)
    }
    pub fn t(n: usize) -> Self {
        Self::var(n, 2 * n)
    }

    fn push(&mut self, coef: T, exps: Vec<u32>) {
        if coef.is_zero() {
            return;
        }
        if let Some(slot) = self.terms.iter_mut().find(|(_, e)| *e == exps) {
            slot.0 = slot.0.clone() + coef;
        } else {
            self.terms.push((coef, exps));
        }
        self.terms.retain(|(c, _)| !c.is_zero());
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(_, e)| e.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (c, e) in &other.terms {
            out.push(c.clone(), e.clone());
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = Polynomial::zero(self.n);
        for (c, e) in &self.terms {
            out.push(c.clone() * s.clone(), e.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Polynomial::zero(self.n);
        for (c1, e1) in &self.terms {
            for (c2, e2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.push(c1.clone() * c2.clone(), e);
            }
        }
        out
    }

    /// Euclidean partial derivative with respect to variable `index`.
    pub fn partial(&self, index: usize) -> Self {
        let mut out = Polynomial::zero(self.n);
        for (c, e) in &self.terms {
            if e[index] == 0 {
                continue;
            }
            let mut k = T::zero();
            for _ in 0..e[index] {
                k = k + T::one();
            }
            let mut e2 = e.clone();
            e2[index] -= 1;
            out.push(c.clone() * k, e2);
        }
        out
    }

    /// Exact image under a left-invariant field.
    pub fn left_invariant(&self, gen: Generator) -> Self {
        let n = self.n;
        let two = T::one() + T::one();
        let pt = self.partial(2 * n);
        match gen {
            Generator::X(i) => self.partial(i).add(&Self::y(n, i).mul(&pt).scale(two)),
            Generator::Y(i) => self.partial(n + i).add(&Self::x(n, i).mul(&pt).scale(-two)),
            Generator::T => pt,
        }
    }

    pub fn sublaplacian(&self) -> Self {
        let mut out = Polynomial::zero(self.n);
        for i in 0..self.n {
            out = out.add(
                &self
                    .left_invariant(Generator::X(i))
                    .left_invariant(Generator::X(i)),
            );
            out = out.add(
                &self
                    .left_invariant(Generator::Y(i))
                    .left_invariant(Generator::Y(i)),
            );
        }
        out
    }

    fn coords(z: &GroupPoint<T>) -> Vec<T> {
        let mut v = z.x.clone();
        v.extend(z.y.iter().cloned());
        v.push(z.t.clone());
        v
    }

    pub fn eval(&self, z: &GroupPoint<T>) -> T {
        let v = Self::coords(z);
        let mut acc = T::zero();
        for (c, e) in &self.terms {
            let mut term = c.clone();
            for (base, &k) in v.iter().zip(e) {
                for _ in 0..k {
                    term = term * base.clone();
                }
            }
            acc = acc + term;
        }
        acc
    }
}

impl<F: Real> Polynomial<F> {
    pub fn jet(&self, z: &GroupPoint<F>) -> Jet2<F> {
        let n = self.n;
        let t = 2 * n;
        Jet2 {
            value: self.eval(z),
            dx: (0..n).map(|i| self.partial(i).eval(z)).collect(),
            dy: (0..n).map(|i| self.partial(n + i).eval(z)).collect(),
            dt: self.partial(t).eval(z),
            dxx: (0..n).map(|i| self.partial(i).partial(i).eval(z)).collect(),
            dyy: (0..n)
                .map(|i| self.partial(n + i).partial(n + i).eval(z))
                .collect(),
            dtt: self.partial(t).partial(t).eval(z),
            dxt: (0..n).map(|i| self.partial(i).partial(t).eval(z)).collect(),
            dyt: (0..n)
                .map(|i| self.partial(n + i).partial(t).eval(z))
                .collect(),
        }
    }
}

/// Midpoint-rule integral of `f` over the `n = 1` box
/// `[-hx, hx]^2 x [-ht, ht]` with `cells` cells per axis.
pub fn box_integral_h1<F: Real>(f: &TestFunction<F>, half_xy: F, half_t: F, cells: usize) -> F {
    let c = F::from_usize_lossy(cells);
    let hx = F::lit(2.0) * half_xy / c;
    let ht = F::lit(2.0) * half_t / c;
    let half = F::lit(0.5);
    let mut acc = F::zero();
    for i in 0..cells {
        let x = -half_xy + (F::from_usize_lossy(i) + half) * hx;
        for j in 0..cells {
            let y = -half_xy + (F::from_usize_lossy(j) + half) * hx;
            let mut col = F::zero();
            for k in 0..cells {
                let t = -half_t + (F::from_usize_lossy(k) + half) * ht;
                col += f.eval(&GroupPoint::h1(x, y, t));
            }
            acc += col;
        }
    }
    acc * hx * hx * ht
}
