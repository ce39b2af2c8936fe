//! Concentration-compactness diagnostics: mass densities, the concentration
//! function `Q(R) = sup_z int_{B_R(z)} rho`, dilation normalization, the
//! trichotomy classifier for finite sequences and the cutoff splitting
//! estimate.
//!
//! Gauge balls are `B_R(z) = { w : rho(z^{-1} w) < R }`. For a center `z`
//! and a column `(x, y)` the ball is the `t` interval
//!
//! ```text
//! |t - t_z - 2 (y_z x - x_z y)| < sqrt(R^4 - ((x - x_z)^2 + (y - y_z)^2)^2)
//! ```
//!
//! Each node spreads its mass evenly over its `t` cell, so ball masses come
//! from interpolated prefix sums along `t` in `O((R/h)^2)` per center and
//! vary continuously with `R` and the center.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    dilate_field, e_norm_sq, integrate, lq_norm, node_gauges, Domain, Grid3, ScalarField,
};
use crate::group::{gauge, group_mul, homogeneous_dimension, GroupPoint};

/// Default stride of the candidate-center sub-lattice.
pub const DEFAULT_STRIDE: usize = 2;
/// Accepted distance of the normalized unit-ball mass from `1/2`.
pub const HALF_MASS_TOL: f64 = 1e-3;
/// Number of trailing sequence elements the classifier rules look at.
pub const TAIL: usize = 3;
const NORMALIZED_TOL: f64 = 1e-10;

/// `|u|^q / int |u|^q`.
#[derive(Clone, Debug)]
pub struct MassDensity {
    pub field: ScalarField<f64>,
    /// `int |u|^q` before normalization.
    pub total_mass: f64,
}

impl MassDensity {
    pub fn mass(&self) -> f64 {
        integrate(&self.field)
    }
}

pub fn normalize_mass(u: &ScalarField<f64>, q: f64) -> Result<MassDensity> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::domain("mass exponent must be >= 1"));
    }
    let total = lq_norm(u, q)?.powf(q);
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::domain("field has no mass"));
    }
    Ok(MassDensity {
        field: u.map(|v| v.abs().powf(q) / total),
        total_mass: total,
    })
}

/// Prefix sums of node masses along each `t` column.
struct Columns<'a> {
    grid: &'a Grid3<f64>,
    pre: Vec<f64>,
}

impl<'a> Columns<'a> {
    fn new(d: &'a MassDensity) -> Self {
        let grid = d.field.grid();
        let [nx, ny, nt] = grid.extents;
        let w = grid.cell_volume();
        let vals = d.field.values();
        let mut pre = vec![0.0; nx * ny * (nt + 1)];
        pre.par_chunks_mut(nt + 1)
            .enumerate()
            .for_each(|(col, out)| {
                let base = col * nt;
                for it in 0..nt {
                    out[it + 1] = out[it] + vals[base + it] * w;
                }
            });
        Columns { grid, pre }
    }

    /// Mass of the column `col` on `(-inf, t)`, each node spreading its mass
    /// evenly over its cell `[t_i - h_t/2, t_i + h_t/2]`.
    fn below(&self, col: usize, t: f64) -> f64 {
        let g = self.grid;
        let nt = g.extents[2];
        let pre = &self.pre[col * (nt + 1)..(col + 1) * (nt + 1)];
        let u = (t - g.origin[2]) / g.spacing[2] + 0.5;
        if u <= 0.0 {
            return 0.0;
        }
        if u >= nt as f64 {
            return pre[nt];
        }
        let i = u.floor() as usize;
        pre[i] + (u - i as f64) * (pre[i + 1] - pre[i])
    }

    /// Mass in `B_R(c)`: whole nodes in `x`, `y` and the exact ball interval
    /// along each `t` column. Continuous and nondecreasing in `R`.
    fn ball(&self, c: [f64; 3], r: f64) -> f64 {
        let g = self.grid;
        let [nx, ny, _] = g.extents;
        let [hx, hy, _] = g.spacing;
        let [ox, oy, _] = g.origin;
        let r4 = r * r * r * r;
        let range = |lo: f64, hi: f64, o: f64, h: f64, n: usize| -> Option<(usize, usize)> {
            let a = (((lo - o) / h).ceil() as i64).max(0);
            let b = (((hi - o) / h).floor() as i64).min(n as i64 - 1);
            (a <= b).then_some((a as usize, b as usize))
        };
        let (Some((x0, x1)), Some((y0, y1))) = (
            range(c[0] - r, c[0] + r, ox, hx, nx),
            range(c[1] - r, c[1] + r, oy, hy, ny),
        ) else {
            return 0.0;
        };
        let mut acc = 0.0;
        for ix in x0..=x1 {
            let x = ox + ix as f64 * hx;
            let dx = x - c[0];
            for iy in y0..=y1 {
                let y = oy + iy as f64 * hy;
                let dy = y - c[1];
                let r2 = dx * dx + dy * dy;
                if r2 * r2 >= r4 {
                    continue;
                }
                let s = (r4 - r2 * r2).sqrt();
                let tau = c[2] + 2.0 * (c[1] * x - c[0] * y);
                let col = ix * ny + iy;
                acc += self.below(col, tau + s) - self.below(col, tau - s);
            }
        }
        acc
    }

    /// Node indices of the candidate centers: every `stride`-th node along
    /// each axis, aligned so the middle node is included.
    fn centers(&self, stride: usize) -> Vec<usize> {
        let [nx, ny, nt] = self.grid.extents;
        let axis = |n: usize| ((n / 2) % stride..n).step_by(stride).collect::<Vec<_>>();
        let (ax, ay, at) = (axis(nx), axis(ny), axis(nt));
        let mut out = Vec::with_capacity(ax.len() * ay.len() * at.len());
        for &ix in &ax {
            for &iy in &ay {
                for &it in &at {
                    out.push(self.grid.index(ix, iy, it));
                }
            }
        }
        out
    }

    fn masses(&self, centers: &[usize], r: f64) -> Vec<f64> {
        centers
            .par_iter()
            .map(|&i| self.ball(self.grid.coords(i), r))
            .collect()
    }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, m)| {
            if *m > best.1 {
                (i, *m)
            } else {
                best
            }
        })
}

fn check_stride(stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(Error::config("center stride must be positive"));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain("ball radius must be positive"));
    }
    Ok(())
}

/// Mass of the density in `B_R(c)` for any center `c`.
pub fn ball_mass(density: &MassDensity, c: &GroupPoint<f64>, r: f64) -> Result<f64> {
    check_radius(r)?;
    if c.n() != 1 {
        return Err(Error::Dimension {
            left: c.n(),
            right: 1,
        });
    }
    Ok(Columns::new(density).ball([c.x[0], c.y[0], c.t], r))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub mass: f64,
    pub center: GroupPoint<f64>,
}

/// Largest `B_R` mass over the strided center lattice.
pub fn concentration(density: &MassDensity, r: f64, stride: usize) -> Result<Concentration> {
    check_radius(r)?;
    check_stride(stride)?;
    let cols = Columns::new(density);
    let centers = cols.centers(stride);
    let (i, m) = argmax(&cols.masses(&centers, r));
    Ok(Concentration {
        mass: m.min(1.0),
        center: density.field.grid().node_point(centers[i]),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationProfile {
    /// `(R, Q(R))`.
    pub samples: Vec<(f64, f64)>,
    pub centers: Vec<GroupPoint<f64>>,
}

pub fn concentration_profile(
    density: &MassDensity,
    radii: &[f64],
    stride: usize,
) -> Result<ConcentrationProfile> {
    check_stride(stride)?;
    for r in radii {
        check_radius(*r)?;
    }
    let cols = Columns::new(density);
    let centers = cols.centers(stride);
    let mut samples = Vec::with_capacity(radii.len());
    let mut best = Vec::with_capacity(radii.len());
    for r in radii {
        let (i, m) = argmax(&cols.masses(&centers, *r));
        samples.push((*r, m.min(1.0)));
        best.push(density.field.grid().node_point(centers[i]));
    }
    Ok(ConcentrationProfile {
        samples,
        centers: best,
    })
}

#[derive(Clone, Debug)]
pub struct DilationNormalized {
    pub field: ScalarField<f64>,
    /// Radius whose best ball held half the mass of the input; also the
    /// dilation factor, since the unit ball of `u o delta_r` sees `B_r` of `u`.
    pub r_m: f64,
    /// Center of that ball in the input frame.
    pub center: GroupPoint<f64>,
    /// Mass of `|nu|^q` in the unit ball at the origin.
    pub half_mass: f64,
}

/// Radius in `(0, hi)` where the nondecreasing `mass` is within
/// [`HALF_MASS_TOL`] of `1/2`, by bisection.
fn half_radius<T>(hi: f64, mass: impl Fn(f64) -> (T, f64)) -> Result<(f64, T)> {
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (tag, m) = mass(mid);
        if (m - 0.5).abs() <= HALF_MASS_TOL {
            return Ok((mid, tag));
        }
        if m < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Err(Error::Range(format!(
        "ball mass does not reach 1/2 near R = {}",
        0.5 * (lo + hi)
    )))
}

/// `lambda^{Q/q} u o delta_lambda`, exact on the rescaled lattice.
fn mass_dilation(u: &ScalarField<f64>, lambda: f64, q: f64) -> Result<ScalarField<f64>> {
    let qd = homogeneous_dimension(1)? as f64;
    Ok(dilate_field(u, lambda)?.scaled(lambda.powf(qd / q)))
}

/// `nu = lambda^{Q/q} u o delta_lambda`, with `lambda` bisected until the best
/// unit ball holds half of `int |nu|^q = 1`, then translated so that ball is
/// centered at the origin. Dilations are exact (same node values on a
/// rescaled lattice). The translation interpolates along `t`, so `nu` is
/// rescaled to unit mass and dilated once more about the origin to put the
/// half mass back in the unit ball.
pub fn dilation_normalize(
    u: &ScalarField<f64>,
    q: f64,
    stride: usize,
) -> Result<DilationNormalized> {
    check_stride(stride)?;
    let density = normalize_mass(u, q)?;
    if (density.total_mass - 1.0).abs() > NORMALIZED_TOL {
        return Err(Error::domain(format!(
            "input mass is {}, expected 1",
            density.total_mass
        )));
    }
    let cols = Columns::new(&density);
    let centers = cols.centers(stride);
    let (mut r_m, ci) = half_radius(4.0 * u.grid().max_gauge(), |r| {
        argmax(&cols.masses(&centers, r))
    })?;
    let center = u.grid().node_point(centers[ci]);
    let mut nu = mass_dilation(u, r_m, q)?;
    // the center seen from the dilated frame
    let moved = GroupPoint::h1(center.x[0] / r_m, center.y[0] / r_m, center.t / (r_m * r_m));
    if gauge(&moved) > 0.0 {
        nu = crate::grid::left_translate(&nu, &moved.inverse(), nu.domain());
        let m = lq_norm(&nu, q)?.powf(q);
        if !(m > 0.0) {
            return Err(Error::Range("translated field left the box".into()));
        }
        nu = nu.scaled(m.powf(-1.0 / q));
        let d = normalize_mass(&nu, q)?;
        let cols = Columns::new(&d);
        let (r, ()) = half_radius(4.0 * nu.grid().max_gauge(), |r| {
            ((), cols.ball([0.0; 3], r))
        })?;
        nu = mass_dilation(&nu, r, q)?;
        r_m *= r;
    }
    let half_mass = ball_mass(&normalize_mass(&nu, q)?, &GroupPoint::identity(1), 1.0)?;
    if (half_mass - 0.5).abs() > HALF_MASS_TOL {
        return Err(Error::Range(format!(
            "unit-ball mass {half_mass} at the origin after recentering"
        )));
    }
    Ok(DilationNormalized {
        field: nu,
        r_m,
        center,
        half_mass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Compactness,
    Vanishing,
    Dichotomy,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrichotomyResult {
    pub verdict: Verdict,
    /// Best center at the witness radius, one per sequence element.
    pub centers: Vec<GroupPoint<f64>>,
    pub radius: Option<f64>,
    /// Mass of the heavier carrier (dichotomy only).
    pub alpha: Option<f64>,
    /// Carrier pairs over the tail (dichotomy only).
    pub carriers: Vec<(GroupPoint<f64>, GroupPoint<f64>)>,
    /// Gauge distance of the carriers over the tail (dichotomy only).
    pub separations: Vec<f64>,
    pub eps: f64,
    pub profiles: Vec<ConcentrationProfile>,
}

struct Scan {
    centers: Vec<usize>,
    /// Per radius, the mass of every candidate ball.
    masses: Vec<Vec<f64>>,
}

/// Applies the three rules to the last [`TAIL`] elements, in the order
/// compactness, dichotomy, vanishing:
///
/// - compactness: some `R` has `Q_m(R) >= 1 - eps` on the whole tail;
/// - dichotomy: some `R` has, on the whole tail, a heaviest ball of mass in
///   `(eps, 1 - eps)` and a disjoint second ball such that both together
///   hold `>= 1 - eps`, with carrier distance above `4R` and strictly
///   increasing;
/// - vanishing: `Q(R_max) < eps` on the last element and nonincreasing over
///   the tail.
///
/// Otherwise the verdict is inconclusive.
pub fn classify_sequence(
    densities: &[MassDensity],
    eps: f64,
    radii: &[f64],
    stride: usize,
) -> Result<TrichotomyResult> {
    check_stride(stride)?;
    if densities.len() < TAIL {
        return Err(Error::config(format!(
            "need at least {TAIL} densities, got {}",
            densities.len()
        )));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::config("eps must lie in (0, 1/2)"));
    }
    if radii.is_empty() {
        return Err(Error::config("no radii given"));
    }
    let mut radii = radii.to_vec();
    for r in &radii {
        check_radius(*r)?;
    }
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    for (i, d) in densities.iter().enumerate() {
        let m = d.mass();
        if (m - 1.0).abs() > NORMALIZED_TOL {
            return Err(Error::domain(format!(
                "density {i} has mass {m}, expected 1"
            )));
        }
    }

    let scans: Vec<Scan> = densities
        .iter()
        .map(|d| {
            let cols = Columns::new(d);
            let centers = cols.centers(stride);
            let masses = radii.iter().map(|r| cols.masses(&centers, *r)).collect();
            Scan { centers, masses }
        })
        .collect();
    let point = |m: usize, i: usize| densities[m].field.grid().node_point(scans[m].centers[i]);
    let profiles: Vec<ConcentrationProfile> = (0..densities.len())
        .map(|m| {
            let best: Vec<(usize, f64)> = scans[m].masses.iter().map(|v| argmax(v)).collect();
            ConcentrationProfile {
                samples: radii
                    .iter()
                    .zip(&best)
                    .map(|(r, b)| (*r, b.1.min(1.0)))
                    .collect(),
                centers: best.iter().map(|b| point(m, b.0)).collect(),
            }
        })
        .collect();
    let tail: Vec<usize> = (densities.len() - TAIL..densities.len()).collect();
    let q = |m: usize, ri: usize| profiles[m].samples[ri].1;
    let witness = |ri: usize| {
        profiles
            .iter()
            .map(|p| p.centers[ri].clone())
            .collect::<Vec<_>>()
    };
    let mut out = TrichotomyResult {
        verdict: Verdict::Inconclusive,
        centers: Vec::new(),
        radius: None,
        alpha: None,
        carriers: Vec::new(),
        separations: Vec::new(),
        eps,
        profiles: Vec::new(),
    };

    if let Some(ri) = (0..radii.len()).find(|&ri| tail.iter().all(|&m| q(m, ri) >= 1.0 - eps)) {
        out.verdict = Verdict::Compactness;
        out.radius = Some(radii[ri]);
        out.centers = witness(ri);
    } else if let Some((ri, pairs)) = (0..radii.len()).find_map(|ri| {
        let r = radii[ri];
        let mut pairs = Vec::new();
        for &m in &tail {
            let masses = &scans[m].masses[ri];
            let (i1, m1) = argmax(masses);
            let c1 = point(m, i1);
            let far: Vec<f64> = (0..masses.len())
                .map(|i| {
                    let d = group_mul(&c1.inverse(), &point(m, i))
                        .map(|z| gauge(&z))
                        .unwrap_or(0.0);
                    if d >= 2.0 * r {
                        masses[i]
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            let (i2, m2) = argmax(&far);
            if !(m2 > 0.0) || !(m1 > eps && m1 < 1.0 - eps && m1 + m2 >= 1.0 - eps) {
                return None;
            }
            let c2 = point(m, i2);
            let sep = gauge(&group_mul(&c1.inverse(), &c2).ok()?);
            pairs.push((c1, c2, sep, m1));
        }
        let grows = pairs.windows(2).all(|w| w[1].2 > w[0].2);
        (grows && pairs.iter().all(|p| p.2 > 4.0 * r)).then_some((ri, pairs))
    }) {
        out.verdict = Verdict::Dichotomy;
        out.radius = Some(radii[ri]);
        out.centers = witness(ri);
        out.alpha = pairs.last().map(|p| p.3);
        out.separations = pairs.iter().map(|p| p.2).collect();
        out.carriers = pairs.into_iter().map(|p| (p.0, p.1)).collect();
    } else {
        let last = radii.len() - 1;
        let fading = tail.windows(2).all(|w| q(w[1], last) <= q(w[0], last));
        if fading && q(tail[TAIL - 1], last) < eps {
            out.verdict = Verdict::Vanishing;
            out.radius = Some(radii[last]);
            out.centers = witness(last);
        }
    }
    out.profiles = profiles;
    Ok(out)
}

/// `phi_r`: 1 on `B_r`, 0 outside `B_{2r}`, the C^1 smoothstep
/// `1 - (3 s^2 - 2 s^3)`, `s = rho/r - 1`, in between. Lives on the unmasked
/// domain of `grid`.
pub fn cutoff(r: f64, grid: &Grid3<f64>) -> Result<ScalarField<f64>> {
    check_radius(r)?;
    let rho = node_gauges(grid);
    let vals = rho
        .iter()
        .map(|g| {
            let s = (g / r - 1.0).clamp(0.0, 1.0);
            1.0 - s * s * (3.0 - 2.0 * s)
        })
        .collect();
    ScalarField::from_values(Domain::full(grid.clone()), vals)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySplit {
    pub r: f64,
    /// `| ||phi u||^2 + ||(1 - phi) u||^2 - ||u||^2 |`.
    pub defect: f64,
    /// `int_{B_2r \ B_r} |u|^{p+1}`.
    pub annulus_mass: f64,
}

/// Cutoff splitting of `u` at radius `r`. Parts of `B_{2r}` outside the
/// field's domain simply carry no mass.
pub fn energy_split(u: &ScalarField<f64>, r: f64, p: f64) -> Result<EnergySplit> {
    check_radius(r)?;
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::domain("exponent must be positive"));
    }
    let phi = cutoff(r, u.grid())?;
    let inner = ScalarField::from_values(
        u.domain().clone(),
        u.values()
            .iter()
            .zip(phi.values())
            .map(|(v, f)| v * f)
            .collect(),
    )?;
    let outer = u.zip_with(&inner, |a, b| a - b)?;
    let defect = (e_norm_sq(&inner) + e_norm_sq(&outer) - e_norm_sq(u)).abs();
    let rho = node_gauges(u.grid());
    let w = u.grid().cell_volume();
    let annulus_mass = u
        .values()
        .iter()
        .zip(&rho)
        .filter(|(_, g)| **g >= r && **g < 2.0 * r)
        .map(|(v, _)| v.abs().powf(p + 1.0))
        .sum::<f64>()
        * w;
    Ok(EnergySplit {
        r,
        defect,
        annulus_mass,
    })
}

/// `||u||^2 / (int |u|^{p+1})^{2/(p+1)}`.
pub fn rayleigh_quotient(u: &ScalarField<f64>, p: f64) -> Result<f64> {
    let l = lq_norm(u, p + 1.0)?;
    if !(l > 0.0) {
        return Err(Error::domain("Rayleigh quotient of the zero field"));
    }
    Ok(e_norm_sq(u) / (l * l))
}

/// Least-squares slope against the index is negative and the last value is
/// below the first.
pub fn decreasing_in_trend(values: &[f64]) -> bool {
    let n = values.len();
    if n < 2 {
        return false;
    }
    let mx = (n - 1) as f64 / 2.0;
    let my = values.iter().sum::<f64>() / n as f64;
    let sxy: f64 = values
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 - mx) * (v - my))
        .sum();
    sxy < 0.0 && values[n - 1] < values[0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticFamily {
    /// One bump left-translated along a random direction.
    Translating,
    /// One bump dilated by a geometric factor.
    Flattening,
    /// Two bumps with a random mass split moving apart.
    Separating,
}

#[derive(Clone, Debug)]
pub struct SyntheticSequence {
    pub family: SyntheticFamily,
    pub fields: Vec<ScalarField<f64>>,
    /// Constructed `L^q` mass fraction of the first bump (separating only).
    pub split: Option<f64>,
}

/// Radii and `eps` the synthetic families are laid out for.
pub const SYNTH_RADII: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];
pub const SYNTH_EPS: f64 = 0.1;
pub const SYNTH_LEN: usize = 8;

fn synth_domain() -> Result<std::sync::Arc<Domain<f64>>> {
    Ok(Domain::full(Grid3::centered(
        [49, 49, 97],
        [8.0, 8.0, 32.0],
    )?))
}

/// `exp(-(rho(c^{-1} z) / s)^4)`.
fn bump(domain: &std::sync::Arc<Domain<f64>>, c: [f64; 3], s: f64, amp: f64) -> ScalarField<f64> {
    let s4 = s.powi(4);
    ScalarField::from_fn(domain.clone(), move |x, y, t| {
        let (dx, dy) = (x - c[0], y - c[1]);
        let dt = t - c[2] - 2.0 * (c[1] * x - c[0] * y);
        let r2 = dx * dx + dy * dy;
        amp * (-(r2 * r2 + dt * dt) / s4).exp()
    })
}

/// Seeded member of one of the three generator families, laid out for
/// [`SYNTH_RADII`] and [`SYNTH_EPS`]. `q` fixes the mass split of the
/// separating family.
pub fn synthetic_sequence(
    family: SyntheticFamily,
    seed: u64,
    len: usize,
    q: f64,
) -> Result<SyntheticSequence> {
    if len < TAIL {
        return Err(Error::config(format!("need at least {TAIL} elements")));
    }
    if len > SYNTH_LEN {
        return Err(Error::config(format!(
            "at most {SYNTH_LEN} elements fit the generator box"
        )));
    }
    if !(q >= 1.0) {
        return Err(Error::config("mass exponent must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    let (ux, uy) = (theta.cos(), theta.sin());
    let domain = synth_domain()?;
    let mut split = None;
    let fields = match family {
        SyntheticFamily::Translating => {
            let s = rng.gen_range(0.8..1.2);
            let step = rng.gen_range(0.4..0.6);
            let start = [
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            ];
            (0..len)
                .map(|m| {
                    let d = step * m as f64;
                    bump(
                        &domain,
                        [start[0] + d * ux, start[1] + d * uy, start[2] + 0.1 * d],
                        s,
                        1.0,
                    )
                })
                .collect()
        }
        SyntheticFamily::Flattening => {
            let s = rng.gen_range(0.8..1.2);
            let growth: f64 = rng.gen_range(1.5..2.0);
            let base = Domain::full(Grid3::centered([33, 33, 33], [3.0, 3.0, 9.0])?);
            let b = bump(&base, [0.0; 3], s, 1.0);
            (0..len)
                .map(|m| dilate_field(&b, growth.powi(-(m as i32))))
                .collect::<Result<Vec<_>>>()?
        }
        SyntheticFamily::Separating => {
            let s = rng.gen_range(0.6..0.8);
            let beta: f64 = rng.gen_range(0.3..0.7);
            let step = rng.gen_range(0.9..1.1);
            split = Some(beta);
            let (a1, a2) = (beta.powf(1.0 / q), (1.0 - beta).powf(1.0 / q));
            (0..len)
                .map(|m| {
                    let h = 0.5 * (3.0 + step * m as f64);
                    let left = bump(&domain, [-h * ux, -h * uy, 0.0], s, a1);
                    let right = bump(&domain, [h * ux, h * uy, 0.0], s, a2);
                    left.zip_with(&right, |a, b| a + b)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(SyntheticSequence {
        family,
        fields,
        split,
    })
}
