//! Uniform `n = 1` grids over boxes containing a gauge ball, fields with a
//! Dirichlet mask, and the discrete horizontal calculus.
//!
//! Nodes outside the mask hold zero and every operator treats nodes outside
//! the box as zero, so a field on `B_k` zero-extends to `B_{k+1}` without
//! changing any quantity as long as both live on the same lattice.
//!
//! The sub-Laplacian stencil is
//!
//! ```text
//! D_xx + D_yy + 4 (x^2 + y^2) D_tt + 4 y D_x D_t - 4 x D_y D_t
//! ```
//!
//! with compact three-point second differences and centered mixed
//! differences. It is minus the exact gradient of the quadratic form
//!
//! ```text
//! 1/4 sum_{s, s' = +-} |D_x^s u + 2 y D_t^s' u|^2 + |D_y^s u - 2 x D_t^s' u|^2
//! ```
//!
//! so energies and their gradients share one stencil, and the compact second
//! differences couple all parity classes of the lattice.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{gauge, gauge4_h1, homogeneous_dimension, GroupPoint, TestFunction};
use crate::linalg::{dot, par_sum};
use crate::scalar::Real;

/// Minimum nodes per axis.
pub const MIN_NODES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid3<F> {
    /// Node counts `(N_x, N_y, N_t)`.
    pub extents: [usize; 3],
    pub spacing: [F; 3],
    /// Coordinates of node `(0, 0, 0)`.
    pub origin: [F; 3],
}

impl<F: Real> Grid3<F> {
    pub fn new(extents: [usize; 3], spacing: [F; 3], origin: [F; 3]) -> Result<Self> {
        if extents.iter().any(|&n| n < MIN_NODES) {
            return Err(Error::config(format!(
                "need at least {MIN_NODES} nodes per axis, got {extents:?}"
            )));
        }
        if spacing.iter().any(|h| !(*h > F::zero()) || !h.is_finite()) {
            return Err(Error::config("grid spacing must be positive and finite"));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::config("grid origin must be finite"));
        }
        Ok(Grid3 {
            extents,
            spacing,
            origin,
        })
    }

    /// Box `[-a, a] x [-b, b] x [-c, c]` with `extents` nodes including the faces.
    pub fn centered(extents: [usize; 3], half_widths: [F; 3]) -> Result<Self> {
        let mut spacing = [F::zero(); 3];
        for a in 0..3 {
            if extents[a] < 2 {
                return Err(Error::config("need at least 2 nodes"));
            }
            spacing[a] = F::lit(2.0) * half_widths[a] / F::from_usize_lossy(extents[a] - 1);
        }
        Grid3::new(
            extents,
            spacing,
            [-half_widths[0], -half_widths[1], -half_widths[2]],
        )
    }

    pub fn len(&self) -> usize {
        self.extents[0] * self.extents[1] * self.extents[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index; `t` runs fastest, then `y`, then `x`.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, it: usize) -> usize {
        (ix * self.extents[1] + iy) * self.extents[2] + it
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        let nt = self.extents[2];
        let ny = self.extents[1];
        [idx / (ny * nt), (idx / nt) % ny, idx % nt]
    }

    #[inline]
    pub fn axis_coord(&self, axis: usize, i: usize) -> F {
        self.origin[axis] + F::from_usize_lossy(i) * self.spacing[axis]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [F; 3] {
        let [ix, iy, it] = self.unindex(idx);
        [
            self.axis_coord(0, ix),
            self.axis_coord(1, iy),
            self.axis_coord(2, it),
        ]
    }

    pub fn node_point(&self, idx: usize) -> GroupPoint<F> {
        let [x, y, t] = self.coords(idx);
        GroupPoint::h1(x, y, t)
    }

    pub fn cell_volume(&self) -> F {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Upper end of each axis.
    pub fn far_corner(&self) -> [F; 3] {
        [0, 1, 2].map(|a| self.axis_coord(a, self.extents[a] - 1))
    }

    /// Largest gauge of a box node.
    pub fn max_gauge(&self) -> F {
        let lo = self.origin;
        let hi = self.far_corner();
        let ax = lo[0].abs().max(hi[0].abs());
        let ay = lo[1].abs().max(hi[1].abs());
        let at = lo[2].abs().max(hi[2].abs());
        gauge4_h1(ax, ay, at).sqrt().sqrt()
    }

    /// Offset of `other`'s origin in nodes of `self`, if both grids share a
    /// lattice.
    pub fn lattice_offset(&self, other: &Grid3<F>) -> Option<[i64; 3]> {
        let tol = F::lit(1e-9);
        let mut off = [0i64; 3];
        for a in 0..3 {
            let hs = self.spacing[a];
            if ((hs - other.spacing[a]) / hs).abs() > tol {
                return None;
            }
            let shift = (other.origin[a] - self.origin[a]) / hs;
            let r = shift.round();
            if (shift - r).abs() > F::lit(1e-6) {
                return None;
            }
            off[a] = r.to_i64()?;
        }
        Some(off)
    }
}

/// A grid with its Dirichlet mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain<F> {
    grid: Grid3<F>,
    mask: Vec<bool>,
    ball_radius: Option<F>,
}

impl<F: Real> Domain<F> {
    /// Mask = open gauge ball `rho < k`.
    pub fn ball(grid: Grid3<F>, k: F) -> Result<Arc<Self>> {
        if !(k > F::zero()) {
            return Err(Error::config("ball radius must be positive"));
        }
        let k4 = k * k * k * k;
        let mask = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let [x, y, t] = grid.coords(i);
                gauge4_h1(x, y, t) < k4
            })
            .collect();
        Ok(Arc::new(Domain {
            grid,
            mask,
            ball_radius: Some(k),
        }))
    }

    /// Every node is an unknown; zero extension happens only outside the box.
    pub fn full(grid: Grid3<F>) -> Arc<Self> {
        let mask = vec![true; grid.len()];
        Arc::new(Domain {
            grid,
            mask,
            ball_radius: None,
        })
    }

    /// Image under `delta_s`: the same mask on the lattice scaled by
    /// `(s, s, s^2)`.
    pub fn dilated(&self, s: F) -> Result<Arc<Self>> {
        if !(s > F::zero()) || !s.is_finite() {
            return Err(Error::domain("dilation factor must be positive"));
        }
        let g = &self.grid;
        let scale = [s, s, s * s];
        let grid = Grid3::new(
            g.extents,
            [0, 1, 2].map(|a| g.spacing[a] * scale[a]),
            [0, 1, 2].map(|a| g.origin[a] * scale[a]),
        )?;
        Ok(Arc::new(Domain {
            grid,
            mask: self.mask.clone(),
            ball_radius: self.ball_radius.map(|k| k * s),
        }))
    }

    pub fn grid(&self) -> &Grid3<F> {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn ball_radius(&self) -> Option<F> {
        self.ball_radius
    }

    pub fn interior_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Nodes at least `margin` cells away from every masked-out node
    /// (and from the box faces), along each axis and the `x-t`, `y-t`
    /// diagonals used by the stencils.
    pub fn deep_interior(&self, margin: usize) -> Vec<bool> {
        let g = &self.grid;
        let [nx, ny, nt] = g.extents;
        let m = margin as i64;
        (0..g.len())
            .into_par_iter()
            .map(|idx| {
                if !self.mask[idx] {
                    return false;
                }
                let [ix, iy, it] = g.unindex(idx).map(|v| v as i64);
                for dx in -m..=m {
                    for dy in -m..=m {
                        for dt in -m..=m {
                            let (a, b, c) = (ix + dx, iy + dy, it + dt);
                            if a < 0
                                || b < 0
                                || c < 0
                                || a >= nx as i64
                                || b >= ny as i64
                                || c >= nt as i64
                            {
                                return false;
                            }
                            if !self.mask[g.index(a as usize, b as usize, c as usize)] {
                                return false;
                            }
                        }
                    }
                }
                true
            })
            .collect()
    }
}

/// Lattice shared by a family of nested ball grids: fixed spacings and a
/// fixed parity of the node count, so the origin sits at the same place
/// relative to the lattice for every radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallLattice<F> {
    pub h_xy: F,
    pub h_t: F,
    pub even_nodes: bool,
}

impl<F: Real> BallLattice<F> {
    /// Spacing used by [`build_ball_grid`]: `h_xy = 2k / (N - 1)`,
    /// `h_t = k h_xy`, so all three axes carry `N` nodes.
    pub fn for_ball(k: F, nodes_per_axis: usize) -> Result<Self> {
        if nodes_per_axis < MIN_NODES {
            return Err(Error::config(format!(
                "nodes_per_axis must be >= {MIN_NODES}, got {nodes_per_axis}"
            )));
        }
        if !(k > F::zero()) || !k.is_finite() {
            return Err(Error::config("ball radius must be positive"));
        }
        let h = F::lit(2.0) * k / F::from_usize_lossy(nodes_per_axis - 1);
        Ok(BallLattice {
            h_xy: h,
            h_t: k * h,
            even_nodes: nodes_per_axis.is_multiple_of(2),
        })
    }

    fn count(&self, half: F, h: F) -> usize {
        let cells = (F::lit(2.0) * half / h - F::lit(1e-9))
            .ceil()
            .to_usize()
            .unwrap_or(0);
        let mut n = cells.max(1) + 1;
        if n.is_multiple_of(2) != self.even_nodes {
            n += 1;
        }
        while n < MIN_NODES {
            n += 2;
        }
        n
    }

    /// Smallest centered box on this lattice containing `[-k, k]^2 x [-k^2, k^2]`.
    pub fn grid(&self, k: F) -> Result<Grid3<F>> {
        if !(k > F::zero()) {
            return Err(Error::config("ball radius must be positive"));
        }
        let nxy = self.count(k, self.h_xy);
        let nt = self.count(k * k, self.h_t);
        let half = F::lit(0.5);
        let oxy = -F::from_usize_lossy(nxy - 1) * half * self.h_xy;
        let ot = -F::from_usize_lossy(nt - 1) * half * self.h_t;
        Grid3::new(
            [nxy, nxy, nt],
            [self.h_xy, self.h_xy, self.h_t],
            [oxy, oxy, ot],
        )
    }

    pub fn domain(&self, k: F) -> Result<Arc<Domain<F>>> {
        Domain::ball(self.grid(k)?, k)
    }
}

/// Box `[-k, k]^2 x [-k^2, k^2]` with `nodes_per_axis` nodes on every axis,
/// masked to the gauge ball `B_k`.
pub fn build_ball_grid<F: Real>(k: F, nodes_per_axis: usize) -> Result<Arc<Domain<F>>> {
    BallLattice::for_ball(k, nodes_per_axis)?.domain(k)
}

/// Real values on a [`Domain`], zero outside its mask.
#[derive(Clone, Debug)]
pub struct ScalarField<F> {
    domain: Arc<Domain<F>>,
    values: Vec<F>,
}

impl<F: Real> PartialEq for ScalarField<F> {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.domain, &other.domain) || self.domain == other.domain)
            && self.values == other.values
    }
}

impl<F: Real> ScalarField<F> {
    pub fn zeros(domain: Arc<Domain<F>>) -> Self {
        let n = domain.len();
        ScalarField {
            domain,
            values: vec![F::zero(); n],
        }
    }

    /// Checks length, finiteness and the Dirichlet condition.
    pub fn from_values(domain: Arc<Domain<F>>, values: Vec<F>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::Dimension {
                left: values.len(),
                right: domain.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("field values must be finite".into()));
        }
        if values
            .iter()
            .zip(domain.mask())
            .any(|(v, m)| !m && *v != F::zero())
        {
            return Err(Error::domain("field is nonzero outside its Dirichlet mask"));
        }
        Ok(ScalarField { domain, values })
    }

    /// Builds the masked field `f(x, y, t)`.
    pub fn from_fn(domain: Arc<Domain<F>>, f: impl Fn(F, F, F) -> F + Sync) -> Self {
        let g = domain.grid().clone();
        let values = (0..g.len())
            .into_par_iter()
            .map(|i| {
                if domain.mask()[i] {
                    let [x, y, t] = g.coords(i);
                    f(x, y, t)
                } else {
                    F::zero()
                }
            })
            .collect();
        ScalarField { domain, values }
    }

    /// Samples a test function on the masked nodes.
    pub fn sample(domain: Arc<Domain<F>>, f: &TestFunction<F>) -> Self {
        Self::from_fn(domain, |x, y, t| f.eval(&GroupPoint::h1(x, y, t)))
    }

    pub(crate) fn from_raw(domain: Arc<Domain<F>>, values: Vec<F>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        ScalarField { domain, values }
    }

    pub fn domain(&self) -> &Arc<Domain<F>> {
        &self.domain
    }

    pub fn grid(&self) -> &Grid3<F> {
        self.domain.grid()
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn into_values(self) -> Vec<F> {
        self.values
    }

    pub fn get(&self, ix: usize, iy: usize, it: usize) -> F {
        self.values[self.grid().index(ix, iy, it)]
    }

    pub fn scaled(&self, s: F) -> Self {
        let values = self.values.par_iter().map(|v| *v * s).collect();
        ScalarField {
            domain: self.domain.clone(),
            values,
        }
    }

    /// Node-wise map; the result is re-masked.
    pub fn map(&self, f: impl Fn(F) -> F + Sync) -> Self {
        let mask = self.domain.mask();
        let values = self
            .values
            .par_iter()
            .zip(mask.par_iter())
            .map(|(v, m)| if *m { f(*v) } else { F::zero() })
            .collect();
        ScalarField {
            domain: self.domain.clone(),
            values,
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(F, F) -> F + Sync) -> Result<Self> {
        self.check_same(other)?;
        let mask = self.domain.mask();
        let values = (0..self.values.len())
            .into_par_iter()
            .map(|i| {
                if mask[i] {
                    f(self.values[i], other.values[i])
                } else {
                    F::zero()
                }
            })
            .collect();
        Ok(ScalarField {
            domain: self.domain.clone(),
            values,
        })
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain {
            Ok(())
        } else {
            Err(Error::domain("fields live on different domains"))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == F::zero())
    }

    /// Largest masked value and its node index (first on ties).
    pub fn argmax(&self) -> Option<(usize, F)> {
        let mask = self.domain.mask();
        let mut best: Option<(usize, F)> = None;
        for (i, v) in self.values.iter().enumerate() {
            if mask[i] && best.is_none_or(|(_, b)| *v > b) {
                best = Some((i, *v));
            }
        }
        best
    }

    pub fn min_masked(&self) -> Option<F> {
        let mask = self.domain.mask();
        self.values
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| *v)
            .reduce(F::min)
    }

    /// Zero-extends onto `target`, which must share this field's lattice and
    /// contain its support.
    pub fn extend_to(&self, target: &Arc<Domain<F>>) -> Result<Self> {
        let src = self.grid();
        let dst = target.grid();
        let off = dst
            .lattice_offset(src)
            .ok_or_else(|| Error::domain("target grid does not share the source lattice"))?;
        let mut values = vec![F::zero(); dst.len()];
        for (i, v) in self.values.iter().enumerate() {
            if *v == F::zero() {
                continue;
            }
            let s = src.unindex(i);
            let d: Vec<i64> = (0..3).map(|a| s[a] as i64 + off[a]).collect();
            if (0..3).any(|a| d[a] < 0 || d[a] >= dst.extents[a] as i64) {
                return Err(Error::domain("source support leaves the target box"));
            }
            let j = dst.index(d[0] as usize, d[1] as usize, d[2] as usize);
            if !target.mask()[j] {
                return Err(Error::domain("source support leaves the target mask"));
            }
            values[j] = *v;
        }
        Ok(ScalarField {
            domain: target.clone(),
            values,
        })
    }
}

struct Stencil<F> {
    n: [usize; 3],
    h: [F; 3],
    o: [F; 3],
    inv_hx2: F,
    inv_hy2: F,
    inv_ht2: F,
    inv_2hx: F,
    inv_2hy: F,
    inv_2ht: F,
    inv_4hxht: F,
    inv_4hyht: F,
}

impl<F: Real> Stencil<F> {
    fn new(g: &Grid3<F>) -> Self {
        let [hx, hy, ht] = g.spacing;
        let one = F::one();
        let two = F::lit(2.0);
        let four = F::lit(4.0);
        Stencil {
            n: g.extents,
            h: g.spacing,
            o: g.origin,
            inv_hx2: one / (hx * hx),
            inv_hy2: one / (hy * hy),
            inv_ht2: one / (ht * ht),
            inv_2hx: one / (two * hx),
            inv_2hy: one / (two * hy),
            inv_2ht: one / (two * ht),
            inv_4hxht: one / (four * hx * ht),
            inv_4hyht: one / (four * hy * ht),
        }
    }
}

/// Read access with zero extension outside the box.
struct Reader<'a, F> {
    u: &'a [F],
    n: [usize; 3],
}

impl<F: Real> Reader<'_, F> {
    #[inline(always)]
    fn at(&self, ix: usize, iy: usize, it: usize, dx: i64, dy: i64, dt: i64) -> F {
        let a = ix as i64 + dx;
        let b = iy as i64 + dy;
        let c = it as i64 + dt;
        if a < 0
            || b < 0
            || c < 0
            || a >= self.n[0] as i64
            || b >= self.n[1] as i64
            || c >= self.n[2] as i64
        {
            F::zero()
        } else {
            self.u[((a as usize) * self.n[1] + b as usize) * self.n[2] + c as usize]
        }
    }
}

#[derive(Clone, Copy)]
enum Kernel {
    Xh,
    Yh,
    Sublaplacian,
}

fn apply_kernel<F: Real>(domain: &Domain<F>, u: &[F], kernel: Kernel, out: &mut [F]) {
    let g = domain.grid();
    let s = Stencil::new(g);
    let mask = domain.mask();
    let slab = s.n[1] * s.n[2];
    let r = Reader { u, n: s.n };
    let two = F::lit(2.0);
    let four = F::lit(4.0);
    out.par_chunks_mut(slab)
        .enumerate()
        .for_each(|(ix, chunk)| {
            let x = s.o[0] + F::from_usize_lossy(ix) * s.h[0];
            for iy in 0..s.n[1] {
                let y = s.o[1] + F::from_usize_lossy(iy) * s.h[1];
                for it in 0..s.n[2] {
                    let local = iy * s.n[2] + it;
                    let idx = ix * slab + local;
                    if !mask[idx] {
                        chunk[local] = F::zero();
                        continue;
                    }
                    let dt_c = (r.at(ix, iy, it, 0, 0, 1) - r.at(ix, iy, it, 0, 0, -1)) * s.inv_2ht;
                    chunk[local] = match kernel {
                        Kernel::Xh => {
                            (r.at(ix, iy, it, 1, 0, 0) - r.at(ix, iy, it, -1, 0, 0)) * s.inv_2hx
                                + two * y * dt_c
                        }
                        Kernel::Yh => {
                            (r.at(ix, iy, it, 0, 1, 0) - r.at(ix, iy, it, 0, -1, 0)) * s.inv_2hy
                                - two * x * dt_c
                        }
                        Kernel::Sublaplacian => {
                            let c = u[idx];
                            let dxx = (r.at(ix, iy, it, 1, 0, 0) - two * c
                                + r.at(ix, iy, it, -1, 0, 0))
                                * s.inv_hx2;
                            let dyy = (r.at(ix, iy, it, 0, 1, 0) - two * c
                                + r.at(ix, iy, it, 0, -1, 0))
                                * s.inv_hy2;
                            let dtt = (r.at(ix, iy, it, 0, 0, 1) - two * c
                                + r.at(ix, iy, it, 0, 0, -1))
                                * s.inv_ht2;
                            let dxt = (r.at(ix, iy, it, 1, 0, 1)
                                - r.at(ix, iy, it, 1, 0, -1)
                                - r.at(ix, iy, it, -1, 0, 1)
                                + r.at(ix, iy, it, -1, 0, -1))
                                * s.inv_4hxht;
                            let dyt = (r.at(ix, iy, it, 0, 1, 1)
                                - r.at(ix, iy, it, 0, 1, -1)
                                - r.at(ix, iy, it, 0, -1, 1)
                                + r.at(ix, iy, it, 0, -1, -1))
                                * s.inv_4hyht;
                            dxx + dyy + four * (x * x + y * y) * dtt + four * y * dxt
                                - four * x * dyt
                        }
                    };
                }
            }
        });
}

/// Centered horizontal derivative `X_h u = D_x u + 2 y D_t u` on masked nodes.
pub fn apply_xh<F: Real>(u: &ScalarField<F>) -> ScalarField<F> {
    let mut out = vec![F::zero(); u.values.len()];
    apply_kernel(&u.domain, &u.values, Kernel::Xh, &mut out);
    ScalarField::from_raw(u.domain.clone(), out)
}

/// Centered horizontal derivative `Y_h u = D_y u - 2 x D_t u` on masked nodes.
pub fn apply_yh<F: Real>(u: &ScalarField<F>) -> ScalarField<F> {
    let mut out = vec![F::zero(); u.values.len()];
    apply_kernel(&u.domain, &u.values, Kernel::Yh, &mut out);
    ScalarField::from_raw(u.domain.clone(), out)
}

pub fn apply_sublaplacian_h<F: Real>(u: &ScalarField<F>) -> ScalarField<F> {
    let mut out = vec![F::zero(); u.values.len()];
    apply_kernel(&u.domain, &u.values, Kernel::Sublaplacian, &mut out);
    ScalarField::from_raw(u.domain.clone(), out)
}

/// `-eps2 * Delta_h u + u` on masked nodes, for raw node values.
pub(crate) fn energy_operator<F: Real>(domain: &Domain<F>, u: &[F], eps2: F) -> Vec<F> {
    let mut out = vec![F::zero(); u.len()];
    apply_kernel(domain, u, Kernel::Sublaplacian, &mut out);
    out.par_iter_mut()
        .zip(u.par_iter())
        .for_each(|(o, v)| *o = *v - eps2 * *o);
    out
}

/// Midpoint-rule integral over the masked nodes.
pub fn integrate<F: Real>(u: &ScalarField<F>) -> F {
    par_sum(u.values.len(), |i| u.values[i]) * u.grid().cell_volume()
}

/// Quadrature inner product `h_x h_y h_t sum u v`.
pub fn inner<F: Real>(u: &ScalarField<F>, v: &ScalarField<F>) -> Result<F> {
    u.check_same(v)?;
    Ok(dot(&u.values, &v.values) * u.grid().cell_volume())
}

pub fn lq_norm<F: Real>(u: &ScalarField<F>, q: F) -> Result<F> {
    if !(q >= F::one()) {
        return Err(Error::domain("L^q norm needs q >= 1"));
    }
    let s = if q == F::lit(2.0) {
        par_sum(u.values.len(), |i| u.values[i] * u.values[i])
    } else {
        par_sum(u.values.len(), |i| u.values[i].abs().powf(q))
    };
    Ok((s * u.grid().cell_volume()).powf(F::one() / q))
}

/// `||u||^2 = <-Delta_h u, u> + ||u||_2^2`, the discrete Dirichlet form plus
/// mass.
pub fn e_norm_sq<F: Real>(u: &ScalarField<F>) -> F {
    let au = energy_operator(&u.domain, &u.values, F::one());
    dot(&au, &u.values) * u.grid().cell_volume()
}

pub fn e_norm<F: Real>(u: &ScalarField<F>) -> F {
    e_norm_sq(u).max(F::zero()).sqrt()
}

/// `||u||_{L^q} / ||u||` for `1 < q <= 2Q / (Q - 2) = 4`.
pub fn embedding_ratio<F: Real>(u: &ScalarField<F>, q: F) -> Result<F> {
    let qd = F::from_usize_lossy(homogeneous_dimension(1)?);
    let top = F::lit(2.0) * qd / (qd - F::lit(2.0));
    if !(q > F::one() && q <= top) {
        return Err(Error::domain(format!(
            "embedding exponent must lie in (1, {top}]"
        )));
    }
    if u.is_zero() {
        return Err(Error::domain("embedding ratio of the zero field"));
    }
    Ok(lq_norm(u, q)? / e_norm(u))
}

/// `count` seeded mixtures of three gauge-Gaussian bumps with random
/// amplitudes in `[-0.5, 1.5]`, centers in the box `[-k/3, k/3]^2 x
/// [-k^2/9, k^2/9]` and widths in `[0.15 k, 0.35 k]`, restricted to the mask.
/// `k` is the ball radius of the domain, or the largest node gauge.
pub fn random_bump_family<F: Real>(
    domain: &Arc<Domain<F>>,
    count: usize,
    seed: u64,
) -> Vec<ScalarField<F>> {
    let k = domain
        .ball_radius()
        .unwrap_or_else(|| domain.grid().max_gauge())
        .as_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let bumps: Vec<[f64; 5]> = (0..3)
                .map(|_| {
                    [
                        rng.gen_range(-0.5..1.5),
                        rng.gen_range(-k / 3.0..k / 3.0),
                        rng.gen_range(-k / 3.0..k / 3.0),
                        rng.gen_range(-k * k / 9.0..k * k / 9.0),
                        rng.gen_range(0.15 * k..0.35 * k),
                    ]
                })
                .collect();
            ScalarField::from_fn(domain.clone(), |x, y, t| {
                let (x, y, t) = (x.as_f64(), y.as_f64(), t.as_f64());
                let v: f64 = bumps
                    .iter()
                    .map(|b| {
                        let s2 = b[4] * b[4];
                        let r2 = ((x - b[1]).powi(2) + (y - b[2]).powi(2)) / s2;
                        b[0] * (-r2 - (t - b[3]).powi(2) / (s2 * s2)).exp()
                    })
                    .sum();
                F::lit(v)
            })
        })
        .collect()
}

/// `v(z) = u(delta_lambda z)`, represented exactly: the node values of `u`
/// on the domain dilated by `1 / lambda`.
pub fn dilate_field<F: Real>(u: &ScalarField<F>, lambda: F) -> Result<ScalarField<F>> {
    if !(lambda > F::zero()) || !lambda.is_finite() {
        return Err(Error::domain("dilation factor must be positive"));
    }
    Ok(ScalarField {
        domain: u.domain.dilated(F::one() / lambda)?,
        values: u.values.clone(),
    })
}

/// Max deep-interior error of `Delta_h` on the samples of `f` against its
/// closed-form sub-Laplacian.
pub fn sublaplacian_oracle_error<F: Real>(
    domain: &Arc<Domain<F>>,
    f: &TestFunction<F>,
    margin: usize,
) -> Result<F> {
    if !f.has_jet() {
        return Err(Error::domain("oracle comparison needs a closed-form jet"));
    }
    let u = ScalarField::sample(domain.clone(), f);
    let lu = apply_sublaplacian_h(&u);
    let deep = domain.deep_interior(margin.max(1));
    let g = domain.grid();
    let errs: Vec<F> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            if !deep[i] {
                return F::zero();
            }
            let z = g.node_point(i);
            let exact = f.jet(&z).map(|j| j.sublaplacian(&z)).unwrap_or_else(F::nan);
            (lu.values[i] - exact).abs()
        })
        .collect();
    Ok(errs.into_iter().fold(F::zero(), F::max))
}

/// `||X_h u||^2 + ||Y_h u||^2` with centered differences.
pub fn centered_dirichlet_sq<F: Real>(u: &ScalarField<F>) -> F {
    let xh = apply_xh(u);
    let yh = apply_yh(u);
    (dot(&xh.values, &xh.values) + dot(&yh.values, &yh.values)) * u.grid().cell_volume()
}

/// Trilinear interpolation of node values at `(x, y, t)`, zero outside the box.
pub fn interpolate<F: Real>(u: &ScalarField<F>, x: F, y: F, t: F) -> F {
    let g = u.grid();
    let p = [x, y, t];
    let mut base = [0i64; 3];
    let mut frac = [F::zero(); 3];
    for a in 0..3 {
        let s = (p[a] - g.origin[a]) / g.spacing[a];
        let f = s.floor();
        let snapped = s.round();
        // snap coordinates that sit on a node up to rounding
        let (f, fr) = if (s - snapped).abs() < F::lit(1e-9) {
            (snapped, F::zero())
        } else {
            (f, s - f)
        };
        base[a] = match f.to_i64() {
            Some(v) => v,
            None => return F::zero(),
        };
        frac[a] = fr;
    }
    let mut acc = F::zero();
    for corner in 0..8 {
        let mut wgt = F::one();
        let mut idx = [0i64; 3];
        for a in 0..3 {
            let hi = (corner >> a) & 1 == 1;
            idx[a] = base[a] + hi as i64;
            wgt *= if hi { frac[a] } else { F::one() - frac[a] };
        }
        if wgt == F::zero() {
            continue;
        }
        if (0..3).any(|a| idx[a] < 0 || idx[a] >= g.extents[a] as i64) {
            continue;
        }
        acc += wgt * u.values[g.index(idx[0] as usize, idx[1] as usize, idx[2] as usize)];
    }
    acc
}

/// Left translate `v(z) = u(c^{-1} z)`, resampled on `target` by trilinear
/// interpolation. Shifts that are lattice multiples in `x`, `y` only
/// interpolate along `t`.
pub fn left_translate<F: Real>(
    u: &ScalarField<F>,
    c: &GroupPoint<F>,
    target: &Arc<Domain<F>>,
) -> ScalarField<F> {
    let two = F::lit(2.0);
    let (cx, cy, ct) = (c.x[0], c.y[0], c.t);
    ScalarField::from_fn(target.clone(), |x, y, t| {
        interpolate(u, x - cx, y - cy, t - ct - two * cy * x + two * cx * y)
    })
}

/// Gauge of each node.
pub fn node_gauges<F: Real>(grid: &Grid3<F>) -> Vec<F> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| gauge(&grid.node_point(i)))
        .collect()
}
