//! Cross-checks between the three ground-state solvers on one discrete
//! problem.

use serde::Serialize;

use super::constrained::solve_constrained_min_on;
use super::mountain_pass::solve_mountain_pass_on;
use super::nehari::solve_nehari_on;
use super::{pick_u0, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::{left_translate, lq_norm, node_gauges, ScalarField};
use crate::group::group_mul;

/// `|J(u*) - c_k| / c_k` for the constrained solution.
pub const ENERGY_TOL: f64 = 1e-2;
/// `|kappa lambda^{(p+1)/(p-1)} - c_k| / c_k`.
pub const BRIDGE_TOL: f64 = 1e-2;
/// `|c_nehari - c_k| / c_k`.
pub const NEHARI_TOL: f64 = 1e-3;
/// Relative `L^2` distance of the aligned solutions.
pub const FIELD_TOL: f64 = 1e-2;
/// Bulk region `rho < BULK * k` on which solutions must be strictly positive.
pub const BULK: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Positivity {
    pub min_interior: f64,
    pub min_bulk: f64,
}

impl Positivity {
    pub fn holds(&self) -> bool {
        self.min_interior >= 0.0 && self.min_bulk > 0.0
    }
}

/// Minimum over the mask and over the bulk `rho < 0.7 k` of the field's ball.
pub fn positivity(u: &ScalarField<f64>) -> Positivity {
    let k = u
        .domain()
        .ball_radius()
        .unwrap_or_else(|| u.grid().max_gauge());
    let rho = node_gauges(u.grid());
    let mask = u.domain().mask();
    let mut min_interior = f64::INFINITY;
    let mut min_bulk = f64::INFINITY;
    for (i, v) in u.values().iter().enumerate() {
        if mask[i] {
            min_interior = min_interior.min(*v);
            if rho[i] < BULK * k {
                min_bulk = min_bulk.min(*v);
            }
        }
    }
    Positivity {
        min_interior,
        min_bulk,
    }
}

/// `a` left-translated so that its maximum lands on the maximum of `b`.
pub fn align_max(a: &ScalarField<f64>, b: &ScalarField<f64>) -> Result<ScalarField<f64>> {
    a.check_same(b)?;
    let (Some((ia, _)), Some((ib, _))) = (a.argmax(), b.argmax()) else {
        return Ok(a.clone());
    };
    let g = a.grid();
    let shift = group_mul(&g.node_point(ib), &g.node_point(ia).inverse())?;
    Ok(left_translate(a, &shift, a.domain()))
}

fn relative_l2(a: &ScalarField<f64>, b: &ScalarField<f64>) -> Result<f64> {
    let d = a.zip_with(b, |x, y| x - y)?;
    Ok(lq_norm(&d, 2.0)? / lq_norm(b, 2.0)?)
}

/// Relative `L^2` distance from `a` to `b`, minimized over the identity and
/// the translation carrying the maximum of `a` onto that of `b`. Symmetric
/// solutions tie between several maximizing nodes, so the identity must stay
/// a candidate.
pub fn field_distance(a: &ScalarField<f64>, b: &ScalarField<f64>) -> Result<f64> {
    Ok(relative_l2(a, b)?.min(relative_l2(&align_max(a, b)?, b)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodComparison {
    pub c_k: f64,
    pub alpha: f64,
    pub lambda: f64,
    /// `J` of the rescaled constrained minimizer.
    pub j_constrained: f64,
    pub nehari_level: f64,
    pub energy_gap: f64,
    pub bridge_level: f64,
    pub bridge_gap: f64,
    pub nehari_gap: f64,
    /// See [`field_distance`].
    pub field_gap: f64,
    pub positivity: [Positivity; 2],
    pub failures: Vec<String>,
    #[serde(skip)]
    pub mountain_pass: SolveReport,
    #[serde(skip)]
    pub constrained: SolveReport,
    #[serde(skip)]
    pub nehari: SolveReport,
}

impl MethodComparison {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Solves `config` with all three methods on the same domain and compares
/// levels, the Lagrange bridge `c = (p-1)/(2(p+1)) lambda^{(p+1)/(p-1)}`,
/// aligned fields and positivity.
pub fn compare_methods(config: &SolverConfig) -> Result<MethodComparison> {
    let domain = config.domain()?;
    let func = config.functional()?;
    let u0 = pick_u0(&domain, &func)?;
    let (mp, (cm, nh)) = rayon::join(
        || solve_mountain_pass_on(&domain, &u0, config),
        || {
            rayon::join(
                || solve_constrained_min_on(&domain, config),
                || solve_nehari_on(&domain, config),
            )
        },
    );
    let (mp, cm, nh) = (mp?, cm?, nh?);
    for r in [&mp, &cm, &nh] {
        if !r.converged {
            return Err(Error::algorithm(format!(
                "{:?} did not converge in {} iterations",
                r.method, r.iterations
            )));
        }
    }
    let p = config.p;
    let kappa = (p - 1.0) / (2.0 * (p + 1.0));
    let c_k = mp.level;
    let lambda = cm
        .multiplier
        .ok_or_else(|| Error::algorithm("constrained solve has no multiplier"))?;
    let j_constrained = cm.breakdown.j;
    let bridge_level = kappa * lambda.powf((p + 1.0) / (p - 1.0));
    let energy_gap = (j_constrained - c_k).abs() / c_k;
    let bridge_gap = (bridge_level - c_k).abs() / c_k;
    let nehari_gap = (nh.level - c_k).abs() / c_k;
    let field_gap = field_distance(&cm.field, &mp.field)?;
    let positivity = [positivity(&mp.field), positivity(&cm.field)];

    let mut failures = Vec::new();
    if energy_gap >= ENERGY_TOL {
        failures.push(format!("J(u*) = {j_constrained} vs c_k = {c_k}"));
    }
    if bridge_gap >= BRIDGE_TOL {
        failures.push(format!("bridge level {bridge_level} vs c_k = {c_k}"));
    }
    if nehari_gap >= NEHARI_TOL {
        failures.push(format!("Nehari level {} vs c_k = {c_k}", nh.level));
    }
    if field_gap >= FIELD_TOL {
        failures.push(format!("aligned fields differ by {field_gap}"));
    }
    for (name, pos) in ["mountain pass", "constrained"].iter().zip(&positivity) {
        if !pos.holds() {
            failures.push(format!("{name} solution not positive: {pos:?}"));
        }
    }
    Ok(MethodComparison {
        c_k,
        alpha: cm.level,
        lambda,
        j_constrained,
        nehari_level: nh.level,
        energy_gap,
        bridge_level,
        bridge_gap,
        nehari_gap,
        field_gap,
        positivity,
        failures,
        mountain_pass: mp,
        constrained: cm,
        nehari: nh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_ball_grid;

    fn bump_at(
        d: &std::sync::Arc<crate::grid::Domain<f64>>,
        cx: f64,
        cy: f64,
        ct: f64,
    ) -> ScalarField<f64> {
        ScalarField::from_fn(d.clone(), move |x, y, t| {
            let (a, b) = (x - cx, y - cy);
            let s = t - ct - 2.0 * cy * x + 2.0 * cx * y;
            (-(a * a + b * b) - 0.25 * s * s).exp()
        })
    }

    #[test]
    fn alignment_undoes_a_translation() {
        let d = build_ball_grid(3.0f64, 25).unwrap();
        let h = d.grid().spacing;
        // odd N: the origin is a node, so these centers are nodes too
        let a = bump_at(&d, 2.0 * h[0], -3.0 * h[1], h[2]);
        let b = bump_at(&d, -h[0], h[1], 0.0);
        assert!(relative_l2(&a, &b).unwrap() > 0.5);
        let moved = align_max(&a, &b).unwrap();
        assert_eq!(moved.argmax().unwrap().0, b.argmax().unwrap().0);
        // only the t interpolation and the cut at the mask remain
        assert!(
            field_distance(&a, &b).unwrap() < 0.05,
            "{}",
            field_distance(&a, &b).unwrap()
        );
        assert!(field_distance(&b, &b).unwrap() == 0.0);
    }

    #[test]
    fn positivity_regions() {
        let d = build_ball_grid(3.0f64, 20).unwrap();
        let u = ScalarField::from_fn(d.clone(), |x, _, _| 1.0 + x);
        let pos = positivity(&u);
        assert!(pos.min_interior < 0.0 && !pos.holds());
        let v = ScalarField::from_fn(d, |x, y, t| (-(x * x + y * y) - t * t).exp());
        assert!(positivity(&v).holds());
    }

    #[test]
    fn small_ball_methods_agree() {
        let cfg = SolverConfig {
            ball_radius: 3.0,
            nodes_per_axis: 20,
            grad_tol: 1e-8,
            ..Default::default()
        };
        let cmp = compare_methods(&cfg).unwrap();
        assert!(cmp.passed(), "{:?}", cmp.failures);
        assert!(cmp.energy_gap < 1e-6 && cmp.bridge_gap < 1e-6 && cmp.nehari_gap < 1e-6);
        assert!((cmp.lambda - 2.0 * cmp.alpha).abs() < 1e-12 * cmp.lambda);
    }

    #[test]
    fn level_clears_the_rim() {
        use crate::functionals::mountain_pass_rim;
        use crate::grid::random_bump_family;
        let cfg = SolverConfig {
            ball_radius: 3.0,
            nodes_per_axis: 20,
            grad_tol: 1e-8,
            ..Default::default()
        };
        let r = super::super::solve_mountain_pass(&cfg).unwrap();
        let mut family = random_bump_family(r.field.domain(), 16, 5);
        family.push(r.field.clone());
        let rim = mountain_pass_rim(&cfg.functional().unwrap(), &family).unwrap();
        assert!(rim.holds() && rim.alpha0 > 0.0);
        // the solution attains the best constant, so the rim meets the level
        assert!(
            r.level >= rim.alpha0 * (1.0 - 1e-6),
            "{} vs {}",
            r.level,
            rim.alpha0
        );
        assert!(
            r.level <= rim.alpha0 * (1.0 + 1e-6),
            "{} vs {}",
            r.level,
            rim.alpha0
        );
    }
}
