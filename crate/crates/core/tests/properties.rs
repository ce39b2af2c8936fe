use std::sync::Arc;

use heisgs::cc::{concentration_profile, normalize_mass, rayleigh_quotient};
use heisgs::functionals::{ray_energies, Functional};
use heisgs::grid::{
    apply_sublaplacian_h, apply_xh, apply_yh, dilate_field, e_norm_sq, lq_norm, random_bump_family,
};
use heisgs::group::apply_left_invariant;
use heisgs::{build_ball_grid, group_mul};
use heisgs::{BallLattice, Domain, Field, Generator, Grid, GroupPoint, TestFunction};
use proptest::prelude::*;

fn ball(k: f64, n: usize) -> Arc<Domain<f64>> {
    build_ball_grid(k, n).unwrap()
}

/// `exp(-(rho(c^{-1} z) / s)^4)` sampled exactly.
fn bump_at(d: &Arc<Domain<f64>>, c: [f64; 3], s: f64) -> Field {
    let s4 = s.powi(4);
    Field::from_fn(d.clone(), move |x, y, t| {
        let (dx, dy) = (x - c[0], y - c[1]);
        let dt = t - c[2] - 2.0 * (c[1] * x - c[0] * y);
        let r2 = dx * dx + dy * dy;
        (-(r2 * r2 + dt * dt) / s4).exp()
    })
}

fn coord() -> impl Strategy<Value = f64> {
    -3.0f64..3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn float_associativity(a in proptest::collection::vec(coord(), 9)) {
        let p = |k: usize| GroupPoint::h1(a[k], a[k + 1], a[k + 2]);
        let l = group_mul(&group_mul(&p(0), &p(3)).unwrap(), &p(6)).unwrap();
        let r = group_mul(&p(0), &group_mul(&p(3), &p(6)).unwrap()).unwrap();
        prop_assert!((l.t - r.t).abs() <= 1e-12 * (1.0 + r.t.abs()));
        prop_assert!((l.x[0] - r.x[0]).abs() <= 1e-12 * (1.0 + r.x[0].abs()));
        prop_assert!((l.y[0] - r.y[0]).abs() <= 1e-12 * (1.0 + r.y[0].abs()));
    }

    #[test]
    fn fields_are_left_invariant(g in proptest::collection::vec(-1.5f64..1.5, 3), z in proptest::collection::vec(-1.5f64..1.5, 3), w in 0.2f64..2.0) {
        let f = TestFunction::new(move |p: &GroupPoint<f64>| (w * p.x[0] - p.y[0]).sin() * (0.3 * p.t).cos() + p.x[0] * p.t);
        let g = GroupPoint::h1(g[0], g[1], g[2]);
        let z = GroupPoint::h1(z[0], z[1], z[2]);
        let gz = group_mul(&g, &z).unwrap();
        let shifted = f.compose_left(g);
        for gen in [Generator::X(0), Generator::Y(0)] {
            let lhs = apply_left_invariant(gen, &shifted, &z).unwrap();
            let rhs = apply_left_invariant(gen, &f, &gz).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-6 * (1.0 + rhs.abs()), "{gen:?}: {lhs} vs {rhs}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn operators_respect_the_mask(seed in any::<u64>()) {
        let d = ball(2.0, 14);
        let func = Functional::new(2.0, 1.0).unwrap();
        for u in random_bump_family(&d, 2, seed) {
            for v in [apply_xh(&u), apply_yh(&u), apply_sublaplacian_h(&u), func.grad_j(&u), func.residual(&u)] {
                prop_assert!(v.values().iter().zip(d.mask()).all(|(x, m)| *m || *x == 0.0));
            }
        }
    }

    #[test]
    fn rays_have_one_interior_maximum(seed in any::<u64>()) {
        let d = ball(2.0, 14);
        let func = Functional::new(2.0, 1.0).unwrap();
        let ts: Vec<f64> = (1..=400).map(|i| 0.05 * i as f64).collect();
        for u in random_bump_family(&d, 3, seed) {
            prop_assume!(func.positive_mass(&u) > 1e-12);
            let u = u.scaled(func.nehari_scale(&u).unwrap().0 / 10.0);
            let js = ray_energies(&func, &u, &ts);
            let peaks = (1..js.len() - 1).filter(|i| js[*i] > js[i - 1] && js[*i] >= js[i + 1]).count();
            prop_assert_eq!(peaks, 1);
            prop_assert!(js[0] > 0.0 && *js.last().unwrap() < 0.0);
        }
    }

    #[test]
    fn zero_extension_keeps_norms(seed in any::<u64>(), grow in 0.2f64..1.0) {
        let lat = BallLattice::for_ball(2.0 + grow, 16).unwrap();
        let small = lat.domain(2.0).unwrap();
        let big = lat.domain(2.0 + grow).unwrap();
        let func = Functional::new(2.0, 1.0).unwrap();
        for u in random_bump_family(&small, 2, seed) {
            let v = u.extend_to(&big).unwrap();
            let scale = 1.0 + func.norm_sq(&u);
            prop_assert!((e_norm_sq(&u) - e_norm_sq(&v)).abs() <= 1e-13 * scale);
            prop_assert!((func.eval_j(&u) - func.eval_j(&v)).abs() <= 1e-13 * scale);
            prop_assert!((lq_norm(&u, 3.0).unwrap() - lq_norm(&v, 3.0).unwrap()).abs() <= 1e-13 * (1.0 + lq_norm(&u, 3.0).unwrap()));
        }
    }

    #[test]
    fn dilation_preserves_mass(lambda in 0.5f64..2.0, q in 1.0f64..4.0, s in 0.6f64..1.2) {
        let d = Domain::full(Grid::centered([25, 25, 49], [5.0, 5.0, 20.0]).unwrap());
        let u = bump_at(&d, [0.0; 3], s);
        let before = lq_norm(&u, q).unwrap().powf(q);
        let v = dilate_field(&u, lambda).unwrap().scaled(lambda.powf(4.0 / q));
        let after = lq_norm(&v, q).unwrap().powf(q);
        prop_assert!((after - before).abs() <= 1e-6 * before);
    }

    #[test]
    fn concentration_is_monotone_in_the_radius(c in proptest::collection::vec(-1.5f64..1.5, 3), s in 0.5f64..1.5, mut radii in proptest::collection::vec(0.1f64..4.0, 2..6)) {
        let d = Domain::full(Grid::centered([25, 25, 49], [5.0, 5.0, 20.0]).unwrap());
        let dens = normalize_mass(&bump_at(&d, [c[0], c[1], c[2]], s), 2.0).unwrap();
        radii.sort_by(f64::total_cmp);
        let prof = concentration_profile(&dens, &radii, 2).unwrap();
        for w in prof.samples.windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-12, "{w:?}");
        }
        prop_assert!(prof.samples.iter().all(|(_, m)| (0.0..=1.0).contains(m)));
    }

    #[test]
    fn concentration_is_translation_invariant(i in -3i32..=3, j in -3i32..=3, l in -3i32..=3, s in 0.7f64..1.1) {
        let g = Grid::centered([33, 33, 129], [6.0, 6.0, 24.0]).unwrap();
        let h = g.spacing;
        let d = Domain::full(g);
        let c = [2.0 * i as f64 * h[0], 2.0 * j as f64 * h[1], 2.0 * l as f64 * h[2]];
        // balls at least a few t-cells tall
        let radii = [1.0, 1.5, 2.0, 3.0];
        let a = concentration_profile(&normalize_mass(&bump_at(&d, [0.0; 3], s), 2.0).unwrap(), &radii, 2).unwrap();
        let b = concentration_profile(&normalize_mass(&bump_at(&d, c, s), 2.0).unwrap(), &radii, 2).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            prop_assert!((x.1 - y.1).abs() < 0.02, "R = {}: {} vs {}", x.0, x.1, y.1);
        }
    }

    #[test]
    fn split_bumps_cost_more(beta in 0.2f64..0.8) {
        // equal constraint mass: the quotient is scale free
        let p = 2.0;
        let d = Domain::full(Grid::centered([33, 33, 65], [8.0, 8.0, 32.0]).unwrap());
        let one = bump_at(&d, [0.0; 3], 0.8);
        let m = |u: &Field| lq_norm(u, p + 1.0).unwrap().powf(p + 1.0);
        let left = bump_at(&d, [-4.0, 0.0, 0.0], 0.8);
        let right = bump_at(&d, [4.0, 0.0, 0.0], 0.8);
        let (ml, mr) = (m(&left), m(&right));
        let a = left.scaled((beta / ml).powf(1.0 / (p + 1.0)));
        let b = right.scaled(((1.0 - beta) / mr).powf(1.0 / (p + 1.0)));
        let pair = a.zip_with(&b, |x, y| x + y).unwrap();
        prop_assert!(rayleigh_quotient(&pair, p).unwrap() > 1.05 * rayleigh_quotient(&one, p).unwrap());
    }
}
