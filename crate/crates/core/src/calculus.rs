//! Self-check of the group calculus: the invariants the discrete operators
//! rely on, each measured as a defect against a tolerance.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::group::{
    box_integral_h1, dilate, flow_derivative, gauge, group_mul, Generator, GroupPoint, Polynomial,
    TestFunction,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub defect: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &str, defect: f64, tolerance: f64) -> Self {
        CheckOutcome {
            name: name.to_string(),
            defect,
            tolerance,
            passed: defect.is_finite() && defect <= tolerance,
        }
    }
}

/// Options for [`run_calculus_suite`]. `flip_y` reverses the orientation of
/// every `Y` flow, a mutation the suite must catch.
#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    pub samples: usize,
    pub flip_y: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 7,
            samples: 12,
            flip_y: false,
        }
    }
}

struct Flow {
    flip_y: bool,
}

impl Flow {
    fn d(&self, gen: Generator, f: &TestFunction<f64>, z: &GroupPoint<f64>) -> Result<f64> {
        let orientation = if self.flip_y && matches!(gen, Generator::Y(_)) {
            -1.0
        } else {
            1.0
        };
        flow_derivative(gen, f, z, orientation)
    }

    fn lifted(&self, gen: Generator, f: &TestFunction<f64>) -> TestFunction<f64> {
        let f = f.clone();
        let flip = self.flip_y;
        TestFunction::new(move |z| Flow { flip_y: flip }.d(gen, &f, z).unwrap_or(f64::NAN))
    }
}

fn random_point(rng: &mut ChaCha8Rng, scale: f64) -> GroupPoint<f64> {
    GroupPoint::h1(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

fn random_cubic(rng: &mut ChaCha8Rng) -> Polynomial<f64> {
    let mut p = Polynomial::zero(1);
    for a in 0..=3u32 {
        for b in 0..=(3 - a) {
            for c in 0..=(3 - a - b) {
                let m = Polynomial::monomial(1, rng.gen_range(-1.0..1.0), vec![a, b, c])
                    .expect("n = 1 exponents");
                p = p.add(&m);
            }
        }
    }
    p
}

/// Runs every check and returns the outcomes in a fixed order.
pub fn run_calculus_suite(opts: SuiteOptions) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let flow = Flow {
        flip_y: opts.flip_y,
    };
    let mut out = Vec::new();

    // exact associativity on rationals, then floating drift
    let mut exact_ok = true;
    let mut float_defect: f64 = 0.0;
    for _ in 0..opts.samples {
        let mut rp = || {
            GroupPoint::h1(
                Ratio::new(rng.gen_range(-50i64..50), rng.gen_range(1i64..9)),
                Ratio::new(rng.gen_range(-50i64..50), rng.gen_range(1i64..9)),
                Ratio::new(rng.gen_range(-50i64..50), rng.gen_range(1i64..9)),
            )
        };
        let (a, b, c) = (rp(), rp(), rp());
        exact_ok &= group_mul(&group_mul(&a, &b)?, &c)? == group_mul(&a, &group_mul(&b, &c)?)?;
        let (a, b, c) = (
            random_point(&mut rng, 3.0),
            random_point(&mut rng, 3.0),
            random_point(&mut rng, 3.0),
        );
        let l = group_mul(&group_mul(&a, &b)?, &c)?;
        let r = group_mul(&a, &group_mul(&b, &c)?)?;
        float_defect = float_defect
            .max((l.t - r.t).abs())
            .max((l.x[0] - r.x[0]).abs())
            .max((l.y[0] - r.y[0]).abs());
    }
    out.push(CheckOutcome::new(
        "associativity_exact",
        if exact_ok { 0.0 } else { 1.0 },
        0.0,
    ));
    out.push(CheckOutcome::new(
        "associativity_float",
        float_defect,
        1e-12,
    ));

    let mut inv_defect: f64 = 0.0;
    for _ in 0..opts.samples {
        let z = random_point(&mut rng, 5.0);
        let e = group_mul(&z, &z.inverse())?;
        inv_defect = inv_defect.max(gauge(&e));
    }
    out.push(CheckOutcome::new("identity_inverse", inv_defect, 1e-12));

    // left invariance: X(f o L_g)(z) = (X f)(g z)
    let mut li = [0.0f64; 2];
    for _ in 0..opts.samples {
        let f = TestFunction::gaussian(
            random_point(&mut rng, 1.0),
            rng.gen_range(0.3..1.0),
            rng.gen_range(0.3..1.0),
        );
        let g = random_point(&mut rng, 1.0);
        let z = random_point(&mut rng, 1.0);
        let gz = group_mul(&g, &z)?;
        let fg = f.compose_left(g);
        for (slot, gen) in [Generator::X(0), Generator::Y(0)].into_iter().enumerate() {
            let lhs = flow.d(gen, &fg, &z)?;
            let rhs = flow.d(gen, &f, &gz)?;
            li[slot] = li[slot].max((lhs - rhs).abs());
        }
    }
    out.push(CheckOutcome::new("left_invariance_x", li[0], 1e-6));
    out.push(CheckOutcome::new("left_invariance_y", li[1], 1e-6));

    // flow derivatives against the polynomial derivative table
    let mut table: f64 = 0.0;
    let mut comm: f64 = 0.0;
    for _ in 0..opts.samples {
        let p = random_cubic(&mut rng);
        let f = TestFunction::from_polynomial(p.clone());
        let z = random_point(&mut rng, 1.0);
        for gen in [Generator::X(0), Generator::Y(0), Generator::T] {
            let exact = p.left_invariant(gen).eval(&z);
            table = table.max((flow.d(gen, &f, &z)? - exact).abs());
        }
        let xy = flow.d(Generator::X(0), &flow.lifted(Generator::Y(0), &f), &z)?;
        let yx = flow.d(Generator::Y(0), &flow.lifted(Generator::X(0), &f), &z)?;
        let ft = p.partial(2).eval(&z);
        comm = comm.max((xy - yx + 4.0 * ft).abs());
    }
    out.push(CheckOutcome::new("derivative_table", table, 1e-6));
    out.push(CheckOutcome::new("commutator", comm, 1e-6));

    let mut hom: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for _ in 0..opts.samples {
        let z = random_point(&mut rng, 4.0);
        let l = rng.gen_range(0.1..5.0);
        let m = rng.gen_range(0.1..5.0);
        hom = hom.max((gauge(&dilate(l, &z)?) - l * gauge(&z)).abs() / (1.0 + l * gauge(&z)));
        let a = dilate(l, &dilate(m, &z)?)?;
        let b = dilate(l * m, &z)?;
        comp = comp
            .max((a.t - b.t).abs() / (1.0 + b.t.abs()))
            .max((a.x[0] - b.x[0]).abs() / (1.0 + b.x[0].abs()));
    }
    out.push(CheckOutcome::new("gauge_homogeneity", hom, 1e-12));
    out.push(CheckOutcome::new("dilation_composition", comp, 1e-12));

    // int f(delta_l z) dz = l^{-Q} int f dz, Q = 4
    let f = TestFunction::gaussian(GroupPoint::h1(0.1, -0.2, 0.05), 1.0, 0.8);
    let base = box_integral_h1(&f, 7.0, 8.0, 80);
    let mut meas: f64 = 0.0;
    for l in [0.8f64, 1.25] {
        let dil = box_integral_h1(&f.compose_dilation(l), 7.0, 8.0, 80);
        meas = meas.max((dil - l.powi(-4) * base).abs() / base);
    }
    out.push(CheckOutcome::new("measure_homogeneity", meas, 1e-6));

    Ok(out)
}
