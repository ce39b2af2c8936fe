//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! fails.

use std::time::{Duration, Instant};

use heisgs::calculus::{run_calculus_suite, SuiteOptions};
use heisgs::cc::{
    classify_sequence, decreasing_in_trend, energy_split, normalize_mass, synthetic_sequence,
    MassDensity, SyntheticFamily, Verdict, DEFAULT_STRIDE, SYNTH_EPS, SYNTH_LEN, SYNTH_RADII,
};
use heisgs::functionals::{gradient_check, mountain_pass_rim};
use heisgs::grid::{random_bump_family, sublaplacian_oracle_error};
use heisgs::solvers::{
    compare_methods, constraint_defect, exhaust_domains, positivity, solve_constrained_min,
    MethodComparison, SolverConfig, CRITICALITY_TOL,
};
use heisgs::{build_ball_grid, GroupPoint, TestFunction};
use rayon::prelude::*;

// pinned tolerances
const CALCULUS_LIMIT: Duration = Duration::from_secs(5);
const ORDER_RATIO: (f64, f64) = (3.0, 5.0);
const OPERATOR_LIMIT: Duration = Duration::from_secs(30);
const GRADIENT_PAIRS: usize = 20;
const GRADIENT_STEP: f64 = 1e-4;
const GRADIENT_TOL: f64 = 1e-6;
const GRADIENT_LIMIT: Duration = Duration::from_secs(30);
const CONSTRAINT_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-4;
const IDENTITY_TOL: f64 = 1e-3;
const GROUND_STATE_LIMIT: Duration = Duration::from_secs(300);
const AGREEMENT_TOL: f64 = 1e-2;
const NEHARI_TOL: f64 = 1e-3;
const MONOTONE_TOL: f64 = 1e-6;
const MAX_FLOOR: f64 = 0.95;
const R2_FLOOR: f64 = 0.98;
const SETTLE_BY: f64 = 4.0;
const EXHAUST_LIMIT: Duration = Duration::from_secs(600);
const SEEDS: u64 = 10;
const SPLIT_RADII: usize = 13;
const RIM_MEMBERS: usize = 64;

struct Verdicts {
    failed: Vec<u32>,
}

impl Verdicts {
    fn run(
        &mut self,
        id: u32,
        name: &str,
        limit: Option<Duration>,
        f: impl FnOnce() -> Result<(bool, String), String>,
    ) {
        let t0 = Instant::now();
        let res = f();
        let dt = t0.elapsed();
        let (mut ok, mut detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
        if let Some(lim) = limit {
            if dt > lim {
                ok = false;
                detail.push_str(&format!("; took {dt:.1?}, limit {lim:?}"));
            }
        }
        println!(
            "criterion {id} {} {name} ({:.2} s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            dt.as_secs_f64()
        );
        if !ok {
            self.failed.push(id);
        }
    }
}

fn reference() -> SolverConfig {
    SolverConfig {
        p: 2.0,
        ball_radius: 6.0,
        nodes_per_axis: 48,
        ..Default::default()
    }
}

fn main() {
    let mut v = Verdicts { failed: Vec::new() };

    v.run(1, "calculus suite", Some(CALCULUS_LIMIT), || {
        let checks = run_calculus_suite(SuiteOptions::default()).map_err(|e| e.to_string())?;
        let wanted = [
            "commutator",
            "left_invariance_x",
            "left_invariance_y",
            "gauge_homogeneity",
            "dilation_composition",
            "measure_homogeneity",
        ];
        let present = wanted.iter().all(|w| checks.iter().any(|c| c.name == *w));
        let bad: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} {:.1e} > {:.0e}", c.name, c.defect, c.tolerance))
            .collect();
        let worst = checks.iter().map(|c| c.defect).fold(0.0, f64::max);
        Ok((
            present && bad.is_empty(),
            format!(
                "{} checks, worst defect {worst:.1e}, failing {bad:?}",
                checks.len()
            ),
        ))
    });

    v.run(2, "operator consistency", Some(OPERATOR_LIMIT), || {
        let f = TestFunction::gaussian(GroupPoint::h1(-0.2, 0.15, 0.1), 1.2, 0.5);
        let coarse =
            sublaplacian_oracle_error(&build_ball_grid(3.0, 25).map_err(|e| e.to_string())?, &f, 1)
                .map_err(|e| e.to_string())?;
        let fine =
            sublaplacian_oracle_error(&build_ball_grid(3.0, 49).map_err(|e| e.to_string())?, &f, 1)
                .map_err(|e| e.to_string())?;
        let ratio = coarse / fine;
        Ok((
            (ORDER_RATIO.0..=ORDER_RATIO.1).contains(&ratio),
            format!("error {coarse:.3e} -> {fine:.3e}, ratio {ratio:.3}"),
        ))
    });

    v.run(3, "gradient check", Some(GRADIENT_LIMIT), || {
        let d = build_ball_grid(3.0, 24).map_err(|e| e.to_string())?;
        let func = reference().functional().map_err(|e| e.to_string())?;
        let family = random_bump_family(&d, 2 * GRADIENT_PAIRS, 31);
        let errs: Vec<f64> = family
            .chunks(2)
            .map(|uv| gradient_check(&func, &uv[0], &uv[1], GRADIENT_STEP))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        Ok((
            errs.len() == GRADIENT_PAIRS && worst <= GRADIENT_TOL,
            format!("{} pairs, worst relative error {worst:.2e}", errs.len()),
        ))
    });

    v.run(4, "constrained ground state", Some(GROUND_STATE_LIMIT), || {
        let cfg = reference();
        let r = solve_constrained_min(&cfg).map_err(|e| e.to_string())?;
        let defect = constraint_defect(&r, cfg.p).ok_or("no multiplier")?;
        let pos = positivity(&r.field);
        let d = r.diagnostics;
        let ok = r.converged
            && defect < CONSTRAINT_TOL
            && r.level > 0.0
            && d.relative_residual < RESIDUAL_TOL
            && pos.holds()
            && d.relative_identity < IDENTITY_TOL;
        Ok((
            ok,
            format!(
                "converged {} in {} its, constraint defect {defect:.1e}, alpha {:.6}, residual {:.1e}, min interior {:.2e}, min bulk {:.2e}, identity defect {:.1e}",
                r.converged, r.iterations, r.level, d.relative_residual, pos.min_interior, pos.min_bulk, d.relative_identity
            ),
        ))
    });

    let mut cmp: Option<MethodComparison> = None;
    v.run(5, "mountain pass agrees", None, || {
        let c = compare_methods(&reference()).map_err(|e| e.to_string())?;
        let mp = &c.mountain_pass;
        let ok = c.c_k > 0.0 && mp.diagnostics.passes(CRITICALITY_TOL) && c.energy_gap < AGREEMENT_TOL && c.nehari_gap < NEHARI_TOL;
        let detail = format!(
            "c_k {:.8}, J(u*) gap {:.1e}, Nehari gap {:.1e}, criticality ({:.1e}, {:.1e}, {:.1e}), bridge gap {:.1e}, field gap {:.1e}",
            c.c_k,
            c.energy_gap,
            c.nehari_gap,
            mp.diagnostics.relative_residual,
            mp.diagnostics.relative_nehari,
            mp.diagnostics.relative_identity,
            c.bridge_gap,
            c.field_gap
        );
        cmp = Some(c);
        Ok((ok, detail))
    });

    v.run(6, "exhaustion", Some(EXHAUST_LIMIT), || {
        let radii = [2.0, 3.0, 4.0, 5.0, 6.0];
        let rep = exhaust_domains(&radii, &reference(), 0).map_err(|e| e.to_string())?;
        let rows = &rep.rows;
        let complete = rep.failures.is_empty()
            && rows.len() == radii.len()
            && rows.iter().all(|r| r.converged);
        let monotone = rows
            .windows(2)
            .all(|w| w[1].c_k <= w[0].c_k * (1.0 + MONOTONE_TOL));
        let maxima = rows.iter().all(|r| r.max_value >= MAX_FLOOR);
        let decay = rows.iter().all(|r| r.delta > 0.0 && r.r2 > R2_FLOOR);
        let bounded =
            rep.xi_bound.is_finite() && rep.xi_settled && rows.iter().any(|r| r.k >= SETTLE_BY);
        let table: Vec<String> = rows
            .iter()
            .map(|r| {
                format!(
                    "k={} c={:.5} max={:.3} xi={:.3} delta={:.3} R2={:.4}",
                    r.k, r.c_k, r.max_value, r.xi_gauge, r.delta, r.r2
                )
            })
            .collect();
        Ok((
            complete && monotone && maxima && decay && bounded,
            format!("[{}], violations {:?}", table.join("; "), rep.violations),
        ))
    });

    v.run(7, "trichotomy classifier", None, || {
        let cases: Vec<(SyntheticFamily, Verdict, u64)> = [
            (SyntheticFamily::Translating, Verdict::Compactness),
            (SyntheticFamily::Flattening, Verdict::Vanishing),
            (SyntheticFamily::Separating, Verdict::Dichotomy),
        ]
        .iter()
        .flat_map(|(f, v)| (0..SEEDS).map(move |s| (*f, *v, s)))
        .collect();
        let results: Vec<Result<(bool, String), String>> = cases
            .par_iter()
            .map(|(family, want, seed)| {
                let seq = synthetic_sequence(*family, *seed, SYNTH_LEN, 2.0)
                    .map_err(|e| e.to_string())?;
                let dens: Vec<MassDensity> = seq
                    .fields
                    .iter()
                    .map(|u| normalize_mass(u, 2.0))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                let r = classify_sequence(&dens, SYNTH_EPS, &SYNTH_RADII, DEFAULT_STRIDE)
                    .map_err(|e| e.to_string())?;
                let split_ok = match (seq.split, r.alpha) {
                    (Some(b), Some(a)) => (a - b.max(1.0 - b)).abs() <= SYNTH_EPS,
                    (None, _) => true,
                    (Some(_), None) => false,
                };
                Ok((
                    r.verdict == *want && split_ok,
                    format!(
                        "{family:?}/{seed}: {:?} alpha {:?} split {:?}",
                        r.verdict, r.alpha, seq.split
                    ),
                ))
            })
            .collect();
        let mut hits = [0u32; 3];
        let mut misses = Vec::new();
        for ((family, _, _), res) in cases.iter().zip(results) {
            match res {
                Ok((true, _)) => hits[*family as usize] += 1,
                Ok((false, d)) => misses.push(d),
                Err(e) => misses.push(e),
            }
        }
        let ok = hits.iter().all(|h| *h as u64 == SEEDS);
        Ok((
            ok,
            format!(
                "compactness {}/{SEEDS}, vanishing {}/{SEEDS}, dichotomy {}/{SEEDS} {misses:?}",
                hits[0], hits[1], hits[2]
            ),
        ))
    });

    v.run(8, "energy splitting", None, || {
        let c = cmp.as_ref().ok_or("no ground state from criterion 5")?;
        let u = &c.mountain_pass.field;
        let k = reference().ball_radius;
        let splits = (0..SPLIT_RADII)
            .map(|i| {
                energy_split(
                    u,
                    k / 4.0 + (k / 2.0) * i as f64 / (SPLIT_RADII - 1) as f64,
                    2.0,
                )
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let defect: Vec<f64> = splits.iter().map(|s| s.defect).collect();
        let annulus: Vec<f64> = splits.iter().map(|s| s.annulus_mass).collect();
        let ok = decreasing_in_trend(&defect) && decreasing_in_trend(&annulus);
        let (first, last) = (splits[0], splits[SPLIT_RADII - 1]);
        Ok((
            ok,
            format!(
                "r {:.2} -> {:.2}: defect {:.3e} -> {:.3e}, annulus mass {:.3e} -> {:.3e}",
                first.r, last.r, first.defect, last.defect, first.annulus_mass, last.annulus_mass
            ),
        ))
    });

    v.run(9, "mountain-pass rim", None, || {
        let cfg = reference();
        let domain = cfg.domain().map_err(|e| e.to_string())?;
        let func = cfg.functional().map_err(|e| e.to_string())?;
        let family = random_bump_family(&domain, RIM_MEMBERS, 2024);
        let rim = mountain_pass_rim(&func, &family).map_err(|e| e.to_string())?;
        Ok((
            rim.holds() && rim.members == RIM_MEMBERS,
            format!(
                "{} directions, C {:.4e}, r {:.4}, alpha0 {:.4}, min J on sphere {:.4}",
                rim.members, rim.embedding_constant, rim.radius, rim.alpha0, rim.min_energy
            ),
        ))
    });

    if v.failed.is_empty() {
        println!("all criteria passed");
    } else {
        println!("failed criteria: {:?}", v.failed);
        std::process::exit(1);
    }
}
