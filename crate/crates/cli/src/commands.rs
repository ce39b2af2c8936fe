//! Subcommand bodies. Each returns the process exit code.

use std::path::{Path, PathBuf};

use heisgs::calculus::{run_calculus_suite, CheckOutcome, SuiteOptions};
use heisgs::cc::{
    classify_sequence, normalize_mass, synthetic_sequence, SyntheticFamily, TrichotomyResult,
    Verdict,
};
use heisgs::solvers::{
    constraint_defect, exhaust_domains, solve_constrained_min, solve_mountain_pass, ExhaustionRow,
    SolveReport, CRITICALITY_TOL,
};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{RunConfig, SolveMethod};
use crate::hgf::HgfFile;
use crate::output::{to_json, write_atomic, write_csv};
use crate::{CliError, EXIT_INVARIANT, EXIT_NOT_CONVERGED, EXIT_OK};

type Outcome = Result<u8, CliError>;

fn emit(path: Option<&Path>, json: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, json.as_bytes())
            .map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn io_context(path: &Path) -> impl Fn(heisgs::Error) -> CliError + '_ {
    move |e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    }
}

#[derive(Serialize)]
struct CalculusBody {
    passed: bool,
    checks: Vec<CheckOutcome>,
}

pub fn calculus_check(opts: SuiteOptions, report: Option<&Path>) -> Outcome {
    let checks = run_calculus_suite(opts)?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    let passed = failed.is_empty();
    if !passed {
        eprintln!("calculus check failed: {}", failed.join(", "));
    }
    emit(
        report,
        &to_json(
            "calculus-check",
            CalculusBody {
                passed,
                checks: checks.clone(),
            },
        )?,
    )?;
    Ok(if passed { EXIT_OK } else { EXIT_INVARIANT })
}

#[derive(Serialize)]
struct SolveBody<'a> {
    config: &'a RunConfig,
    field_file: Option<&'a Path>,
    constraint_defect: Option<f64>,
    criticality_passes: bool,
    solve: &'a SolveReport,
}

pub fn solve(cfg: &RunConfig) -> Outcome {
    cfg.validate()?;
    let sc = cfg.solver();
    let report = match cfg.method {
        SolveMethod::MountainPass => solve_mountain_pass(&sc)?,
        SolveMethod::ConstrainedMin => solve_constrained_min(&sc)?,
    };
    let defect = constraint_defect(&report, cfg.p);
    if let Some(out) = &cfg.out {
        let mut meta = Map::new();
        meta.insert("method".into(), serde_json::to_value(report.method)?);
        meta.insert("level".into(), Value::from(report.level));
        meta.insert("converged".into(), Value::from(report.converged));
        meta.insert("eps".into(), Value::from(cfg.eps));
        HgfFile::new(report.field.clone(), Some(cfg.p), meta)
            .write(out)
            .map_err(io_context(out))?;
    }
    let body = SolveBody {
        config: cfg,
        field_file: cfg.out.as_deref(),
        constraint_defect: defect,
        criticality_passes: report.diagnostics.passes(CRITICALITY_TOL),
        solve: &report,
    };
    emit(cfg.report.as_deref(), &to_json("solve", body)?)?;
    eprintln!(
        "{:?}: level {:.12e}, {} iterations, converged {}",
        report.method, report.level, report.iterations, report.converged
    );
    Ok(if report.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub const EXHAUST_COLUMNS: [&str; 6] = ["k", "c_k", "max_value", "xi_gauge", "delta", "r2"];

fn exhaust_row(r: &ExhaustionRow) -> Vec<f64> {
    vec![r.k, r.c_k, r.max_value, r.xi_gauge, r.delta, r.r2]
}

#[derive(Serialize)]
struct ExhaustBody<'a> {
    config: &'a RunConfig,
    csv_file: Option<&'a Path>,
    passed: bool,
    monotone: bool,
    xi_bound: f64,
    xi_settled: bool,
    violations: &'a [String],
    failures: &'a [(f64, String)],
    rows: &'a [ExhaustionRow],
}

pub fn exhaust(cfg: &RunConfig) -> Outcome {
    cfg.validate()?;
    let rep = exhaust_domains(&cfg.radii, &cfg.solver(), cfg.jobs)?;
    let rows: Vec<Vec<f64>> = rep.rows.iter().map(exhaust_row).collect();
    if let Some(csv) = &cfg.csv {
        write_csv(csv, &EXHAUST_COLUMNS, &rows).map_err(io_context(csv))?;
    }
    let body = ExhaustBody {
        config: cfg,
        csv_file: cfg.csv.as_deref(),
        passed: rep.passed(),
        monotone: rep.monotone,
        xi_bound: rep.xi_bound,
        xi_settled: rep.xi_settled,
        violations: &rep.violations,
        failures: &rep.failures,
        rows: &rep.rows,
    };
    emit(cfg.report.as_deref(), &to_json("exhaust", body)?)?;
    for v in &rep.violations {
        eprintln!("violation: {v}");
    }
    for (k, e) in &rep.failures {
        eprintln!("k = {k} failed: {e}");
    }
    if !rep.failures.is_empty() || rep.rows.iter().any(|r| !r.converged) {
        Ok(EXIT_NOT_CONVERGED)
    } else if !rep.violations.is_empty() {
        Ok(EXIT_INVARIANT)
    } else {
        Ok(EXIT_OK)
    }
}

pub const PROFILE_COLUMNS: [&str; 6] = ["element", "r", "mass", "center_x", "center_y", "center_t"];

#[derive(Serialize)]
struct ClassifyBody<'a> {
    inputs: &'a [PathBuf],
    q: f64,
    eps: f64,
    stride: usize,
    verdict: Verdict,
    result: &'a TrichotomyResult,
}

pub fn classify(cfg: &RunConfig, profiles: Option<&Path>) -> Outcome {
    cfg.validate()?;
    if cfg.inputs.len() < heisgs::cc::TAIL {
        return Err(CliError::usage(format!(
            "need at least {} input fields",
            heisgs::cc::TAIL
        )));
    }
    let mut densities = Vec::with_capacity(cfg.inputs.len());
    for path in &cfg.inputs {
        let file =
            HgfFile::read(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        densities.push(
            normalize_mass(&file.field, cfg.q)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?,
        );
    }
    let result = classify_sequence(&densities, cfg.mass_eps, &cfg.profile_radii, cfg.stride)?;
    if let Some(path) = profiles {
        let mut rows = Vec::new();
        for (m, prof) in result.profiles.iter().enumerate() {
            for ((r, mass), c) in prof.samples.iter().zip(&prof.centers) {
                rows.push(vec![m as f64, *r, *mass, c.x[0], c.y[0], c.t]);
            }
        }
        write_csv(path, &PROFILE_COLUMNS, &rows).map_err(io_context(path))?;
    }
    let body = ClassifyBody {
        inputs: &cfg.inputs,
        q: cfg.q,
        eps: cfg.mass_eps,
        stride: cfg.stride,
        verdict: result.verdict,
        result: &result,
    };
    emit(cfg.report.as_deref(), &to_json("classify", body)?)?;
    eprintln!(
        "verdict: {}",
        serde_json::to_value(result.verdict)?
            .as_str()
            .unwrap_or("?")
    );
    Ok(EXIT_OK)
}

/// Writes `seq_00.hgf, seq_01.hgf, ...` into `dir` and returns the paths.
pub fn synth(
    family: SyntheticFamily,
    seed: u64,
    len: usize,
    q: f64,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let seq = synthetic_sequence(family, seed, len, q)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    let mut paths = Vec::with_capacity(seq.fields.len());
    for (m, field) in seq.fields.into_iter().enumerate() {
        let mut meta = Map::new();
        meta.insert("family".into(), serde_json::to_value(family)?);
        meta.insert("seed".into(), Value::from(seed));
        meta.insert("element".into(), Value::from(m));
        meta.insert("q".into(), Value::from(q));
        if let Some(s) = seq.split {
            meta.insert("split".into(), Value::from(s));
        }
        let path = dir.join(format!("seq_{m:02}.hgf"));
        HgfFile::new(field, None, meta)
            .write(&path)
            .map_err(io_context(&path))?;
        paths.push(path);
    }
    Ok(paths)
}
