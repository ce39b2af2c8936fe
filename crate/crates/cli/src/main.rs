use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heisgs::calculus::SuiteOptions;
use heisgs::cc::{SyntheticFamily, SYNTH_LEN};
use heisgs_cli::{commands, CliError, RunConfig, SolveMethod, EXIT_OK, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(
    name = "heisgs",
    version,
    about = "Ground states of semilinear sub-Laplacian equations on the Heisenberg group"
)]
struct Cli {
    /// Flat JSON run configuration; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the group calculus invariants.
    CalculusCheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        samples: usize,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, hide = true)]
        flip_y: bool,
    },
    /// Compute a ground state on one gauge ball.
    Solve {
        #[arg(long, value_enum)]
        method: Option<SolveMethod>,
        #[command(flatten)]
        problem: Problem,
        /// HGF file for the field.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Mountain-pass levels on nested balls.
    Exhaust {
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Concentration-compactness verdict for a sequence of HGF fields.
    Classify {
        #[arg(long, num_args = 1..)]
        inputs: Option<Vec<PathBuf>>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// CSV of the concentration profiles.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Write a synthetic test sequence as HGF files.
    Synth {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SYNTH_LEN)]
        len: usize,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum Family {
    Translating,
    Flattening,
    Separating,
}

#[derive(Args, Debug)]
struct Problem {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    /// Nodes per axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Problem {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.p, self.p);
        set(&mut c.radius, self.radius);
        set(&mut c.grid, self.grid);
        set(&mut c.eps, self.eps);
        set(&mut c.max_iters, self.max_iters);
        set(&mut c.grad_tol, self.grad_tol);
        set(&mut c.seed, self.seed);
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::CalculusCheck {
            seed,
            samples,
            report,
            flip_y,
        } => commands::calculus_check(
            SuiteOptions {
                seed,
                samples,
                flip_y,
            },
            report.as_deref(),
        ),
        Command::Solve {
            method,
            problem,
            out,
            report,
        } => {
            set(&mut cfg.method, method);
            problem.apply(&mut cfg);
            cfg.out = out.or(cfg.out);
            cfg.report = report.or(cfg.report);
            commands::solve(&cfg)
        }
        Command::Exhaust {
            radii,
            jobs,
            problem,
            csv,
            report,
        } => {
            set(&mut cfg.radii, radii);
            set(&mut cfg.jobs, jobs);
            problem.apply(&mut cfg);
            cfg.csv = csv.or(cfg.csv);
            cfg.report = report.or(cfg.report);
            commands::exhaust(&cfg)
        }
        Command::Classify {
            inputs,
            q,
            eps,
            radii,
            stride,
            report,
            profiles,
        } => {
            set(&mut cfg.inputs, inputs);
            set(&mut cfg.q, q);
            set(&mut cfg.mass_eps, eps);
            set(&mut cfg.profile_radii, radii);
            set(&mut cfg.stride, stride);
            cfg.report = report.or(cfg.report);
            commands::classify(&cfg, profiles.as_deref())
        }
        Command::Synth {
            family,
            seed,
            len,
            q,
            out_dir,
        } => {
            let family = match family {
                Family::Translating => SyntheticFamily::Translating,
                Family::Flattening => SyntheticFamily::Flattening,
                Family::Separating => SyntheticFamily::Separating,
            };
            for p in commands::synth(family, seed, len, q, &out_dir)? {
                println!("{}", p.display());
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
