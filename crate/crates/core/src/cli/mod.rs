//! Problem-file ingestion, command dispatch and machine-readable reports.

mod commands;
mod problem;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    run_characterize, run_fd, run_invariants, run_jacobi, run_nullspace, run_transform, CharacterizeOptions, FdOptions,
    JacobiOptions, NullspaceOptions, SampleOptions, TransformOptions,
};
pub use problem::{change_from_value, load_change, load_metrics, parse_points, sha256_hex, ProblemFile, SystemSource};
pub use report::{components, normalize, num, CheckLine, Report};

use crate::exprlang::EvalError;
use crate::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Exit code for an error that aborted a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Singular { .. } | Error::Eval(EvalError::Domain { .. }) => EXIT_NUMERIC,
        Error::Precondition(_) => EXIT_CHECK_FAILED,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "jetkcc", version, about = "KCC invariants of second-order PDE systems on 1-jet spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate invariants at jet points.
    Invariants {
        problem: PathBuf,
        /// Comma-separated subset of eps,P,R,B,D.
        #[arg(long, default_value = "eps,P,R,B,D")]
        which: String,
        /// JSON file with an array of points; overrides sampling.
        #[arg(long)]
        points: Option<PathBuf>,
        #[command(flatten)]
        sampling: SampleArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification check.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Extract Γ and S at a base point.
    Characterize {
        problem: PathBuf,
        #[command(flatten)]
        opts: CharacterizeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Null space of the S constraint system.
    Nullspace {
        metric: PathBuf,
        #[command(flatten)]
        opts: NullspaceArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    /// Two-path covariance under a coordinate change.
    Transform {
        problem: PathBuf,
        change: PathBuf,
        #[command(flatten)]
        sampling: SampleArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Symbolic derivatives against central finite differences.
    Fd {
        problem: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[command(flatten)]
        sampling: SampleArgs,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Jacobi identity along the problem's section and variation.
    Jacobi {
        problem: PathBuf,
        #[command(flatten)]
        sampling: SampleArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structure extraction, failing when its hypotheses do not hold.
    Characterize {
        problem: PathBuf,
        #[command(flatten)]
        opts: CharacterizeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Null space of the S constraints at each temporal point.
    Nullspace {
        metric: PathBuf,
        #[command(flatten)]
        opts: NullspaceArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CharacterizeArgs {
    /// Base point: the m values of t followed by the n values of x.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub base: Vec<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct NullspaceArgs {
    /// Temporal points, ';'-separated, coordinates ','-separated.
    #[arg(long = "t", allow_hyphen_values = true)]
    pub t: String,
    #[arg(long)]
    pub m: usize,
}

impl From<&SampleArgs> for SampleOptions {
    fn from(a: &SampleArgs) -> Self {
        SampleOptions {
            samples: a.samples,
            seed: a.seed,
        }
    }
}

fn parse_t_points(s: &str) -> crate::Result<Vec<Vec<f64>>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad --t coordinate `{c}`: {e}")))
                })
                .collect()
        })
        .collect()
}

/// Runs a parsed command and returns its report and output path.
pub fn execute(cli: &Cli) -> crate::Result<(Report, Option<PathBuf>)> {
    use crate::kcc::Invariant;
    let nullspace = |metric: &PathBuf, opts: &NullspaceArgs, cmd: &str| -> crate::Result<Report> {
        run_nullspace(
            metric,
            &NullspaceOptions {
                m: opts.m,
                points: parse_t_points(&opts.t)?,
            },
            cmd,
        )
    };
    let characterize = |problem: &PathBuf, opts: &CharacterizeArgs, cmd: &str| -> crate::Result<Report> {
        let p = ProblemFile::load(problem)?;
        run_characterize(
            &p,
            &CharacterizeOptions {
                base: opts.base.clone(),
                tol: opts.tol,
            },
            cmd,
        )
    };
    Ok(match &cli.command {
        Command::Invariants {
            problem,
            which,
            points,
            sampling,
            out,
        } => {
            let p = ProblemFile::load(problem)?;
            let which = which
                .split(',')
                .filter(|w| !w.trim().is_empty())
                .map(|w| w.trim().parse::<Invariant>())
                .collect::<crate::Result<Vec<_>>>()?;
            let explicit = match points {
                Some(path) => {
                    let text = std::fs::read(path)?;
                    let value: serde_json::Value = serde_json::from_slice(&text)?;
                    let list = value.get("points").cloned().unwrap_or(value);
                    Some((parse_points(&list, p.dims, "$")?, sha256_hex(&text)))
                }
                None => None,
            };
            (run_invariants(&p, &which, explicit, &sampling.into())?, out.clone())
        }
        Command::Characterize { problem, opts, out } => (characterize(problem, opts, "characterize")?, out.clone()),
        Command::Nullspace { metric, opts, out } => (nullspace(metric, opts, "nullspace")?, out.clone()),
        Command::Check(c) => match c {
            CheckCommand::Transform {
                problem,
                change,
                sampling,
                tol,
                out,
            } => {
                let p = ProblemFile::load(problem)?;
                let (cc, sha) = load_change(change, p.dims)?;
                let opts = TransformOptions {
                    sampling: sampling.into(),
                    tol: *tol,
                };
                let mut r = run_transform(&p, &cc, &opts)?;
                r.inputs.push(("change".into(), sha));
                (r, out.clone())
            }
            CheckCommand::Fd {
                problem,
                step,
                sampling,
                tol,
                out,
            } => {
                let p = ProblemFile::load(problem)?;
                let opts = FdOptions {
                    sampling: sampling.into(),
                    step: *step,
                    tol: *tol,
                };
                (run_fd(&p, &opts)?, out.clone())
            }
            CheckCommand::Jacobi {
                problem,
                sampling,
                tol,
                out,
            } => {
                let p = ProblemFile::load(problem)?;
                let opts = JacobiOptions {
                    sampling: sampling.into(),
                    tol: *tol,
                };
                (run_jacobi(&p, &opts)?, out.clone())
            }
            CheckCommand::Characterize { problem, opts, out } => {
                (characterize(problem, opts, "check characterize")?, out.clone())
            }
            CheckCommand::Nullspace { metric, opts, out } => (nullspace(metric, opts, "check nullspace")?, out.clone()),
        },
    })
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok((report, out)) => {
            let text = report.render();
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, &text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return EXIT_INPUT;
                    }
                }
                None => print!("{text}"),
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            match report.first_failure() {
                None => EXIT_PASS,
                Some(c) => {
                    eprintln!("check failed: {}", c.name);
                    EXIT_CHECK_FAILED
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
