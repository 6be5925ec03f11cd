use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chg_core::experiment::{self, Mode, Overrides, RunConfig};
use chg_core::Error;
use clap::Parser;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_GRAD_CHECK: u8 = 4;
const EXIT_LINE_SEARCH: u8 = 5;

/// Forward simulation and initial-condition reconstruction for a
/// Cahn-Hilliard tumour growth model.
#[derive(Parser, Debug)]
#[command(name = "chg", version)]
struct Cli {
    /// forward, make-target, reconstruct or grad-check
    mode: Mode,
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `run.seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Named preset, e.g. test_case_2 or test_case_2_full (overrides `run.preset`)
    #[arg(long)]
    preset: Option<String>,
}

enum Failure {
    Error(Error),
    GradCheck(f64),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Unsupported(_) => EXIT_CONFIG,
        Error::LineSearch { .. } | Error::AscentDirection(_) => EXIT_LINE_SEARCH,
        _ => EXIT_SOLVER,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("CHG_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("CHG_THREADS must be a non-negative integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot set up {n} threads: {e}")))
}

fn run(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    match cfg.mode {
        Mode::Forward => {
            let f = experiment::run_forward_mode(cfg, Some(out))?;
            eprintln!(
                "forward: {} steps on {} cells, {} Newton iterations",
                f.traj.steps(),
                f.space.mesh().num_cells(),
                f.traj.total_newton_iters()
            );
        }
        Mode::MakeTarget => {
            let t = experiment::make_target(cfg)?;
            let path = out.join("target.vtk");
            experiment::write_target(&t, &path)?;
            eprintln!("make-target: wrote {}", path.display());
        }
        Mode::Reconstruct => {
            let r = experiment::run_reconstruct(cfg, Some(out))?;
            eprintln!(
                "reconstruct: {} iterations, stop {:?}, J = {:e}",
                r.record.rows.len(),
                r.record.stop,
                r.record.final_cost()
            );
        }
        Mode::GradCheck => {
            let report = experiment::grad_check(cfg, Some(out))?;
            for (i, d) in report.directions.iter().enumerate() {
                eprintln!("direction {}: pairing {:e}, best relative error {:e}", i + 1, d.pairing, d.best);
            }
            if !report.passed() {
                return Err(Failure::GradCheck(report.worst()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides { mode: Some(cli.mode), preset: cli.preset, seed: cli.seed, out: cli.out };
    let cfg = match configure_threads().and_then(|_| experiment::parse_config_with(&cli.config, &overrides)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    match run(&cfg, &cfg.output.dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::GradCheck(worst)) => {
            eprintln!("error: gradient check failed, worst relative error {worst:e} above {:e}", cfg.gradcheck.threshold);
            ExitCode::from(EXIT_GRAD_CHECK)
        }
    }
}
