use std::path::{Path, PathBuf};
use std::process::exit;

use clap::{Parser, Subcommand};
use hjfield::config::RunConfig;
use hjfield::pipeline::{self, Failure, Outcome};

/// Classical field solutions from boundary data by characteristics.
#[derive(Parser)]
#[command(name = "hjfield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit, trace, reconstruct and verify.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `outputs.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Rerun the residual suite on the fan stored in a run directory.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compare analytic Hamiltonian derivatives with finite differences.
    CheckDerivatives {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<(RunConfig, PathBuf), Failure> {
    if !path.is_file() {
        return Err(Failure::MissingArtifact(path.to_path_buf()));
    }
    let cfg = RunConfig::load(path).map_err(Failure::Config)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    match threads {
        Some(0) => Err(Failure::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string())),
        None => Ok(()),
    }
}

fn report(outcome: &Outcome) {
    match outcome {
        Outcome::Verified(r) => {
            println!(
                "verified: hj {:.3e}, hamilton {:.3e} / {:.3e}",
                r.hj_residual.max, r.hamilton_residuals[0].max, r.hamilton_residuals[1].max
            );
        }
        Outcome::Unverified(r) => {
            eprintln!("verification failed: {}", r.failing().join(", "));
        }
        Outcome::Incompatible(fit) => {
            eprintln!(
                "incompatible boundary data: residual {:.3e} against threshold {:.3e} after {} iterations{}",
                fit.residual_rms,
                fit.tolerance,
                fit.iterations,
                fit.diagnostic.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
            );
        }
    }
}

fn dispatch(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Run { config, out_dir, threads } => {
            set_threads(threads)?;
            let (cfg, base) = load(&config)?;
            let out = out_dir.unwrap_or_else(|| PathBuf::from(&cfg.outputs.dir));
            let outcome = pipeline::run(&cfg, &base, &out)?;
            report(&outcome);
            Ok(outcome.exit_code())
        }
        Command::Verify { config, solution, threads } => {
            set_threads(threads)?;
            let (cfg, base) = load(&config)?;
            let outcome = pipeline::verify(&cfg, &base, &solution)?;
            report(&outcome);
            Ok(outcome.exit_code())
        }
        Command::CheckDerivatives { config } => {
            let (cfg, _) = load(&config)?;
            let (worst, tol) = pipeline::derivative_check(&cfg)?;
            if worst <= tol {
                println!("derivatives agree: max deviation {worst:.3e}");
                Ok(0)
            } else {
                eprintln!("derivatives disagree: max deviation {worst:.3e} exceeds {tol:.3e}");
                Ok(1)
            }
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            exit(if usage { 64 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => exit(code),
        Err(failure) => {
            eprintln!("{failure}");
            exit(failure.exit_code());
        }
    }
}
