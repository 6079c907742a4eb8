//! `rpn-eigen`: configured verification runs with JSON and CSV reports.
//!
//! Exit status: 0 when every asserted check passes, 1 when a check fails,
//! 2 for configuration errors, 3 for numeric or output failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{CmdError, Outcome};
use config::Params;

/// Environment variable fixing the worker thread count.
const THREADS_ENV: &str = "RPN_EIGEN_THREADS";

#[derive(Parser)]
#[command(name = "rpn-eigen", version, about = "Conformal eigenvalue bounds on real projective spaces")]
struct Cli {
    /// TOML file with run parameters; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Norm and metric identities of the Veronese maps.
    VeroneseCheck(Params),
    /// Low eigenvalues of the conformal Laplacian.
    Spectrum(Params),
    /// lambda_2(w) against 2^{2/n} (2n + 2).
    TheoremCheck(Params),
    /// Every inequality of the trial-function chain on sampled caps.
    RayleighChain(Params),
    /// Hyperbolic center of mass of a Mobius pushforward measure.
    ComSolve(Params),
    /// Multi-start search for a zero of the cap vector field.
    VfieldSearch(Params),
    /// Degree of a sphere self-map, or a change-of-variables example.
    Degree(Params),
    /// Volumes of folded test surfaces as the cap degenerates.
    LimitsFold(Params),
    /// Volumes of Mobius images of test surfaces as |x| -> 1.
    LimitsMoebius(Params),
    /// A_n / B_n for n = 2..n_max.
    RatioTable(Params),
}

type Runner = fn(&Params, &std::path::Path) -> Result<Outcome, CmdError>;

impl Command {
    fn split(self) -> (&'static str, Params, Runner) {
        match self {
            Command::VeroneseCheck(p) => ("veronese-check", p, commands::veronese_check),
            Command::Spectrum(p) => ("spectrum", p, commands::spectrum),
            Command::TheoremCheck(p) => ("theorem-check", p, commands::theorem),
            Command::RayleighChain(p) => ("rayleigh-chain", p, commands::rayleigh_chain),
            Command::ComSolve(p) => ("com-solve", p, commands::com_solve),
            Command::VfieldSearch(p) => ("vfield-search", p, commands::vfield_search),
            Command::Degree(p) => ("degree", p, commands::degree),
            Command::LimitsFold(p) => ("limits-fold", p, commands::limits_fold),
            Command::LimitsMoebius(p) => ("limits-moebius", p, commands::limits_moebius),
            Command::RatioTable(p) => ("ratio-table", p, commands::ratio),
        }
    }
}

fn configure_threads() -> Result<(), CmdError> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let threads: usize = value
        .parse()
        .map_err(|_| CmdError::Config(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CmdError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<bool, CmdError> {
    configure_threads()?;
    let (name, params, exec) = cli.command.split();
    let params = config::resolve(params, cli.config.as_deref(), name)?;
    let dir = params.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CmdError::Io(format!("{}: {e}", dir.display())))?;

    let outcome = exec(&params, &dir)?;
    let passed = outcome.checks.iter().all(|c| c.passed);
    for c in &outcome.checks {
        println!(
            "{} {}: {:.6e} (limit {:.6e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.value,
            c.limit
        );
    }
    let report = json!({
        "command": name,
        "params": params,
        "passed": passed,
        "checks": outcome.checks,
        "detail": outcome.detail,
    });
    let path = dir.join(format!("{name}.json"));
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&path, text).map_err(|e| CmdError::Io(format!("{}: {e}", path.display())))?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("rpn-eigen: {e}");
            ExitCode::from(match e {
                CmdError::Config(_) => 2,
                CmdError::Numeric(_) | CmdError::Io(_) => 3,
            })
        }
    }
}
