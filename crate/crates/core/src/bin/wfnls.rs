use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavefront_nls::experiments::{self as ex, Command, RunConfig, SuiteStatus, WORKERS_ENV};
use wavefront_nls::microlocal::Hypothesis;
use wavefront_nls::{Error, Result};

#[derive(Parser)]
#[command(name = "wfnls", version, about = "Wave packet wave front set experiments for nonlinear Schrödinger")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; unset keys keep the command defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set detector.s=1.25`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the transform, window and propagator identities.
    VerifyIdentities(Common),
    /// Evaluate a static wave front detector at one phase-space point.
    Detect(Common),
    /// Evaluate the transported criterion for the free flow.
    Transported(Common),
    /// Integrate the nonlinear equation and report conservation drift.
    Solve(Common),
    /// Run the hypothesis/conclusion propagation experiment.
    Theorem2(Common),
    /// Convert stored curve and slice CSV files into gnuplot data.
    Plotdata {
        /// Curve or slice CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output directory.
        #[arg(long, short, default_value = "plots")]
        out: PathBuf,
    },
}

fn config(cmd: Command, common: &Common) -> Result<RunConfig> {
    let defaults = RunConfig::defaults(cmd);
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path, defaults)?,
        None => defaults,
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::VerifyIdentities(c) => {
            let report = ex::cmd_verify_identities(&config(Command::VerifyIdentities, &c)?)?;
            report.write_text(std::io::stdout().lock())?;
            Ok(match report.status() {
                SuiteStatus::Pass => 0,
                SuiteStatus::Incomplete => 2,
                SuiteStatus::Fail => 1,
                SuiteStatus::Errored => 70,
            })
        }
        Cmd::Detect(c) => {
            let curve = ex::cmd_detect(&config(Command::Detect, &c)?)?;
            curve.write_summary(std::io::stdout().lock())?;
            Ok(ex::verdict_exit_code(curve.verdict))
        }
        Cmd::Transported(c) => {
            let curve = ex::cmd_transported(&config(Command::Transported, &c)?)?;
            curve.write_summary(std::io::stdout().lock())?;
            Ok(ex::verdict_exit_code(curve.verdict))
        }
        Cmd::Solve(c) => {
            let (traj, rep) = ex::cmd_solve(&config(Command::Solve, &c)?)?;
            println!("t_end = {}", traj.final_time());
            println!("mass_drift = {:.3e}", rep.mass_drift);
            if let Some(d) = rep.energy_drift {
                println!("energy_drift = {d:.3e}");
            }
            Ok(0)
        }
        Cmd::Theorem2(c) => {
            let report = ex::cmd_theorem2(&config(Command::Theorem2, &c)?)?;
            report.write_summary(std::io::stdout().lock())?;
            let undecided = [&report.forward, &report.backward]
                .iter()
                .any(|h| matches!(h, Hypothesis::Evaluated(c) if !c.verdict.is_decisive()));
            Ok(if undecided { 2 } else { 0 })
        }
        Cmd::Plotdata { inputs, out } => {
            for path in ex::cmd_plotdata(&inputs, &out)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("wfnls: {e}");
            if let Error::BlowUp { .. } = e {
                eprintln!("wfnls: the solution left the representable range; try more steps");
            }
            ExitCode::from(ex::error_exit_code(&e) as u8)
        }
    }
}
