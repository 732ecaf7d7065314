use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evoch_core::diagnostics::admissibility_report;
use evoch_core::scenario::{parse_config, resolve_output_dir, run_scenario, verify_battery, CSV_HEADER};
use evoch_core::{build_reference_surface, Error, TransportCheck};

/// Cahn-Hilliard phase separation on moving surfaces.
#[derive(Parser)]
#[command(name = "evoch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV diagnostics and VTK snapshots.
    Run { config: PathBuf },
    /// Check the discrete transport identities along the configured flow.
    Verify {
        config: PathBuf,
        /// Comma-separated subset of m_form, aS_form, aN_form, rho_grad_form, rho_ode.
        #[arg(long, value_delimiter = ',')]
        which: Vec<String>,
    },
    /// Report whether the initial datum satisfies the mean condition.
    Admissibility { config: PathBuf },
}

/// Exit code for invalid input, as opposed to a failed computation.
const EXIT_CONFIG: u8 = 2;

fn exit_code(err: &Error) -> ExitCode {
    match err {
        Error::Config { .. } | Error::Parse { .. } | Error::Io(_) | Error::Inadmissible { .. } => {
            ExitCode::from(EXIT_CONFIG)
        }
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn execute(command: Command) -> evoch_core::Result<ExitCode> {
    match command {
        Command::Run { config } => {
            let cfg = parse_config(&config)?;
            let dir = resolve_output_dir(&cfg.output.directory);
            println!("running {} steps, output in {}", cfg.n_steps(), dir.display());
            let summary = run_scenario(&cfg)?;
            let last = summary.records.last().expect("at least the initial record");
            println!("{CSV_HEADER}");
            println!("{}", evoch_core::scenario::csv_row(last));
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { config, which } => {
            let cfg = parse_config(&config)?;
            let checks = if which.is_empty() {
                TransportCheck::ALL.to_vec()
            } else {
                which.iter().map(|w| TransportCheck::from_name(w.trim())).collect::<Result<Vec<_>, _>>()?
            };
            let outcome = verify_battery(&cfg, &checks)?;
            let times: Vec<String> = outcome.times.iter().map(|t| format!("{t:.4}")).collect();
            println!("sample times: {}", times.join(", "));
            print!("{}", outcome.table());
            if outcome.passed() {
                println!("all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("some checks failed");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Admissibility { config } => {
            let cfg = parse_config(&config)?;
            let mesh0 = build_reference_surface(cfg.surface.preset(), cfg.surface.refinement())?;
            let u0 = cfg.u0.sample(&mesh0);
            let samples = (cfg.n_steps() + 1).max(2);
            let report = admissibility_report(&mesh0, &u0, &cfg.flow_field(), cfg.t_final, samples, cfg.model)?;
            println!("samples        {}", report.sample_count);
            println!("S_R            {:.12}", report.shrinkage_ratio);
            println!("|mean(u0)|     {:.12}", report.mean_abs);
            println!("|mean(u0)| S_R {:.12}", report.product);
            println!("verdict        {}", if report.admissible { "admissible" } else { "rejected" });
            Ok(if report.admissible { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CONFIG) })
        }
    }
}
