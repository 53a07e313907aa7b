use clap::{Parser, Subcommand};
use mts::config::RunConfig;
use mts::driver::{self, DriverError, RunOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mts", version, about = "Multi-time-step monolithic coupling of transient transport problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configuration and write time series, snapshots and summary.json
    Run {
        config: PathBuf,
        /// Output directory (default: the config's [output] dir, else out/<name>)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Snapshot every N system steps (0: first and last only)
        #[arg(long)]
        snapshots: Option<usize>,
        /// Use the full-resolution fixture meshes
        #[arg(long)]
        full_fixtures: bool,
    },
    /// Print spectral step limits, alpha_max and the stability verdict
    Analyze { config: PathBuf },
    /// Halve the system step repeatedly and report the observed order
    Convergence {
        config: PathBuf,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Halve the subdomain steps together with the system step
        #[arg(long)]
        scale_subdomains: bool,
    },
    /// Summarize a mesh file
    MeshInfo {
        mesh: PathBuf,
        /// Partition file to summarize alongside
        #[arg(long)]
        partition: Option<PathBuf>,
    },
}

fn fixture_dir() -> PathBuf {
    std::env::var_os("MTS_FIXTURE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), DriverError> {
    let fixtures = fixture_dir();
    match cmd {
        Command::Run { config, out, snapshots, full_fixtures } => {
            let cfg = RunConfig::load(&config)?;
            let opts = RunOptions { out_dir: out, snapshots, full_fixtures, fixture_dir: Some(fixtures) };
            let summary = driver::execute(&cfg, &opts)?;
            for r in &summary.runs {
                for w in &r.warnings {
                    eprintln!("warning: {}: {w}", r.label);
                }
                let err = r.final_error.map(|e| format!(", final error {e:.6e}")).unwrap_or_default();
                println!(
                    "{}: {} steps, {} newton iterations, max drift d {:.3e} v {:.3e}, final range [{:.6e}, {:.6e}]{err}",
                    r.label, r.steps, r.newton_iterations, r.max_drift_d_inf, r.max_drift_v_inf, r.final_min_value, r.final_max_value
                );
            }
            Ok(())
        }
        Command::Analyze { config } => {
            let cfg = RunConfig::load(&config)?;
            for (label, report) in driver::analyze(&cfg, Some(&fixtures))? {
                print!("{}", driver::format_report(&label, &report));
            }
            Ok(())
        }
        Command::Convergence { config, levels, scale_subdomains } => {
            let cfg = RunConfig::load(&config)?;
            for t in driver::convergence(&cfg, levels, scale_subdomains, Some(&fixtures))? {
                print!("{}", driver::format_convergence(&t));
            }
            Ok(())
        }
        Command::MeshInfo { mesh, partition } => {
            print!("{}", driver::mesh_info(&mesh, partition.as_deref())?);
            Ok(())
        }
    }
}
