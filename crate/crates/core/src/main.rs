use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spdc_fidelity::harness::{
    cmd_compensator_sweep, cmd_emission_map, cmd_fidelity, cmd_pm_angle, cmd_trace_dump, Scenario,
    ScenarioConfig,
};
use spdc_fidelity::raytrace::TimingMode;
use spdc_fidelity::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    version,
    about = "Monte Carlo entanglement-fidelity model of a crossed-crystal SPDC source"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML, or JSON by extension). Defaults to the bundled scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    rays: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    timing: Option<Timing>,
    #[arg(long, global = true)]
    resamples: Option<usize>,
    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Collinear type-I phase-matching angle.
    PmAngle,
    /// Conversion efficiency over signal wavelength and emission angle.
    EmissionMap,
    /// On-axis tau- versus post-compensator length.
    CompensatorSweep {
        /// Also run the Monte Carlo fidelity at every grid length.
        #[arg(long)]
        with_fidelity: bool,
    },
    /// Monte Carlo entanglement fidelity with tau histograms.
    Fidelity,
    /// Ray polylines for plotting.
    TraceDump,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
enum Timing {
    Phase,
    Group,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default_scenario(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(r) = cli.rays {
        config.rays = r;
    }
    if let Some(t) = cli.timing {
        config.timing = match t {
            Timing::Phase => TimingMode::Phase,
            Timing::Group => TimingMode::Group,
        };
    }
    if let Some(r) = cli.resamples {
        config.resamples = r;
    }
    if let Some(o) = &cli.out {
        config.out = o.clone();
    }
    config.validate()?;
    let out = config.out.clone();
    let scn = Scenario::new(config)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let path = match cli.command {
            Command::PmAngle => cmd_pm_angle(&scn, &out),
            Command::EmissionMap => cmd_emission_map(&scn, &out),
            Command::CompensatorSweep { with_fidelity } => {
                cmd_compensator_sweep(&scn, &out, with_fidelity)
            }
            Command::Fidelity => cmd_fidelity(&scn, &out),
            Command::TraceDump => cmd_trace_dump(&scn, &out),
        }?;
        println!("wrote {}", path.display());
        Ok(())
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
