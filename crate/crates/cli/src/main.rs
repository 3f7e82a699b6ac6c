//! Command-line driver: simulate measured data, add noise, scan for depth,
//! invert, and export fields for visualisation.
//!
//! Exit codes: 0 success, 1 bad configuration or input, 2 numerical failure.

mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use backscatter::experiment::ExperimentConfig;
use backscatter::io::{self, FieldContainer, SliceSpec, StructuredBlock};
use backscatter::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use stages::Workspace;

#[derive(Parser)]
#[command(name = "backscatter", version, about = "Backscatter simulation and dielectric reconstruction")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem for every wavenumber and store the measured data.
    Simulate(RunArgs),
    /// Add relative uniform noise to the measured data.
    Noise(RunArgs),
    /// Scan the depth of the propagated data and write the M(a) curve.
    Scan(RunArgs),
    /// Reconstruct the coefficient from the noisy data.
    Invert(RunArgs),
    /// All stages in order.
    Pipeline(RunArgs),
    /// Write a field container as legacy VTK or a CSV slice.
    Export(ExportArgs),
    /// Print a config for one of the numbered test cases.
    Config(ConfigArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's `output`, else `./out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reuse artefacts already written by the same config.
    #[arg(long)]
    resume: bool,
    /// Accept inputs produced by a different config.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Vtk,
    Csv,
}

#[derive(Args)]
struct ExportArgs {
    /// Container directory.
    container: PathBuf,
    #[arg(long, value_enum)]
    format: Format,
    /// Destination file.
    #[arg(long)]
    output: PathBuf,
    /// Slice for CSV output, e.g. `z=0`.
    #[arg(long)]
    slice: Option<String>,
    /// Plane or wavenumber index for stacked containers.
    #[arg(long, default_value_t = 0)]
    index: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Production,
    Ci,
}

#[derive(Args)]
struct ConfigArgs {
    /// Test case 1 to 4.
    #[arg(long, default_value_t = 1)]
    case: u32,
    #[arg(long, value_enum, default_value_t = Profile::Production)]
    profile: Profile,
}

fn workspace(args: &RunArgs) -> Result<Workspace> {
    let mut config = io::read_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.noise.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Workspace::new(config, out, args.resume, args.force)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let ws = workspace(&a)?;
            let fields = ws.simulate()?;
            eprintln!("wrote {} planes to {}", fields.len(), ws.out.join("measured").display());
        }
        Command::Noise(a) => {
            let ws = workspace(&a)?;
            ws.noise()?;
            eprintln!("wrote {}", ws.out.join("noisy").display());
        }
        Command::Scan(a) => {
            let ws = workspace(&a)?;
            let scan = ws.scan()?;
            println!("{}", scan.argmax);
        }
        Command::Invert(a) => {
            let ws = workspace(&a)?;
            let report = ws.invert()?;
            println!("{}", serde_json::to_string_pretty(&report.reconstruction)?);
        }
        Command::Pipeline(a) => {
            let ws = workspace(&a)?;
            ws.simulate()?;
            ws.noise()?;
            let scan = ws.scan()?;
            eprintln!("depth scan maximum at a = {}", scan.argmax);
            let report = ws.invert()?;
            println!("{}", serde_json::to_string_pretty(&report.reconstruction)?);
        }
        Command::Export(a) => {
            let c = FieldContainer::read(&a.container)?;
            let block = StructuredBlock::from_container(&c, a.index)?;
            match a.format {
                Format::Vtk => io::write_vtk(&a.output, &block, &c.manifest.name)?,
                Format::Csv => {
                    let spec: SliceSpec = a
                        .slice
                        .as_deref()
                        .ok_or_else(|| Error::Config("CSV export needs --slice, e.g. z=0".into()))?
                        .parse()?;
                    io::write_csv_slice(&a.output, &block, spec)?;
                }
            }
        }
        Command::Config(a) => {
            if !(1..=4).contains(&a.case) {
                return Err(Error::Config(format!("unknown test case {}", a.case)));
            }
            let config = match a.profile {
                Profile::Production => ExperimentConfig::production(a.case),
                Profile::Ci => ExperimentConfig::ci(a.case),
            };
            println!("{}", serde_json::to_string_pretty(&config)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
