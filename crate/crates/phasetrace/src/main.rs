use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phasetrace::pipeline::{self, Command, RunOptions};

#[derive(Parser)]
#[command(name = "phasetrace", version, about = "Phase-coherent RF ray tracing and FMCW radar simulation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info", env = "PHASETRACE_LOG")]
    log: String,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory for this run.
    #[arg(long, short)]
    out: PathBuf,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; never changes numeric results.
    #[arg(long, env = "PHASETRACE_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Trace coherent paths and write them as CSV.
    Trace(Common),
    /// Trace and synthesize CIRs plus the beat-signal cube.
    Simulate(Common),
    /// Simulate, then back-project the [image] grid.
    Image(Common),
    /// Simulate, then compute sliding range-Doppler maps.
    Doppler(Common),
    /// Simulate, then extract displacement at one range bin.
    Vitals(Common),
    /// Compare traced paths against the image method.
    Oracle(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .init();
    let (command, common) = match cli.command {
        Cmd::Trace(c) => (Command::Trace, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Image(c) => (Command::Image, c),
        Cmd::Doppler(c) => (Command::Doppler, c),
        Cmd::Vitals(c) => (Command::Vitals, c),
        Cmd::Oracle(c) => (Command::Oracle, c),
    };
    let opts = RunOptions {
        config: common.config,
        out: common.out,
        seed: common.seed,
        threads: common.threads,
    };
    match pipeline::run(command, &opts) {
        Ok(outcome) => {
            if command == Command::Oracle && outcome.manifest.summary["passed"] == false {
                eprintln!("error: traced paths disagree with the image method");
                return ExitCode::from(4);
            }
            for a in &outcome.manifest.artifacts {
                println!("{}\t{}", a.name, opts.out.join(&a.path).display());
            }
            println!("manifest\t{}", outcome.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
