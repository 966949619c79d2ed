use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use nuclear_waveguide_cli::{parse_scenario, run, Command, Tolerances};

#[derive(Parser)]
#[command(name = "nwg", version, about = "Nuclear resonant scattering in planar x-ray waveguides")]
struct Cli {
    #[command(subcommand)]
    command: Request,
}

#[derive(Subcommand)]
enum Request {
    /// Guided modes, couplings and profiles of the stack.
    Modes(Common),
    /// Time response of a homogeneous resonant layer over a grid of distances.
    Bulk(Common),
    /// Micro-strip arrays: layouts, on-resonance profiles, time and frequency response.
    Strips(Common),
    /// Constructive strip stacks of increasing count against the solid-layer limit.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Tolerance override `key=value`; may be repeated.
    #[arg(long = "tolerance", value_name = "KEY=VALUE")]
    tolerances: Vec<String>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Request::Modes(a) => (Command::Modes, a),
        Request::Bulk(a) => (Command::Bulk, a),
        Request::Strips(a) => (Command::Strips, a),
        Request::Sweep(a) => (Command::Sweep, a),
    };
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut tolerances = Tolerances::default();
    for t in &args.tolerances {
        tolerances.set_from(t)?;
    }
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let scenario = parse_scenario(&text).with_context(|| format!("in {}", args.config.display()))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let output = run(&scenario, command, &text, base, &tolerances)?;
    output.write_to(&args.out)?;
    println!("{}: wrote {} files to {}", command.name(), output.artifacts.len() + 1, args.out.display());
    Ok(())
}
