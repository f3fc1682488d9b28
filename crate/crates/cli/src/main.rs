use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use randsum::experiments::{
    emit_report, render, run_sweep, verify_output, ConfigTree, Format, RunOutput, VERSION,
};
use randsum::Error;

#[derive(Parser)]
#[command(name = "randsum", version = VERSION, about = "Random-sum approximation bounds and their numerical verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Run {
    /// TOML experiment configuration.
    config: PathBuf,
    /// Overrides of the form dotted.key=value.
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the bound only (sweeps the grid if one is configured).
    Bound(Run),
    /// Bound against the configured estimate at a single point.
    Verify(Run),
    /// Bound and estimate at every grid point, with log-log slopes.
    Sweep(Run),
    /// Like verify, but with the exact convolution estimate.
    Exact(Run),
    Version,
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn load(run: &Run) -> Result<ConfigTree, Error> {
    let mut tree = ConfigTree::from_path(&run.config)?;
    for o in &run.overrides {
        tree.apply_override(o)?;
    }
    if let Ok(seed) = std::env::var("RANDSUM_SEED") {
        let seed: i64 = seed
            .trim()
            .parse()
            .ok()
            .filter(|s| *s >= 0)
            .ok_or_else(|| Error::Config(format!("RANDSUM_SEED `{seed}` is not a seed")))?;
        if tree.build()?.master_seed().is_some() {
            tree.apply_override(&format!("method.master_seed={seed}"))?;
        }
    }
    Ok(tree)
}

fn execute(command: &str, run: &Run) -> Result<RunOutput, Error> {
    let mut tree = load(run)?;
    let sweep = match command {
        "bound" => {
            tree.remove("method");
            tree.get("sweep").is_some()
        }
        "verify" => {
            tree.remove("sweep");
            false
        }
        "exact" => {
            let cfg = tree.build()?;
            if !matches!(cfg.method, randsum::experiments::MethodSpec::Exact { .. }) {
                tree.apply_override("method={kind=\"exact\"}")?;
            }
            tree.remove("sweep");
            false
        }
        _ => true,
    };
    if sweep {
        run_sweep(&tree, command)
    } else {
        verify_output(&tree.build()?, command)
    }
}

fn write_output(out: &RunOutput, format: Format, path: Option<&str>) -> Result<(), Error> {
    match path {
        Some(p) => emit_report(out, format, Path::new(p)),
        None => {
            print!("{}", render(out, format)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, run) = match &cli.command {
        Command::Version => {
            println!("randsum {VERSION}");
            return ExitCode::SUCCESS;
        }
        Command::Bound(r) => ("bound", r),
        Command::Verify(r) => ("verify", r),
        Command::Sweep(r) => ("sweep", r),
        Command::Exact(r) => ("exact", r),
    };
    let out = match execute(name, run) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let spec = out.provenance.config.output.clone();
    let format = spec.as_ref().map(|o| o.format).unwrap_or_default();
    if let Err(e) = write_output(&out, format, spec.as_ref().and_then(|o| o.path.as_deref())) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    if let Some(msg) = &out.aborted {
        eprintln!("error: sweep aborted at {msg}");
        return ExitCode::from(out.abort_cause.as_ref().map_or(EXIT_RUNTIME, exit_code_for));
    }
    if out.any_fail() {
        ExitCode::from(EXIT_FAIL)
    } else {
        ExitCode::SUCCESS
    }
}
