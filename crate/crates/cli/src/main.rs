//! `gws`: generate, simulate, validate and benchmark Gaussian wave splatting
//! holograms from the command line.

mod bench;
mod generate;
mod simulate;
mod validate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit status of a failed command.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Validation,
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<gws_core::Error> for Failure {
    fn from(e: gws_core::Error) -> Self {
        match e {
            gws_core::Error::Io { .. } | gws_core::Error::Malformed { .. } => Failure::Io(e.into()),
            other => Failure::Usage(other.into()),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn io_failure(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::Io(anyhow::anyhow!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "gws", version, about = "Gaussian wave splatting holograms")]
struct Cli {
    /// Worker threads; falls back to GWS_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flip the sign of every Jacobian determinant (test hook).
    #[arg(long, global = true, hide = true)]
    inject_jacobian_fault: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a splat scene into complex fields and phase-only holograms.
    Generate(generate::Args),
    /// Propagate a field to a list of depths and write intensity images.
    Simulate(simulate::Args),
    /// Run the built-in oracle suites.
    Validate(validate::Args),
    /// Time the blending methods on random scenes.
    Bench(bench::Args),
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("GWS_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(anyhow::anyhow!("GWS_THREADS must be a thread count, got `{v}`"))),
        _ => Ok(None),
    }
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            return Err(Failure::Usage(anyhow::anyhow!("thread count must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.into()))?;
    }
    if cli.inject_jacobian_fault {
        gws_core::spectrum::inject_jacobian_sign_fault(true);
    }
    match cli.command {
        Command::Generate(a) => generate::run(&a),
        Command::Simulate(a) => simulate::run(&a),
        Command::Validate(a) => validate::run(&a),
        Command::Bench(a) => bench::run(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) | Failure::Io(e) => eprintln!("error: {e:#}"),
                Failure::Validation => eprintln!("validation failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
