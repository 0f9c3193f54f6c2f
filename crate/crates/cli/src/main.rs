use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use garding::config::{parse_config, Command};
use garding::{Error, Run};

#[derive(Parser)]
#[command(name = "garding", version, about = "Audits, estimates and solves Hessian-type elliptic equations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the structure conditions of the operator, tensor and psi.
    Audit(Flags),
    /// Estimate the quantitative concavity constants over a radius grid.
    VerifyTheorem(Flags),
    /// Solve the Dirichlet problem and monitor the solution.
    Solve(Flags),
    /// Write an analytic solution and its right-hand side.
    Manufacture(Flags),
    /// Monitor a stored solution field.
    Monitor(Flags),
}

#[derive(clap::Args)]
struct Flags {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

impl Cmd {
    fn split(self) -> (Command, Flags) {
        match self {
            Cmd::Audit(f) => (Command::Audit, f),
            Cmd::VerifyTheorem(f) => (Command::VerifyTheorem, f),
            Cmd::Solve(f) => (Command::Solve, f),
            Cmd::Manufacture(f) => (Command::Manufacture, f),
            Cmd::Monitor(f) => (Command::Monitor, f),
        }
    }
}

fn execute(command: Command, flags: &Flags) -> garding::Result<Vec<PathBuf>> {
    let (text, base) = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            (text, path.parent().map(Path::to_path_buf))
        }
        None => (String::new(), None),
    };
    let mut config = parse_config(&text)?;
    if let Some(c) = config.command {
        if c != command {
            return Err(Error::Config(vec![format!(
                "configuration is for `{}` but `{}` was requested",
                c.name(),
                command.name()
            )]));
        }
    }
    if let Some(seed) = flags.seed {
        config = config.with_seed(seed);
    }
    config.out = match (&flags.out, &base) {
        (Some(o), _) => o.clone(),
        (None, Some(dir)) if config.out.is_relative() => dir.join(&config.out),
        _ => config.out,
    };
    let mut run = Run::new(&config, command);
    run.base = base.as_deref();
    run.execute()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = cli.command.split();
    let level = if flags.quiet {
        log::LevelFilter::Error
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_target(false)
        .format_timestamp(None)
        .init();
    match execute(command, &flags) {
        Ok(written) => {
            if !flags.quiet {
                for p in written {
                    println!("{}", p.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
