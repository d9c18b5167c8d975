mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "sinhz", version, about = "Sinh-accelerated Z-inversion and option pricing under Lévy models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the engines (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Target tolerance, overriding the config file.
    #[arg(long, global = true)]
    eps: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price the option described by a config file; prints a JSON record.
    Price {
        #[arg(long)]
        config: PathBuf,
    },
    /// Node counts of the circle and sinh inversions; prints CSV.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample a level curve of Im ψ; prints CSV.
    Trace {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an engine-versus-oracle suite and print one line per check.
    Verify {
        /// wh-identity, hardy, gain, zinv, european, barrier, levelcurves or all.
        suite: String,
    },
}

/// Failure classes, mapped to exit codes 2 and 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    /// Errors while building models, payoffs or requests.
    pub fn from_config(e: sinhz::Error) -> Self {
        CliError::Config(e.to_string())
    }

    /// Errors from the engines: bad parameters stay config errors.
    pub fn from_engine(e: sinhz::Error) -> Self {
        match e {
            sinhz::Error::InvalidParameter(_) | sinhz::Error::Unsupported(_) => CliError::Config(e.to_string()),
            sinhz::Error::Domain(_) | sinhz::Error::Numerical(_) => CliError::Numerical(e.to_string()),
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn diagnostic(&self) -> String {
        let (kind, msg) = match self {
            CliError::Config(m) => ("config", m),
            CliError::Numerical(m) => ("numerical", m),
        };
        format!(
            "{{\"error\":{},\"message\":{}}}",
            serde_json::to_string(kind).unwrap(),
            serde_json::to_string(msg).unwrap()
        )
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(e) = cli.eps {
        if !(e > 0.0 && e < 1.0) {
            return Err(CliError::Config(format!("--eps {e} not in (0, 1)")));
        }
    }
    let text = match &cli.command {
        Command::Price { config } => commands::price(config, cli.eps)?,
        Command::Benchmark { config } => commands::benchmark(config, cli.eps)?,
        Command::Trace { config } => commands::trace(config)?,
        Command::Verify { suite } => verify::run(suite)?,
    };
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.code())
        }
    }
}
