use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wke::config::InitialData;
use wke::{run, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "wke", version, about = "Wave kinetic equation toolbox")]
struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `quadrature.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `io.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the CSV column schema and exit.
    #[arg(long)]
    schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the lemma suite.
    Verify,
    /// Picard evolution.
    Evolve {
        /// `rj:MU`, `gaussian:A,S`, `zero` or `file:PATH`.
        #[arg(long)]
        f0: Option<String>,
    },
    /// Kaniel-Shinbrot bracket.
    Ks {
        #[arg(long)]
        f0: Option<String>,
    },
    /// Rayleigh-Jeans residuals.
    Equilibrium {
        /// Comma-separated list of mu values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Option<Vec<f64>>,
    },
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.quadrature.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.io.out = o.clone();
    }
    match &cli.command {
        Some(Command::Evolve { f0: Some(s) }) | Some(Command::Ks { f0: Some(s) }) => {
            cfg.initial = InitialData::parse(s)?;
        }
        Some(Command::Equilibrium { mu: Some(m) }) => cfg.equilibrium.mu = m.clone(),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.schema {
        print!("{}", run::SCHEMA);
        return ExitCode::SUCCESS;
    }
    let Some(command) = &cli.command else {
        eprintln!("no subcommand given; see --help");
        return ExitCode::from(2);
    };
    let result = load(&cli).and_then(|cfg| match command {
        Command::Verify => run::run_verify(&cfg),
        Command::Evolve { .. } => run::run_evolve(&cfg),
        Command::Ks { .. } => run::run_ks(&cfg),
        Command::Equilibrium { .. } => run::run_equilibrium(&cfg),
    });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
