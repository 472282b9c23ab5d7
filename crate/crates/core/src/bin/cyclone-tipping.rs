use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cyclone_tipping::commands::{self, Command};
use cyclone_tipping::config::RunConfig;
use cyclone_tipping::output::{error_json, to_json, Envelope, PRODUCER, SCHEMA_VERSION};
use cyclone_tipping::{Error, Result};

#[derive(Parser)]
#[command(name = "cyclone-tipping", version, about = "Tipping analysis for a two-variable cyclone intensity model")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration, or a JSON result envelope to replay.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the JSON envelope and CSV tables; without it the envelope goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Equilibria with stability labels.
    FixedPoints,
    /// Equilibrium branches over a shear sweep.
    Bifurcation,
    /// Saddle-node locus over a gamma sweep.
    PhaseDiagram,
    /// Stable and unstable manifolds of the saddle.
    Separatrix,
    /// Basin labels on a lattice.
    BasinGrid,
    /// Centre manifold of the origin.
    CenterManifold,
    /// One ramped run from the past storm state.
    RateTip,
    /// Bisection for the critical ramp rate.
    CriticalRate,
    /// Reflected Euler-Maruyama ensemble.
    SdeEnsemble,
    /// Noisy ramped ensemble.
    Combined,
    /// Most probable O to S path.
    Mpp,
    /// Action of a given path.
    Action,
    /// Escape-neighbourhood action and tip-time bound.
    TipTime,
}

impl Cmd {
    fn command(self) -> Command {
        match self {
            Cmd::FixedPoints => Command::FixedPoints,
            Cmd::Bifurcation => Command::Bifurcation,
            Cmd::PhaseDiagram => Command::PhaseDiagram,
            Cmd::Separatrix => Command::Separatrix,
            Cmd::BasinGrid => Command::BasinGrid,
            Cmd::CenterManifold => Command::CenterManifold,
            Cmd::RateTip => Command::RateTip,
            Cmd::CriticalRate => Command::CriticalRate,
            Cmd::SdeEnsemble => Command::SdeEnsemble,
            Cmd::Combined => Command::Combined,
            Cmd::Mpp => Command::Mpp,
            Cmd::Action => Command::Action,
            Cmd::TipTime => Command::TipTime,
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = Some(o.to_string_lossy().into_owned());
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn execute(cli: &Cli, cmd: Command) -> Result<()> {
    let cfg = resolve(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let out = commands::run(cmd, &cfg)?;
    let names: Vec<&str> = out.tables.iter().map(|t| t.file_name.as_str()).collect();
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command: cmd.name(),
        produced_by: PRODUCER,
        config: &cfg,
        tables: names,
        payload: &out.payload,
    };
    let json = to_json(&env)?;
    match &cfg.output.dir {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            write(&dir.join(format!("{}.json", cmd.name())), &json)?;
            for t in &out.tables {
                write(&dir.join(&t.file_name), &t.to_csv()?)?;
            }
        }
        None => {
            print!("{json}");
            if !out.tables.is_empty() {
                eprintln!("tables not written; pass --out to save {}", env.tables.join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = cli.command.command();
    match execute(&cli, cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            print!("{}", error_json(cmd.name(), &e));
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
