mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ionclock::config::{OmegaMode, ScenarioConfig};

/// Exit codes beyond 0 (success) and 2 (usage error, from clap).
pub mod exit {
    pub const OTHER: u8 = 1;
    pub const VALIDATION: u8 = 3;
    pub const CONVERGENCE: u8 = 4;
    pub const RANGE: u8 = 5;
    pub const INSTABILITY: u8 = 6;
}

#[derive(Parser, Debug)]
#[command(name = "ionclock", version, about = "Systematic shifts of large ion-crystal clocks")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Scenario file (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Ion numbers, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Random seed for crystal initialisation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_mode)]
    omega_mode: Option<OmegaMode>,
    /// Drive frequency in Hz; implies absolute mode unless --omega-mode is given.
    #[arg(long, global = true)]
    omega_value: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<OmegaMode, String> {
    s.parse().map_err(|e: ionclock::Error| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Anneal crystals for every (N, seed) and write position tables.
    Solve,
    /// Per-ion shift distributions for a solved crystal.
    Shifts {
        #[arg(long)]
        crystal: PathBuf,
        /// Also report the quadrupole width over 10 field orientations.
        #[arg(long)]
        orientation_sweep: bool,
        /// Optimise the doughnut-beam power and write the compensated tensor shift.
        #[arg(long)]
        compensate: bool,
    },
    /// Scan the drive frequency for the zero of dShift/dN^(2/3).
    MagicScan,
    /// Ramsey contrast and stability for the combined rank-2 distribution.
    Ramsey {
        #[arg(long)]
        crystal: Option<PathBuf>,
    },
    /// Systematic shift budget.
    Budget {
        #[arg(long)]
        crystal: Option<PathBuf>,
    },
    /// Time-domain check of the micromotion amplitudes and shift (N <= 16).
    Oracle,
}

impl GlobalArgs {
    fn scenario(&self) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p).map_err(|e| anyhow::Error::new(e).context(format!("reading {}", p.display())))?,
            None => ScenarioConfig::default(),
        };
        if let Some(n) = &self.n {
            cfg.scan.n = n.clone();
        }
        if let Some(s) = self.seed {
            cfg.scan.seeds = vec![s];
        }
        if let Some(v) = self.omega_value {
            cfg.drive.value_hz = Some(v);
            if self.omega_mode.is_none() {
                cfg.drive.mode = OmegaMode::Absolute;
            }
        }
        if let Some(m) = self.omega_mode {
            cfg.drive.mode = m;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use ionclock::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Validation(_) | E::Parse(_) | E::Domain(_) | E::Precondition(_) | E::Sign(_) | E::NoMagicFrequency(_)) => exit::VALIDATION,
        Some(E::Singularity(..)) => exit::VALIDATION,
        Some(E::Convergence { .. }) => exit::CONVERGENCE,
        Some(E::Range(_)) => exit::RANGE,
        Some(E::Instability(_)) => exit::INSTABILITY,
        Some(E::Io(_)) | None => exit::OTHER,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.global.scenario()?;
    if let Some(t) = cli.global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Shifts { crystal, orientation_sweep, compensate } => commands::shifts(&cfg, &crystal, orientation_sweep, compensate),
        Command::MagicScan => commands::magic_scan(&cfg),
        Command::Ramsey { crystal } => commands::ramsey(&cfg, crystal.as_deref()),
        Command::Budget { crystal } => commands::budget(&cfg, crystal.as_deref()),
        Command::Oracle => commands::oracle(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
