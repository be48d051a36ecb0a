//! Command-line front end: honest runs, shot simulations, attacks, sweeps.
//!
//! Exit codes: 0 accepted, 1 protocol abort, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qudit_qss::adversary::ProbeBasis;
use qudit_qss::experiment::{dispatch, Command, ExperimentConfig, Format, DEFAULT_SHOTS, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "qss", version, about = "Threshold qudit secret sharing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Deal a secret and reconstruct it with players 1..t.
    Run(Common),
    /// Shot simulation for a players-N preset or an explicit n and d.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        preset: Option<String>,
        /// Register width in qubits; all of 1, 2 and 3 when omitted.
        #[arg(long)]
        qubits: Option<u32>,
    },
    /// Run one attack from the registry.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        attack: String,
        /// Tapped hop (0 = P1 -> P2).
        #[arg(long)]
        hop: Option<usize>,
        /// Target player id (forger or collusion victim).
        #[arg(long)]
        player: Option<usize>,
        #[arg(long)]
        fake: Option<u64>,
        #[arg(long)]
        fake_hash: Option<u64>,
        #[arg(long, value_enum, default_value_t = BasisArg::Computational)]
        basis: BasisArg,
    },
    /// Honest runs over every prime d <= d-max, t <= t-max, t <= n <= n-max.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 11)]
        d_max: u64,
        #[arg(long, default_value_t = 4)]
        t_max: usize,
        #[arg(long, default_value_t = 6)]
        n_max: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 0)]
    secret: u64,
    /// Prime modulus override; must exceed n.
    #[arg(long)]
    d: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SHOTS)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Computational,
    Fourier,
}

fn base(command: Command, common: &Common, default_format: Format) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(command);
    c.n = common.n;
    c.t = common.t;
    c.secret = common.secret;
    c.d = common.d;
    c.shots = common.shots;
    c.seed = common.seed;
    c.out = common.out.as_ref().map(|p| p.display().to_string());
    c.format = match common.format {
        Some(FormatArg::Json) => Format::Json,
        Some(FormatArg::Csv) => Format::Csv,
        None => default_format,
    };
    c
}

fn config(cli: Cli) -> ExperimentConfig {
    match cli.command {
        Cmd::Run(common) => base(Command::Run, &common, Format::Json),
        Cmd::Simulate { common, preset, qubits } => {
            let mut c = base(Command::Simulate, &common, Format::Json);
            c.preset = preset;
            c.qubits = qubits;
            c
        }
        Cmd::Attack {
            common,
            attack,
            hop,
            player,
            fake,
            fake_hash,
            basis,
        } => {
            let mut c = base(Command::Attack, &common, Format::Json);
            c.attack = Some(attack);
            c.hop = hop;
            c.player = player;
            c.fake = fake;
            c.fake_hash = fake_hash;
            c.basis = match basis {
                BasisArg::Computational => ProbeBasis::Computational,
                BasisArg::Fourier => ProbeBasis::Fourier,
            };
            c
        }
        Cmd::Sweep {
            common,
            d_max,
            t_max,
            n_max,
        } => {
            let mut c = base(Command::Sweep, &common, Format::Csv);
            c.d_max = d_max;
            c.t_max = t_max;
            c.n_max = n_max;
            c
        }
    }
}

fn main() -> ExitCode {
    let config = config(Cli::parse());
    let outcome = match dispatch(&config) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match &config.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.body) {
                eprintln!("error: cannot write {path}: {e}");
                return ExitCode::from(EXIT_USAGE as u8);
            }
        }
        None => print!("{}", outcome.body),
    }
    ExitCode::from(outcome.exit_code as u8)
}
