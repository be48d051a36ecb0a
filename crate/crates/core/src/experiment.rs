//! Command implementations behind the `qss` binary.
//!
//! Each command takes an [`ExperimentConfig`], runs, and returns the exit
//! code together with the rendered output file. Outputs embed the crate
//! version, the config and the seed, and contain nothing time- or
//! order-dependent, so identical configs produce identical bytes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{self, AttackError, AttackReport, AttackSpec, Eavesdrop, ProbeBasis};
use crate::dealer::{deal, DealerConfig, DealerError};
use crate::field::is_prime;
use crate::protocol::{
    execute, Channel, Pass, Player, ProtocolError, ProtocolTranscript, ShadowSet, ShotSeed, Verdict,
};
use crate::qudit::qubit_width;
use crate::shots::par_shots;
use crate::stats::{histogram, Histogram};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SHOTS: u64 = 8192;
pub const SWEEP_HEADER: &str = "d,t,n,seed,verdict,f0,expected,correct";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ABORT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Run,
    Simulate,
    Attack,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n: Option<usize>,
    pub t: Option<usize>,
    pub secret: u64,
    pub shots: u64,
    pub seed: u64,
    pub d: Option<u64>,
    pub preset: Option<String>,
    pub qubits: Option<u32>,
    pub attack: Option<String>,
    pub hop: Option<usize>,
    pub player: Option<usize>,
    pub fake: Option<u64>,
    pub fake_hash: Option<u64>,
    pub basis: ProbeBasis,
    pub d_max: u64,
    pub t_max: usize,
    pub n_max: usize,
    pub out: Option<String>,
    pub format: Format,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            n: None,
            t: None,
            secret: 0,
            shots: DEFAULT_SHOTS,
            seed: 0,
            d: None,
            preset: None,
            qubits: None,
            attack: None,
            hop: None,
            player: None,
            fake: None,
            fake_hash: None,
            basis: ProbeBasis::default(),
            d_max: 11,
            t_max: 4,
            n_max: 6,
            out: None,
            format: Format::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Usage(String),
    #[error("preset {preset} is infeasible for qubit width(s) {qubits:?}: no prime d > n = {n} has that width")]
    PresetInfeasible { preset: String, qubits: Vec<u32>, n: usize },
    #[error(transparent)]
    Dealer(#[from] DealerError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    /// Every error surfaced before a protocol run starts is a usage error.
    pub fn exit_code(&self) -> i32 {
        EXIT_USAGE
    }
}

/// Exit code plus the rendered output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub exit_code: i32,
    pub body: String,
}

pub fn dispatch(config: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    if config.shots == 0 {
        return Err(ExperimentError::Usage("--shots must be at least 1".into()));
    }
    match config.command {
        Command::Run => cmd_run(config),
        Command::Simulate => cmd_simulate(config),
        Command::Attack => cmd_attack(config),
        Command::Sweep => cmd_sweep(config),
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'static str,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    body: T,
}

fn render_json<T: Serialize>(config: &ExperimentConfig, body: T) -> Result<String, ExperimentError> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        version: VERSION,
        config,
        body,
    })?;
    s.push('\n');
    Ok(s)
}

fn require(value: Option<usize>, flag: &str) -> Result<usize, ExperimentError> {
    value.ok_or_else(|| ExperimentError::Usage(format!("{flag} is required")))
}

/// Deals and returns the qualified subset `P1..Pt`.
fn dealt_players(n: usize, t: usize, secret: u64, seed: u64, d: Option<u64>) -> Result<Vec<Player>, ExperimentError> {
    let deal = deal(&DealerConfig {
        n,
        t,
        secret,
        rng_seed: seed,
        d_override: d,
    })?;
    Ok(Player::qualified_subset(&deal.packets[..t]))
}

/// Shots of one honest reconstruction, summarized.
#[derive(Debug, Clone, Serialize)]
struct HonestRun {
    #[serde(flatten)]
    transcript: ProtocolTranscript,
    expected: u64,
    f0_histogram: Histogram,
    ancilla_histogram: Histogram,
    accepted_shots: u64,
    correct_shots: u64,
}

fn honest_shots(set: &ShadowSet, seed: u64, shots: u64, expected: u64) -> Result<HonestRun, ExperimentError> {
    let channel = Channel::honest(set.t());
    let runs = par_shots(shots, |shot| execute(set, &channel, ShotSeed::new(seed, shot)))?;
    let accepted_shots = runs.iter().filter(|r| r.verdict == Verdict::Accepted).count() as u64;
    let correct_shots = runs
        .iter()
        .filter(|r| r.verdict == Verdict::Accepted && r.f0 == Some(expected))
        .count() as u64;
    let f0_histogram = histogram(runs.iter().filter_map(|r| r.f0));
    let ancilla_histogram = histogram(runs.iter().map(|r| r.ancilla[0]));
    // Report the first shot that went wrong, or shot 0 when all agree.
    let mut transcript = runs
        .iter()
        .find(|r| r.verdict != Verdict::Accepted)
        .unwrap_or(&runs[0])
        .clone();
    transcript.shots = shots;
    Ok(HonestRun {
        transcript,
        expected,
        f0_histogram,
        ancilla_histogram,
        accepted_shots,
        correct_shots,
    })
}

fn csv_row(out: &mut String, d: u64, t: usize, n: usize, seed: u64, run: &HonestRun) {
    let verdict = serde_json::to_value(run.transcript.verdict).expect("verdict serializes");
    let f0 = run.transcript.f0.map(|v| v.to_string()).unwrap_or_default();
    let correct = run.correct_shots == run.transcript.shots;
    writeln!(
        out,
        "{d},{t},{n},{seed},{},{f0},{},{correct}",
        verdict.as_str().unwrap(),
        run.expected
    )
    .unwrap();
}

pub fn cmd_run(config: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let n = require(config.n, "--n")?;
    let t = require(config.t, "--t")?;
    let players = dealt_players(n, t, config.secret, config.seed, config.d)?;
    let set = ShadowSet::from_players(&players)?;
    let run = honest_shots(&set, config.seed, config.shots, config.secret)?;
    let exit_code = if run.transcript.verdict == Verdict::Accepted {
        EXIT_OK
    } else {
        EXIT_ABORT
    };
    let body = match config.format {
        Format::Json => render_json(config, &run)?,
        Format::Csv => {
            let mut s = format!("{SWEEP_HEADER}\n");
            csv_row(&mut s, set.modulus.get(), t, n, config.seed, &run);
            s
        }
    };
    Ok(Outcome { exit_code, body })
}

/// Largest prime `d > n` whose binary encoding needs exactly `qubits` qubits.
pub fn preset_modulus(n: usize, qubits: u32) -> Option<u64> {
    if qubits == 0 || qubits > 10 {
        return None;
    }
    let hi = 1u64 << qubits;
    let lo = (hi >> 1) + 1;
    (lo.max(2)..=hi)
        .rev()
        .find(|&d| is_prime(d) && d > n as u64 && qubit_width(d as usize) == qubits)
}

/// Player count encoded in a preset name such as `players-4`.
pub fn preset_players(name: &str) -> Result<usize, ExperimentError> {
    name.strip_prefix("players-")
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .ok_or_else(|| ExperimentError::Usage(format!("unknown preset {name:?}; expected players-<n>")))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationCell {
    pub n: usize,
    pub t: usize,
    pub d: u64,
    pub qubits: u32,
    pub secret: u64,
    pub shots: u64,
    pub expected: u64,
    pub f0_histogram: Histogram,
    pub ancilla_histogram: Histogram,
    pub correct_shots: u64,
}

#[derive(Debug, Clone, Serialize)]
struct SimulationBody {
    seed: u64,
    preset: Option<String>,
    cells: Vec<SimulationCell>,
    infeasible: Vec<u32>,
}

/// One simulation cell: `t = n` players on a `d`-level register.
pub fn simulate_cell(n: usize, d: u64, secret: u64, seed: u64, shots: u64) -> Result<SimulationCell, ExperimentError> {
    let players = dealt_players(n, n, secret % d, seed, Some(d))?;
    let set = ShadowSet::from_players(&players)?;
    let expected = set.sum(Pass::Secret).value();
    let run = honest_shots(&set, seed, shots, expected)?;
    Ok(SimulationCell {
        n,
        t: n,
        d,
        qubits: qubit_width(d as usize),
        secret: secret % d,
        shots,
        expected,
        f0_histogram: run.f0_histogram,
        ancilla_histogram: run.ancilla_histogram,
        correct_shots: run.correct_shots,
    })
}

pub fn cmd_simulate(config: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let mut cells = Vec::new();
    let mut infeasible = Vec::new();
    match &config.preset {
        Some(preset) => {
            let n = preset_players(preset)?;
            let widths: Vec<u32> = match config.qubits {
                Some(c) => vec![c],
                None => vec![1, 2, 3],
            };
            for c in widths {
                match preset_modulus(n, c) {
                    Some(d) => cells.push(simulate_cell(n, d, config.secret, config.seed, config.shots)?),
                    None if config.qubits.is_some() => {
                        return Err(ExperimentError::PresetInfeasible {
                            preset: preset.clone(),
                            qubits: vec![c],
                            n,
                        })
                    }
                    None => infeasible.push(c),
                }
            }
        }
        None => {
            let n = require(config.n, "--n or --preset")?;
            let d = config
                .d
                .ok_or_else(|| ExperimentError::Usage("--d is required without --preset".into()))?;
            cells.push(simulate_cell(n, d, config.secret, config.seed, config.shots)?);
        }
    }
    if cells.is_empty() {
        let preset = config.preset.clone().unwrap_or_default();
        let n = preset_players(&preset)?;
        return Err(ExperimentError::PresetInfeasible {
            preset,
            qubits: infeasible,
            n,
        });
    }
    let all_correct = cells.iter().all(|c| c.correct_shots == c.shots);
    let body = match config.format {
        Format::Json => render_json(
            config,
            SimulationBody {
                seed: config.seed,
                preset: config.preset.clone(),
                cells,
                infeasible,
            },
        )?,
        Format::Csv => {
            let mut s = String::from("n,t,d,qubits,value,count\n");
            for c in &cells {
                for (v, count) in &c.f0_histogram {
                    writeln!(s, "{},{},{},{},{v},{count}", c.n, c.t, c.d, c.qubits).unwrap();
                }
            }
            s
        }
    };
    Ok(Outcome {
        exit_code: if all_correct { EXIT_OK } else { EXIT_ABORT },
        body,
    })
}

pub fn cmd_attack(config: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let kind = config
        .attack
        .clone()
        .ok_or_else(|| ExperimentError::Usage("--attack is required".into()))?;
    let attack = adversary::lookup(&kind)?;
    let n = require(config.n, "--n")?;
    let t = require(config.t, "--t")?;
    let players = dealt_players(n, t, config.secret, config.seed, config.d)?;
    let set = ShadowSet::from_players(&players)?;
    let kind = attack.name();
    let mut spec = AttackSpec::new(kind, config.shots, config.seed);
    spec.target = if kind == adversary::Forgery::NAME || kind == adversary::CollusionProbe::NAME {
        config.player
    } else {
        config.hop
    };
    spec.fake = config.fake;
    spec.fake_hash = config.fake_hash;
    spec.basis = config.basis;
    let report: AttackReport = attack.run(&set, &spec)?;
    let body = match config.format {
        Format::Json => render_json(config, &report)?,
        Format::Csv => {
            let mut s = String::from("kind,value,count\n");
            for (v, count) in &report.outcome_histogram {
                writeln!(s, "{},{v},{count}", report.kind).unwrap();
            }
            s
        }
    };
    Ok(Outcome {
        exit_code: EXIT_OK,
        body,
    })
}

#[derive(Debug, Clone, Serialize)]
struct SweepBody {
    seed: u64,
    rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    d: u64,
    t: usize,
    n: usize,
    seed: u64,
    verdict: Verdict,
    f0: Option<u64>,
    expected: u64,
    correct: bool,
}

pub fn cmd_sweep(config: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut rows = Vec::new();
    for d in (2..=config.d_max).filter(|&d| is_prime(d)) {
        for t in 1..=config.t_max {
            for n in t..=config.n_max {
                if d <= n as u64 {
                    continue;
                }
                let secret = config.secret % d;
                let players = dealt_players(n, t, secret, config.seed, Some(d))?;
                let set = ShadowSet::from_players(&players)?;
                let run = honest_shots(&set, config.seed, config.shots, secret)?;
                csv_row(&mut csv, d, t, n, config.seed, &run);
                rows.push(SweepRow {
                    d,
                    t,
                    n,
                    seed: config.seed,
                    verdict: run.transcript.verdict,
                    f0: run.transcript.f0,
                    expected: secret,
                    correct: run.correct_shots == config.shots,
                });
            }
        }
    }
    let all_accepted = rows.iter().all(|r| r.verdict == Verdict::Accepted);
    let body = match config.format {
        Format::Csv => csv,
        Format::Json => render_json(
            config,
            SweepBody {
                seed: config.seed,
                rows,
            },
        )?,
    };
    Ok(Outcome {
        exit_code: if all_accepted { EXIT_OK } else { EXIT_ABORT },
        body,
    })
}
