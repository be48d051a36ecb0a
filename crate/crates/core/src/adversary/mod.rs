//! Attacks on the reconstruction ring, selectable by name.
//!
//! Every attack implements [`Attack`] and is registered under a stable name
//! in [`registry`]. The eavesdropping attacks share one driver
//! ([`Eavesdrop`]): they install taps on the channel, collect what the
//! adversary sees, and estimate leakage as the total-variation distance
//! between the adversary's views under two hypotheses for the victim's
//! shadow. Forgery swaps a player's shadow instead of touching the channel.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{execute, Channel, Pass, ProtocolError, ProtocolTranscript, ShadowSet, ShotSeed, Verdict};
use crate::shots::{derive_seed, par_shots};
use crate::stats::{chi_square_uniform, histogram, tv_distance, Histogram};

mod collusion;
mod entangle;
mod forgery;
mod intercept;
mod taps;

pub use collusion::CollusionProbe;
pub use entangle::EntangleMeasure;
pub use forgery::{forgery_ground_truth, residual_collisions, Forgery};
pub use intercept::{InterceptIqft, InterceptResend};
pub use taps::{EntangleTap, MeasureTap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("unknown attack {name:?}; known attacks: {known}", name = .0, known = names().join(", "))]
    UnknownKind(String),
    #[error("invalid attack spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Basis an eavesdropper measures the transmitted register in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeBasis {
    #[default]
    Computational,
    /// Inverse QFT first, then a computational measurement.
    Fourier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: String,
    /// Hop index for channel attacks, 1-based player id for player attacks.
    pub target: Option<usize>,
    pub shots: u64,
    pub seed: u64,
    /// Two values for the victim's shadow used by the leakage estimate.
    pub hypotheses: Option<(u64, u64)>,
    /// Fixed forged secret shadow; drawn per shot when absent.
    pub fake: Option<u64>,
    /// Forged hash shadow applied alongside `fake`.
    pub fake_hash: Option<u64>,
    pub basis: ProbeBasis,
    /// With `false` the attack is switched off and every shot is honest.
    pub enabled: bool,
}

impl AttackSpec {
    pub fn new(kind: &str, shots: u64, seed: u64) -> Self {
        AttackSpec {
            kind: kind.to_string(),
            target: None,
            shots,
            seed,
            hypotheses: None,
            fake: None,
            fake_hash: None,
            basis: ProbeBasis::default(),
            enabled: true,
        }
    }

    pub fn target(mut self, target: usize) -> Self {
        self.target = Some(target);
        self
    }

    pub fn hypotheses(mut self, a: u64, b: u64) -> Self {
        self.hypotheses = Some((a, b));
        self
    }

    pub fn basis(mut self, basis: ProbeBasis) -> Self {
        self.basis = basis;
        self
    }

    pub fn disabled(mut self) -> Self {
        self.enabled = false;
        self
    }

    fn check(&self) -> Result<(), AttackError> {
        if self.shots == 0 {
            return Err(AttackError::InvalidSpec("shots must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub kind: String,
    pub shots: u64,
    pub seed: u64,
    /// The adversary's view per shot (for forgery: the recovered `f0`).
    pub outcome_histogram: Histogram,
    /// Fraction of shots the reconstructor aborted, for any reason.
    pub detection_rate: f64,
    /// Fraction of shots whose first (secret pass) ancilla check failed.
    pub ancilla_failure_rate: f64,
    /// TV distance between views under the two shadow hypotheses.
    pub leakage: Option<f64>,
    pub hypotheses: Option<(u64, u64)>,
    /// Uniformity p-value of `outcome_histogram`.
    pub chi_square_p: Option<f64>,
    pub ground_truth_detection_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_collisions: Vec<(u64, u64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub trait Attack: Send + Sync {
    fn name(&self) -> &'static str;

    /// One shot of the attack. A disabled `AttackSpec` yields the honest run.
    fn shot(&self, instance: &ShadowSet, spec: &AttackSpec, shot: u64) -> Result<ProtocolTranscript, AttackError>;

    fn run(&self, instance: &ShadowSet, spec: &AttackSpec) -> Result<AttackReport, AttackError>;
}

type Constructor = fn() -> Box<dyn Attack>;

macro_rules! register {
    ($map:expr, $ty:ty) => {
        $map.insert(
            <$ty>::NAME,
            (|| Box::new(<$ty>::default()) as Box<dyn Attack>) as Constructor,
        );
    };
}

pub fn registry() -> &'static BTreeMap<&'static str, Constructor> {
    static REGISTRY: OnceLock<BTreeMap<&'static str, Constructor>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut map = BTreeMap::new();
        register!(map, InterceptResend);
        register!(map, InterceptIqft);
        register!(map, EntangleMeasure);
        register!(map, Forgery);
        register!(map, CollusionProbe);
        map
    })
}

pub fn names() -> Vec<&'static str> {
    registry().keys().copied().collect()
}

/// Hyphens are accepted in place of underscores.
pub fn lookup(name: &str) -> Result<Box<dyn Attack>, AttackError> {
    registry()
        .get(name.replace('-', "_").as_str())
        .map(|make| make())
        .ok_or_else(|| AttackError::UnknownKind(name.to_string()))
}

/// Looks up `spec.kind` and runs it.
pub fn run_attack(instance: &ShadowSet, spec: &AttackSpec) -> Result<AttackReport, AttackError> {
    lookup(&spec.kind)?.run(instance, spec)
}

/// A passive or semi-passive adversary on the channel.
pub trait Eavesdrop: Send + Sync {
    const NAME: &'static str;

    fn channel(&self, instance: &ShadowSet, spec: &AttackSpec) -> Result<Channel, AttackError>;

    /// Ring index of the player whose secret shadow the adversary targets.
    fn victim(&self, instance: &ShadowSet, spec: &AttackSpec) -> Result<usize, AttackError>;

    fn default_hypotheses(&self, d: u64) -> (u64, u64);

    /// Number of equally likely views if the view is uniform, for the
    /// chi-square check.
    fn uniform_categories(&self, spec: &AttackSpec, d: u64) -> Option<u64>;

    fn notes(&self, _spec: &AttackSpec) -> Vec<String> {
        Vec::new()
    }
}

/// The adversary's view of one shot: its secret-pass observations packed
/// as base-`d` digits in the order they were made.
pub fn view(transcript: &ProtocolTranscript) -> Option<u64> {
    let mut obs = transcript
        .observations
        .iter()
        .filter(|o| o.pass == Pass::Secret)
        .peekable();
    obs.peek()?;
    Some(obs.fold(0, |acc, o| acc * transcript.d + o.value))
}

fn sample(
    instance: &ShadowSet,
    channel: &Channel,
    seed: u64,
    shots: u64,
) -> Result<Vec<ProtocolTranscript>, AttackError> {
    par_shots(shots, |shot| {
        execute(instance, channel, ShotSeed::new(seed, shot)).map_err(AttackError::from)
    })
}

fn rates(transcripts: &[ProtocolTranscript]) -> (f64, f64) {
    let n = transcripts.len() as f64;
    let aborted = transcripts.iter().filter(|t| t.verdict != Verdict::Accepted).count() as f64;
    let ancilla = transcripts.iter().filter(|t| t.ancilla[0] != 0).count() as f64;
    (aborted / n, ancilla / n)
}

fn resolve_hypotheses(spec: &AttackSpec, d: u64, default: (u64, u64)) -> Result<(u64, u64), AttackError> {
    let (a, b) = spec.hypotheses.unwrap_or(default);
    let (a, b) = (a % d, b % d);
    if a == b {
        if spec.hypotheses.is_some() {
            return Err(AttackError::InvalidSpec(format!("hypotheses must differ mod {d}")));
        }
        return Ok((0, 1));
    }
    Ok((a, b))
}

impl<E: Eavesdrop> Attack for E {
    fn name(&self) -> &'static str {
        E::NAME
    }

    fn shot(&self, instance: &ShadowSet, spec: &AttackSpec, shot: u64) -> Result<ProtocolTranscript, AttackError> {
        let channel = if spec.enabled {
            self.channel(instance, spec)?
        } else {
            Channel::honest(instance.t())
        };
        Ok(execute(instance, &channel, ShotSeed::new(spec.seed, shot))?)
    }

    fn run(&self, instance: &ShadowSet, spec: &AttackSpec) -> Result<AttackReport, AttackError> {
        spec.check()?;
        let d = instance.modulus.get();
        let channel = if spec.enabled {
            self.channel(instance, spec)?
        } else {
            Channel::honest(instance.t())
        };
        let victim = self.victim(instance, spec)?;
        let main = sample(instance, &channel, spec.seed, spec.shots)?;
        let outcome_histogram = histogram(main.iter().filter_map(view));
        let (detection_rate, ancilla_failure_rate) = rates(&main);

        let (a, b) = resolve_hypotheses(spec, d, self.default_hypotheses(d))?;
        let mut views = [a, b].into_iter().enumerate().map(|(i, value)| {
            let mut hypothesis = instance.clone();
            hypothesis.secret[victim] = instance.modulus.element(value);
            let runs = sample(&hypothesis, &channel, derive_seed(spec.seed, i as u64 + 1), spec.shots)?;
            Ok::<_, AttackError>(histogram(runs.iter().filter_map(view)))
        });
        let view_a = views.next().expect("two hypotheses")?;
        let view_b = views.next().expect("two hypotheses")?;

        let chi_square_p = if outcome_histogram.is_empty() {
            None
        } else {
            self.uniform_categories(spec, d)
                .map(|k| chi_square_uniform(&outcome_histogram, k))
        };
        Ok(AttackReport {
            kind: E::NAME.to_string(),
            shots: spec.shots,
            seed: spec.seed,
            outcome_histogram,
            detection_rate,
            ancilla_failure_rate,
            leakage: Some(tv_distance(&view_a, &view_b)),
            hypotheses: Some((a, b)),
            chi_square_p,
            ground_truth_detection_rate: None,
            residual_collisions: Vec::new(),
            notes: self.notes(spec),
        })
    }
}

/// Builds an instance straight from shadow values, without a dealer.
///
/// The hash-pass shadows are random field elements summing to
/// `H(sum of secret shadows) mod d`, so an untouched run is accepted. This
/// allows fields too small for a dealer with `n` players, such as `d = 2`
/// with two players.
pub fn synthetic_instance(
    modulus: crate::field::PrimeModulus,
    secret_shadows: &[u64],
    seed: u64,
) -> Result<ShadowSet, AttackError> {
    use rand::Rng;
    if secret_shadows.is_empty() {
        return Err(ProtocolError::NoPlayers.into());
    }
    let secret: Vec<_> = secret_shadows.iter().map(|&s| modulus.element(s)).collect();
    let total: crate::field::FieldElement = secret.iter().copied().sum();
    let target = crate::dealer::hash_to_field(total.value(), modulus);
    let mut rng = ShotSeed::new(derive_seed(seed, 0x5eed), 0).rng();
    let mut hash: Vec<_> = (1..secret.len())
        .map(|_| modulus.element(rng.gen_range(0..modulus.get())))
        .collect();
    let rest = hash.iter().copied().fold(modulus.zero(), |acc, h| acc + h);
    hash.insert(0, target - rest);
    Ok(ShadowSet {
        modulus,
        xs: (1..=secret.len() as u64).collect(),
        secret,
        hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PrimeModulus;

    #[test]
    fn registry_names() {
        assert_eq!(
            names(),
            vec![
                "collusion_probe",
                "entangle_measure",
                "forgery",
                "intercept_iqft",
                "intercept_resend"
            ]
        );
        for name in names() {
            assert_eq!(lookup(name).unwrap().name(), name);
        }
        assert!(matches!(lookup("teleport"), Err(AttackError::UnknownKind(_))));
    }

    #[test]
    fn synthetic_instances_verify() {
        let d = PrimeModulus::new(2).unwrap();
        let set = synthetic_instance(d, &[1, 0], 3).unwrap();
        let tr = execute(&set, &Channel::honest(2), ShotSeed::new(0, 0)).unwrap();
        assert_eq!(tr.verdict, Verdict::Accepted);
        assert_eq!(tr.f0, Some(1));
    }

    #[test]
    fn zero_shots_rejected() {
        let set = synthetic_instance(PrimeModulus::new(5).unwrap(), &[1, 2, 3], 0).unwrap();
        let spec = AttackSpec::new("intercept_resend", 0, 0);
        assert!(matches!(run_attack(&set, &spec), Err(AttackError::InvalidSpec(_))));
    }

    #[test]
    fn hypotheses_fall_back_when_degenerate() {
        let spec = AttackSpec::new("x", 1, 0);
        assert_eq!(resolve_hypotheses(&spec, 2, (1, 3)).unwrap(), (0, 1));
        assert_eq!(resolve_hypotheses(&spec, 5, (1, 3)).unwrap(), (1, 3));
        let explicit = spec.hypotheses(2, 7);
        assert!(resolve_hypotheses(&explicit, 5, (1, 3)).is_err());
    }
}
