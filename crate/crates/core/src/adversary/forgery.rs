//! A participant applies a fake shadow.
//!
//! The error shifts the recovered secret by exactly `fake - true`, and the
//! hash check catches it unless the shifted value happens to share a hash
//! residue with the real secret.

use rand::Rng;

use crate::dealer::hash_to_field;
use crate::field::FieldElement;
use crate::protocol::{execute, verify_hash, Channel, Pass, ProtocolTranscript, ShadowSet, ShotSeed, Verdict};
use crate::shots::{derive_seed, par_shots};
use crate::stats::histogram;

use super::{Attack, AttackError, AttackReport, AttackSpec};

const FAKE_STREAM: u64 = 0xFA4E;

#[derive(Debug, Clone, Copy, Default)]
pub struct Forgery;

impl Forgery {
    pub const NAME: &'static str = "forgery";

    /// Ring index of the forger; player 2 unless `spec.target` names another.
    fn forger(instance: &ShadowSet, spec: &AttackSpec) -> Result<usize, AttackError> {
        let t = instance.t();
        let id = spec.target.unwrap_or(if t >= 2 { 2 } else { 1 });
        if id == 0 || id > t {
            return Err(AttackError::InvalidSpec(format!(
                "forger must be a player in 1..={t}, got {id}"
            )));
        }
        Ok(id - 1)
    }

    fn forged_instance(&self, instance: &ShadowSet, spec: &AttackSpec, shot: u64) -> Result<ShadowSet, AttackError> {
        let mut forged = instance.clone();
        if !spec.enabled {
            return Ok(forged);
        }
        let who = Self::forger(instance, spec)?;
        let d = instance.modulus;
        let fake = match spec.fake {
            Some(v) => d.element(v),
            None => {
                // Uniform over Z_d without the true shadow.
                let mut rng = ShotSeed::new(derive_seed(spec.seed, FAKE_STREAM), shot).rng();
                let offset = rng.gen_range(1..d.get());
                instance.secret[who] + d.element(offset)
            }
        };
        forged.secret[who] = fake;
        if let Some(h) = spec.fake_hash {
            forged.hash[who] = d.element(h);
        }
        Ok(forged)
    }
}

fn forged_outcome(
    instance: &ShadowSet,
    who: usize,
    fake: FieldElement,
    fake_hash: FieldElement,
) -> (FieldElement, FieldElement) {
    let f0 = instance.sum(Pass::Secret) + fake - instance.secret[who];
    let g0 = instance.sum(Pass::Hash) + fake_hash - instance.hash[who];
    (f0, g0)
}

/// Exact detection rate over every fake secret shadow `s' != s`, with the
/// hash pass left honest, computed without simulation.
pub fn forgery_ground_truth(instance: &ShadowSet, forger: usize) -> f64 {
    let d = instance.modulus;
    let truth = instance.secret[forger];
    let honest_hash = instance.hash[forger];
    let fakes: Vec<FieldElement> = d.elements().filter(|&f| f != truth).collect();
    let caught = fakes
        .iter()
        .filter(|&&fake| {
            let (f0, g0) = forged_outcome(instance, forger, fake, honest_hash);
            !verify_hash(f0, g0, d)
        })
        .count();
    caught as f64 / fakes.len() as f64
}

/// Every `(fake secret shadow, fake hash shadow)` pair that changes the
/// secret yet passes the hash check.
pub fn residual_collisions(instance: &ShadowSet, forger: usize) -> Vec<(u64, u64)> {
    let d = instance.modulus;
    let truth = instance.secret[forger];
    let mut out = Vec::new();
    for fake in d.elements().filter(|&f| f != truth) {
        for fake_hash in d.elements() {
            let (f0, g0) = forged_outcome(instance, forger, fake, fake_hash);
            if verify_hash(f0, g0, d) {
                out.push((fake.value(), fake_hash.value()));
            }
        }
    }
    out
}

impl Attack for Forgery {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn shot(&self, instance: &ShadowSet, spec: &AttackSpec, shot: u64) -> Result<ProtocolTranscript, AttackError> {
        let forged = self.forged_instance(instance, spec, shot)?;
        Ok(execute(
            &forged,
            &Channel::honest(instance.t()),
            ShotSeed::new(spec.seed, shot),
        )?)
    }

    fn run(&self, instance: &ShadowSet, spec: &AttackSpec) -> Result<AttackReport, AttackError> {
        spec.check()?;
        let who = Self::forger(instance, spec)?;
        let runs = par_shots(spec.shots, |shot| self.shot(instance, spec, shot))?;
        let n = runs.len() as f64;
        let aborted = runs.iter().filter(|t| t.verdict != Verdict::Accepted).count() as f64;
        let hash_aborts = runs.iter().filter(|t| t.verdict == Verdict::AbortHash).count() as f64;
        let ancilla = runs.iter().filter(|t| t.ancilla[0] != 0).count() as f64;

        let d = instance.modulus;
        let ground_truth = match (spec.enabled, spec.fake) {
            (false, _) => 0.0,
            (true, None) if spec.fake_hash.is_none() => forgery_ground_truth(instance, who),
            (true, fake) => {
                let fake = fake.map(|v| d.element(v)).unwrap_or(instance.secret[who]);
                let fake_hash = spec.fake_hash.map(|v| d.element(v)).unwrap_or(instance.hash[who]);
                let (f0, g0) = forged_outcome(instance, who, fake, fake_hash);
                if verify_hash(f0, g0, d) {
                    0.0
                } else {
                    1.0
                }
            }
        };
        let residual = residual_collisions(instance, who);
        let mut notes = Vec::new();
        if !residual.is_empty() {
            notes.push(format!(
                "{} forged (secret, hash) shadow pairs pass the hash check",
                residual.len()
            ));
        }
        let secret = instance.sum(Pass::Secret).value();
        if d.elements()
            .any(|v| v.value() != secret && hash_to_field(v.value(), d) == hash_to_field(secret, d))
        {
            notes.push("the secret shares its hash residue with another field element".to_string());
        }
        debug_assert!(aborted >= hash_aborts);
        Ok(AttackReport {
            kind: Self::NAME.to_string(),
            shots: spec.shots,
            seed: spec.seed,
            outcome_histogram: histogram(runs.iter().filter_map(|t| t.f0)),
            detection_rate: hash_aborts / n,
            ancilla_failure_rate: ancilla / n,
            leakage: None,
            hypotheses: None,
            chi_square_p: None,
            ground_truth_detection_rate: Some(ground_truth),
            residual_collisions: residual,
            notes,
        })
    }
}
