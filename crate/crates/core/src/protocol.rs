//! The reconstruction phase.
//!
//! Each pass: the reconstructor encodes its shadow with a QFT on `H`,
//! copies `H` into `T`, and sends `T` around the ring. Every other player
//! imprints its shadow as a phase on `T`. When `T` comes home it is
//! uncopied and checked for `|0>`, and an inverse QFT on `H` reveals the
//! sum of all shadows. The protocol runs one pass for the secret and one
//! for its hash, then compares the two.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dealer::{hash_to_field, SharePacket};
use crate::field::{shadow, FieldElement, FieldError, PrimeModulus};
use crate::qudit::{QuditError, QuditState, Register, RegisterLayout};

pub type ShotRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("inconsistent share packets: {0}")]
    InconsistentPackets(String),
    #[error("a reconstruction needs at least one player")]
    NoPlayers,
    #[error("the first player must be the only reconstructor")]
    Roles,
    #[error("channel built for {channel} players but {players} are present")]
    ChannelMismatch { channel: usize, players: usize },
    #[error("hop {hop} does not exist on a ring of {hops} hops")]
    InvalidHop { hop: usize, hops: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Qudit(#[from] QuditError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Reconstructor,
    Participant,
}

/// Shadow values a dishonest player applies instead of its true ones.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForgedShadows {
    pub secret: Option<FieldElement>,
    pub hash: Option<FieldElement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Player {
    pub id: usize,
    pub packet: SharePacket,
    pub role: Role,
    pub forged: ForgedShadows,
}

impl Player {
    pub fn new(packet: SharePacket, role: Role) -> Self {
        Player {
            id: packet.player_id,
            packet,
            role,
            forged: ForgedShadows::default(),
        }
    }

    /// Turns a list of packets into a qualified subset led by the first one.
    pub fn qualified_subset(packets: &[SharePacket]) -> Vec<Player> {
        packets
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let role = if i == 0 { Role::Reconstructor } else { Role::Participant };
                Player::new(*p, role)
            })
            .collect()
    }

    pub fn with_forgery(mut self, forged: ForgedShadows) -> Self {
        self.forged = forged;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pass {
    Secret,
    Hash,
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pass::Secret => "secret",
            Pass::Hash => "hash",
        })
    }
}

/// The shadows one reconstruction applies, in ring order. Index 0 is the
/// reconstructor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShadowSet {
    pub modulus: PrimeModulus,
    pub xs: Vec<u64>,
    pub secret: Vec<FieldElement>,
    pub hash: Vec<FieldElement>,
}

impl ShadowSet {
    /// Validates the players and computes their shadows for both passes.
    /// Forged values replace the true shadows where present.
    pub fn from_players(players: &[Player]) -> Result<Self, ProtocolError> {
        let (modulus, xs) = validate(players)?;
        let mut secret = Vec::with_capacity(players.len());
        let mut hash = Vec::with_capacity(players.len());
        for p in players {
            let s = shadow(p.packet.f_share, p.packet.x, &xs)?;
            let h = shadow(p.packet.g_share, p.packet.x, &xs)?;
            secret.push(p.forged.secret.unwrap_or(s));
            hash.push(p.forged.hash.unwrap_or(h));
        }
        Ok(ShadowSet {
            modulus,
            xs: xs.iter().map(|x| x.value()).collect(),
            secret,
            hash,
        })
    }

    pub fn t(&self) -> usize {
        self.secret.len()
    }

    pub fn shadows(&self, pass: Pass) -> &[FieldElement] {
        match pass {
            Pass::Secret => &self.secret,
            Pass::Hash => &self.hash,
        }
    }

    pub fn shadows_mut(&mut self, pass: Pass) -> &mut [FieldElement] {
        match pass {
            Pass::Secret => &mut self.secret,
            Pass::Hash => &mut self.hash,
        }
    }

    /// Classical sum of the shadows of one pass.
    pub fn sum(&self, pass: Pass) -> FieldElement {
        self.shadows(pass).iter().copied().sum()
    }
}

fn validate(players: &[Player]) -> Result<(PrimeModulus, Vec<FieldElement>), ProtocolError> {
    let first = players.first().ok_or(ProtocolError::NoPlayers)?;
    let modulus = first.packet.modulus();
    let mut xs = Vec::with_capacity(players.len());
    for (i, p) in players.iter().enumerate() {
        let expected = if i == 0 { Role::Reconstructor } else { Role::Participant };
        if p.role != expected {
            return Err(ProtocolError::Roles);
        }
        let pm = p.packet.modulus();
        if pm != modulus || p.packet.f_share.modulus() != pm || p.packet.g_share.modulus() != pm {
            return Err(ProtocolError::InconsistentPackets(format!(
                "player {} uses mod {pm}, expected mod {modulus}",
                p.id
            )));
        }
        if p.id != p.packet.player_id || p.packet.x.value() != p.id as u64 {
            return Err(ProtocolError::InconsistentPackets(format!(
                "player {} holds a packet for x={}",
                p.id,
                p.packet.x.value()
            )));
        }
        if xs.contains(&p.packet.x) {
            return Err(ProtocolError::InconsistentPackets(format!(
                "duplicate x={}",
                p.packet.x
            )));
        }
        xs.push(p.packet.x);
    }
    Ok((modulus, xs))
}

/// Where a hop sits in the ring. Hop `h` carries `T` from player `h + 1`
/// to player `h + 2`; the last hop returns to player 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopContext {
    pub pass: Pass,
    pub hop: usize,
    pub from: usize,
    pub to: usize,
}

/// Something an adversary learned during one shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub pass: Pass,
    pub hop: Option<usize>,
    pub register: Register,
    pub value: u64,
}

/// An interception point on the channel.
///
/// `in_transit` runs on the hop the tap is installed on, after the sender
/// imprinted its phase and before the receiver does. `after_uncopy` runs
/// for every installed tap once the reconstructor has uncopied `T`.
pub trait Tap: Send + Sync {
    /// Whether the tap needs its own probe register in the joint state.
    fn uses_probe(&self) -> bool {
        false
    }

    fn in_transit(
        &self,
        _ctx: &HopContext,
        state: QuditState,
        _rng: &mut ShotRng,
        _log: &mut Vec<Observation>,
    ) -> Result<QuditState, QuditError> {
        Ok(state)
    }

    fn after_uncopy(
        &self,
        _pass: Pass,
        state: QuditState,
        _rng: &mut ShotRng,
        _log: &mut Vec<Observation>,
    ) -> Result<QuditState, QuditError> {
        Ok(state)
    }
}

/// The authenticated ring `P1 -> P2 -> ... -> Pt -> P1`.
#[derive(Clone, Default)]
pub struct Channel {
    t: usize,
    taps: BTreeMap<usize, Arc<dyn Tap>>,
}

impl fmt::Debug for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Channel")
            .field("t", &self.t)
            .field("tapped_hops", &self.taps.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Channel {
    pub fn honest(t: usize) -> Self {
        Channel {
            t,
            taps: BTreeMap::new(),
        }
    }

    /// Number of hops; a lone reconstructor never transmits.
    pub fn hops(&self) -> usize {
        if self.t <= 1 {
            0
        } else {
            self.t
        }
    }

    pub fn with_tap(mut self, hop: usize, tap: Arc<dyn Tap>) -> Result<Self, ProtocolError> {
        if hop >= self.hops() {
            return Err(ProtocolError::InvalidHop { hop, hops: self.hops() });
        }
        self.taps.insert(hop, tap);
        Ok(self)
    }

    pub fn is_tapped(&self) -> bool {
        !self.taps.is_empty()
    }

    fn uses_probe(&self) -> bool {
        self.taps.values().any(|t| t.uses_probe())
    }
}

/// Seed and stream index of one shot. Each shot draws from its own
/// ChaCha stream so shots can run in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotSeed {
    pub seed: u64,
    pub shot: u64,
}

impl ShotSeed {
    pub fn new(seed: u64, shot: u64) -> Self {
        ShotSeed { seed, shot }
    }

    pub fn rng(self) -> ShotRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.shot);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    AbortAncilla,
    AbortHash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub d: u64,
    pub t: usize,
    pub xs: Vec<u64>,
    pub verdict: Verdict,
    pub f0: Option<u64>,
    pub g0: Option<u64>,
    /// Ancilla outcome of each pass that ran, in order.
    pub ancilla: Vec<u64>,
    pub shots: u64,
    pub seed: u64,
    pub shot: u64,
    pub secret_shadows: Vec<u64>,
    pub hash_shadows: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observations: Vec<Observation>,
}

enum PassOutcome {
    Recovered { ancilla: u64, value: u64 },
    Tampered { ancilla: u64 },
}

fn run_pass(
    set: &ShadowSet,
    pass: Pass,
    channel: &Channel,
    rng: &mut ShotRng,
    log: &mut Vec<Observation>,
) -> Result<PassOutcome, ProtocolError> {
    let shadows = set.shadows(pass);
    let t = shadows.len();
    let d = set.modulus.get() as usize;
    let registers: &[Register] = if channel.uses_probe() {
        &[Register::Home, Register::Transmitted, Register::Adversary]
    } else {
        &[Register::Home, Register::Transmitted]
    };
    let layout = RegisterLayout::new(d, registers)?;
    let mut initial = vec![0; registers.len()];
    initial[0] = shadows[0].value() as usize;
    let mut state = QuditState::basis_state(layout, &initial)?;

    state.apply_qft(Register::Home)?;
    state.apply_copy(Register::Home, Register::Transmitted)?;

    for hop in 0..channel.hops() {
        let to = (hop + 1) % t;
        if let Some(tap) = channel.taps.get(&hop) {
            let ctx = HopContext {
                pass,
                hop,
                from: hop + 1,
                to: to + 1,
            };
            state = tap.in_transit(&ctx, state, rng, log)?;
        }
        if to != 0 {
            state.apply_shadow_phase(Register::Transmitted, shadows[to])?;
        }
    }

    state.apply_copy(Register::Home, Register::Transmitted)?;
    for tap in channel.taps.values() {
        state = tap.after_uncopy(pass, state, rng, log)?;
    }

    let check = state.measure(Register::Transmitted, rng)?;
    let ancilla = check.value as u64;
    if ancilla != 0 {
        return Ok(PassOutcome::Tampered { ancilla });
    }
    let mut state = check.post_state;
    state.apply_iqft(Register::Home)?;
    let value = state.measure(Register::Home, rng)?.value as u64;
    Ok(PassOutcome::Recovered { ancilla, value })
}

/// Runs both passes over precomputed shadows.
pub fn execute(set: &ShadowSet, channel: &Channel, seed: ShotSeed) -> Result<ProtocolTranscript, ProtocolError> {
    let t = set.t();
    if t == 0 {
        return Err(ProtocolError::NoPlayers);
    }
    if channel.t != t {
        return Err(ProtocolError::ChannelMismatch {
            channel: channel.t,
            players: t,
        });
    }
    let mut rng = seed.rng();
    let mut log = Vec::new();
    let mut transcript = ProtocolTranscript {
        d: set.modulus.get(),
        t,
        xs: set.xs.clone(),
        verdict: Verdict::AbortAncilla,
        f0: None,
        g0: None,
        ancilla: Vec::with_capacity(2),
        shots: 1,
        seed: seed.seed,
        shot: seed.shot,
        secret_shadows: set.secret.iter().map(|s| s.value()).collect(),
        hash_shadows: set.hash.iter().map(|s| s.value()).collect(),
        observations: Vec::new(),
    };

    for pass in [Pass::Secret, Pass::Hash] {
        match run_pass(set, pass, channel, &mut rng, &mut log)? {
            PassOutcome::Tampered { ancilla } => {
                transcript.ancilla.push(ancilla);
                transcript.observations = log;
                return Ok(transcript);
            }
            PassOutcome::Recovered { ancilla, value } => {
                transcript.ancilla.push(ancilla);
                match pass {
                    Pass::Secret => transcript.f0 = Some(value),
                    Pass::Hash => transcript.g0 = Some(value),
                }
            }
        }
    }

    let f0 = set.modulus.element(transcript.f0.expect("secret pass completed"));
    let g0 = set.modulus.element(transcript.g0.expect("hash pass completed"));
    transcript.verdict = if verify_hash(f0, g0, set.modulus) {
        Verdict::Accepted
    } else {
        Verdict::AbortHash
    };
    transcript.observations = log;
    Ok(transcript)
}

/// Deals with the players' packets and runs the full reconstruction.
pub fn run_reconstruction(
    players: &[Player],
    channel: &Channel,
    seed: ShotSeed,
) -> Result<ProtocolTranscript, ProtocolError> {
    let set = ShadowSet::from_players(players)?;
    execute(&set, channel, seed)
}

/// The reconstructor's final check: `H(f0) mod d == g0`.
pub fn verify_hash(f0: FieldElement, g0: FieldElement, d: PrimeModulus) -> bool {
    g0.modulus() == d && hash_to_field(f0.value(), d) == g0
}

/// Sum of the players' true shadows, computed classically.
pub fn expected_sum(players: &[Player], pass: Pass) -> Result<FieldElement, ProtocolError> {
    let honest: Vec<Player> = players
        .iter()
        .map(|p| p.clone().with_forgery(ForgedShadows::default()))
        .collect();
    Ok(ShadowSet::from_players(&honest)?.sum(pass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dealer::{deal, DealerConfig};
    use crate::field::interpolate_at_zero;

    fn players(n: usize, t: usize, secret: u64, seed: u64) -> Vec<Player> {
        let deal = deal(&DealerConfig {
            n,
            t,
            secret,
            rng_seed: seed,
            d_override: None,
        })
        .unwrap();
        Player::qualified_subset(&deal.packets[..t])
    }

    #[test]
    fn honest_run_recovers_secret() {
        let ps = players(5, 3, 4, 1);
        let tr = run_reconstruction(&ps, &Channel::honest(3), ShotSeed::new(1, 0)).unwrap();
        assert_eq!(tr.verdict, Verdict::Accepted);
        assert_eq!(tr.f0, Some(4));
        assert_eq!(tr.ancilla, vec![0, 0]);
        assert_eq!(tr.d, 7);
        assert_eq!(tr.xs, vec![1, 2, 3]);
        let h = hash_to_field(4, PrimeModulus::new(7).unwrap()).value();
        assert_eq!(tr.g0, Some(h));
    }

    #[test]
    fn single_player_needs_no_hops() {
        let ps = players(3, 1, 0, 2);
        let ch = Channel::honest(1);
        assert_eq!(ch.hops(), 0);
        let tr = run_reconstruction(&ps, &ch, ShotSeed::new(0, 0)).unwrap();
        assert_eq!(tr.f0, Some(0));
        assert_eq!(tr.verdict, Verdict::Accepted);
    }

    #[test]
    fn shifted_shadow_shifts_result() {
        // d = 5, t = 3: every wrong shadow moves the result by exactly the error.
        let ps = players(4, 3, 2, 9);
        let d = ps[0].packet.modulus();
        let true_set = ShadowSet::from_players(&ps).unwrap();
        let s = true_set.secret[1];
        let g0 = true_set.sum(Pass::Hash);
        let mut detected = 0;
        for fake in d.elements().filter(|&f| f != s) {
            let mut forged = ps.clone();
            forged[1] = forged[1].clone().with_forgery(ForgedShadows {
                secret: Some(fake),
                hash: None,
            });
            let tr = run_reconstruction(&forged, &Channel::honest(3), ShotSeed::new(3, 0)).unwrap();
            let want = d.element(2) + fake - s;
            assert_eq!(tr.f0, Some(want.value()));
            assert_ne!(tr.f0, Some(2));
            let caught = !verify_hash(want, g0, d);
            assert_eq!(tr.verdict == Verdict::AbortHash, caught);
            detected += caught as usize;
        }
        // Secret 2 has a hash residue no other element of Z_5 shares.
        assert_eq!(detected, 4);
    }

    #[test]
    fn hash_check_examples() {
        let d = PrimeModulus::new(7).unwrap();
        let s = d.element(3);
        let h = hash_to_field(3, d);
        assert!(verify_hash(s, h, d));
        assert!(!verify_hash(s, h + d.one(), d));
    }

    #[test]
    fn wrong_guesses_pass_hash_at_rate_one_over_d() {
        use rand::Rng;
        let d = PrimeModulus::new(11).unwrap();
        let secret = d.element(4);
        let g0 = hash_to_field(4, d);
        let mut rng = ShotSeed::new(77, 0).rng();
        let trials = 10_000;
        let mut passed = 0u32;
        let mut wrong = 0u32;
        for _ in 0..trials {
            let f0 = d.element(rng.gen_range(0..11));
            if f0 == secret {
                continue;
            }
            wrong += 1;
            passed += verify_hash(f0, g0, d) as u32;
        }
        // Exact collision count among the ten wrong values.
        let colliding = d
            .elements()
            .filter(|&v| v != secret && hash_to_field(v.value(), d) == g0)
            .count();
        let p = colliding as f64 / 10.0;
        let sigma = (wrong as f64 * p * (1.0 - p)).sqrt().max(1.0);
        assert!((passed as f64 - wrong as f64 * p).abs() < 4.0 * sigma);
    }

    #[test]
    fn expected_sum_matches_interpolation() {
        for seed in 0..20 {
            let ps = players(6, 4, seed % 7, seed);
            let pts: Vec<_> = ps.iter().map(|p| (p.packet.x, p.packet.f_share)).collect();
            let s = expected_sum(&ps, Pass::Secret).unwrap();
            assert_eq!(s, interpolate_at_zero(&pts).unwrap());
            assert_eq!(s.value(), seed % 7);
        }
        assert_eq!(expected_sum(&[], Pass::Secret), Err(ProtocolError::NoPlayers));
    }

    #[test]
    fn hop_order_does_not_matter() {
        let ps = players(6, 4, 5, 12);
        let reference = run_reconstruction(&ps, &Channel::honest(4), ShotSeed::new(0, 0)).unwrap();
        let mut shuffled = ps.clone();
        shuffled[1..].reverse();
        let tr = run_reconstruction(&shuffled, &Channel::honest(4), ShotSeed::new(0, 0)).unwrap();
        assert_eq!(tr.f0, reference.f0);
        assert_eq!(tr.g0, reference.g0);
    }

    #[test]
    fn validation_errors() {
        let ps = players(5, 3, 1, 0);
        let mut roles = ps.clone();
        roles[1].role = Role::Reconstructor;
        assert_eq!(ShadowSet::from_players(&roles), Err(ProtocolError::Roles));

        let mut dup = ps.clone();
        dup[2] = Player::new(dup[1].packet, Role::Participant);
        assert!(matches!(
            ShadowSet::from_players(&dup),
            Err(ProtocolError::InconsistentPackets(_))
        ));

        let other = players(3, 2, 1, 0);
        let mut mixed = ps.clone();
        mixed[2] = Player::new(other[1].packet, Role::Participant);
        assert!(matches!(
            ShadowSet::from_players(&mixed),
            Err(ProtocolError::InconsistentPackets(_))
        ));

        assert_eq!(
            run_reconstruction(&ps, &Channel::honest(2), ShotSeed::new(0, 0)),
            Err(ProtocolError::ChannelMismatch { channel: 2, players: 3 })
        );
        assert!(matches!(
            Channel::honest(3).with_tap(3, Arc::new(NoopTap)),
            Err(ProtocolError::InvalidHop { hop: 3, hops: 3 })
        ));
    }

    struct NoopTap;
    impl Tap for NoopTap {}

    #[test]
    fn noop_tap_leaves_run_unchanged() {
        let ps = players(5, 3, 3, 4);
        let honest = run_reconstruction(&ps, &Channel::honest(3), ShotSeed::new(5, 6)).unwrap();
        let tapped = Channel::honest(3).with_tap(1, Arc::new(NoopTap)).unwrap();
        assert_eq!(run_reconstruction(&ps, &tapped, ShotSeed::new(5, 6)).unwrap(), honest);
    }

    struct Collapse;
    impl Tap for Collapse {
        fn in_transit(
            &self,
            ctx: &HopContext,
            state: QuditState,
            rng: &mut ShotRng,
            log: &mut Vec<Observation>,
        ) -> Result<QuditState, QuditError> {
            let mut state = state;
            state.apply_iqft(Register::Transmitted)?;
            let out = state.measure(Register::Transmitted, rng)?;
            log.push(Observation {
                pass: ctx.pass,
                hop: Some(ctx.hop),
                register: Register::Transmitted,
                value: out.value as u64,
            });
            Ok(out.post_state)
        }
    }

    #[test]
    fn ancilla_abort_skips_hash_pass() {
        let ps = players(4, 2, 1, 0);
        let ch = Channel::honest(2).with_tap(0, Arc::new(Collapse)).unwrap();
        let aborted = (0..200)
            .map(|shot| run_reconstruction(&ps, &ch, ShotSeed::new(8, shot)).unwrap())
            .find(|tr| tr.verdict == Verdict::AbortAncilla)
            .expect("a collapsed ancilla is caught within 200 shots");
        assert_eq!(aborted.ancilla.len(), 1);
        assert_ne!(aborted.ancilla[0], 0);
        assert_eq!(aborted.f0, None);
        assert_eq!(aborted.g0, None);
        assert_eq!(aborted.observations.len(), 1);
    }

    #[test]
    fn transcript_json_field_names() {
        let ps = players(5, 3, 4, 1);
        let tr = run_reconstruction(&ps, &Channel::honest(3), ShotSeed::new(1, 0)).unwrap();
        let v = serde_json::to_value(&tr).unwrap();
        for key in ["d", "t", "xs", "verdict", "f0", "g0", "ancilla", "shots", "seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["verdict"], "accepted");
        assert!(v.get("observations").is_none());
        let back: ProtocolTranscript = serde_json::from_value(v).unwrap();
        assert_eq!(back, tr);
    }
}
