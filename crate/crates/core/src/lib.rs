//! Simulation and attack harness for a `(t, n)`-threshold quantum secret
//! sharing scheme on `d`-level systems.
//!
//! A dealer splits a secret and its SHA-1 hash with Shamir polynomials over
//! `Z_d`; `t` players then recover both by passing a qudit around a ring,
//! each imprinting its Lagrange-weighted share as a phase. The
//! [`adversary`] module replays the known attacks against that ring.

pub mod adversary;
pub mod dealer;
pub mod experiment;
pub mod field;
pub mod protocol;
pub mod qudit;
pub mod shots;
pub mod stats;

pub use dealer::{deal, DealerConfig, SharePacket};
pub use field::{FieldElement, PrimeModulus};
pub use protocol::{run_reconstruction, Channel, Player, ProtocolTranscript, ShotSeed, Verdict};
pub use qudit::{QuditState, Register, RegisterLayout};
