//! Simplified entangle-measure attack.
//!
//! The adversary copies `T` into its own probe register, lets `T` travel
//! on, and measures the probe after the reconstructor's uncopy. This is a
//! single fixed entangling unitary, not a search over all possible ones.

use std::sync::Arc;

use crate::protocol::{Channel, ShadowSet};

use super::{AttackError, AttackSpec, Eavesdrop, EntangleTap};

#[derive(Debug, Clone, Copy, Default)]
pub struct EntangleMeasure;

impl Eavesdrop for EntangleMeasure {
    const NAME: &'static str = "entangle_measure";

    fn channel(&self, instance: &ShadowSet, spec: &AttackSpec) -> Result<Channel, AttackError> {
        let hop = spec.target.unwrap_or(0);
        Ok(Channel::honest(instance.t()).with_tap(hop, Arc::new(EntangleTap))?)
    }

    fn victim(&self, _instance: &ShadowSet, _spec: &AttackSpec) -> Result<usize, AttackError> {
        Ok(0)
    }

    fn default_hypotheses(&self, _d: u64) -> (u64, u64) {
        (0, 1)
    }

    fn uniform_categories(&self, _spec: &AttackSpec, d: u64) -> Option<u64> {
        Some(d)
    }

    fn notes(&self, _spec: &AttackSpec) -> Vec<String> {
        vec!["entangler is a single copy gate from T to the adversary probe".to_string()]
    }
}
