//! Channel taps used by the eavesdropping attacks.

use crate::protocol::{HopContext, Observation, Pass, ShotRng, Tap};
use crate::qudit::{QuditError, QuditState, Register};

use super::ProbeBasis;

/// Measures the transmitted register in transit and forwards whatever is
/// left of it. In the computational basis this is intercept-resend: the
/// collapsed `|m>` is exactly the re-prepared state.
#[derive(Debug, Clone, Copy)]
pub struct MeasureTap {
    pub basis: ProbeBasis,
}

impl Tap for MeasureTap {
    fn in_transit(
        &self,
        ctx: &HopContext,
        mut state: QuditState,
        rng: &mut ShotRng,
        log: &mut Vec<Observation>,
    ) -> Result<QuditState, QuditError> {
        if self.basis == ProbeBasis::Fourier {
            state.apply_iqft(Register::Transmitted)?;
        }
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

/// Copies `T` into a private probe register in transit, then measures the
/// probe once the reconstructor has uncopied.
#[derive(Debug, Clone, Copy, Default)]
pub struct EntangleTap;

impl Tap for EntangleTap {
    fn uses_probe(&self) -> bool {
        true
    }

    fn in_transit(
        &self,
        _ctx: &HopContext,
        mut state: QuditState,
        _rng: &mut ShotRng,
        _log: &mut Vec<Observation>,
    ) -> Result<QuditState, QuditError> {
        state.apply_copy(Register::Transmitted, Register::Adversary)?;
        Ok(state)
    }

    fn after_uncopy(
        &self,
        pass: Pass,
        state: QuditState,
        rng: &mut ShotRng,
        log: &mut Vec<Observation>,
    ) -> Result<QuditState, QuditError> {
        let out = state.measure(Register::Adversary, rng)?;
        log.push(Observation {
            pass,
            hop: None,
            register: Register::Adversary,
            value: out.value as u64,
        });
        Ok(out.post_state)
    }
}
