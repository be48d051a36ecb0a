//! Two players flanking a victim pool what they see of `T`.
//!
//! Player `e - 1` measures `T` as it leaves for the victim `P_e`, and player
//! `e + 1` measures it on arrival. The colluders stay passive otherwise: they
//! never substitute a state of their own for `T`. The joint view is
//! independent of the victim's shadow because the victim only adds a phase
//! that a measurement cannot see.

use std::sync::Arc;

use crate::protocol::{Channel, ShadowSet};

use super::{AttackError, AttackSpec, Eavesdrop, MeasureTap, ProbeBasis};

#[derive(Debug, Clone, Copy, Default)]
pub struct CollusionProbe;

impl CollusionProbe {
    /// The victim's 1-based id. Defaults to the first player whose two
    /// neighbours are both ordinary participants, if there is one.
    fn middle(instance: &ShadowSet, spec: &AttackSpec) -> Result<usize, AttackError> {
        let t = instance.t();
        if t < 3 {
            return Err(AttackError::InvalidSpec(format!(
                "collusion needs a middle player, but t = {t}"
            )));
        }
        let e = spec.target.unwrap_or(if t >= 4 { 3 } else { 2 });
        if !(2..t).contains(&e) {
            return Err(AttackError::InvalidSpec(format!(
                "victim must be between players 2 and {} (got {e})",
                t - 1
            )));
        }
        Ok(e)
    }
}

impl Eavesdrop for CollusionProbe {
    const NAME: &'static str = "collusion_probe";

    fn channel(&self, instance: &ShadowSet, spec: &AttackSpec) -> Result<Channel, AttackError> {
        let e = Self::middle(instance, spec)?;
        let tap = Arc::new(MeasureTap { basis: spec.basis });
        // Hop e - 2 carries T from P_{e-1} to P_e, hop e - 1 from P_e to P_{e+1}.
        Ok(Channel::honest(instance.t())
            .with_tap(e - 2, tap.clone())?
            .with_tap(e - 1, tap)?)
    }

    fn victim(&self, instance: &ShadowSet, spec: &AttackSpec) -> Result<usize, AttackError> {
        Ok(Self::middle(instance, spec)? - 1)
    }

    fn default_hypotheses(&self, d: u64) -> (u64, u64) {
        (0, d - 1)
    }

    fn uniform_categories(&self, spec: &AttackSpec, d: u64) -> Option<u64> {
        // Computational readings repeat the first outcome; Fourier readings
        // are two independent uniform digits.
        match spec.basis {
            ProbeBasis::Computational => None,
            ProbeBasis::Fourier => Some(d * d),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{synthetic_instance, Attack};
    use crate::field::PrimeModulus;
    use crate::stats::within_binomial;

    fn instance(t: usize) -> ShadowSet {
        let shadows: Vec<u64> = (0..t as u64).collect();
        synthetic_instance(PrimeModulus::new(3).unwrap(), &shadows, 5).unwrap()
    }

    #[test]
    fn needs_a_middle_player() {
        let spec = AttackSpec::new(CollusionProbe::NAME, 10, 0);
        assert!(matches!(
            CollusionProbe.run(&instance(2), &spec),
            Err(AttackError::InvalidSpec(_))
        ));
        let spec = spec.target(4);
        assert!(matches!(
            CollusionProbe.run(&instance(4), &spec),
            Err(AttackError::InvalidSpec(_))
        ));
    }

    #[test]
    fn computational_views_agree_with_each_other() {
        let report = CollusionProbe
            .run(&instance(4), &AttackSpec::new(CollusionProbe::NAME, 500, 3))
            .unwrap();
        // Both colluders read the same digit: keys are a*3 + a.
        assert!(report.outcome_histogram.keys().all(|k| k / 3 == k % 3));
        assert_eq!(report.ancilla_failure_rate, 0.0);
        assert_eq!(report.hypotheses, Some((0, 2)));
        assert!(report.chi_square_p.is_none());
    }

    #[test]
    fn fourier_probing_trips_the_ancilla() {
        let spec = AttackSpec::new(CollusionProbe::NAME, 3000, 3).basis(ProbeBasis::Fourier);
        let report = CollusionProbe.run(&instance(4), &spec).unwrap();
        let failures = (report.ancilla_failure_rate * 3000.0).round() as u64;
        assert!(within_binomial(failures, 3000, 2.0 / 3.0, 4.0));
        assert!(report.chi_square_p.unwrap() > 1e-3);
    }
}
