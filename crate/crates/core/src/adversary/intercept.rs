//! Intercept attacks on a single hop.

use std::sync::Arc;

use crate::protocol::{Channel, ShadowSet};

use super::{AttackError, AttackSpec, Eavesdrop, MeasureTap, ProbeBasis};

fn tapped(instance: &ShadowSet, spec: &AttackSpec, basis: ProbeBasis) -> Result<Channel, AttackError> {
    let hop = spec.target.unwrap_or(0);
    Ok(Channel::honest(instance.t()).with_tap(hop, Arc::new(MeasureTap { basis }))?)
}

/// Measures `T` in the computational basis on one hop and resends the
/// collapsed state. The outcome is uniform and independent of the
/// reconstructor's shadow; the ancilla check cannot see it because `H`
/// collapses along with `T`, but the recovered value becomes random.
#[derive(Debug, Clone, Copy, Default)]
pub struct InterceptResend;

impl Eavesdrop for InterceptResend {
    const NAME: &'static str = "intercept_resend";

    fn channel(&self, instance: &ShadowSet, spec: &AttackSpec) -> Result<Channel, AttackError> {
        tapped(instance, spec, ProbeBasis::Computational)
    }

    fn victim(&self, _instance: &ShadowSet, _spec: &AttackSpec) -> Result<usize, AttackError> {
        Ok(0)
    }

    fn default_hypotheses(&self, _d: u64) -> (u64, u64) {
        (1, 3)
    }

    fn uniform_categories(&self, _spec: &AttackSpec, d: u64) -> Option<u64> {
        Some(d)
    }
}

/// Applies an inverse QFT to `T` before measuring, hoping to read the
/// reconstructor's shadow back out. Since `T` is entangled with `H` its
/// marginal is maximally mixed, so the outcome is uniform. The collapsed
/// `T` no longer matches `H`, and the ancilla check fails with
/// probability `(d - 1) / d`.
#[derive(Debug, Clone, Copy, Default)]
pub struct InterceptIqft;

impl Eavesdrop for InterceptIqft {
    const NAME: &'static str = "intercept_iqft";

    fn channel(&self, instance: &ShadowSet, spec: &AttackSpec) -> Result<Channel, AttackError> {
        tapped(instance, spec, ProbeBasis::Fourier)
    }

    fn victim(&self, _instance: &ShadowSet, _spec: &AttackSpec) -> Result<usize, AttackError> {
        Ok(0)
    }

    fn default_hypotheses(&self, d: u64) -> (u64, u64) {
        (0, d - 1)
    }

    fn uniform_categories(&self, _spec: &AttackSpec, d: u64) -> Option<u64> {
        Some(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{synthetic_instance, Attack};
    use crate::field::PrimeModulus;
    use crate::protocol::{execute, ShotSeed, Verdict};
    use crate::qudit::{QuditState, Register, RegisterLayout};
    use crate::stats::within_binomial;
    use approx::assert_abs_diff_eq;

    fn instance(d: u64, shadows: &[u64]) -> ShadowSet {
        synthetic_instance(PrimeModulus::new(d).unwrap(), shadows, 1).unwrap()
    }

    #[test]
    fn transmitted_marginal_is_maximally_mixed() {
        // Oracle: after QFT and copy the T marginal is |amp|^2 = 1/d for
        // every value, and an inverse QFT on T alone keeps it at 1/d.
        for d in [2usize, 3, 5, 7] {
            for s1 in 0..d {
                let layout = RegisterLayout::new(d, &[Register::Home, Register::Transmitted]).unwrap();
                let mut st = QuditState::basis_state(layout, &[s1, 0]).unwrap();
                st.apply_qft(Register::Home).unwrap();
                st.apply_copy(Register::Home, Register::Transmitted).unwrap();
                for p in st.marginal(Register::Transmitted).unwrap() {
                    assert_abs_diff_eq!(p, 1.0 / d as f64, epsilon = 1e-12);
                }
                st.apply_iqft(Register::Transmitted).unwrap();
                for p in st.marginal(Register::Transmitted).unwrap() {
                    assert_abs_diff_eq!(p, 1.0 / d as f64, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn qubit_ancilla_failure_by_hand() {
        // d = 2, shadow s: (|00> + (-1)^s |11>)/sqrt2. Hadamard on T gives
        // (1/2) sum_{k,l} (-1)^{s k + k l} |k l>. Measuring T = l leaves H in
        // (|0> + (-1)^{s+l}|1>)/sqrt2 with T = |l>. The uncopy maps |k l> to
        // |k, k xor l>, whose T part is 0 only for k = l: probability 1/2.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for s in 0..2i32 {
            for l in 0..2i32 {
                let home = [h, h * (-1f64).powi(s + l)];
                let fail: f64 = (0..2).filter(|&k| k != l).map(|k| home[k as usize].powi(2)).sum();
                assert_abs_diff_eq!(fail, 0.5, epsilon = 1e-12);
            }
        }
        // Same number from the simulator, exactly.
        let layout = RegisterLayout::new(2, &[Register::Home, Register::Transmitted]).unwrap();
        let mut st = QuditState::basis_state(layout, &[1, 0]).unwrap();
        st.apply_qft(Register::Home).unwrap();
        st.apply_copy(Register::Home, Register::Transmitted).unwrap();
        st.apply_iqft(Register::Transmitted).unwrap();
        let collapsed = st
            .measure(Register::Transmitted, &mut ShotSeed::new(0, 0).rng())
            .unwrap()
            .post_state;
        let mut after = collapsed;
        after.apply_copy(Register::Home, Register::Transmitted).unwrap();
        assert_abs_diff_eq!(after.marginal(Register::Transmitted).unwrap()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn resend_is_invisible_to_the_ancilla_check() {
        let set = instance(5, &[1, 2, 3]);
        let spec = AttackSpec::new(InterceptResend::NAME, 2000, 4);
        let report = InterceptResend.run(&set, &spec).unwrap();
        assert_eq!(report.ancilla_failure_rate, 0.0);
        assert_eq!(report.outcome_histogram.values().sum::<u64>(), 2000);
        // The recovered value is uniform, so the hash check catches most shots.
        assert!(report.detection_rate > 0.5);
        assert!(report.leakage.unwrap() < 0.08);
    }

    #[test]
    fn iqft_tap_trips_the_ancilla() {
        let set = instance(3, &[2, 1]);
        let spec = AttackSpec::new(InterceptIqft::NAME, 3000, 8);
        let report = InterceptIqft.run(&set, &spec).unwrap();
        let failures = (report.ancilla_failure_rate * 3000.0).round() as u64;
        assert!(within_binomial(failures, 3000, 2.0 / 3.0, 4.0));
        assert!(report.chi_square_p.unwrap() > 1e-3);
    }

    #[test]
    fn disabled_attack_is_the_honest_run() {
        let set = instance(5, &[4, 0, 2]);
        let spec = AttackSpec::new(InterceptResend::NAME, 10, 6).disabled();
        for shot in 0..10 {
            let honest = execute(&set, &Channel::honest(3), ShotSeed::new(6, shot)).unwrap();
            assert_eq!(InterceptResend.shot(&set, &spec, shot).unwrap(), honest);
            assert_eq!(InterceptIqft.shot(&set, &spec, shot).unwrap(), honest);
            assert_eq!(honest.verdict, Verdict::Accepted);
        }
        let report = InterceptResend.run(&set, &spec).unwrap();
        assert_eq!(report.detection_rate, 0.0);
        assert!(report.outcome_histogram.is_empty());
    }

    #[test]
    fn hop_out_of_range() {
        let set = instance(5, &[4, 0, 2]);
        let spec = AttackSpec::new(InterceptResend::NAME, 10, 6).target(3);
        assert!(InterceptResend.run(&set, &spec).is_err());
    }
}
