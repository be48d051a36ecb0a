//! Histogram statistics for the attack reports.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

pub type Histogram = BTreeMap<u64, u64>;

pub fn histogram<I: IntoIterator<Item = u64>>(values: I) -> Histogram {
    let mut h = Histogram::new();
    for v in values {
        *h.entry(v).or_default() += 1;
    }
    h
}

pub fn total(h: &Histogram) -> u64 {
    h.values().sum()
}

/// Pearson chi-square test against the uniform distribution on
/// `0..categories`. Returns the p-value.
pub fn chi_square_uniform(h: &Histogram, categories: u64) -> f64 {
    assert!(categories >= 2, "need at least two categories");
    let n = total(h) as f64;
    let expected = n / categories as f64;
    let stat: f64 = (0..categories)
        .map(|k| {
            let observed = *h.get(&k).unwrap_or(&0) as f64;
            (observed - expected).powi(2) / expected
        })
        .sum();
    let dist = ChiSquared::new((categories - 1) as f64).expect("positive degrees of freedom");
    dist.sf(stat)
}

/// Total-variation distance between two empirical distributions.
pub fn tv_distance(a: &Histogram, b: &Histogram) -> f64 {
    let (na, nb) = (total(a) as f64, total(b) as f64);
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { 1.0 };
    }
    let keys: std::collections::BTreeSet<&u64> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let pa = *a.get(k).unwrap_or(&0) as f64 / na;
            let pb = *b.get(k).unwrap_or(&0) as f64 / nb;
            (pa - pb).abs()
        })
        .sum::<f64>()
        / 2.0
}

/// True when `count` successes out of `trials` lie within `sigmas`
/// binomial standard deviations of `p`.
pub fn within_binomial(count: u64, trials: u64, p: f64, sigmas: f64) -> bool {
    let mean = trials as f64 * p;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    if sd == 0.0 {
        return count as f64 == mean;
    }
    (count as f64 - mean).abs() <= sigmas * sd
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tv_examples() {
        let a = histogram([0, 0, 1, 1]);
        let b = histogram([0, 1, 1, 1]);
        assert_abs_diff_eq!(tv_distance(&a, &b), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(tv_distance(&a, &a), 0.0);
        let c = histogram([2, 2]);
        assert_abs_diff_eq!(tv_distance(&a, &c), 1.0);
    }

    #[test]
    fn chi_square_known_values() {
        // Perfectly uniform counts: statistic 0, p = 1.
        let h: Histogram = (0..5).map(|k| (k, 100)).collect();
        assert_abs_diff_eq!(chi_square_uniform(&h, 5), 1.0, epsilon = 1e-12);
        // Two categories, 60/40 of 100: statistic 4, 1 dof -> p = 0.0455.
        let h: Histogram = [(0, 60), (1, 40)].into_iter().collect();
        assert_abs_diff_eq!(chi_square_uniform(&h, 2), 0.045_500_263_896_358_4, epsilon = 1e-9);
        // A missing category counts as zero.
        let h: Histogram = [(0, 50)].into_iter().collect();
        assert!(chi_square_uniform(&h, 2) < 1e-6);
    }

    #[test]
    fn binomial_window() {
        assert!(within_binomial(500, 1000, 0.5, 4.0));
        assert!(!within_binomial(600, 1000, 0.5, 4.0));
        assert!(within_binomial(0, 10, 0.0, 4.0));
        assert!(!within_binomial(1, 10, 0.0, 4.0));
    }
}
