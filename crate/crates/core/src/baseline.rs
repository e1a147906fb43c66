//! The no-predictor sampling baseline and memory-matched sampling rates.

use crate::error::{Error, Result};
use crate::graph::{EdgeStream, TimeDelta};
use crate::num::Scalar;
use crate::predictor::PredictorSpec;
use crate::step::{run_step, EstimatorConfig, StepRun};

/// A sampling rate for the baseline chosen to retain, in expectation, as many
/// edges as the predictor-guided run it is compared against.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MatchedConfig {
    pub p_tilde: f64,
    /// Expected number of edges retained over the whole stream, `p (m - K) + K`.
    pub expected_retained: f64,
}

/// `p~ = (p (m - K) + K) / m`, capped at 1.
pub fn match_probability(p: f64, k: usize, m: usize) -> Result<f64> {
    Ok(matched_config(p, k, m)?.p_tilde)
}

pub fn matched_config(p: f64, k: usize, m: usize) -> Result<MatchedConfig> {
    if m == 0 {
        return Err(Error::arg("cannot match probabilities on an empty stream"));
    }
    if k > m {
        return Err(Error::arg(format!("K = {k} exceeds m = {m}")));
    }
    check_p(p)?;
    let expected_retained = p * (m - k) as f64 + k as f64;
    Ok(MatchedConfig { p_tilde: (expected_retained / m as f64).min(1.0), expected_retained })
}

/// Same as [`match_probability`] with the heavy fraction `K / m` given directly.
pub fn match_probability_frac(p: f64, k_frac: f64) -> Result<f64> {
    check_p(p)?;
    if !(0.0..=1.0).contains(&k_frac) {
        return Err(Error::arg(format!("heavy fraction must lie in [0, 1], got {k_frac}")));
    }
    Ok((p * (1.0 - k_frac) + k_frac).min(1.0))
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::arg(format!("p must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// The estimator with every edge classified light, sampled at `p_tilde`.
pub fn run_naive<T: Scalar>(stream: &EdgeStream, delta: TimeDelta, p_tilde: f64, seed: u64) -> Result<StepRun<T>> {
    let never = PredictorSpec::never();
    run_step(stream, &EstimatorConfig::new(delta, p_tilde, seed, &never))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::step::Bank;
    use crate::triangle::enumerate_exact;
    use proptest::prelude::*;

    fn round4(x: f64) -> f64 {
        (x * 1e4).round() / 1e4
    }

    #[test]
    fn reported_matched_rates() {
        assert_eq!(round4(match_probability(0.1, 1_000, 100_000).unwrap()), 0.109);
        assert_eq!(round4(match_probability(0.01, 1_000, 100_000).unwrap()), 0.0199);
        assert_eq!(round4(match_probability_frac(0.1, 0.01).unwrap()), 0.109);
        assert_eq!(round4(match_probability_frac(0.01, 0.01).unwrap()), 0.0199);
    }

    #[test]
    fn no_heavy_edges_keeps_p() {
        assert_eq!(match_probability(0.3, 0, 50).unwrap(), 0.3);
        assert_eq!(match_probability(0.3, 50, 50).unwrap(), 1.0);
        assert!(match_probability(0.3, 0, 0).is_err());
        assert!(match_probability(0.0, 0, 10).is_err());
        assert!(match_probability(0.5, 11, 10).is_err());
        assert_eq!(matched_config(0.5, 2, 10).unwrap().expected_retained, 6.0);
    }

    #[test]
    fn naive_at_full_rate_is_exact() {
        let s = EdgeStream::from_triples([(0, 1, 1), (1, 2, 2), (2, 0, 3), (0, 2, 4), (1, 0, 5)]);
        let run = run_naive::<f64>(&s, 10, 1.0, 3).unwrap();
        assert_eq!(run.estimates, enumerate_exact(&s, 10).unwrap().map(|c| c as f64));
    }

    proptest! {
        #[test]
        fn monotone_in_p_and_k(p in 0.01f64..1.0, dp in 0.0f64..0.5, k in 0usize..100, dk in 0usize..100) {
            let m = 250;
            let base = match_probability(p, k, m).unwrap();
            prop_assert!(match_probability((p + dp).min(1.0), k, m).unwrap() >= base);
            prop_assert!(match_probability(p, k + dk, m).unwrap() >= base);
            prop_assert!(base > 0.0 && base <= 1.0);
        }

        #[test]
        fn naive_equals_never_predictor_run(seed in any::<u64>(), p in 0.05f64..1.0) {
            let s = EdgeStream::from_triples((0..40u64).map(|i| (i % 5, (i * 2 + 1) % 5, i as i64)));
            let s = crate::graph::preprocess(s).0;
            let a = run_naive::<f64>(&s, 6, p, seed).unwrap();
            let never = PredictorSpec::never();
            let b = run_step::<f64>(&s, &EstimatorConfig::new(6, p, seed, &never)).unwrap();
            prop_assert_eq!(a.estimates.0.map(f64::to_bits), b.estimates.0.map(f64::to_bits));
            prop_assert!(a.counters.bank(Bank::HeavyLight).iter().all(|&c| c == 0));
            prop_assert!(a.counters.bank(Bank::HeavyHeavy).iter().all(|&c| c == 0));
        }
    }
}
