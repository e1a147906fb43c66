//! Monte Carlo checks of the estimator against the exact oracle.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use temporal_triangles::baseline::{match_probability, run_naive};
use temporal_triangles::graph::{check_clean, compute_m_delta, parse_stream};
use temporal_triangles::harness::{gen_random_with, run_trials};
use temporal_triangles::num::{mean, sample_std};
use temporal_triangles::predictor::{build_min_degree, PredictorRequest};
use temporal_triangles::step::run_step;
use temporal_triangles::triangle::enumerate_exact;
use temporal_triangles::{EdgeStream, EstimatorConfig, PredictorSpec, TriangleKind};

fn fixture() -> EdgeStream {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/fix30.txt");
    let s = parse_stream(BufReader::new(File::open(path).unwrap())).unwrap();
    check_clean(&s).unwrap();
    s
}

#[test]
fn fixture_has_many_kinds() {
    let exact = enumerate_exact(&fixture(), 20).unwrap();
    assert_eq!(exact.total(), 70);
    assert!(exact.iter().filter(|(_, c)| *c > 0).count() >= 3);
}

#[test]
fn unbiased_with_predictors() {
    let s = fixture();
    let exact = enumerate_exact(&s, 20).unwrap();
    for spec in ["mindeg:3", "static:5", "noisy:6:2"] {
        let predictor = spec.parse::<PredictorRequest>().unwrap().build(&s, 20, 9).unwrap();
        let cfg = EstimatorConfig::new(20, 0.4, 0, &predictor);
        let runs = 6000;
        let report = run_trials::<f64>(&s, &cfg, runs, 1, Some(&exact)).unwrap();
        for kind in TriangleKind::ALL {
            let truth = exact[kind];
            if truth == 0 {
                continue;
            }
            let xs = report.samples(kind);
            let se = sample_std(&xs) / (runs as f64).sqrt();
            let gap = (mean(&xs) - truth as f64).abs();
            assert!(gap <= 4.0 * se, "{spec} {kind}: mean {} vs {truth}, se {se}", mean(&xs));
        }
    }
}

#[test]
fn memory_proxy_follows_sampling_rate() {
    // Uniform endpoints over many nodes: few triangles, steady window occupancy.
    let s = gen_random_with(5_000, 20_000, 100_000, 4, 0.0).unwrap();
    let delta = 10_000;
    let m_delta = compute_m_delta(&s, delta).unwrap();
    assert!(m_delta > 1_500, "m_delta = {m_delta}");
    let never = PredictorSpec::never();
    for p in [0.5, 0.2] {
        let peaks: Vec<f64> = (0..20)
            .map(|seed| {
                let run = run_step::<f64>(&s, &EstimatorConfig::new(delta, p, seed, &never)).unwrap();
                assert!(run.stats.peak_live_edges <= m_delta);
                run.stats.peak_live_edges as f64
            })
            .collect();
        assert!(mean(&peaks) <= 1.2 * p * m_delta as f64, "p = {p}: {} vs m_delta {m_delta}", mean(&peaks));
    }
}

#[test]
fn matched_rate_retains_as_many_edges() {
    let s = gen_random_with(2_000, 5_000, 50_000, 8, 1.0).unwrap();
    let (delta, p, k) = (500, 0.1, 50);
    let (predictor, _) = build_min_degree(&s, delta, k).unwrap();
    let p_tilde = match_probability(p, k, s.m()).unwrap();
    let seeds = 0..200u64;
    let step: Vec<f64> = seeds
        .clone()
        .map(|seed| {
            let cfg = EstimatorConfig::new(delta, p, seed, &predictor);
            run_step::<f64>(&s, &cfg).unwrap().stats.retained as f64
        })
        .collect();
    let naive: Vec<f64> =
        seeds.map(|seed| run_naive::<f64>(&s, delta, p_tilde, seed).unwrap().stats.retained as f64).collect();
    let expected = p * (s.m() - k) as f64 + k as f64;
    let (a, b) = (mean(&step), mean(&naive));
    assert!((a - expected).abs() <= 0.02 * expected, "step retained {a}, expected {expected}");
    assert!((b - expected).abs() <= 0.02 * expected, "naive retained {b}, expected {expected}");
}

#[test]
fn runs_are_reproducible() {
    let s = gen_random_with(50, 2_000, 5_000, 2, 1.0).unwrap();
    let predictor = "hybrid:20".parse::<PredictorRequest>().unwrap().build(&s, 100, 0).unwrap();
    let cfg = EstimatorConfig::new(100, 0.3, 77, &predictor);
    let a = run_step::<f64>(&s, &cfg).unwrap();
    let b = run_step::<f64>(&s, &cfg).unwrap();
    assert_eq!(a.estimates.0.map(f64::to_bits), b.estimates.0.map(f64::to_bits));
    assert_eq!(a.counters, b.counters);
    assert!(a.stats.same_counts(&b.stats));
}
