//! Experiment plumbing: seeded multi-run trials, error metrics, predictor
//! correlation, stream splitting and synthetic stream generators.

use std::collections::{HashMap, HashSet};

use log::warn;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{preprocess, EdgeStream, NodeId, TemporalEdge, TimeDelta, Timestamp};
use crate::num::{mean, sample_std, Scalar};
use crate::predictor::RankedEdges;
use crate::step::{run_step, EstimatorConfig, StepRun};
use crate::triangle::{CountVector, TriangleKind};

/// Accuracy summary for one triangle kind.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KindReport<T> {
    pub kind: u8,
    pub exact: Option<u64>,
    pub mean_estimate: T,
    /// Sample standard deviation of the raw estimates.
    pub estimate_std: T,
    /// Mean relative error `|c - exact| / exact`; `None` when `exact` is zero or unknown.
    pub mae: Option<T>,
    /// Sample standard deviation of the relative errors.
    pub std: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialConfig {
    pub delta: TimeDelta,
    pub p: f64,
    pub base_seed: u64,
    pub predictor: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MemorySummary {
    pub mean_peak_live_edges: f64,
    pub max_peak_live_edges: usize,
    pub mean_peak_heavy: f64,
    pub mean_elapsed_ms: f64,
}

/// Aggregate of independent seeded runs on one stream.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport<T> {
    pub per_kind: Vec<KindReport<T>>,
    pub runs: usize,
    /// Set when `runs == 1`; spreads are then reported as zero.
    pub single_run: bool,
    pub config: TrialConfig,
    pub memory: MemorySummary,
    /// Per-run estimates in seed order.
    #[serde(skip)]
    pub estimates: Vec<CountVector<T>>,
}

impl<T: Scalar> TrialReport<T> {
    pub fn kind(&self, kind: TriangleKind) -> &KindReport<T> {
        &self.per_kind[kind.index()]
    }

    /// Estimates of one kind across runs.
    pub fn samples(&self, kind: TriangleKind) -> Vec<T> {
        self.estimates.iter().map(|c| c[kind]).collect()
    }
}

/// Runs the estimator with seeds `base_seed .. base_seed + runs` and
/// summarizes the estimates against `exact` when it is known.
pub fn run_trials<T: Scalar>(
    stream: &EdgeStream,
    cfg: &EstimatorConfig<'_>,
    runs: usize,
    base_seed: u64,
    exact: Option<&CountVector<u64>>,
) -> Result<TrialReport<T>> {
    if runs == 0 {
        return Err(Error::arg("runs must be at least 1"));
    }
    let results: Vec<StepRun<T>> = (0..runs as u64)
        .into_par_iter()
        .map(|i| run_step(stream, &cfg.with_seed(base_seed.wrapping_add(i))))
        .collect::<Result<_>>()?;
    Ok(summarize(&results, cfg, base_seed, exact))
}

fn summarize<T: Scalar>(
    results: &[StepRun<T>],
    cfg: &EstimatorConfig<'_>,
    base_seed: u64,
    exact: Option<&CountVector<u64>>,
) -> TrialReport<T> {
    let runs = results.len();
    let per_kind = TriangleKind::ALL
        .iter()
        .map(|&kind| {
            let xs: Vec<T> = results.iter().map(|r| r.estimates[kind]).collect();
            let truth = exact.map(|c| c[kind]);
            let rel: Option<Vec<T>> = truth.filter(|&x| x > 0).map(|x| {
                let x = T::from_count(x);
                xs.iter().map(|&c| (c - x).abs() / x).collect()
            });
            KindReport {
                kind: kind.code(),
                exact: truth,
                mean_estimate: mean(&xs),
                estimate_std: sample_std(&xs),
                mae: rel.as_ref().map(|r| mean(r)),
                std: rel.as_ref().map(|r| sample_std(r)),
            }
        })
        .collect();
    let peaks: Vec<f64> = results.iter().map(|r| r.stats.peak_live_edges as f64).collect();
    let heavy: Vec<f64> = results.iter().map(|r| r.stats.peak_heavy as f64).collect();
    let ms: Vec<f64> = results.iter().map(|r| r.stats.elapsed.as_secs_f64() * 1e3).collect();
    TrialReport {
        per_kind,
        runs,
        single_run: runs == 1,
        config: TrialConfig { delta: cfg.delta, p: cfg.p, base_seed, predictor: cfg.predictor.describe() },
        memory: MemorySummary {
            mean_peak_live_edges: mean(&peaks),
            max_peak_live_edges: results.iter().map(|r| r.stats.peak_live_edges).max().unwrap_or(0),
            mean_peak_heavy: mean(&heavy),
            mean_elapsed_ms: mean(&ms),
        },
        estimates: results.iter().map(|r| r.estimates).collect(),
    }
}

/// Agreement between the perfect top-K and a predicted heavy set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    /// `|P ∩ Q| / |P ∪ Q|`.
    pub jaccard: f64,
    /// `|P ∩ Q| / |Q|`; `None` when the predicted set `Q` is empty.
    pub v_metric: Option<f64>,
    pub k_perfect: usize,
    pub k_predicted: usize,
}

pub fn correlation(perfect: &RankedEdges, predicted: &HashSet<u64>, k: usize) -> Result<CorrelationReport> {
    if k == 0 {
        return Err(Error::arg("correlation needs K >= 1"));
    }
    let top = perfect.top_k(k);
    let inter = top.intersection(predicted).count();
    let union = top.len() + predicted.len() - inter;
    Ok(CorrelationReport {
        jaccard: if union == 0 { 0.0 } else { inter as f64 / union as f64 },
        v_metric: (!predicted.is_empty()).then(|| inter as f64 / predicted.len() as f64),
        k_perfect: top.len(),
        k_predicted: predicted.len(),
    })
}

/// Splits into the first `floor(fraction * m)` edges and the rest, keeping idx.
pub fn split_stream(stream: &EdgeStream, fraction: f64) -> Result<(EdgeStream, EdgeStream)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::arg(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let cut = (fraction * stream.m() as f64).floor() as usize;
    if cut == 0 {
        warn!("split leaves the training stream empty (m = {})", stream.m());
    }
    let (train, test) = stream.edges().split_at(cut);
    Ok((EdgeStream::from_edges(train.to_vec()), EdgeStream::from_edges(test.to_vec())))
}

/// Exponent of the node-popularity law used by [`gen_random`].
pub const DEFAULT_ZIPF_EXPONENT: f64 = 1.0;

/// Random stream with Zipf-distributed endpoints and uniform timestamps in
/// `[0, horizon]`, returned preprocessed.
pub fn gen_random(n: usize, m: usize, horizon: Timestamp, seed: u64) -> Result<EdgeStream> {
    gen_random_with(n, m, horizon, seed, DEFAULT_ZIPF_EXPONENT)
}

/// [`gen_random`] with an explicit popularity exponent (0 gives uniform endpoints).
///
/// Draws that would repeat an edge already placed at the same timestamp are
/// retried; after a bounded number of failures the edge is dropped, so very
/// dense requests can come back with fewer than `m` edges.
pub fn gen_random_with(n: usize, m: usize, horizon: Timestamp, seed: u64, exponent: f64) -> Result<EdgeStream> {
    if n < 3 {
        return Err(Error::arg(format!("need at least 3 nodes, got {n}")));
    }
    if m == 0 {
        return Err(Error::arg("need at least one edge"));
    }
    if horizon < 0 {
        return Err(Error::arg(format!("horizon must be non-negative, got {horizon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zipf = Zipf::new(n as f64, exponent).map_err(|e| Error::arg(format!("zipf: {e}")))?;
    let draw = |rng: &mut ChaCha8Rng| zipf.sample(rng) as NodeId - 1;

    let mut times: Vec<Timestamp> = (0..m).map(|_| rng.random_range(0..=horizon)).collect();
    times.sort_unstable();

    const MAX_TRIES: usize = 64;
    let mut edges = Vec::with_capacity(m);
    let mut group: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut group_t = None;
    for t in times {
        if group_t != Some(t) {
            group.clear();
            group_t = Some(t);
        }
        for _ in 0..MAX_TRIES {
            let (u, v) = (draw(&mut rng), draw(&mut rng));
            if u != v && group.insert((u, v)) {
                edges.push(TemporalEdge::new(u, v, t, edges.len() as u64));
                break;
            }
        }
    }
    Ok(preprocess(EdgeStream::from_edges(edges)).0)
}

/// Sampling sizes for [`augment_bipartite`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugmentParams {
    /// First-hop neighbours sampled per node.
    pub neighbors: usize,
    /// Second-hop neighbours sampled per first-hop neighbour.
    pub second_hop: usize,
    /// Wedges closed per node.
    pub wedges: usize,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams { neighbors: 8, second_hop: 8, wedges: 16 }
    }
}

fn sample_up_to<R: Rng>(rng: &mut R, pool: &[NodeId], k: usize) -> Vec<NodeId> {
    if pool.len() <= k {
        return pool.to_vec();
    }
    sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
}

fn pair_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Adds triangle-closing edges to a (typically bipartite) temporal graph.
///
/// For every node `v`, sample neighbours `x`, then neighbours `y != v` of each
/// `x`, then a uniform set of temporal wedges `(v, x, t1), (x, y, t2)` over
/// those choices. Each wedge gets a closing edge `v -> y` or `y -> v` (fair
/// coin) at a uniform time between `t1` and `t2`. The result is preprocessed.
pub fn augment_bipartite(stream: &EdgeStream, seed: u64, params: AugmentParams) -> Result<EdgeStream> {
    let mut edges = stream.edges().to_vec();
    edges.extend(closing_edges(stream, seed, params)?);
    Ok(preprocess(EdgeStream::from_edges(edges)).0)
}

/// The edges [`augment_bipartite`] adds, in the input's node ids and before
/// preprocessing. Their idx values continue after the input's largest idx.
pub fn closing_edges(stream: &EdgeStream, seed: u64, params: AugmentParams) -> Result<Vec<TemporalEdge>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nbrs: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    let mut times: HashMap<(NodeId, NodeId), Vec<Timestamp>> = HashMap::new();
    for e in stream {
        if e.is_self_loop() {
            continue;
        }
        nbrs.entry(e.src).or_default().push(e.dst);
        nbrs.entry(e.dst).or_default().push(e.src);
        times.entry(e.pair()).or_default().push(e.t);
    }
    for list in nbrs.values_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let mut nodes: Vec<NodeId> = nbrs.keys().copied().collect();
    nodes.sort_unstable();

    let mut edges = Vec::new();
    let mut next_idx = stream.edges().iter().map(|e| e.idx + 1).max().unwrap_or(0);
    for &v in &nodes {
        let xs = sample_up_to(&mut rng, &nbrs[&v], params.neighbors);
        // Candidate (x, y) choices, weighted by their number of temporal wedges.
        let mut combos: Vec<(&[Timestamp], &[Timestamp], NodeId)> = Vec::new();
        let mut offsets: Vec<u128> = Vec::new();
        let mut total: u128 = 0;
        for &x in &xs {
            let pool: Vec<NodeId> = nbrs[&x].iter().copied().filter(|&y| y != v).collect();
            for y in sample_up_to(&mut rng, &pool, params.second_hop) {
                let (t1s, t2s) = (&times[&pair_key(v, x)], &times[&pair_key(x, y)]);
                offsets.push(total);
                total += (t1s.len() * t2s.len()) as u128;
                combos.push((t1s, t2s, y));
            }
        }
        if total == 0 {
            continue;
        }
        let total = usize::try_from(total).map_err(|_| Error::arg("wedge pool too large"))?;
        let picks = sample(&mut rng, total, params.wedges.min(total));
        for w in picks {
            let w = w as u128;
            let c = offsets.partition_point(|&o| o <= w) - 1;
            let (t1s, t2s, y) = combos[c];
            let local = (w - offsets[c]) as usize;
            let (t1, t2) = (t1s[local / t2s.len()], t2s[local % t2s.len()]);
            let t3 = rng.random_range(t1.min(t2)..=t1.max(t2));
            let (src, dst) = if rng.random::<bool>() { (v, y) } else { (y, v) };
            edges.push(TemporalEdge::new(src, dst, t3, next_idx));
            next_idx += 1;
        }
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{check_clean, validate_sorted};
    use crate::predictor::{PredictorSpec, RankedEdges};
    use crate::triangle::enumerate_exact;

    #[test]
    fn full_rate_trials_have_zero_error() {
        let s = gen_random(5, 40, 30, 7).unwrap();
        let exact = enumerate_exact(&s, 10).unwrap();
        assert!(exact.total() > 0);
        let never = PredictorSpec::never();
        let cfg = EstimatorConfig::new(10, 1.0, 0, &never);
        let r = run_trials::<f64>(&s, &cfg, 3, 100, Some(&exact)).unwrap();
        assert_eq!(r.runs, 3);
        for k in r.per_kind.iter() {
            match k.exact {
                Some(0) => assert!(k.mae.is_none() && k.std.is_none()),
                Some(_) => assert_eq!((k.mae, k.std), (Some(0.0), Some(0.0))),
                None => unreachable!(),
            }
        }
    }

    #[test]
    fn single_run_is_flagged() {
        let s = gen_random(5, 40, 30, 7).unwrap();
        let never = PredictorSpec::never();
        let cfg = EstimatorConfig::new(10, 0.5, 0, &never);
        let exact = enumerate_exact(&s, 10).unwrap();
        let r = run_trials::<f64>(&s, &cfg, 1, 5, Some(&exact)).unwrap();
        assert!(r.single_run);
        assert!(r.per_kind.iter().all(|k| k.std.unwrap_or(0.0) == 0.0));
        let raw = run_trials::<f64>(&s, &cfg, 2, 5, None).unwrap();
        assert!(raw.per_kind.iter().all(|k| k.mae.is_none() && k.exact.is_none()));
        assert!(run_trials::<f64>(&s, &cfg, 0, 5, None).is_err());
    }

    #[test]
    fn aggregation_ignores_run_order() {
        let s = gen_random(6, 60, 40, 3).unwrap();
        let never = PredictorSpec::never();
        let cfg = EstimatorConfig::new(15, 0.5, 0, &never);
        let exact = enumerate_exact(&s, 15).unwrap();
        let r = run_trials::<f64>(&s, &cfg, 8, 10, Some(&exact)).unwrap();
        let mut runs: Vec<StepRun<f64>> = (10..18).map(|seed| run_step(&s, &cfg.with_seed(seed)).unwrap()).collect();
        runs.reverse();
        let reversed = summarize(&runs, &cfg, 10, Some(&exact));
        for (a, b) in r.per_kind.iter().zip(&reversed.per_kind) {
            assert!((a.mean_estimate - b.mean_estimate).abs() < 1e-9);
            assert_eq!(a.mae.is_some(), b.mae.is_some());
            if let (Some(x), Some(y)) = (a.mae, b.mae) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn correlation_examples() {
        let r = RankedEdges::new(&[0, 1, 2, 3, 4, 5], &[9, 8, 7, 3, 2, 1]);
        for k in 1..=6 {
            let c = correlation(&r, &r.top_k(k), k).unwrap();
            assert_eq!((c.jaccard, c.v_metric), (1.0, Some(1.0)));
        }
        let disjoint: HashSet<u64> = [4, 5].into();
        let c = correlation(&r, &disjoint, 2).unwrap();
        assert_eq!((c.jaccard, c.v_metric), (0.0, Some(0.0)));
        let c = correlation(&r, &HashSet::new(), 2).unwrap();
        assert_eq!(c.v_metric, None);
        assert!(correlation(&r, &disjoint, 0).is_err());

        let partial: HashSet<u64> = [1, 2, 5].into();
        let c = correlation(&r, &partial, 3).unwrap();
        // top-3 = {0,1,2}; intersection 2, union 4.
        assert_eq!(c.jaccard, 0.5);
        assert_eq!(c.v_metric, Some(2.0 / 3.0));
    }

    #[test]
    fn split_examples() {
        let s = EdgeStream::from_triples((0..100u64).map(|i| (i, i + 1, i as i64)));
        let (train, test) = split_stream(&s, 0.75).unwrap();
        assert_eq!((train.m(), test.m()), (75, 25));
        let mut joined = train.edges().to_vec();
        joined.extend_from_slice(test.edges());
        assert_eq!(joined, s.edges());
        assert!(validate_sorted(&train) && validate_sorted(&test));

        let tiny = EdgeStream::from_triples([(0, 1, 0)]);
        let (train, test) = split_stream(&tiny, 0.5).unwrap();
        assert_eq!((train.m(), test.m()), (0, 1));
        assert!(split_stream(&s, 1.0).is_err());
        assert!(split_stream(&s, 0.0).is_err());
    }

    #[test]
    fn generator_properties() {
        let a = gen_random(50, 500, 1000, 9).unwrap();
        assert_eq!(a, gen_random(50, 500, 1000, 9).unwrap());
        assert_ne!(a, gen_random(50, 500, 1000, 10).unwrap());
        assert_eq!(a.m(), 500);
        check_clean(&a).unwrap();

        let dense = gen_random(3, 60, 20, 1).unwrap();
        assert!(enumerate_exact(&dense, 10).unwrap().total() > 0);

        let sparse = gen_random_with(1_000_000, 50, 1_000_000, 2, 0.0).unwrap();
        assert_eq!(enumerate_exact(&sparse, 10).unwrap().total(), 0);

        assert!(gen_random(2, 10, 10, 0).is_err());
        assert!(gen_random(5, 0, 10, 0).is_err());
    }

    fn bipartite(seed: u64) -> EdgeStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<(NodeId, NodeId, Timestamp)> =
            (0..300).map(|_| (rng.random_range(0..10), rng.random_range(10..25), rng.random_range(0..500))).collect();
        preprocess(EdgeStream::from_triples(raw)).0
    }

    #[test]
    fn augmentation_closes_wedges_inside_their_span() {
        let s = bipartite(4);
        assert_eq!(enumerate_exact(&s, 500).unwrap().total(), 0);
        let aug = augment_bipartite(&s, 11, AugmentParams::default()).unwrap();
        assert!(aug.m() > s.m());
        assert!(aug.m() <= s.m() + 16 * s.n());
        assert!(validate_sorted(&aug));
        let (again, report) = preprocess(aug.clone());
        assert!(report.is_noop());
        assert_eq!(again, aug);
        assert!(enumerate_exact(&aug, 500).unwrap().total() > 0);
        assert_eq!(aug, augment_bipartite(&s, 11, AugmentParams::default()).unwrap());
    }

    #[test]
    fn closing_edges_lie_in_some_wedge_span() {
        let s = bipartite(8);
        let params = AugmentParams { neighbors: 3, second_hop: 2, wedges: 4 };
        let added = closing_edges(&s, 5, params).unwrap();
        assert!(!added.is_empty() && added.len() <= 4 * s.n());
        let mut by_pair: HashMap<(NodeId, NodeId), Vec<Timestamp>> = HashMap::new();
        for e in s.iter() {
            by_pair.entry(e.pair()).or_default().push(e.t);
        }
        let nodes: HashSet<NodeId> = s.iter().flat_map(|e| [e.src, e.dst]).collect();
        for e in &added {
            assert!(e.idx >= s.m() as u64);
            let spanned = nodes.iter().any(|&x| {
                let (a, b) = (by_pair.get(&pair_key(e.src, x)), by_pair.get(&pair_key(x, e.dst)));
                match (a, b) {
                    (Some(a), Some(b)) => {
                        a.iter().any(|&t1| b.iter().any(|&t2| t1.min(t2) <= e.t && e.t <= t1.max(t2)))
                    }
                    _ => false,
                }
            });
            assert!(spanned, "edge {e:?} not inside any wedge span");
        }
    }

    #[test]
    fn isolated_nodes_add_nothing() {
        let s = EdgeStream::from_triples([(0, 1, 5), (2, 3, 9)]);
        let aug = augment_bipartite(&s, 1, AugmentParams::default()).unwrap();
        assert_eq!(aug.m(), 2);
    }
}
