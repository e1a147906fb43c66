//! Heaviness predictors.
//!
//! Every builder ranks edges by some weight and materializes the result as a
//! set of heavy edge `idx` values (or, for the online protocol, a weight
//! threshold), so the estimator only performs a constant-time lookup per edge.
//! Rankings sort by non-increasing weight with ties broken by ascending `idx`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeStream, NodeId, TemporalEdge, TimeDelta, Timestamp};
use crate::triangle::{edge_weights, EdgeWeights};

/// Classifies an arriving edge as heavy (`true`) or light.
pub trait Predictor {
    fn is_heavy(&self, e: &TemporalEdge) -> Result<bool>;

    /// Short label for reports.
    fn describe(&self) -> String;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    /// Top-K by exact triangle weight `W(e)`.
    Perfect,
    /// Top-K by temporal min-degree.
    MinDegree,
    /// Top-K by static min-degree.
    Static,
    /// Top-K by distinct-neighbour temporal min-degree.
    Hybrid,
    /// Temporal min-degree at or above a learned threshold.
    Threshold,
    /// Perfect ranking with the `2 alpha + 1` edges around rank K shuffled.
    Noisy {
        alpha: usize,
    },
    Never,
}

/// A materialized predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorSpec {
    pub kind: PredictorKind,
    pub heavy: HashSet<u64>,
    /// The threshold `zeta`, for [`PredictorKind::Threshold`].
    pub threshold: Option<u64>,
    /// Heavy budget `K`, for ranking predictors.
    pub budget: Option<usize>,
}

impl PredictorSpec {
    /// Classifies every edge as light.
    pub fn never() -> Self {
        PredictorSpec { kind: PredictorKind::Never, heavy: HashSet::new(), threshold: None, budget: Some(0) }
    }

    pub fn from_set(kind: PredictorKind, heavy: HashSet<u64>, budget: Option<usize>) -> Self {
        PredictorSpec { kind, heavy, threshold: None, budget }
    }

    pub fn heavy_count(&self) -> usize {
        self.heavy.len()
    }

    /// Heavy idx values in ascending order.
    pub fn sorted_heavy(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.heavy.iter().copied().collect();
        v.sort_unstable();
        v
    }
}

impl Predictor for PredictorSpec {
    #[inline]
    fn is_heavy(&self, e: &TemporalEdge) -> Result<bool> {
        Ok(self.kind != PredictorKind::Never && self.heavy.contains(&e.idx))
    }

    fn describe(&self) -> String {
        match (self.kind, self.budget, self.threshold) {
            (PredictorKind::Never, ..) => "never".into(),
            (PredictorKind::Threshold, _, Some(z)) => format!("threshold:{z}"),
            (PredictorKind::Noisy { alpha }, Some(k), _) => format!("noisy:{k}:{alpha}"),
            (kind, Some(k), _) => format!("{}:{k}", kind_label(kind)),
            (kind, None, _) => kind_label(kind).into(),
        }
    }
}

fn kind_label(kind: PredictorKind) -> &'static str {
    match kind {
        PredictorKind::Perfect => "perfect",
        PredictorKind::MinDegree => "mindeg",
        PredictorKind::Static => "static",
        PredictorKind::Hybrid => "hybrid",
        PredictorKind::Threshold => "threshold",
        PredictorKind::Noisy { .. } => "noisy",
        PredictorKind::Never => "never",
    }
}

/// Edges ordered by non-increasing weight, ties by ascending idx.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedEdges {
    /// Edge idx values in rank order.
    pub order: Vec<u64>,
    /// Weight of the edge at each rank.
    pub weights: Vec<u64>,
}

impl RankedEdges {
    /// Ranks `(idx, weight)` pairs.
    pub fn new(idx: &[u64], weights: &[u64]) -> Self {
        assert_eq!(idx.len(), weights.len(), "one weight per edge");
        let mut pairs: Vec<(u64, u64)> = idx.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let (order, weights) = pairs.into_iter().unzip();
        RankedEdges { order, weights }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The first `min(k, m)` edges.
    pub fn top_k(&self, k: usize) -> HashSet<u64> {
        self.order.iter().take(k).copied().collect()
    }
}

fn clamp_budget(k: usize, m: usize) -> usize {
    if k > m {
        warn!("heavy budget K = {k} exceeds m = {m}; clamping to m");
        m
    } else {
        k
    }
}

fn check_delta(delta: TimeDelta) -> Result<()> {
    if delta <= 0 {
        return Err(Error::arg(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

fn stream_idx(stream: &EdgeStream) -> Vec<u64> {
    stream.iter().map(|e| e.idx).collect()
}

fn top_k_spec(kind: PredictorKind, ranked: &RankedEdges, k: usize) -> PredictorSpec {
    let k = clamp_budget(k, ranked.len());
    PredictorSpec::from_set(kind, ranked.top_k(k), Some(k))
}

/// Ranking of all edges by exact triangle weight `W(e)`.
pub fn perfect_ranking(weights: &EdgeWeights) -> RankedEdges {
    RankedEdges::new(&weights.idx, &weights.total)
}

/// Marks the K edges of largest `W(e)` heavy.
pub fn build_perfect(weights: &EdgeWeights, k: usize) -> PredictorSpec {
    top_k_spec(PredictorKind::Perfect, &perfect_ranking(weights), k)
}

/// Incident-edge timestamps per node, each list sorted.
fn incidence_times(stream: &EdgeStream) -> HashMap<NodeId, Vec<Timestamp>> {
    let mut times: HashMap<NodeId, Vec<Timestamp>> = HashMap::new();
    for e in stream {
        times.entry(e.src).or_default().push(e.t);
        times.entry(e.dst).or_default().push(e.t);
    }
    for list in times.values_mut() {
        list.sort_unstable();
    }
    times
}

fn count_in_window(times: &[Timestamp], lo: Timestamp, hi: Timestamp) -> u64 {
    let start = times.partition_point(|&t| t < lo);
    let end = times.partition_point(|&t| t <= hi);
    (end - start) as u64
}

/// Temporal min-degree weight of every edge, aligned with stream positions:
/// `min(d(u, t - delta, t + delta), d(v, t - delta, t + delta))`, where `d`
/// counts incident edges (the edge itself included) in the closed window.
pub fn min_degree_weights(stream: &EdgeStream, delta: TimeDelta) -> Result<Vec<u64>> {
    check_delta(delta)?;
    let times = incidence_times(stream);
    Ok(stream
        .iter()
        .map(|e| {
            let (lo, hi) = (e.t.saturating_sub(delta), e.t.saturating_add(delta));
            let du = count_in_window(&times[&e.src], lo, hi);
            let dv = count_in_window(&times[&e.dst], lo, hi);
            du.min(dv)
        })
        .collect())
}

/// Top-K by temporal min-degree, together with the full ranking.
pub fn build_min_degree(stream: &EdgeStream, delta: TimeDelta, k: usize) -> Result<(PredictorSpec, RankedEdges)> {
    let w = min_degree_weights(stream, delta)?;
    let ranked = RankedEdges::new(&stream_idx(stream), &w);
    Ok((top_k_spec(PredictorKind::MinDegree, &ranked, k), ranked))
}

/// Static min-degree: `min(d(u), d(v))` with `d` the number of distinct
/// neighbours over the whole stream, ignoring direction and time.
pub fn static_weights(stream: &EdgeStream) -> Vec<u64> {
    let mut nbrs: HashMap<NodeId, HashSet<NodeId>> = HashMap::new();
    for e in stream {
        nbrs.entry(e.src).or_default().insert(e.dst);
        nbrs.entry(e.dst).or_default().insert(e.src);
    }
    stream.iter().map(|e| nbrs[&e.src].len().min(nbrs[&e.dst].len()) as u64).collect()
}

pub fn build_static(stream: &EdgeStream, k: usize) -> PredictorSpec {
    let ranked = RankedEdges::new(&stream_idx(stream), &static_weights(stream));
    top_k_spec(PredictorKind::Static, &ranked, k)
}

/// Fenwick tree over positions, for distinct-value range counting.
struct Fenwick(Vec<i64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick(vec![0; n + 1])
    }

    fn add(&mut self, i: usize, v: i64) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over positions `0..i`.
    fn prefix(&self, i: usize) -> i64 {
        let mut i = i;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Hybrid weight: like the temporal min-degree but counting distinct
/// neighbours in the window rather than incident edges.
pub fn hybrid_weights(stream: &EdgeStream, delta: TimeDelta) -> Result<Vec<u64>> {
    check_delta(delta)?;
    // Per node: incident (t, neighbour) in time order, and (position, side) of each incidence.
    let mut incid: HashMap<NodeId, Vec<(Timestamp, NodeId, usize)>> = HashMap::new();
    for (pos, e) in stream.iter().enumerate() {
        incid.entry(e.src).or_default().push((e.t, e.dst, pos));
        incid.entry(e.dst).or_default().push((e.t, e.src, pos));
    }
    let mut side_deg = vec![[0u64; 2]; stream.m()];
    for (&node, list) in &mut incid {
        list.sort_unstable_by_key(|&(t, _, pos)| (t, pos));
        // Offline distinct counting: sweep right ends, keep only the last
        // occurrence of each neighbour marked in the tree.
        let mut queries: Vec<(usize, usize, usize)> = list
            .iter()
            .map(|&(t, _, pos)| {
                let lo = list.partition_point(|x| x.0 < t.saturating_sub(delta));
                let hi = list.partition_point(|x| x.0 <= t.saturating_add(delta));
                (hi, lo, pos)
            })
            .collect();
        queries.sort_unstable();
        let mut tree = Fenwick::new(list.len());
        let mut last: HashMap<NodeId, usize> = HashMap::new();
        let mut filled = 0;
        for (hi, lo, pos) in queries {
            while filled < hi {
                let nb = list[filled].1;
                if let Some(prev) = last.insert(nb, filled) {
                    tree.add(prev, -1);
                }
                tree.add(filled, 1);
                filled += 1;
            }
            let distinct = (tree.prefix(hi) - tree.prefix(lo)) as u64;
            let side = usize::from(stream.edges()[pos].src != node);
            side_deg[pos][side] = distinct;
        }
    }
    Ok(side_deg.into_iter().map(|[a, b]| a.min(b)).collect())
}

pub fn build_hybrid(stream: &EdgeStream, delta: TimeDelta, k: usize) -> Result<PredictorSpec> {
    let ranked = RankedEdges::new(&stream_idx(stream), &hybrid_weights(stream, delta)?);
    Ok(top_k_spec(PredictorKind::Hybrid, &ranked, k))
}

/// Threshold for the online protocol: the temporal min-degree of the K-th
/// ranked edge of the training stream. When `K` exceeds the training size the
/// smallest training weight is returned.
pub fn learn_threshold(train: &EdgeStream, delta: TimeDelta, k: usize) -> Result<u64> {
    if train.is_empty() {
        return Err(Error::arg("cannot learn a threshold from an empty training stream"));
    }
    if k == 0 {
        return Err(Error::arg("threshold budget K must be at least 1"));
    }
    let (_, ranked) = build_min_degree(train, delta, 0)?;
    let rank = k.min(ranked.len());
    Ok(ranked.weights[rank - 1])
}

/// Heavy set `{e : w_md(e) >= zeta}`, with weights computed on the whole test
/// stream (full look-ahead).
pub fn build_threshold(test: &EdgeStream, delta: TimeDelta, zeta: u64) -> Result<PredictorSpec> {
    let w = min_degree_weights(test, delta)?;
    let heavy = test.iter().zip(&w).filter(|(_, &w)| w >= zeta).map(|(e, _)| e.idx).collect();
    Ok(PredictorSpec { kind: PredictorKind::Threshold, heavy, threshold: Some(zeta), budget: None })
}

/// Simulates an `alpha`-noisy K-ranking predictor on top of a ranking.
///
/// Ranks `1..K-alpha-1` stay heavy and ranks beyond `K+alpha` stay light; in
/// the block of ranks `K-alpha..=K+alpha` a uniformly random subset of
/// `alpha + 1` edges is heavy, which matches a uniform shuffle of the block.
pub fn apply_noise(ranked: &RankedEdges, k: usize, alpha: usize, seed: u64) -> Result<PredictorSpec> {
    let m = ranked.len();
    let k = clamp_budget(k, m);
    let kind = PredictorKind::Noisy { alpha };
    if alpha == 0 {
        return Ok(PredictorSpec::from_set(kind, ranked.top_k(k), Some(k)));
    }
    let max_alpha = (m + 1 - k).min(k.saturating_sub(1));
    if alpha > max_alpha {
        return Err(Error::arg(format!("alpha = {alpha} out of range for K = {k}, m = {m} (max {max_alpha})")));
    }
    // 0-based block start; the block may run one past the end when alpha = m - K + 1.
    let fixed = k - alpha - 1;
    let block_end = (k + alpha).min(m);
    let block = &ranked.order[fixed..block_end];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heavy: HashSet<u64> = ranked.order[..fixed].iter().copied().collect();
    heavy.extend(sample(&mut rng, block.len(), alpha + 1).into_iter().map(|i| block[i]));
    Ok(PredictorSpec::from_set(kind, heavy, Some(k)))
}

/// A predictor described by one of the textual forms `perfect:K`, `mindeg:K`,
/// `static:K`, `hybrid:K`, `threshold:ZETA`, `noisy:K:ALPHA` or `never`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorRequest {
    Perfect(usize),
    MinDegree(usize),
    Static(usize),
    Hybrid(usize),
    Threshold(u64),
    Noisy { k: usize, alpha: usize },
    Never,
}

impl FromStr for PredictorRequest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |x: &str| -> Result<u64> {
            x.parse().map_err(|_| Error::arg(format!("invalid number {x:?} in predictor spec {s:?}")))
        };
        let req = match parts.as_slice() {
            ["never"] => PredictorRequest::Never,
            ["perfect", k] => PredictorRequest::Perfect(num(k)? as usize),
            ["mindeg", k] => PredictorRequest::MinDegree(num(k)? as usize),
            ["static", k] => PredictorRequest::Static(num(k)? as usize),
            ["hybrid", k] => PredictorRequest::Hybrid(num(k)? as usize),
            ["threshold", z] => PredictorRequest::Threshold(num(z)?),
            ["noisy", k, a] => PredictorRequest::Noisy { k: num(k)? as usize, alpha: num(a)? as usize },
            _ => return Err(Error::arg(format!("unrecognized predictor spec {s:?}"))),
        };
        Ok(req)
    }
}

impl fmt::Display for PredictorRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorRequest::Perfect(k) => write!(f, "perfect:{k}"),
            PredictorRequest::MinDegree(k) => write!(f, "mindeg:{k}"),
            PredictorRequest::Static(k) => write!(f, "static:{k}"),
            PredictorRequest::Hybrid(k) => write!(f, "hybrid:{k}"),
            PredictorRequest::Threshold(z) => write!(f, "threshold:{z}"),
            PredictorRequest::Noisy { k, alpha } => write!(f, "noisy:{k}:{alpha}"),
            PredictorRequest::Never => write!(f, "never"),
        }
    }
}

impl PredictorRequest {
    /// Builds the predictor over `stream`. Perfect and noisy predictors run the
    /// exact oracle; `noise_seed` only affects the noisy one.
    pub fn build(&self, stream: &EdgeStream, delta: TimeDelta, noise_seed: u64) -> Result<PredictorSpec> {
        match *self {
            PredictorRequest::Never => Ok(PredictorSpec::never()),
            PredictorRequest::Perfect(k) => Ok(build_perfect(&edge_weights(stream, delta)?, k)),
            PredictorRequest::MinDegree(k) => Ok(build_min_degree(stream, delta, k)?.0),
            PredictorRequest::Static(k) => Ok(build_static(stream, k)),
            PredictorRequest::Hybrid(k) => build_hybrid(stream, delta, k),
            PredictorRequest::Threshold(z) => build_threshold(stream, delta, z),
            PredictorRequest::Noisy { k, alpha } => {
                let ranked = perfect_ranking(&edge_weights(stream, delta)?);
                apply_noise(&ranked, k, alpha, noise_seed)
            }
        }
    }
}
