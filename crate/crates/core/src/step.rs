//! The single-pass estimator.
//!
//! For every arriving edge the estimator evicts stale edges, collects the
//! wedges in its sample that the edge closes, counts the resulting triangles
//! into one of three banks, and only then decides whether to keep the edge:
//! predicted-heavy edges always, light edges with probability `p`.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeStream, NodeId, TemporalEdge, TimeDelta, Timestamp};
use crate::num::Scalar;
use crate::predictor::Predictor;
use crate::triangle::{classify_triangle, CountVector};

/// Generator behind every sampling decision: ChaCha with 8 rounds, as shipped
/// by `rand_chacha` 0.9, seeded through `seed_from_u64`.
pub type StepRng = ChaCha8Rng;

pub fn step_rng(seed: u64) -> StepRng {
    StepRng::seed_from_u64(seed)
}

/// Returns `true` with probability `p`.
#[inline]
pub fn flip_biased_coin<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    // random::<f64>() lies in [0, 1), so p = 1 always succeeds.
    rng.random::<f64>() < p
}

/// A retained edge with its classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoredEdge {
    pub edge: TemporalEdge,
    pub heavy: bool,
}

#[derive(Debug, Default)]
struct NodeSlot {
    degree: usize,
    /// Live edges to each neighbour, in arrival order.
    nbrs: HashMap<NodeId, VecDeque<StoredEdge>>,
}

/// The heavy set `H`, the sampled light set `S_L`, and a per-node index over both.
#[derive(Debug, Default)]
pub struct SampleState {
    heavy: VecDeque<TemporalEdge>,
    light: VecDeque<TemporalEdge>,
    nodes: HashMap<NodeId, NodeSlot>,
}

impl SampleState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn heavy_len(&self) -> usize {
        self.heavy.len()
    }

    pub fn light_len(&self) -> usize {
        self.light.len()
    }

    pub fn len(&self) -> usize {
        self.heavy.len() + self.light.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of retained edges incident to `v`.
    pub fn degree(&self, v: NodeId) -> usize {
        self.nodes.get(&v).map_or(0, |s| s.degree)
    }

    /// All retained edges, heavy first, each set in arrival order.
    pub fn stored(&self) -> impl Iterator<Item = StoredEdge> + '_ {
        let h = self.heavy.iter().map(|&edge| StoredEdge { edge, heavy: true });
        let l = self.light.iter().map(|&edge| StoredEdge { edge, heavy: false });
        h.chain(l)
    }

    /// Retained edges between `u` and `v`, in arrival order.
    pub fn between(&self, u: NodeId, v: NodeId) -> impl Iterator<Item = &StoredEdge> + '_ {
        self.nodes.get(&u).and_then(|s| s.nbrs.get(&v)).into_iter().flatten()
    }

    pub fn insert(&mut self, edge: TemporalEdge, heavy: bool) {
        if heavy {
            self.heavy.push_back(edge);
        } else {
            self.light.push_back(edge);
        }
        let stored = StoredEdge { edge, heavy };
        for (v, w) in [(edge.src, edge.dst), (edge.dst, edge.src)] {
            let slot = self.nodes.entry(v).or_default();
            slot.degree += 1;
            slot.nbrs.entry(w).or_default().push_back(stored);
        }
    }

    /// Evicts every edge with `t < cutoff` and returns how many were removed.
    pub fn cleanup(&mut self, cutoff: Timestamp) -> usize {
        let mut removed = 0;
        for heavy in [true, false] {
            loop {
                let queue = if heavy { &mut self.heavy } else { &mut self.light };
                match queue.front() {
                    Some(e) if e.t < cutoff => {
                        let e = queue.pop_front().expect("front exists");
                        Self::unlink(&mut self.nodes, e.src, e.dst);
                        Self::unlink(&mut self.nodes, e.dst, e.src);
                        removed += 1;
                    }
                    _ => break,
                }
            }
        }
        removed
    }

    // Each pair list is in arrival order and its stale entries form a prefix, so
    // popping the front once per evicted edge removes exactly the stale ones.
    fn unlink(nodes: &mut HashMap<NodeId, NodeSlot>, v: NodeId, w: NodeId) {
        let Entry::Occupied(mut slot) = nodes.entry(v) else {
            unreachable!("evicted edge missing from node index");
        };
        let s = slot.get_mut();
        s.degree -= 1;
        if let Entry::Occupied(mut list) = s.nbrs.entry(w) {
            list.get_mut().pop_front();
            if list.get().is_empty() {
                list.remove();
            }
        }
        if s.degree == 0 {
            slot.remove();
        }
    }

    /// Collects every stored wedge that `e` closes into a triangle.
    ///
    /// The scan starts from the endpoint with fewer retained edges (the source
    /// on ties) and pairs each of its edges to a third vertex `z` with the
    /// stored edges between the other endpoint and `z`.
    pub fn collect_wedges(&self, e: &TemporalEdge, out: &mut Wedges) {
        out.clear();
        let (x, y) = if self.degree(e.dst) < self.degree(e.src) { (e.dst, e.src) } else { (e.src, e.dst) };
        let (Some(sx), Some(sy)) = (self.nodes.get(&x), self.nodes.get(&y)) else {
            return;
        };
        for (&z, at_x) in &sx.nbrs {
            if z == y {
                continue;
            }
            let Some(at_y) = sy.nbrs.get(&z) else { continue };
            for ex in at_x {
                for ey in at_y {
                    let pair = if ex.edge.precedes(&ey.edge) { (*ex, *ey) } else { (*ey, *ex) };
                    match (ex.heavy, ey.heavy) {
                        (true, true) => out.heavy_heavy.push(pair),
                        (false, false) => out.light_light.push(pair),
                        _ => out.heavy_light.push(pair),
                    }
                }
            }
        }
    }
}

/// Wedges closed by one arriving edge, partitioned by heaviness. Each pair is
/// in `(t, idx)` order.
#[derive(Clone, Debug, Default)]
pub struct Wedges {
    pub heavy_heavy: Vec<(StoredEdge, StoredEdge)>,
    pub heavy_light: Vec<(StoredEdge, StoredEdge)>,
    pub light_light: Vec<(StoredEdge, StoredEdge)>,
}

impl Wedges {
    pub fn clear(&mut self) {
        self.heavy_heavy.clear();
        self.heavy_light.clear();
        self.light_light.clear();
    }

    pub fn len(&self) -> usize {
        self.heavy_heavy.len() + self.heavy_light.len() + self.light_light.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Counter bank: how many of a triangle's first two edges were heavy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bank {
    LightLight = 0,
    HeavyLight = 1,
    HeavyHeavy = 2,
}

/// Triangle counters `c[bank][kind]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub banks: [[u64; 8]; 3],
}

impl Counters {
    pub fn bank(&self, bank: Bank) -> &[u64; 8] {
        &self.banks[bank as usize]
    }

    /// Sum over the three banks, per kind.
    pub fn combined(&self) -> CountVector<u64> {
        CountVector(std::array::from_fn(|k| self.banks.iter().map(|b| b[k]).sum()))
    }

    /// `c_i = c_{i,0} / p^2 + c_{i,1} / p + c_{i,2}`.
    pub fn estimates<T: Scalar>(&self, p: f64) -> CountVector<T> {
        let p = T::from_param(p);
        let [ll, hl, hh] = &self.banks;
        CountVector(std::array::from_fn(|k| {
            T::from_count(ll[k]) / (p * p) + T::from_count(hl[k]) / p + T::from_count(hh[k])
        }))
    }
}

/// Counts the triangles that `e` closes with the given wedges into one bank.
pub fn update_counters(counters: &mut Counters, wedges: &[(StoredEdge, StoredEdge)], e: &TemporalEdge, bank: Bank) {
    let row = &mut counters.banks[bank as usize];
    for (a, b) in wedges {
        if let Some(kind) = classify_triangle(&a.edge, &b.edge, e) {
            row[kind.index()] += 1;
        }
    }
}

/// Run parameters. The predictor is borrowed so many runs can share one.
#[derive(Clone, Copy)]
pub struct EstimatorConfig<'a> {
    pub delta: TimeDelta,
    pub p: f64,
    pub seed: u64,
    pub predictor: &'a (dyn Predictor + Sync),
}

impl std::fmt::Debug for EstimatorConfig<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EstimatorConfig")
            .field("delta", &self.delta)
            .field("p", &self.p)
            .field("seed", &self.seed)
            .field("predictor", &self.predictor.describe())
            .finish()
    }
}

impl<'a> EstimatorConfig<'a> {
    pub fn new(delta: TimeDelta, p: f64, seed: u64, predictor: &'a (dyn Predictor + Sync)) -> Self {
        EstimatorConfig { delta, p, seed, predictor }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        EstimatorConfig { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta <= 0 {
            return Err(Error::arg(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::arg(format!("p must lie in (0, 1], got {}", self.p)));
        }
        Ok(())
    }
}

/// Memory and work instrumentation for one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Largest `|H| + |S_L|` seen after any insertion.
    pub peak_live_edges: usize,
    pub peak_heavy: usize,
    /// Edges ever stored, heavy or sampled.
    pub retained: u64,
    pub wedges_examined: u64,
    pub elapsed: Duration,
}

impl RunStats {
    /// Equality ignoring wall time.
    pub fn same_counts(&self, other: &RunStats) -> bool {
        (self.peak_live_edges, self.peak_heavy, self.retained, self.wedges_examined)
            == (other.peak_live_edges, other.peak_heavy, other.retained, other.wedges_examined)
    }
}

/// Result of [`run_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepRun<T> {
    pub estimates: CountVector<T>,
    pub counters: Counters,
    pub stats: RunStats,
}

/// Processes the stream once and returns the reweighted estimates.
pub fn run_step<T: Scalar>(stream: &EdgeStream, cfg: &EstimatorConfig<'_>) -> Result<StepRun<T>> {
    cfg.validate()?;
    let started = Instant::now();
    let mut rng = step_rng(cfg.seed);
    let mut state = SampleState::new();
    let mut counters = Counters::default();
    let mut wedges = Wedges::default();
    let mut stats = RunStats::default();
    let mut prev: Option<&TemporalEdge> = None;

    for (pos, e) in stream.iter().enumerate() {
        if prev.is_some_and(|p| !p.precedes(e)) {
            return Err(Error::Unsorted { position: pos });
        }
        prev = Some(e);

        state.cleanup(e.t.saturating_sub(cfg.delta));
        state.collect_wedges(e, &mut wedges);
        stats.wedges_examined += wedges.len() as u64;
        update_counters(&mut counters, &wedges.light_light, e, Bank::LightLight);
        update_counters(&mut counters, &wedges.heavy_light, e, Bank::HeavyLight);
        update_counters(&mut counters, &wedges.heavy_heavy, e, Bank::HeavyHeavy);

        if cfg.predictor.is_heavy(e)? {
            state.insert(*e, true);
            stats.retained += 1;
        } else if flip_biased_coin(&mut rng, cfg.p) {
            state.insert(*e, false);
            stats.retained += 1;
        }
        stats.peak_live_edges = stats.peak_live_edges.max(state.len());
        stats.peak_heavy = stats.peak_heavy.max(state.heavy_len());
    }

    stats.elapsed = started.elapsed();
    Ok(StepRun { estimates: counters.estimates(cfg.p), counters, stats })
}
