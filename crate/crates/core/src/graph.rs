//! Temporal edges, edge-list IO, preprocessing and window statistics.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub type NodeId = u64;
/// Integer ticks at the dataset's precision (seconds, microseconds, ...).
pub type Timestamp = i64;
/// Length of a time window, in the same ticks as [`Timestamp`].
pub type TimeDelta = i64;

/// A directed edge `src -> dst` observed at time `t`, at stream position `idx`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TemporalEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub t: Timestamp,
    pub idx: u64,
}

impl TemporalEdge {
    pub fn new(src: NodeId, dst: NodeId, t: Timestamp, idx: u64) -> Self {
        TemporalEdge { src, dst, t, idx }
    }

    /// The stream's total order: timestamp first, ties by stream position.
    #[inline]
    pub fn order_key(&self) -> (Timestamp, u64) {
        (self.t, self.idx)
    }

    #[inline]
    pub fn precedes(&self, other: &TemporalEdge) -> bool {
        self.order_key() < other.order_key()
    }

    #[inline]
    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }

    /// Endpoints as an unordered pair `(min, max)`.
    #[inline]
    pub fn pair(&self) -> (NodeId, NodeId) {
        if self.src <= self.dst {
            (self.src, self.dst)
        } else {
            (self.dst, self.src)
        }
    }

    #[inline]
    pub fn touches(&self, v: NodeId) -> bool {
        self.src == v || self.dst == v
    }

    /// The endpoint that is not `v`. Only meaningful when `self.touches(v)`.
    #[inline]
    pub fn other(&self, v: NodeId) -> NodeId {
        if self.src == v {
            self.dst
        } else {
            self.src
        }
    }
}

impl PartialOrd for TemporalEdge {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TemporalEdge {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key().cmp(&other.order_key()).then_with(|| (self.src, self.dst).cmp(&(other.src, other.dst)))
    }
}

/// An ordered sequence of temporal edges.
///
/// Streams straight out of [`parse_stream`] carry file order and raw node ids;
/// [`preprocess`] produces the sorted, compact form every algorithm expects.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeStream {
    edges: Vec<TemporalEdge>,
    num_nodes: usize,
}

impl EdgeStream {
    /// Wraps edges as given; `num_nodes` is recomputed from the endpoints.
    pub fn from_edges(edges: Vec<TemporalEdge>) -> Self {
        let num_nodes = count_distinct_nodes(&edges);
        EdgeStream { edges, num_nodes }
    }

    /// Builds a stream from `(src, dst, t)` triples, assigning `idx` by position.
    pub fn from_triples<I>(triples: I) -> Self
    where
        I: IntoIterator<Item = (NodeId, NodeId, Timestamp)>,
    {
        let edges =
            triples.into_iter().enumerate().map(|(i, (s, d, t))| TemporalEdge::new(s, d, t, i as u64)).collect();
        Self::from_edges(edges)
    }

    pub fn edges(&self) -> &[TemporalEdge] {
        &self.edges
    }

    pub fn into_edges(self) -> Vec<TemporalEdge> {
        self.edges
    }

    /// Number of edges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Number of distinct nodes.
    pub fn n(&self) -> usize {
        self.num_nodes
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TemporalEdge> {
        self.edges.iter()
    }

    /// Position of the edge with the given `idx`, if present. Requires sorted idx.
    pub fn position_of(&self, idx: u64) -> Option<usize> {
        self.edges.binary_search_by_key(&idx, |e| e.idx).ok()
    }

    /// Errors with the first out-of-order position if the stream is not sorted.
    pub fn ensure_sorted(&self) -> Result<()> {
        match first_unsorted(&self.edges) {
            Some(position) => Err(Error::Unsorted { position }),
            None => Ok(()),
        }
    }

    /// Writes the stream in the `src dst t` text format.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::with_capacity(48);
        for e in &self.edges {
            line.clear();
            let _ = writeln!(line, "{} {} {}", e.src, e.dst, e.t);
            out.write_all(line.as_bytes())?;
        }
        out.flush()?;
        Ok(())
    }
}

impl<'a> IntoIterator for &'a EdgeStream {
    type Item = &'a TemporalEdge;
    type IntoIter = std::slice::Iter<'a, TemporalEdge>;

    fn into_iter(self) -> Self::IntoIter {
        self.edges.iter()
    }
}

fn count_distinct_nodes(edges: &[TemporalEdge]) -> usize {
    let mut seen = HashSet::with_capacity(edges.len().min(1 << 20));
    for e in edges {
        seen.insert(e.src);
        seen.insert(e.dst);
    }
    seen.len()
}

fn first_unsorted(edges: &[TemporalEdge]) -> Option<usize> {
    edges.windows(2).position(|w| w[1].order_key() <= w[0].order_key()).map(|i| i + 1)
}

/// What [`preprocess`] changed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct PreprocessReport {
    pub removed_self_loops: usize,
    pub removed_duplicates: usize,
    /// Nodes whose id changed under the first-appearance remapping.
    pub remapped_nodes: usize,
    pub final_m: usize,
}

impl PreprocessReport {
    /// True when preprocessing removed or renamed nothing.
    pub fn is_noop(&self) -> bool {
        self.removed_self_loops == 0 && self.removed_duplicates == 0 && self.remapped_nodes == 0
    }
}

/// Parses `src dst t` lines. Blank lines and lines starting with `#` are skipped;
/// `idx` follows file order.
pub fn parse_stream<R: BufRead>(reader: R) -> Result<EdgeStream> {
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut fields = body.split_whitespace();
        let (Some(s), Some(d), Some(t), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse { line: lineno, message: format!("expected `src dst t`, got {body:?}") });
        };
        let node = |tok: &str, what: &str| {
            tok.parse::<NodeId>()
                .map_err(|_| Error::Parse { line: lineno, message: format!("invalid {what} node id {tok:?}") })
        };
        let src = node(s, "source")?;
        let dst = node(d, "target")?;
        let t: Timestamp =
            t.parse().map_err(|_| Error::Parse { line: lineno, message: format!("invalid timestamp {t:?}") })?;
        if t < 0 {
            return Err(Error::Parse { line: lineno, message: format!("negative timestamp {t}") });
        }
        edges.push(TemporalEdge::new(src, dst, t, edges.len() as u64));
    }
    Ok(EdgeStream::from_edges(edges))
}

/// Parses an in-memory edge list.
pub fn parse_str(text: &str) -> Result<EdgeStream> {
    parse_stream(text.as_bytes())
}

/// Drops self-loops and exact `(src, dst, t)` duplicates (keeping the first),
/// sorts by `(t, idx)`, remaps node ids to `0..n` by first appearance in the
/// sorted output and renumbers `idx` contiguously.
pub fn preprocess(stream: EdgeStream) -> (EdgeStream, PreprocessReport) {
    let mut edges = stream.into_edges();
    edges.sort_unstable_by_key(|e| e.order_key());

    let mut report = PreprocessReport::default();
    let mut kept = Vec::with_capacity(edges.len());
    // Duplicates share a timestamp, so only the current tie group is tracked.
    let mut group: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut group_t = None;
    for e in edges {
        if e.is_self_loop() {
            report.removed_self_loops += 1;
            continue;
        }
        if group_t != Some(e.t) {
            group.clear();
            group_t = Some(e.t);
        }
        if !group.insert((e.src, e.dst)) {
            report.removed_duplicates += 1;
            continue;
        }
        kept.push(e);
    }

    let mut ids: HashMap<NodeId, NodeId> = HashMap::new();
    let mut remap = |v: NodeId, report: &mut PreprocessReport| {
        let next = ids.len() as NodeId;
        let id = *ids.entry(v).or_insert_with(|| {
            if next != v {
                report.remapped_nodes += 1;
            }
            next
        });
        id
    };
    for (i, e) in kept.iter_mut().enumerate() {
        e.src = remap(e.src, &mut report);
        e.dst = remap(e.dst, &mut report);
        e.idx = i as u64;
    }
    report.final_m = kept.len();
    let num_nodes = ids.len();
    (EdgeStream { edges: kept, num_nodes }, report)
}

/// True iff timestamps never decrease along the stream.
pub fn validate_sorted(stream: &EdgeStream) -> bool {
    stream.edges.windows(2).all(|w| w[0].t <= w[1].t)
}

/// Cheap check that a stream already looks like [`preprocess`] output: sorted,
/// contiguous `idx`, no self-loops, no duplicate triples. Node ids may be sparse.
pub fn check_clean(stream: &EdgeStream) -> Result<()> {
    let mut group: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut group_t = None;
    for (i, e) in stream.edges.iter().enumerate() {
        if e.idx != i as u64 {
            return Err(Error::NotClean(format!("edge at position {i} has idx {}", e.idx)));
        }
        if e.is_self_loop() {
            return Err(Error::NotClean(format!("self-loop at position {i}")));
        }
        if i > 0 && stream.edges[i - 1].t > e.t {
            return Err(Error::NotClean(format!("timestamp decreases at position {i}")));
        }
        if group_t != Some(e.t) {
            group.clear();
            group_t = Some(e.t);
        }
        if !group.insert((e.src, e.dst)) {
            return Err(Error::NotClean(format!("duplicate edge at position {i}")));
        }
    }
    Ok(())
}

/// `m_delta`: the largest number of edges whose timestamps fall in one closed
/// window `[t, t + delta]`, found by a two-pointer sweep anchored at each edge.
pub fn compute_m_delta(stream: &EdgeStream, delta: TimeDelta) -> Result<usize> {
    if delta < 0 {
        return Err(Error::arg(format!("delta must be non-negative, got {delta}")));
    }
    if !validate_sorted(stream) {
        let position = stream.edges.windows(2).position(|w| w[0].t > w[1].t).unwrap_or(0) + 1;
        return Err(Error::Unsorted { position });
    }
    let ts: Vec<Timestamp> = stream.edges.iter().map(|e| e.t).collect();
    let mut best = 0;
    let mut hi = 0;
    for (lo, &start) in ts.iter().enumerate() {
        let end = start.saturating_add(delta);
        hi = hi.max(lo);
        while hi < ts.len() && ts[hi] <= end {
            hi += 1;
        }
        best = best.max(hi - lo);
    }
    Ok(best)
}
