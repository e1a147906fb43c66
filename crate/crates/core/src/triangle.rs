//! Triangle kinds, the exact windowed oracle and per-edge triangle weights.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{EdgeStream, NodeId, TemporalEdge, TimeDelta};

/// One of the eight temporal triangle classes.
///
/// Relabel so the first edge is `a -> b` and let `c` be the third vertex. The
/// code packs three bits:
///
/// * bit 2: the second edge lies on `{b, c}` (otherwise on `{a, c}`),
/// * bit 1: the second edge leaves the vertex it shares with the first edge,
/// * bit 0: the third edge points from `a` (bit 2 set) or `b` (bit 2 clear) to `c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriangleKind(u8);

impl TriangleKind {
    pub const COUNT: usize = 8;

    pub const ALL: [TriangleKind; 8] = [
        TriangleKind(0),
        TriangleKind(1),
        TriangleKind(2),
        TriangleKind(3),
        TriangleKind(4),
        TriangleKind(5),
        TriangleKind(6),
        TriangleKind(7),
    ];

    pub fn from_code(code: u8) -> Option<Self> {
        (code < 8).then_some(TriangleKind(code))
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    fn from_bits(second_on_bc: bool, second_out_of_shared: bool, third_toward_c: bool) -> Self {
        TriangleKind(((second_on_bc as u8) << 2) | ((second_out_of_shared as u8) << 1) | third_toward_c as u8)
    }
}

impl fmt::Display for TriangleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

/// Structural classification of three edges given in `(t, idx)` order.
///
/// Returns `None` unless the edges span exactly three vertices and three
/// distinct unordered pairs. The time span is the caller's concern.
pub fn classify_triangle(e1: &TemporalEdge, e2: &TemporalEdge, e3: &TemporalEdge) -> Option<TriangleKind> {
    let (a, b) = (e1.src, e1.dst);
    if a == b || e2.is_self_loop() || e3.is_self_loop() {
        return None;
    }
    let (shared, c) = if e2.src == a || e2.src == b {
        (e2.src, e2.dst)
    } else if e2.dst == a || e2.dst == b {
        (e2.dst, e2.src)
    } else {
        return None;
    };
    if c == a || c == b {
        return None;
    }
    let second_on_bc = shared == b;
    let second_out_of_shared = e2.src == shared;
    let from = if second_on_bc { a } else { b };
    let third_toward_c = if e3.src == from && e3.dst == c {
        true
    } else if e3.src == c && e3.dst == from {
        false
    } else {
        return None;
    };
    Some(TriangleKind::from_bits(second_on_bc, second_out_of_shared, third_toward_c))
}

/// Eight values indexed by [`TriangleKind`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CountVector<T>(pub [T; 8]);

impl<T: Copy> CountVector<T> {
    pub fn splat(v: T) -> Self {
        CountVector([v; 8])
    }

    pub fn get(&self, kind: TriangleKind) -> T {
        self.0[kind.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (TriangleKind, T)> + '_ {
        TriangleKind::ALL.iter().map(move |&k| (k, self.0[k.index()]))
    }

    pub fn map<U, F: FnMut(T) -> U>(&self, f: F) -> CountVector<U> {
        CountVector(self.0.map(f))
    }

    pub fn as_array(&self) -> &[T; 8] {
        &self.0
    }
}

impl<T: Copy + std::iter::Sum<T>> CountVector<T> {
    pub fn total(&self) -> T {
        self.0.iter().copied().sum()
    }
}

impl<T> Index<TriangleKind> for CountVector<T> {
    type Output = T;
    fn index(&self, kind: TriangleKind) -> &T {
        &self.0[kind.index()]
    }
}

impl<T> IndexMut<TriangleKind> for CountVector<T> {
    fn index_mut(&mut self, kind: TriangleKind) -> &mut T {
        &mut self.0[kind.index()]
    }
}

impl<T: Serialize> Serialize for CountVector<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

fn check_delta(delta: TimeDelta) -> Result<()> {
    if delta <= 0 {
        return Err(Error::arg(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

/// Edges inside the current closed window, indexed by node and by node pair.
/// Everything is keyed by stream position, which equals `(t, idx)` order.
struct Window {
    live: VecDeque<usize>,
    by_node: HashMap<NodeId, VecDeque<usize>>,
    by_pair: HashMap<(NodeId, NodeId), VecDeque<usize>>,
}

impl Window {
    fn new() -> Self {
        Window { live: VecDeque::new(), by_node: HashMap::new(), by_pair: HashMap::new() }
    }

    fn evict_before(&mut self, edges: &[TemporalEdge], cutoff: i64) {
        while let Some(&pos) = self.live.front() {
            let e = &edges[pos];
            if e.t >= cutoff {
                break;
            }
            self.live.pop_front();
            // The globally oldest edge is also the oldest in each of its lists.
            for v in [e.src, e.dst] {
                if let Some(list) = self.by_node.get_mut(&v) {
                    list.pop_front();
                    if list.is_empty() {
                        self.by_node.remove(&v);
                    }
                }
            }
            let key = e.pair();
            if let Some(list) = self.by_pair.get_mut(&key) {
                list.pop_front();
                if list.is_empty() {
                    self.by_pair.remove(&key);
                }
            }
        }
    }

    fn insert(&mut self, edges: &[TemporalEdge], pos: usize) {
        let e = &edges[pos];
        self.live.push_back(pos);
        self.by_node.entry(e.src).or_default().push_back(pos);
        self.by_node.entry(e.dst).or_default().push_back(pos);
        self.by_pair.entry(e.pair()).or_default().push_back(pos);
    }

    fn degree(&self, v: NodeId) -> usize {
        self.by_node.get(&v).map_or(0, VecDeque::len)
    }
}

/// Calls `visit(p1, p2, p3, kind)` once for every delta-instance, where the
/// `p`s are stream positions in `(t, idx)` order.
pub fn for_each_instance<F>(stream: &EdgeStream, delta: TimeDelta, mut visit: F) -> Result<()>
where
    F: FnMut(usize, usize, usize, TriangleKind),
{
    check_delta(delta)?;
    stream.ensure_sorted()?;
    let edges = stream.edges();
    let mut window = Window::new();
    for (p3, e3) in edges.iter().enumerate() {
        window.evict_before(edges, e3.t.saturating_sub(delta));
        let (x, y) = if window.degree(e3.dst) < window.degree(e3.src) { (e3.dst, e3.src) } else { (e3.src, e3.dst) };
        if let Some(at_x) = window.by_node.get(&x) {
            for &px in at_x {
                let z = edges[px].other(x);
                if z == y {
                    continue;
                }
                let key = if y <= z { (y, z) } else { (z, y) };
                let Some(at_yz) = window.by_pair.get(&key) else { continue };
                for &py in at_yz {
                    let (p1, p2) = if px < py { (px, py) } else { (py, px) };
                    if let Some(kind) = classify_triangle(&edges[p1], &edges[p2], e3) {
                        visit(p1, p2, p3, kind);
                    }
                }
            }
        }
        window.insert(edges, p3);
    }
    Ok(())
}

/// Exact count of delta-instances per kind.
pub fn enumerate_exact(stream: &EdgeStream, delta: TimeDelta) -> Result<CountVector<u64>> {
    let mut counts = CountVector::<u64>::default();
    for_each_instance(stream, delta, |_, _, _, kind| counts[kind] += 1)?;
    Ok(counts)
}

/// Per-edge triangle memberships, aligned with stream positions.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeights {
    /// `idx` of the edge at each position.
    pub idx: Vec<u64>,
    /// `W_i(e)` for each kind.
    pub per_kind: Vec<[u64; 8]>,
    /// `W(e) = sum_i W_i(e)`.
    pub total: Vec<u64>,
}

impl EdgeWeights {
    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    /// `(W(e), W_i(e))` for the edge with the given idx.
    pub fn get(&self, idx: u64) -> Option<(u64, &[u64; 8])> {
        let pos = self.idx.binary_search(&idx).ok()?;
        Some((self.total[pos], &self.per_kind[pos]))
    }

    /// Column sums `sum_e W_i(e)`.
    pub fn kind_sums(&self) -> CountVector<u64> {
        let mut sums = CountVector::<u64>::default();
        for row in &self.per_kind {
            for (s, w) in sums.0.iter_mut().zip(row) {
                *s += w;
            }
        }
        sums
    }
}

/// Counts, for every edge, the delta-instances of each kind that contain it.
pub fn edge_weights(stream: &EdgeStream, delta: TimeDelta) -> Result<EdgeWeights> {
    let m = stream.m();
    let mut per_kind = vec![[0u64; 8]; m];
    for_each_instance(stream, delta, |p1, p2, p3, kind| {
        for p in [p1, p2, p3] {
            per_kind[p][kind.index()] += 1;
        }
    })?;
    let total = per_kind.iter().map(|row| row.iter().sum()).collect();
    Ok(EdgeWeights { idx: stream.iter().map(|e| e.idx).collect(), per_kind, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(src: NodeId, dst: NodeId, t: i64, idx: u64) -> TemporalEdge {
        TemporalEdge::new(src, dst, t, idx)
    }

    /// All ordered triples, checked directly against the definition.
    fn brute_instances(s: &EdgeStream, delta: TimeDelta) -> Vec<(usize, usize, usize, TriangleKind)> {
        let es = s.edges();
        let mut out = Vec::new();
        for i in 0..es.len() {
            for j in i + 1..es.len() {
                for k in j + 1..es.len() {
                    if es[k].t - es[i].t > delta {
                        continue;
                    }
                    if let Some(kind) = classify_triangle(&es[i], &es[j], &es[k]) {
                        out.push((i, j, k, kind));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn cyclic_triangle_kind() {
        let (a, b, c) = (0, 1, 2);
        let kind = classify_triangle(&e(a, b, 1, 0), &e(b, c, 2, 1), &e(c, a, 3, 2)).unwrap();
        assert_eq!(kind.code(), 0b110);
    }

    #[test]
    fn two_pair_triples_are_rejected() {
        assert_eq!(classify_triangle(&e(0, 1, 1, 0), &e(0, 1, 2, 1), &e(1, 0, 3, 2)), None);
        assert_eq!(classify_triangle(&e(0, 1, 1, 0), &e(2, 3, 2, 1), &e(3, 0, 3, 2)), None);
        assert_eq!(classify_triangle(&e(0, 1, 1, 0), &e(1, 2, 2, 1), &e(1, 2, 3, 2)), None);
        assert_eq!(classify_triangle(&e(0, 1, 1, 0), &e(1, 2, 2, 1), &e(0, 3, 3, 2)), None);
    }

    #[test]
    fn eight_canonical_triples_biject_onto_codes() {
        let (a, b, c) = (10, 20, 30);
        let first = e(a, b, 1, 0);
        let mut seen = Vec::new();
        for (s2, d2) in [(b, c), (c, b), (a, c), (c, a)] {
            let second = e(s2, d2, 2, 1);
            let rest = if s2 == b || d2 == b { (a, c) } else { (b, c) };
            for (s3, d3) in [rest, (rest.1, rest.0)] {
                let kind = classify_triangle(&first, &second, &e(s3, d3, 3, 2)).unwrap();
                seen.push(kind.code());
            }
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..8).collect::<Vec<u8>>());
    }

    #[test]
    fn classification_ignores_vertex_names() {
        // Same shape with relabelled vertices lands in the same class.
        let k1 = classify_triangle(&e(0, 1, 1, 0), &e(2, 0, 2, 1), &e(1, 2, 3, 2));
        let k2 = classify_triangle(&e(7, 3, 1, 0), &e(5, 7, 2, 1), &e(3, 5, 3, 2));
        assert!(k1.is_some());
        assert_eq!(k1, k2);
    }

    #[test]
    fn exact_small_cases() {
        assert_eq!(enumerate_exact(&EdgeStream::default(), 5).unwrap(), CountVector::default());
        let two = EdgeStream::from_triples([(0, 1, 1), (1, 2, 2)]);
        assert_eq!(enumerate_exact(&two, 5).unwrap().total(), 0);

        let tri = EdgeStream::from_triples([(0, 1, 1), (1, 2, 2), (2, 0, 3)]);
        let counts = enumerate_exact(&tri, 2).unwrap();
        assert_eq!(counts.total(), 1);
        assert_eq!(counts.0[0b110], 1);
        assert_eq!(enumerate_exact(&tri, 1).unwrap().total(), 0);
    }

    #[test]
    fn exact_rejects_bad_input() {
        let tri = EdgeStream::from_triples([(0, 1, 1), (1, 2, 2), (2, 0, 3)]);
        assert!(matches!(enumerate_exact(&tri, 0), Err(Error::InvalidArgument(_))));
        let unsorted = EdgeStream::from_triples([(0, 1, 5), (1, 2, 2)]);
        assert!(matches!(enumerate_exact(&unsorted, 3), Err(Error::Unsorted { .. })));
    }

    #[test]
    fn ties_are_ordered_by_idx() {
        // All three edges share a timestamp; the stream order fixes the kind.
        let s = EdgeStream::from_triples([(0, 1, 4), (1, 2, 4), (2, 0, 4)]);
        let counts = enumerate_exact(&s, 1).unwrap();
        assert_eq!(counts.0[0b110], 1);
        assert_eq!(counts.total(), 1);
    }

    #[test]
    fn weights_of_single_triangle() {
        let tri = EdgeStream::from_triples([(0, 1, 1), (1, 2, 2), (2, 0, 3)]);
        let w = edge_weights(&tri, 2).unwrap();
        assert_eq!(w.total, vec![1, 1, 1]);
        assert_eq!(w.get(1).unwrap().0, 1);
        assert!(w.get(9).is_none());

        let path = EdgeStream::from_triples([(0, 1, 1), (1, 2, 2), (2, 3, 3)]);
        assert!(edge_weights(&path, 10).unwrap().total.iter().all(|&x| x == 0));
    }

    fn small_stream(max_nodes: u64, max_len: usize, horizon: i64) -> impl Strategy<Value = EdgeStream> {
        prop::collection::vec((0..max_nodes, 0..max_nodes, 0..horizon), 0..=max_len)
            .prop_map(|raw| crate::graph::preprocess(EdgeStream::from_triples(raw)).0)
    }

    proptest! {
        #[test]
        fn windowed_oracle_matches_triple_enumeration(s in small_stream(6, 30, 25), delta in 1i64..20) {
            let mut brute = CountVector::<u64>::default();
            for (_, _, _, k) in brute_instances(&s, delta) {
                brute[k] += 1;
            }
            prop_assert_eq!(enumerate_exact(&s, delta).unwrap(), brute);
        }

        #[test]
        fn weights_match_membership_counts(s in small_stream(5, 30, 20), delta in 1i64..15) {
            let mut expect = vec![[0u64; 8]; s.m()];
            let inst = brute_instances(&s, delta);
            for &(i, j, k, kind) in &inst {
                for p in [i, j, k] {
                    expect[p][kind.index()] += 1;
                }
            }
            let w = edge_weights(&s, delta).unwrap();
            prop_assert_eq!(&w.per_kind, &expect);
            let exact = enumerate_exact(&s, delta).unwrap();
            prop_assert_eq!(w.kind_sums(), exact.map(|c| 3 * c));
        }

        #[test]
        fn counts_grow_with_delta(s in small_stream(5, 30, 30), d1 in 1i64..15, extra in 0i64..15) {
            let lo = enumerate_exact(&s, d1).unwrap();
            let hi = enumerate_exact(&s, d1 + extra).unwrap();
            for k in TriangleKind::ALL {
                prop_assert!(lo[k] <= hi[k]);
            }
        }

        #[test]
        fn isolated_far_triangle_adds_exactly_one(s in small_stream(5, 25, 20), delta in 1i64..10) {
            let before = enumerate_exact(&s, delta).unwrap();
            let n = s.n() as u64 + 100;
            let t0 = 1_000;
            let mut edges = s.edges().to_vec();
            for (i, (a, b, t)) in [(n, n + 1, t0), (n + 2, n + 1, t0 + 1), (n, n + 2, t0 + 1)].into_iter().enumerate() {
                edges.push(TemporalEdge::new(a, b, t, (s.m() + i) as u64));
            }
            let after = enumerate_exact(&EdgeStream::from_edges(edges.clone()), delta).unwrap();
            let added = classify_triangle(&edges[s.m()], &edges[s.m() + 1], &edges[s.m() + 2]).unwrap();
            let mut expect = before;
            expect[added] += 1;
            prop_assert_eq!(after, expect);
        }
    }
}
