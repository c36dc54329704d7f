//! Oracle interfaces for computably presented bipartite graphs.
//!
//! An infinite bipartite graph is never materialized. It is queried through
//! [`BipartiteOracle`]: decidable adjacency, a computable degree and a side
//! membership predicate. Both sides are numbered by positive integers; the
//! numbering is the identity, so the vertex `5` on side A and the vertex `5`
//! on side B are copies of each other.
//!
//! Finite pieces are extracted with [`ball`], which returns a
//! [`FiniteInducedSubgraph`].

use std::collections::{BTreeSet, VecDeque};

use rustc_hash::FxHashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of candidates [`neighbors`] scans before giving up.
pub const DEFAULT_SCAN_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("vertex ids start at 1, got 0")]
    ZeroVertex,
    #[error(
        "oracle inconsistency at {vertex}: degree {degree} but {found} neighbours found{detail}"
    )]
    OracleInconsistency {
        vertex: Vertex,
        degree: u64,
        found: u64,
        detail: String,
    },
}

/// A positive vertex number.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct VertexId(u64);

impl VertexId {
    pub fn new(value: u64) -> Result<Self, GraphError> {
        if value == 0 {
            Err(GraphError::ZeroVertex)
        } else {
            Ok(Self(value))
        }
    }

    /// Panicking constructor for literals and internal arithmetic that is
    /// known to stay positive.
    pub const fn of(value: u64) -> Self {
        assert!(value >= 1, "vertex ids start at 1");
        Self(value)
    }

    pub const fn get(self) -> u64 {
        self.0
    }
}

impl TryFrom<u64> for VertexId {
    type Error = GraphError;
    fn try_from(value: u64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<VertexId> for u64 {
    fn from(v: VertexId) -> u64 {
        v.0
    }
}

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

/// A vertex tagged with its side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vertex {
    pub side: Side,
    pub id: VertexId,
}

impl Vertex {
    pub fn a(id: u64) -> Self {
        Self {
            side: Side::A,
            id: VertexId::of(id),
        }
    }

    pub fn b(id: u64) -> Self {
        Self {
            side: Side::B,
            id: VertexId::of(id),
        }
    }

    /// The copy of this vertex on the other side.
    pub fn copy(self) -> Self {
        Self {
            side: self.side.other(),
            id: self.id,
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Side::A => write!(f, "a{}", self.id),
            Side::B => write!(f, "b{}", self.id),
        }
    }
}

/// A highly computable, computably bipartite graph.
///
/// Implementations must be pure: every method returns the same answer for the
/// same arguments, and `degree` must equal the number of adjacent vertices on
/// the other side.
pub trait BipartiteOracle {
    fn adjacent(&self, a: VertexId, b: VertexId) -> bool;

    fn degree(&self, v: Vertex) -> u64;

    /// Side membership. Defaults to every positive number on both sides.
    fn contains(&self, _v: Vertex) -> bool {
        true
    }

    /// Direct neighbour enumeration for oracles that can do better than a
    /// scan. When present it must list exactly the vertices the scan would
    /// find; [`neighbors`] checks the count against `degree`.
    fn neighbor_hint(&self, _v: Vertex) -> Option<Vec<VertexId>> {
        None
    }

    /// True when `degree` is defined as the length of `neighbor_hint`, which
    /// makes the count check in [`neighbors`] vacuous.
    fn hint_is_exact(&self) -> bool {
        false
    }
}

impl<G: BipartiteOracle + ?Sized> BipartiteOracle for &G {
    fn adjacent(&self, a: VertexId, b: VertexId) -> bool {
        (**self).adjacent(a, b)
    }
    fn degree(&self, v: Vertex) -> u64 {
        (**self).degree(v)
    }
    fn contains(&self, v: Vertex) -> bool {
        (**self).contains(v)
    }
    fn neighbor_hint(&self, v: Vertex) -> Option<Vec<VertexId>> {
        (**self).neighbor_hint(v)
    }
    fn hint_is_exact(&self) -> bool {
        (**self).hint_is_exact()
    }
}

fn edge_between<G: BipartiteOracle + ?Sized>(g: &G, v: Vertex, w: VertexId) -> bool {
    match v.side {
        Side::A => g.adjacent(v.id, w),
        Side::B => g.adjacent(w, v.id),
    }
}

/// Neighbours of `v` in ascending order, using [`DEFAULT_SCAN_CAP`].
pub fn neighbors<G: BipartiteOracle + ?Sized>(
    g: &G,
    v: Vertex,
) -> Result<Vec<VertexId>, GraphError> {
    neighbors_with_cap(g, v, DEFAULT_SCAN_CAP)
}

/// Neighbours of `v` in ascending order.
///
/// Without a hint this scans `1, 2, ...` on the other side until `degree(v)`
/// adjacent vertices are found. Reaching `scan_cap` first is reported as an
/// oracle inconsistency instead of looping forever.
pub fn neighbors_with_cap<G: BipartiteOracle + ?Sized>(
    g: &G,
    v: Vertex,
    scan_cap: u64,
) -> Result<Vec<VertexId>, GraphError> {
    if let Some(mut hint) = g.neighbor_hint(v) {
        hint.sort_unstable();
        hint.dedup();
        if g.hint_is_exact() {
            return Ok(hint);
        }
        let degree = g.degree(v);
        if hint.len() as u64 != degree {
            return Err(GraphError::OracleInconsistency {
                vertex: v,
                degree,
                found: hint.len() as u64,
                detail: " (direct enumeration)".into(),
            });
        }
        return Ok(hint);
    }
    let degree = g.degree(v);
    let other = v.side.other();
    let mut out = Vec::with_capacity(degree as usize);
    let mut candidate = 1u64;
    while (out.len() as u64) < degree {
        if candidate > scan_cap {
            return Err(GraphError::OracleInconsistency {
                vertex: v,
                degree,
                found: out.len() as u64,
                detail: format!(" within scan cap {scan_cap}"),
            });
        }
        let w = VertexId(candidate);
        if g.contains(Vertex { side: other, id: w }) && edge_between(g, v, w) {
            out.push(w);
        }
        candidate += 1;
    }
    Ok(out)
}

/// Finite induced subgraph cut out of an oracle graph.
///
/// `boundary` holds the B-vertices sitting exactly at the cut radius.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteInducedSubgraph {
    pub a: Vec<VertexId>,
    pub b: Vec<VertexId>,
    pub edges: Vec<(VertexId, VertexId)>,
    pub boundary: Vec<VertexId>,
}

impl FiniteInducedSubgraph {
    /// Builds a subgraph from explicit pieces, normalizing order.
    pub fn new(
        a: impl IntoIterator<Item = u64>,
        b: impl IntoIterator<Item = u64>,
        edges: impl IntoIterator<Item = (u64, u64)>,
        boundary: impl IntoIterator<Item = u64>,
    ) -> Self {
        let a: BTreeSet<_> = a.into_iter().map(VertexId::of).collect();
        let b: BTreeSet<_> = b.into_iter().map(VertexId::of).collect();
        let edges: BTreeSet<_> = edges
            .into_iter()
            .map(|(x, y)| (VertexId::of(x), VertexId::of(y)))
            .collect();
        let boundary: BTreeSet<_> = boundary.into_iter().map(VertexId::of).collect();
        let g = Self {
            a: a.into_iter().collect(),
            b: b.into_iter().collect(),
            edges: edges.into_iter().collect(),
            boundary: boundary.into_iter().collect(),
        };
        debug_assert!(g.is_well_formed());
        g
    }

    /// Complete bipartite graph with A = {1..=p}, B = {1..=q}.
    pub fn complete(p: u64, q: u64) -> Self {
        let edges = (1..=p).flat_map(|x| (1..=q).map(move |y| (x, y)));
        Self::new(1..=p, 1..=q, edges, std::iter::empty())
    }

    pub fn is_well_formed(&self) -> bool {
        let sorted = |v: &[VertexId]| v.windows(2).all(|w| w[0] < w[1]);
        let a: BTreeSet<_> = self.a.iter().collect();
        let b: BTreeSet<_> = self.b.iter().collect();
        sorted(&self.a)
            && sorted(&self.b)
            && sorted(&self.boundary)
            && self
                .edges
                .iter()
                .all(|(x, y)| a.contains(x) && b.contains(y))
            && self.boundary.iter().all(|y| b.contains(y))
    }

    pub fn vertex_count(&self) -> usize {
        self.a.len() + self.b.len()
    }

    /// Adjacency lists of the A-side, indexed like `self.a`, holding indices
    /// into `self.b`. Lists are ascending.
    pub fn a_adjacency(&self) -> Vec<Vec<usize>> {
        let index = |side: &[VertexId], v: &VertexId| {
            side.binary_search(v).expect("edge endpoint is a vertex")
        };
        let mut adj = vec![Vec::new(); self.a.len()];
        let mut last: Option<(VertexId, usize)> = None;
        for (x, y) in &self.edges {
            let i = match last {
                Some((a, i)) if a == *x => i,
                _ => index(&self.a, x),
            };
            last = Some((*x, i));
            adj[i].push(index(&self.b, y));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("subgraph serializes")
    }

    /// Graphviz rendering. Boundary vertices are dashed.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph ball {\n  rankdir=LR;\n");
        for v in &self.a {
            out.push_str(&format!("  a{v} [label=\"a{v}\", shape=circle];\n"));
        }
        let boundary: BTreeSet<_> = self.boundary.iter().collect();
        for v in &self.b {
            let style = if boundary.contains(v) {
                ", style=dashed"
            } else {
                ""
            };
            out.push_str(&format!("  b{v} [label=\"b{v}\", shape=box{style}];\n"));
        }
        for (x, y) in &self.edges {
            out.push_str(&format!("  a{x} -- b{y};\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Induced subgraph on all vertices within `radius` of `center`, where every
/// edge has length one.
pub fn ball<G: BipartiteOracle + ?Sized>(
    g: &G,
    center: Vertex,
    radius: u64,
) -> Result<FiniteInducedSubgraph, GraphError> {
    let mut dist: FxHashMap<Vertex, u64> = FxHashMap::default();
    let mut adjacency: FxHashMap<Vertex, Vec<VertexId>> = FxHashMap::default();
    let mut queue = VecDeque::new();
    if g.contains(center) {
        dist.insert(center, 0);
        queue.push_back(center);
    }
    while let Some(v) = queue.pop_front() {
        let dv = dist[&v];
        if dv == radius {
            continue;
        }
        let nbrs = neighbors(g, v)?;
        for &w in &nbrs {
            let wv = Vertex {
                side: v.side.other(),
                id: w,
            };
            if !g.contains(wv) {
                continue;
            }
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(wv) {
                e.insert(dv + 1);
                queue.push_back(wv);
            }
        }
        adjacency.insert(v, nbrs);
    }

    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut boundary = Vec::new();
    for (v, &dv) in &dist {
        match v.side {
            Side::A => a.push(v.id),
            Side::B => {
                b.push(v.id);
                if dv == radius {
                    boundary.push(v.id);
                }
            }
        }
    }
    a.sort_unstable();
    b.sort_unstable();
    boundary.sort_unstable();

    // Vertices at distance < radius had their neighbours listed during the
    // search; an edge between two vertices at distance == radius cannot exist
    // in a bipartite graph, so every induced edge has one listed endpoint.
    let mut edges = Vec::new();
    if (center.side == Side::A) == (radius % 2 == 1) {
        // Every A-vertex is strictly inside, so its list is complete and the
        // edges come out sorted.
        for &x in &a {
            for &y in &adjacency[&Vertex {
                side: Side::A,
                id: x,
            }] {
                if dist.contains_key(&Vertex {
                    side: Side::B,
                    id: y,
                }) {
                    edges.push((x, y));
                }
            }
        }
    } else {
        for (v, nbrs) in &adjacency {
            for &w in nbrs {
                let wv = Vertex {
                    side: v.side.other(),
                    id: w,
                };
                if dist.contains_key(&wv) {
                    edges.push(match v.side {
                        Side::A => (v.id, w),
                        Side::B => (w, v.id),
                    });
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
    }
    Ok(FiniteInducedSubgraph {
        a,
        b,
        edges,
        boundary,
    })
}

/// Prefix check of A-reflectedness: every edge `(v1, v2)` with both numbers
/// at most `vertex_range` and `b_{v1}` present must be mirrored by an edge
/// `(a_{v2}, b_{v1})`. This inspects a finite prefix only.
pub fn is_a_reflected<G: BipartiteOracle + ?Sized>(g: &G, vertex_range: u64) -> bool {
    for v1 in 1..=vertex_range {
        let a1 = Vertex::a(v1);
        if !g.contains(a1) || !g.contains(a1.copy()) {
            continue;
        }
        for v2 in 1..=vertex_range {
            let b2 = Vertex::b(v2);
            if !g.contains(b2) || !g.adjacent(a1.id, b2.id) {
                continue;
            }
            if !g.contains(Vertex::a(v2)) || !g.adjacent(VertexId(v2), VertexId(v1)) {
                return false;
            }
        }
    }
    true
}

/// Explicit finite bipartite graph, useful as an oracle in tests and small
/// corpora.
#[derive(Clone, Debug, Default)]
pub struct ExplicitBipartite {
    a: BTreeSet<VertexId>,
    b: BTreeSet<VertexId>,
    edges: BTreeSet<(VertexId, VertexId)>,
}

impl ExplicitBipartite {
    pub fn new(
        a: impl IntoIterator<Item = u64>,
        b: impl IntoIterator<Item = u64>,
        edges: impl IntoIterator<Item = (u64, u64)>,
    ) -> Self {
        let a: BTreeSet<_> = a.into_iter().map(VertexId::of).collect();
        let b: BTreeSet<_> = b.into_iter().map(VertexId::of).collect();
        let edges = edges
            .into_iter()
            .map(|(x, y)| (VertexId::of(x), VertexId::of(y)))
            .filter(|(x, y)| a.contains(x) && b.contains(y))
            .collect();
        Self { a, b, edges }
    }

    pub fn from_subgraph(g: &FiniteInducedSubgraph) -> Self {
        Self {
            a: g.a.iter().copied().collect(),
            b: g.b.iter().copied().collect(),
            edges: g.edges.iter().copied().collect(),
        }
    }
}

impl BipartiteOracle for ExplicitBipartite {
    fn adjacent(&self, a: VertexId, b: VertexId) -> bool {
        self.edges.contains(&(a, b))
    }

    fn degree(&self, v: Vertex) -> u64 {
        if !self.contains(v) {
            return 0;
        }
        match v.side {
            Side::A => self.edges.iter().filter(|(x, _)| *x == v.id).count() as u64,
            Side::B => self.edges.iter().filter(|(_, y)| *y == v.id).count() as u64,
        }
    }

    fn contains(&self, v: Vertex) -> bool {
        match v.side {
            Side::A => self.a.contains(&v.id),
            Side::B => self.b.contains(&v.id),
        }
    }
}
