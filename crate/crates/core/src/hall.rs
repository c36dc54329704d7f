//! Finite-scale Hall machinery.
//!
//! * [`check_harem_condition`] decides the k-harem condition by exhaustive
//!   subset enumeration.
//! * [`brute_force_matching`] searches for a perfect (1,k)-matching by
//!   backtracking; it is the independent oracle for the checker.
//! * [`boundary_relaxed_matching`] solves the (1,d)-matching problem used
//!   inside each matcher step as a feasible flow with lower bounds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::flow::{FlowNetwork, INF};
use crate::graph::{FiniteInducedSubgraph, Side, VertexId};

/// Largest side accepted by [`check_harem_condition`].
pub const SUBSET_SIDE_LIMIT: usize = 20;
/// Largest A-side accepted by [`brute_force_matching`].
pub const BRUTE_FORCE_A_LIMIT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HallError {
    #[error("{side:?} side has {size} vertices, limit is {limit}")]
    SizeLimit {
        side: Side,
        size: usize,
        limit: usize,
    },
    #[error("no (1,{d})-matching: A-vertices {cut_a:?} reach only {cut_b:?} (short by {deficit})")]
    Infeasible {
        d: u64,
        cut_a: Vec<VertexId>,
        cut_b: Vec<VertexId>,
        deficit: u64,
    },
    #[error("witness must satisfy h(0) = 0, got {0}")]
    WitnessAtZero(u64),
    #[error("b-vertex {0} appears in two pairs")]
    DoubleCover(VertexId),
}

/// A set of pairs `(a, b)` covering each `b` at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Matching {
    pairs: BTreeSet<(VertexId, VertexId)>,
    owner: BTreeMap<VertexId, VertexId>,
}

impl Matching {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> Result<Self, HallError> {
        let mut list: Vec<_> = pairs.into_iter().collect();
        list.sort_unstable();
        list.dedup();
        let mut by_b: Vec<_> = list.iter().map(|&(a, b)| (b, a)).collect();
        by_b.sort_unstable();
        if let Some(w) = by_b.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(HallError::DoubleCover(w[0].0));
        }
        Ok(Self {
            pairs: list.into_iter().collect(),
            owner: by_b.into_iter().collect(),
        })
    }

    pub fn insert(&mut self, a: VertexId, b: VertexId) -> Result<(), HallError> {
        match self.owner.get(&b) {
            Some(&x) if x == a => Ok(()),
            Some(_) => Err(HallError::DoubleCover(b)),
            None => {
                self.owner.insert(b, a);
                self.pairs.insert((a, b));
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn partner_of_b(&self, b: VertexId) -> Option<VertexId> {
        self.owner.get(&b).copied()
    }

    /// Partners of `a`, ascending.
    pub fn partners_of_a(&self, a: VertexId) -> Vec<VertexId> {
        self.pairs
            .range((a, VertexId::of(1))..)
            .take_while(|(x, _)| *x == a)
            .map(|&(_, b)| b)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matching serializes")
    }

    /// Graphviz rendering of `host` with the matched edges in red.
    pub fn to_dot(&self, host: &FiniteInducedSubgraph) -> String {
        let mut out = String::from("graph matching {\n  rankdir=LR;\n");
        for v in &host.a {
            out.push_str(&format!("  a{v} [shape=circle];\n"));
        }
        for v in &host.b {
            out.push_str(&format!("  b{v} [shape=box];\n"));
        }
        for &(a, b) in &host.edges {
            if self.pairs.contains(&(a, b)) {
                out.push_str(&format!("  a{a} -- b{b} [color=red, penwidth=2];\n"));
            } else {
                out.push_str(&format!("  a{a} -- b{b} [color=gray];\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

impl Serialize for Matching {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.pairs.iter())
    }
}

impl<'de> Deserialize<'de> for Matching {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs: Vec<(VertexId, VertexId)> = Vec::deserialize(d)?;
        Matching::from_pairs(pairs).map_err(serde::de::Error::custom)
    }
}

/// Witness `h` of the computable expanding harem condition, possibly shifted.
///
/// A shift by `c` produces `n -> h(n + c)` for `n > 0` and `0` at `0`.
/// Shifts compose additively.
#[derive(Clone)]
pub struct HallWitness {
    base: Arc<dyn Fn(u64) -> u64 + Send + Sync>,
    offset: u64,
}

impl fmt::Debug for HallWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HallWitness")
            .field("offset", &self.offset)
            .finish_non_exhaustive()
    }
}

impl HallWitness {
    pub fn new(h: impl Fn(u64) -> u64 + Send + Sync + 'static) -> Result<Self, HallError> {
        match h(0) {
            0 => Ok(Self {
                base: Arc::new(h),
                offset: 0,
            }),
            v => Err(HallError::WitnessAtZero(v)),
        }
    }

    pub fn identity() -> Self {
        Self::new(|n| n).expect("identity fixes 0")
    }

    pub fn zero() -> Self {
        Self::new(|_| 0).expect("zero fixes 0")
    }

    pub fn eval(&self, n: u64) -> u64 {
        if n == 0 {
            0
        } else {
            (self.base)(n + self.offset)
        }
    }

    /// Total shift applied so far.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn shifted(&self, c: u64) -> Self {
        Self {
            base: Arc::clone(&self.base),
            offset: self.offset + c,
        }
    }
}

pub fn shift_witness(h: &HallWitness, c: u64) -> HallWitness {
    h.shifted(c)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HaremVerdict {
    Holds,
    /// A nonempty set on `side` whose neighbourhood is too small.
    Violated {
        side: Side,
        set: Vec<VertexId>,
        neighborhood: usize,
    },
}

impl HaremVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, HaremVerdict::Holds)
    }
}

fn side_limit(side: Side, size: usize, limit: usize) -> Result<(), HallError> {
    if size > limit {
        Err(HallError::SizeLimit { side, size, limit })
    } else {
        Ok(())
    }
}

/// Exhaustively checks `|N(X)| >= k|X|` for every nonempty `X ⊆ A` and
/// `k|N(Y)| >= |Y|` for every nonempty `Y ⊆ B`. Subsets are visited in
/// decreasing bitmask order starting from the whole side, A first; the first
/// violation is returned.
pub fn check_harem_condition(g: &FiniteInducedSubgraph, k: u64) -> Result<HaremVerdict, HallError> {
    side_limit(Side::A, g.a.len(), SUBSET_SIDE_LIMIT)?;
    side_limit(Side::B, g.b.len(), SUBSET_SIDE_LIMIT)?;
    let adj = g.a_adjacency();
    let a_mask: Vec<u32> = adj
        .iter()
        .map(|l| l.iter().fold(0u32, |m, &j| m | (1 << j)))
        .collect();
    let mut b_mask = vec![0u32; g.b.len()];
    for (i, list) in adj.iter().enumerate() {
        for &j in list {
            b_mask[j] |= 1 << i;
        }
    }
    let members = |ids: &[VertexId], mask: u32| -> Vec<VertexId> {
        ids.iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &v)| v)
            .collect()
    };

    for mask in (1u32..(1u32 << g.a.len())).rev() {
        let nbhd = union_of(&a_mask, mask).count_ones() as u64;
        if nbhd < k * mask.count_ones() as u64 {
            return Ok(HaremVerdict::Violated {
                side: Side::A,
                set: members(&g.a, mask),
                neighborhood: nbhd as usize,
            });
        }
    }
    for mask in (1u32..(1u32 << g.b.len())).rev() {
        let nbhd = union_of(&b_mask, mask).count_ones() as u64;
        if k * nbhd < mask.count_ones() as u64 {
            return Ok(HaremVerdict::Violated {
                side: Side::B,
                set: members(&g.b, mask),
                neighborhood: nbhd as usize,
            });
        }
    }
    Ok(HaremVerdict::Holds)
}

fn union_of(masks: &[u32], set: u32) -> u32 {
    let mut acc = 0;
    let mut rest = set;
    while rest != 0 {
        let i = rest.trailing_zeros() as usize;
        acc |= masks[i];
        rest &= rest - 1;
    }
    acc
}

/// Exhaustive search for a perfect (1,k)-matching.
///
/// B-vertices are assigned in ascending order, each to the least admissible
/// A-neighbour first, so the first complete assignment is the
/// lexicographically least one.
pub fn brute_force_matching(
    g: &FiniteInducedSubgraph,
    k: u64,
) -> Result<Option<Matching>, HallError> {
    side_limit(Side::A, g.a.len(), BRUTE_FORCE_A_LIMIT)?;
    side_limit(Side::B, g.b.len(), BRUTE_FORCE_A_LIMIT * k.max(1) as usize)?;
    if k == 0 || g.b.len() as u64 != k * g.a.len() as u64 {
        // Every a takes k partners and every b exactly one.
        return Ok(None);
    }
    let adj = g.a_adjacency();
    let mut b_adj = vec![Vec::new(); g.b.len()];
    for (i, list) in adj.iter().enumerate() {
        for &j in list {
            b_adj[j].push(i);
        }
    }
    for list in &mut b_adj {
        list.sort_unstable();
    }

    struct Search<'a> {
        b_adj: &'a [Vec<usize>],
        adj: &'a [Vec<usize>],
        k: usize,
        load: Vec<usize>,
        assign: Vec<usize>,
    }

    impl Search<'_> {
        fn run(&mut self, j: usize) -> bool {
            if j == self.b_adj.len() {
                return self.load.iter().all(|&l| l == self.k);
            }
            for idx in 0..self.b_adj[j].len() {
                let i = self.b_adj[j][idx];
                if self.load[i] == self.k {
                    continue;
                }
                self.load[i] += 1;
                self.assign[j] = i;
                if self.can_finish(j + 1) && self.run(j + 1) {
                    return true;
                }
                self.load[i] -= 1;
            }
            false
        }

        /// Each a must still be able to reach its quota from unassigned b's.
        fn can_finish(&self, next: usize) -> bool {
            self.adj.iter().enumerate().all(|(i, list)| {
                self.k - self.load[i] <= list.iter().filter(|&&j| j >= next).count()
            })
        }
    }

    let mut search = Search {
        b_adj: &b_adj,
        adj: &adj,
        k: k as usize,
        load: vec![0; g.a.len()],
        assign: vec![usize::MAX; g.b.len()],
    };
    if !search.can_finish(0) || !search.run(0) {
        return Ok(None);
    }
    let pairs = search
        .assign
        .iter()
        .enumerate()
        .map(|(j, &i)| (g.a[i], g.b[j]));
    Ok(Some(Matching::from_pairs(pairs)?))
}

/// Finds a (1,d)-matching in which every A-vertex has exactly `d` partners,
/// every interior B-vertex exactly one partner and every boundary B-vertex at
/// most one.
///
/// Solved as a feasible flow with lower bounds. Arcs are added in ascending
/// vertex order, which fixes the result. On failure the residual cut names a
/// set of A-vertices whose available neighbourhood is too small.
pub fn boundary_relaxed_matching(g: &FiniteInducedSubgraph, d: u64) -> Result<Matching, HallError> {
    let na = g.a.len();
    let nb = g.b.len();
    // 0 = s, 1 = t, 2 = s', 3 = t'
    let (s, t, s2, t2) = (0, 1, 2, 3);
    let a_node = |i: usize| 4 + i;
    let b_node = |j: usize| 4 + na + j;
    let mut net = FlowNetwork::with_capacity(4 + na + nb, 3 + na + nb + g.edges.len());

    let on_boundary = |b: &VertexId| g.boundary.binary_search(b).is_ok();
    let interior = g.b.iter().filter(|b| !on_boundary(b)).count() as u64;
    let demand = d * na as u64 + interior;

    net.add_arc(t, s, INF);
    for i in 0..na {
        net.add_arc(s2, a_node(i), d);
    }
    net.add_arc(s, t2, d * na as u64);
    net.add_arc(s2, t, interior);
    let adj = g.a_adjacency();
    let mut edge_arcs = Vec::with_capacity(g.edges.len());
    for (i, list) in adj.iter().enumerate() {
        for &j in list {
            edge_arcs.push((i, j, net.add_arc(a_node(i), b_node(j), 1)));
        }
    }
    for (j, b) in g.b.iter().enumerate() {
        if on_boundary(b) {
            net.add_arc(b_node(j), t, 1);
        } else {
            net.add_arc(b_node(j), t2, 1);
        }
    }

    let flow = net.max_flow(s2, t2);
    if flow < demand {
        let reach = net.residual_reach(s2);
        let cut_a = (0..na)
            .filter(|&i| reach[a_node(i)])
            .map(|i| g.a[i])
            .collect();
        let cut_b = (0..nb)
            .filter(|&j| reach[b_node(j)])
            .map(|j| g.b[j])
            .collect();
        return Err(HallError::Infeasible {
            d,
            cut_a,
            cut_b,
            deficit: demand - flow,
        });
    }
    let pairs = edge_arcs
        .into_iter()
        .filter(|&(_, _, id)| net.flow(id) == 1)
        .map(|(i, j, _)| (g.a[i], g.b[j]));
    Matching::from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: u64) -> VertexId {
        VertexId::of(x)
    }

    #[test]
    fn complete_one_one() {
        let g = FiniteInducedSubgraph::complete(1, 1);
        assert!(check_harem_condition(&g, 1).unwrap().holds());
        let g = FiniteInducedSubgraph::complete(3, 3);
        assert!(check_harem_condition(&g, 1).unwrap().holds());
    }

    #[test]
    fn k33_fails_for_two() {
        let g = FiniteInducedSubgraph::complete(3, 3);
        match check_harem_condition(&g, 2).unwrap() {
            HaremVerdict::Violated {
                side,
                set,
                neighborhood,
            } => {
                assert_eq!(side, Side::A);
                assert_eq!(set, g.a);
                assert_eq!(neighborhood, 3);
            }
            HaremVerdict::Holds => panic!("K33 has no (1,2)-matching"),
        }
        assert_eq!(brute_force_matching(&g, 2).unwrap(), None);
    }

    #[test]
    fn star_is_a_three_harem() {
        let g = FiniteInducedSubgraph::complete(1, 3);
        assert!(check_harem_condition(&g, 3).unwrap().holds());
        let m = brute_force_matching(&g, 3).unwrap().unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.partners_of_a(v(1)), vec![v(1), v(2), v(3)]);
    }

    #[test]
    fn subset_limit() {
        let g = FiniteInducedSubgraph::complete(21, 1);
        assert!(matches!(
            check_harem_condition(&g, 1),
            Err(HallError::SizeLimit { side: Side::A, .. })
        ));
        let g = FiniteInducedSubgraph::complete(13, 13);
        assert!(matches!(
            brute_force_matching(&g, 1),
            Err(HallError::SizeLimit { .. })
        ));
    }

    #[test]
    fn brute_force_is_lexicographically_least() {
        let g = FiniteInducedSubgraph::complete(2, 2);
        let m = brute_force_matching(&g, 1).unwrap().unwrap();
        assert_eq!(
            m.pairs().collect::<Vec<_>>(),
            vec![(v(1), v(1)), (v(2), v(2))]
        );
    }

    #[test]
    fn matching_rejects_double_cover() {
        let err = Matching::from_pairs([(v(1), v(1)), (v(2), v(1))]).unwrap_err();
        assert_eq!(err, HallError::DoubleCover(v(1)));
        let m = Matching::from_pairs([(v(2), v(1)), (v(1), v(3))]).unwrap();
        assert_eq!(m.to_json(), "[[1,3],[2,1]]");
        let back: Matching = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Matching>("[[1,1],[2,1]]").is_err());
    }

    #[test]
    fn witness_shifts() {
        let h = HallWitness::identity();
        let s = shift_witness(&h, 3);
        assert_eq!(s.eval(2), 5);
        assert_eq!(s.eval(0), 0);
        assert_eq!(shift_witness(&h, 8).eval(1), 9);
        assert_eq!(shift_witness(&s, 2).eval(1), 6);
        assert!(matches!(
            HallWitness::new(|n| n + 1),
            Err(HallError::WitnessAtZero(1))
        ));
        let wild = HallWitness::new(|n| n * n + 7 * (n > 0) as u64).unwrap();
        for c in 0..5 {
            assert_eq!(wild.shifted(c).eval(0), 0);
        }
    }

    #[test]
    fn relaxed_matching_on_star() {
        let g = FiniteInducedSubgraph::complete(1, 4);
        let m = boundary_relaxed_matching(&g, 4).unwrap();
        assert_eq!(m.len(), 4);
    }

    #[test]
    fn relaxed_matching_infeasible_when_shared() {
        for d in 2..5u64 {
            let g = FiniteInducedSubgraph::new(
                [1, 2],
                1..=d + 1,
                (1..=2).flat_map(|a| (1..=d + 1).map(move |b| (a, b))),
                [d + 1],
            );
            match boundary_relaxed_matching(&g, d) {
                Err(HallError::Infeasible { cut_a, .. }) => assert!(!cut_a.is_empty()),
                other => panic!("expected infeasible, got {other:?}"),
            }
        }
    }

    #[test]
    fn relaxed_matching_leaves_boundary_uncovered() {
        // a1 - b1, b2, b3 with b3 on the boundary, d = 2.
        let g = FiniteInducedSubgraph::new([1], [1, 2, 3], [(1, 1), (1, 2), (1, 3)], [3]);
        let m = boundary_relaxed_matching(&g, 2).unwrap();
        assert_eq!(m.partners_of_a(v(1)), vec![v(1), v(2)]);
        // Interior vertices must be covered: only one a, three interior b's.
        let g = FiniteInducedSubgraph::new([1], [1, 2, 3], [(1, 1), (1, 2), (1, 3)], []);
        assert!(boundary_relaxed_matching(&g, 2).is_err());
    }

    fn arb_graph(na: u64, nb: u64) -> impl Strategy<Value = FiniteInducedSubgraph> {
        proptest::collection::vec(any::<bool>(), (na * nb) as usize).prop_map(move |bits| {
            let edges = (0..na * nb)
                .filter(|&i| bits[i as usize])
                .map(|i| (i / nb + 1, i % nb + 1));
            FiniteInducedSubgraph::new(1..=na, 1..=nb, edges, std::iter::empty())
        })
    }

    fn check_matching(g: &FiniteInducedSubgraph, m: &Matching, k: u64) {
        let edges: BTreeSet<_> = g.edges.iter().copied().collect();
        assert!(m.pairs().all(|p| edges.contains(&p)));
        for &a in &g.a {
            assert_eq!(m.partners_of_a(a).len() as u64, k);
        }
        for &b in &g.b {
            assert!(m.partner_of_b(b).is_some());
        }
    }

    proptest! {
        #[test]
        fn hall_equivalence_six_by_six(g in arb_graph(3, 6), k in 1u64..=3) {
            let verdict = check_harem_condition(&g, k).unwrap();
            let found = brute_force_matching(&g, k).unwrap();
            prop_assert_eq!(verdict.holds(), found.is_some());
            if let Some(m) = found {
                check_matching(&g, &m, k);
            }
        }

        #[test]
        fn relaxed_matching_contract(g in arb_graph(3, 8), d in 1u64..=3, cut in 0usize..8) {
            let boundary: Vec<_> = g.b.iter().copied().filter(|b| b.get() as usize > cut).collect();
            let g = FiniteInducedSubgraph { boundary, ..g };
            if let Ok(m) = boundary_relaxed_matching(&g, d) {
                for &a in &g.a {
                    prop_assert_eq!(m.partners_of_a(a).len() as u64, d);
                }
                for &b in &g.b {
                    if !g.boundary.contains(&b) {
                        prop_assert!(m.partner_of_b(b).is_some());
                    }
                }
                prop_assert_eq!(boundary_relaxed_matching(&g, d).unwrap(), m);
            } else if g.boundary.is_empty() && g.b.len() as u64 == d * g.a.len() as u64 {
                // Without a boundary the problem is exactly a perfect matching.
                prop_assert!(brute_force_matching(&g, d).unwrap().is_none());
            }
        }
    }
}
