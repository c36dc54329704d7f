//! Computable entourages on the positive integers.
//!
//! An [`Entourage`] is a decidable symmetric relation whose sections `E[x]`
//! are finite and computable. The regular tree generator gives the standard
//! non-amenable example; [`SymmetricDouble`] turns a relation into the
//! bipartite graph the matcher works on.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::graph::{BipartiteOracle, Vertex, VertexId};

pub trait Entourage {
    fn member(&self, x: VertexId, y: VertexId) -> bool;

    /// `E[x]` in ascending order.
    fn section(&self, x: VertexId) -> Vec<VertexId>;

    /// `E[F]`, the union of the sections of `F`.
    fn image<'a, I>(&self, set: I) -> BTreeSet<VertexId>
    where
        I: IntoIterator<Item = &'a VertexId>,
    {
        set.into_iter().flat_map(|&x| self.section(x)).collect()
    }
}

impl<E: Entourage + ?Sized> Entourage for &E {
    fn member(&self, x: VertexId, y: VertexId) -> bool {
        (**self).member(x, y)
    }
    fn section(&self, x: VertexId) -> Vec<VertexId> {
        (**self).section(x)
    }
}

/// The diagonal relation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Diagonal;

impl Entourage for Diagonal {
    fn member(&self, x: VertexId, y: VertexId) -> bool {
        x == y
    }
    fn section(&self, x: VertexId) -> Vec<VertexId> {
        vec![x]
    }
}

/// `R = E \ Δ`.
#[derive(Clone, Debug)]
pub struct StripDiagonal<E>(pub E);

pub fn strip_diagonal<E: Entourage>(e: E) -> StripDiagonal<E> {
    StripDiagonal(e)
}

impl<E: Entourage> Entourage for StripDiagonal<E> {
    fn member(&self, x: VertexId, y: VertexId) -> bool {
        x != y && self.0.member(x, y)
    }
    fn section(&self, x: VertexId) -> Vec<VertexId> {
        let mut s = self.0.section(x);
        s.retain(|&y| y != x);
        s
    }
}

/// `|E[F]| >= (d + 2)|F|`.
pub fn check_expansion<E: Entourage + ?Sized>(e: &E, d: u64, set: &BTreeSet<VertexId>) -> bool {
    assert!(!set.is_empty(), "expansion is checked on nonempty sets");
    let image = set
        .iter()
        .flat_map(|&x| e.section(x))
        .collect::<BTreeSet<_>>();
    image.len() as u64 >= (d + 2) * set.len() as u64
}

/// `|⋃ (E[x] \ {x})| >= d|F|`, the condition for `F` on the A-side of the
/// double of `E \ Δ`.
pub fn check_neighbourhood<E: Entourage + ?Sized>(e: &E, d: u64, set: &BTreeSet<VertexId>) -> bool {
    assert!(
        !set.is_empty(),
        "neighbourhoods are checked on nonempty sets"
    );
    let image = set
        .iter()
        .flat_map(|&x| e.section(x).into_iter().filter(move |&y| y != x))
        .collect::<BTreeSet<_>>();
    image.len() as u64 >= d * set.len() as u64
}

/// The `r`-regular tree with breadth-first numbering, as `Δ ∪ adjacency`.
///
/// The root is 1 and its children are `2..=r+1`. Every other vertex `v` has
/// `r - 1` children numbered consecutively from `r + 2 + (v - 2)(r - 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeEntourage {
    r: u64,
}

impl TreeEntourage {
    pub fn new(r: u64) -> Option<Self> {
        (r >= 3).then_some(Self { r })
    }

    pub fn degree(&self) -> u64 {
        self.r
    }

    pub fn parent(&self, v: u64) -> Option<u64> {
        match v {
            0 | 1 => None,
            v if v <= self.r + 1 => Some(1),
            v => Some((v - self.r - 2) / (self.r - 1) + 2),
        }
    }

    pub fn children(&self, v: u64) -> std::ops::RangeInclusive<u64> {
        if v == 1 {
            2..=self.r + 1
        } else {
            let first = self.r + 2 + (v - 2) * (self.r - 1);
            first..=first + self.r - 2
        }
    }

    /// Tree neighbours of `v` (without `v` itself), ascending.
    pub fn adjacency(&self, v: u64) -> Vec<u64> {
        let mut out: Vec<u64> = self.parent(v).into_iter().collect();
        out.extend(self.children(v));
        out
    }

    pub fn depth(&self, mut v: u64) -> u64 {
        let mut depth = 0;
        while let Some(p) = self.parent(v) {
            v = p;
            depth += 1;
        }
        depth
    }
}

/// `r`-regular tree entourage; rejects `r < 3`.
pub fn build_tree_entourage(r: u64) -> Option<TreeEntourage> {
    TreeEntourage::new(r)
}

impl Entourage for TreeEntourage {
    fn member(&self, x: VertexId, y: VertexId) -> bool {
        let (x, y) = (x.get(), y.get());
        x == y || self.parent(x) == Some(y) || self.parent(y) == Some(x)
    }

    fn section(&self, x: VertexId) -> Vec<VertexId> {
        let v = x.get();
        let mut out: Vec<u64> = self.parent(v).into_iter().collect();
        out.push(v);
        out.extend(self.children(v));
        out.into_iter().map(VertexId::of).collect()
    }
}

/// Bipartite double of a symmetric relation: `A = B = {1, 2, ...}` and
/// `a ~ b` iff `(a, b)` is in the relation.
#[derive(Clone, Debug)]
pub struct SymmetricDouble<E>(pub E);

impl<E: Entourage> BipartiteOracle for SymmetricDouble<E> {
    fn adjacent(&self, a: VertexId, b: VertexId) -> bool {
        self.0.member(a, b)
    }

    fn degree(&self, v: Vertex) -> u64 {
        self.0.section(v.id).len() as u64
    }

    fn neighbor_hint(&self, v: Vertex) -> Option<Vec<VertexId>> {
        Some(self.0.section(v.id))
    }

    fn hint_is_exact(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ball, is_a_reflected, neighbors, neighbors_with_cap};
    use std::collections::{HashMap, VecDeque};

    fn ids(v: &[u64]) -> Vec<VertexId> {
        v.iter().copied().map(VertexId::of).collect()
    }

    /// Independent BFS numbering of the r-regular tree: assign numbers in
    /// breadth-first order, children of each vertex consecutively.
    fn bfs_tree(r: u64, count: u64) -> HashMap<u64, Vec<u64>> {
        let mut adj: HashMap<u64, Vec<u64>> = HashMap::new();
        let mut next = 2u64;
        let mut queue = VecDeque::from([1u64]);
        while let Some(v) = queue.pop_front() {
            if next > count {
                break;
            }
            let kids = if v == 1 { r } else { r - 1 };
            for _ in 0..kids {
                adj.entry(v).or_default().push(next);
                adj.entry(next).or_default().push(v);
                queue.push_back(next);
                next += 1;
            }
        }
        adj
    }

    #[test]
    fn tree_sections() {
        let t = build_tree_entourage(6).unwrap();
        assert_eq!(t.section(VertexId::of(1)), ids(&[1, 2, 3, 4, 5, 6, 7]));
        assert_eq!(t.section(VertexId::of(2)), ids(&[1, 2, 8, 9, 10, 11, 12]));
        assert!(t.member(VertexId::of(2), VertexId::of(1)));
        assert!(t.member(VertexId::of(1), VertexId::of(2)));
        assert!(build_tree_entourage(2).is_none());
    }

    #[test]
    fn numbering_matches_bfs_oracle() {
        for r in [3u64, 6, 7] {
            let oracle = bfs_tree(r, 2000);
            let t = TreeEntourage::new(r).unwrap();
            for v in 1..=200u64 {
                let mut expected = oracle[&v].clone();
                expected.sort_unstable();
                assert_eq!(t.adjacency(v), expected, "r={r} v={v}");
            }
        }
    }

    #[test]
    fn root_neighbors_in_double() {
        let g = SymmetricDouble(strip_diagonal(build_tree_entourage(6).unwrap()));
        assert_eq!(
            neighbors(&g, Vertex::a(1)).unwrap(),
            ids(&[2, 3, 4, 5, 6, 7])
        );
    }

    #[test]
    fn scan_agrees_with_direct_enumeration() {
        struct ScanOnly<E>(E);
        impl<E: Entourage> BipartiteOracle for ScanOnly<E> {
            fn adjacent(&self, a: VertexId, b: VertexId) -> bool {
                self.0.member(a, b)
            }
            fn degree(&self, v: Vertex) -> u64 {
                self.0.section(v.id).len() as u64
            }
        }
        let t = strip_diagonal(build_tree_entourage(6).unwrap());
        let fast = SymmetricDouble(t.clone());
        let slow = ScanOnly(t);
        for v in 1..=60 {
            for side in [Vertex::a(v), Vertex::b(v)] {
                assert_eq!(
                    neighbors(&fast, side).unwrap(),
                    neighbors_with_cap(&slow, side, 10_000).unwrap()
                );
            }
        }
    }

    #[test]
    fn radius_two_ball_in_tree_double() {
        // Brute-force count: B at distance 1 are the 6 tree neighbours, A at
        // distance 2 are the root plus vertices at tree distance 2.
        let g = SymmetricDouble(strip_diagonal(build_tree_entourage(6).unwrap()));
        let b = ball(&g, Vertex::a(1), 2).unwrap();
        assert_eq!(b.b.len(), 6);
        assert_eq!(b.a.len(), 1 + 30);
        assert_eq!(b.a.len() + b.b.len(), 37);
        assert!(b.boundary.is_empty());
        let b3 = ball(&g, Vertex::a(1), 3).unwrap();
        assert_eq!(b3.boundary.len(), 6 * 5 * 5);
        assert!(b.a.iter().all(|v| b3.a.contains(v)));
    }

    #[test]
    fn symmetric_double_is_reflected() {
        let g = SymmetricDouble(strip_diagonal(build_tree_entourage(6).unwrap()));
        assert!(is_a_reflected(&g, 60));
    }

    #[test]
    fn strip_diagonal_examples() {
        let none = strip_diagonal(Diagonal);
        for x in 1..20 {
            assert!(none.section(VertexId::of(x)).is_empty());
        }
        let t = build_tree_entourage(6).unwrap();
        let r = strip_diagonal(t);
        for x in 1..50u64 {
            assert_eq!(r.section(VertexId::of(x)), ids(&t.adjacency(x)));
        }
    }

    #[test]
    fn expansion_examples() {
        let t = build_tree_entourage(6).unwrap();
        let root: BTreeSet<_> = [VertexId::of(1)].into();
        assert!(check_expansion(&t, 3, &root));
        assert_eq!(t.image(&root).len(), 7);
        let ball1: BTreeSet<_> = (1..=7).map(VertexId::of).collect();
        assert_eq!(t.image(&ball1).len(), 37);
        assert!(check_expansion(&t, 3, &ball1));
        assert!(!check_expansion(&Diagonal, 1, &root));
    }
}
