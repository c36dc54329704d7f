//! Free semi-regular pairs of permutations on a 4-regular forest.
//!
//! Each tree of the forest is labelled as a Cayley graph of the free group
//! on `s, p`: every vertex gets one neighbour in each direction `s⁺, s⁻, p⁺,
//! p⁻`, and an edge labelled `s⁺` from `v` is labelled `s⁻` from the other
//! end. Then `σ` moves every vertex along its `s⁺` edge and `π` along its
//! `p⁺` edge. Both act on each tree by translations along lines, the two
//! lines through the least vertex of a tree meet only there, and no
//! nontrivial reduced word has a fixed point.
//!
//! Labels are built lazily along the path from the least vertex of the tree:
//! at that vertex the sorted neighbours `n1 < n2 < n3 < n4` get `s⁺, s⁻, p⁺,
//! p⁻`; elsewhere the edge back toward it is forced and the other three
//! neighbours take the remaining directions in ascending order.

use std::collections::BTreeMap;

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entourage::{Entourage, StripDiagonal, SymmetricDouble};
use crate::forest::{within_two_steps, ForestError, ForestFunction};
use crate::graph::{BipartiteOracle, VertexId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WobbleError {
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("{vertex} has {found} forest neighbours, expected 4")]
    Degree { vertex: VertexId, found: usize },
    #[error("labels clash on the edge {0} - {1}")]
    Clash(VertexId, VertexId),
}

/// Edge directions, `s⁺, s⁻, p⁺, p⁻` in that order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    SPlus,
    SMinus,
    PPlus,
    PMinus,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::SPlus,
        Direction::SMinus,
        Direction::PPlus,
        Direction::PMinus,
    ];

    pub fn inverse(self) -> Self {
        match self {
            Direction::SPlus => Direction::SMinus,
            Direction::SMinus => Direction::SPlus,
            Direction::PPlus => Direction::PMinus,
            Direction::PMinus => Direction::PPlus,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::SPlus => "s",
            Direction::SMinus => "S",
            Direction::PPlus => "p",
            Direction::PMinus => "P",
        }
    }
}

/// Neighbours of one vertex indexed by [`Direction::index`].
pub type EdgeLabels = [VertexId; 4];

/// `σ` and `π` over a 4-regular forest.
pub struct Wobbling<G> {
    forest: ForestFunction<G>,
    neighbors: HashMap<VertexId, [VertexId; 4]>,
    labels: HashMap<VertexId, EdgeLabels>,
    least_in_tree: HashMap<VertexId, VertexId>,
    scanned: u64,
}

impl<G: BipartiteOracle> Wobbling<G> {
    /// The forest must come from a matcher with `d = 4`.
    pub fn new(forest: ForestFunction<G>) -> Self {
        Self {
            forest,
            neighbors: HashMap::default(),
            labels: HashMap::default(),
            least_in_tree: HashMap::default(),
            scanned: 0,
        }
    }

    pub fn forest(&self) -> &ForestFunction<G> {
        &self.forest
    }

    pub fn forest_mut(&mut self) -> &mut ForestFunction<G> {
        &mut self.forest
    }

    fn four(vertex: VertexId, mut list: Vec<VertexId>) -> Result<[VertexId; 4], WobbleError> {
        list.sort_unstable();
        list.dedup();
        <[VertexId; 4]>::try_from(list.as_slice()).map_err(|_| WobbleError::Degree {
            vertex,
            found: list.len(),
        })
    }

    /// The four forest neighbours of `n`, ascending: `f⋆(n)` and its
    /// preimages read off the case table.
    pub fn ordered_forest_neighbors(&mut self, n: VertexId) -> Result<[VertexId; 4], WobbleError> {
        if let Some(&nb) = self.neighbors.get(&n) {
            return Ok(nb);
        }
        let mut list = self.forest.f_star_preimages_by_cases(n)?;
        list.push(self.forest.f_star(n)?);
        let nb = Self::four(n, list)?;
        self.neighbors.insert(n, nb);
        Ok(nb)
    }

    /// Same as [`Self::ordered_forest_neighbors`], with the preimages found
    /// by scanning every candidate through `f⋆`.
    pub fn ordered_forest_neighbors_by_scan(
        &mut self,
        n: VertexId,
    ) -> Result<[VertexId; 4], WobbleError> {
        Self::four(n, self.forest.forest_neighbors(n)?)
    }

    /// Least vertex in the tree of `n`.
    pub fn component_root(&mut self, n: VertexId) -> Result<VertexId, WobbleError> {
        while self.scanned < n.get() {
            self.scanned += 1;
            let k = VertexId::of(self.scanned);
            let root = self.forest.find_root(k)?.root;
            self.least_in_tree.entry(root).or_insert(k);
        }
        let root = self.forest.find_root(n)?.root;
        Ok(self.least_in_tree[&root])
    }

    /// Direction labels at `v`.
    pub fn labels(&mut self, v: VertexId) -> Result<EdgeLabels, WobbleError> {
        if let Some(&l) = self.labels.get(&v) {
            return Ok(l);
        }
        let root = self.component_root(v)?;
        if !self.labels.contains_key(&root) {
            let nb = self.ordered_forest_neighbors(root)?;
            self.labels.insert(root, nb);
        }
        let path = self.forest.path(root, v, 1 << 20)?;
        for w in path.windows(2) {
            let (parent, child) = (w[0], w[1]);
            if self.labels.contains_key(&child) {
                continue;
            }
            let up = self.labels[&parent];
            let toward = Direction::ALL
                .into_iter()
                .find(|d| up[d.index()] == child)
                .ok_or(WobbleError::Clash(parent, child))?;
            let back = toward.inverse();
            let nb = self.ordered_forest_neighbors(child)?;
            if !nb.contains(&parent) {
                return Err(WobbleError::Clash(parent, child));
            }
            let mut labels = [parent; 4];
            let mut rest = nb.into_iter().filter(|&x| x != parent);
            for d in Direction::ALL {
                if d != back {
                    labels[d.index()] = rest.next().ok_or(WobbleError::Clash(parent, child))?;
                }
            }
            self.labels.insert(child, labels);
        }
        Ok(self.labels[&v])
    }

    pub fn step(&mut self, n: VertexId, d: Direction) -> Result<VertexId, WobbleError> {
        Ok(self.labels(n)?[d.index()])
    }

    pub fn sigma(&mut self, n: VertexId) -> Result<VertexId, WobbleError> {
        self.step(n, Direction::SPlus)
    }

    pub fn sigma_inv(&mut self, n: VertexId) -> Result<VertexId, WobbleError> {
        self.step(n, Direction::SMinus)
    }

    pub fn pi(&mut self, n: VertexId) -> Result<VertexId, WobbleError> {
        self.step(n, Direction::PPlus)
    }

    pub fn pi_inv(&mut self, n: VertexId) -> Result<VertexId, WobbleError> {
        self.step(n, Direction::PMinus)
    }

    /// Applies a word letter by letter, first letter first.
    pub fn apply(&mut self, word: &[Direction], n: VertexId) -> Result<VertexId, WobbleError> {
        word.iter().try_fold(n, |x, &d| self.step(x, d))
    }
}

impl<E: Entourage> Wobbling<SymmetricDouble<StripDiagonal<E>>> {
    /// Pairs `(n, σ(n))` and `(n, π(n))`, `n <= range`, outside `E ∘ E`.
    pub fn displacement_failures(&mut self, range: u64) -> Result<Vec<VertexId>, WobbleError> {
        let mut out = Vec::new();
        for n in (1..=range).map(VertexId::of) {
            let s = self.sigma(n)?;
            let p = self.pi(n)?;
            let e = self.forest.entourage();
            if !within_two_steps(e, n, s) || !within_two_steps(e, n, p) {
                out.push(n);
            }
        }
        Ok(out)
    }
}

/// A reduced word with a fixed point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub word: String,
    pub vertex: VertexId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreenessReport {
    pub word_len: usize,
    pub range: u64,
    pub words_per_vertex: usize,
    pub evaluations: u64,
    pub fixed_points: Vec<FixedPoint>,
    /// Vertices where a generator and its claimed inverse do not cancel.
    pub inverse_failures: Vec<VertexId>,
    /// Vertices moved by `σ` or `π` to something other than a forest neighbour.
    pub edge_failures: Vec<VertexId>,
    /// Vertices whose `σ`- or `π`-orbit repeats within `word_len` steps either way.
    pub orbit_failures: Vec<VertexId>,
    /// Least vertices of trees whose `σ`- and `π`-lines meet elsewhere.
    pub line_failures: Vec<VertexId>,
}

impl FreenessReport {
    pub fn passed(&self) -> bool {
        self.fixed_points.is_empty()
            && self.inverse_failures.is_empty()
            && self.edge_failures.is_empty()
            && self.orbit_failures.is_empty()
            && self.line_failures.is_empty()
    }
}

fn word_string(word: &[Direction]) -> String {
    word.iter().map(|d| d.symbol()).collect()
}

/// Number of nonempty reduced words of length at most `len` over four letters.
pub fn reduced_word_count(len: usize) -> usize {
    (1..=len).map(|k| 4 * 3usize.pow(k as u32 - 1)).sum()
}

/// Every reduced word of length `1..=len`, letters in the order applied.
pub fn reduced_words(len: usize) -> Vec<Vec<Direction>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<Direction>> = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for word in &layer {
            for d in Direction::ALL {
                if word.last() != Some(&d.inverse()) {
                    let mut w = word.clone();
                    w.push(d);
                    next.push(w);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// `u(n)` for every reduced word `u` with `|u| <= len`, the empty word included.
fn images<G: BipartiteOracle>(
    w: &mut Wobbling<G>,
    n: VertexId,
    len: usize,
) -> Result<HashMap<Vec<Direction>, VertexId>, WobbleError> {
    let mut out: HashMap<Vec<Direction>, VertexId> = HashMap::default();
    out.insert(Vec::new(), n);
    let mut layer = vec![(Vec::new(), n)];
    for _ in 0..len {
        let mut next = Vec::new();
        for (word, x) in &layer {
            for d in Direction::ALL {
                if word.last() != Some(&d.inverse()) {
                    let mut u = word.clone();
                    u.push(d);
                    let y = w.step(*x, d)?;
                    out.insert(u.clone(), y);
                    next.push((u, y));
                }
            }
        }
        layer = next;
    }
    Ok(out)
}

/// Reduced words of length at most `word_len` fixing some `n <= range`,
/// each evaluated letter by letter.
pub fn fixed_points_direct<G: BipartiteOracle>(
    w: &mut Wobbling<G>,
    word_len: usize,
    range: u64,
) -> Result<Vec<FixedPoint>, WobbleError> {
    let mut out = Vec::new();
    for n in (1..=range).map(VertexId::of) {
        for (word, x) in images(w, n, word_len)? {
            if !word.is_empty() && x == n {
                out.push(FixedPoint {
                    word: word_string(&word),
                    vertex: n,
                });
            }
        }
    }
    out.sort_by(|a, b| (a.vertex, &a.word).cmp(&(b.vertex, &b.word)));
    Ok(out)
}

/// Checks every nonempty reduced word of length at most `word_len` moves
/// every `n <= range`; also checks inverses, edges, orbit lines and the two
/// lines through each tree's least vertex.
///
/// A word `w = a_k ⋯ a_1` fixes `n` iff `a_h ⋯ a_1 (n)` equals
/// `a_{h+1}⁻¹ ⋯ a_k⁻¹ (n)` with `h = ⌈k/2⌉`, so only words of length
/// `⌈word_len/2⌉` are ever applied. Orbit lines are checked over the same
/// radius.
pub fn verify_free_semiregular<G: BipartiteOracle>(
    w: &mut Wobbling<G>,
    word_len: usize,
    range: u64,
) -> Result<FreenessReport, WobbleError> {
    let half = word_len.div_ceil(2);
    let words = reduced_words(word_len);
    let mut report = FreenessReport {
        word_len,
        range,
        words_per_vertex: words.len(),
        ..FreenessReport::default()
    };
    for n in (1..=range).map(VertexId::of) {
        let table = images(w, n, half)?;
        report.evaluations += table.len() as u64 - 1;
        for word in &words {
            let h = word.len().div_ceil(2);
            let tail: Vec<Direction> = word[h..].iter().rev().map(|d| d.inverse()).collect();
            if table[&word[..h]] == table[&tail] {
                report.fixed_points.push(FixedPoint {
                    word: word_string(word),
                    vertex: n,
                });
            }
        }

        let fstar_n = w.forest.f_star(n)?;
        for d in Direction::ALL {
            let y = w.step(n, d)?;
            if w.step(y, d.inverse())? != n {
                report.inverse_failures.push(n);
            }
            if fstar_n != y && w.forest.f_star(y)? != n {
                report.edge_failures.push(n);
            }
        }

        for (fwd, back) in [
            (Direction::SPlus, Direction::SMinus),
            (Direction::PPlus, Direction::PMinus),
        ] {
            let line = line_through(w, n, fwd, back, half)?;
            if line.iter().collect::<HashSet<_>>().len() != line.len() {
                report.orbit_failures.push(n);
            }
        }

        if w.component_root(n)? == n {
            let s: HashSet<_> = line_through(w, n, Direction::SPlus, Direction::SMinus, half)?
                .into_iter()
                .collect();
            let p = line_through(w, n, Direction::PPlus, Direction::PMinus, half)?;
            if p.iter().filter(|x| s.contains(x)).count() != 1 {
                report.line_failures.push(n);
            }
        }
    }
    report.inverse_failures.dedup();
    report.edge_failures.dedup();
    Ok(report)
}

fn line_through<G: BipartiteOracle>(
    w: &mut Wobbling<G>,
    n: VertexId,
    fwd: Direction,
    back: Direction,
    len: usize,
) -> Result<Vec<VertexId>, WobbleError> {
    let mut line = vec![n];
    let (mut x, mut y) = (n, n);
    for _ in 0..len {
        x = w.step(x, fwd)?;
        y = w.step(y, back)?;
        line.push(x);
        line.push(y);
    }
    Ok(line)
}

/// `{n: [σ(n), σ⁻¹(n), π(n), π⁻¹(n)]}` for `n <= range`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PermutationTable(pub BTreeMap<VertexId, [VertexId; 4]>);

impl PermutationTable {
    pub fn build<G: BipartiteOracle>(w: &mut Wobbling<G>, range: u64) -> Result<Self, WobbleError> {
        let mut rows = BTreeMap::new();
        for n in (1..=range).map(VertexId::of) {
            rows.insert(n, [w.sigma(n)?, w.sigma_inv(n)?, w.pi(n)?, w.pi_inv(n)?]);
        }
        Ok(Self(rows))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("permutation table serializes")
    }

    /// `σ`-edges in blue and `π`-edges in red.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph wobbling {\n");
        for (n, [s, _, p, _]) in &self.0 {
            out.push_str(&format!("  {n} -> {s} [color=blue];\n"));
            out.push_str(&format!("  {n} -> {p} [color=red];\n"));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entourage::build_tree_entourage;
    use crate::entourage::TreeEntourage;
    use crate::forest::EntourageForest;
    use crate::matcher::MatcherConfig;

    type TreeWobble = Wobbling<SymmetricDouble<StripDiagonal<TreeEntourage>>>;

    fn wobble() -> TreeWobble {
        let forest = EntourageForest::for_entourage(
            build_tree_entourage(7).unwrap(),
            4,
            MatcherConfig::default(),
        )
        .unwrap();
        Wobbling::new(forest)
    }

    fn v(x: u64) -> VertexId {
        VertexId::of(x)
    }

    #[test]
    fn direction_inverses() {
        for d in Direction::ALL {
            assert_ne!(d, d.inverse());
            assert_eq!(d.inverse().inverse(), d);
        }
        assert_eq!(reduced_word_count(1), 4);
        assert_eq!(reduced_word_count(2), 16);
        assert_eq!(reduced_word_count(5), 484);
    }

    #[test]
    fn root_assignment() {
        let mut w = wobble();
        let root = w.component_root(v(1)).unwrap();
        assert_eq!(root, v(1));
        let [n1, n2, n3, n4] = w.ordered_forest_neighbors(root).unwrap();
        assert!(n1 < n2 && n2 < n3 && n3 < n4);
        assert_eq!(w.sigma(root).unwrap(), n1);
        assert_eq!(w.sigma(n2).unwrap(), root);
        assert_eq!(w.pi(root).unwrap(), n3);
        assert_eq!(w.pi(n4).unwrap(), root);
        let g2 = w.forest_mut().f_star(root).unwrap();
        assert!([n1, n2, n3, n4].contains(&g2));
    }

    #[test]
    fn two_neighbour_routes_agree() {
        let mut w = wobble();
        for n in (1..=50).map(v) {
            assert_eq!(
                w.ordered_forest_neighbors(n).unwrap(),
                w.ordered_forest_neighbors_by_scan(n).unwrap()
            );
        }
    }

    #[test]
    fn labels_are_consistent_near_root() {
        let mut w = wobble();
        let mut frontier = vec![v(1)];
        let mut seen: HashSet<VertexId> = frontier.iter().copied().collect();
        for _ in 0..3 {
            let mut next = Vec::new();
            for x in frontier {
                let labels = w.labels(x).unwrap();
                let mut sorted = labels;
                sorted.sort_unstable();
                assert_eq!(sorted, w.ordered_forest_neighbors(x).unwrap());
                for d in Direction::ALL {
                    let y = labels[d.index()];
                    assert_eq!(w.step(y, d.inverse()).unwrap(), x);
                    if seen.insert(y) {
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
    }

    #[test]
    fn short_words_move_everything() {
        let mut w = wobble();
        let report = verify_free_semiregular(&mut w, 3, 20).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.words_per_vertex, 52);
        assert_eq!(report.evaluations, 20 * 16);
        assert!(fixed_points_direct(&mut w, 3, 20).unwrap().is_empty());
        let commutator = [
            Direction::SPlus,
            Direction::PPlus,
            Direction::SMinus,
            Direction::PMinus,
        ];
        for n in (1..=20).map(v) {
            assert_ne!(w.apply(&commutator, n).unwrap(), n);
        }
        assert!(w.displacement_failures(20).unwrap().is_empty());
    }

    #[test]
    fn word_enumeration() {
        for len in 0..=5 {
            let words = reduced_words(len);
            assert_eq!(words.len(), reduced_word_count(len));
            assert!(words
                .iter()
                .all(|w| w.windows(2).all(|p| p[1] != p[0].inverse())));
        }
    }

    #[test]
    fn table_export() {
        let mut w = wobble();
        let t = PermutationTable::build(&mut w, 3).unwrap();
        let json = t.to_json();
        assert!(json.starts_with("{\"1\":["));
        let back: PermutationTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert!(t.to_dot().contains("color=blue"));
    }
}
