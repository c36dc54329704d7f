//! Computable d-regular forests on expanding entourages.
//!
//! The matcher run on the double of `R = E \ Δ` yields a (d-1)-to-1 map `f`
//! with short cycles. [`ForestFunction`] rewires `f` near each cycle into
//! `f⋆`, whose functional graph is a d-regular forest: every cycle is cut
//! at its least element `y` (a root), `y` is sent out along the even part of
//! the ray `g(y, ·)`, and the odd part of `g` and the ray `h(y, ·)` are
//! folded back so that every vertex keeps `d - 1` preimages.
//!
//! Components of `f⋆` coincide with components of `f`, so two vertices lie
//! in the same tree iff their orbits reach the same root.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entourage::{
    check_expansion, strip_diagonal, Entourage, StripDiagonal, SymmetricDouble,
};
use crate::graph::{BipartiteOracle, VertexId};
use crate::hall::HallWitness;
use crate::matcher::{HaremMatcher, MatchFunction, MatcherConfig, MatcherError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForestError {
    #[error("forest degree d must be at least 3, got {0}")]
    BadParameter(u64),
    #[error(transparent)]
    Matcher(#[from] MatcherError),
    #[error("{n} needs {steps} iterations to reach a cycle, more than 2n")]
    EntryBound { n: VertexId, steps: u64 },
    #[error("{n} needs {steps} iterations along its cycle to reach the root, more than n")]
    OffsetBound { n: VertexId, steps: u64 },
    #[error("{0} is not a cycle minimum")]
    NotRoot(VertexId),
    #[error("{0} has no preimage off the cycles")]
    NoRayPreimage(VertexId),
    #[error("orbits of {0} and {1} did not meet within {2} steps")]
    Disconnected(VertexId, VertexId, usize),
}

/// Which of the two canonical rays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RayKind {
    G,
    H,
}

/// Position of a vertex relative to the canonical rays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    Ray {
        root: VertexId,
        kind: RayKind,
        m: u64,
    },
    Other,
}

/// `root` is the least element of the cycle reached from `n`; the cycle is
/// entered after `entry` steps and the root `offset` steps later.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootInfo {
    pub root: VertexId,
    pub entry: u64,
    pub offset: u64,
}

/// `f⋆` together with the memo tables it is computed from.
pub struct ForestFunction<G> {
    f: MatchFunction<G>,
    periodic: HashMap<VertexId, bool>,
    roots: HashMap<VertexId, RootInfo>,
    rays: HashMap<(VertexId, RayKind), Vec<VertexId>>,
    placement: HashMap<VertexId, Placement>,
    fstar: HashMap<VertexId, VertexId>,
}

/// Forest on the double of `E \ Δ` with witness `h(n) = n`.
pub type EntourageForest<E> = ForestFunction<SymmetricDouble<StripDiagonal<E>>>;

impl<E: Entourage> EntourageForest<E> {
    pub fn for_entourage(e: E, d: u64, config: MatcherConfig) -> Result<Self, ForestError> {
        if d < 3 {
            return Err(ForestError::BadParameter(d));
        }
        let host = SymmetricDouble(strip_diagonal(e));
        let matcher = HaremMatcher::new(host, d, HallWitness::identity(), config)?;
        Self::new(MatchFunction::new(matcher))
    }

    pub fn entourage(&self) -> &E {
        &self.f.matcher().host().0 .0
    }
}

impl<G: BipartiteOracle> ForestFunction<G> {
    pub fn new(f: MatchFunction<G>) -> Result<Self, ForestError> {
        if f.d() < 3 {
            return Err(ForestError::BadParameter(f.d()));
        }
        Ok(Self {
            f,
            periodic: HashMap::default(),
            roots: HashMap::default(),
            rays: HashMap::default(),
            placement: HashMap::default(),
            fstar: HashMap::default(),
        })
    }

    /// Forest degree: one image plus `d - 1` preimages.
    pub fn d(&self) -> u64 {
        self.f.d()
    }

    pub fn match_function(&self) -> &MatchFunction<G> {
        &self.f
    }

    pub fn match_function_mut(&mut self) -> &mut MatchFunction<G> {
        &mut self.f
    }

    pub fn f(&mut self, x: VertexId) -> Result<VertexId, ForestError> {
        Ok(self.f.eval(x)?)
    }

    pub fn f_preimages(&mut self, x: VertexId) -> Result<Vec<VertexId>, ForestError> {
        Ok(self.f.preimages(x)?)
    }

    /// `x ∈ P(f)`. The orbit is followed until it first repeats, which
    /// under cycle control takes at most `3x` iterations; `x` is periodic iff
    /// the repeat is `x` itself.
    pub fn is_periodic(&mut self, x: VertexId) -> Result<bool, ForestError> {
        if let Some(&p) = self.periodic.get(&x) {
            return Ok(p);
        }
        let mut orbit = vec![x];
        let mut seen: HashSet<VertexId> = [x].into_iter().collect();
        let mut y = self.f(x)?;
        while seen.insert(y) {
            if let Some(&known) = self.periodic.get(&y) {
                if known {
                    break;
                }
            }
            orbit.push(y);
            y = self.f(y)?;
        }
        if y == x {
            for v in orbit {
                self.periodic.insert(v, true);
            }
            Ok(true)
        } else {
            // Everything before the repeat is off its cycle.
            for v in orbit.into_iter().take_while(|&v| v != y) {
                self.periodic.insert(v, false);
            }
            Ok(false)
        }
    }

    /// `x ∈ P₀`: periodic and the least element of its cycle.
    pub fn is_root(&mut self, x: VertexId) -> Result<bool, ForestError> {
        Ok(self.is_periodic(x)? && self.find_root(x)?.root == x)
    }

    pub fn find_root(&mut self, n: VertexId) -> Result<RootInfo, ForestError> {
        if let Some(&info) = self.roots.get(&n) {
            return Ok(info);
        }
        let mut e = n;
        let mut entry = 0u64;
        while !self.is_periodic(e)? {
            e = self.f(e)?;
            entry += 1;
            if entry > 2 * n.get() {
                return Err(ForestError::EntryBound { n, steps: entry });
            }
        }
        let (mut root, mut offset) = (e, 0u64);
        let mut y = self.f(e)?;
        let mut j = 1u64;
        while y != e {
            if y < root {
                root = y;
                offset = j;
            }
            y = self.f(y)?;
            j += 1;
        }
        if offset > n.get() {
            return Err(ForestError::OffsetBound { n, steps: offset });
        }
        let info = RootInfo {
            root,
            entry,
            offset,
        };
        self.roots.insert(n, info);
        Ok(info)
    }

    /// `g(root, m)` or `h(root, m)`: starting from `root` or `f(root)`, each
    /// term is the least preimage of the previous one off the cycles.
    pub fn ray(&mut self, root: VertexId, kind: RayKind, m: u64) -> Result<VertexId, ForestError> {
        if !self.rays.contains_key(&(root, kind)) {
            if !self.is_root(root)? {
                return Err(ForestError::NotRoot(root));
            }
            let start = match kind {
                RayKind::G => root,
                RayKind::H => self.f(root)?,
            };
            self.rays.insert((root, kind), vec![start]);
        }
        loop {
            let ray = &self.rays[&(root, kind)];
            if let Some(&x) = ray.get(m as usize) {
                return Ok(x);
            }
            let prev = *ray.last().expect("rays start nonempty");
            let mut next = None;
            for z in self.f_preimages(prev)? {
                if !self.is_periodic(z)? {
                    next = Some(z);
                    break;
                }
            }
            let next = next.ok_or(ForestError::NoRayPreimage(prev))?;
            self.rays
                .get_mut(&(root, kind))
                .expect("inserted above")
                .push(next);
        }
    }

    /// Locates `x` on a canonical ray by walking forward to its cycle.
    pub fn placement(&mut self, x: VertexId) -> Result<Placement, ForestError> {
        if let Some(&p) = self.placement.get(&x) {
            return Ok(p);
        }
        let info = self.find_root(x)?;
        let root = info.root;
        let mut e = x;
        for _ in 0..info.entry {
            e = self.f(e)?;
        }
        let m = info.entry;
        let kind = if e == root {
            Some(RayKind::G)
        } else if e == self.f(root)? {
            Some(RayKind::H)
        } else {
            None
        };
        let p = match kind {
            Some(kind) if self.ray(root, kind, m)? == x => Placement::Ray { root, kind, m },
            _ => Placement::Other,
        };
        self.placement.insert(x, p);
        Ok(p)
    }

    pub fn f_star(&mut self, x: VertexId) -> Result<VertexId, ForestError> {
        if let Some(&y) = self.fstar.get(&x) {
            return Ok(y);
        }
        let y = match self.placement(x)? {
            Placement::Ray {
                root,
                kind: RayKind::G,
                m,
            } if m % 2 == 0 => self.ray(root, RayKind::G, m + 2)?,
            Placement::Ray {
                root,
                kind: RayKind::G,
                m,
            } if m >= 3 => self.ray(root, RayKind::G, m - 2)?,
            Placement::Ray {
                kind: RayKind::H,
                m,
                ..
            } if m >= 2 => {
                let fx = self.f(x)?;
                self.f(fx)?
            }
            _ => self.f(x)?,
        };
        self.fstar.insert(x, y);
        Ok(y)
    }

    /// Preimages of `x` under `f⋆` by scanning every vertex that can map to
    /// it: `f⁻¹(x) ∪ f⁻²(x) ∪ {f²(x)}`.
    pub fn f_star_preimages(&mut self, x: VertexId) -> Result<Vec<VertexId>, ForestError> {
        let mut candidates = BTreeSet::new();
        for z in self.f_preimages(x)? {
            candidates.insert(z);
            candidates.extend(self.f_preimages(z)?);
        }
        let fx = self.f(x)?;
        candidates.insert(self.f(fx)?);
        let mut out = Vec::new();
        for z in candidates {
            if self.f_star(z)? == x {
                out.push(z);
            }
        }
        Ok(out)
    }

    /// Preimages of `x` under `f⋆` read off the case table: the untouched
    /// `f`-preimages plus the ray vertex folded onto `x`.
    pub fn f_star_preimages_by_cases(&mut self, x: VertexId) -> Result<Vec<VertexId>, ForestError> {
        let mut out = Vec::new();
        for z in self.f_preimages(x)? {
            let keeps_f = match self.placement(z)? {
                Placement::Other => true,
                Placement::Ray {
                    kind: RayKind::G,
                    m,
                    ..
                } => m == 1,
                Placement::Ray {
                    kind: RayKind::H,
                    m,
                    ..
                } => m <= 1,
            };
            if keeps_f {
                out.push(z);
            }
        }
        match self.placement(x)? {
            Placement::Ray {
                root,
                kind: RayKind::G,
                m,
            } => {
                if m % 2 == 1 {
                    out.push(self.ray(root, RayKind::G, m + 2)?);
                } else if m >= 2 {
                    out.push(self.ray(root, RayKind::G, m - 2)?);
                }
            }
            Placement::Ray {
                root,
                kind: RayKind::H,
                m,
            } => out.push(self.ray(root, RayKind::H, m + 2)?),
            Placement::Other => {}
        }
        out.sort_unstable();
        Ok(out)
    }

    /// All forest neighbours of `x` (image and preimages), ascending.
    pub fn forest_neighbors(&mut self, x: VertexId) -> Result<Vec<VertexId>, ForestError> {
        let mut out = self.f_star_preimages(x)?;
        out.push(self.f_star(x)?);
        out.sort_unstable();
        Ok(out)
    }

    pub fn same_tree(&mut self, n: VertexId, m: VertexId) -> Result<bool, ForestError> {
        Ok(self.find_root(n)?.root == self.find_root(m)?.root)
    }

    /// The `f⋆`-path from `u` to `v`, both ends included. Requires the two
    /// vertices to be in the same tree. The side with the smaller endpoint
    /// is extended first, since `f⋆` of a large vertex can be costly.
    pub fn path(
        &mut self,
        u: VertexId,
        v: VertexId,
        cap: usize,
    ) -> Result<Vec<VertexId>, ForestError> {
        let mut up = [vec![u], vec![v]];
        let mut seen: [HashMap<VertexId, usize>; 2] = [
            [(u, 0)].into_iter().collect(),
            [(v, 0)].into_iter().collect(),
        ];
        let (iu, iv) = if u == v {
            (0, 0)
        } else {
            loop {
                if up[0].len() + up[1].len() > cap {
                    return Err(ForestError::Disconnected(u, v, cap));
                }
                let side = usize::from(up[1].last() < up[0].last());
                let next = self.f_star(*up[side].last().expect("nonempty"))?;
                let i = up[side].len();
                seen[side].entry(next).or_insert(i);
                up[side].push(next);
                if let Some(&j) = seen[1 - side].get(&next) {
                    break if side == 0 { (i, j) } else { (j, i) };
                }
            }
        };
        let mut path = up[0][..=iu].to_vec();
        path.extend(up[1][..iv].iter().rev());
        Ok(path)
    }
}

/// Findings of [`verify_forest`]. Every list is empty on success.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestReport {
    pub checked: u64,
    pub fixed_points: Vec<VertexId>,
    /// Orbits that revisit a vertex.
    pub cycles: Vec<VertexId>,
    /// Pairs `(x, f⋆(x))` outside `E ∘ E`.
    pub outside_entourage: Vec<VertexId>,
    /// Pairs `(x, f⋆(x))` outside `E` itself; the rewired pairs jump two
    /// `E`-steps, so this list is informative rather than a failure.
    pub outside_e: Vec<VertexId>,
    pub degree_failures: Vec<(VertexId, usize)>,
    pub route_mismatches: Vec<VertexId>,
    /// Longest run of plain steps before an orbit enters the outgoing half
    /// of a `g`-ray, after which it is injective forever.
    pub max_steps_to_escape: u64,
}

impl ForestReport {
    pub fn passed(&self) -> bool {
        self.fixed_points.is_empty()
            && self.cycles.is_empty()
            && self.outside_entourage.is_empty()
            && self.degree_failures.is_empty()
            && self.route_mismatches.is_empty()
    }
}

/// Membership in `E ∘ E`.
pub fn within_two_steps<E: Entourage + ?Sized>(e: &E, x: VertexId, y: VertexId) -> bool {
    e.member(x, y) || e.section(x).into_iter().any(|z| e.member(z, y))
}

/// Checks `f⋆` on `1..=n`.
///
/// Acyclicity is certified per orbit: it is followed literally for up to
/// `n` steps or until it reaches `g(y, m)` with `m` even. From there it runs
/// `g(y, m + 2), g(y, m + 4), ...`, which never repeats because `g(y, ·)` is
/// injective and no earlier orbit point lies on that half-ray.
pub fn verify_forest<E: Entourage>(
    forest: &mut EntourageForest<E>,
    n: u64,
) -> Result<ForestReport, ForestError> {
    let d = forest.d() as usize;
    let mut report = ForestReport {
        checked: n,
        ..ForestReport::default()
    };
    for x in (1..=n).map(VertexId::of) {
        let y = forest.f_star(x)?;
        if y == x {
            report.fixed_points.push(x);
        }
        if !within_two_steps(forest.entourage(), x, y) {
            report.outside_entourage.push(x);
        }
        if !forest.entourage().member(x, y) {
            report.outside_e.push(x);
        }

        let mut seen: HashSet<VertexId> = [x].into_iter().collect();
        let mut z = x;
        let mut steps = 0u64;
        loop {
            if let Placement::Ray {
                kind: RayKind::G,
                m,
                ..
            } = forest.placement(z)?
            {
                if m % 2 == 0 {
                    break;
                }
            }
            if steps >= n {
                break;
            }
            z = forest.f_star(z)?;
            steps += 1;
            if !seen.insert(z) {
                report.cycles.push(x);
                break;
            }
        }
        report.max_steps_to_escape = report.max_steps_to_escape.max(steps);

        let scan = forest.f_star_preimages(x)?;
        if scan.len() != d - 1 {
            report.degree_failures.push((x, scan.len()));
        }
        if scan != forest.f_star_preimages_by_cases(x)? {
            report.route_mismatches.push(x);
        }
    }
    Ok(report)
}

/// `count` random connected sets of size at most `max_size`, each grown
/// from a start in `1..=200` by adding a uniform frontier vertex.
pub fn sample_connected_sets<E: Entourage + ?Sized>(
    e: &E,
    count: usize,
    max_size: usize,
    seed: u64,
) -> Vec<BTreeSet<VertexId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let size = rng.gen_range(1..=max_size);
        let start = VertexId::of(rng.gen_range(1..=200));
        let mut set = BTreeSet::from([start]);
        while set.len() < size {
            let frontier: Vec<VertexId> = set
                .iter()
                .flat_map(|&x| e.section(x))
                .filter(|y| !set.contains(y))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            match frontier.choose(&mut rng) {
                Some(&y) => {
                    set.insert(y);
                }
                None => break,
            }
        }
        out.push(set);
    }
    out
}

/// Checks `|E[F]| >= (d + 2)|F|` on [`sample_connected_sets`]. Returns the
/// first failing set.
pub fn sample_expansion<E: Entourage>(
    e: &E,
    d: u64,
    count: usize,
    max_size: usize,
    seed: u64,
) -> Result<(), BTreeSet<VertexId>> {
    match sample_connected_sets(e, count, max_size, seed)
        .into_iter()
        .find(|set| !check_expansion(e, d, set))
    {
        Some(set) => Err(set),
        None => Ok(()),
    }
}

/// Prefix of the forest: edges `(x, f⋆(x))` and the roots among `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestExport {
    pub edges: Vec<(VertexId, VertexId)>,
    pub roots: Vec<VertexId>,
}

impl ForestExport {
    pub fn build<G: BipartiteOracle>(
        forest: &mut ForestFunction<G>,
        n: u64,
    ) -> Result<Self, ForestError> {
        let mut edges = Vec::new();
        let mut roots = Vec::new();
        for x in (1..=n).map(VertexId::of) {
            edges.push((x, forest.f_star(x)?));
            if forest.is_root(x)? {
                roots.push(x);
            }
        }
        Ok(Self { edges, roots })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest export serializes")
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph forest {\n");
        for r in &self.roots {
            out.push_str(&format!("  {r} [style=filled, fillcolor=gold];\n"));
        }
        for (x, y) in &self.edges {
            out.push_str(&format!("  {x} -> {y};\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Findings of [`verify_same_tree`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SameTreeReport {
    pub range: u64,
    pub prefix: u64,
    /// Trees meeting `1..=range`.
    pub trees: usize,
    pub reflexive: bool,
    pub symmetric: bool,
    pub transitive: bool,
    /// Pairs where `same_tree` and the component search disagree.
    pub mismatches: Vec<(VertexId, VertexId)>,
}

impl SameTreeReport {
    pub fn passed(&self) -> bool {
        self.reflexive && self.symmetric && self.transitive && self.mismatches.is_empty()
    }
}

/// Checks `same_tree` on `1..=range` is an equivalence relation and agrees
/// with connected components of the graph with edges `x - f⋆(x)` for
/// `x <= prefix`, found by breadth-first search.
pub fn verify_same_tree<G: BipartiteOracle>(
    forest: &mut ForestFunction<G>,
    range: u64,
    prefix: u64,
) -> Result<SameTreeReport, ForestError> {
    let r = range as usize;
    let mut rel = vec![vec![false; r + 1]; r + 1];
    for i in 1..=r {
        for j in 1..=r {
            rel[i][j] = forest.same_tree(VertexId::of(i as u64), VertexId::of(j as u64))?;
        }
    }
    let reflexive = (1..=r).all(|i| rel[i][i]);
    let symmetric = (1..=r).all(|i| (1..=r).all(|j| rel[i][j] == rel[j][i]));
    let transitive =
        (1..=r).all(|i| (1..=r).all(|j| !rel[i][j] || (1..=r).all(|k| !rel[j][k] || rel[i][k])));

    let mut adj: HashMap<u64, Vec<u64>> = HashMap::default();
    for x in 1..=prefix {
        let y = forest.f_star(VertexId::of(x))?.get();
        if y <= prefix {
            adj.entry(x).or_default().push(y);
            adj.entry(y).or_default().push(x);
        }
    }
    let mut component = vec![0usize; prefix as usize + 1];
    let mut count = 0;
    for start in 1..=prefix {
        if component[start as usize] != 0 {
            continue;
        }
        count += 1;
        component[start as usize] = count;
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            for &y in adj.get(&x).into_iter().flatten() {
                if component[y as usize] == 0 {
                    component[y as usize] = count;
                    stack.push(y);
                }
            }
        }
    }
    let mut mismatches = Vec::new();
    for i in 1..=r {
        for j in i + 1..=r {
            if rel[i][j] != (component[i] == component[j]) {
                mismatches.push((VertexId::of(i as u64), VertexId::of(j as u64)));
            }
        }
    }
    let trees = (1..=r).map(|i| component[i]).collect::<BTreeSet<_>>().len();
    Ok(SameTreeReport {
        range,
        prefix,
        trees,
        reflexive,
        symmetric,
        transitive,
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entourage::{build_tree_entourage, TreeEntourage};

    fn forest(r: u64, d: u64) -> EntourageForest<TreeEntourage> {
        ForestFunction::for_entourage(
            build_tree_entourage(r).unwrap(),
            d,
            MatcherConfig::default(),
        )
        .unwrap()
    }

    fn v(x: u64) -> VertexId {
        VertexId::of(x)
    }

    #[test]
    fn rejects_small_d() {
        let e = build_tree_entourage(6).unwrap();
        assert!(matches!(
            ForestFunction::for_entourage(e, 2, MatcherConfig::default()),
            Err(ForestError::BadParameter(2))
        ));
    }

    #[test]
    fn root_of_one() {
        let mut fo = forest(6, 3);
        let info = fo.find_root(v(1)).unwrap();
        assert_eq!(info.root, v(1));
        assert!(info.entry <= 2);
        assert!(fo.is_root(v(1)).unwrap());
        let f1 = fo.f(v(1)).unwrap();
        assert!(!fo.is_root(f1).unwrap());
        assert_eq!(fo.find_root(f1).unwrap().root, v(1));
    }

    #[test]
    fn ray_values() {
        let mut fo = forest(6, 3);
        assert_eq!(fo.ray(v(1), RayKind::G, 0).unwrap(), v(1));
        let f1 = fo.f(v(1)).unwrap();
        assert_eq!(fo.ray(v(1), RayKind::H, 0).unwrap(), f1);
        for m in 1..=5 {
            let x = fo.ray(v(1), RayKind::G, m).unwrap();
            assert_eq!(fo.f(x).unwrap(), fo.ray(v(1), RayKind::G, m - 1).unwrap());
            assert!(!fo.is_periodic(x).unwrap());
            let y = fo.ray(v(1), RayKind::H, m).unwrap();
            assert!(!fo.is_periodic(y).unwrap());
            assert_ne!(x, y);
        }
        assert_eq!(fo.ray(f1, RayKind::G, 0), Err(ForestError::NotRoot(f1)));
    }

    #[test]
    fn case_table() {
        let mut fo = forest(6, 3);
        let y = v(1);
        let g = |fo: &mut EntourageForest<TreeEntourage>, m| fo.ray(y, RayKind::G, m).unwrap();
        let h = |fo: &mut EntourageForest<TreeEntourage>, m| fo.ray(y, RayKind::H, m).unwrap();
        let g2 = g(&mut fo, 2);
        assert_eq!(fo.f_star(y).unwrap(), g2);
        let g1 = g(&mut fo, 1);
        assert_eq!(fo.f_star(g1).unwrap(), y);
        let g3 = g(&mut fo, 3);
        assert_eq!(fo.f_star(g3).unwrap(), g1);
        let g4 = g(&mut fo, 4);
        assert_eq!(fo.f_star(g2).unwrap(), g4);
        let h0 = h(&mut fo, 0);
        let h2 = h(&mut fo, 2);
        assert_eq!(fo.f_star(h2).unwrap(), h0);
        let h1 = h(&mut fo, 1);
        assert_eq!(fo.f_star(h1).unwrap(), h0);
        let f_h0 = fo.f(h0).unwrap();
        assert_eq!(fo.f_star(h0).unwrap(), f_h0);
    }

    #[test]
    fn small_prefix_is_a_forest() {
        let mut fo = forest(6, 3);
        let report = verify_forest(&mut fo, 60).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(!report.outside_e.is_empty());
    }

    #[test]
    fn same_tree_basics() {
        let mut fo = forest(6, 3);
        for n in 1..=40 {
            assert!(fo.same_tree(v(n), v(n)).unwrap());
            let fnn = fo.f(v(n)).unwrap();
            assert!(fo.same_tree(v(n), fnn).unwrap());
        }
        let roots: Vec<_> = (1..=60)
            .map(v)
            .filter(|&x| fo.is_root(x).unwrap())
            .collect();
        assert!(roots.len() >= 2);
        assert!(!fo.same_tree(roots[0], roots[1]).unwrap());
    }

    #[test]
    fn same_tree_matches_components() {
        let mut f = forest(6, 3);
        let rep = verify_same_tree(&mut f, 40, 500).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.trees > 1 && rep.trees < 40);
    }

    #[test]
    fn paths_follow_forest_edges() {
        let mut fo = forest(6, 3);
        for (a, b) in [(1, 2), (3, 17), (5, 40), (2, 2)] {
            if !fo.same_tree(v(a), v(b)).unwrap() {
                continue;
            }
            let p = fo.path(v(a), v(b), 10_000).unwrap();
            assert_eq!(p.first(), Some(&v(a)));
            assert_eq!(p.last(), Some(&v(b)));
            for w in p.windows(2) {
                let (x, y) = (w[0], w[1]);
                assert!(fo.f_star(x).unwrap() == y || fo.f_star(y).unwrap() == x);
            }
        }
    }

    #[test]
    fn expansion_sampling() {
        let t = build_tree_entourage(6).unwrap();
        assert!(sample_expansion(&t, 3, 200, 8, 7).is_ok());
        assert!(sample_expansion(&t, 6, 200, 8, 7).is_err());
    }

    #[test]
    fn export_formats() {
        let mut fo = forest(6, 3);
        let ex = ForestExport::build(&mut fo, 5).unwrap();
        assert_eq!(ex.edges.len(), 5);
        assert_eq!(ex.roots.first(), Some(&v(1)));
        assert!(ex.to_json().starts_with("{\"edges\":[[1,"));
        assert!(ex.to_dot().contains("1 [style=filled"));
    }
}
