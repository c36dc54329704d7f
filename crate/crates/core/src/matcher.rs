//! Computable perfect (1, d-1)-matching with cycle control.
//!
//! The host is a symmetric bipartite graph on `A = B = {1, 2, ...}` with no
//! edge `(v, b_v)`, satisfying the computable expanding harem condition for
//! `d` with witness `h`. [`HaremMatcher`] builds the matching one step at a
//! time:
//!
//! 1. `a_n` is the least A-vertex not yet retired. If it roots a reserved
//!    fan, the fan is committed. Otherwise a (1,d)-matching is solved on a
//!    ball around `a_n` in the residual graph and `a_n` keeps its `d - 1`
//!    least partners.
//! 2. If the copy `b_{a_n}` is still free the step tries to close a short
//!    cycle by matching it to the copy of one of `a_n`'s partners, solving a
//!    second local matching around that target. The outcome is one of
//!    - A: the target already takes `b_{a_n}` locally;
//!    - B: some other vertex `a*` takes it; the edge is forced and `a*`
//!      keeps its remaining partners as a reserved fan;
//!    - C: `b_{a_n}` is a leaf of a reserved fan; the fan is committed and
//!      the chain continues from the fan root's copy.
//!
//! Every retired A-vertex has its B-copy matched by the end of the step, so
//! the residual graph stays A-reflected. The induced function
//! `f(n) = partner of b_n` is (d-1)-to-1.

use std::cell::RefCell;
use std::collections::BTreeMap;

use rustc_hash::FxHashMap as HashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    ball, is_a_reflected, neighbors, BipartiteOracle, GraphError, Side, Vertex, VertexId,
};
use crate::hall::{boundary_relaxed_matching, shift_witness, HallError, HallWitness, Matching};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatcherError {
    #[error("harem parameter d must be at least 2, got {0}")]
    BadParameter(u64),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("local matching around {center} (radius {radius}) failed: {source}")]
    Local {
        center: VertexId,
        radius: u64,
        #[source]
        source: HallError,
    },
    #[error("witness spot check failed: {0}")]
    Witness(String),
    #[error("step {step}: no admissible target for pending b{pending}")]
    NoTarget { step: u64, pending: VertexId },
    #[error("invariant breach: {0}")]
    Invariant(String),
    #[error("b{0} was not committed by the end of step {0}")]
    Progress(VertexId),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

/// `max{2 h(2d) + 3 + n, 5 + n}`.
pub fn step_radius(h: &HallWitness, d: u64, n: u64) -> u64 {
    (2 * h.eval(2 * d) + 3 + n).max(5 + n)
}

/// How the ball radius of step `n` is chosen.
///
/// `Literal` uses [`step_radius`] unchanged. On graphs of exponential growth
/// that ball is astronomically large, so `Capped(r)` uses
/// `min(step_radius, r)`. Either way the radius is rounded up to an odd
/// number so that the cut runs through B-vertices only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadiusPolicy {
    Literal,
    Capped(u64),
}

impl Default for RadiusPolicy {
    fn default() -> Self {
        RadiusPolicy::Capped(3)
    }
}

impl RadiusPolicy {
    pub fn radius(self, h: &HallWitness, d: u64, n: u64) -> u64 {
        let r = match self {
            RadiusPolicy::Literal => step_radius(h, d, n),
            RadiusPolicy::Capped(cap) => step_radius(h, d, n).min(cap.max(3)),
        };
        r | 1
    }
}

/// A reserved star: `root` keeps `leaves` unless a later step consumes it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fan {
    pub root: VertexId,
    pub leaves: Vec<VertexId>,
}

/// What happened during one step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum StepEvent {
    FanConsumed {
        root: VertexId,
    },
    LocalMatching {
        center: VertexId,
        radius: u64,
        a: usize,
        b: usize,
    },
    CopyAlreadyUsed,
    CaseA {
        target: VertexId,
    },
    CaseB {
        target: VertexId,
        fan_root: VertexId,
    },
    CaseC {
        fan_root: VertexId,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub vertex: VertexId,
    pub events: Vec<StepEvent>,
    pub committed: Vec<(VertexId, VertexId)>,
}

/// Mutable part of the construction: committed matching, removed vertices
/// and reserved fans.
#[derive(Clone, Debug, Default)]
pub struct MatcherState {
    d: u64,
    step: u64,
    owner: HashMap<VertexId, VertexId>,
    partners: HashMap<VertexId, Vec<VertexId>>,
    fans: BTreeMap<VertexId, Vec<VertexId>>,
    reserved: HashMap<VertexId, VertexId>,
    next_a: u64,
}

impl MatcherState {
    fn new(d: u64) -> Self {
        Self {
            d,
            next_a: 1,
            ..Self::default()
        }
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn is_retired(&self, a: VertexId) -> bool {
        self.partners.contains_key(&a)
    }

    pub fn owner_of(&self, b: VertexId) -> Option<VertexId> {
        self.owner.get(&b).copied()
    }

    pub fn partners_of(&self, a: VertexId) -> Option<&[VertexId]> {
        self.partners.get(&a).map(Vec::as_slice)
    }

    pub fn fan_count(&self) -> usize {
        self.fans.len()
    }

    pub fn fans(&self) -> impl Iterator<Item = Fan> + '_ {
        self.fans.iter().map(|(&root, leaves)| Fan {
            root,
            leaves: leaves.clone(),
        })
    }

    pub fn committed_len(&self) -> usize {
        self.owner.len()
    }

    pub fn committed(&self) -> Matching {
        Matching::from_pairs(self.owner.iter().map(|(&b, &a)| (a, b)))
            .expect("owner map is a function of b")
    }

    fn commit(&mut self, a: VertexId, mut bs: Vec<VertexId>) -> Result<(), MatcherError> {
        bs.sort_unstable();
        for &b in &bs {
            if self.owner.contains_key(&b) || self.reserved.contains_key(&b) {
                return Err(MatcherError::Invariant(format!("b{b} committed twice")));
            }
        }
        if self.partners.contains_key(&a) || self.fans.contains_key(&a) {
            return Err(MatcherError::Invariant(format!("a{a} retired twice")));
        }
        for &b in &bs {
            self.owner.insert(b, a);
        }
        self.partners.insert(a, bs);
        Ok(())
    }

    fn take_fan(&mut self, root: VertexId) -> Option<Vec<VertexId>> {
        let leaves = self.fans.remove(&root)?;
        for l in &leaves {
            self.reserved.remove(l);
        }
        Some(leaves)
    }

    fn add_fan(&mut self, root: VertexId, mut leaves: Vec<VertexId>) {
        leaves.sort_unstable();
        for &l in &leaves {
            self.reserved.insert(l, root);
        }
        self.fans.insert(root, leaves);
    }

    fn least_remaining(&mut self) -> VertexId {
        while self.partners.contains_key(&VertexId::of(self.next_a)) {
            self.next_a += 1;
        }
        VertexId::of(self.next_a)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut committed: Vec<_> = self.owner.iter().map(|(&b, &a)| (a, b)).collect();
        committed.sort_unstable();
        let mut removed_a: Vec<_> = self.partners.keys().copied().collect();
        removed_a.sort_unstable();
        let mut removed_b: Vec<_> = self.owner.keys().copied().collect();
        removed_b.sort_unstable();
        Checkpoint {
            d: self.d,
            step: self.step,
            committed,
            removed_a,
            removed_b,
            fans: self.fans().collect(),
        }
    }
}

/// Serialized [`MatcherState`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub d: u64,
    pub step: u64,
    pub committed: Vec<(VertexId, VertexId)>,
    pub removed_a: Vec<VertexId>,
    pub removed_b: Vec<VertexId>,
    pub fans: Vec<Fan>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MatcherError> {
        serde_json::from_str(s).map_err(|e| MatcherError::Checkpoint(e.to_string()))
    }
}

/// The host graph with committed vertices removed and, optionally, reserved
/// fans removed as well.
struct Residual<'a, G> {
    host: &'a G,
    state: &'a MatcherState,
    without_fans: bool,
    error: RefCell<Option<GraphError>>,
}

impl<'a, G: BipartiteOracle> Residual<'a, G> {
    fn new(host: &'a G, state: &'a MatcherState, without_fans: bool) -> Self {
        Self {
            host,
            state,
            without_fans,
            error: RefCell::new(None),
        }
    }

    fn finish(self) -> Result<(), GraphError> {
        match self.error.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

impl<G: BipartiteOracle> BipartiteOracle for Residual<'_, G> {
    fn adjacent(&self, a: VertexId, b: VertexId) -> bool {
        self.contains(Vertex {
            side: Side::A,
            id: a,
        }) && self.contains(Vertex {
            side: Side::B,
            id: b,
        }) && self.host.adjacent(a, b)
    }

    fn degree(&self, v: Vertex) -> u64 {
        self.neighbor_hint(v).map_or(0, |n| n.len() as u64)
    }

    fn contains(&self, v: Vertex) -> bool {
        if !self.host.contains(v) {
            return false;
        }
        match v.side {
            Side::A => {
                !self.state.partners.contains_key(&v.id)
                    && !(self.without_fans && self.state.fans.contains_key(&v.id))
            }
            Side::B => {
                !self.state.owner.contains_key(&v.id)
                    && !(self.without_fans && self.state.reserved.contains_key(&v.id))
            }
        }
    }

    fn hint_is_exact(&self) -> bool {
        true
    }

    fn neighbor_hint(&self, v: Vertex) -> Option<Vec<VertexId>> {
        if !self.contains(v) {
            return Some(Vec::new());
        }
        match neighbors(self.host, v) {
            Ok(mut list) => {
                let other = v.side.other();
                list.retain(|&w| self.contains(Vertex { side: other, id: w }));
                Some(list)
            }
            Err(e) => {
                self.error.borrow_mut().get_or_insert(e);
                Some(Vec::new())
            }
        }
    }
}

/// Tunables that do not change the mathematical contract.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatcherConfig {
    pub radius: RadiusPolicy,
}

/// Best-effort guard on the witness inequalities, on singletons and on
/// pairs of A-vertices sharing a neighbour near vertex 1.
pub fn spot_check_witness<G: BipartiteOracle>(
    g: &G,
    d: u64,
    h: &HallWitness,
) -> Result<(), MatcherError> {
    const SAMPLE: u64 = 8;
    const LEVELS: u64 = 32;
    let check = |side: Side, set: &[VertexId], nbhd: u64| -> Result<(), MatcherError> {
        let size = set.len() as u64;
        for n in 0..=LEVELS {
            if h.eval(n) > size {
                continue;
            }
            let ok = match side {
                Side::A => n + d * size <= nbhd,
                Side::B => d * n + size <= d * nbhd,
            };
            if !ok {
                return Err(MatcherError::Witness(format!(
                    "{side:?}-set {set:?} has {nbhd} neighbours but h({n}) = {} <= {size}",
                    h.eval(n)
                )));
            }
        }
        Ok(())
    };
    for v in 1..=SAMPLE {
        for side in [Side::A, Side::B] {
            let vx = Vertex {
                side,
                id: VertexId::of(v),
            };
            let nb = neighbors(g, vx)?.len() as u64;
            check(side, &[vx.id], nb)?;
        }
    }
    let root = Vertex::a(1);
    for b in neighbors(g, root)? {
        for a2 in neighbors(
            g,
            Vertex {
                side: Side::B,
                id: b,
            },
        )? {
            if a2 == root.id {
                continue;
            }
            let mut union = neighbors(g, root)?;
            union.extend(neighbors(
                g,
                Vertex {
                    side: Side::A,
                    id: a2,
                },
            )?);
            union.sort_unstable();
            union.dedup();
            check(Side::A, &[root.id, a2], union.len() as u64)?;
        }
    }
    Ok(())
}

/// The step-by-step construction over a host oracle.
pub struct HaremMatcher<G> {
    host: G,
    state: MatcherState,
    original: HallWitness,
    witness: HallWitness,
    config: MatcherConfig,
}

impl<G: BipartiteOracle> HaremMatcher<G> {
    /// Empty state at step 0. The witness is spot-checked, not verified.
    pub fn new(
        host: G,
        d: u64,
        h: HallWitness,
        config: MatcherConfig,
    ) -> Result<Self, MatcherError> {
        if d < 2 {
            return Err(MatcherError::BadParameter(d));
        }
        spot_check_witness(&host, d, &h)?;
        Ok(Self {
            host,
            state: MatcherState::new(d),
            witness: h.clone(),
            original: h,
            config,
        })
    }

    /// Resumes from a checkpoint taken on the same host with the same witness.
    pub fn restore(
        host: G,
        h: HallWitness,
        config: MatcherConfig,
        cp: &Checkpoint,
    ) -> Result<Self, MatcherError> {
        let mut state = MatcherState::new(cp.d);
        state.step = cp.step;
        let mut grouped: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
        for &(a, b) in &cp.committed {
            grouped.entry(a).or_default().push(b);
        }
        for (a, bs) in grouped {
            state.commit(a, bs)?;
        }
        let mut removed_a: Vec<_> = state.partners.keys().copied().collect();
        removed_a.sort_unstable();
        let mut removed_b: Vec<_> = state.owner.keys().copied().collect();
        removed_b.sort_unstable();
        if removed_a != cp.removed_a || removed_b != cp.removed_b {
            return Err(MatcherError::Checkpoint(
                "removed sets disagree with committed pairs".into(),
            ));
        }
        for fan in &cp.fans {
            if fan
                .leaves
                .iter()
                .any(|l| state.owner.contains_key(l) || state.reserved.contains_key(l))
            {
                return Err(MatcherError::Checkpoint(format!(
                    "fan at a{} overlaps",
                    fan.root
                )));
            }
            state.add_fan(fan.root, fan.leaves.clone());
        }
        let witness = (0..cp.step).fold(h.clone(), |w, n| {
            shift_witness(&w, Self::shift_for(cp.d, n))
        });
        Ok(Self {
            host,
            state,
            original: h,
            witness,
            config,
        })
    }

    fn shift_for(d: u64, n: u64) -> u64 {
        if n == 0 {
            d - 1
        } else {
            2 * d
        }
    }

    pub fn host(&self) -> &G {
        &self.host
    }

    pub fn state(&self) -> &MatcherState {
        &self.state
    }

    pub fn d(&self) -> u64 {
        self.state.d
    }

    /// Witness for the current residual graph.
    pub fn witness(&self) -> &HallWitness {
        &self.witness
    }

    /// Witness of the host; the radius formula always reads this one.
    pub fn original_witness(&self) -> &HallWitness {
        &self.original
    }

    pub fn checkpoint(&self) -> Checkpoint {
        self.state.checkpoint()
    }

    fn local_matching(
        &self,
        center: VertexId,
        radius: u64,
        events: &mut Vec<StepEvent>,
    ) -> Result<Matching, MatcherError> {
        let view = Residual::new(&self.host, &self.state, true);
        let region = ball(
            &view,
            Vertex {
                side: Side::A,
                id: center,
            },
            radius,
        );
        view.finish()?;
        let region = region?;
        events.push(StepEvent::LocalMatching {
            center,
            radius,
            a: region.a.len(),
            b: region.b.len(),
        });
        boundary_relaxed_matching(&region, self.state.d).map_err(|source| MatcherError::Local {
            center,
            radius,
            source,
        })
    }

    fn available_a(&self, a: VertexId) -> bool {
        !self.state.partners.contains_key(&a)
            && !self.state.fans.contains_key(&a)
            && self.host.contains(Vertex {
                side: Side::A,
                id: a,
            })
    }

    /// Runs one full step.
    pub fn run_step(&mut self) -> Result<StepReport, MatcherError> {
        let n = self.state.step;
        let d = self.state.d;
        let keep = (d - 1) as usize;
        let radius = self.config.radius.radius(&self.original, d, n);
        let a_n = self.state.least_remaining();
        let before = self.state.owner.len();
        let mut events = Vec::new();
        let mut committed = Vec::new();

        // Part 1.
        let mut leaves = match self.state.take_fan(a_n) {
            Some(leaves) => {
                events.push(StepEvent::FanConsumed { root: a_n });
                leaves
            }
            None => {
                let m = self.local_matching(a_n, radius, &mut events)?;
                let mut p = m.partners_of_a(a_n);
                if p.len() != d as usize {
                    return Err(MatcherError::Invariant(format!(
                        "a{a_n} got {} local partners",
                        p.len()
                    )));
                }
                p.truncate(keep);
                p
            }
        };
        self.state.commit(a_n, leaves.clone())?;
        committed.extend(leaves.iter().map(|&b| (a_n, b)));

        // Part 2.
        let mut pending = a_n;
        let mut avoid: Option<VertexId> = None;
        let mut first = true;
        loop {
            if self.state.owner.contains_key(&pending) {
                if first {
                    events.push(StepEvent::CopyAlreadyUsed);
                }
                break;
            }
            first = false;
            if let Some(&root) = self.state.reserved.get(&pending) {
                let fan = self.state.take_fan(root).expect("reserved leaf has a fan");
                self.state.commit(root, fan.clone())?;
                committed.extend(fan.iter().map(|&b| (root, b)));
                events.push(StepEvent::CaseC { fan_root: root });
                avoid = Some(pending);
                leaves = fan;
                pending = root;
                continue;
            }
            let target = leaves
                .iter()
                .copied()
                .filter(|&l| Some(l) != avoid)
                .find(|&l| self.available_a(l))
                .ok_or(MatcherError::NoTarget { step: n, pending })?;
            let m = self.local_matching(target, radius, &mut events)?;
            let mut local = m.partners_of_a(target);
            if local.len() != d as usize {
                return Err(MatcherError::Invariant(format!(
                    "a{target} got {} local partners",
                    local.len()
                )));
            }
            if let Some(pos) = local.iter().position(|&b| b == pending) {
                if pos == keep {
                    local.remove(0);
                } else {
                    local.truncate(keep);
                }
                self.state.commit(target, local.clone())?;
                committed.extend(local.iter().map(|&b| (target, b)));
                events.push(StepEvent::CaseA { target });
            } else {
                let star = m.partner_of_b(pending).ok_or_else(|| {
                    MatcherError::Invariant(format!(
                        "b{pending} uncovered in the matching around a{target}"
                    ))
                })?;
                let mut chosen = vec![pending];
                chosen.extend(local.iter().copied().take(keep - 1));
                self.state.commit(target, chosen.clone())?;
                committed.extend(chosen.iter().map(|&b| (target, b)));
                let fan: Vec<_> = m
                    .partners_of_a(star)
                    .into_iter()
                    .filter(|&b| b != pending)
                    .collect();
                self.state.add_fan(star, fan);
                events.push(StepEvent::CaseB {
                    target,
                    fan_root: star,
                });
            }
            break;
        }

        committed.sort_unstable();
        debug_assert_eq!(committed.len(), self.state.owner.len() - before);
        self.witness = shift_witness(&self.witness, Self::shift_for(d, n));
        self.state.step += 1;
        Ok(StepReport {
            step: n,
            vertex: a_n,
            events,
            committed,
        })
    }

    /// Checks the structural invariants on vertex numbers up to `range`.
    pub fn check_invariants(&self, range: u64) -> Result<(), MatcherError> {
        let s = &self.state;
        let keep = (s.d - 1) as usize;
        if s.fans.len() as u64 > s.step {
            return Err(MatcherError::Invariant(format!(
                "{} fans after {} steps",
                s.fans.len(),
                s.step
            )));
        }
        for (a, bs) in &s.partners {
            if bs.len() != keep {
                return Err(MatcherError::Invariant(format!(
                    "a{a} has {} partners",
                    bs.len()
                )));
            }
            for b in bs {
                if !self.host.adjacent(*a, *b) {
                    return Err(MatcherError::Invariant(format!(
                        "({a}, {b}) is not an edge"
                    )));
                }
            }
            if !s.owner.contains_key(a) {
                return Err(MatcherError::Invariant(format!(
                    "a{a} retired but b{a} is free"
                )));
            }
        }
        for (root, leaves) in &s.fans {
            if leaves.len() != keep || leaves.iter().any(|l| !self.host.adjacent(*root, *l)) {
                return Err(MatcherError::Invariant(format!("malformed fan at a{root}")));
            }
        }
        if !is_a_reflected(&Residual::new(&self.host, s, false), range) {
            return Err(MatcherError::Invariant(
                "residual graph is not A-reflected".into(),
            ));
        }
        Ok(())
    }
}

/// `f(n)` = the A-partner of `b_n`, computed on demand.
pub struct MatchFunction<G> {
    matcher: HaremMatcher<G>,
}

impl<G: BipartiteOracle> MatchFunction<G> {
    pub fn new(matcher: HaremMatcher<G>) -> Self {
        Self { matcher }
    }

    pub fn matcher(&self) -> &HaremMatcher<G> {
        &self.matcher
    }

    pub fn into_matcher(self) -> HaremMatcher<G> {
        self.matcher
    }

    pub fn d(&self) -> u64 {
        self.matcher.d()
    }

    /// Runs steps until `b_n` is committed. By construction this happens no
    /// later than step `n`.
    pub fn eval(&mut self, n: VertexId) -> Result<VertexId, MatcherError> {
        loop {
            if let Some(a) = self.matcher.state.owner_of(n) {
                return Ok(a);
            }
            if self.matcher.state.step >= n.get() {
                return Err(MatcherError::Progress(n));
            }
            self.matcher.run_step()?;
        }
    }

    /// `f^{-1}(a)`, the `d - 1` partners of `a`, ascending.
    pub fn preimages(&mut self, a: VertexId) -> Result<Vec<VertexId>, MatcherError> {
        loop {
            if let Some(p) = self.matcher.state.partners_of(a) {
                return Ok(p.to_vec());
            }
            if self.matcher.state.step >= a.get() {
                return Err(MatcherError::Progress(a));
            }
            self.matcher.run_step()?;
        }
    }

    /// Runs until both copies of every vertex up to `n` are committed.
    pub fn advance_to(&mut self, n: u64) -> Result<(), MatcherError> {
        for v in 1..=n {
            self.eval(VertexId::of(v))?;
            self.preimages(VertexId::of(v))?;
        }
        Ok(())
    }

    pub fn iterate(&mut self, n: VertexId, times: u64) -> Result<VertexId, MatcherError> {
        (0..times).try_fold(n, |x, _| self.eval(x))
    }

    /// Shape of the orbit of `n`: the number of steps `k` before it enters a
    /// cycle and the cycle length `l`.
    pub fn orbit_shape(&mut self, n: VertexId) -> Result<(u64, u64), MatcherError> {
        let mut seen: HashMap<VertexId, u64> = HashMap::default();
        let mut x = n;
        let mut i = 0u64;
        loop {
            if let Some(&k) = seen.get(&x) {
                return Ok((k, i - k));
            }
            seen.insert(x, i);
            x = self.eval(x)?;
            i += 1;
        }
    }

    /// Read-only snapshot of everything committed so far.
    pub fn freeze(&self) -> MatchingPrefix {
        let s = &self.matcher.state;
        MatchingPrefix {
            step: s.step,
            f: s.owner.iter().map(|(&b, &a)| (b, a)).collect(),
            partners: s.partners.iter().map(|(&a, p)| (a, p.clone())).collect(),
        }
    }
}

/// A frozen committed prefix; shareable between threads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingPrefix {
    pub step: u64,
    pub f: BTreeMap<VertexId, VertexId>,
    pub partners: BTreeMap<VertexId, Vec<VertexId>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CycleCertificate {
    Periodic { n: VertexId, period: u64 },
    Eventual { n: VertexId, k: u64, l: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleReport {
    pub f2_of_1: bool,
    pub certificates: Vec<CycleCertificate>,
    pub violations: Vec<CycleCertificate>,
    /// Whether every tail length also meets `k <= 2n - 1`.
    pub sharper_tail_bound: bool,
}

impl CycleReport {
    pub fn passed(&self) -> bool {
        self.f2_of_1 && self.violations.is_empty()
    }
}

/// For each `2 <= n <= limit`: a periodic `n` must have minimal period at
/// most `n`; otherwise the orbit must enter its cycle after `k <= 2n` steps
/// with cycle length `l <= n`. Also checks `f(f(1)) = 1`.
///
/// The minimal `(k, l)` is certified; any other witness pair has `k` at
/// least as large and `l` a multiple of the minimal one.
pub fn verify_cycle_control<G: BipartiteOracle>(
    f: &mut MatchFunction<G>,
    limit: u64,
) -> Result<CycleReport, MatcherError> {
    let one = VertexId::of(1);
    let mut report = CycleReport {
        f2_of_1: f.iterate(one, 2)? == one,
        sharper_tail_bound: true,
        ..CycleReport::default()
    };
    for n in 2..=limit {
        let v = VertexId::of(n);
        let (k, l) = f.orbit_shape(v)?;
        let cert = if k == 0 {
            CycleCertificate::Periodic { n: v, period: l }
        } else {
            CycleCertificate::Eventual { n: v, k, l }
        };
        let ok = if k == 0 { l <= n } else { k <= 2 * n && l <= n };
        if k >= 2 * n {
            report.sharper_tail_bound = false;
        }
        if ok {
            report.certificates.push(cert);
        } else {
            report.violations.push(cert);
        }
    }
    Ok(report)
}

/// Findings of [`verify_matching_contract`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractReport {
    pub checked: u64,
    /// `a` with a number of `f`-preimages other than `d - 1`.
    pub a_failures: Vec<(VertexId, usize)>,
    /// `b` left without an image.
    pub b_failures: Vec<VertexId>,
    /// Pairs `(f(b), b)` that are not edges.
    pub non_edges: Vec<(VertexId, VertexId)>,
}

impl ContractReport {
    pub fn passed(&self) -> bool {
        self.a_failures.is_empty() && self.b_failures.is_empty() && self.non_edges.is_empty()
    }
}

/// Advances to `n` and recounts the committed pairs from the frozen `f`
/// table alone: each `a <= n` must have exactly `d - 1` preimages, each
/// `b <= n` an image, and every pair must be an edge of the host.
pub fn verify_matching_contract<G: BipartiteOracle>(
    f: &mut MatchFunction<G>,
    n: u64,
) -> Result<ContractReport, MatcherError> {
    f.advance_to(n)?;
    let prefix = f.freeze();
    let mut counts: BTreeMap<VertexId, usize> = BTreeMap::new();
    let mut report = ContractReport {
        checked: n,
        ..ContractReport::default()
    };
    for (&b, &a) in &prefix.f {
        *counts.entry(a).or_default() += 1;
        if !f.matcher().host().adjacent(a, b) {
            report.non_edges.push((a, b));
        }
    }
    let keep = (f.d() - 1) as usize;
    for v in (1..=n).map(VertexId::of) {
        let c = counts.get(&v).copied().unwrap_or(0);
        if c != keep {
            report.a_failures.push((v, c));
        }
        if !prefix.f.contains_key(&v) {
            report.b_failures.push(v);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entourage::{
        build_tree_entourage, strip_diagonal, StripDiagonal, SymmetricDouble, TreeEntourage,
    };
    use crate::graph::ExplicitBipartite;

    type TreeDouble = SymmetricDouble<StripDiagonal<TreeEntourage>>;

    fn tree_double(r: u64) -> TreeDouble {
        SymmetricDouble(strip_diagonal(build_tree_entourage(r).unwrap()))
    }

    fn matcher(r: u64, d: u64) -> HaremMatcher<TreeDouble> {
        HaremMatcher::new(
            tree_double(r),
            d,
            HallWitness::identity(),
            MatcherConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn radius_formula() {
        let id = HallWitness::identity();
        assert_eq!(step_radius(&id, 2, 0), 11);
        assert_eq!(step_radius(&HallWitness::zero(), 3, 0), 5);
        assert_eq!(step_radius(&id, 3, 4), 19);
        assert_eq!(RadiusPolicy::Literal.radius(&id, 3, 1), 17);
        assert_eq!(RadiusPolicy::Literal.radius(&id, 3, 2), 17);
        assert_eq!(RadiusPolicy::Capped(4).radius(&id, 3, 2), 5);
    }

    #[test]
    fn init_is_empty() {
        let m = matcher(6, 4);
        assert_eq!(m.state().step(), 0);
        assert_eq!(m.state().committed_len(), 0);
        assert_eq!(m.state().fan_count(), 0);
        assert!(HaremMatcher::new(
            tree_double(6),
            1,
            HallWitness::identity(),
            MatcherConfig::default()
        )
        .is_err());
    }

    #[test]
    fn witness_guard_rejects_thin_graphs() {
        // The 3-regular tree cannot feed d = 4: a vertex has only 3 neighbours.
        let err = HaremMatcher::new(
            tree_double(3),
            4,
            HallWitness::identity(),
            MatcherConfig::default(),
        );
        assert!(matches!(err, Err(MatcherError::Witness(_))));
        let path = ExplicitBipartite::new([1, 2], [1, 2], [(1, 2), (2, 1)]);
        assert!(HaremMatcher::new(path, 2, HallWitness::zero(), MatcherConfig::default()).is_err());
    }

    #[test]
    fn first_step_closes_a_two_cycle() {
        let mut m = matcher(6, 4);
        let report = m.run_step().unwrap();
        assert_eq!(report.vertex, VertexId::of(1));
        assert_eq!(m.state().partners_of(VertexId::of(1)).unwrap().len(), 3);
        let mut f = MatchFunction::new(m);
        let one = VertexId::of(1);
        let f1 = f.eval(one).unwrap();
        assert_eq!(f.eval(f1).unwrap(), one);
        assert_eq!(f.matcher().witness().offset(), 3);
    }

    #[test]
    fn witness_is_shifted_once_per_step() {
        let mut m = matcher(6, 4);
        for _ in 0..5 {
            m.run_step().unwrap();
        }
        assert_eq!(m.witness().offset(), 3 + 4 * 8);
        assert_eq!(m.original_witness().offset(), 0);
    }

    #[test]
    fn used_copy_skips_part_two() {
        let mut m = matcher(6, 4);
        let mut seen = false;
        for _ in 0..60 {
            let before: Vec<_> = m.state().owner.keys().copied().collect();
            let report = m.run_step().unwrap();
            if report.events.contains(&StepEvent::CopyAlreadyUsed) {
                assert!(before.contains(&report.vertex));
                assert_eq!(report.committed.len(), 3);
                assert!(report.committed.iter().all(|&(a, _)| a == report.vertex));
                seen = true;
            }
        }
        assert!(seen, "no step found its copy already used");
    }

    #[test]
    fn counts_after_fifty_steps() {
        let mut m = matcher(6, 4);
        for _ in 0..50 {
            m.run_step().unwrap();
            m.check_invariants(60).unwrap();
        }
        let committed = m.state().committed();
        for a in m.state().partners.keys() {
            assert_eq!(committed.partners_of_a(*a).len(), 3);
        }
        for (a, b) in committed.pairs() {
            assert_eq!(committed.partner_of_b(b), Some(a));
        }
    }

    #[test]
    fn monotone_progress() {
        let mut m = matcher(6, 4);
        for step in 1..=80u64 {
            m.run_step().unwrap();
            for v in 1..=step {
                let v = VertexId::of(v);
                assert!(m.state().is_retired(v), "a{v} after step {step}");
                assert!(m.state().owner_of(v).is_some(), "b{v} after step {step}");
            }
        }
    }

    #[test]
    fn checkpoint_replay_is_exact() {
        let mut m = matcher(6, 4);
        for _ in 0..30 {
            m.run_step().unwrap();
        }
        let cp = m.checkpoint();
        let json = cp.to_json();
        let mut resumed = HaremMatcher::restore(
            tree_double(6),
            HallWitness::identity(),
            MatcherConfig::default(),
            &Checkpoint::from_json(&json).unwrap(),
        )
        .unwrap();
        assert_eq!(resumed.witness().offset(), m.witness().offset());
        for _ in 0..30 {
            assert_eq!(m.run_step().unwrap(), resumed.run_step().unwrap());
        }
        assert_eq!(m.checkpoint().to_json(), resumed.checkpoint().to_json());
    }

    #[test]
    fn corrupt_checkpoint_is_rejected() {
        let mut m = matcher(6, 4);
        m.run_step().unwrap();
        let mut cp = m.checkpoint();
        cp.removed_b.pop();
        let err = HaremMatcher::restore(
            tree_double(6),
            HallWitness::identity(),
            MatcherConfig::default(),
            &cp,
        );
        assert!(matches!(err, Err(MatcherError::Checkpoint(_))));
    }

    #[test]
    fn f_is_adjacent_and_three_to_one() {
        let mut f = MatchFunction::new(matcher(6, 4));
        let g = tree_double(6);
        for n in 1..=100 {
            let n = VertexId::of(n);
            let a = f.eval(n).unwrap();
            assert!(g.adjacent(a, n));
        }
        let prefix = f.freeze();
        for (a, p) in &prefix.partners {
            let count = prefix.f.values().filter(|x| *x == a).count();
            assert_eq!(count, 3);
            assert_eq!(p.len(), 3);
        }
    }

    #[test]
    fn cycle_control_small() {
        let mut f = MatchFunction::new(matcher(6, 4));
        let report = verify_cycle_control(&mut f, 60).unwrap();
        assert!(report.f2_of_1);
        assert!(report.violations.is_empty(), "{:?}", report.violations);
    }

    #[test]
    fn literal_radius_first_step() {
        // In the 4-regular tree every finite X has |R[X]| >= 3|X| + 1, so
        // h(n) = n - 1 is a witness for d = 2 and the literal radius is 9.
        let h = HallWitness::new(|n| n.saturating_sub(1)).unwrap();
        let cfg = MatcherConfig {
            radius: RadiusPolicy::Literal,
        };
        assert_eq!(cfg.radius.radius(&h, 2, 0), 9);
        let mut m = HaremMatcher::new(tree_double(4), 2, h, cfg).unwrap();
        let report = m.run_step().unwrap();
        assert!(report
            .events
            .iter()
            .any(|e| matches!(e, StepEvent::LocalMatching { radius: 9, .. })));
        m.check_invariants(30).unwrap();
        let mut f = MatchFunction::new(m);
        assert_eq!(f.iterate(VertexId::of(1), 2).unwrap(), VertexId::of(1));
    }
}
