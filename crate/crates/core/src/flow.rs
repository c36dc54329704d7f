//! Dinic max-flow on small dense-ish networks.
//!
//! Arcs are explored in insertion order, so the flow found is a pure function
//! of the order in which the network was built.

use std::collections::VecDeque;

const NONE: usize = usize::MAX;

/// Arcs live in flat arrays; each node keeps a singly linked list of its
/// outgoing arcs, appended at the tail so iteration follows insertion order.
#[derive(Clone, Debug)]
pub(crate) struct FlowNetwork {
    to: Vec<usize>,
    cap: Vec<u64>,
    next: Vec<usize>,
    head: Vec<usize>,
    tail: Vec<usize>,
    level: Vec<u32>,
    cursor: Vec<usize>,
}

pub(crate) const INF: u64 = u64::MAX / 4;

impl FlowNetwork {
    #[cfg(test)]
    pub(crate) fn new(nodes: usize) -> Self {
        Self::with_capacity(nodes, 0)
    }

    /// Preallocates room for `arcs` calls to [`Self::add_arc`].
    pub(crate) fn with_capacity(nodes: usize, arcs: usize) -> Self {
        Self {
            to: Vec::with_capacity(2 * arcs),
            cap: Vec::with_capacity(2 * arcs),
            next: Vec::with_capacity(2 * arcs),
            head: vec![NONE; nodes],
            tail: vec![NONE; nodes],
            level: vec![0; nodes],
            cursor: vec![NONE; nodes],
        }
    }

    fn link(&mut self, from: usize, to: usize, cap: u64) {
        let id = self.to.len();
        self.to.push(to);
        self.cap.push(cap);
        self.next.push(NONE);
        match self.tail[from] {
            NONE => self.head[from] = id,
            last => self.next[last] = id,
        }
        self.tail[from] = id;
    }

    /// Adds `from -> to` with capacity `cap`; returns the arc id.
    pub(crate) fn add_arc(&mut self, from: usize, to: usize, cap: u64) -> usize {
        let id = self.to.len();
        self.link(from, to, cap);
        self.link(to, from, 0);
        id
    }

    /// Flow currently pushed through arc `id`.
    pub(crate) fn flow(&self, id: usize) -> u64 {
        self.cap[id ^ 1]
    }

    fn bfs(&mut self, source: usize, sink: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = u32::MAX);
        self.level[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let mut id = self.head[v];
            while id != NONE {
                let w = self.to[id];
                if self.cap[id] > 0 && self.level[w] == u32::MAX {
                    self.level[w] = self.level[v] + 1;
                    queue.push_back(w);
                }
                id = self.next[id];
            }
        }
        self.level[sink] != u32::MAX
    }

    fn dfs(&mut self, v: usize, sink: usize, limit: u64) -> u64 {
        if v == sink {
            return limit;
        }
        while self.cursor[v] != NONE {
            let id = self.cursor[v];
            let (w, cap) = (self.to[id], self.cap[id]);
            if cap > 0 && self.level[w] == self.level[v] + 1 {
                let pushed = self.dfs(w, sink, limit.min(cap));
                if pushed > 0 {
                    self.cap[id] -= pushed;
                    self.cap[id ^ 1] += pushed;
                    return pushed;
                }
            }
            self.cursor[v] = self.next[id];
        }
        0
    }

    pub(crate) fn max_flow(&mut self, source: usize, sink: usize) -> u64 {
        let mut total = 0;
        while self.bfs(source, sink) {
            self.cursor.copy_from_slice(&self.head);
            loop {
                let pushed = self.dfs(source, sink, INF);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
        total
    }

    /// Nodes reachable from `source` in the residual network.
    pub(crate) fn residual_reach(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[source] = true;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let mut id = self.head[v];
            while id != NONE {
                let w = self.to[id];
                if self.cap[id] > 0 && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
                id = self.next[id];
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        // CLRS figure 26.1, max flow 23.
        let mut net = FlowNetwork::new(6);
        for (u, v, c) in [
            (0, 1, 16),
            (0, 2, 13),
            (1, 3, 12),
            (2, 1, 4),
            (2, 4, 14),
            (3, 2, 9),
            (3, 5, 20),
            (4, 3, 7),
            (4, 5, 4),
        ] {
            net.add_arc(u, v, c);
        }
        assert_eq!(net.max_flow(0, 5), 23);
        let reach = net.residual_reach(0);
        assert!(reach[0] && !reach[5]);
    }
}
