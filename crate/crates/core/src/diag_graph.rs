//! The diagnosis graph: an undirected trust graph that only ever loses edges.
//!
//! A removed edge records a dispute between its endpoints (at least one of them
//! is faulty). A vertex that accumulates `t + 1` removed edges is convicted and
//! loses all remaining edges, which can push neighbours over the threshold in
//! turn; convictions are applied as a fixpoint in ascending vertex order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::ProcessorId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagGraph {
    n: usize,
    t: usize,
    adj: Vec<bool>,
    removed: Vec<usize>,
    convicted: Vec<bool>,
}

/// What a mutation changed, in the order it happened.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphDelta {
    pub removed_edges: Vec<(ProcessorId, ProcessorId)>,
    pub convicted: Vec<ProcessorId>,
}

impl GraphDelta {
    pub fn is_empty(&self) -> bool {
        self.removed_edges.is_empty() && self.convicted.is_empty()
    }

    fn merge(&mut self, other: GraphDelta) {
        self.removed_edges.extend(other.removed_edges);
        self.convicted.extend(other.convicted);
    }
}

impl DiagGraph {
    /// Complete graph `K_n`. Requires `n >= 3t + 1`.
    pub fn new_complete(n: usize, t: usize) -> Result<Self> {
        if n < 3 * t + 1 {
            return Err(config_err(format!("n={n} violates n >= 3t+1 with t={t}")));
        }
        let mut adj = vec![true; n * n];
        for i in 0..n {
            adj[i * n + i] = false;
        }
        Ok(Self {
            n,
            t,
            adj,
            removed: vec![0; n],
            convicted: vec![false; n],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn has_edge(&self, i: ProcessorId, j: ProcessorId) -> bool {
        i != j && self.adj[i * self.n + j]
    }

    /// Self-trust always holds; otherwise trust is edge presence.
    pub fn trusts(&self, i: ProcessorId, j: ProcessorId) -> bool {
        i == j || self.has_edge(i, j)
    }

    pub fn removed_count(&self, i: ProcessorId) -> usize {
        self.removed[i]
    }

    pub fn is_convicted(&self, i: ProcessorId) -> bool {
        self.convicted[i]
    }

    pub fn convicted(&self) -> BTreeSet<ProcessorId> {
        (0..self.n).filter(|&i| self.convicted[i]).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (ProcessorId, ProcessorId)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| self.has_edge(i, j).then_some((i, j)))
        })
    }

    /// Lowest-index member of `match_members` that `receiver` trusts (itself included).
    pub fn match_helper(
        &self,
        receiver: ProcessorId,
        match_members: &BTreeSet<ProcessorId>,
    ) -> Option<ProcessorId> {
        match_members
            .iter()
            .copied()
            .find(|&l| self.trusts(receiver, l))
    }

    fn drop_edge(&mut self, i: ProcessorId, j: ProcessorId) -> bool {
        if !self.has_edge(i, j) {
            return false;
        }
        self.adj[i * self.n + j] = false;
        self.adj[j * self.n + i] = false;
        self.removed[i] += 1;
        self.removed[j] += 1;
        true
    }

    fn isolate(&mut self, i: ProcessorId, delta: &mut GraphDelta) {
        for j in 0..self.n {
            if self.drop_edge(i, j) {
                delta.removed_edges.push((i.min(j), i.max(j)));
            }
        }
    }

    fn cascade(&mut self, delta: &mut GraphDelta) {
        loop {
            let next = (0..self.n).find(|&v| !self.convicted[v] && self.removed[v] > self.t);
            let Some(v) = next else { break };
            self.convicted[v] = true;
            delta.convicted.push(v);
            self.isolate(v, delta);
        }
    }

    /// Removes the dispute edge `(i, j)` and applies the conviction rule.
    /// Removing an absent edge changes nothing.
    pub fn remove_edge(&mut self, i: ProcessorId, j: ProcessorId) -> GraphDelta {
        assert_ne!(i, j, "self-loops do not exist");
        let mut delta = GraphDelta::default();
        if self.drop_edge(i, j) {
            delta.removed_edges.push((i.min(j), i.max(j)));
            self.cascade(&mut delta);
        }
        delta
    }

    /// Convicts `i` outright (it was proven faulty) and applies the cascade.
    pub fn convict(&mut self, i: ProcessorId) -> GraphDelta {
        let mut delta = GraphDelta::default();
        if self.convicted[i] {
            return delta;
        }
        self.convicted[i] = true;
        delta.convicted.push(i);
        self.isolate(i, &mut delta);
        self.cascade(&mut delta);
        delta
    }

    /// Applies several disputes and convictions, returning the combined delta.
    pub fn apply(
        &mut self,
        edges: &[(ProcessorId, ProcessorId)],
        convictions: &[ProcessorId],
    ) -> GraphDelta {
        let mut delta = GraphDelta::default();
        for &(i, j) in edges {
            delta.merge(self.remove_edge(i, j));
        }
        for &i in convictions {
            delta.merge(self.convict(i));
        }
        delta
    }

    pub fn snapshot(&self) -> GraphSnapshot {
        let mut bits = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                bits.push(self.has_edge(i, j));
            }
        }
        let mut bytes = vec![0u8; bits.len().div_ceil(8)];
        for (idx, b) in bits.iter().enumerate() {
            if *b {
                bytes[idx / 8] |= 0x80 >> (idx % 8);
            }
        }
        GraphSnapshot {
            n: self.n,
            adjacency: hex::encode(bytes),
            removed_counts: self.removed.clone(),
            convicted: self.convicted().into_iter().collect(),
        }
    }
}

/// Transcript form: upper-triangle adjacency bitmap (row-major, MSB first, hex)
/// plus the convicted list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub n: usize,
    pub adjacency: String,
    pub removed_counts: Vec<usize>,
    pub convicted: Vec<ProcessorId>,
}
