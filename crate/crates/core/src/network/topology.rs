use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::network::entity::{EntityForest, NodeId, NodeKind};

const NONE: u32 = u32::MAX;

/// Undirected link graph plus static routing.
///
/// Explicit routes always win. When `auto_routes` is set, pairs without an
/// explicit route use a breadth-first shortest walk (ties broken by node
/// order) computed once by [`Topology::prepare`].
#[derive(Debug, Clone, Default)]
pub struct Topology {
    adjacency: Vec<BTreeSet<NodeId>>,
    routes: BTreeMap<(NodeId, NodeId), Vec<NodeId>>,
    pub auto_routes: bool,
    pred: Vec<Vec<u32>>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.adjacency == other.adjacency
            && self.routes == other.routes
            && self.auto_routes == other.auto_routes
    }
}

impl Topology {
    pub fn new(node_count: usize) -> Self {
        Topology {
            adjacency: vec![BTreeSet::new(); node_count],
            ..Default::default()
        }
    }

    pub fn grow(&mut self, node_count: usize) {
        if self.adjacency.len() < node_count {
            self.adjacency.resize(node_count, BTreeSet::new());
        }
        self.pred.clear();
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId) {
        let need = a.0.max(b.0) as usize + 1;
        self.grow(need);
        if a != b {
            self.adjacency[a.0 as usize].insert(b);
            self.adjacency[b.0 as usize].insert(a);
        }
        self.pred.clear();
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency
            .get(a.0 as usize)
            .is_some_and(|s| s.contains(&b))
    }

    pub fn neighbors(&self, a: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[a.0 as usize].iter().copied()
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for (i, adj) in self.adjacency.iter().enumerate() {
            for &b in adj {
                if (i as u32) < b.0 {
                    out.push((NodeId(i as u32), b));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|s| s.len()).sum::<usize>() / 2
    }

    pub fn set_route(&mut self, walk: Vec<NodeId>) -> Result<()> {
        if walk.len() < 2 {
            return Err(Error::Invalid("a route needs at least two nodes".into()));
        }
        let key = (walk[0], *walk.last().unwrap());
        self.routes.insert(key, walk);
        Ok(())
    }

    pub fn explicit_routes(&self) -> impl Iterator<Item = &Vec<NodeId>> {
        self.routes.values()
    }

    /// Checks every explicit route is a connected walk over declared edges.
    pub fn validate(&self, forest: &EntityForest) -> Result<()> {
        for walk in self.routes.values() {
            for w in walk.windows(2) {
                if !self.has_edge(w[0], w[1]) {
                    return Err(Error::Invalid(format!(
                        "route {} uses missing link {}-{}",
                        walk.iter()
                            .map(|n| forest.node_name(*n))
                            .collect::<Vec<_>>()
                            .join(">"),
                        forest.node_name(w[0]),
                        forest.node_name(w[1])
                    )));
                }
            }
        }
        Ok(())
    }

    /// Computes the shortest-walk table used for pairs without explicit
    /// routes. Cost is one BFS per node.
    pub fn prepare(&mut self) {
        if !self.auto_routes {
            self.pred.clear();
            return;
        }
        let n = self.adjacency.len();
        let mut pred = vec![vec![NONE; n]; n];
        let mut queue = VecDeque::new();
        for (s, row) in pred.iter_mut().enumerate() {
            row[s] = s as u32;
            queue.clear();
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    let v = v.0 as usize;
                    if row[v] == NONE {
                        row[v] = u as u32;
                        queue.push_back(v);
                    }
                }
            }
        }
        self.pred = pred;
    }

    pub fn is_prepared(&self) -> bool {
        !self.auto_routes || self.pred.len() == self.adjacency.len()
    }

    /// The routed walk from `a` to `b`, both included.
    pub fn walk(&self, a: NodeId, b: NodeId) -> Option<Vec<NodeId>> {
        if a == b {
            return Some(vec![a]);
        }
        if let Some(w) = self.routes.get(&(a, b)) {
            return Some(w.clone());
        }
        if let Some(w) = self.routes.get(&(b, a)) {
            return Some(w.iter().rev().copied().collect());
        }
        if self.auto_routes {
            if let Some(row) = self.pred.get(a.0 as usize) {
                if row[b.0 as usize] == NONE {
                    return None;
                }
                let mut out = vec![b];
                let mut cur = b.0 as usize;
                while cur != a.0 as usize {
                    cur = row[cur] as usize;
                    out.push(NodeId(cur as u32));
                }
                out.reverse();
                return Some(out);
            }
            return self.bfs(a, b);
        }
        if self.has_edge(a, b) {
            return Some(vec![a, b]);
        }
        None
    }

    fn bfs(&self, a: NodeId, b: NodeId) -> Option<Vec<NodeId>> {
        let n = self.adjacency.len();
        let mut pred = vec![NONE; n];
        pred[a.0 as usize] = a.0;
        let mut queue = VecDeque::from([a.0 as usize]);
        while let Some(u) = queue.pop_front() {
            if u == b.0 as usize {
                break;
            }
            for &v in &self.adjacency[u] {
                let v = v.0 as usize;
                if pred[v] == NONE {
                    pred[v] = u as u32;
                    queue.push_back(v);
                }
            }
        }
        if pred[b.0 as usize] == NONE {
            return None;
        }
        let mut out = vec![b];
        let mut cur = b.0 as usize;
        while cur != a.0 as usize {
            cur = pred[cur] as usize;
            out.push(NodeId(cur as u32));
        }
        out.reverse();
        Some(out)
    }

    /// Gateways strictly between the two end nodes on the routed walk.
    pub fn crossed_gateways(
        &self,
        forest: &EntityForest,
        src: NodeId,
        dst: NodeId,
    ) -> Result<Vec<NodeId>> {
        let walk = self.walk(src, dst).ok_or_else(|| Error::Unroutable {
            from: forest.node_name(src).to_string(),
            to: forest.node_name(dst).to_string(),
        })?;
        Ok(interior_gateways(forest, &walk))
    }
}

pub fn interior_gateways(forest: &EntityForest, walk: &[NodeId]) -> Vec<NodeId> {
    if walk.len() <= 2 {
        return Vec::new();
    }
    walk[1..walk.len() - 1]
        .iter()
        .copied()
        .filter(|n| forest.node(*n).kind == NodeKind::Gateway)
        .collect()
}
