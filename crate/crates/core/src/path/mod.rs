//! PI chaining, simple-path enumeration, the connection graph and
//! firewall filtering.

pub mod graph;

use std::collections::BTreeMap;

use crate::error::Result;
use crate::network::entity::{EntityId, NodeId};
use crate::policy::selector::Selector;
use crate::scenario::Scenario;

pub use graph::Digraph;

pub const DEFAULT_PATH_CAP: usize = 1024;

/// A chain of PIs (indices into `Scenario::pis`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub source: EntityId,
    pub destination: EntityId,
    pub pis: Vec<usize>,
    /// Traffic carried end to end: intersection of every hop's traffic.
    pub traffic: Selector,
}

impl Path {
    pub fn len(&self) -> usize {
        self.pis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pis.is_empty()
    }

    pub fn ids<'a>(&self, sc: &'a Scenario) -> Vec<&'a str> {
        self.pis.iter().map(|&i| sc.pis[i].id.as_str()).collect()
    }
}

/// Chaining data shared by all enumerations over one scenario.
#[derive(Debug, Clone)]
pub struct PathIndex {
    /// PI indices sorted by id.
    order: Vec<usize>,
    traffic: Vec<Selector>,
    src_node: Vec<NodeId>,
    dst_node: Vec<NodeId>,
    /// Successors of each PI, in id order.
    succ: Vec<Vec<usize>>,
}

impl PathIndex {
    pub fn build(sc: &Scenario) -> Self {
        let n = sc.pis.len();
        let traffic: Vec<Selector> = sc.pis.iter().map(|p| sc.effective_traffic(p)).collect();
        let src_node: Vec<NodeId> = sc.pis.iter().map(|p| p.source_node(&sc.forest)).collect();
        let dst_node: Vec<NodeId> = sc
            .pis
            .iter()
            .map(|p| p.destination_node(&sc.forest))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| sc.pis[a].id.cmp(&sc.pis[b].id));
        let mut by_src: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for &i in &order {
            by_src.entry(src_node[i]).or_default().push(i);
        }
        let mut succ = vec![Vec::new(); n];
        for i in 0..n {
            if src_node[i] == dst_node[i] {
                continue;
            }
            if let Some(cands) = by_src.get(&dst_node[i]) {
                succ[i] = cands
                    .iter()
                    .copied()
                    .filter(|&j| j != i && traffic[i].intersects(&traffic[j]))
                    .collect();
            }
        }
        PathIndex {
            order,
            traffic,
            src_node,
            dst_node,
            succ,
        }
    }

    pub fn traffic(&self, i: usize) -> &Selector {
        &self.traffic[i]
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    /// Depth-first walk over simple chains starting at each PI in `starts`
    /// (id order). `visit` sees every chain, including single PIs, in
    /// lexicographic id order and returns false to stop the walk.
    fn walk<F>(&self, starts: &[usize], mut visit: F)
    where
        F: FnMut(&[usize], &Selector) -> bool,
    {
        let mut seen_nodes: Vec<NodeId> = Vec::new();
        for &s in starts {
            let mut chain = vec![s];
            let mut stack_traffic = vec![self.traffic[s].clone()];
            seen_nodes.clear();
            seen_nodes.push(self.src_node[s]);
            seen_nodes.push(self.dst_node[s]);
            if !visit(&chain, &stack_traffic[0]) {
                return;
            }
            if self.src_node[s] == self.dst_node[s] {
                continue;
            }
            let mut iters = vec![0usize];
            while let Some(&last) = chain.last() {
                let depth = chain.len() - 1;
                let k = iters[depth];
                if k < self.succ[last].len() {
                    iters[depth] += 1;
                    let j = self.succ[last][k];
                    if seen_nodes.contains(&self.dst_node[j]) {
                        continue;
                    }
                    let t = stack_traffic[depth].intersect(&self.traffic[j]);
                    if t.is_empty() {
                        continue;
                    }
                    chain.push(j);
                    seen_nodes.push(self.dst_node[j]);
                    let keep_going = visit(&chain, &t);
                    stack_traffic.push(t);
                    iters.push(0);
                    if !keep_going {
                        return;
                    }
                } else {
                    chain.pop();
                    stack_traffic.pop();
                    iters.pop();
                    if !chain.is_empty() {
                        seen_nodes.pop();
                    }
                }
            }
        }
    }
}

fn make_path(sc: &Scenario, chain: &[usize], traffic: &Selector) -> Path {
    Path {
        source: sc.pis[chain[0]].source,
        destination: sc.pis[*chain.last().expect("non-empty chain")].destination,
        pis: chain.to_vec(),
        traffic: traffic.clone(),
    }
}

/// Simple paths from exactly `e1` to exactly `e2`, lexicographic by PI id
/// sequence, at most `cap` of them.
pub fn enumerate_simple_paths(
    sc: &Scenario,
    index: &PathIndex,
    e1: EntityId,
    e2: EntityId,
    cap: usize,
) -> (Vec<Path>, bool) {
    let starts: Vec<usize> = index
        .order
        .iter()
        .copied()
        .filter(|&i| sc.pis[i].source == e1)
        .collect();
    let mut out = Vec::new();
    let mut truncated = false;
    index.walk(&starts, |chain, t| {
        if sc.pis[*chain.last().unwrap()].destination == e2 {
            if out.len() >= cap {
                truncated = true;
                return false;
            }
            out.push(make_path(sc, chain, t));
        }
        true
    });
    (out, truncated)
}

/// Every multi-hop path in the scenario grouped by end-point pair, at most
/// `cap` paths overall.
#[derive(Debug, Clone, Default)]
pub struct PathCatalog {
    pub multi_hop: BTreeMap<(EntityId, EntityId), Vec<Path>>,
    pub enumerated: usize,
    pub truncated: bool,
}

pub fn enumerate_all_paths(sc: &Scenario, index: &PathIndex, cap: usize) -> PathCatalog {
    let mut cat = PathCatalog::default();
    index.walk(&index.order, |chain, t| {
        if chain.len() < 2 {
            return true;
        }
        if cat.enumerated >= cap {
            cat.truncated = true;
            return false;
        }
        let p = make_path(sc, chain, t);
        cat.multi_hop
            .entry((p.source, p.destination))
            .or_default()
            .push(p);
        cat.enumerated += 1;
        true
    });
    cat
}

/// Directed node graph with one edge per hop of each PI along `G*`.
#[derive(Debug, Clone, Default)]
pub struct ConnectionGraph {
    /// `(from, to, pi index)`.
    pub edges: Vec<(NodeId, NodeId, usize)>,
    pub node_count: usize,
}

impl ConnectionGraph {
    pub fn build(sc: &Scenario) -> Self {
        let mut edges = Vec::new();
        for (i, p) in sc.pis.iter().enumerate() {
            let g = sc.g_star(p);
            for w in g.windows(2) {
                edges.push((w[0], w[1], i));
            }
        }
        ConnectionGraph {
            edges,
            node_count: sc.forest.node_count(),
        }
    }

    pub fn connection_count(&self) -> usize {
        self.edges.len()
    }

    pub fn digraph(&self) -> Digraph {
        let mut g = Digraph::new(self.node_count);
        for &(a, b, _) in &self.edges {
            g.add_edge(a.0 as usize, b.0 as usize);
        }
        g
    }

    /// PIs contributing the hop `a → b`.
    pub fn pis_on(&self, a: NodeId, b: NodeId) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.0 == a && e.1 == b)
            .map(|e| e.2)
            .collect()
    }

    /// Elementary node cycles, each starting at its smallest node.
    pub fn cycles(&self, cap: usize) -> (Vec<Vec<NodeId>>, bool) {
        let (cs, t) = self.digraph().elementary_cycles(cap);
        (
            cs.into_iter()
                .map(|c| c.into_iter().map(|v| NodeId(v as u32)).collect())
                .collect(),
            t,
        )
    }
}

/// True iff `node`'s firewall drops every packet matched by the PI's
/// selector. Nodes without a profile filter nothing.
pub fn is_filtered(sc: &Scenario, node: NodeId, pi: usize) -> Result<bool> {
    if node.0 as usize >= sc.forest.node_count() {
        return Err(crate::error::Error::UnknownNode(format!("#{}", node.0)));
    }
    Ok(sc
        .profile(node)
        .is_some_and(|p| p.drops_all(&sc.pis[pi].selector)))
}
