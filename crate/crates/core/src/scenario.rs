//! The analyzable world: nodes and entity trees, topology, capabilities,
//! policy implementations and thresholds.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::anomaly::kind::AnomalyKind;
use crate::error::{Error, Result};
use crate::network::capability::CapabilityProfile;
use crate::network::entity::{EntityForest, EntityId, NodeId, NodeKind};
use crate::network::topology::Topology;
use crate::policy::coefficients::Coefficients;
use crate::policy::fieldset::{FieldKind, FieldSet};
use crate::policy::pi::Pi;
use crate::policy::selector::Selector;
use crate::policy::technology::{TechId, TechRegistry};
use crate::relation::Relation;

/// Conditions a PI must meet for a threshold rule to apply. Unset fields
/// match everything; set fields must all hold.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PiPredicate {
    /// The PI's routed walk touches at least one of these nodes.
    pub crosses: Vec<NodeId>,
    pub source_nodes: Vec<NodeId>,
    pub destination_nodes: Vec<NodeId>,
    pub technologies: Vec<TechId>,
    /// The PI's selector intersects this one.
    pub selector: Option<Selector>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinRule {
    pub when: PiPredicate,
    pub min: Coefficients,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Thresholds {
    /// First matching rule gives `C_min`; default is all zeros.
    pub min_coefficients: Vec<MinRule>,
    /// Traffic that must stay inspectable (no confidentiality).
    pub inspection_zones: Vec<Selector>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub kind: AnomalyKind,
    pub pis: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<String>,
}

/// Ledger of anomalies deliberately injected by the generator.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
    /// Kinds that may appear without being injected.
    #[serde(default)]
    pub exempt: Vec<AnomalyKind>,
}

#[derive(Debug, Clone, Default)]
pub struct Scenario {
    pub forest: EntityForest,
    pub topology: Topology,
    pub techs: TechRegistry,
    pub profiles: BTreeMap<NodeId, CapabilityProfile>,
    pub pis: Vec<Pi>,
    pub thresholds: Thresholds,
    pub tech_preference: Vec<TechId>,
    pub manifest: Option<Manifest>,
}

impl PartialEq for Scenario {
    fn eq(&self, other: &Self) -> bool {
        self.forest == other.forest
            && self.topology == other.topology
            && self.techs == other.techs
            && self.profiles == other.profiles
            && self.pis == other.pis
            && self.thresholds == other.thresholds
            && self.tech_preference == other.tech_preference
            && self.manifest == other.manifest
    }
}

impl Scenario {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str, kind: NodeKind, address: Option<u32>) -> Result<NodeId> {
        let id = self.forest.add_node(name, kind, address)?;
        self.topology.grow(self.forest.node_count());
        Ok(id)
    }

    pub fn profile(&self, node: NodeId) -> Option<&CapabilityProfile> {
        self.profiles.get(&node)
    }

    pub fn pi(&self, id: &str) -> Option<&Pi> {
        self.pis.iter().find(|p| p.id == id)
    }

    pub fn pi_position(&self, id: &str) -> Result<usize> {
        self.pis
            .iter()
            .position(|p| p.id == id)
            .ok_or_else(|| Error::UnknownPi(id.to_string()))
    }

    pub fn g_star(&self, pi: &Pi) -> Vec<NodeId> {
        pi.g_star(&self.forest)
    }

    pub fn gateways_for(&self, source: EntityId, destination: EntityId) -> Result<Vec<NodeId>> {
        self.topology.crossed_gateways(
            &self.forest,
            self.forest.node_of(source),
            self.forest.node_of(destination),
        )
    }

    /// The node walk followed by the PI's traffic, from routing between
    /// consecutive elements of `G*`; falls back to `G*` when unroutable.
    pub fn routed_walk(&self, pi: &Pi) -> Vec<NodeId> {
        let g = self.g_star(pi);
        let mut out: Vec<NodeId> = vec![g[0]];
        for w in g.windows(2) {
            match self.topology.walk(w[0], w[1]) {
                Some(walk) => out.extend(walk.into_iter().skip(1)),
                None => out.push(w[1]),
            }
        }
        out
    }

    pub fn c_min(&self, pi: &Pi) -> Coefficients {
        for rule in &self.thresholds.min_coefficients {
            if self.predicate_holds(&rule.when, pi) {
                return rule.min;
            }
        }
        Coefficients::ZERO
    }

    pub fn predicate_holds(&self, p: &PiPredicate, pi: &Pi) -> bool {
        if !p.crosses.is_empty() {
            let walk = self.routed_walk(pi);
            if !walk.iter().any(|n| p.crosses.contains(n)) {
                return false;
            }
        }
        if !p.source_nodes.is_empty() && !p.source_nodes.contains(&pi.source_node(&self.forest)) {
            return false;
        }
        if !p.destination_nodes.is_empty()
            && !p.destination_nodes.contains(&pi.destination_node(&self.forest))
        {
            return false;
        }
        if !p.technologies.is_empty() && !p.technologies.contains(&pi.technology) {
            return false;
        }
        if let Some(s) = &p.selector {
            if !s.intersects(&pi.selector) {
                return false;
            }
        }
        true
    }

    /// Source-side address scope of an entity: its IP (or everything when
    /// unknown) and its port (or every port).
    pub fn entity_scope(&self, e: EntityId) -> (FieldSet, FieldSet) {
        let ip = match self.forest.address(e) {
            Some(a) => FieldSet::single(FieldKind::Ip, a as u64),
            None => FieldSet::full(FieldKind::Ip),
        };
        let port = match self.forest.port(e) {
            Some(p) => FieldSet::single(FieldKind::Port, p as u64),
            None => FieldSet::full(FieldKind::Port),
        };
        (ip, port)
    }

    /// `e ∈ S|ip_src×p_src`: an entity bound to a port is checked as a
    /// point; otherwise every source port of its address must be covered.
    pub fn source_in_selector_scope(&self, e: EntityId, s: &Selector) -> Result<bool> {
        let ip = self
            .forest
            .address(e)
            .ok_or_else(|| Error::NoAddress(self.forest.label(e)))?;
        if !s.ip_src.contains(ip as u64) {
            return Ok(false);
        }
        Ok(match self.forest.port(e) {
            Some(p) => s.p_src.contains(p as u64),
            None => s.p_src.is_full(),
        })
    }

    /// Traffic a PI actually carries: its selector, narrowed to the
    /// endpoint addresses on sides terminating at ordinary hosts.
    pub fn effective_traffic(&self, pi: &Pi) -> Selector {
        let mut s = pi.selector.clone();
        let src_node = pi.source_node(&self.forest);
        let dst_node = pi.destination_node(&self.forest);
        if self.forest.node(src_node).kind == NodeKind::Host {
            let (ip, port) = self.entity_scope(pi.source);
            if ip.same_domain(&s.ip_src) {
                s.ip_src = s.ip_src.intersect(&ip);
                s.p_src = s.p_src.intersect(&port);
            }
        }
        if self.forest.node(dst_node).kind == NodeKind::Host {
            let (ip, port) = self.entity_scope(pi.destination);
            if ip.same_domain(&s.ip_dst) {
                s.ip_dst = s.ip_dst.intersect(&ip);
                s.p_dst = s.p_dst.intersect(&port);
            }
        }
        s
    }

    /// A tunnel terminates at a gateway on at least one side.
    pub fn is_tunnel(&self, pi: &Pi) -> bool {
        let k = |n| self.forest.node(n).kind;
        k(pi.source_node(&self.forest)) == NodeKind::Gateway
            || k(pi.destination_node(&self.forest)) == NodeKind::Gateway
    }

    /// PI sets keyed by (deployment node, technology), each in priority order.
    pub fn pi_sets(&self) -> BTreeMap<(NodeId, TechId), Vec<usize>> {
        let mut sets: BTreeMap<(NodeId, TechId), Vec<usize>> = BTreeMap::new();
        for (i, p) in self.pis.iter().enumerate() {
            sets.entry((p.deployed_at, p.technology)).or_default().push(i);
        }
        for v in sets.values_mut() {
            v.sort_by(|&a, &b| {
                self.pis[a]
                    .priority
                    .cmp(&self.pis[b].priority)
                    .then_with(|| self.pis[a].id.cmp(&self.pis[b].id))
            });
        }
        sets
    }

    pub fn next_priority(&self, node: NodeId, tech: TechId) -> u32 {
        self.pis
            .iter()
            .filter(|p| p.deployed_at == node && p.technology == tech)
            .map(|p| p.priority + 1)
            .max()
            .unwrap_or(0)
    }

    /// Hard consistency checks. Returns warnings for soft issues.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        self.topology.validate(&self.forest)?;
        let mut ids = BTreeSet::new();
        let mut prios: HashMap<(NodeId, TechId, u32), &str> = HashMap::new();
        for p in &self.pis {
            if p.id.is_empty() || !ids.insert(p.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate or empty PI id `{}`", p.id)));
            }
            let s = p.source_node(&self.forest);
            let d = p.destination_node(&self.forest);
            if p.gateways.contains(&s) || p.gateways.contains(&d) {
                return Err(Error::Invalid(format!(
                    "PI {} lists one of its end nodes as a gateway",
                    p.id
                )));
            }
            if self.techs.is_null(p.technology) && !p.coefficients.is_zero() {
                return Err(Error::Invalid(format!(
                    "PI {} uses NULL with non-zero coefficients {}",
                    p.id, p.coefficients
                )));
            }
            let layer = self.techs.layer(p.technology);
            for e in [p.source, p.destination] {
                if !self.forest.accepts_layer(e, layer) {
                    return Err(Error::Invalid(format!(
                        "PI {}: {} cannot terminate at {}",
                        p.id,
                        self.techs.name(p.technology),
                        self.forest.label(e)
                    )));
                }
            }
            if let Some(prev) = prios.insert((p.deployed_at, p.technology, p.priority), &p.id) {
                return Err(Error::Invalid(format!(
                    "PIs {prev} and {} share priority {} in the same PI set",
                    p.id, p.priority
                )));
            }
            match self.topology.crossed_gateways(&self.forest, s, d) {
                Ok(g) if g != p.gateways => warnings.push(format!(
                    "PI {}: gateway list differs from routing ({})",
                    p.id,
                    g.iter()
                        .map(|n| self.forest.node_name(*n))
                        .collect::<Vec<_>>()
                        .join(",")
                )),
                Ok(_) => {}
                Err(_) if s != d && p.gateways.is_empty() => {}
                Err(e) => warnings.push(format!("PI {}: {e}", p.id)),
            }
        }
        for (node, prof) in &self.profiles {
            if let (Some(l2), Some(all)) = (&prof.layer2, &prof.technologies) {
                for t in l2 {
                    if !all.contains(t) || self.techs.layer(*t) != Some(2) {
                        return Err(Error::Invalid(format!(
                            "node {}: layer-2 technology {} must be a supported layer-2 technology",
                            self.forest.node_name(*node),
                            self.techs.name(*t)
                        )));
                    }
                }
            }
            if let Some(all) = &prof.technologies {
                for t in prof.max_coefficients.keys() {
                    if !all.contains(t) {
                        return Err(Error::Invalid(format!(
                            "node {}: ceiling given for unsupported technology {}",
                            self.forest.node_name(*node),
                            self.techs.name(*t)
                        )));
                    }
                }
            }
        }
        Ok(warnings)
    }

    /// Relation of two PIs' end nodes, used by detectors needing `s ⊥̸ d`.
    pub fn entity_relation(&self, a: EntityId, b: EntityId) -> Relation {
        self.forest.relation(a, b)
    }

    /// Compact textual rendering `⟨s → d | t | C | S | G⟩`.
    pub fn describe_pi(&self, pi: &Pi) -> String {
        let g = pi
            .gateways
            .iter()
            .map(|n| self.forest.node_name(*n))
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{}: {} -> {} | {} | {} | {} | ({})",
            pi.id,
            self.forest.display(pi.source),
            self.forest.display(pi.destination),
            self.techs.name(pi.technology),
            pi.coefficients,
            pi.selector,
            g
        )
    }
}
