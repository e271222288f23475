use std::collections::HashMap;
use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::Relation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    #[default]
    #[serde(alias = "client", alias = "server")]
    Host,
    Gateway,
    /// Transit clouds such as the Internet; never reported as a crossed gateway.
    Network,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    pub address: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub node: NodeId,
    /// Local label such as `l5'`; empty for the root.
    pub label: String,
    pub layer: Option<u8>,
    pub parent: Option<EntityId>,
    pub ip: Option<u32>,
    pub port: Option<u16>,
    pub alias: Option<String>,
}

impl Entity {
    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }
}

/// One tree of connection end-points per network node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityForest {
    nodes: Vec<Node>,
    roots: Vec<EntityId>,
    entities: Vec<Entity>,
    node_index: HashMap<String, NodeId>,
    index: HashMap<String, EntityId>,
}

impl EntityForest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str, kind: NodeKind, address: Option<u32>) -> Result<NodeId> {
        if name.is_empty() || name.contains('.') {
            return Err(Error::Invalid(format!("bad node name `{name}`")));
        }
        if self.node_index.contains_key(name) || self.index.contains_key(name) {
            return Err(Error::Invalid(format!("duplicate node `{name}`")));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            name: name.to_string(),
            kind,
            address,
        });
        let root = EntityId(self.entities.len() as u32);
        self.entities.push(Entity {
            node: id,
            label: String::new(),
            layer: None,
            parent: None,
            ip: None,
            port: None,
            alias: None,
        });
        self.roots.push(root);
        self.node_index.insert(name.to_string(), id);
        self.index.insert(name.to_string(), root);
        Ok(id)
    }

    /// Adds an entity below `parent` (the node root when `None`).
    pub fn add_entity(
        &mut self,
        node: NodeId,
        label: &str,
        layer: u8,
        parent: Option<EntityId>,
        ip: Option<u32>,
        port: Option<u16>,
    ) -> Result<EntityId> {
        if !matches!(layer, 2 | 3 | 5 | 7) {
            return Err(Error::BadValue {
                what: "entity layer",
                value: layer.to_string(),
            });
        }
        let parent = parent.unwrap_or(self.root(node));
        let p = &self.entities[parent.0 as usize];
        if p.node != node {
            return Err(Error::Invalid(format!(
                "parent of `{label}` belongs to another node"
            )));
        }
        if let Some(pl) = p.layer {
            if pl >= layer {
                return Err(Error::Invalid(format!(
                    "entity `{}.{label}` at layer {layer} cannot sit below layer {pl}",
                    self.nodes[node.0 as usize].name
                )));
            }
        }
        let full = format!("{}.{label}", self.nodes[node.0 as usize].name);
        if label.is_empty() || self.index.contains_key(&full) {
            return Err(Error::Invalid(format!("duplicate or empty entity `{full}`")));
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(Entity {
            node,
            label: label.to_string(),
            layer: Some(layer),
            parent: Some(parent),
            ip,
            port,
            alias: None,
        });
        self.index.insert(full, id);
        Ok(id)
    }

    pub fn set_alias(&mut self, e: EntityId, alias: &str) -> Result<()> {
        if self.index.contains_key(alias) {
            return Err(Error::Invalid(format!("alias `{alias}` already in use")));
        }
        self.index.insert(alias.to_string(), e);
        self.entities[e.0 as usize].alias = Some(alias.to_string());
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn entities(&self) -> impl Iterator<Item = (EntityId, &Entity)> {
        self.entities
            .iter()
            .enumerate()
            .map(|(i, e)| (EntityId(i as u32), e))
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.0 as usize]
    }

    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.entities[id.0 as usize]
    }

    pub fn root(&self, node: NodeId) -> EntityId {
        self.roots[node.0 as usize]
    }

    pub fn node_of(&self, e: EntityId) -> NodeId {
        self.entity(e).node
    }

    pub fn node_id(&self, name: &str) -> Result<NodeId> {
        self.node_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.node(id).name
    }

    /// Looks up `node`, `node.label` or a global alias.
    pub fn resolve(&self, label: &str) -> Result<EntityId> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownEntity(label.to_string()))
    }

    /// Canonical dotted label (`s_c1.l5'`, or `s_c1` for a root).
    pub fn label(&self, e: EntityId) -> String {
        let ent = self.entity(e);
        let node = &self.node(ent.node).name;
        if ent.is_root() {
            node.clone()
        } else {
            format!("{node}.{}", ent.label)
        }
    }

    /// Alias when present, otherwise the canonical label.
    pub fn display(&self, e: EntityId) -> String {
        match &self.entity(e).alias {
            Some(a) => a.clone(),
            None => self.label(e),
        }
    }

    pub fn children(&self, e: EntityId) -> Vec<EntityId> {
        let node = self.node_of(e);
        self.entities()
            .filter(|(_, x)| x.node == node && x.parent == Some(e))
            .map(|(id, _)| id)
            .collect()
    }

    pub fn tree(&self, node: NodeId) -> Vec<EntityId> {
        self.entities()
            .filter(|(_, x)| x.node == node)
            .map(|(id, _)| id)
            .collect()
    }

    pub fn is_ancestor(&self, anc: EntityId, e: EntityId) -> bool {
        let mut cur = self.entity(e).parent;
        while let Some(p) = cur {
            if p == anc {
                return true;
            }
            cur = self.entity(p).parent;
        }
        false
    }

    pub fn relation(&self, e1: EntityId, e2: EntityId) -> Relation {
        if e1 == e2 {
            Relation::Equivalent
        } else if self.node_of(e1) != self.node_of(e2) {
            Relation::Disjoint
        } else if self.is_ancestor(e1, e2) {
            Relation::Dominates
        } else if self.is_ancestor(e2, e1) {
            Relation::DominatedBy
        } else {
            Relation::Kin
        }
    }

    /// Lowest common ancestor; `None` across trees.
    pub fn lca(&self, e1: EntityId, e2: EntityId) -> Option<EntityId> {
        if self.node_of(e1) != self.node_of(e2) {
            return None;
        }
        let mut chain = vec![e1];
        let mut cur = self.entity(e1).parent;
        while let Some(p) = cur {
            chain.push(p);
            cur = self.entity(p).parent;
        }
        let mut x = Some(e2);
        while let Some(c) = x {
            if chain.contains(&c) {
                return Some(c);
            }
            x = self.entity(c).parent;
        }
        None
    }

    /// Layer-3 address: nearest explicit IP on the way to the root, then
    /// the node address.
    pub fn address(&self, e: EntityId) -> Option<u32> {
        let mut cur = Some(e);
        while let Some(c) = cur {
            let ent = self.entity(c);
            if let Some(ip) = ent.ip {
                return Some(ip);
            }
            cur = ent.parent;
        }
        self.node(self.node_of(e)).address
    }

    /// Port bound to the entity or inherited from an ancestor.
    pub fn port(&self, e: EntityId) -> Option<u16> {
        let mut cur = Some(e);
        while let Some(c) = cur {
            let ent = self.entity(c);
            if let Some(p) = ent.port {
                return Some(p);
            }
            cur = ent.parent;
        }
        None
    }

    /// Entities whose resolved address is `ip` (and port, when given);
    /// the least specific match comes first.
    pub fn find_by_address(&self, ip: u32, port: Option<u16>) -> Option<EntityId> {
        let mut best: Option<(usize, EntityId)> = None;
        for (id, _) in self.entities() {
            if self.address(id) != Some(ip) {
                continue;
            }
            if port.is_some() && self.port(id) != port {
                continue;
            }
            if port.is_none() && self.port(id).is_some() {
                continue;
            }
            let depth = self.depth(id);
            if best.is_none_or(|(d, _)| depth < d) {
                best = Some((depth, id));
            }
        }
        best.map(|(_, id)| id)
    }

    pub fn depth(&self, e: EntityId) -> usize {
        let mut d = 0;
        let mut cur = self.entity(e).parent;
        while let Some(p) = cur {
            d += 1;
            cur = self.entity(p).parent;
        }
        d
    }

    /// Whether a technology at `layer` may terminate at `e`: roots accept
    /// everything, other entities only technologies at or below their layer.
    pub fn accepts_layer(&self, e: EntityId, layer: Option<u8>) -> bool {
        match (self.entity(e).layer, layer) {
            (_, None) | (None, _) => true,
            (Some(el), Some(tl)) => el >= tl,
        }
    }
}

pub fn parse_ipv4(text: &str) -> Result<u32> {
    text.trim()
        .parse::<Ipv4Addr>()
        .map(u32::from)
        .map_err(|_| Error::BadValue {
            what: "IPv4 address",
            value: text.to_string(),
        })
}

pub fn format_ipv4(ip: u32) -> String {
    Ipv4Addr::from(ip).to_string()
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}
