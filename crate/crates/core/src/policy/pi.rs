use crate::error::{Error, Result};
use crate::network::entity::{EntityForest, EntityId, NodeId};
use crate::policy::coefficients::Coefficients;
use crate::policy::selector::Selector;
use crate::policy::technology::{TechId, TechRegistry};
use crate::relation::Relation;

/// A policy implementation `(s, d, t, C, S, G)` with its deployment node and
/// priority inside its PI set (lower value wins).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pi {
    pub id: String,
    pub source: EntityId,
    pub destination: EntityId,
    pub technology: TechId,
    pub coefficients: Coefficients,
    pub selector: Selector,
    pub gateways: Vec<NodeId>,
    pub deployed_at: NodeId,
    pub priority: u32,
}

impl Pi {
    /// `G* = {s} ∪ G ∪ {d}` as an ordered node list.
    pub fn g_star(&self, forest: &EntityForest) -> Vec<NodeId> {
        let mut v = Vec::with_capacity(self.gateways.len() + 2);
        v.push(forest.node_of(self.source));
        v.extend(self.gateways.iter().copied());
        v.push(forest.node_of(self.destination));
        v
    }

    pub fn source_node(&self, forest: &EntityForest) -> NodeId {
        forest.node_of(self.source)
    }

    pub fn destination_node(&self, forest: &EntityForest) -> NodeId {
        forest.node_of(self.destination)
    }
}

/// Picks the upper bound of two technologies: the dominating one, or for
/// same-layer pairs the one listed first in `preference` (name order when
/// neither is listed).
pub fn technology_lub(
    techs: &TechRegistry,
    preference: &[TechId],
    t1: TechId,
    t2: TechId,
) -> Result<TechId> {
    match techs.relation(t1, t2) {
        Relation::Equivalent | Relation::Dominates => Ok(t1),
        Relation::DominatedBy => Ok(t2),
        Relation::Disjoint => Err(Error::Resolution(format!(
            "no upper bound between {} and {}",
            techs.name(t1),
            techs.name(t2)
        ))),
        Relation::Kin => {
            let rank = |t: TechId| preference.iter().position(|p| *p == t);
            Ok(match (rank(t1), rank(t2)) {
                (Some(a), Some(b)) => if a <= b { t1 } else { t2 },
                (Some(_), None) => t1,
                (None, Some(_)) => t2,
                (None, None) => {
                    if techs.name(t1) <= techs.name(t2) { t1 } else { t2 }
                }
            })
        }
    }
}

fn entity_lub(forest: &EntityForest, a: EntityId, b: EntityId, layer: Option<u8>) -> Result<EntityId> {
    let lca = forest.lca(a, b).ok_or_else(|| {
        Error::Resolution(format!(
            "{} and {} are on different nodes",
            forest.label(a),
            forest.label(b)
        ))
    })?;
    if forest.accepts_layer(lca, layer) {
        Ok(lca)
    } else {
        Ok(forest.root(forest.node_of(lca)))
    }
}

/// Least upper bound of two PIs on the same end nodes with equal gateway
/// lists. The result keeps `i1`'s deployment node and priority; callers
/// adjust the priority as the resolution requires.
pub fn least_upper_bound(
    forest: &EntityForest,
    techs: &TechRegistry,
    preference: &[TechId],
    i1: &Pi,
    i2: &Pi,
) -> Result<Pi> {
    if i1.gateways != i2.gateways {
        return Err(Error::Resolution(format!(
            "{} and {} cross different gateways",
            i1.id, i2.id
        )));
    }
    let t = technology_lub(techs, preference, i1.technology, i2.technology)?;
    let layer = techs.layer(t);
    let source = entity_lub(forest, i1.source, i2.source, layer)?;
    let destination = entity_lub(forest, i1.destination, i2.destination, layer)?;
    if i1 == i2 {
        return Ok(i1.clone());
    }
    Ok(Pi {
        id: format!("{}+{}", i1.id, i2.id),
        source,
        destination,
        technology: t,
        coefficients: i1.coefficients.component_max(&i2.coefficients),
        selector: i1.selector.lub(&i2.selector),
        gateways: i1.gateways.clone(),
        deployed_at: i1.deployed_at,
        priority: i1.priority.min(i2.priority),
    })
}
