//! One predicate per detection formula. Each works on a single PI or an
//! ordered PI pair and knows nothing about which pairs are worth testing;
//! the engine decides that.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::network::capability::{max_coefficients, MaxCoefficients};
use crate::network::entity::NodeId;
use crate::path::is_filtered;
use crate::policy::pi::Pi;
use crate::relation::Relation;
use crate::scenario::Scenario;

/// One clause of a formula with the verdict it evaluated to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub clause: String,
    pub value: String,
}

impl Evidence {
    pub fn new(clause: impl Into<String>, value: impl ToString) -> Self {
        Evidence {
            clause: clause.into(),
            value: value.to_string(),
        }
    }
}

/// Relation verdicts between two PIs, field by field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairRelations {
    pub source: Relation,
    pub destination: Relation,
    pub technology: Relation,
    pub coefficients: Relation,
    pub selector: Relation,
    pub same_gateways: bool,
    pub priority_before: bool,
}

impl PairRelations {
    pub fn of(sc: &Scenario, i1: &Pi, i2: &Pi) -> Self {
        PairRelations {
            source: sc.forest.relation(i1.source, i2.source),
            destination: sc.forest.relation(i1.destination, i2.destination),
            technology: sc.techs.relation(i1.technology, i2.technology),
            coefficients: i1.coefficients.relation(&i2.coefficients),
            selector: i1.selector.relation_unchecked(&i2.selector),
            same_gateways: i1.gateways == i2.gateways,
            priority_before: i1.priority < i2.priority,
        }
    }

    pub fn flip(self) -> Self {
        PairRelations {
            source: self.source.flip(),
            destination: self.destination.flip(),
            technology: self.technology.flip(),
            coefficients: self.coefficients.flip(),
            selector: self.selector.flip(),
            same_gateways: self.same_gateways,
            priority_before: false,
        }
    }

    pub fn evidence(&self) -> Vec<Evidence> {
        vec![
            Evidence::new("s1 ? s2", self.source),
            Evidence::new("d1 ? d2", self.destination),
            Evidence::new("t1 ? t2", self.technology),
            Evidence::new("C1 ? C2", self.coefficients),
            Evidence::new("S1 ? S2", self.selector),
            Evidence::new("G1 = G2", self.same_gateways),
        ]
    }
}

fn ne(a: &Pi, b: &Pi) -> bool {
    a.id != b.id
}

pub fn internal_loop(sc: &Scenario, i1: &Pi) -> bool {
    sc.forest.relation(i1.source, i1.destination).overlaps()
}

pub fn out_of_place(sc: &Scenario, i1: &Pi) -> bool {
    i1.deployed_at != i1.source_node(&sc.forest)
}

/// Which clause of the non-enforceability formula fired, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unenforceable {
    SourceLacksTechnology,
    DestinationLacksTechnology,
    AboveMaximum,
}

pub fn non_enforceability(sc: &Scenario, i1: &Pi) -> Option<Unenforceable> {
    let sp = sc.profile(i1.source_node(&sc.forest));
    let dp = sc.profile(i1.destination_node(&sc.forest));
    if sp.is_some_and(|p| !p.supports(&sc.techs, i1.technology)) {
        return Some(Unenforceable::SourceLacksTechnology);
    }
    if dp.is_some_and(|p| !p.supports(&sc.techs, i1.technology)) {
        return Some(Unenforceable::DestinationLacksTechnology);
    }
    match max_coefficients(&sc.techs, sp, dp, i1.technology) {
        MaxCoefficients::Bounded(c) if i1.coefficients.relation(&c) == Relation::Dominates => {
            Some(Unenforceable::AboveMaximum)
        }
        _ => None,
    }
}

pub fn inadequacy(sc: &Scenario, i1: &Pi) -> bool {
    i1.coefficients.relation(&sc.c_min(i1)) == Relation::DominatedBy
}

pub fn shadowing_rel(r: &PairRelations) -> bool {
    r.priority_before
        && r.technology == Relation::Equivalent
        && r.source.dominates_or_equal()
        && r.destination.dominates_or_equal()
        && r.selector.dominates_or_equal()
        && r.coefficients == Relation::Disjoint
        && r.same_gateways
}

pub fn redundancy_rel(r: &PairRelations) -> bool {
    r.priority_before
        && r.technology == Relation::Equivalent
        && r.source.dominates_or_equal()
        && r.destination.dominates_or_equal()
        && r.selector.dominates_or_equal()
        && r.coefficients.dominates_or_equal()
        && r.same_gateways
}

pub fn exception_rel(r: &PairRelations) -> bool {
    r.priority_before
        && r.technology == Relation::Equivalent
        && r.source == Relation::DominatedBy
        && r.destination == Relation::DominatedBy
        && r.selector == Relation::DominatedBy
        && r.coefficients == Relation::Disjoint
        && r.same_gateways
}

pub fn shadowing(sc: &Scenario, i1: &Pi, i2: &Pi) -> bool {
    ne(i1, i2) && shadowing_rel(&PairRelations::of(sc, i1, i2))
}

pub fn redundancy(sc: &Scenario, i1: &Pi, i2: &Pi) -> bool {
    ne(i1, i2) && redundancy_rel(&PairRelations::of(sc, i1, i2))
}

pub fn exception(sc: &Scenario, i1: &Pi, i2: &Pi) -> bool {
    ne(i1, i2) && exception_rel(&PairRelations::of(sc, i1, i2))
}

pub fn correlation(sc: &Scenario, i1: &Pi, i2: &Pi) -> bool {
    if !ne(i1, i2) {
        return false;
    }
    let r = PairRelations::of(sc, i1, i2);
    let q = PairRelations::of(sc, i2, i1);
    r.source.overlaps()
        && r.destination.overlaps()
        && r.technology == Relation::Equivalent
        && r.selector.overlaps()
        && r.same_gateways
        && ![shadowing_rel, redundancy_rel, exception_rel]
            .iter()
            .any(|f| f(&r) || f(&q))
}

pub fn inclusion_rel(r: &PairRelations) -> bool {
    let fields = [
        r.source,
        r.destination,
        r.technology,
        r.coefficients,
        r.selector,
    ];
    fields.iter().all(|f| f.dominates_or_equal())
        && fields.contains(&Relation::Dominates)
        && r.same_gateways
}

pub fn inclusion(sc: &Scenario, i1: &Pi, i2: &Pi) -> bool {
    ne(i1, i2) && inclusion_rel(&PairRelations::of(sc, i1, i2))
}

pub fn affinity(sc: &Scenario, i1: &Pi, i2: &Pi) -> bool {
    if !ne(i1, i2) {
        return false;
    }
    let r = PairRelations::of(sc, i1, i2);
    r.source.overlaps()
        && r.destination.overlaps()
        && r.technology.overlaps()
        && r.selector.overlaps()
        && r.same_gateways
        && !inclusion_rel(&r)
        && !inclusion_rel(&PairRelations::of(sc, i2, i1))
}

pub fn contradiction(sc: &Scenario, i1: &Pi, i2: &Pi) -> bool {
    if !ne(i1, i2) {
        return false;
    }
    let r = PairRelations::of(sc, i1, i2);
    r.source.overlaps()
        && r.destination.overlaps()
        && r.technology == Relation::Disjoint
        && r.selector.overlaps()
        && r.same_gateways
}

/// Inspection zones touched by a confidentiality-bearing PI's traffic.
pub fn zone_contradiction(sc: &Scenario, i1: &Pi) -> Vec<usize> {
    if !i1.coefficients.has_confidentiality() {
        return Vec::new();
    }
    let t = sc.effective_traffic(i1);
    sc.thresholds
        .inspection_zones
        .iter()
        .enumerate()
        .filter(|(_, z)| z.intersects(&t))
        .map(|(k, _)| k)
        .collect()
}

fn star_set(sc: &Scenario, p: &Pi) -> BTreeSet<NodeId> {
    sc.g_star(p).into_iter().collect()
}

/// Inner channels encapsulated by tunnel `i1`; the PI is superfluous iff
/// this set is non-empty and none of them is weaker than `i1`.
pub fn encapsulated(sc: &Scenario, i1: &Pi) -> Vec<usize> {
    let outer = star_set(sc, i1);
    sc.pis
        .iter()
        .enumerate()
        .filter(|(_, k)| ne(k, i1))
        .filter(|(_, k)| {
            let inner = star_set(sc, k);
            inner.len() > outer.len() && inner.is_superset(&outer)
        })
        .filter(|(_, k)| {
            sc.source_in_selector_scope(k.source, &i1.selector)
                .unwrap_or(false)
        })
        .map(|(i, _)| i)
        .collect()
}

pub fn superfluous(sc: &Scenario, i1: &Pi) -> Option<Vec<usize>> {
    if !sc.is_tunnel(i1) {
        return None;
    }
    let k = encapsulated(sc, i1);
    if k.is_empty()
        || k.iter()
            .any(|&j| sc.pis[j].coefficients.relation(&i1.coefficients) == Relation::DominatedBy)
    {
        return None;
    }
    Some(k)
}

/// Ordered skewed-channel formula.
pub fn skewed(sc: &Scenario, i1: &Pi, i2: &Pi) -> bool {
    if !ne(i1, i2)
        || !sc.is_tunnel(i1)
        || !sc.is_tunnel(i2)
        || !i1.coefficients.has_confidentiality()
        || !i2.coefficients.has_confidentiality()
    {
        return false;
    }
    let g1 = star_set(sc, i1);
    let g2 = star_set(sc, i2);
    g1.intersection(&g2).count() >= 2
        && g2.difference(&g1).next().is_some()
        && sc
            .source_in_selector_scope(i1.source, &i2.selector.source_restricted())
            .unwrap_or(false)
}

/// First crossed gateway that drops all of the PI's traffic.
pub fn filtered(sc: &Scenario, i: usize) -> Option<NodeId> {
    sc.pis[i]
        .gateways
        .iter()
        .copied()
        .find(|&g| is_filtered(sc, g, i).unwrap_or(false))
}

/// First node of `G*` lacking the PI's layer-2 technology.
pub fn l2(sc: &Scenario, i1: &Pi) -> Option<NodeId> {
    if sc.techs.layer(i1.technology) != Some(2) {
        return None;
    }
    sc.g_star(i1).into_iter().find(|n| {
        sc.profile(*n)
            .is_some_and(|p| !p.supports_layer2(i1.technology))
    })
}

/// PIs carrying traffic back from `d1` to `s1`.
pub fn reverse_candidates(sc: &Scenario, i1: &Pi) -> Vec<usize> {
    sc.pis
        .iter()
        .enumerate()
        .filter(|(_, i2)| {
            ne(i1, i2)
                && sc.forest.relation(i1.source, i2.destination).overlaps()
                && sc.forest.relation(i1.destination, i2.source).overlaps()
                && i1.selector.intersects(&i2.selector.reverse())
        })
        .map(|(i, _)| i)
        .collect()
}

pub fn is_mirror(i1: &Pi, i2: &Pi) -> bool {
    i1.technology == i2.technology
        && i1.coefficients == i2.coefficients
        && i1.gateways.iter().eq(i2.gateways.iter().rev())
}

/// Reverse-traffic PIs of `i1` when none of them mirrors its protection.
pub fn asymmetric(sc: &Scenario, i1: &Pi) -> Option<Vec<usize>> {
    let cands = reverse_candidates(sc, i1);
    if cands.is_empty() || cands.iter().any(|&j| is_mirror(i1, &sc.pis[j])) {
        return None;
    }
    Some(cands)
}
