//! Suggested fixes for detected anomalies and a way to check them on a
//! scenario copy.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::anomaly::{run_analysis, AnalysisOptions, Anomaly, AnomalyKind};
use crate::error::{Error, Result};
use crate::network::capability::{max_coefficients, FirewallAction, MaxCoefficients};
use crate::network::entity::{EntityId, NodeId};
use crate::path::ConnectionGraph;
use crate::policy::coefficients::{Coefficient, Coefficients};
use crate::policy::pi::{least_upper_bound, Pi};
use crate::policy::technology::TechId;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    DeletePi,
    ReplaceWithLub,
    SplitTunnels,
    RaiseCoefficients,
    RedeployPi,
    EditFilterRule,
    ChangeTechnology,
    RemoveCycleEdges,
    SelectPreferredPath,
    ManualReview,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("action serializes");
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

/// A concrete change to a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Edit {
    Remove(String),
    Add(Pi),
    /// Replaces the PI carrying the same id.
    Update(Pi),
    DropFirewallRule { node: NodeId, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub action: Action,
    pub subjects: Vec<String>,
    /// Empty for purely advisory suggestions.
    pub edits: Vec<Edit>,
    pub rationale: String,
}

impl Resolution {
    fn new(action: Action, subjects: &[&str], edits: Vec<Edit>, rationale: impl Into<String>) -> Self {
        Resolution {
            action,
            subjects: subjects.iter().map(|s| s.to_string()).collect(),
            edits,
            rationale: rationale.into(),
        }
    }

    /// PIs added or rewritten by this resolution.
    pub fn replacement_pis(&self) -> Vec<&Pi> {
        self.edits
            .iter()
            .filter_map(|e| match e {
                Edit::Add(p) | Edit::Update(p) => Some(p),
                _ => None,
            })
            .collect()
    }

    /// Applies the edits to a copy of `sc`; removals run first.
    pub fn apply(&self, sc: &Scenario) -> Result<Scenario> {
        let mut out = sc.clone();
        let mut edits: Vec<&Edit> = self.edits.iter().collect();
        edits.sort_by_key(|e| match e {
            Edit::Remove(_) | Edit::DropFirewallRule { .. } => 0,
            Edit::Update(_) => 1,
            Edit::Add(_) => 2,
        });
        let mut dropped: Vec<(NodeId, usize)> = Vec::new();
        for e in edits {
            match e {
                Edit::Remove(id) => {
                    let k = out.pi_position(id)?;
                    out.pis.remove(k);
                }
                Edit::Update(p) => {
                    let k = out.pi_position(&p.id)?;
                    out.pis[k] = p.clone();
                }
                Edit::Add(p) => {
                    if out.pi(&p.id).is_some() {
                        return Err(Error::Resolution(format!("PI {} already exists", p.id)));
                    }
                    out.pis.push(p.clone());
                }
                Edit::DropFirewallRule { node, index } => dropped.push((*node, *index)),
            }
        }
        dropped.sort_by(|a, b| b.cmp(a));
        for (node, index) in dropped {
            let prof = out
                .profiles
                .get_mut(&node)
                .filter(|p| index < p.firewall.len())
                .ok_or_else(|| Error::Resolution("firewall rule no longer exists".into()))?;
            prof.firewall.remove(index);
        }
        Ok(out)
    }
}

fn subject_pi<'a>(sc: &'a Scenario, a: &Anomaly, k: usize) -> Result<&'a Pi> {
    let ids = a.subject_pis();
    let id = ids
        .get(k)
        .ok_or_else(|| Error::Resolution(format!("{} anomaly lacks subject #{k}", a.kind)))?;
    sc.pi(id).ok_or_else(|| Error::UnknownPi(id.to_string()))
}

fn fresh_id(sc: &Scenario, base: &str) -> String {
    if sc.pi(base).is_none() {
        return base.to_string();
    }
    (2..)
        .map(|k| format!("{base}~{k}"))
        .find(|id| sc.pi(id).is_none())
        .expect("unbounded id space")
}

/// Endpoint able to host a technology at `layer`: the entity itself or,
/// failing that, its node root.
fn host_for(sc: &Scenario, e: EntityId, layer: Option<u8>) -> EntityId {
    if sc.forest.accepts_layer(e, layer) {
        e
    } else {
        sc.forest.root(sc.forest.node_of(e))
    }
}

/// Non-NULL technologies usable between the PI's end nodes, lower layers
/// first, skipping `except`.
fn usable_technologies(sc: &Scenario, p: &Pi, except: impl Fn(TechId) -> bool) -> Vec<TechId> {
    let sp = sc.profile(p.source_node(&sc.forest));
    let dp = sc.profile(p.destination_node(&sc.forest));
    let mut v: Vec<(u8, TechId)> = sc
        .techs
        .iter()
        .filter_map(|(id, t)| t.layer.map(|l| (l, id)))
        .filter(|(_, id)| !except(*id))
        .filter(|(_, id)| {
            [sp, dp]
                .iter()
                .all(|pr| pr.is_none_or(|pr| pr.supports(&sc.techs, *id)))
        })
        .filter(|(_, id)| match max_coefficients(&sc.techs, sp, dp, *id) {
            MaxCoefficients::Bounded(c) => p.coefficients.relation(&c).dominated_or_equal(),
            MaxCoefficients::Unbounded => true,
            MaxCoefficients::Unsupported => false,
        })
        .collect();
    v.sort();
    v.into_iter().map(|(_, id)| id).collect()
}

fn with_technology(sc: &Scenario, p: &Pi, t: TechId) -> Pi {
    let layer = sc.techs.layer(t);
    Pi {
        technology: t,
        source: host_for(sc, p.source, layer),
        destination: host_for(sc, p.destination, layer),
        priority: sc.next_priority(p.deployed_at, t),
        ..p.clone()
    }
}

/// Shortest first, then stronger (larger summed coefficients), then ids.
fn preferred_path<'a>(sc: &Scenario, paths: &[&'a [String]]) -> &'a [String] {
    let strength = |p: &[String]| -> Coefficient {
        p.iter()
            .filter_map(|id| sc.pi(id))
            .map(|q| q.coefficients.sum())
            .sum()
    };
    let mut best = paths[0];
    for p in &paths[1..] {
        let better = p.len() < best.len()
            || (p.len() == best.len() && strength(p) > strength(best));
        if better {
            best = p;
        }
    }
    best
}

fn split_tunnels(sc: &Scenario, a: &Pi, b: &Pi) -> Vec<Pi> {
    let ga = sc.g_star(a);
    let gb = sc.g_star(b);
    let cuts: BTreeSet<NodeId> = ga.iter().filter(|n| gb.contains(n)).copied().collect();
    let mut segments: Vec<Pi> = Vec::new();
    let mut extra_prio = std::collections::HashMap::new();
    for p in [a, b] {
        let g = sc.g_star(p);
        let mut start = 0;
        let mut k = 0;
        for (i, n) in g.iter().enumerate().skip(1) {
            if !(cuts.contains(n) || i == g.len() - 1) {
                continue;
            }
            let (from, to) = (g[start], *n);
            let inner = g[start + 1..i].to_vec();
            start = i;
            k += 1;
            if let Some(seg) = segments
                .iter_mut()
                .find(|s| s.source_node(&sc.forest) == from && s.destination_node(&sc.forest) == to)
            {
                seg.coefficients = seg.coefficients.component_max(&p.coefficients);
                seg.selector = seg.selector.lub(&p.selector);
                continue;
            }
            let source = if from == g[0] { p.source } else { sc.forest.root(from) };
            let destination = if to == *g.last().unwrap() {
                p.destination
            } else {
                sc.forest.root(to)
            };
            let slot = extra_prio
                .entry((from, p.technology))
                .or_insert_with(|| sc.next_priority(from, p.technology));
            let priority = *slot;
            *slot += 1;
            segments.push(Pi {
                id: format!("{}/{k}", p.id),
                source,
                destination,
                technology: p.technology,
                coefficients: p.coefficients,
                selector: p.selector.clone(),
                gateways: inner,
                deployed_at: from,
                priority,
            });
        }
    }
    segments
}

fn cycle_edges(sc: &Scenario, a: &Anomaly) -> Result<Vec<String>> {
    let nodes: Vec<NodeId> = a
        .nodes
        .iter()
        .map(|n| sc.forest.node_id(n))
        .collect::<Result<_>>()?;
    let graph = ConnectionGraph::build(sc);
    let mut best: Option<Vec<usize>> = None;
    for k in 0..nodes.len() {
        let on = graph.pis_on(nodes[k], nodes[(k + 1) % nodes.len()]);
        let mut uniq = on.clone();
        uniq.sort_unstable();
        uniq.dedup();
        if best.as_ref().is_none_or(|b| uniq.len() < b.len()) {
            best = Some(uniq);
        }
    }
    Ok(best
        .unwrap_or_default()
        .into_iter()
        .map(|i| sc.pis[i].id.clone())
        .collect())
}

fn end_to_end(sc: &Scenario, path: &[String]) -> Result<Pi> {
    let pis: Vec<&Pi> = path
        .iter()
        .map(|id| sc.pi(id).ok_or_else(|| Error::UnknownPi(id.clone())))
        .collect::<Result<_>>()?;
    let first = pis[0];
    let last = pis[pis.len() - 1];
    let tech = pis
        .iter()
        .map(|p| p.technology)
        .find(|t| !sc.techs.is_null(*t))
        .unwrap_or(first.technology);
    let layer = sc.techs.layer(tech);
    let source = host_for(sc, first.source, layer);
    let destination = host_for(sc, last.destination, layer);
    let c = pis
        .iter()
        .fold(Coefficients::ZERO, |acc, p| acc.component_max(&p.coefficients));
    let mut traffic = sc.effective_traffic(first);
    for p in &pis[1..] {
        traffic = traffic.intersect(&sc.effective_traffic(p));
    }
    let src_node = sc.forest.node_of(source);
    Ok(Pi {
        id: fresh_id(sc, &format!("{}..{}", first.id, last.id)),
        source,
        destination,
        technology: tech,
        coefficients: c,
        selector: traffic,
        gateways: sc.gateways_for(source, destination)?,
        deployed_at: src_node,
        priority: sc.next_priority(src_node, tech),
    })
}

fn mirror(sc: &Scenario, p: &Pi) -> Pi {
    let node = p.destination_node(&sc.forest);
    Pi {
        id: fresh_id(sc, &format!("{}~rev", p.id)),
        source: p.destination,
        destination: p.source,
        technology: p.technology,
        coefficients: p.coefficients,
        selector: p.selector.reverse(),
        gateways: p.gateways.iter().rev().copied().collect(),
        deployed_at: node,
        priority: sc.next_priority(node, p.technology),
    }
}

fn lub_pair(sc: &Scenario, i1: &Pi, i2: &Pi) -> Result<Pi> {
    let mut l = least_upper_bound(&sc.forest, &sc.techs, &sc.tech_preference, i1, i2)?;
    l.id = fresh_id(sc, &format!("{}+{}", i1.id, i2.id));
    l.priority = if i1.technology == i2.technology {
        i1.priority.min(i2.priority)
    } else if l.technology == i1.technology {
        i1.priority
    } else if l.technology == i2.technology {
        i2.priority
    } else {
        sc.next_priority(l.deployed_at, l.technology)
    };
    Ok(l)
}

/// Suggestions for one anomaly, most direct first.
pub fn suggest(a: &Anomaly, sc: &Scenario) -> Result<Vec<Resolution>> {
    use Action::*;
    use AnomalyKind as K;
    let mut out = Vec::new();
    match a.kind {
        K::InternalLoop => {
            let p = subject_pi(sc, a, 0)?;
            out.push(Resolution::new(
                DeletePi,
                &[&p.id],
                vec![Edit::Remove(p.id.clone())],
                "a channel inside a single node protects nothing",
            ));
        }
        K::OutOfPlace => {
            let p = subject_pi(sc, a, 0)?;
            let home = p.source_node(&sc.forest);
            out.push(Resolution::new(
                DeletePi,
                &[&p.id],
                vec![Edit::Remove(p.id.clone())],
                "the deployment node cannot enforce this PI",
            ));
            out.push(Resolution::new(
                RedeployPi,
                &[&p.id],
                vec![Edit::Update(Pi {
                    deployed_at: home,
                    priority: sc.next_priority(home, p.technology),
                    ..p.clone()
                })],
                format!("deploy on {}", sc.forest.node_name(home)),
            ));
        }
        K::NonEnforceability => {
            let p = subject_pi(sc, a, 0)?;
            let sp = sc.profile(p.source_node(&sc.forest));
            let dp = sc.profile(p.destination_node(&sc.forest));
            let lower = match max_coefficients(&sc.techs, sp, dp, p.technology) {
                MaxCoefficients::Bounded(c) => Some(p.coefficients.component_min(&c)),
                _ => None,
            };
            let tech_clause = lower.is_none()
                || a.evidence_value("C1 ≻ Cmax").is_none();
            let alt = usable_technologies(sc, p, |t| t == p.technology);
            let change = alt.first().map(|t| {
                Resolution::new(
                    ChangeTechnology,
                    &[&p.id],
                    vec![Edit::Update(with_technology(sc, p, *t))],
                    format!("both end points support {}", sc.techs.name(*t)),
                )
            });
            let lowering = lower.map(|c| {
                Resolution::new(
                    ManualReview,
                    &[&p.id],
                    vec![Edit::Update(Pi {
                        coefficients: c,
                        ..p.clone()
                    })],
                    format!("lower the coefficients to {c}, or upgrade the end points"),
                )
            });
            let upgrade = Resolution::new(
                ManualReview,
                &[&p.id],
                vec![],
                "install the missing technology on the end points",
            );
            if tech_clause {
                out.extend(change);
                out.push(upgrade);
            } else {
                out.extend(lowering);
                out.extend(change);
            }
        }
        K::Inadequacy => {
            let p = subject_pi(sc, a, 0)?;
            let c = p.coefficients.component_max(&sc.c_min(p));
            out.push(Resolution::new(
                RaiseCoefficients,
                &[&p.id],
                vec![Edit::Update(Pi {
                    coefficients: c,
                    ..p.clone()
                })],
                format!("raise the coefficients to {c}"),
            ));
        }
        K::Shadowing | K::Exception => {
            let i1 = subject_pi(sc, a, 0)?;
            let i2 = subject_pi(sc, a, 1)?;
            let delete = Resolution::new(
                DeletePi,
                &[&i2.id],
                vec![Edit::Remove(i2.id.clone())],
                format!("{} never applies as written", i2.id),
            );
            let lub = lub_pair(sc, i1, i2)?;
            let replace = Resolution::new(
                ReplaceWithLub,
                &[&i1.id, &i2.id],
                vec![
                    Edit::Remove(i1.id.clone()),
                    Edit::Remove(i2.id.clone()),
                    Edit::Add(Pi {
                        priority: i1.priority,
                        ..lub
                    }),
                ],
                "replace both with an upper bound at the higher priority",
            );
            if a.kind == K::Shadowing {
                out.push(delete);
                out.push(replace);
            } else {
                out.push(replace);
                out.push(delete);
            }
        }
        K::Redundancy | K::Inclusion => {
            let i2 = subject_pi(sc, a, 1)?;
            let why = if a.kind == K::Redundancy {
                format!("{} adds nothing to the policy", i2.id)
            } else {
                format!("{} is covered; keep it only for defense in depth", i2.id)
            };
            out.push(Resolution::new(
                DeletePi,
                &[&i2.id],
                vec![Edit::Remove(i2.id.clone())],
                why,
            ));
        }
        K::Correlation | K::Affinity => {
            let i1 = subject_pi(sc, a, 0)?;
            let i2 = subject_pi(sc, a, 1)?;
            let lub = lub_pair(sc, i1, i2)?;
            out.push(Resolution::new(
                ReplaceWithLub,
                &[&i1.id, &i2.id],
                vec![
                    Edit::Remove(i1.id.clone()),
                    Edit::Remove(i2.id.clone()),
                    Edit::Add(lub),
                ],
                "replace both with a single upper bound",
            ));
        }
        K::Contradiction => {
            let ids = a.subject_pis();
            if ids.len() >= 2 {
                let i2 = subject_pi(sc, a, 1)?;
                out.push(Resolution::new(
                    ManualReview,
                    &ids,
                    vec![Edit::Remove(i2.id.clone())],
                    format!("decide whether the traffic is protected; e.g. drop {}", i2.id),
                ));
            } else {
                let p = subject_pi(sc, a, 0)?;
                let mut c = p.coefficients;
                c.0[2] = Coefficient::from(0);
                out.push(Resolution::new(
                    ManualReview,
                    &[&p.id],
                    vec![Edit::Update(Pi {
                        coefficients: c,
                        ..p.clone()
                    })],
                    "the traffic must stay inspectable; e.g. drop confidentiality",
                ));
            }
        }
        K::Superfluous => {
            let p = subject_pi(sc, a, 0)?;
            out.push(Resolution::new(
                DeletePi,
                &[&p.id],
                vec![Edit::Remove(p.id.clone())],
                "the inner channels are already better protected; keep only for defense in depth",
            ));
        }
        K::SkewedChannel => {
            let i1 = subject_pi(sc, a, 0)?;
            let i2 = subject_pi(sc, a, 1)?;
            let mut edits = vec![Edit::Remove(i1.id.clone()), Edit::Remove(i2.id.clone())];
            let mut rest = sc.clone();
            rest.pis.retain(|p| p.id != i1.id && p.id != i2.id);
            edits.extend(split_tunnels(&rest, i1, i2).into_iter().map(Edit::Add));
            out.push(Resolution::new(
                SplitTunnels,
                &[&i1.id, &i2.id],
                edits,
                "split the tunnels at their shared nodes",
            ));
        }
        K::FilteredChannel => {
            let i = sc.pi_position(a.subject_pis()[0])?;
            let p = &sc.pis[i];
            out.push(Resolution::new(
                DeletePi,
                &[&p.id],
                vec![Edit::Remove(p.id.clone())],
                "none of its traffic gets through",
            ));
            if let Some(g) = crate::anomaly::detect::filtered(sc, i) {
                let edits = sc
                    .profile(g)
                    .map(|prof| {
                        prof.firewall
                            .iter()
                            .enumerate()
                            .filter(|(_, r)| {
                                r.action == FirewallAction::Deny && r.selector.intersects(&p.selector)
                            })
                            .map(|(k, _)| Edit::DropFirewallRule { node: g, index: k })
                            .collect()
                    })
                    .unwrap_or_default();
                out.push(Resolution::new(
                    EditFilterRule,
                    &[&p.id],
                    edits,
                    format!("relax the rules on {}", sc.forest.node_name(g)),
                ));
            }
        }
        K::L2 => {
            let p = subject_pi(sc, a, 0)?;
            let alt = usable_technologies(sc, p, |t| sc.techs.layer(t).is_none_or(|l| l <= 2));
            match alt.first() {
                Some(t) => out.push(Resolution::new(
                    ChangeTechnology,
                    &[&p.id],
                    vec![Edit::Update(with_technology(sc, p, *t))],
                    format!("use {} above the data-link layer", sc.techs.name(*t)),
                )),
                None => out.push(Resolution::new(
                    ManualReview,
                    &[&p.id],
                    vec![],
                    "no technology above layer 2 is available on both ends",
                )),
            }
        }
        K::AsymmetricChannel => {
            let p = subject_pi(sc, a, 0)?;
            out.push(Resolution::new(
                ManualReview,
                &[&p.id],
                vec![Edit::Add(mirror(sc, p))],
                "check the intent; e.g. protect the reverse direction the same way",
            ));
        }
        K::CyclicPath => {
            let ids = cycle_edges(sc, a)?;
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            out.push(Resolution::new(
                RemoveCycleEdges,
                &refs,
                ids.iter().map(|id| Edit::Remove(id.clone())).collect(),
                format!("break the loop through {}", a.nodes.join(" -> ")),
            ));
        }
        K::Monitorability => {
            let path = a
                .paths()
                .first()
                .map(|p| p.to_vec())
                .ok_or_else(|| Error::Resolution("monitorability anomaly without a path".into()))?;
            let e2e = end_to_end(sc, &path)?;
            let refs: Vec<&str> = path.iter().map(String::as_str).collect();
            out.push(Resolution::new(
                ManualReview,
                &refs,
                vec![Edit::Add(e2e)],
                "add an end-to-end channel so intermediate nodes never see cleartext",
            ));
        }
        K::AlternativePath => {
            let paths = a.paths();
            if paths.len() < 2 {
                return Err(Error::Resolution("alternative path needs two paths".into()));
            }
            let keep = preferred_path(sc, &paths);
            let drop: BTreeSet<&String> = paths
                .iter()
                .filter(|p| **p != keep)
                .flat_map(|p| p.iter())
                .filter(|id| !keep.contains(id))
                .collect();
            let refs: Vec<&str> = keep.iter().map(String::as_str).collect();
            out.push(Resolution::new(
                SelectPreferredPath,
                &refs,
                drop.into_iter().map(|id| Edit::Remove(id.clone())).collect(),
                format!("keep {}", keep.join(" > ")),
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub resolved: bool,
    pub remaining: Vec<Anomaly>,
    pub appeared: Vec<Anomaly>,
}

/// Whether `b` is still the instance `a` on the edited scenario `live`.
/// Removing one member of a multi-subject finding counts as resolving it.
pub fn same_instance(a: &Anomaly, b: &Anomaly, live: &Scenario) -> bool {
    if a.kind != b.kind {
        return false;
    }
    if a.kind == AnomalyKind::CyclicPath {
        let x: BTreeSet<&String> = a.nodes.iter().collect();
        let y: BTreeSet<&String> = b.nodes.iter().collect();
        return x == y;
    }
    let original = a.pi_ids();
    let survivors: Vec<&str> = original
        .iter()
        .copied()
        .filter(|id| live.pi(id).is_some())
        .collect();
    if survivors.is_empty() || (survivors.len() < original.len() && a.subjects.len() > 1) {
        return false;
    }
    let ids = b.pi_ids();
    survivors.iter().all(|id| ids.contains(id))
}

/// Applies `r` to a copy of `sc`, re-runs the analysis and reports whether
/// `anomaly` is gone and what is new.
pub fn verify_resolution(r: &Resolution, anomaly: &Anomaly, sc: &Scenario) -> Result<Verification> {
    let before = run_analysis(sc, &AnalysisOptions::default())?;
    let fixed = r.apply(sc)?;
    let after = run_analysis(&fixed, &AnalysisOptions::default())?;
    let remaining: Vec<Anomaly> = after
        .anomalies
        .iter()
        .filter(|b| same_instance(anomaly, b, &fixed))
        .cloned()
        .collect();
    let appeared = after
        .anomalies
        .iter()
        .filter(|b| !before.anomalies.contains(b))
        .cloned()
        .collect();
    Ok(Verification {
        resolved: remaining.is_empty(),
        remaining,
        appeared,
    })
}
