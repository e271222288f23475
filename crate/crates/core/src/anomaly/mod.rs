//! Anomaly records and the analysis driver.

pub mod detect;
pub mod kind;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::entity::NodeId;
use crate::path::{enumerate_all_paths, ConnectionGraph, Path, PathIndex, DEFAULT_PATH_CAP};
use crate::policy::pi::Pi;
use crate::policy::selector::Selector;
use crate::relation::Relation;
use crate::scenario::Scenario;

pub use detect::{Evidence, PairRelations};
pub use kind::{AnomalyKind, EffectCategory, InfoCategory};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Subject {
    Pi { id: String },
    Path { pis: Vec<String> },
}

impl Subject {
    pub fn pi_ids(&self) -> Vec<&str> {
        match self {
            Subject::Pi { id } => vec![id.as_str()],
            Subject::Path { pis } => pis.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    pub effect: EffectCategory,
    pub info: InfoCategory,
    pub subjects: Vec<Subject>,
    /// Node names, set for cycles.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<String>,
    pub evidence: Vec<Evidence>,
    pub message: String,
}

impl Anomaly {
    pub fn new(kind: AnomalyKind, subjects: Vec<Subject>, evidence: Vec<Evidence>, message: String) -> Self {
        Anomaly {
            kind,
            effect: kind.effect(),
            info: kind.info(),
            subjects,
            nodes: Vec::new(),
            evidence,
            message,
        }
    }

    /// Every PI id mentioned by the subjects, deduplicated.
    pub fn pi_ids(&self) -> BTreeSet<&str> {
        self.subjects.iter().flat_map(|s| s.pi_ids()).collect()
    }

    /// PI ids when every subject is a single PI.
    pub fn subject_pis(&self) -> Vec<&str> {
        self.subjects
            .iter()
            .filter_map(|s| match s {
                Subject::Pi { id } => Some(id.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn paths(&self) -> Vec<&[String]> {
        self.subjects
            .iter()
            .filter_map(|s| match s {
                Subject::Path { pis } => Some(pis.as_slice()),
                _ => None,
            })
            .collect()
    }

    pub fn evidence_value(&self, clause: &str) -> Option<&str> {
        self.evidence
            .iter()
            .find(|e| e.clause == clause)
            .map(|e| e.value.as_str())
    }

    fn sort_key(&self) -> (AnomalyKind, &[Subject], &[String]) {
        (self.kind, &self.subjects, &self.nodes)
    }
}

/// Informational finding that is not an anomaly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub pi: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisOptions {
    pub path_cap: usize,
    pub cycle_cap: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            path_cap: DEFAULT_PATH_CAP,
            cycle_cap: DEFAULT_PATH_CAP,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisStats {
    pub entity_count: usize,
    pub pi_count: usize,
    pub connection_count: usize,
    pub enumerated_paths: usize,
    pub paths_truncated: bool,
    pub cycles_truncated: bool,
    #[serde(with = "secs")]
    pub pre_computation_time: Duration,
    #[serde(with = "secs")]
    pub analysis_time: Duration,
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Analysis {
    pub anomalies: Vec<Anomaly>,
    pub notes: Vec<Note>,
    pub warnings: Vec<String>,
    pub stats: AnalysisStats,
}

fn pi_subject(p: &Pi) -> Subject {
    Subject::Pi { id: p.id.clone() }
}

fn path_subject(sc: &Scenario, p: &[usize]) -> Subject {
    Subject::Path {
        pis: p.iter().map(|&i| sc.pis[i].id.clone()).collect(),
    }
}

fn names(sc: &Scenario, nodes: &[NodeId]) -> Vec<String> {
    nodes
        .iter()
        .map(|n| sc.forest.node_name(*n).to_string())
        .collect()
}

/// Validates the scenario, then runs every detector. Output is sorted by
/// kind and subjects.
pub fn run_analysis(scenario: &Scenario, opts: &AnalysisOptions) -> Result<Analysis> {
    let t0 = Instant::now();
    let mut sc = scenario.clone();
    sc.topology.prepare();
    let warnings = sc.validate()?;
    let pre = t0.elapsed();

    let t1 = Instant::now();
    let sc = &sc;
    let mut out = Vec::new();
    let mut notes = Vec::new();
    pi_level(sc, &mut out, &mut notes);
    node_level(sc, &mut out);
    channel_level(sc, &mut out);
    let index = PathIndex::build(sc);
    let graph = ConnectionGraph::build(sc);
    let (enumerated, paths_truncated) = path_level(sc, &index, opts.path_cap, &mut out);
    let cycles_truncated = cycle_level(sc, &index, &graph, opts.cycle_cap, &mut out);
    out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    out.dedup();
    notes.sort_by(|a, b| (&a.pi, &a.message).cmp(&(&b.pi, &b.message)));
    let analysis = t1.elapsed();

    Ok(Analysis {
        anomalies: out,
        notes,
        warnings,
        stats: AnalysisStats {
            entity_count: sc.forest.entity_count(),
            pi_count: sc.pis.len(),
            connection_count: graph.connection_count(),
            enumerated_paths: enumerated,
            paths_truncated,
            cycles_truncated,
            pre_computation_time: pre,
            analysis_time: analysis,
        },
    })
}

fn pi_level(sc: &Scenario, out: &mut Vec<Anomaly>, notes: &mut Vec<Note>) {
    for p in &sc.pis {
        if detect::internal_loop(sc, p) {
            out.push(Anomaly::new(
                AnomalyKind::InternalLoop,
                vec![pi_subject(p)],
                vec![Evidence::new("s1 ? d1", sc.forest.relation(p.source, p.destination))],
                format!(
                    "{}: source {} and destination {} are on the same node",
                    p.id,
                    sc.forest.display(p.source),
                    sc.forest.display(p.destination)
                ),
            ));
        }
        if detect::out_of_place(sc, p) {
            out.push(Anomaly::new(
                AnomalyKind::OutOfPlace,
                vec![pi_subject(p)],
                vec![
                    Evidence::new("N(i1)", sc.forest.node_name(p.deployed_at)),
                    Evidence::new("node(s1)", sc.forest.node_name(p.source_node(&sc.forest))),
                ],
                format!(
                    "{}: deployed on {} but its source lives on {}",
                    p.id,
                    sc.forest.node_name(p.deployed_at),
                    sc.forest.node_name(p.source_node(&sc.forest))
                ),
            ));
        }
        if let Some(why) = detect::non_enforceability(sc, p) {
            use detect::Unenforceable::*;
            let (clause, msg) = match why {
                SourceLacksTechnology => (
                    "t1 ∉ T(s1)",
                    format!(
                        "{} is not supported on {}",
                        sc.techs.name(p.technology),
                        sc.forest.node_name(p.source_node(&sc.forest))
                    ),
                ),
                DestinationLacksTechnology => (
                    "t1 ∉ T(d1)",
                    format!(
                        "{} is not supported on {}",
                        sc.techs.name(p.technology),
                        sc.forest.node_name(p.destination_node(&sc.forest))
                    ),
                ),
                AboveMaximum => (
                    "C1 ≻ Cmax",
                    format!("coefficients {} exceed what the end points can enforce", p.coefficients),
                ),
            };
            out.push(Anomaly::new(
                AnomalyKind::NonEnforceability,
                vec![pi_subject(p)],
                vec![Evidence::new(clause, true)],
                format!("{}: {msg}", p.id),
            ));
        }
        let cmin = sc.c_min(p);
        match p.coefficients.relation(&cmin) {
            Relation::DominatedBy => out.push(Anomaly::new(
                AnomalyKind::Inadequacy,
                vec![pi_subject(p)],
                vec![
                    Evidence::new("C1", p.coefficients),
                    Evidence::new("Cmin", cmin),
                    Evidence::new("C1 ? Cmin", Relation::DominatedBy),
                ],
                format!(
                    "{}: coefficients {} are below the required minimum {}",
                    p.id, p.coefficients, cmin
                ),
            )),
            Relation::Disjoint => notes.push(Note {
                pi: p.id.clone(),
                message: format!(
                    "coefficients {} are incomparable with the required minimum {}",
                    p.coefficients, cmin
                ),
            }),
            _ => {}
        }
    }
}

fn pair_anomaly(sc: &Scenario, kind: AnomalyKind, a: &Pi, b: &Pi, msg: String) -> Anomaly {
    let r = PairRelations::of(sc, a, b);
    let mut ev = r.evidence();
    if matches!(
        kind,
        AnomalyKind::Shadowing | AnomalyKind::Redundancy | AnomalyKind::Exception
    ) {
        ev.push(Evidence::new("π1 < π2", r.priority_before));
    }
    Anomaly::new(kind, vec![pi_subject(a), pi_subject(b)], ev, msg)
}

/// Orders an unordered pair by id.
fn by_id<'a>(a: &'a Pi, b: &'a Pi) -> (&'a Pi, &'a Pi) {
    if a.id <= b.id {
        (a, b)
    } else {
        (b, a)
    }
}

fn node_level(sc: &Scenario, out: &mut Vec<Anomaly>) {
    let sets = sc.pi_sets();
    for members in sets.values() {
        for (x, &ia) in members.iter().enumerate() {
            for &ib in &members[x + 1..] {
                let (a, b) = (&sc.pis[ia], &sc.pis[ib]);
                for (i1, i2) in [(a, b), (b, a)] {
                    if detect::shadowing(sc, i1, i2) {
                        out.push(pair_anomaly(
                            sc,
                            AnomalyKind::Shadowing,
                            i1,
                            i2,
                            format!("{} shadows {}", i1.id, i2.id),
                        ));
                    }
                    if detect::redundancy(sc, i1, i2) {
                        out.push(pair_anomaly(
                            sc,
                            AnomalyKind::Redundancy,
                            i1,
                            i2,
                            format!("{} makes {} redundant", i1.id, i2.id),
                        ));
                    }
                    if detect::exception(sc, i1, i2) {
                        out.push(pair_anomaly(
                            sc,
                            AnomalyKind::Exception,
                            i1,
                            i2,
                            format!("{} is an exception of {}", i1.id, i2.id),
                        ));
                    }
                }
                if detect::correlation(sc, a, b) {
                    let (a, b) = by_id(a, b);
                    out.push(pair_anomaly(
                        sc,
                        AnomalyKind::Correlation,
                        a,
                        b,
                        format!("{} and {} match some common traffic", a.id, b.id),
                    ));
                }
            }
        }
    }

    // Inter-technology pairs deployed on the same node.
    let keys: Vec<_> = sets.keys().copied().collect();
    for (x, ka) in keys.iter().enumerate() {
        for kb in &keys[x + 1..] {
            if ka.0 != kb.0 {
                continue;
            }
            for &ia in &sets[ka] {
                for &ib in &sets[kb] {
                    let (a, b) = by_id(&sc.pis[ia], &sc.pis[ib]);
                    inter_tech_pair(sc, a, b, out);
                }
            }
        }
    }

    for p in &sc.pis {
        let zones = detect::zone_contradiction(sc, p);
        if !zones.is_empty() {
            let mut ev = vec![
                Evidence::new("source", "threshold"),
                Evidence::new("c1^c > 0", true),
            ];
            for z in &zones {
                ev.push(Evidence::new(
                    "S1 ∩ inspection zone",
                    sc.thresholds.inspection_zones[*z].to_string(),
                ));
            }
            out.push(Anomaly::new(
                AnomalyKind::Contradiction,
                vec![pi_subject(p)],
                ev,
                format!("{} encrypts traffic that must stay inspectable", p.id),
            ));
        }
    }
}

fn inter_tech_pair(sc: &Scenario, a: &Pi, b: &Pi, out: &mut Vec<Anomaly>) {
    for (i1, i2) in [(a, b), (b, a)] {
        if detect::inclusion(sc, i1, i2) {
            out.push(pair_anomaly(
                sc,
                AnomalyKind::Inclusion,
                i1,
                i2,
                format!("{} includes {}", i1.id, i2.id),
            ));
        }
    }
    if detect::affinity(sc, a, b) {
        out.push(pair_anomaly(
            sc,
            AnomalyKind::Affinity,
            a,
            b,
            format!("{} and {} protect overlapping traffic with different technologies", a.id, b.id),
        ));
    }
    if detect::contradiction(sc, a, b) {
        out.push(pair_anomaly(
            sc,
            AnomalyKind::Contradiction,
            a,
            b,
            format!("{} and {} disagree on whether the traffic is protected", a.id, b.id),
        ));
    }
}

fn id_list(sc: &Scenario, idx: &[usize]) -> String {
    idx.iter()
        .map(|&i| sc.pis[i].id.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

fn channel_level(sc: &Scenario, out: &mut Vec<Anomaly>) {
    for (i, p) in sc.pis.iter().enumerate() {
        if let Some(k) = detect::superfluous(sc, p) {
            out.push(Anomaly::new(
                AnomalyKind::Superfluous,
                vec![pi_subject(p)],
                vec![
                    Evidence::new("K", id_list(sc, &k)),
                    Evidence::new("∄ k: Ck ≺ C1", true),
                ],
                format!(
                    "tunnel {} protects no more than the channels it carries ({})",
                    p.id,
                    id_list(sc, &k)
                ),
            ));
        }
        if let Some(g) = detect::filtered(sc, i) {
            out.push(Anomaly::new(
                AnomalyKind::FilteredChannel,
                vec![pi_subject(p)],
                vec![Evidence::new("F_e(i1)", sc.forest.node_name(g))],
                format!("{}: all its traffic is dropped at {}", p.id, sc.forest.node_name(g)),
            ));
        }
        if let Some(n) = detect::l2(sc, p) {
            out.push(Anomaly::new(
                AnomalyKind::L2,
                vec![pi_subject(p)],
                vec![Evidence::new("t1 ∉ T2(e)", sc.forest.node_name(n))],
                format!(
                    "{}: {} cannot cross {}",
                    p.id,
                    sc.techs.name(p.technology),
                    sc.forest.node_name(n)
                ),
            ));
        }
        if let Some(rev) = detect::asymmetric(sc, p) {
            out.push(Anomaly::new(
                AnomalyKind::AsymmetricChannel,
                vec![pi_subject(p)],
                vec![
                    Evidence::new("reverse traffic", id_list(sc, &rev)),
                    Evidence::new("mirror", false),
                ],
                format!(
                    "{}: the reverse traffic ({}) is not protected the same way",
                    p.id,
                    id_list(sc, &rev)
                ),
            ));
        }
    }
    for (x, a) in sc.pis.iter().enumerate() {
        for b in &sc.pis[x + 1..] {
            if detect::skewed(sc, a, b) || detect::skewed(sc, b, a) {
                let (a, b) = by_id(a, b);
                let shared: BTreeSet<NodeId> = sc
                    .g_star(a)
                    .into_iter()
                    .filter(|n| sc.g_star(b).contains(n))
                    .collect();
                let shared: Vec<NodeId> = shared.into_iter().collect();
                out.push(Anomaly::new(
                    AnomalyKind::SkewedChannel,
                    vec![pi_subject(a), pi_subject(b)],
                    vec![Evidence::new("G1* ∩ G2*", names(sc, &shared).join(","))],
                    format!("tunnels {} and {} overlap without nesting", a.id, b.id),
                ));
            }
        }
    }
}

fn communicates(sc: &Scenario, p: &Path) -> bool {
    p.pis
        .iter()
        .any(|&i| sc.pis[i].coefficients.has_confidentiality())
}

fn path_level(sc: &Scenario, index: &PathIndex, cap: usize, out: &mut Vec<Anomaly>) -> (usize, bool) {
    let cat = enumerate_all_paths(sc, index, cap);
    for ((e1, e2), multi) in &cat.multi_hop {
        let n1 = sc.forest.node_of(*e1);
        let n2 = sc.forest.node_of(*e2);
        if let Some(p) = multi.iter().find(|p| communicates(sc, p)) {
            let direct = sc.pis.iter().enumerate().any(|(j, q)| {
                q.coefficients.has_confidentiality()
                    && q.source_node(&sc.forest) == n1
                    && q.destination_node(&sc.forest) == n2
                    && index.traffic(j).intersects(&p.traffic)
            });
            if !direct {
                out.push(Anomaly::new(
                    AnomalyKind::Monitorability,
                    vec![path_subject(sc, &p.pis)],
                    vec![
                        Evidence::new("|P| > 1", p.len()),
                        Evidence::new("∄ end-to-end channel with c^c > 0", true),
                    ],
                    format!(
                        "{} -> {} is protected hop by hop only; intermediate nodes see cleartext",
                        sc.forest.display(*e1),
                        sc.forest.display(*e2)
                    ),
                ));
            }
        }
        let mut all: Vec<Vec<usize>> = sc
            .pis
            .iter()
            .enumerate()
            .filter(|(_, q)| q.source == *e1 && q.destination == *e2)
            .map(|(j, _)| vec![j])
            .collect();
        all.extend(multi.iter().map(|p| p.pis.clone()));
        all.sort_by(|a, b| {
            let ka: Vec<&str> = a.iter().map(|&i| sc.pis[i].id.as_str()).collect();
            let kb: Vec<&str> = b.iter().map(|&i| sc.pis[i].id.as_str()).collect();
            ka.cmp(&kb)
        });
        for (x, p) in all.iter().enumerate() {
            for q in &all[x + 1..] {
                out.push(Anomaly::new(
                    AnomalyKind::AlternativePath,
                    vec![path_subject(sc, p), path_subject(sc, q)],
                    vec![Evidence::new("paths", all.len())],
                    format!(
                        "{} -> {} is reachable through different paths",
                        sc.forest.display(*e1),
                        sc.forest.display(*e2)
                    ),
                ));
            }
        }
    }
    (cat.enumerated, cat.truncated)
}

/// One PI per cycle edge such that some traffic survives all of them.
fn coherent_choice(
    sc: &Scenario,
    graph: &ConnectionGraph,
    index: &PathIndex,
    cycle: &[NodeId],
) -> Option<Vec<usize>> {
    // Candidates in id order so the witness does not depend on input order.
    let hops: Vec<Vec<usize>> = (0..cycle.len())
        .map(|k| {
            let mut on = graph.pis_on(cycle[k], cycle[(k + 1) % cycle.len()]);
            on.sort_by(|&a, &b| sc.pis[a].id.cmp(&sc.pis[b].id));
            on
        })
        .collect();
    fn go(
        hops: &[Vec<usize>],
        index: &PathIndex,
        k: usize,
        acc: Option<Selector>,
        chosen: &mut Vec<usize>,
    ) -> bool {
        if k == hops.len() {
            return true;
        }
        for &i in &hops[k] {
            let t = match &acc {
                None => index.traffic(i).clone(),
                Some(a) => a.intersect(index.traffic(i)),
            };
            if t.is_empty() {
                continue;
            }
            chosen.push(i);
            if go(hops, index, k + 1, Some(t), chosen) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    let mut chosen = Vec::new();
    go(&hops, index, 0, None, &mut chosen).then_some(chosen)
}

fn cycle_level(
    sc: &Scenario,
    index: &PathIndex,
    graph: &ConnectionGraph,
    cap: usize,
    out: &mut Vec<Anomaly>,
) -> bool {
    if !graph.digraph().has_cycle() {
        return false;
    }
    let (cycles, truncated) = graph.cycles(cap);
    for c in cycles {
        if let Some(mut chosen) = coherent_choice(sc, graph, index, &c) {
            chosen.dedup();
            let mut a = Anomaly::new(
                AnomalyKind::CyclicPath,
                vec![path_subject(sc, &chosen)],
                vec![Evidence::new("cycle", names(sc, &c).join(" -> "))],
                format!("traffic loops through {}", names(sc, &c).join(" -> ")),
            );
            a.nodes = names(sc, &c);
            out.push(a);
        }
    }
    truncated
}
