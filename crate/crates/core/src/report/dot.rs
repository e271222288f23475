//! Graphviz rendering of a single anomaly.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::anomaly::{Anomaly, AnomalyKind};
use crate::error::{Error, Result};
use crate::network::entity::{EntityId, NodeId};
use crate::policy::pi::Pi;
use crate::scenario::Scenario;

/// Channel class, drawn as dashed, solid and doubled edges respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    Unprotected,
    Protected,
    Tunnel,
}

pub fn edge_class(sc: &Scenario, pi: &Pi) -> EdgeClass {
    if sc.techs.is_null(pi.technology) {
        EdgeClass::Unprotected
    } else if sc.is_tunnel(pi) {
        EdgeClass::Tunnel
    } else {
        EdgeClass::Protected
    }
}

fn style(class: EdgeClass) -> &'static str {
    match class {
        EdgeClass::Unprotected => "style=dashed",
        EdgeClass::Protected => "style=solid",
        EdgeClass::Tunnel => "style=solid, color=\"black:invis:black\"",
    }
}

/// Quoted DOT string literal.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn vertex(e: EntityId) -> String {
    format!("e{}", e.0)
}

/// Edge label: `tech: (hi,pi,c)` and the selector on a second line.
pub fn edge_label(sc: &Scenario, pi: &Pi) -> String {
    format!(
        "{}: {}\n{}",
        sc.techs.name(pi.technology),
        pi.coefficients,
        pi.selector
    )
}

/// DOT digraph of the PIs involved in `a`, drawn over the entity trees of
/// their end-points and crossed gateways.
pub fn emit_dot(a: &Anomaly, sc: &Scenario) -> Result<String> {
    if a.kind == AnomalyKind::OutOfPlace {
        return Err(Error::Unrenderable(a.kind.name().to_string()));
    }
    let mut ids: Vec<&str> = a.pi_ids().into_iter().collect();
    // Superfluous tunnels are drawn over the channels they carry.
    if let Some(k) = a.evidence_value("K") {
        ids.extend(k.split(',').filter(|s| !s.is_empty()));
    }
    let pis: Vec<&Pi> = ids
        .into_iter()
        .map(|id| sc.pi(id).ok_or_else(|| Error::UnknownPi(id.to_string())))
        .collect::<Result<_>>()?;

    let mut nodes: BTreeSet<NodeId> = BTreeSet::new();
    for p in &pis {
        nodes.extend(p.g_star(&sc.forest));
    }
    for n in &a.nodes {
        nodes.insert(sc.forest.node_id(n)?);
    }

    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(a.kind.name()));
    let _ = writeln!(out, "  rankdir=LR;");
    let _ = writeln!(out, "  label={};", quote(&a.message));
    let _ = writeln!(out, "  node [shape=box, fontsize=10];");
    let _ = writeln!(out, "  edge [fontsize=9];");
    for (k, &n) in nodes.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{k} {{");
        let _ = writeln!(
            out,
            "    label={};",
            quote(&format!("{} ({:?})", sc.forest.node_name(n), sc.forest.node(n).kind).to_lowercase())
        );
        for e in sc.forest.tree(n) {
            let ent = sc.forest.entity(e);
            let label = if ent.is_root() {
                sc.forest.node_name(n).to_string()
            } else {
                ent.label.clone()
            };
            let _ = writeln!(out, "    {} [label={}];", vertex(e), quote(&label));
            if let Some(parent) = ent.parent {
                let _ = writeln!(
                    out,
                    "    {} -> {} [arrowhead=none, style=dotted];",
                    vertex(parent),
                    vertex(e)
                );
            }
        }
        let _ = writeln!(out, "  }}");
    }
    for p in &pis {
        let class = edge_class(sc, p);
        let mut hops = vec![p.source];
        if class == EdgeClass::Tunnel {
            hops.extend(p.gateways.iter().map(|g| sc.forest.root(*g)));
        }
        let class = style(class);
        hops.push(p.destination);
        let label = format!("{}\n{}", p.id, edge_label(sc, p));
        for (k, w) in hops.windows(2).enumerate() {
            let extra = if k == 0 {
                format!(", label={}", quote(&label))
            } else {
                String::new()
            };
            let _ = writeln!(
                out,
                "  {} -> {} [{class}{extra}];",
                vertex(w[0]),
                vertex(w[1])
            );
        }
    }
    out.push_str("}\n");
    Ok(out)
}
