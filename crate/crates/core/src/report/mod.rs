//! Analysis reports in text, JSON and DOT form.

pub mod dot;

use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anomaly::{Analysis, AnalysisStats, Anomaly, AnomalyKind, EffectCategory, Note};
use crate::error::{Error, Result};
use crate::resolution::{suggest, Action, Edit, Resolution};
use crate::scenario::Scenario;

pub use dot::emit_dot;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    DotBundle,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            "dot-bundle" | "dot" => Ok(Format::DotBundle),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub nodes: usize,
    pub entities: usize,
    pub pis: usize,
    pub pi_sets: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestedResolution {
    pub action: Action,
    pub subjects: Vec<String>,
    pub rationale: String,
    pub edits: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportedAnomaly {
    #[serde(flatten)]
    pub anomaly: Anomaly,
    pub resolutions: Vec<SuggestedResolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub scenario: ScenarioSummary,
    pub anomalies: Vec<ReportedAnomaly>,
    pub notes: Vec<Note>,
    pub warnings: Vec<String>,
    pub stats: AnalysisStats,
}

fn describe_edit(sc: &Scenario, e: &Edit) -> String {
    match e {
        Edit::Remove(id) => format!("remove {id}"),
        Edit::Add(p) => format!("add {}", sc.describe_pi(p)),
        Edit::Update(p) => format!("update {}", sc.describe_pi(p)),
        Edit::DropFirewallRule { node, index } => {
            format!("drop firewall rule {index} at {}", sc.forest.node_name(*node))
        }
    }
}

fn summarize(sc: &Scenario, r: &Resolution) -> SuggestedResolution {
    SuggestedResolution {
        action: r.action,
        subjects: r.subjects.clone(),
        rationale: r.rationale.clone(),
        edits: r.edits.iter().map(|e| describe_edit(sc, e)).collect(),
    }
}

impl ReportDocument {
    /// Collects anomalies with their suggested resolutions.
    pub fn build(sc: &Scenario, analysis: &Analysis) -> Result<Self> {
        let mut prepared = sc.clone();
        prepared.topology.prepare();
        let sc = &prepared;
        let anomalies = analysis
            .anomalies
            .iter()
            .map(|a| {
                Ok(ReportedAnomaly {
                    anomaly: a.clone(),
                    resolutions: suggest(a, sc)?.iter().map(|r| summarize(sc, r)).collect(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(ReportDocument {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioSummary {
                nodes: sc.forest.node_count(),
                entities: sc.forest.entity_count(),
                pis: sc.pis.len(),
                pi_sets: sc.pi_sets().len(),
            },
            anomalies,
            notes: analysis.notes.clone(),
            warnings: analysis.warnings.clone(),
            stats: analysis.stats.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: "report".into(),
            source,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.scenario;
        let _ = writeln!(
            out,
            "scenario: {} nodes, {} entities, {} PIs in {} PI sets",
            s.nodes, s.entities, s.pis, s.pi_sets
        );
        let _ = writeln!(out, "anomalies: {}", self.anomalies.len());
        for cat in EffectCategory::ALL {
            let group: Vec<&ReportedAnomaly> = self
                .anomalies
                .iter()
                .filter(|r| r.anomaly.effect == cat)
                .collect();
            let _ = writeln!(out, "\n== {} ({}) ==", cat.title(), group.len());
            for r in group {
                let a = &r.anomaly;
                let _ = writeln!(out, "[{}] {}", a.kind.name(), a.message);
                let info = serde_json::to_value(a.info).expect("category serializes");
                let _ = writeln!(out, "    info: {}", info.as_str().unwrap_or_default());
                let ids: Vec<&str> = a.subject_pis();
                if !ids.is_empty() {
                    let _ = writeln!(out, "    subjects: {}", ids.join(", "));
                }
                for p in a.paths() {
                    let _ = writeln!(out, "    path: {}", p.join(" > "));
                }
                if !a.nodes.is_empty() {
                    let _ = writeln!(out, "    nodes: {}", a.nodes.join(", "));
                }
                for e in &a.evidence {
                    let _ = writeln!(out, "    {} = {}", e.clause, e.value);
                }
                for res in &r.resolutions {
                    let _ = writeln!(out, "    suggest {}: {}", res.action, res.rationale);
                    for e in &res.edits {
                        let _ = writeln!(out, "        {e}");
                    }
                }
            }
        }
        if !self.notes.is_empty() {
            let _ = writeln!(out, "\nnotes:");
            for n in &self.notes {
                let _ = writeln!(out, "  {}: {}", n.pi, n.message);
            }
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(out, "\nwarnings:");
            for w in &self.warnings {
                let _ = writeln!(out, "  {w}");
            }
        }
        let st = &self.stats;
        let _ = writeln!(
            out,
            "\npre-computation {:.3}s, analysis {:.3}s, {} connections, {} paths",
            st.pre_computation_time.as_secs_f64(),
            st.analysis_time.as_secs_f64(),
            st.connection_count,
            st.enumerated_paths
        );
        if st.paths_truncated {
            let _ = writeln!(out, "path enumeration was truncated by the path cap");
        }
        if st.cycles_truncated {
            let _ = writeln!(out, "cycle enumeration was truncated by the cycle cap");
        }
        out
    }
}

/// One output file of a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFile {
    pub name: String,
    pub contents: String,
}

/// Renders `doc`. The DOT bundle holds one graph per renderable anomaly
/// plus an index naming the skipped ones.
pub fn emit_report(doc: &ReportDocument, sc: &Scenario, format: Format) -> Result<Vec<ReportFile>> {
    match format {
        Format::Text => Ok(vec![ReportFile {
            name: "report.txt".into(),
            contents: doc.to_text(),
        }]),
        Format::Json => Ok(vec![ReportFile {
            name: "report.json".into(),
            contents: doc.to_json(),
        }]),
        Format::DotBundle => {
            let mut files = Vec::new();
            let mut index = String::new();
            for (k, r) in doc.anomalies.iter().enumerate() {
                let a = &r.anomaly;
                if a.kind == AnomalyKind::OutOfPlace {
                    let _ = writeln!(index, "{k:03} {} not rendered", a.kind.name());
                    continue;
                }
                let name = format!("{k:03}_{}.dot", a.kind.name().to_lowercase());
                let _ = writeln!(index, "{k:03} {} {name}", a.kind.name());
                files.push(ReportFile {
                    name,
                    contents: emit_dot(a, sc)?,
                });
            }
            files.insert(
                0,
                ReportFile {
                    name: "index.txt".into(),
                    contents: index,
                },
            );
            Ok(files)
        }
    }
}
