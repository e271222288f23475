//! The JSON scenario document: parsing into a [`Scenario`] and writing one
//! back out.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::network::capability::{CapabilityProfile, FirewallAction, FirewallRule};
use crate::network::entity::{format_ipv4, parse_ipv4, EntityId, NodeId, NodeKind};
use crate::policy::coefficients::Coefficients;
use crate::policy::fieldset::{FieldKind, FieldSet};
use crate::policy::pi::Pi;
use crate::policy::selector::{Selector, FIVE_TUPLE};
use crate::policy::technology::TechId;
use crate::scenario::{Manifest, MinRule, PiPredicate, Scenario, Thresholds};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    #[serde(default)]
    pub schema_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub technologies: Vec<TechDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tech_preference: Vec<String>,
    #[serde(default)]
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub topology: TopologyDoc,
    #[serde(default)]
    pub routing: RoutingDoc,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub capabilities: BTreeMap<String, ProfileDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pi_sets: Vec<PiSetDoc>,
    #[serde(default)]
    pub pis: Vec<PiDoc>,
    #[serde(default)]
    pub thresholds: ThresholdsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<Manifest>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechDoc {
    pub name: String,
    pub layer: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub name: String,
    #[serde(default)]
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entities: Vec<EntityDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityDoc {
    pub label: String,
    pub layer: u8,
    /// Local label of the parent; the node root when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ip: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    #[serde(default)]
    pub edges: Vec<[String; 2]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingDoc {
    /// Fall back to shortest walks for pairs without a declared route.
    #[serde(default)]
    pub auto: bool,
    #[serde(default)]
    pub routes: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technologies: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer2: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub max_coefficients: BTreeMap<String, Coefficients>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub firewall: Vec<RuleDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDoc {
    pub selector: Value,
    pub action: FirewallAction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiSetDoc {
    pub node: String,
    pub technology: String,
    pub pis: Vec<PiDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiDoc {
    pub id: String,
    pub source: String,
    pub destination: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technology: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Coefficients>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateways: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deployed_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub min_coefficients: Vec<MinRuleDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inspection_zones: Vec<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinRuleDoc {
    #[serde(default)]
    pub when: PredicateDoc,
    pub min: Coefficients,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub crosses: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source_nodes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub destination_nodes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub technologies: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<Value>,
}

fn ctx(at: &str, e: Error) -> Error {
    Error::Invalid(format!("{at}: {e}"))
}

/// Selectors are written either as `"*"` or as an object of field texts;
/// missing fields are wildcards and unknown names become extra fields.
pub fn selector_from_value(v: &Value) -> Result<Selector> {
    match v {
        Value::String(s) if s.trim() == "*" => Ok(Selector::any()),
        Value::Object(map) => {
            let text = |key: &str| -> Result<String> {
                match map.get(key) {
                    None | Some(Value::Null) => Ok("*".into()),
                    Some(Value::String(s)) => Ok(s.clone()),
                    Some(Value::Number(n)) => Ok(n.to_string()),
                    Some(other) => Err(Error::BadValue {
                        what: "selector field",
                        value: other.to_string(),
                    }),
                }
            };
            let mut s = Selector::new(
                &text("ip_src")?,
                &text("p_src")?,
                &text("ip_dst")?,
                &text("p_dst")?,
                &text("prt")?,
            )?;
            let mut extras: Vec<&String> = map
                .keys()
                .filter(|k| !FIVE_TUPLE.contains(&k.as_str()))
                .collect();
            extras.sort();
            for k in extras {
                s.extras
                    .push((k.clone(), FieldSet::parse(FieldKind::Other, &text(k)?)?));
            }
            Ok(s)
        }
        other => Err(Error::BadValue {
            what: "selector",
            value: other.to_string(),
        }),
    }
}

pub fn selector_to_value(s: &Selector) -> Value {
    if s.is_any() && s.extras.is_empty() {
        return Value::String("*".into());
    }
    let mut map = serde_json::Map::new();
    for name in FIVE_TUPLE {
        let f = s.field(name).expect("five-tuple field");
        if !f.is_full() {
            map.insert(name.to_string(), Value::String(f.to_string()));
        }
    }
    for (name, f) in &s.extras {
        map.insert(name.clone(), Value::String(f.to_string()));
    }
    Value::Object(map)
}

fn node_list(sc: &Scenario, names: &[String], at: &str) -> Result<Vec<NodeId>> {
    names
        .iter()
        .map(|n| sc.forest.node_id(n).map_err(|e| ctx(at, e)))
        .collect()
}

fn tech_list(sc: &Scenario, names: &[String], at: &str) -> Result<Vec<TechId>> {
    names
        .iter()
        .map(|n| sc.techs.resolve(n).map_err(|e| ctx(at, e)))
        .collect()
}

impl Document {
    pub fn from_json(text: &str) -> Result<Document> {
        serde_json::from_str(text).map_err(|e| Error::Json {
            context: "scenario document".into(),
            source: e,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    /// Builds the scenario without running validation.
    pub fn build(&self) -> Result<Scenario> {
        if let Some(v) = self.schema_version {
            if v != SCHEMA_VERSION {
                return Err(Error::Invalid(format!("unsupported schema_version {v}")));
            }
        }
        let mut sc = Scenario::new();
        for t in &self.technologies {
            sc.techs
                .register(&t.name, t.layer)
                .map_err(|e| ctx("technologies", e))?;
        }
        sc.tech_preference = tech_list(&sc, &self.tech_preference, "tech_preference")?;

        for (k, n) in self.nodes.iter().enumerate() {
            let at = format!("nodes[{k}]");
            let addr = n
                .address
                .as_deref()
                .map(parse_ipv4)
                .transpose()
                .map_err(|e| ctx(&at, e))?;
            sc.add_node(&n.name, n.kind, addr).map_err(|e| ctx(&at, e))?;
        }
        for (k, n) in self.nodes.iter().enumerate() {
            let node = NodeId(k as u32);
            let mut local: HashMap<&str, EntityId> = HashMap::new();
            for (j, e) in n.entities.iter().enumerate() {
                let at = format!("nodes[{k}].entities[{j}]");
                let parent = match &e.parent {
                    None => None,
                    Some(p) => Some(*local.get(p.as_str()).ok_or_else(|| {
                        ctx(&at, Error::UnknownEntity(format!("{}.{p}", n.name)))
                    })?),
                };
                let ip = e
                    .ip
                    .as_deref()
                    .map(parse_ipv4)
                    .transpose()
                    .map_err(|er| ctx(&at, er))?;
                let id = sc
                    .forest
                    .add_entity(node, &e.label, e.layer, parent, ip, e.port)
                    .map_err(|er| ctx(&at, er))?;
                if let Some(a) = &e.alias {
                    sc.forest.set_alias(id, a).map_err(|er| ctx(&at, er))?;
                }
                local.insert(&e.label, id);
            }
        }

        for (k, [a, b]) in self.topology.edges.iter().enumerate() {
            let at = format!("topology.edges[{k}]");
            let a = sc.forest.node_id(a).map_err(|e| ctx(&at, e))?;
            let b = sc.forest.node_id(b).map_err(|e| ctx(&at, e))?;
            sc.topology.add_edge(a, b);
        }
        sc.topology.auto_routes = self.routing.auto;
        for (k, r) in self.routing.routes.iter().enumerate() {
            let at = format!("routing.routes[{k}]");
            let walk = node_list(&sc, r, &at)?;
            sc.topology.set_route(walk).map_err(|e| ctx(&at, e))?;
        }
        sc.topology.prepare();

        for (name, p) in &self.capabilities {
            let at = format!("capabilities.{name}");
            let node = sc.forest.node_id(name).map_err(|e| ctx(&at, e))?;
            let set = |v: &Option<Vec<String>>| -> Result<Option<BTreeSet<TechId>>> {
                v.as_ref()
                    .map(|l| tech_list(&sc, l, &at).map(|t| t.into_iter().collect()))
                    .transpose()
            };
            let mut prof = CapabilityProfile {
                technologies: set(&p.technologies)?,
                layer2: set(&p.layer2)?,
                ..Default::default()
            };
            for (t, c) in &p.max_coefficients {
                let t = sc.techs.resolve(t).map_err(|e| ctx(&at, e))?;
                prof.max_coefficients.insert(t, *c);
            }
            for (j, r) in p.firewall.iter().enumerate() {
                prof.firewall.push(FirewallRule {
                    selector: selector_from_value(&r.selector)
                        .map_err(|e| ctx(&format!("{at}.firewall[{j}]"), e))?,
                    action: r.action,
                });
            }
            sc.profiles.insert(node, prof);
        }

        let mut next_prio: HashMap<(NodeId, TechId), u32> = HashMap::new();
        let grouped = self.pi_sets.iter().enumerate().flat_map(|(k, set)| {
            set.pis
                .iter()
                .enumerate()
                .map(move |(j, p)| (format!("pi_sets[{k}].pis[{j}]"), p, Some(set)))
        });
        let flat = self
            .pis
            .iter()
            .enumerate()
            .map(|(j, p)| (format!("pis[{j}]"), p, None));
        for (at, p, set) in grouped.chain(flat) {
            let pi = build_pi(&sc, p, set, &mut next_prio).map_err(|e| ctx(&at, e))?;
            sc.pis.push(pi);
        }

        let mut th = Thresholds::default();
        for (k, r) in self.thresholds.min_coefficients.iter().enumerate() {
            let at = format!("thresholds.min_coefficients[{k}]");
            let w = &r.when;
            th.min_coefficients.push(MinRule {
                when: PiPredicate {
                    crosses: node_list(&sc, &w.crosses, &at)?,
                    source_nodes: node_list(&sc, &w.source_nodes, &at)?,
                    destination_nodes: node_list(&sc, &w.destination_nodes, &at)?,
                    technologies: tech_list(&sc, &w.technologies, &at)?,
                    selector: w
                        .selector
                        .as_ref()
                        .map(selector_from_value)
                        .transpose()
                        .map_err(|e| ctx(&at, e))?,
                },
                min: r.min,
            });
        }
        for (k, z) in self.thresholds.inspection_zones.iter().enumerate() {
            th.inspection_zones.push(
                selector_from_value(z)
                    .map_err(|e| ctx(&format!("thresholds.inspection_zones[{k}]"), e))?,
            );
        }
        sc.thresholds = th;
        sc.manifest = self.manifest.clone();
        Ok(sc)
    }

    pub fn from_scenario(sc: &Scenario) -> Document {
        let f = &sc.forest;
        let names = |v: &[NodeId]| -> Vec<String> {
            v.iter().map(|n| f.node_name(*n).to_string()).collect()
        };
        let tnames = |v: &[TechId]| -> Vec<String> {
            v.iter().map(|t| sc.techs.name(*t).to_string()).collect()
        };
        let mut nodes: Vec<NodeDoc> = f
            .nodes()
            .map(|(_, n)| NodeDoc {
                name: n.name.clone(),
                kind: n.kind,
                address: n.address.map(format_ipv4),
                entities: Vec::new(),
            })
            .collect();
        for (_, e) in f.entities() {
            if e.is_root() {
                continue;
            }
            let parent = e
                .parent
                .map(|p| f.entity(p))
                .filter(|p| !p.is_root())
                .map(|p| p.label.clone());
            nodes[e.node.0 as usize].entities.push(EntityDoc {
                label: e.label.clone(),
                layer: e.layer.expect("non-root entity has a layer"),
                parent,
                ip: e.ip.map(format_ipv4),
                port: e.port,
                alias: e.alias.clone(),
            });
        }
        let capabilities = sc
            .profiles
            .iter()
            .map(|(n, p)| {
                let set = |s: &Option<BTreeSet<TechId>>| {
                    s.as_ref()
                        .map(|s| s.iter().map(|t| sc.techs.name(*t).to_string()).collect())
                };
                (
                    f.node_name(*n).to_string(),
                    ProfileDoc {
                        technologies: set(&p.technologies),
                        layer2: set(&p.layer2),
                        max_coefficients: p
                            .max_coefficients
                            .iter()
                            .map(|(t, c)| (sc.techs.name(*t).to_string(), *c))
                            .collect(),
                        firewall: p
                            .firewall
                            .iter()
                            .map(|r| RuleDoc {
                                selector: selector_to_value(&r.selector),
                                action: r.action,
                            })
                            .collect(),
                    },
                )
            })
            .collect();
        let pis = sc
            .pis
            .iter()
            .map(|p| PiDoc {
                id: p.id.clone(),
                source: f.display(p.source),
                destination: f.display(p.destination),
                technology: Some(sc.techs.name(p.technology).to_string()),
                coefficients: Some(p.coefficients),
                selector: Some(selector_to_value(&p.selector)),
                gateways: Some(names(&p.gateways)),
                deployed_at: Some(f.node_name(p.deployed_at).to_string()),
                priority: Some(p.priority),
            })
            .collect();
        Document {
            schema_version: Some(SCHEMA_VERSION),
            technologies: sc
                .techs
                .custom()
                .iter()
                .map(|t| TechDoc {
                    name: t.name.clone(),
                    layer: t.layer.expect("custom technologies have a layer"),
                })
                .collect(),
            tech_preference: tnames(&sc.tech_preference),
            nodes,
            topology: TopologyDoc {
                edges: sc
                    .topology
                    .edges()
                    .into_iter()
                    .map(|(a, b)| [f.node_name(a).to_string(), f.node_name(b).to_string()])
                    .collect(),
            },
            routing: RoutingDoc {
                auto: sc.topology.auto_routes,
                routes: sc.topology.explicit_routes().map(|r| names(r)).collect(),
            },
            capabilities,
            pi_sets: Vec::new(),
            pis,
            thresholds: ThresholdsDoc {
                min_coefficients: sc
                    .thresholds
                    .min_coefficients
                    .iter()
                    .map(|r| MinRuleDoc {
                        when: PredicateDoc {
                            crosses: names(&r.when.crosses),
                            source_nodes: names(&r.when.source_nodes),
                            destination_nodes: names(&r.when.destination_nodes),
                            technologies: tnames(&r.when.technologies),
                            selector: r.when.selector.as_ref().map(selector_to_value),
                        },
                        min: r.min,
                    })
                    .collect(),
                inspection_zones: sc
                    .thresholds
                    .inspection_zones
                    .iter()
                    .map(selector_to_value)
                    .collect(),
            },
            manifest: sc.manifest.clone(),
        }
    }
}

fn build_pi(
    sc: &Scenario,
    p: &PiDoc,
    set: Option<&PiSetDoc>,
    next_prio: &mut HashMap<(NodeId, TechId), u32>,
) -> Result<Pi> {
    let source = sc.forest.resolve(&p.source)?;
    let destination = sc.forest.resolve(&p.destination)?;
    let tech_name = p
        .technology
        .as_deref()
        .or(set.map(|s| s.technology.as_str()))
        .ok_or_else(|| Error::Invalid(format!("PI {} has no technology", p.id)))?;
    let technology = sc.techs.resolve(tech_name)?;
    if let Some(s) = set {
        if sc.techs.resolve(&s.technology)? != technology {
            return Err(Error::Invalid(format!(
                "PI {} does not use its set's technology",
                p.id
            )));
        }
    }
    let deployed_at = match p.deployed_at.as_deref().or(set.map(|s| s.node.as_str())) {
        Some(n) => sc.forest.node_id(n)?,
        None => sc.forest.node_of(source),
    };
    if let (Some(s), Some(d)) = (set, &p.deployed_at) {
        if s.node != *d {
            return Err(Error::Invalid(format!(
                "PI {} is listed in the set of {} but deployed at {d}",
                p.id, s.node
            )));
        }
    }
    let gateways = match &p.gateways {
        Some(g) => g
            .iter()
            .map(|n| sc.forest.node_id(n))
            .collect::<Result<Vec<_>>>()?,
        None => {
            let (a, b) = (sc.forest.node_of(source), sc.forest.node_of(destination));
            if a == b {
                Vec::new()
            } else {
                sc.topology.crossed_gateways(&sc.forest, a, b)?
            }
        }
    };
    let key = (deployed_at, technology);
    let priority = match p.priority {
        Some(v) => v,
        None => next_prio.get(&key).copied().unwrap_or(0),
    };
    let slot = next_prio.entry(key).or_insert(0);
    *slot = (*slot).max(priority + 1);
    Ok(Pi {
        id: p.id.clone(),
        source,
        destination,
        technology,
        coefficients: p.coefficients.unwrap_or(Coefficients::ZERO),
        selector: p
            .selector
            .as_ref()
            .map(selector_from_value)
            .transpose()?
            .unwrap_or_else(Selector::any),
        gateways,
        deployed_at,
        priority,
    })
}

/// Parses and validates a scenario document. Returns validation warnings
/// alongside the scenario.
pub fn load_scenario(text: &str) -> Result<(Scenario, Vec<String>)> {
    let sc = Document::from_json(text)?.build()?;
    let warnings = sc.validate()?;
    Ok((sc, warnings))
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    load_scenario(text).map(|(s, _)| s)
}

pub fn serialize_scenario(sc: &Scenario) -> String {
    Document::from_scenario(sc).to_json()
}
