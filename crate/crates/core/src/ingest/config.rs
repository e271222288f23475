//! Shared pieces of the configuration mappers: address-level PIs and the
//! cipher table.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::ingest::document::{selector_to_value, Document, EntityDoc, NodeDoc, PiDoc};
use crate::network::entity::{format_ipv4, NodeKind};
use crate::policy::coefficients::Coefficients;
use crate::policy::selector::Selector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PortSpec {
    /// The channel works below the transport layer.
    None,
    Any,
    Port(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub ip: u32,
    pub port: PortSpec,
}

impl Endpoint {
    pub fn host(ip: u32) -> Self {
        Endpoint { ip, port: PortSpec::None }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_ipv4(self.ip))?;
        match self.port {
            PortSpec::None => Ok(()),
            PortSpec::Any => f.write_str(":*"),
            PortSpec::Port(p) => write!(f, ":{p}"),
        }
    }
}

/// A PI whose end points are addresses rather than scenario entities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappedPi {
    pub name: String,
    pub source: Endpoint,
    pub destination: Endpoint,
    pub technology: String,
    pub coefficients: Coefficients,
    pub selector: Selector,
}

impl fmt::Display for MappedPi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {}, {}, ∅)",
            self.source, self.destination, self.technology, self.coefficients, self.selector
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherRule {
    /// Accepted encryption algorithm prefixes, normalized.
    pub encryption: Vec<String>,
    /// Accepted integrity algorithm prefixes, normalized.
    pub integrity: Vec<String>,
    pub coefficients: Coefficients,
}

/// Maps (encryption, integrity) algorithm names to coefficients. Names are
/// compared lowercase without punctuation, and an `hmac` prefix on the
/// integrity algorithm is ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherMap {
    pub rules: Vec<CipherRule>,
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl Default for CipherMap {
    fn default() -> Self {
        CipherMap {
            rules: vec![CipherRule {
                encryption: vec!["aes256".into()],
                integrity: vec!["sha512".into(), "sha2512".into()],
                coefficients: Coefficients::new(5, 5, 5),
            }],
        }
    }
}

impl CipherMap {
    pub fn empty() -> Self {
        CipherMap { rules: Vec::new() }
    }

    /// Adds a rule that takes precedence over the existing ones.
    pub fn add(&mut self, encryption: &str, integrity: &str, coefficients: Coefficients) {
        let integ = normalize(integrity);
        let integ = integ.strip_prefix("hmac").unwrap_or(&integ).to_string();
        self.rules.insert(
            0,
            CipherRule {
                encryption: vec![normalize(encryption)],
                integrity: vec![integ],
                coefficients,
            },
        );
    }

    pub fn lookup(&self, encryption: &str, integrity: &str) -> Result<Coefficients> {
        let enc = normalize(encryption);
        let integ = normalize(integrity);
        let integ = integ.strip_prefix("hmac").unwrap_or(&integ);
        self.rules
            .iter()
            .find(|r| {
                r.encryption.iter().any(|p| enc.starts_with(p.as_str()))
                    && r.integrity.iter().any(|p| integ.starts_with(p.as_str()))
            })
            .map(|r| r.coefficients)
            .ok_or_else(|| Error::UnmappedCipher(format!("{encryption}+{integrity}")))
    }
}

/// Extra inputs the configuration text does not carry.
#[derive(Debug, Clone, Default)]
pub struct MapContext {
    pub ciphers: CipherMap,
    /// Address of the client running the configuration, for OpenVPN and SSH.
    pub local_address: Option<u32>,
}

pub(crate) fn local_address(ctx: &MapContext, what: &str) -> Result<u32> {
    ctx.local_address
        .ok_or_else(|| Error::Mapping(format!("{what}: the client address must be supplied")))
}

/// Splits `key value` / `key=value` lines, dropping comments and blanks.
pub(crate) fn directives(text: &str, sep: char) -> Vec<(usize, String, String)> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = match line.split_once(sep) {
            Some((k, v)) => (k.trim(), v.trim()),
            None => match line.split_once(char::is_whitespace) {
                Some((k, v)) => (k.trim(), v.trim()),
                None => (line, ""),
            },
        };
        out.push((n + 1, k.to_string(), v.to_string()));
    }
    out
}

/// Builds a scenario document with one node per address and a direct link
/// per mapped PI.
pub fn to_document(mapped: &[MappedPi]) -> Document {
    let node_name = |ip: u32| format!("n{}", format_ipv4(ip).replace('.', "_"));
    let mut nodes: BTreeMap<u32, (bool, BTreeMap<PortSpec, ()>)> = BTreeMap::new();
    for m in mapped {
        let tunnel = !m.selector.is_any() && m.technology.eq_ignore_ascii_case("IPsec");
        for (e, is_gw) in [(m.source, false), (m.destination, tunnel)] {
            let slot = nodes.entry(e.ip).or_default();
            slot.0 |= is_gw;
            slot.1.insert(e.port, ());
        }
    }
    let entity_label = |p: PortSpec| match p {
        PortSpec::None => "l3".to_string(),
        PortSpec::Any => "l5".to_string(),
        PortSpec::Port(n) => format!("l5_{n}"),
    };
    let mut doc = Document {
        schema_version: Some(crate::ingest::document::SCHEMA_VERSION),
        ..Default::default()
    };
    for (ip, (gateway, ports)) in &nodes {
        let mut entities = vec![EntityDoc {
            label: "l3".into(),
            layer: 3,
            parent: None,
            ip: Some(format_ipv4(*ip)),
            port: None,
            alias: None,
        }];
        for p in ports.keys().filter(|p| **p != PortSpec::None) {
            entities.push(EntityDoc {
                label: entity_label(*p),
                layer: 5,
                parent: Some("l3".into()),
                ip: None,
                port: match p {
                    PortSpec::Port(n) => Some(*n),
                    _ => None,
                },
                alias: None,
            });
        }
        doc.nodes.push(NodeDoc {
            name: node_name(*ip),
            kind: if *gateway { NodeKind::Gateway } else { NodeKind::Host },
            address: Some(format_ipv4(*ip)),
            entities,
        });
    }
    for m in mapped {
        let (a, b) = (node_name(m.source.ip), node_name(m.destination.ip));
        if a != b
            && !doc
                .topology
                .edges
                .iter()
                .any(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        {
            doc.topology.edges.push([a.clone(), b.clone()]);
        }
        doc.pis.push(PiDoc {
            id: m.name.clone(),
            source: format!("{a}.{}", entity_label(m.source.port)),
            destination: format!("{b}.{}", entity_label(m.destination.port)),
            technology: Some(m.technology.clone()),
            coefficients: Some(m.coefficients),
            selector: Some(selector_to_value(&m.selector)),
            gateways: Some(Vec::new()),
            deployed_at: None,
            priority: None,
        });
    }
    let mut seen = std::collections::HashMap::new();
    for p in &mut doc.pis {
        let k = seen.entry(p.id.clone()).or_insert(0);
        *k += 1;
        if *k > 1 {
            p.id = format!("{}~{}", p.id, k);
        }
    }
    doc
}
