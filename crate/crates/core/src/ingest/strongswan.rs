//! strongSwan `conn` blocks to IPsec PIs.

use crate::error::{Error, Result};
use crate::ingest::config::{directives, Endpoint, MapContext, MappedPi};
use crate::network::entity::parse_ipv4;
use crate::policy::coefficients::Coefficients;
use crate::policy::fieldset::{FieldKind, FieldSet};
use crate::policy::selector::Selector;

#[derive(Debug, Default, Clone)]
struct Conn {
    name: String,
    line: usize,
    keys: Vec<(String, String)>,
}

impl Conn {
    fn get(&self, key: &str) -> Option<&str> {
        self.keys
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .filter(|v| !v.is_empty())
    }
}

fn proposal(ctx: &MapContext, conn: &Conn) -> Result<Coefficients> {
    let text = conn
        .get("esp")
        .or_else(|| conn.get("ike"))
        .ok_or_else(|| Error::Mapping(format!("conn {}: no esp or ike proposal", conn.name)))?;
    let first = text.split(',').next().unwrap_or("").trim_end_matches('!');
    let mut parts = first.split('-');
    let enc = parts.next().unwrap_or("");
    let integ = parts.next().unwrap_or("");
    ctx.ciphers.lookup(enc, integ)
}

fn subnet(conn: &Conn, key: &str) -> Result<Option<FieldSet>> {
    let Some(v) = conn.get(key) else {
        return Ok(None);
    };
    let set = FieldSet::parse(FieldKind::Ip, v)
        .map_err(|e| Error::Mapping(format!("conn {}: {key}: {e}", conn.name)))?;
    if set.is_empty() {
        return Err(Error::Mapping(format!("conn {}: {key} matches no host", conn.name)));
    }
    Ok(Some(set))
}

fn peer(conn: &Conn, key: &str) -> Result<u32> {
    let v = conn
        .get(key)
        .ok_or_else(|| Error::Mapping(format!("conn {} (line {}): missing {key}", conn.name, conn.line)))?;
    parse_ipv4(v).map_err(|_| Error::Mapping(format!("conn {}: {key}={v} is not an address", conn.name)))
}

/// Maps every named `conn` block. Unnamed blocks and `%default` supply
/// defaults for the blocks after them; unknown keys are ignored.
pub fn map_strongswan(text: &str, ctx: &MapContext) -> Result<Vec<MappedPi>> {
    let mut defaults: Vec<(String, String)> = Vec::new();
    let mut conns: Vec<Conn> = Vec::new();
    let mut cur: Option<Conn> = None;
    let mut in_setup = false;
    let flush = |cur: &mut Option<Conn>, conns: &mut Vec<Conn>, defaults: &mut Vec<(String, String)>| {
        if let Some(c) = cur.take() {
            if c.name.is_empty() || c.name == "%default" {
                defaults.extend(c.keys);
            } else {
                conns.push(c);
            }
        }
    };
    for (line, k, v) in directives(text, '=') {
        if k == "conn" {
            flush(&mut cur, &mut conns, &mut defaults);
            in_setup = false;
            let named = !v.is_empty() && v != "%default";
            cur = Some(Conn {
                keys: if named { defaults.clone() } else { Vec::new() },
                name: v,
                line,
            });
            continue;
        }
        if k == "config" {
            flush(&mut cur, &mut conns, &mut defaults);
            in_setup = true;
            continue;
        }
        if in_setup {
            continue;
        }
        match cur.as_mut() {
            Some(c) => c.keys.push((k, v)),
            None => return Err(Error::Mapping(format!("line {line}: `{k}` outside a conn block"))),
        }
    }
    flush(&mut cur, &mut conns, &mut defaults);

    let mut out = Vec::new();
    for conn in &conns {
        let left = peer(conn, "left")?;
        let right = peer(conn, "right")?;
        let ls = subnet(conn, "leftsubnet")?;
        let rs = subnet(conn, "rightsubnet")?;
        if let (Some(a), Some(b)) = (&ls, &rs) {
            if a == b {
                return Err(Error::Mapping(format!(
                    "conn {}: left and right subnets are identical",
                    conn.name
                )));
            }
        }
        let mut selector = Selector::any();
        if let Some(a) = ls {
            selector.ip_src = a;
        }
        if let Some(b) = rs {
            selector.ip_dst = b;
        }
        out.push(MappedPi {
            name: conn.name.clone(),
            source: Endpoint::host(left),
            destination: Endpoint::host(right),
            technology: "IPsec".into(),
            coefficients: proposal(ctx, conn)?,
            selector,
        });
    }
    Ok(out)
}
