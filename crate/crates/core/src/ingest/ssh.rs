//! OpenSSH client `Host` blocks to SSH PIs.

use crate::error::{Error, Result};
use crate::ingest::config::{directives, local_address, Endpoint, MapContext, MappedPi, PortSpec};
use crate::network::entity::parse_ipv4;
use crate::policy::fieldset::{FieldKind, FieldSet};
use crate::policy::selector::Selector;

const DEFAULT_PORT: u16 = 22;

/// `[bind:]port` or `host:port`.
fn split_host_port(s: &str) -> Result<(Option<&str>, u16)> {
    let (host, port) = match s.rsplit_once(':') {
        Some((h, p)) => (Some(h), p),
        None => (None, s),
    };
    let port = port
        .parse()
        .map_err(|_| Error::Mapping(format!("ssh: bad port in `{s}`")))?;
    Ok((host, port))
}

/// The forward `LocalForward [bind:]port host:hostport` restricts the
/// channel to TCP from the bind address to the server on the forwarded
/// port.
fn forward_selector(spec: &str, server: u32) -> Result<Selector> {
    let parts: Vec<&str> = spec.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(Error::Mapping(format!("ssh: bad LocalForward `{spec}`")));
    }
    let (bind, _) = split_host_port(parts[0])?;
    let (_, target_port) = split_host_port(parts[1])?;
    let mut s = Selector::any();
    if let Some(b) = bind.filter(|b| !b.is_empty() && *b != "*") {
        s.ip_src = FieldSet::single(FieldKind::Ip, parse_ipv4(b)? as u64);
    }
    s.ip_dst = FieldSet::single(FieldKind::Ip, server as u64);
    s.p_dst = FieldSet::single(FieldKind::Port, target_port as u64);
    s.prt = FieldSet::single(FieldKind::Proto, 6);
    Ok(s)
}

/// One PI per `Host` block.
pub fn map_ssh(text: &str, ctx: &MapContext) -> Result<Vec<MappedPi>> {
    let mut blocks: Vec<(String, Vec<(String, String)>)> = Vec::new();
    for (line, k, v) in directives(text, ' ') {
        if k.eq_ignore_ascii_case("host") {
            blocks.push((v, Vec::new()));
            continue;
        }
        match blocks.last_mut() {
            Some((_, keys)) => keys.push((k.to_ascii_lowercase(), v)),
            None => return Err(Error::Mapping(format!("ssh: line {line}: `{k}` outside a Host block"))),
        }
    }
    let mut out = Vec::new();
    for (name, keys) in &blocks {
        let get = |key: &str| keys.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let host = get("hostname").ok_or_else(|| Error::Mapping(format!("ssh: Host {name}: missing HostName")))?;
        let server = parse_ipv4(host)?;
        let port = match get("port") {
            Some(p) => p
                .parse()
                .map_err(|_| Error::Mapping(format!("ssh: Host {name}: bad Port `{p}`")))?,
            None => DEFAULT_PORT,
        };
        let first = |v: Option<&str>, what: &str| -> Result<String> {
            v.and_then(|v| v.split(',').next())
                .map(str::to_string)
                .ok_or_else(|| Error::Mapping(format!("ssh: Host {name}: missing {what}")))
        };
        let cipher = first(get("ciphers"), "Ciphers")?;
        let mac = first(get("macs"), "MACs")?;
        let selector = match get("localforward") {
            Some(spec) => forward_selector(spec, server)?,
            None => Selector::any(),
        };
        out.push(MappedPi {
            name: name.clone(),
            source: Endpoint {
                ip: local_address(ctx, "ssh")?,
                port: PortSpec::Any,
            },
            destination: Endpoint {
                ip: server,
                port: PortSpec::Port(port),
            },
            technology: "SSH".into(),
            coefficients: ctx.ciphers.lookup(&cipher, &mac)?,
            selector,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> MapContext {
        MapContext {
            local_address: Some(parse_ipv4("10.9.9.9").unwrap()),
            ..Default::default()
        }
    }

    #[test]
    fn block_without_forward_has_wildcard_selector() {
        let text = "Host a\nHostName 10.0.0.1\nCiphers aes256-ctr\nMACs hmac-sha2-512\n";
        let m = map_ssh(text, &ctx()).unwrap();
        assert!(m[0].selector.is_any());
        assert_eq!(m[0].destination.port, PortSpec::Port(22));
    }

    #[test]
    fn missing_hostname_is_an_error() {
        let text = "Host a\nPort 2222\nCiphers aes256-ctr\nMACs hmac-sha2-512\n";
        assert!(map_ssh(text, &ctx()).is_err());
    }

    #[test]
    fn mapping_is_pure() {
        let text = "Host a\nHostName 10.0.0.1\nCiphers aes256-ctr\nMACs hmac-sha2-512\nLocalForward 5000 db:3306\n";
        assert_eq!(map_ssh(text, &ctx()).unwrap(), map_ssh(text, &ctx()).unwrap());
    }
}
