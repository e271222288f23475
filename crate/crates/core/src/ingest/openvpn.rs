//! OpenVPN client/server configurations to a TLS tunnel PI.

use crate::error::{Error, Result};
use crate::ingest::config::{directives, local_address, Endpoint, MapContext, MappedPi, PortSpec};
use crate::network::entity::parse_ipv4;
use crate::policy::selector::Selector;

const DEFAULT_PORT: u16 = 1194;

fn value<'a>(d: &'a [(usize, String, String)], key: &str) -> Option<&'a str> {
    d.iter()
        .rev()
        .find(|(_, k, _)| k == key)
        .map(|(_, _, v)| v.as_str())
}

/// `remote` accepts `host [port]`, `host:port` and a leading name before
/// either form.
fn remote(d: &[(usize, String, String)]) -> Result<(u32, Option<u16>)> {
    let v = value(d, "remote").ok_or_else(|| Error::Mapping("openvpn: missing remote directive".into()))?;
    let tokens: Vec<&str> = v.split_whitespace().collect();
    for (i, t) in tokens.iter().enumerate() {
        let (host, port) = match t.split_once(':') {
            Some((h, p)) => (h, Some(p)),
            None => (*t, None),
        };
        let Ok(ip) = parse_ipv4(host) else {
            continue;
        };
        let port = match port.or_else(|| tokens.get(i + 1).copied()) {
            Some(p) => Some(
                p.parse::<u16>()
                    .map_err(|_| Error::Mapping(format!("openvpn: bad remote port `{p}`")))?,
            ),
            None => None,
        };
        return Ok((ip, port));
    }
    Err(Error::Mapping(format!("openvpn: remote `{v}` has no IPv4 address")))
}

/// Maps a client configuration, checked against the server side when one
/// is given.
pub fn map_openvpn(client: &str, server: Option<&str>, ctx: &MapContext) -> Result<Vec<MappedPi>> {
    let c = directives(client, ' ');
    let (ip, port) = remote(&c)?;
    let port = port
        .or_else(|| value(&c, "port").and_then(|p| p.parse().ok()))
        .unwrap_or(DEFAULT_PORT);
    let cipher = value(&c, "cipher").ok_or_else(|| Error::Mapping("openvpn: missing cipher".into()))?;
    let auth = value(&c, "auth").ok_or_else(|| Error::Mapping("openvpn: missing auth".into()))?;
    if let Some(server) = server {
        let s = directives(server, ' ');
        if let Some(local) = value(&s, "local") {
            if parse_ipv4(local).ok() != Some(ip) {
                return Err(Error::Mapping(format!("openvpn: server listens on {local}, client connects elsewhere")));
            }
        }
        if let Some(p) = value(&s, "port") {
            if p.parse::<u16>().ok() != Some(port) {
                return Err(Error::Mapping(format!("openvpn: server port {p} differs from {port}")));
            }
        }
        for key in ["cipher", "auth"] {
            let (a, b) = (value(&c, key), value(&s, key));
            if b.is_some() && a.map(str::to_ascii_lowercase) != b.map(str::to_ascii_lowercase) {
                return Err(Error::Mapping(format!("openvpn: client and server {key} differ")));
            }
        }
    }
    let coefficients = ctx.ciphers.lookup(cipher, auth)?;
    Ok(vec![MappedPi {
        name: "openvpn".into(),
        source: Endpoint {
            ip: local_address(ctx, "openvpn")?,
            port: PortSpec::Any,
        },
        destination: Endpoint {
            ip,
            port: PortSpec::Port(port),
        },
        technology: "TLS".into(),
        coefficients,
        selector: Selector::any(),
    }])
}
