//! Synthetic scenarios: conflict-free PIs from three deployment schemes,
//! then injected anomalies recorded in a manifest, then padding up to the
//! requested entity count.
//!
//! Hosts are a root plus an `app` entity at layer 7; gateways and the
//! `wan` transit node are bare roots. End-to-end clients and servers hang
//! off `wan` and are reused pairwise once the entity budget runs low, so
//! large PI counts fit in small networks.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anomaly::kind::AnomalyKind;
use crate::anomaly::Anomaly;
use crate::error::{Error, Result};
use crate::network::capability::{CapabilityProfile, FirewallAction, FirewallRule};
use crate::network::entity::{EntityId, NodeId, NodeKind};
use crate::policy::coefficients::Coefficients;
use crate::policy::fieldset::{FieldKind, FieldSet};
use crate::policy::pi::Pi;
use crate::policy::selector::Selector;
use crate::policy::technology::TechId;
use crate::scenario::{Manifest, ManifestEntry, MinRule, PiPredicate, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationParams {
    /// Conflict-free PIs.
    pub n_pi: usize,
    /// PIs added to inject anomalies.
    pub n_conflict: usize,
    pub n_entities: usize,
    pub seed: u64,
    /// Weights for end-to-end, site-to-site and remote-access.
    pub scheme_mix: [f64; 3],
}

impl GenerationParams {
    pub fn new(n_pi: usize, n_conflict: usize, n_entities: usize, seed: u64) -> Self {
        GenerationParams {
            n_pi,
            n_conflict,
            n_entities,
            seed,
            scheme_mix: [1.0 / 3.0; 3],
        }
    }

    fn check(&self) -> Result<()> {
        let sum: f64 = self.scheme_mix.iter().sum();
        if self.scheme_mix.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Generation(format!(
                "scheme weights must be non-negative and sum to 1, got {:?}",
                self.scheme_mix
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scheme {
    EndToEnd,
    SiteToSite,
    RemoteAccess,
}

/// A site-to-site instance whose client PI can host a superfluous tunnel.
#[derive(Debug, Clone)]
struct Site {
    client_pi: usize,
    gateways: (NodeId, NodeId),
}

struct Gen {
    sc: Scenario,
    rng: ChaCha8Rng,
    budget: usize,
    wan: Option<NodeId>,
    clients: Vec<NodeId>,
    servers: Vec<NodeId>,
    used_pairs: HashSet<(NodeId, NodeId)>,
    /// Phase-1 end-to-end PIs not yet borrowed by an injection.
    reusable: Vec<usize>,
    sites: Vec<Site>,
    next_ip: u32,
    names: usize,
    pi_names: usize,
    manifest: Vec<ManifestEntry>,
}

const APP: &str = "app";
const SERVICE_PORTS: [u64; 5] = [22, 443, 3306, 5432, 8443];

fn tech(sc: &Scenario, name: &str) -> TechId {
    sc.techs.resolve(name).expect("built-in technology")
}

fn ip_set(ip: u32) -> FieldSet {
    FieldSet::single(FieldKind::Ip, ip as u64)
}

impl Gen {
    fn new(p: &GenerationParams) -> Self {
        let mut sc = Scenario::new();
        sc.topology.auto_routes = true;
        Gen {
            sc,
            rng: ChaCha8Rng::seed_from_u64(p.seed),
            budget: p.n_entities,
            wan: None,
            clients: Vec::new(),
            servers: Vec::new(),
            used_pairs: HashSet::new(),
            reusable: Vec::new(),
            sites: Vec::new(),
            next_ip: (10 << 24) + 1,
            names: 0,
            pi_names: 0,
            manifest: Vec::new(),
        }
    }

    fn entities(&self) -> usize {
        self.sc.forest.entity_count()
    }

    fn room(&self) -> usize {
        self.budget.saturating_sub(self.entities())
    }

    fn wan_cost(&self) -> usize {
        usize::from(self.wan.is_none())
    }

    fn node(&mut self, prefix: &str, kind: NodeKind) -> NodeId {
        let name = format!("{prefix}{}", self.names);
        self.names += 1;
        let ip = self.next_ip;
        self.next_ip += 1;
        self.sc.add_node(&name, kind, Some(ip)).expect("fresh node name")
    }

    fn wan(&mut self) -> NodeId {
        if let Some(w) = self.wan {
            return w;
        }
        let w = self.sc.add_node("wan", NodeKind::Network, None).expect("fresh node name");
        self.wan = Some(w);
        w
    }

    fn host(&mut self, prefix: &str, attach: Option<NodeId>) -> NodeId {
        let n = self.node(prefix, NodeKind::Host);
        self.sc
            .forest
            .add_entity(n, APP, 7, None, None, None)
            .expect("fresh entity");
        let to = attach.unwrap_or_else(|| self.wan());
        self.sc.topology.add_edge(n, to);
        n
    }

    fn gateway(&mut self, attach: NodeId) -> NodeId {
        let g = self.node("g", NodeKind::Gateway);
        self.sc.topology.add_edge(g, attach);
        g
    }

    fn app(&self, n: NodeId) -> EntityId {
        let name = format!("{}.{APP}", self.sc.forest.node_name(n));
        self.sc.forest.resolve(&name).expect("host has an app entity")
    }

    fn root(&self, n: NodeId) -> EntityId {
        self.sc.forest.root(n)
    }

    fn addr(&self, n: NodeId) -> u32 {
        self.sc.forest.node(n).address.expect("generated nodes have addresses")
    }

    fn coefficients(&mut self, lo: u64, hi: u64) -> Coefficients {
        Coefficients::new(
            self.rng.gen_range(lo..=hi),
            self.rng.gen_range(lo..=hi),
            self.rng.gen_range(lo..=hi),
        )
    }

    fn end_to_end_tech(&mut self) -> TechId {
        let name = *["IPsec", "TLS", "SSH", "WS-Security"]
            .choose(&mut self.rng)
            .expect("non-empty");
        tech(&self.sc, name)
    }

    fn pair_selector(&mut self, c: NodeId, s: NodeId) -> Selector {
        let mut sel = Selector::any();
        sel.ip_src = ip_set(self.addr(c));
        sel.ip_dst = ip_set(self.addr(s));
        sel.p_dst = FieldSet::single(
            FieldKind::Port,
            *SERVICE_PORTS.choose(&mut self.rng).expect("non-empty"),
        );
        sel.prt = FieldSet::single(FieldKind::Proto, 6);
        sel
    }

    #[allow(clippy::too_many_arguments)]
    fn add_pi(
        &mut self,
        phase: &str,
        source: EntityId,
        destination: EntityId,
        t: TechId,
        coefficients: Coefficients,
        selector: Selector,
        deployed_at: Option<NodeId>,
    ) -> usize {
        let id = format!("{phase}{}", self.pi_names);
        self.pi_names += 1;
        let deployed_at = deployed_at.unwrap_or_else(|| self.sc.forest.node_of(source));
        let gateways = self
            .sc
            .gateways_for(source, destination)
            .unwrap_or_default();
        let priority = self.sc.next_priority(deployed_at, t);
        let coefficients = if self.sc.techs.is_null(t) {
            Coefficients::ZERO
        } else {
            coefficients
        };
        self.sc.pis.push(Pi {
            id,
            source,
            destination,
            technology: t,
            coefficients,
            selector,
            gateways,
            deployed_at,
            priority,
        });
        self.sc.pis.len() - 1
    }

    fn has_unused_pair(&self) -> bool {
        self.clients.len() * self.servers.len() > self.used_pairs.len()
    }

    /// Entity cost of `fresh_pair`, without side effects.
    fn pair_cost(&self) -> usize {
        if self.has_unused_pair() {
            0
        } else if !self.clients.is_empty() && !self.servers.is_empty() {
            2
        } else {
            2 * usize::from(self.clients.is_empty()) + 2 * usize::from(self.servers.is_empty()) + self.wan_cost()
        }
    }

    fn client_cost(&self) -> usize {
        if self.clients.is_empty() {
            2 + self.wan_cost()
        } else {
            0
        }
    }

    /// An end-to-end client/server pair without any PI yet; grows the pools
    /// only when every pair is taken.
    fn fresh_pair(&mut self) -> (NodeId, NodeId) {
        if !self.has_unused_pair() {
            if self.clients.is_empty() || self.clients.len() <= self.servers.len() {
                let c = self.host("c", None);
                self.clients.push(c);
            }
            if self.servers.is_empty() || !self.has_unused_pair() {
                let s = self.host("s", None);
                self.servers.push(s);
            }
        }
        loop {
            for _ in 0..16 {
                let c = *self.clients.choose(&mut self.rng).expect("non-empty");
                let s = *self.servers.choose(&mut self.rng).expect("non-empty");
                if self.used_pairs.insert((c, s)) {
                    return (c, s);
                }
            }
            let mut free = Vec::new();
            for &c in &self.clients {
                for &s in &self.servers {
                    if !self.used_pairs.contains(&(c, s)) {
                        free.push((c, s));
                    }
                }
            }
            if let Some(&p) = free.choose(&mut self.rng) {
                self.used_pairs.insert(p);
                return p;
            }
        }
    }

    fn any_client(&mut self) -> NodeId {
        if self.clients.is_empty() {
            let c = self.host("c", None);
            self.clients.push(c);
        }
        *self.clients.choose(&mut self.rng).expect("non-empty")
    }

    // Phase 1.

    fn end_to_end(&mut self, grow: bool) -> usize {
        let (c, s) = if grow {
            let c = self.host("c", None);
            let s = self.host("s", None);
            self.clients.push(c);
            self.servers.push(s);
            self.used_pairs.insert((c, s));
            (c, s)
        } else {
            self.fresh_pair()
        };
        let t = self.end_to_end_tech();
        let coeff = self.coefficients(1, 5);
        let sel = self.pair_selector(c, s);
        let (a, b) = (self.app(c), self.app(s));
        let i = self.add_pi("pi", a, b, t, coeff, sel, None);
        self.reusable.push(i);
        1
    }

    /// Site-to-site (`remote == false`) or remote access with `n_g`
    /// gateways between a new client and a new server. The client PI is
    /// either NULL or strictly weaker than every tunnel.
    fn site(&mut self, n_g: usize, remote: bool) -> usize {
        let wan = self.wan();
        let g: Vec<NodeId> = {
            let first = self.gateway(wan);
            let mut v = vec![first];
            for _ in 1..n_g {
                let prev = *v.last().expect("non-empty");
                let next = self.gateway(prev);
                v.push(next);
            }
            v
        };
        let c = self.host("c", Some(g[0]));
        let s = self.host("s", Some(g[n_g - 1]));
        let sel = self.pair_selector(c, s);
        let null = self.rng.gen_bool(0.5);
        let (t, coeff) = if null {
            (self.sc.techs.null(), Coefficients::ZERO)
        } else {
            let t = self.end_to_end_tech();
            (t, self.coefficients(1, 2))
        };
        let (a, b) = (self.app(c), self.app(s));
        let client_pi = self.add_pi("pi", a, b, t, coeff, sel.clone(), None);
        let ipsec = tech(&self.sc, "IPsec");
        let mut hops: Vec<(EntityId, EntityId)> = g
            .windows(2)
            .map(|w| (self.root(w[0]), self.root(w[1])))
            .collect();
        if remote {
            hops.insert(0, (a, self.root(g[0])));
        }
        let n = hops.len();
        for (x, y) in hops {
            let coeff = self.coefficients(3, 5);
            self.add_pi("pi", x, y, ipsec, coeff, sel.clone(), None);
        }
        if !null && n_g >= 2 {
            self.sites.push(Site {
                client_pi,
                gateways: (g[0], g[1]),
            });
        }
        1 + n
    }

    fn phase_one(&mut self, p: &GenerationParams) -> Result<()> {
        let reserve = p.n_conflict;
        let mut left = p.n_pi;
        while left > 0 {
            let x: f64 = self.rng.gen();
            let mix = p.scheme_mix;
            let mut scheme = if x < mix[0] {
                Scheme::EndToEnd
            } else if x < mix[0] + mix[1] {
                Scheme::SiteToSite
            } else {
                Scheme::RemoteAccess
            };
            let n_g = match scheme {
                Scheme::SiteToSite => self.rng.gen_range(2..=4),
                Scheme::RemoteAccess => self.rng.gen_range(1..=3),
                Scheme::EndToEnd => 0,
            };
            let size = match scheme {
                Scheme::SiteToSite => n_g,
                Scheme::RemoteAccess => n_g + 1,
                Scheme::EndToEnd => 1,
            };
            let cost = 4 + n_g + self.wan_cost();
            if size > left || self.entities() + cost + reserve > self.budget {
                scheme = Scheme::EndToEnd;
            }
            let done = match scheme {
                Scheme::EndToEnd => {
                    let grow_cost = 4 + self.wan_cost();
                    let grow = self.entities() + grow_cost + reserve <= self.budget;
                    if !grow && self.pair_cost() > self.room() {
                        return Err(Error::Generation(format!(
                            "{} entities cannot host {} conflict-free PIs",
                            p.n_entities, p.n_pi
                        )));
                    }
                    self.end_to_end(grow)
                }
                Scheme::SiteToSite => self.site(n_g, false),
                Scheme::RemoteAccess => self.site(n_g, true),
            };
            left -= done;
        }
        Ok(())
    }

    // Phase 2.

    /// (new PIs, new entities) the injection of `k` needs right now.
    fn cost(&self, k: AnomalyKind) -> (usize, usize) {
        use AnomalyKind::*;
        let reuse = !self.reusable.is_empty();
        let w = self.wan_cost();
        match k {
            InternalLoop => (1, self.client_cost()),
            OutOfPlace | Inadequacy => (1, self.pair_cost()),
            NonEnforceability | L2 => (1, 2 + self.client_cost() + w),
            Shadowing | Redundancy | Exception | Correlation | Inclusion | Affinity
            | Contradiction | AsymmetricChannel => {
                if reuse {
                    (1, 0)
                } else {
                    (2, self.pair_cost())
                }
            }
            Superfluous => {
                if self.sites.is_empty() {
                    (2, 6 + w)
                } else {
                    (1, 0)
                }
            }
            SkewedChannel => (2, 3 + w),
            FilteredChannel => (1, 3 + self.client_cost() + w),
            CyclicPath => (2, 2 + w),
            Monitorability => (2, 1 + self.pair_cost() + w),
            AlternativePath => {
                if reuse {
                    (2, 1 + w)
                } else {
                    (3, 1 + self.pair_cost() + w)
                }
            }
        }
    }

    fn record(&mut self, kind: AnomalyKind, pis: &[usize], nodes: &[NodeId]) {
        self.manifest.push(ManifestEntry {
            kind,
            pis: pis.iter().map(|&i| self.sc.pis[i].id.clone()).collect(),
            nodes: nodes
                .iter()
                .map(|&n| self.sc.forest.node_name(n).to_string())
                .collect(),
        });
    }

    /// A phase-1 end-to-end PI to pair with, or a new one on a fresh pair.
    fn base(&mut self) -> (usize, usize) {
        if !self.reusable.is_empty() {
            let k = self.rng.gen_range(0..self.reusable.len());
            return (self.reusable.swap_remove(k), 0);
        }
        let (c, s) = self.fresh_pair();
        let t = self.end_to_end_tech();
        let coeff = self.coefficients(1, 5);
        let sel = self.pair_selector(c, s);
        let (a, b) = (self.app(c), self.app(s));
        (self.add_pi("cf", a, b, t, coeff, sel, None), 1)
    }

    /// Raises one component and lowers another: incomparable with `c`,
    /// which must have every component at least 1.
    fn incomparable(&mut self, c: Coefficients) -> Coefficients {
        let up = self.rng.gen_range(0..3);
        let down = (up + self.rng.gen_range(1..3)) % 3;
        let mut out = c;
        out.0[up] += 1;
        out.0[down] -= 1;
        out
    }

    fn clone_of(&mut self, base: usize) -> Pi {
        let mut q = self.sc.pis[base].clone();
        q.id = format!("cf{}", self.pi_names);
        self.pi_names += 1;
        q.priority = self.sc.next_priority(q.deployed_at, q.technology);
        q
    }

    fn push(&mut self, mut q: Pi) -> usize {
        q.priority = self.sc.next_priority(q.deployed_at, q.technology);
        self.sc.pis.push(q);
        self.sc.pis.len() - 1
    }

    fn inject(&mut self, kind: AnomalyKind) -> usize {
        use AnomalyKind::*;
        let ipsec = tech(&self.sc, "IPsec");
        match kind {
            InternalLoop => {
                let c = self.any_client();
                let a = self.app(c);
                let t = self.end_to_end_tech();
                let coeff = self.coefficients(1, 5);
                let sel = self.pair_selector(c, c);
                let q = self.add_pi("cf", a, a, t, coeff, sel, None);
                self.record(kind, &[q], &[]);
                1
            }
            OutOfPlace => {
                let (c, s) = self.fresh_pair();
                let t = self.end_to_end_tech();
                let coeff = self.coefficients(1, 5);
                let sel = self.pair_selector(c, s);
                let (a, b) = (self.app(c), self.app(s));
                let q = self.add_pi("cf", a, b, t, coeff, sel, Some(s));
                self.record(kind, &[q], &[]);
                1
            }
            Inadequacy => {
                let (c, s) = self.fresh_pair();
                let t = self.end_to_end_tech();
                let coeff = self.coefficients(0, 3);
                let sel = self.pair_selector(c, s);
                let (a, b) = (self.app(c), self.app(s));
                let q = self.add_pi("cf", a, b, t, coeff, sel, None);
                let one = Coefficients::new(1, 1, 1);
                self.sc.thresholds.min_coefficients.push(MinRule {
                    when: PiPredicate {
                        source_nodes: vec![c],
                        destination_nodes: vec![s],
                        ..Default::default()
                    },
                    min: Coefficients(std::array::from_fn(|k| coeff.0[k] + one.0[k])),
                });
                self.record(kind, &[q], &[]);
                1
            }
            NonEnforceability => {
                let c = self.any_client();
                let h = self.host("h", None);
                let t = self.end_to_end_tech();
                let other: BTreeSet<TechId> = ["IPsec", "TLS", "SSH", "WS-Security"]
                    .iter()
                    .map(|n| tech(&self.sc, n))
                    .filter(|x| *x != t)
                    .collect();
                self.sc.profiles.insert(
                    h,
                    CapabilityProfile {
                        technologies: Some(other),
                        ..Default::default()
                    },
                );
                let coeff = self.coefficients(1, 5);
                let sel = self.pair_selector(c, h);
                let (a, b) = (self.app(c), self.app(h));
                let q = self.add_pi("cf", a, b, t, coeff, sel, None);
                self.record(kind, &[q], &[]);
                1
            }
            L2 => {
                let c = self.any_client();
                let h = self.host("h", None);
                self.sc.profiles.insert(
                    h,
                    CapabilityProfile {
                        layer2: Some(BTreeSet::new()),
                        ..Default::default()
                    },
                );
                let wpa2 = tech(&self.sc, "WPA2");
                let coeff = self.coefficients(1, 5);
                let sel = self.pair_selector(c, h);
                let (a, b) = (self.app(c), self.app(h));
                let q = self.add_pi("cf", a, b, wpa2, coeff, sel, None);
                self.record(kind, &[q], &[]);
                1
            }
            FilteredChannel => {
                let c = self.any_client();
                let wan = self.wan();
                let g = self.gateway(wan);
                let h = self.host("h", Some(g));
                let t = self.end_to_end_tech();
                let coeff = self.coefficients(1, 5);
                let sel = self.pair_selector(c, h);
                self.sc.profiles.insert(
                    g,
                    CapabilityProfile {
                        firewall: vec![FirewallRule {
                            selector: sel.clone(),
                            action: FirewallAction::Deny,
                        }],
                        ..Default::default()
                    },
                );
                let (a, b) = (self.app(c), self.app(h));
                let q = self.add_pi("cf", a, b, t, coeff, sel, None);
                self.record(kind, &[q], &[]);
                1
            }
            Shadowing | Redundancy | Exception | Correlation | Inclusion | Affinity
            | Contradiction | AsymmetricChannel => self.inject_pair(kind),
            Superfluous => {
                if !self.sites.is_empty() {
                    let k = self.rng.gen_range(0..self.sites.len());
                    let site = self.sites.swap_remove(k);
                    let inner = &self.sc.pis[site.client_pi];
                    let (coeff, sel) = (inner.coefficients, inner.selector.clone());
                    let (x, y) = (self.root(site.gateways.0), self.root(site.gateways.1));
                    let q = self.add_pi("cf", x, y, ipsec, coeff, sel, None);
                    self.record(kind, &[q], &[]);
                    return 1;
                }
                let wan = self.wan();
                let g1 = self.gateway(wan);
                let g2 = self.gateway(g1);
                let c = self.host("c", Some(g1));
                let s = self.host("s", Some(g2));
                let sel = self.pair_selector(c, s);
                let (a, b) = (self.app(c), self.app(s));
                let strong = self.coefficients(3, 5);
                self.add_pi("cf", a, b, ipsec, strong, sel.clone(), None);
                let weak = self.coefficients(1, 2);
                let (x, y) = (self.root(g1), self.root(g2));
                let q = self.add_pi("cf", x, y, ipsec, weak, sel, None);
                self.record(kind, &[q], &[]);
                2
            }
            SkewedChannel => {
                let wan = self.wan();
                let a = self.gateway(wan);
                let b = self.gateway(a);
                let c = self.gateway(b);
                let mut sel = Selector::any();
                sel.ip_src = ip_set(self.addr(a));
                let c1 = self.coefficients(1, 5);
                let c2 = self.coefficients(1, 5);
                let (ra, rb, rc) = (self.root(a), self.root(b), self.root(c));
                let short = self.add_pi("cf", ra, rb, ipsec, c1, sel.clone(), None);
                let long = self.add_pi("cf", ra, rc, ipsec, c2, sel, None);
                self.record(kind, &[short, long], &[]);
                2
            }
            CyclicPath => {
                let wan = self.wan();
                let a = self.gateway(wan);
                let b = self.gateway(wan);
                let coeff = self.coefficients(1, 5);
                let (ra, rb) = (self.root(a), self.root(b));
                let p1 = self.add_pi("cf", ra, rb, ipsec, coeff, Selector::any(), None);
                let p2 = self.add_pi("cf", rb, ra, ipsec, coeff, Selector::any(), None);
                self.record(kind, &[p1, p2], &[a, b]);
                2
            }
            Monitorability => {
                let (c, s) = self.fresh_pair();
                let wan = self.wan();
                let g = self.gateway(wan);
                let sel = self.pair_selector(c, s);
                let c1 = self.coefficients(1, 5);
                let c2 = self.coefficients(1, 5);
                let (a, rg, b) = (self.app(c), self.root(g), self.app(s));
                let h1 = self.add_pi("cf", a, rg, ipsec, c1, sel.clone(), None);
                let h2 = self.add_pi("cf", rg, b, ipsec, c2, sel, None);
                self.record(kind, &[h1, h2], &[]);
                2
            }
            AlternativePath => {
                let (p, added) = self.base();
                let (a, b, sel) = {
                    let pi = &self.sc.pis[p];
                    (pi.source, pi.destination, pi.selector.clone())
                };
                let wan = self.wan();
                let g = self.gateway(wan);
                let rg = self.root(g);
                let c1 = self.coefficients(1, 5);
                let c2 = self.coefficients(1, 5);
                let h1 = self.add_pi("cf", a, rg, ipsec, c1, sel.clone(), None);
                let h2 = self.add_pi("cf", rg, b, ipsec, c2, sel, None);
                self.record(kind, &[p, h1, h2], &[]);
                2 + added
            }
        }
    }

    /// Kinds built from a base PI plus one variant on the same pair.
    fn inject_pair(&mut self, kind: AnomalyKind) -> usize {
        use AnomalyKind::*;
        let (p, added) = self.base();
        let base = self.sc.pis[p].clone();
        let mut q = self.clone_of(p);
        let mut subjects = vec![p];
        match kind {
            Shadowing => q.coefficients = self.incomparable(base.coefficients),
            Redundancy => {}
            Exception => {
                let (cs, cd) = (base.source_node(&self.sc.forest), base.destination_node(&self.sc.forest));
                q.source = self.root(cs);
                q.destination = self.root(cd);
                q.selector.prt = FieldSet::full(FieldKind::Proto);
                q.coefficients = self.incomparable(base.coefficients);
            }
            Correlation => {
                q.selector.p_dst = FieldSet::full(FieldKind::Port);
                q.selector.p_src = FieldSet::range(FieldKind::Port, 1024, 65535);
            }
            Inclusion => {
                let ipsec = tech(&self.sc, "IPsec");
                q.technology = if base.technology == ipsec {
                    tech(&self.sc, "TLS")
                } else {
                    ipsec
                };
            }
            Affinity => {
                let others: Vec<TechId> = ["IPsec", "TLS", "SSH", "WS-Security"]
                    .iter()
                    .map(|n| tech(&self.sc, n))
                    .filter(|t| *t != base.technology)
                    .collect();
                q.technology = *others.choose(&mut self.rng).expect("non-empty");
                q.coefficients = self.incomparable(base.coefficients);
            }
            Contradiction => {
                q.technology = self.sc.techs.null();
                q.coefficients = Coefficients::ZERO;
            }
            AsymmetricChannel => {
                q.source = base.destination;
                q.destination = base.source;
                q.selector = base.selector.reverse();
                q.deployed_at = base.destination_node(&self.sc.forest);
                q.gateways = base.gateways.iter().rev().copied().collect();
                q.coefficients = self.incomparable(base.coefficients);
                subjects.clear();
            }
            _ => unreachable!("not a pair kind"),
        }
        let qi = self.push(q);
        subjects.push(qi);
        self.record(kind, &subjects, &[]);
        1 + added
    }

    fn phase_two(&mut self, p: &GenerationParams) -> Result<()> {
        let mut left = p.n_conflict;
        while left > 0 {
            let fits: Vec<AnomalyKind> = AnomalyKind::ALL
                .iter()
                .copied()
                .filter(|k| {
                    let (n, e) = self.cost(*k);
                    n <= left && e <= self.room()
                })
                .collect();
            let Some(&k) = fits.choose(&mut self.rng) else {
                return Err(Error::Generation(format!(
                    "{} entities cannot host {} conflicting PIs",
                    p.n_entities, p.n_conflict
                )));
            };
            left -= self.inject(k);
        }
        Ok(())
    }

    // Phase 3.

    fn phase_three(&mut self) {
        let mut prev = self.wan;
        while self.room() > 0 {
            let n = self.node("x", NodeKind::Host);
            if self.room() > 0 {
                self.sc
                    .forest
                    .add_entity(n, APP, 7, None, None, None)
                    .expect("fresh entity");
            }
            if let Some(p) = prev {
                self.sc.topology.add_edge(n, p);
            }
            prev = Some(prev.unwrap_or(n));
        }
    }
}

/// Builds a scenario with exactly `n_pi + n_conflict` PIs and
/// `n_entities` entities; the manifest lists every injected instance.
pub fn generate_scenario(p: &GenerationParams) -> Result<Scenario> {
    p.check()?;
    let mut g = Gen::new(p);
    g.phase_one(p)?;
    g.phase_two(p)?;
    if g.entities() > p.n_entities {
        return Err(Error::Generation(format!(
            "{} entities are too few for the requested PIs",
            p.n_entities
        )));
    }
    g.phase_three();
    let mut sc = g.sc;
    sc.manifest = Some(Manifest {
        seed: p.seed,
        entries: g.manifest,
        exempt: vec![AnomalyKind::Monitorability],
    });
    Ok(sc)
}

/// Whether `a` reports the instance described by `e`: same kind, every
/// listed PI among its subjects, and for cycles the same node set.
pub fn matches_entry(e: &ManifestEntry, a: &Anomaly) -> bool {
    if a.kind != e.kind {
        return false;
    }
    if !e.nodes.is_empty() {
        let want: BTreeSet<&str> = e.nodes.iter().map(String::as_str).collect();
        let got: BTreeSet<&str> = a.nodes.iter().map(String::as_str).collect();
        return want == got;
    }
    let ids = a.pi_ids();
    e.pis.iter().all(|p| ids.contains(p.as_str()))
}

/// Manifest entries with no matching anomaly.
pub fn missed<'m>(m: &'m Manifest, found: &[Anomaly]) -> Vec<&'m ManifestEntry> {
    m.entries
        .iter()
        .filter(|e| !found.iter().any(|a| matches_entry(e, a)))
        .collect()
}

/// Anomalies of a kind that was neither injected nor exempt.
pub fn unexpected<'a>(m: &Manifest, found: &'a [Anomaly]) -> Vec<&'a Anomaly> {
    found
        .iter()
        .filter(|a| !m.exempt.contains(&a.kind) && !m.entries.iter().any(|e| e.kind == a.kind))
        .collect()
}
