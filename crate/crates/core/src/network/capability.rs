use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::policy::coefficients::Coefficients;
use crate::policy::selector::Selector;
use crate::policy::technology::{TechId, TechRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FirewallAction {
    Allow,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirewallRule {
    pub selector: Selector,
    pub action: FirewallAction,
}

/// What a node can do. `None` sets mean "no restriction declared".
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CapabilityProfile {
    pub technologies: Option<BTreeSet<TechId>>,
    pub layer2: Option<BTreeSet<TechId>>,
    pub max_coefficients: BTreeMap<TechId, Coefficients>,
    pub firewall: Vec<FirewallRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxCoefficients {
    /// Neither end declares a ceiling.
    Unbounded,
    Bounded(Coefficients),
    /// The technology is missing from at least one end.
    Unsupported,
}

impl CapabilityProfile {
    pub fn supports(&self, techs: &TechRegistry, t: TechId) -> bool {
        techs.is_null(t) || self.technologies.as_ref().is_none_or(|s| s.contains(&t))
    }

    pub fn supports_layer2(&self, t: TechId) -> bool {
        self.layer2.as_ref().is_none_or(|s| s.contains(&t))
    }

    /// First matching rule decides; unmatched traffic is allowed.
    pub fn allows_packet(&self, packet: &[u64]) -> bool {
        for r in &self.firewall {
            if r.selector.matches(packet) {
                return r.action == FirewallAction::Allow;
            }
        }
        true
    }

    /// True iff every packet matched by `traffic` hits a DENY before any
    /// ALLOW.
    pub fn drops_all(&self, traffic: &Selector) -> bool {
        if traffic.is_empty() {
            return false;
        }
        let mut remaining = vec![traffic.clone()];
        for r in &self.firewall {
            match r.action {
                FirewallAction::Allow => {
                    if remaining.iter().any(|b| b.intersects(&r.selector)) {
                        return false;
                    }
                }
                FirewallAction::Deny => {
                    remaining = remaining
                        .iter()
                        .flat_map(|b| b.subtract(&r.selector))
                        .collect();
                    if remaining.is_empty() {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Component-wise minimum of what the two ends can enforce for `t`.
pub fn max_coefficients(
    techs: &TechRegistry,
    src: Option<&CapabilityProfile>,
    dst: Option<&CapabilityProfile>,
    t: TechId,
) -> MaxCoefficients {
    let mut bound: Option<Coefficients> = None;
    for p in [src, dst].into_iter().flatten() {
        if !p.supports(techs, t) {
            return MaxCoefficients::Unsupported;
        }
        if let Some(c) = p.max_coefficients.get(&t) {
            bound = Some(match bound {
                Some(b) => b.component_min(c),
                None => *c,
            });
        }
    }
    match bound {
        Some(c) => MaxCoefficients::Bounded(c),
        None => MaxCoefficients::Unbounded,
    }
}
