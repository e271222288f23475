use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AnomalyKind {
    InternalLoop,
    OutOfPlace,
    NonEnforceability,
    Inadequacy,
    Shadowing,
    Redundancy,
    Exception,
    Correlation,
    Inclusion,
    Affinity,
    Contradiction,
    Superfluous,
    SkewedChannel,
    FilteredChannel,
    L2,
    AsymmetricChannel,
    CyclicPath,
    Monitorability,
    AlternativePath,
}

/// Consequence-oriented grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EffectCategory {
    Insecure,
    Unfeasible,
    PotentialError,
    SuboptimalImplementation,
    SuboptimalWalk,
}

/// Grouping by the scope of information needed to detect the anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InfoCategory {
    PiLevelIrrelevant,
    PiLevelUnsuitable,
    NodeIntraTech,
    NodeInterTech,
    NetworkChannel,
    NetworkPath,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 19] = [
        AnomalyKind::InternalLoop,
        AnomalyKind::OutOfPlace,
        AnomalyKind::NonEnforceability,
        AnomalyKind::Inadequacy,
        AnomalyKind::Shadowing,
        AnomalyKind::Redundancy,
        AnomalyKind::Exception,
        AnomalyKind::Correlation,
        AnomalyKind::Inclusion,
        AnomalyKind::Affinity,
        AnomalyKind::Contradiction,
        AnomalyKind::Superfluous,
        AnomalyKind::SkewedChannel,
        AnomalyKind::FilteredChannel,
        AnomalyKind::L2,
        AnomalyKind::AsymmetricChannel,
        AnomalyKind::CyclicPath,
        AnomalyKind::Monitorability,
        AnomalyKind::AlternativePath,
    ];

    pub fn effect(self) -> EffectCategory {
        use AnomalyKind::*;
        match self {
            Inadequacy | Monitorability | SkewedChannel | AsymmetricChannel => EffectCategory::Insecure,
            NonEnforceability | OutOfPlace | FilteredChannel | L2 => EffectCategory::Unfeasible,
            Shadowing | Exception | Correlation | Affinity | Contradiction => {
                EffectCategory::PotentialError
            }
            Redundancy | Inclusion | Superfluous | InternalLoop => {
                EffectCategory::SuboptimalImplementation
            }
            AlternativePath | CyclicPath => EffectCategory::SuboptimalWalk,
        }
    }

    pub fn info(self) -> InfoCategory {
        use AnomalyKind::*;
        match self {
            InternalLoop | OutOfPlace => InfoCategory::PiLevelIrrelevant,
            NonEnforceability | Inadequacy => InfoCategory::PiLevelUnsuitable,
            Shadowing | Redundancy | Exception | Correlation => InfoCategory::NodeIntraTech,
            Inclusion | Affinity | Contradiction => InfoCategory::NodeInterTech,
            CyclicPath | Monitorability | AlternativePath => InfoCategory::NetworkPath,
            Superfluous | FilteredChannel | L2 | SkewedChannel | AsymmetricChannel => {
                InfoCategory::NetworkChannel
            }
        }
    }

    pub fn name(self) -> &'static str {
        use AnomalyKind::*;
        match self {
            InternalLoop => "INTERNAL_LOOP",
            OutOfPlace => "OUT_OF_PLACE",
            NonEnforceability => "NON_ENFORCEABILITY",
            Inadequacy => "INADEQUACY",
            Shadowing => "SHADOWING",
            Redundancy => "REDUNDANCY",
            Exception => "EXCEPTION",
            Correlation => "CORRELATION",
            Inclusion => "INCLUSION",
            Affinity => "AFFINITY",
            Contradiction => "CONTRADICTION",
            Superfluous => "SUPERFLUOUS",
            SkewedChannel => "SKEWED_CHANNEL",
            FilteredChannel => "FILTERED_CHANNEL",
            L2 => "L2",
            AsymmetricChannel => "ASYMMETRIC_CHANNEL",
            CyclicPath => "CYCLIC_PATH",
            Monitorability => "MONITORABILITY",
            AlternativePath => "ALTERNATIVE_PATH",
        }
    }
}

impl EffectCategory {
    pub const ALL: [EffectCategory; 5] = [
        EffectCategory::Insecure,
        EffectCategory::Unfeasible,
        EffectCategory::PotentialError,
        EffectCategory::SuboptimalImplementation,
        EffectCategory::SuboptimalWalk,
    ];

    pub fn title(self) -> &'static str {
        match self {
            EffectCategory::Insecure => "insecure communications",
            EffectCategory::Unfeasible => "unfeasible communications",
            EffectCategory::PotentialError => "potential errors",
            EffectCategory::SuboptimalImplementation => "suboptimal implementations",
            EffectCategory::SuboptimalWalk => "suboptimal walks",
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', ' '], "_");
        AnomalyKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::BadValue {
                what: "anomaly kind",
                value: s.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_sizes_match_taxonomies() {
        let count_e = |c| AnomalyKind::ALL.iter().filter(|k| k.effect() == c).count();
        assert_eq!(count_e(EffectCategory::Insecure), 4);
        assert_eq!(count_e(EffectCategory::Unfeasible), 4);
        assert_eq!(count_e(EffectCategory::PotentialError), 5);
        assert_eq!(count_e(EffectCategory::SuboptimalImplementation), 4);
        assert_eq!(count_e(EffectCategory::SuboptimalWalk), 2);
        let count_i = |c| AnomalyKind::ALL.iter().filter(|k| k.info() == c).count();
        assert_eq!(count_i(InfoCategory::PiLevelIrrelevant), 2);
        assert_eq!(count_i(InfoCategory::PiLevelUnsuitable), 2);
        assert_eq!(count_i(InfoCategory::NodeIntraTech), 4);
        assert_eq!(count_i(InfoCategory::NodeInterTech), 3);
        assert_eq!(count_i(InfoCategory::NetworkPath), 3);
        assert_eq!(count_i(InfoCategory::NetworkChannel), 5);
    }

    #[test]
    fn names_round_trip() {
        for k in AnomalyKind::ALL {
            assert_eq!(k.name().parse::<AnomalyKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!("skewed channel".parse::<AnomalyKind>().unwrap(), AnomalyKind::SkewedChannel);
    }
}
