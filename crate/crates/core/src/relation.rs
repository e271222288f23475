use std::fmt;

use serde::{Deserialize, Serialize};

/// Verdict of comparing two values of the same domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Relation {
    Equivalent,
    Dominates,
    DominatedBy,
    Kin,
    Disjoint,
}

impl Relation {
    pub fn flip(self) -> Relation {
        match self {
            Relation::Dominates => Relation::DominatedBy,
            Relation::DominatedBy => Relation::Dominates,
            other => other,
        }
    }

    /// `⪰`
    pub fn dominates_or_equal(self) -> bool {
        matches!(self, Relation::Equivalent | Relation::Dominates)
    }

    /// `⪯`
    pub fn dominated_or_equal(self) -> bool {
        matches!(self, Relation::Equivalent | Relation::DominatedBy)
    }

    pub fn is_disjoint(self) -> bool {
        self == Relation::Disjoint
    }

    pub fn overlaps(self) -> bool {
        self != Relation::Disjoint
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Relation::Equivalent => "=",
            Relation::Dominates => "≻",
            Relation::DominatedBy => "≺",
            Relation::Kin => "~",
            Relation::Disjoint => "⊥",
        };
        f.write_str(s)
    }
}
