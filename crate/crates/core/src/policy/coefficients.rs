use std::fmt;

use num_rational::Ratio;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::Relation;

pub type Coefficient = Ratio<u64>;

/// Security coefficients `(c^hi, c^pi, c^c)`: header integrity, payload
/// integrity and confidentiality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Coefficients(pub [Coefficient; 3]);

impl Coefficients {
    pub const ZERO: Coefficients = Coefficients([Ratio::new_raw(0, 1); 3]);

    pub fn new(hi: u64, pi: u64, c: u64) -> Self {
        Coefficients([Ratio::from(hi), Ratio::from(pi), Ratio::from(c)])
    }

    pub fn header_integrity(&self) -> Coefficient {
        self.0[0]
    }

    pub fn payload_integrity(&self) -> Coefficient {
        self.0[1]
    }

    pub fn confidentiality(&self) -> Coefficient {
        self.0[2]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c.numer() == 0)
    }

    pub fn has_confidentiality(&self) -> bool {
        *self.0[2].numer() > 0
    }

    pub fn component_max(&self, other: &Coefficients) -> Coefficients {
        Coefficients(std::array::from_fn(|k| self.0[k].max(other.0[k])))
    }

    pub fn component_min(&self, other: &Coefficients) -> Coefficients {
        Coefficients(std::array::from_fn(|k| self.0[k].min(other.0[k])))
    }

    pub fn sum(&self) -> Coefficient {
        self.0.iter().fold(Ratio::from(0), |a, b| a + b)
    }

    /// Component-wise order; incomparable triples are `Disjoint`.
    pub fn relation(&self, other: &Coefficients) -> Relation {
        let ge = (0..3).all(|k| self.0[k] >= other.0[k]);
        let le = (0..3).all(|k| self.0[k] <= other.0[k]);
        match (ge, le) {
            (true, true) => Relation::Equivalent,
            (true, false) => Relation::Dominates,
            (false, true) => Relation::DominatedBy,
            (false, false) => Relation::Disjoint,
        }
    }
}

fn parse_component(text: &str) -> Result<Coefficient> {
    let bad = || Error::BadValue {
        what: "coefficient",
        value: text.to_string(),
    };
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.len() > 18 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        let f: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int.checked_mul(den).and_then(|v| v.checked_add(f)).ok_or_else(bad)?;
        return Ok(Ratio::new(num, den));
    }
    t.parse::<u64>().map(Ratio::from).map_err(|_| bad())
}

impl std::str::FromStr for Coefficients {
    type Err = Error;

    /// Accepts `(a, b, c)` or `a,b,c`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::BadValue {
                what: "coefficient triple",
                value: s.to_string(),
            });
        }
        Ok(Coefficients([
            parse_component(parts[0])?,
            parse_component(parts[1])?,
            parse_component(parts[2])?,
        ]))
    }
}

fn fmt_component(c: &Coefficient) -> String {
    if *c.denom() == 1 {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})",
            fmt_component(&self.0[0]),
            fmt_component(&self.0[1]),
            fmt_component(&self.0[2])
        )
    }
}

impl Serialize for Coefficients {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(3))?;
        for c in &self.0 {
            if *c.denom() == 1 {
                seq.serialize_element(c.numer())?;
            } else {
                seq.serialize_element(&fmt_component(c))?;
            }
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Coefficients {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Part {
            Num(serde_json::Number),
            Text(String),
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Form {
            List(Vec<Part>),
            Text(String),
        }
        let to_ratio = |p: Part| -> std::result::Result<Coefficient, D::Error> {
            let text = match p {
                Part::Num(n) => n.to_string(),
                Part::Text(t) => t,
            };
            parse_component(&text).map_err(de::Error::custom)
        };
        match Form::deserialize(d)? {
            Form::Text(t) => t.parse().map_err(de::Error::custom),
            Form::List(parts) => {
                if parts.len() != 3 {
                    return Err(de::Error::invalid_length(parts.len(), &"three coefficients"));
                }
                let mut it = parts.into_iter();
                Ok(Coefficients([
                    to_ratio(it.next().unwrap())?,
                    to_ratio(it.next().unwrap())?,
                    to_ratio(it.next().unwrap())?,
                ]))
            }
        }
    }
}
