use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::Relation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TechId(pub u16);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Technology {
    pub name: String,
    /// OSI layer; `None` only for NULL.
    pub layer: Option<u8>,
}

pub const NULL: &str = "NULL";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TechRegistry {
    techs: Vec<Technology>,
}

impl Default for TechRegistry {
    fn default() -> Self {
        let mut r = TechRegistry { techs: Vec::new() };
        r.techs.push(Technology {
            name: NULL.into(),
            layer: None,
        });
        for (name, layer) in [
            ("WPA2", 2),
            ("MACsec", 2),
            ("IPsec", 3),
            ("TLS", 5),
            ("SSH", 5),
            ("WS-Security", 7),
        ] {
            r.techs.push(Technology {
                name: name.into(),
                layer: Some(layer),
            });
        }
        r
    }
}

impl TechRegistry {
    pub fn null(&self) -> TechId {
        TechId(0)
    }

    pub fn register(&mut self, name: &str, layer: u8) -> Result<TechId> {
        if !matches!(layer, 2 | 3 | 5 | 7) {
            return Err(Error::BadValue {
                what: "technology layer",
                value: layer.to_string(),
            });
        }
        if let Some(id) = self.lookup(name) {
            if self.get(id).layer == Some(layer) {
                return Ok(id);
            }
            return Err(Error::Invalid(format!(
                "technology `{name}` registered twice with different layers"
            )));
        }
        self.techs.push(Technology {
            name: name.into(),
            layer: Some(layer),
        });
        Ok(TechId((self.techs.len() - 1) as u16))
    }

    pub fn lookup(&self, name: &str) -> Option<TechId> {
        self.techs
            .iter()
            .position(|t| t.name.eq_ignore_ascii_case(name))
            .map(|i| TechId(i as u16))
    }

    pub fn resolve(&self, name: &str) -> Result<TechId> {
        self.lookup(name)
            .ok_or_else(|| Error::UnknownTechnology(name.to_string()))
    }

    pub fn get(&self, id: TechId) -> &Technology {
        &self.techs[id.0 as usize]
    }

    pub fn name(&self, id: TechId) -> &str {
        &self.techs[id.0 as usize].name
    }

    pub fn layer(&self, id: TechId) -> Option<u8> {
        self.techs[id.0 as usize].layer
    }

    pub fn is_null(&self, id: TechId) -> bool {
        self.layer(id).is_none()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TechId, &Technology)> {
        self.techs
            .iter()
            .enumerate()
            .map(|(i, t)| (TechId(i as u16), t))
    }

    /// Custom technologies beyond the built-in set.
    pub fn custom(&self) -> &[Technology] {
        &self.techs[7.min(self.techs.len())..]
    }

    pub fn relation(&self, t1: TechId, t2: TechId) -> Relation {
        if t1 == t2 {
            return Relation::Equivalent;
        }
        match (self.layer(t1), self.layer(t2)) {
            (None, None) => Relation::Equivalent,
            (None, Some(_)) | (Some(_), None) => Relation::Disjoint,
            (Some(a), Some(b)) if a < b => Relation::Dominates,
            (Some(a), Some(b)) if a > b => Relation::DominatedBy,
            _ => Relation::Kin,
        }
    }
}
