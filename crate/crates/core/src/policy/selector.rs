use std::fmt;

use crate::error::{Error, Result};
use crate::policy::fieldset::{FieldKind, FieldSet};
use crate::relation::Relation;

pub const FIVE_TUPLE: [&str; 5] = ["ip_src", "p_src", "ip_dst", "p_dst", "prt"];

/// Traffic selector: the Cartesian product of its field sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Selector {
    pub ip_src: FieldSet,
    pub p_src: FieldSet,
    pub ip_dst: FieldSet,
    pub p_dst: FieldSet,
    pub prt: FieldSet,
    pub extras: Vec<(String, FieldSet)>,
}

impl Default for Selector {
    fn default() -> Self {
        Selector::any()
    }
}

impl Selector {
    pub fn any() -> Self {
        Selector {
            ip_src: FieldSet::full(FieldKind::Ip),
            p_src: FieldSet::full(FieldKind::Port),
            ip_dst: FieldSet::full(FieldKind::Ip),
            p_dst: FieldSet::full(FieldKind::Port),
            prt: FieldSet::full(FieldKind::Proto),
            extras: Vec::new(),
        }
    }

    /// A wildcard selector over reduced domains, mostly useful for
    /// exhaustive testing.
    pub fn any_in(ip_max: u64, port_max: u64, proto_max: u64) -> Self {
        Selector {
            ip_src: FieldSet::full_in(FieldKind::Ip, ip_max),
            p_src: FieldSet::full_in(FieldKind::Port, port_max),
            ip_dst: FieldSet::full_in(FieldKind::Ip, ip_max),
            p_dst: FieldSet::full_in(FieldKind::Port, port_max),
            prt: FieldSet::full_in(FieldKind::Proto, proto_max),
            extras: Vec::new(),
        }
    }

    pub fn new(ip_src: &str, p_src: &str, ip_dst: &str, p_dst: &str, prt: &str) -> Result<Self> {
        Ok(Selector {
            ip_src: FieldSet::parse(FieldKind::Ip, ip_src)?,
            p_src: FieldSet::parse(FieldKind::Port, p_src)?,
            ip_dst: FieldSet::parse(FieldKind::Ip, ip_dst)?,
            p_dst: FieldSet::parse(FieldKind::Port, p_dst)?,
            prt: FieldSet::parse(FieldKind::Proto, prt)?,
            extras: Vec::new(),
        })
    }

    pub fn fields(&self) -> impl Iterator<Item = &FieldSet> {
        [&self.ip_src, &self.p_src, &self.ip_dst, &self.p_dst, &self.prt]
            .into_iter()
            .chain(self.extras.iter().map(|(_, f)| f))
    }

    fn fields_mut(&mut self) -> impl Iterator<Item = &mut FieldSet> {
        [
            &mut self.ip_src,
            &mut self.p_src,
            &mut self.ip_dst,
            &mut self.p_dst,
            &mut self.prt,
        ]
        .into_iter()
        .chain(self.extras.iter_mut().map(|(_, f)| f))
    }

    pub fn field(&self, name: &str) -> Option<&FieldSet> {
        match name {
            "ip_src" => Some(&self.ip_src),
            "p_src" => Some(&self.p_src),
            "ip_dst" => Some(&self.ip_dst),
            "p_dst" => Some(&self.p_dst),
            "prt" => Some(&self.prt),
            _ => self.extras.iter().find(|(n, _)| n == name).map(|(_, f)| f),
        }
    }

    pub fn check_schema(&self, other: &Selector) -> Result<()> {
        let same_names = self.extras.len() == other.extras.len()
            && self
                .extras
                .iter()
                .zip(&other.extras)
                .all(|((a, _), (b, _))| a == b);
        let same_domains = self.fields().zip(other.fields()).all(|(a, b)| a.same_domain(b));
        if same_names && same_domains {
            Ok(())
        } else {
            Err(Error::SchemaMismatch(format!("{self} vs {other}")))
        }
    }

    pub fn is_empty(&self) -> bool {
        self.fields().any(FieldSet::is_empty)
    }

    pub fn is_any(&self) -> bool {
        self.fields().all(FieldSet::is_full)
    }

    pub fn contains(&self, other: &Selector) -> bool {
        other.is_empty()
            || self
                .fields()
                .zip(other.fields())
                .all(|(a, b)| a.is_superset(b))
    }

    pub fn intersects(&self, other: &Selector) -> bool {
        !self.is_empty()
            && !other.is_empty()
            && self.fields().zip(other.fields()).all(|(a, b)| a.intersects(b))
    }

    pub fn intersect(&self, other: &Selector) -> Selector {
        let mut out = self.clone();
        for (a, b) in out.fields_mut().zip(other.fields()) {
            *a = a.intersect(b);
        }
        out
    }

    /// Field-wise union: the tightest product-form selector covering both.
    pub fn lub(&self, other: &Selector) -> Selector {
        let mut out = self.clone();
        for (a, b) in out.fields_mut().zip(other.fields()) {
            *a = a.union(b);
        }
        out
    }

    /// Relation between matched-traffic sets, with precedence
    /// equal, contain, disjoint, kin.
    pub fn relation(&self, other: &Selector) -> Result<Relation> {
        self.check_schema(other)?;
        Ok(self.relation_unchecked(other))
    }

    pub fn relation_unchecked(&self, other: &Selector) -> Relation {
        let (e1, e2) = (self.is_empty(), other.is_empty());
        if e1 && e2 {
            return Relation::Equivalent;
        }
        let sup = self.contains(other);
        let sub = other.contains(self);
        match (sup, sub) {
            (true, true) => Relation::Equivalent,
            (true, false) => Relation::Dominates,
            (false, true) => Relation::DominatedBy,
            (false, false) if !self.intersects(other) => Relation::Disjoint,
            _ => Relation::Kin,
        }
    }

    /// `self ∖ other` as pairwise disjoint product sets.
    pub fn subtract(&self, other: &Selector) -> Vec<Selector> {
        if !self.intersects(other) {
            return if self.is_empty() { Vec::new() } else { vec![self.clone()] };
        }
        let mut out = Vec::new();
        let mut core = self.clone();
        let n = 5 + self.extras.len();
        for k in 0..n {
            let a = core.field_at(k).clone();
            let b = other.field_at(k);
            let rest = a.subtract(b);
            if !rest.is_empty() {
                let mut piece = core.clone();
                *piece.field_at_mut(k) = rest;
                out.push(piece);
            }
            *core.field_at_mut(k) = a.intersect(b);
        }
        out
    }

    fn field_at(&self, k: usize) -> &FieldSet {
        match k {
            0 => &self.ip_src,
            1 => &self.p_src,
            2 => &self.ip_dst,
            3 => &self.p_dst,
            4 => &self.prt,
            _ => &self.extras[k - 5].1,
        }
    }

    fn field_at_mut(&mut self, k: usize) -> &mut FieldSet {
        match k {
            0 => &mut self.ip_src,
            1 => &mut self.p_src,
            2 => &mut self.ip_dst,
            3 => &mut self.p_dst,
            4 => &mut self.prt,
            _ => &mut self.extras[k - 5].1,
        }
    }

    pub fn reverse(&self) -> Selector {
        Selector {
            ip_src: self.ip_dst.clone(),
            p_src: self.p_dst.clone(),
            ip_dst: self.ip_src.clone(),
            p_dst: self.p_src.clone(),
            prt: self.prt.clone(),
            extras: self.extras.clone(),
        }
    }

    /// Keeps the named fields and widens all others to the wildcard.
    pub fn restrict(&self, keep: &[&str]) -> Result<Selector> {
        for name in keep {
            if self.field(name).is_none() {
                return Err(Error::UnknownField((*name).to_string()));
            }
        }
        let mut out = self.clone();
        let names: Vec<String> = FIVE_TUPLE
            .iter()
            .map(|s| s.to_string())
            .chain(self.extras.iter().map(|(n, _)| n.clone()))
            .collect();
        for (name, f) in names.iter().zip(out.fields_mut()) {
            if !keep.contains(&name.as_str()) {
                *f = FieldSet::full_in(f.kind(), f.max());
            }
        }
        Ok(out)
    }

    pub fn source_restricted(&self) -> Selector {
        self.restrict(&["ip_src", "p_src"]).expect("five-tuple fields exist")
    }

    /// Membership of a single packet given as one value per field.
    pub fn matches(&self, packet: &[u64]) -> bool {
        self.fields()
            .zip(packet.iter())
            .all(|(f, &v)| f.contains(v))
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_any() {
            return f.write_str("*");
        }
        write!(
            f,
            "({}, {}, {}, {}, {}",
            self.ip_src, self.p_src, self.ip_dst, self.p_dst, self.prt
        )?;
        for (name, v) in &self.extras {
            write!(f, ", {name}={v}")?;
        }
        f.write_str(")")
    }
}
