//! Normalized unions of inclusive integer intervals over a bounded domain.

use std::fmt;
use std::net::Ipv4Addr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldKind {
    Ip,
    Port,
    Proto,
    Other,
}

impl FieldKind {
    pub fn default_max(self) -> u64 {
        match self {
            FieldKind::Ip => u32::MAX as u64,
            FieldKind::Port => u16::MAX as u64,
            FieldKind::Proto => u8::MAX as u64,
            FieldKind::Other => u32::MAX as u64,
        }
    }
}

/// A set of values in `0..=max`, kept as sorted, non-overlapping,
/// non-adjacent inclusive intervals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldSet {
    kind: FieldKind,
    max: u64,
    ranges: Vec<(u64, u64)>,
}

impl FieldSet {
    pub fn full(kind: FieldKind) -> Self {
        Self::full_in(kind, kind.default_max())
    }

    pub fn full_in(kind: FieldKind, max: u64) -> Self {
        FieldSet {
            kind,
            max,
            ranges: vec![(0, max)],
        }
    }

    pub fn empty_in(kind: FieldKind, max: u64) -> Self {
        FieldSet {
            kind,
            max,
            ranges: Vec::new(),
        }
    }

    pub fn single(kind: FieldKind, v: u64) -> Self {
        Self::from_ranges(kind, kind.default_max(), [(v, v)])
    }

    pub fn range(kind: FieldKind, lo: u64, hi: u64) -> Self {
        Self::from_ranges(kind, kind.default_max(), [(lo, hi)])
    }

    /// Builds a set from arbitrary intervals; out-of-domain parts are clipped
    /// and reversed intervals are ignored.
    pub fn from_ranges<I>(kind: FieldKind, max: u64, ranges: I) -> Self
    where
        I: IntoIterator<Item = (u64, u64)>,
    {
        let mut v: Vec<(u64, u64)> = ranges
            .into_iter()
            .filter(|&(lo, hi)| lo <= hi && lo <= max)
            .map(|(lo, hi)| (lo, hi.min(max)))
            .collect();
        v.sort_unstable();
        let mut out: Vec<(u64, u64)> = Vec::with_capacity(v.len());
        for (lo, hi) in v {
            match out.last_mut() {
                Some(last) if lo <= last.1.saturating_add(1) => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        FieldSet {
            kind,
            max,
            ranges: out,
        }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn max(&self) -> u64 {
        self.max
    }

    pub fn ranges(&self) -> &[(u64, u64)] {
        &self.ranges
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.ranges.len() == 1 && self.ranges[0] == (0, self.max)
    }

    pub fn cardinality(&self) -> u128 {
        self.ranges
            .iter()
            .map(|&(lo, hi)| (hi - lo) as u128 + 1)
            .sum()
    }

    pub fn contains(&self, v: u64) -> bool {
        let idx = self.ranges.partition_point(|&(_, hi)| hi < v);
        self.ranges.get(idx).is_some_and(|&(lo, _)| lo <= v)
    }

    pub fn same_domain(&self, other: &FieldSet) -> bool {
        self.kind == other.kind && self.max == other.max
    }

    pub fn intersect(&self, other: &FieldSet) -> FieldSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.ranges.len() && j < other.ranges.len() {
            let (a0, a1) = self.ranges[i];
            let (b0, b1) = other.ranges[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo <= hi {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        FieldSet {
            kind: self.kind,
            max: self.max.min(other.max),
            ranges: out,
        }
    }

    pub fn intersects(&self, other: &FieldSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.ranges.len() && j < other.ranges.len() {
            let (a0, a1) = self.ranges[i];
            let (b0, b1) = other.ranges[j];
            if a0.max(b0) <= a1.min(b1) {
                return true;
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        false
    }

    pub fn union(&self, other: &FieldSet) -> FieldSet {
        FieldSet::from_ranges(
            self.kind,
            self.max.max(other.max),
            self.ranges.iter().chain(other.ranges.iter()).copied(),
        )
    }

    pub fn complement(&self) -> FieldSet {
        let mut out = Vec::new();
        let mut next = 0u64;
        for &(lo, hi) in &self.ranges {
            if lo > next {
                out.push((next, lo - 1));
            }
            next = match hi.checked_add(1) {
                Some(n) => n,
                None => return FieldSet { kind: self.kind, max: self.max, ranges: out },
            };
        }
        if next <= self.max {
            out.push((next, self.max));
        }
        FieldSet {
            kind: self.kind,
            max: self.max,
            ranges: out,
        }
    }

    pub fn subtract(&self, other: &FieldSet) -> FieldSet {
        self.intersect(&other.complement())
    }

    pub fn is_superset(&self, other: &FieldSet) -> bool {
        other.ranges.iter().all(|&(lo, hi)| {
            let idx = self.ranges.partition_point(|&(_, h)| h < lo);
            self.ranges
                .get(idx)
                .is_some_and(|&(l, h)| l <= lo && hi <= h)
        })
    }

    /// Parses the textual form used in scenario documents: `*`, or a comma
    /// separated list of items. IP items are addresses, CIDR blocks or
    /// `a-b` ranges; port and protocol items are numbers or `a-b` ranges;
    /// protocol names `tcp`, `udp`, `icmp` are accepted.
    pub fn parse(kind: FieldKind, text: &str) -> Result<FieldSet> {
        let text = text.trim();
        if text == "*" || text.is_empty() && kind != FieldKind::Other {
            return Ok(FieldSet::full(kind));
        }
        let mut ranges = Vec::new();
        for item in text.split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            if item == "*" {
                return Ok(FieldSet::full(kind));
            }
            ranges.push(parse_item(kind, item)?);
        }
        Ok(FieldSet::from_ranges(kind, kind.default_max(), ranges))
    }
}

fn bad(kind: FieldKind, item: &str) -> Error {
    let what = match kind {
        FieldKind::Ip => "ip field",
        FieldKind::Port => "port field",
        FieldKind::Proto => "protocol field",
        FieldKind::Other => "selector field",
    };
    Error::BadValue {
        what,
        value: item.to_string(),
    }
}

fn parse_ip(s: &str) -> Option<u64> {
    s.trim().parse::<Ipv4Addr>().ok().map(|a| u32::from(a) as u64)
}

fn parse_num(kind: FieldKind, s: &str) -> Option<u64> {
    let s = s.trim();
    if kind == FieldKind::Proto {
        match s.to_ascii_lowercase().as_str() {
            "tcp" => return Some(6),
            "udp" => return Some(17),
            "icmp" => return Some(1),
            _ => {}
        }
    }
    s.parse::<u64>().ok().filter(|&v| v <= kind.default_max())
}

fn parse_item(kind: FieldKind, item: &str) -> Result<(u64, u64)> {
    let one = |s: &str| -> Result<u64> {
        match kind {
            FieldKind::Ip => parse_ip(s),
            _ => parse_num(kind, s),
        }
        .ok_or_else(|| bad(kind, item))
    };
    if kind == FieldKind::Ip {
        if let Some((addr, len)) = item.split_once('/') {
            let base = parse_ip(addr).ok_or_else(|| bad(kind, item))?;
            let len: u32 = len.trim().parse().map_err(|_| bad(kind, item))?;
            if len > 32 {
                return Err(bad(kind, item));
            }
            let span = if len == 0 { 1u64 << 32 } else { 1u64 << (32 - len) };
            let lo = base & !(span - 1);
            return Ok((lo, lo + span - 1));
        }
    }
    if let Some((a, b)) = item.split_once('-') {
        let (lo, hi) = (one(a)?, one(b)?);
        if lo > hi {
            return Err(bad(kind, item));
        }
        return Ok((lo, hi));
    }
    let v = one(item)?;
    Ok((v, v))
}

fn fmt_ip_range(f: &mut fmt::Formatter<'_>, lo: u64, hi: u64) -> fmt::Result {
    if lo == hi {
        return write!(f, "{}", Ipv4Addr::from(lo as u32));
    }
    let span = hi - lo + 1;
    if span.is_power_of_two() && lo.is_multiple_of(span) && span <= 1u64 << 32 {
        let len = 32 - span.trailing_zeros();
        return write!(f, "{}/{}", Ipv4Addr::from(lo as u32), len);
    }
    write!(f, "{}-{}", Ipv4Addr::from(lo as u32), Ipv4Addr::from(hi as u32))
}

impl fmt::Display for FieldSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_full() {
            return f.write_str("*");
        }
        if self.is_empty() {
            return f.write_str("");
        }
        let ip = self.kind == FieldKind::Ip && self.max == FieldKind::Ip.default_max();
        for (n, &(lo, hi)) in self.ranges.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            if ip {
                fmt_ip_range(f, lo, hi)?;
            } else if self.kind == FieldKind::Proto && lo == hi && self.max == 255 {
                match lo {
                    6 => f.write_str("TCP")?,
                    17 => f.write_str("UDP")?,
                    1 => f.write_str("ICMP")?,
                    _ => write!(f, "{lo}")?,
                }
            } else if lo == hi {
                write!(f, "{lo}")?;
            } else {
                write!(f, "{lo}-{hi}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs(max: u64, r: &[(u64, u64)]) -> FieldSet {
        FieldSet::from_ranges(FieldKind::Other, max, r.iter().copied())
    }

    #[test]
    fn normalization_merges_adjacent() {
        let s = fs(15, &[(4, 6), (0, 2), (3, 3), (10, 20)]);
        assert_eq!(s.ranges(), &[(0, 6), (10, 15)]);
    }

    #[test]
    fn complement_and_subtract() {
        let s = fs(15, &[(2, 4), (8, 8)]);
        assert_eq!(s.complement().ranges(), &[(0, 1), (5, 7), (9, 15)]);
        assert!(fs(15, &[(0, 15)]).complement().is_empty());
        assert_eq!(fs(15, &[(0, 15)]).subtract(&s).cardinality(), 12);
    }

    #[test]
    fn full_u64_complement_does_not_overflow() {
        let s = FieldSet::from_ranges(FieldKind::Other, u64::MAX, [(0, u64::MAX)]);
        assert!(s.complement().is_empty());
    }

    #[test]
    fn parse_cidr_and_lists() {
        let s = FieldSet::parse(FieldKind::Ip, "10.1.0.0/16").unwrap();
        assert_eq!(s.cardinality(), 65536);
        assert_eq!(s.to_string(), "10.1.0.0/16");
        let p = FieldSet::parse(FieldKind::Port, "22, 80-81").unwrap();
        assert!(p.contains(81) && !p.contains(82));
        assert_eq!(FieldSet::parse(FieldKind::Proto, "TCP").unwrap().to_string(), "TCP");
        assert!(FieldSet::parse(FieldKind::Port, "70000").is_err());
        assert!(FieldSet::parse(FieldKind::Ip, "10.0.0.0/33").is_err());
        assert!(FieldSet::parse(FieldKind::Ip, "*").unwrap().is_full());
    }

    #[test]
    fn superset_checks_each_interval() {
        let a = fs(15, &[(0, 5), (8, 12)]);
        assert!(a.is_superset(&fs(15, &[(1, 2), (9, 12)])));
        assert!(!a.is_superset(&fs(15, &[(4, 8)])));
        assert!(a.is_superset(&fs(15, &[])));
    }
}
