use std::collections::BTreeSet;

use proptest::prelude::*;

use chanlint::ingest::{generate_scenario, GenerationParams};
use chanlint::network::capability::{CapabilityProfile, FirewallAction, FirewallRule};
use chanlint::policy::coefficients::Coefficients;
use chanlint::policy::fieldset::{FieldKind, FieldSet};
use chanlint::policy::selector::Selector;
use chanlint::relation::Relation;
use chanlint::{run_analysis, AnalysisOptions};

const MAXES: [u64; 5] = [7, 3, 7, 3, 1];
const KINDS: [FieldKind; 5] = [FieldKind::Ip, FieldKind::Port, FieldKind::Ip, FieldKind::Port, FieldKind::Proto];

fn ranges(max: u64) -> impl Strategy<Value = Vec<(u64, u64)>> {
    prop::collection::vec((0..=max + 1, 0..=max + 1), 0..4)
}

fn model(max: u64, r: &[(u64, u64)]) -> BTreeSet<u64> {
    r.iter()
        .filter(|(lo, hi)| lo <= hi)
        .flat_map(|&(lo, hi)| lo..=hi)
        .filter(|&v| v <= max)
        .collect()
}

fn to_model(f: &FieldSet) -> BTreeSet<u64> {
    (0..=f.max()).filter(|&v| f.contains(v)).collect()
}

fn selector() -> impl Strategy<Value = Selector> {
    (ranges(7), ranges(3), ranges(7), ranges(3), ranges(1)).prop_map(|(a, b, c, d, e)| {
        let mut s = Selector::any_in(7, 3, 1);
        s.ip_src = FieldSet::from_ranges(KINDS[0], MAXES[0], a);
        s.p_src = FieldSet::from_ranges(KINDS[1], MAXES[1], b);
        s.ip_dst = FieldSet::from_ranges(KINDS[2], MAXES[2], c);
        s.p_dst = FieldSet::from_ranges(KINDS[3], MAXES[3], d);
        s.prt = FieldSet::from_ranges(KINDS[4], MAXES[4], e);
        s
    })
}

fn all_packets() -> Vec<[u64; 5]> {
    let mut out = Vec::new();
    for a in 0..=7 {
        for b in 0..=3 {
            for c in 0..=7 {
                for d in 0..=3 {
                    for e in 0..=1 {
                        out.push([a, b, c, d, e]);
                    }
                }
            }
        }
    }
    out
}

fn packet_set(s: &Selector, universe: &[[u64; 5]]) -> BTreeSet<[u64; 5]> {
    universe.iter().filter(|p| s.matches(&p[..])).copied().collect()
}

fn set_relation(a: &BTreeSet<[u64; 5]>, b: &BTreeSet<[u64; 5]>) -> Relation {
    match (a.is_superset(b), b.is_superset(a)) {
        (true, true) => Relation::Equivalent,
        (true, false) => Relation::Dominates,
        (false, true) => Relation::DominatedBy,
        _ if a.is_disjoint(b) => Relation::Disjoint,
        _ => Relation::Kin,
    }
}

proptest! {
    #[test]
    fn fieldset_matches_set_model(a in ranges(15), b in ranges(15)) {
        let (fa, fb) = (
            FieldSet::from_ranges(FieldKind::Port, 15, a.clone()),
            FieldSet::from_ranges(FieldKind::Port, 15, b.clone()),
        );
        let (ma, mb) = (model(15, &a), model(15, &b));
        prop_assert_eq!(to_model(&fa), ma.clone());
        prop_assert_eq!(to_model(&fa.union(&fb)), &ma | &mb);
        prop_assert_eq!(to_model(&fa.intersect(&fb)), &ma & &mb);
        prop_assert_eq!(to_model(&fa.subtract(&fb)), &ma - &mb);
        let all: BTreeSet<u64> = (0..=15).collect();
        prop_assert_eq!(to_model(&fa.complement()), &all - &ma);
        prop_assert_eq!(fa.intersects(&fb), !ma.is_disjoint(&mb));
        prop_assert_eq!(fa.is_superset(&fb), ma.is_superset(&mb));
        prop_assert_eq!(fa.cardinality(), ma.len() as u128);
        prop_assert_eq!(fa.is_empty(), ma.is_empty());
        prop_assert_eq!(fa.is_full(), ma == all);
        // Canonical form: sorted, non-adjacent intervals.
        for w in fa.ranges().windows(2) {
            prop_assert!(w[0].1 + 1 < w[1].0);
        }
    }

    #[test]
    fn selector_ops_match_packet_enumeration(a in selector(), b in selector()) {
        let u = all_packets();
        let (pa, pb) = (packet_set(&a, &u), packet_set(&b, &u));
        prop_assert_eq!(a.relation(&b).unwrap(), set_relation(&pa, &pb));
        prop_assert_eq!(a.intersects(&b), !pa.is_disjoint(&pb));
        prop_assert_eq!(a.contains(&b), pa.is_superset(&pb));
        prop_assert_eq!(packet_set(&a.intersect(&b), &u), &pa & &pb);

        let pieces = a.subtract(&b);
        let mut covered = BTreeSet::new();
        for p in &pieces {
            let ps = packet_set(p, &u);
            prop_assert!(!ps.is_empty());
            prop_assert!(covered.is_disjoint(&ps), "pieces overlap");
            covered.extend(ps);
        }
        prop_assert_eq!(covered, &pa - &pb);

        let r = a.reverse();
        for p in &u {
            prop_assert_eq!(r.matches(&[p[2], p[3], p[0], p[1], p[4]]), a.matches(&p[..]));
        }
    }

    #[test]
    fn lub_is_the_least_product_upper_bound(a in selector(), b in selector(), c in selector()) {
        let l = a.lub(&b);
        prop_assert!(l.contains(&a) && l.contains(&b));
        prop_assert_eq!(l.relation(&b.lub(&a)).unwrap(), Relation::Equivalent);
        // Any product-form selector covering both covers the lub, unless one side is empty.
        if c.contains(&a) && c.contains(&b) && !a.is_empty() && !b.is_empty() {
            prop_assert!(c.contains(&l));
        }
    }

    #[test]
    fn firewall_matches_first_match_replay(
        rules in prop::collection::vec((selector(), any::<bool>()), 0..4),
        traffic in selector(),
    ) {
        let profile = CapabilityProfile {
            firewall: rules
                .iter()
                .map(|(s, allow)| FirewallRule {
                    selector: s.clone(),
                    action: if *allow { FirewallAction::Allow } else { FirewallAction::Deny },
                })
                .collect(),
            ..Default::default()
        };
        let u = all_packets();
        let mut any = false;
        let mut all_dropped = true;
        for p in u.iter().filter(|p| traffic.matches(&p[..])) {
            any = true;
            let verdict = rules
                .iter()
                .find(|(s, _)| s.matches(&p[..]))
                .map(|(_, allow)| *allow)
                .unwrap_or(true);
            prop_assert_eq!(profile.allows_packet(&p[..]), verdict);
            all_dropped &= !verdict;
        }
        prop_assert_eq!(profile.drops_all(&traffic), any && all_dropped);
    }

    #[test]
    fn coefficient_relation_is_componentwise(a in prop::array::uniform3(0u64..4), b in prop::array::uniform3(0u64..4)) {
        let (x, y) = (Coefficients::new(a[0], a[1], a[2]), Coefficients::new(b[0], b[1], b[2]));
        let ge = (0..3).all(|k| a[k] >= b[k]);
        let le = (0..3).all(|k| a[k] <= b[k]);
        let want = match (ge, le) {
            (true, true) => Relation::Equivalent,
            (true, false) => Relation::Dominates,
            (false, true) => Relation::DominatedBy,
            _ => Relation::Disjoint,
        };
        prop_assert_eq!(x.relation(&y), want);
        prop_assert_eq!(x.component_max(&y).relation(&x), if x == x.component_max(&y) { Relation::Equivalent } else { Relation::Dominates });
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analysis_ignores_pi_order(seed in 0u64..1000, shuffle in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let sc = generate_scenario(&GenerationParams::new(12, 12, 80, seed)).unwrap();
        let mut permuted = sc.clone();
        permuted.pis.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle));
        let opts = AnalysisOptions::default();
        let a = run_analysis(&sc, &opts).unwrap();
        let b = run_analysis(&permuted, &opts).unwrap();
        prop_assert_eq!(a.anomalies, b.anomalies);
        prop_assert_eq!(a.notes, b.notes);
    }
}
