use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::domain::fixtures::{item, solicitation, uniform_items};
use crate::domain::{SetAsidePolicy, SizeClass, WindowKey};

fn vendor(id: &str, class: SizeClass) -> Vendor {
    Vendor { vendor_id: id.into(), size_class: class, sdvosb: false }
}

fn bid(vendor: &str, item: &str, price: &str) -> Bid {
    Bid { vendor_id: vendor.into(), item_id: item.into(), price_per_lb: price.parse().unwrap() }
}

fn cap(vendor: &str, products: &[&str], lbs: u64) -> CapacityConstraint {
    CapacityConstraint {
        vendor_id: vendor.into(),
        products: products.iter().map(|p| (*p).into()).collect(),
        window_key: WindowKey::Any,
        max_quantity_lbs: lbs,
    }
}

fn winners(r: &AllocationResult) -> Vec<(&str, &str)> {
    r.awards.iter().map(|(i, a)| (i.as_str(), a.vendor_id.as_str())).collect()
}

/// Four truckloads at a half set-aside; the large vendor is cheapest
/// everywhere and each small vendor can take one truck.
fn worked_example() -> AllocationProblem {
    let items = uniform_items("FGB", &[40_000; 4]);
    let mut bids = Vec::new();
    for it in &items {
        bids.push(bid("L", it.item_id.as_str(), "2.0000"));
        bids.push(bid("S1", it.item_id.as_str(), "2.1000"));
        bids.push(bid("S2", it.item_id.as_str(), "2.2000"));
    }
    AllocationProblem {
        solicitation: solicitation(items, vec![SetAsidePolicy::new("FGB", 0.5)]),
        bids,
        vendors: vec![vendor("L", SizeClass::Large), vendor("S1", SizeClass::Small), vendor("S2", SizeClass::Small)],
        capacities: vec![cap("S1", &["FGB"], 40_000), cap("S2", &["FGB"], 40_000)],
        price_ceiling: BTreeMap::new(),
    }
}

#[test]
fn single_bidder_wins_at_its_bid() {
    let p = AllocationProblem {
        solicitation: solicitation(vec![item("I1", "A", 40_000)], vec![SetAsidePolicy::new("A", 0.0)]),
        bids: vec![bid("V", "I1", "1.2345")],
        vendors: vec![vendor("V", SizeClass::Large)],
        capacities: vec![],
        price_ceiling: BTreeMap::new(),
    };
    let r = solve_allocation(&p).unwrap();
    assert_eq!(winners(&r), vec![("I1", "V")]);
    assert_eq!(r.awards[&ItemId::from("I1")].price_per_lb.to_string(), "1.2345");
    assert_eq!(r.total_cost, Money(12_345 * 40_000));
}

#[test]
fn half_setaside_worked_example() {
    let p = worked_example();
    let r = solve_allocation(&p).unwrap();
    assert_eq!(winners(&r), vec![("FGB-00", "L"), ("FGB-01", "L"), ("FGB-02", "S1"), ("FGB-03", "S2")]);
    let q = &r.quota_report[0];
    assert_eq!(q.quota_lbs, 80_000.0);
    assert_eq!(q.awarded_lbs, 80_000);
    assert!(q.quota_met && !q.relaxed);
    assert_eq!(r, brute_force_allocation(&p).unwrap());
}

#[test]
fn one_small_truck_relaxes_the_quota_and_maximizes_small_quantity() {
    let mut p = worked_example();
    p.vendors.retain(|v| v.vendor_id.as_str() != "S2");
    p.bids.retain(|b| b.vendor_id.as_str() != "S2");
    p.capacities.retain(|c| c.vendor_id.as_str() != "S2");
    let r = solve_allocation(&p).unwrap();
    let q = &r.quota_report[0];
    assert_eq!(q.awarded_lbs, 40_000);
    assert!(!q.quota_met && q.relaxed);
    assert_eq!(r.awarded_lbs_for(&"S1".into()), 40_000);
    assert!(r.unawarded.is_empty());
}

#[test]
fn full_setaside_without_small_bids_goes_large_and_is_relaxed() {
    let items = uniform_items("P", &[40_000; 3]);
    let bids = items.iter().map(|it| bid("L", it.item_id.as_str(), "3.0000")).collect();
    let p = AllocationProblem {
        solicitation: solicitation(items, vec![SetAsidePolicy::new("P", 1.0)]),
        bids,
        vendors: vec![vendor("L", SizeClass::Large), vendor("S", SizeClass::Small)],
        capacities: vec![],
        price_ceiling: BTreeMap::new(),
    };
    let r = solve_allocation(&p).unwrap();
    assert_eq!(r.awards.len(), 3);
    assert!(r.quota_report[0].relaxed);
    assert_eq!(r, brute_force_allocation(&p).unwrap());
}

#[test]
fn no_bids_leaves_everything_unawarded() {
    let p = AllocationProblem {
        solicitation: solicitation(uniform_items("P", &[40_000; 2]), vec![SetAsidePolicy::new("P", 0.5)]),
        bids: vec![],
        vendors: vec![vendor("S", SizeClass::Small)],
        capacities: vec![],
        price_ceiling: BTreeMap::new(),
    };
    for r in [solve_allocation(&p).unwrap(), brute_force_allocation(&p).unwrap()] {
        assert!(r.awards.is_empty());
        assert_eq!(r.unawarded.len(), 2);
        assert_eq!(r.total_cost, Money(0));
    }
    let f = check_feasibility(&p).unwrap();
    assert_eq!(f.products[0].max_awardable_lbs, 0);
}

#[test]
fn single_truck_capacity_takes_the_cheapest_item() {
    let items = uniform_items("P", &[40_000; 3]);
    let p = AllocationProblem {
        solicitation: solicitation(items, vec![SetAsidePolicy::new("P", 0.0)]),
        bids: vec![bid("V", "P-00", "2.0000"), bid("V", "P-01", "1.5000"), bid("V", "P-02", "1.7000")],
        vendors: vec![vendor("V", SizeClass::Large)],
        capacities: vec![cap("V", &["P"], 40_000)],
        price_ceiling: BTreeMap::new(),
    };
    let r = brute_force_allocation(&p).unwrap();
    assert_eq!(winners(&r), vec![("P-01", "V")]);
    assert_eq!(r, solve_allocation(&p).unwrap());
}

#[test]
fn feasibility_reports_small_supply() {
    let p = worked_example();
    let f = check_feasibility(&p).unwrap();
    assert_eq!(f.products[0].max_small_lbs, 80_000);
    assert!(f.products[0].attainable);

    let mut p = worked_example();
    p.bids.retain(|b| b.vendor_id.as_str() != "S2");
    let f = check_feasibility(&p).unwrap();
    assert_eq!(f.products[0].max_awardable_lbs, 160_000);
    assert_eq!(f.products[0].max_small_lbs, 40_000);
    assert!(!f.products[0].attainable);
}

#[test]
fn ties_go_to_the_lowest_vendor_id() {
    let p = AllocationProblem {
        solicitation: solicitation(uniform_items("P", &[40_000; 2]), vec![SetAsidePolicy::new("P", 0.0)]),
        bids: vec![
            bid("B", "P-00", "1.0000"),
            bid("A", "P-00", "1.0000"),
            bid("B", "P-01", "1.0000"),
            bid("A", "P-01", "1.0000"),
        ],
        vendors: vec![vendor("B", SizeClass::Large), vendor("A", SizeClass::Large)],
        capacities: vec![cap("A", &["P"], 40_000)],
        price_ceiling: BTreeMap::new(),
    };
    let r = solve_allocation(&p).unwrap();
    assert_eq!(winners(&r), vec![("P-00", "A"), ("P-01", "B")]);
}

#[test]
fn price_ceiling_drops_expensive_bids() {
    let mut p = worked_example();
    p.price_ceiling.insert("FGB".into(), "2.1500".parse().unwrap());
    let r = solve_allocation(&p).unwrap();
    assert_eq!(r.awarded_lbs_for(&"S2".into()), 0);
    assert!(r.quota_report[0].relaxed);
}

#[test]
fn sdvosb_vendor_counts_toward_both_quotas() {
    let items = uniform_items("P", &[40_000; 2]);
    let mut policy = SetAsidePolicy::new("P", 0.5);
    policy.sdvosb_fraction = 0.5;
    let bids = items
        .iter()
        .flat_map(|it| [bid("L", it.item_id.as_str(), "1.0000"), bid("V", it.item_id.as_str(), "1.2000")])
        .collect();
    let mut v = vendor("V", SizeClass::Large);
    v.sdvosb = true;
    let p = AllocationProblem {
        solicitation: solicitation(items, vec![policy]),
        bids,
        vendors: vec![vendor("L", SizeClass::Large), v],
        capacities: vec![],
        price_ceiling: BTreeMap::new(),
    };
    let r = solve_allocation(&p).unwrap();
    assert_eq!(r.awarded_lbs_for(&"V".into()), 40_000);
    assert!(r.quota_report[0].quota_met);
    assert!(r.sdvosb_report[0].quota_met);
}

#[test]
fn spanning_capacity_couples_products() {
    let mut items = uniform_items("A", &[40_000]);
    items.extend(uniform_items("B", &[40_000]));
    let p = AllocationProblem {
        solicitation: solicitation(items, vec![SetAsidePolicy::new("A", 1.0), SetAsidePolicy::new("B", 1.0)]),
        bids: vec![bid("S", "A-00", "1.0000"), bid("S", "B-00", "1.0000"), bid("L", "B-00", "0.5000")],
        vendors: vec![vendor("S", SizeClass::Small), vendor("L", SizeClass::Large)],
        capacities: vec![cap("S", &["A", "B"], 40_000)],
        price_ceiling: BTreeMap::new(),
    };
    let r = solve_allocation(&p).unwrap();
    assert_eq!(r.lexicographic_trace.len(), 1);
    assert_eq!(winners(&r), vec![("A-00", "S"), ("B-00", "L")]);
    assert_eq!(r, brute_force_allocation(&p).unwrap());

    let limits = SolverLimits { max_items: 1, ..Default::default() };
    let err = solve_allocation_with(&p, limits).unwrap_err();
    assert!(matches!(err, AllocationError::InstanceTooLarge { items: 2, .. }));
    assert!(err.to_string().contains("bounded at 1 items"));
}

#[test]
fn malformed_problems_are_rejected() {
    let mut p = worked_example();
    p.bids.push(bid("L", "FGB-00", "1.0000"));
    assert!(matches!(solve_allocation(&p), Err(AllocationError::DuplicateBid { .. })));

    let mut p = worked_example();
    p.bids.push(bid("X", "FGB-00", "1.0000"));
    assert!(matches!(solve_allocation(&p), Err(AllocationError::UnknownVendor(_))));

    let mut p = worked_example();
    p.bids.push(bid("L", "nope", "1.0000"));
    assert!(matches!(solve_allocation(&p), Err(AllocationError::UnknownItem(_))));

    let mut p = worked_example();
    p.solicitation.policies.clear();
    assert!(matches!(solve_allocation(&p), Err(AllocationError::Invalid(_))));

    let mut p = worked_example();
    p.solicitation.items = uniform_items("FGB", &[40_000; 9]);
    assert!(matches!(brute_force_allocation(&p), Err(AllocationError::OracleBoundExceeded { items: 9, .. })));
}

#[test]
fn node_budget_is_reported() {
    let limits = SolverLimits { max_nodes: 3, ..Default::default() };
    let err = solve_allocation_with(&worked_example(), limits).unwrap_err();
    assert!(matches!(err, AllocationError::SearchLimitExceeded { max_nodes: 3, .. }));
}

#[test]
fn problem_round_trips_through_json() {
    let p = worked_example();
    let s = serde_json::to_string(&p).unwrap();
    assert_eq!(serde_json::from_str::<AllocationProblem>(&s).unwrap(), p);
}

/// Random instance: up to two products, capacities possibly spanning both.
/// With `flat_prices` each vendor bids one price on every item it bids on,
/// which makes identical items common.
fn instance_with(max_items: usize, max_vendors: usize, flat_prices: bool) -> impl Strategy<Value = AllocationProblem> {
    let alpha = prop_oneof![Just(0.0), Just(0.5), Just(1.0)];
    (
        1..=max_items,
        1..=max_vendors,
        proptest::collection::vec((alpha.clone(), 0u8..3), 2),
        proptest::collection::vec((0u8..3, any::<bool>()), max_vendors),
        proptest::collection::vec((1u64..=4, 0u8..2), max_items),
        proptest::collection::vec(proptest::option::weighted(0.7, 90u32..110), max_items * max_vendors),
        proptest::collection::vec(proptest::option::weighted(0.4, (1u64..=3, 0u8..3)), max_vendors),
    )
        .prop_map(move |(n_items, n_vendors, policies, vendors, items, prices, caps)| {
            let codes = ["A", "B"];
            let items: Vec<_> = items[..n_items]
                .iter()
                .enumerate()
                .map(|(i, &(trucks, p))| item(&format!("I{i}"), codes[p as usize], trucks * 10_000))
                .collect();
            let mut present: Vec<&str> = items.iter().map(|it| it.product_code.as_str()).collect();
            present.sort_unstable();
            present.dedup();
            let policies = present
                .iter()
                .map(|&c| {
                    let (alpha, sdv) = policies[(c == "B") as usize];
                    let mut pol = SetAsidePolicy::new(c, alpha);
                    pol.sdvosb_fraction = f64::from(sdv) * 0.25;
                    pol
                })
                .collect();
            let vendors: Vec<Vendor> = vendors[..n_vendors]
                .iter()
                .enumerate()
                .map(|(v, &(class, sdv))| Vendor {
                    vendor_id: format!("V{v}").into(),
                    size_class: if class == 0 { SizeClass::Large } else { SizeClass::Small },
                    sdvosb: sdv && class == 2,
                })
                .collect();
            let mut bids = Vec::new();
            for (i, it) in items.iter().enumerate() {
                for v in &vendors[..n_vendors] {
                    let v_rank = v.vendor_id.as_str()[1..].parse::<usize>().unwrap();
                    let k = i * max_vendors + v_rank;
                    let price = if flat_prices { prices[v_rank].or(prices[k].map(|_| 100)) } else { prices[k] };
                    if let Some(cents) = price.filter(|_| prices[k].is_some()) {
                        bids.push(Bid {
                            vendor_id: v.vendor_id.clone(),
                            item_id: it.item_id.clone(),
                            price_per_lb: Price::from_ten_thousandths(u64::from(cents) * 100),
                        });
                    }
                }
            }
            let capacities = caps[..n_vendors]
                .iter()
                .enumerate()
                .filter_map(|(v, c)| {
                    c.map(|(trucks, which)| CapacityConstraint {
                        vendor_id: format!("V{v}").into(),
                        products: match which {
                            0 => vec!["A".into()],
                            1 => vec!["B".into()],
                            _ => vec!["A".into(), "B".into()],
                        },
                        window_key: WindowKey::Any,
                        max_quantity_lbs: trucks * 10_000,
                    })
                })
                .collect();
            AllocationProblem {
                solicitation: solicitation(items, policies),
                bids,
                vendors,
                capacities,
                price_ceiling: BTreeMap::new(),
            }
        })
}

fn instance(max_items: usize, max_vendors: usize) -> impl Strategy<Value = AllocationProblem> {
    instance_with(max_items, max_vendors, false)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn flat_vendor_prices_match_exhaustive_oracle(p in instance_with(6, 4, true)) {
        let fast = solve_allocation(&p).unwrap();
        let slow = brute_force_allocation(&p).unwrap();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn exact_solver_matches_exhaustive_oracle(p in instance(6, 4)) {
        let fast = solve_allocation(&p).unwrap();
        let slow = brute_force_allocation(&p).unwrap();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn quota_met_whenever_feasibility_says_attainable(p in instance(6, 4)) {
        let r = solve_allocation(&p).unwrap();
        let f = check_feasibility(&p).unwrap();
        // a spanning capacity can make two individually attainable quotas jointly unattainable
        let coupled = p.capacities.iter().any(|c| c.products.len() > 1);
        for (q, pf) in r.quota_report.iter().zip(&f.products) {
            prop_assert_eq!(&q.product_code, &pf.product_code);
            if pf.attainable && !coupled {
                prop_assert!(q.quota_met);
            }
            prop_assert_eq!(q.relaxed, !q.quota_met);
        }
    }

    #[test]
    fn lowering_a_winning_bid_never_loses_quantity(p in instance(6, 4), pick in any::<prop::sample::Index>(), cut in 1u64..50) {
        let r = solve_allocation(&p).unwrap();
        prop_assume!(!r.awards.is_empty());
        let (item_id, award) = r.awards.iter().nth(pick.index(r.awards.len())).unwrap();
        let vendor = award.vendor_id.clone();
        let mut q = p.clone();
        for b in &mut q.bids {
            if b.vendor_id == vendor && &b.item_id == item_id {
                let units = b.price_per_lb.ten_thousandths();
                b.price_per_lb = Price::from_ten_thousandths(units.saturating_sub(cut * 100).max(1));
            }
        }
        let r2 = solve_allocation(&q).unwrap();
        prop_assert!(r2.awarded_lbs_for(&vendor) >= r.awarded_lbs_for(&vendor));
    }

    #[test]
    fn independent_products_match_joint_solve(mut p in instance(6, 4)) {
        p.capacities.retain(|c| c.products.len() == 1);
        let split = solve_allocation(&p).unwrap();
        let joint = solve_allocation_joint(&p).unwrap();
        prop_assert_eq!(&split.awards, &joint.awards);
        prop_assert_eq!(split.total_cost, joint.total_cost);
        prop_assert_eq!(&split.quota_report, &joint.quota_report);
    }

    #[test]
    fn capacity_is_respected_and_awards_match_bids(p in instance(8, 5)) {
        let r = solve_allocation(&p).unwrap();
        for (item_id, a) in &r.awards {
            prop_assert!(p.bids.iter().any(|b| &b.item_id == item_id && b.vendor_id == a.vendor_id && b.price_per_lb == a.price_per_lb));
        }
        for c in &p.capacities {
            let used: u64 = p.solicitation.items.iter()
                .filter(|it| r.awards.get(&it.item_id).is_some_and(|a| c.applies_to(&a.vendor_id, it)))
                .map(|it| it.quantity_lbs)
                .sum();
            prop_assert!(used <= c.max_quantity_lbs);
        }
        prop_assert_eq!(solve_allocation(&p).unwrap(), r);
    }
}
