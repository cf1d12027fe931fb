use std::collections::BTreeMap;

use setaside_core::domain::{Price, SizeClass};
use setaside_core::simulation::{simulate_campaign, win_share_report, Campaign, SimConfig};

// Without set-asides or capacities every item goes to its lowest bid.
#[test]
fn open_auctions_award_the_lowest_equilibrium_bid() {
    let mut cfg = SimConfig::equilibrium_market(21, 40, &[0.0], 2, 1.0, 2.0);
    cfg.products[0].sdvosb_prob = 0.0;
    let b_low = Campaign::new(&cfg).unwrap().equilibrium(0.0).unwrap().b_low;
    let records = simulate_campaign(&cfg).unwrap();

    let mut items: BTreeMap<(String, String), (Price, Option<Price>)> = BTreeMap::new();
    for r in &records {
        let e = items.entry((r.auction_id.to_string(), r.item_id.to_string())).or_insert((r.price_per_lb, None));
        e.0 = e.0.min(r.price_per_lb);
        if r.won {
            assert!(e.1.replace(r.price_per_lb).is_none(), "two winners on one item");
        }
        assert!(r.price_per_lb.dollars() >= b_low - 1e-4);
    }
    assert_eq!(items.len(), 80);
    for ((auction, item), (lowest, won)) in items {
        assert_eq!(won, Some(lowest), "{auction}/{item}");
    }
}

#[test]
fn full_set_aside_keeps_large_vendors_out() {
    let cfg = SimConfig::equilibrium_market(22, 30, &[1.0], 1, 1.0, 2.0);
    let records = simulate_campaign(&cfg).unwrap();
    assert!(!records.is_empty());
    assert!(records.iter().all(|r| r.vendor_type == SizeClass::Small));
    let report = win_share_report(&records);
    assert_eq!(report.aggregate.len(), 1);
    assert_eq!(report.aggregate[0].share(SizeClass::Small), 1.0);
}
