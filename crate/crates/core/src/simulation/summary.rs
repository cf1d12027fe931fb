//! Descriptive statistics of a bid collection, grouped by set-aside level.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::domain::{ItemId, ProductCode, SizeClass, VendorId};
use crate::math::{mean, sample_sd};

use super::BidRecord;

/// Row labels of the summary table, top to bottom. Standard deviations sit
/// on an unlabeled row under each average.
pub const TABLE1_ROWS: [&str; 11] = [
    "number of auctions",
    "number of items",
    "number of bids",
    "Small bidder pool",
    "Large bidder pool",
    "Average number of small bidders",
    "Average number of large bidders",
    "Mean Offer price",
    "Mean Winning price",
    "Mean Item Quantity",
    "Exist in all years",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub sd: f64,
}

impl Moments {
    fn of(values: &[f64]) -> Option<Self> {
        (!values.is_empty()).then(|| Moments { mean: mean(values), sd: sample_sd(values) })
    }
}

/// Per-item bidder counts, the unit of the number-of-bidders analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemBidders {
    pub auction_id: String,
    pub item_id: ItemId,
    pub product_code: ProductCode,
    pub set_aside: f64,
    pub quantity_lbs: u64,
    pub small: u32,
    pub large: u32,
    pub winner: Option<(VendorId, SizeClass)>,
    pub winning_price: Option<f64>,
}

pub fn item_bidders(records: &[BidRecord]) -> Vec<ItemBidders> {
    let mut items: BTreeMap<(&str, &ItemId), (ItemBidders, BTreeSet<&VendorId>)> = BTreeMap::new();
    for r in records {
        let (it, seen) = items.entry((&r.auction_id, &r.item_id)).or_insert_with(|| {
            (
                ItemBidders {
                    auction_id: r.auction_id.clone(),
                    item_id: r.item_id.clone(),
                    product_code: r.product_code.clone(),
                    set_aside: r.set_aside,
                    quantity_lbs: r.quantity_lbs,
                    small: 0,
                    large: 0,
                    winner: None,
                    winning_price: None,
                },
                BTreeSet::new(),
            )
        });
        if seen.insert(&r.vendor_id) {
            match r.vendor_type {
                SizeClass::Small => it.small += 1,
                SizeClass::Large => it.large += 1,
            }
        }
        if r.won {
            it.winner = Some((r.vendor_id.clone(), r.vendor_type));
            it.winning_price = Some(r.price_per_lb.dollars());
        }
    }
    items.into_values().map(|(it, _)| it).collect()
}

/// One set-aside level of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryColumn {
    pub set_aside: f64,
    pub n_auctions: usize,
    pub n_items: usize,
    pub n_bids: usize,
    pub small_pool: usize,
    pub large_pool: usize,
    pub small_bidders: Moments,
    pub large_bidders: Moments,
    pub offer_price: Moments,
    /// `None` when no item at this level was awarded.
    pub winning_price: Option<Moments>,
    pub item_quantity: Moments,
    /// The level occurs in every year present in the data.
    pub exists_all_years: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub columns: Vec<SummaryColumn>,
}

fn level_key(x: f64) -> u64 {
    x.to_bits()
}

pub fn summary_statistics(records: &[BidRecord]) -> SummaryTable {
    let items = item_bidders(records);
    let all_years: BTreeSet<i32> = records.iter().map(|r| r.date.year()).collect();
    let mut levels: Vec<f64> = records.iter().map(|r| r.set_aside).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let columns = levels
        .into_iter()
        .map(|level| {
            let bids: Vec<&BidRecord> = records.iter().filter(|r| level_key(r.set_aside) == level_key(level)).collect();
            let its: Vec<&ItemBidders> = items.iter().filter(|i| level_key(i.set_aside) == level_key(level)).collect();
            let pool = |size: SizeClass| {
                bids.iter().filter(|r| r.vendor_type == size).map(|r| &r.vendor_id).collect::<BTreeSet<_>>().len()
            };
            let per_item = |f: fn(&ItemBidders) -> f64| its.iter().map(|i| f(i)).collect::<Vec<f64>>();
            let offers: Vec<f64> = bids.iter().map(|r| r.price_per_lb.dollars()).collect();
            let wins: Vec<f64> = its.iter().filter_map(|i| i.winning_price).collect();
            let years: BTreeSet<i32> = bids.iter().map(|r| r.date.year()).collect();
            SummaryColumn {
                set_aside: level,
                n_auctions: bids.iter().map(|r| r.auction_id.as_str()).collect::<BTreeSet<_>>().len(),
                n_items: its.len(),
                n_bids: bids.len(),
                small_pool: pool(SizeClass::Small),
                large_pool: pool(SizeClass::Large),
                small_bidders: Moments::of(&per_item(|i| f64::from(i.small))).expect("level has items"),
                large_bidders: Moments::of(&per_item(|i| f64::from(i.large))).expect("level has items"),
                offer_price: Moments::of(&offers).expect("level has bids"),
                winning_price: Moments::of(&wins),
                item_quantity: Moments::of(&per_item(|i| i.quantity_lbs as f64)).expect("level has items"),
                exists_all_years: years == all_years,
            }
        })
        .collect();
    SummaryTable { columns }
}

fn percent(level: f64) -> String {
    let pct = level * 100.0;
    if libm::fabs(pct - libm::round(pct)) < 1e-9 {
        format!("SA={}%", libm::round(pct) as i64)
    } else {
        format!("SA={pct:.2}%")
    }
}

impl SummaryTable {
    pub fn headers(&self) -> Vec<String> {
        self.columns.iter().map(|c| percent(c.set_aside)).collect()
    }

    /// Formatted cells, one row per label plus a parenthesized SD row under
    /// each average.
    pub fn rows(&self) -> Vec<(String, Vec<String>)> {
        let cells = |f: &dyn Fn(&SummaryColumn) -> String| self.columns.iter().map(f).collect::<Vec<_>>();
        let sd = |m: Option<Moments>, digits: usize| m.map_or("NA".to_string(), |m| format!("({:.*})", digits, m.sd));
        let avg = |m: Option<Moments>, digits: usize| m.map_or("NA".to_string(), |m| format!("{:.*}", digits, m.mean));
        let mut rows = Vec::new();
        let mut push = |label: &str, v: Vec<String>| rows.push((label.to_string(), v));
        push(TABLE1_ROWS[0], cells(&|c| c.n_auctions.to_string()));
        push(TABLE1_ROWS[1], cells(&|c| c.n_items.to_string()));
        push(TABLE1_ROWS[2], cells(&|c| c.n_bids.to_string()));
        push(TABLE1_ROWS[3], cells(&|c| c.small_pool.to_string()));
        push(TABLE1_ROWS[4], cells(&|c| c.large_pool.to_string()));
        type Pick = fn(&SummaryColumn) -> Option<Moments>;
        let stats: [(&str, Pick, usize); 5] = [
            (TABLE1_ROWS[5], |c| Some(c.small_bidders), 3),
            (TABLE1_ROWS[6], |c| Some(c.large_bidders), 3),
            (TABLE1_ROWS[7], |c| Some(c.offer_price), 3),
            (TABLE1_ROWS[8], |c| c.winning_price, 3),
            (TABLE1_ROWS[9], |c| Some(c.item_quantity), 0),
        ];
        for (label, pick, digits) in stats {
            push(label, cells(&|c| avg(pick(c), digits)));
            push("", cells(&|c| sd(pick(c), digits)));
        }
        push(TABLE1_ROWS[10], cells(&|c| if c.exists_all_years { "Yes" } else { "No" }.to_string()));
        rows
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub date: NaiveDate,
    pub small: u32,
    pub large: u32,
}

/// Active vendors at each auction date, a vendor being active from its first
/// to its last observed auction inclusive.
pub fn bidder_pool_timeline(records: &[BidRecord]) -> Vec<TimelinePoint> {
    let mut spans: BTreeMap<&VendorId, (NaiveDate, NaiveDate, SizeClass)> = BTreeMap::new();
    for r in records {
        let e = spans.entry(&r.vendor_id).or_insert((r.date, r.date, r.vendor_type));
        e.0 = e.0.min(r.date);
        e.1 = e.1.max(r.date);
    }
    let dates: BTreeSet<NaiveDate> = records.iter().map(|r| r.date).collect();
    dates
        .into_iter()
        .map(|d| {
            let mut p = TimelinePoint { date: d, small: 0, large: 0 };
            for &(first, last, size) in spans.values() {
                if first <= d && d <= last {
                    match size {
                        SizeClass::Small => p.small += 1,
                        SizeClass::Large => p.large += 1,
                    }
                }
            }
            p
        })
        .collect()
}

/// Quantities won by size class in one auction and product, in lbs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinShareCell {
    pub auction_id: String,
    pub product_code: ProductCode,
    pub set_aside: f64,
    pub total_lbs: u64,
    pub small_lbs: u64,
    pub large_lbs: u64,
    pub unawarded_lbs: u64,
}

/// Quantities won by size class over one set-aside level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinShareAggregate {
    pub set_aside: f64,
    pub total_lbs: u64,
    pub small_lbs: u64,
    pub large_lbs: u64,
    pub unawarded_lbs: u64,
}

fn share(part: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        part as f64 / total as f64
    }
}

impl WinShareCell {
    pub fn share(&self, size: SizeClass) -> f64 {
        share(if size == SizeClass::Small { self.small_lbs } else { self.large_lbs }, self.total_lbs)
    }

    pub fn unawarded_share(&self) -> f64 {
        share(self.unawarded_lbs, self.total_lbs)
    }
}

impl WinShareAggregate {
    pub fn share(&self, size: SizeClass) -> f64 {
        share(if size == SizeClass::Small { self.small_lbs } else { self.large_lbs }, self.total_lbs)
    }

    pub fn unawarded_share(&self) -> f64 {
        share(self.unawarded_lbs, self.total_lbs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinShareReport {
    pub cells: Vec<WinShareCell>,
    pub aggregate: Vec<WinShareAggregate>,
}

pub fn win_share_report(records: &[BidRecord]) -> WinShareReport {
    let mut cells: BTreeMap<(String, ProductCode), WinShareCell> = BTreeMap::new();
    for it in item_bidders(records) {
        let c = cells.entry((it.auction_id.clone(), it.product_code.clone())).or_insert_with(|| WinShareCell {
            auction_id: it.auction_id.clone(),
            product_code: it.product_code.clone(),
            set_aside: it.set_aside,
            total_lbs: 0,
            small_lbs: 0,
            large_lbs: 0,
            unawarded_lbs: 0,
        });
        c.total_lbs += it.quantity_lbs;
        match it.winner {
            Some((_, SizeClass::Small)) => c.small_lbs += it.quantity_lbs,
            Some((_, SizeClass::Large)) => c.large_lbs += it.quantity_lbs,
            None => c.unawarded_lbs += it.quantity_lbs,
        }
    }
    let cells: Vec<WinShareCell> = cells.into_values().collect();
    let mut agg: BTreeMap<u64, WinShareAggregate> = BTreeMap::new();
    for c in &cells {
        // nonnegative floats order like their bit patterns
        let a = agg.entry(level_key(c.set_aside)).or_insert(WinShareAggregate {
            set_aside: c.set_aside,
            total_lbs: 0,
            small_lbs: 0,
            large_lbs: 0,
            unawarded_lbs: 0,
        });
        a.total_lbs += c.total_lbs;
        a.small_lbs += c.small_lbs;
        a.large_lbs += c.large_lbs;
        a.unawarded_lbs += c.unawarded_lbs;
    }
    WinShareReport { cells, aggregate: agg.into_values().collect() }
}
