use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocation::{solve_allocation, AllocationProblem};
use crate::domain::{
    demand_from_lbs, Bid, Destination, Item, ItemId, Price, SetAsidePolicy, SizeClass, Solicitation, Vendor, VendorId,
};
use crate::econometrics::{UsdaPrice, WholesalePrice};
use crate::equilibrium::{solve_equilibrium, EquilibriumModel, EquilibriumSolution};

use super::config::{CostSpec, SimConfig, StrategyMode, VendorGroup};
use super::{BidRecord, SimError};

const STATES: [&str; 10] = ["CA", "GA", "IA", "IL", "NE", "NY", "OH", "PA", "TX", "WA"];

/// A validated configuration with its vendors and, in equilibrium mode, the
/// solved strategies for every set-aside level in use.
#[derive(Clone, Debug)]
pub struct Campaign<'a> {
    config: &'a SimConfig,
    vendors: Vec<Vendor>,
    equilibria: Vec<(f64, EquilibriumSolution)>,
}

fn vendor_id(size: SizeClass, k: u32) -> VendorId {
    let prefix = if size == SizeClass::Small { 'S' } else { 'L' };
    VendorId(format!("{prefix}{:02}", k + 1))
}

impl<'a> Campaign<'a> {
    pub fn new(config: &'a SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let pool = &config.vendor_pool;
        let mut vendors = Vec::new();
        for (size, group) in [(SizeClass::Small, &pool.small), (SizeClass::Large, &pool.large)] {
            for k in 0..group.count {
                let sdvosb = group.sdvosb_flags.get(k as usize).copied().unwrap_or(false);
                vendors.push(Vendor { vendor_id: vendor_id(size, k), size_class: size, sdvosb });
            }
        }
        vendors.sort_by(|a, b| a.vendor_id.cmp(&b.vendor_id));

        let mut equilibria = Vec::new();
        if let StrategyMode::EquilibriumModel { grid_size, tolerance } = config.strategy {
            let (CostSpec::Distribution(f1), CostSpec::Distribution(f2)) = (&pool.small.cost, &pool.large.cost) else {
                return Err(SimError::Unsupported("equilibrium strategies need cost distributions".into()));
            };
            let mut alphas: Vec<f64> = config.products.iter().flat_map(|p| p.alphas.iter().copied()).collect();
            alphas.sort_by(f64::total_cmp);
            alphas.dedup();
            for alpha in alphas {
                let model = EquilibriumModel::new(alpha, f1.clone(), f2.clone());
                let sol = solve_equilibrium(&model, grid_size, tolerance)
                    .map_err(|source| SimError::Equilibrium { alpha, source })?;
                equilibria.push((alpha, sol));
            }
        }
        Ok(Self { config, vendors, equilibria })
    }

    pub fn config(&self) -> &SimConfig {
        self.config
    }

    pub fn vendors(&self) -> &[Vendor] {
        &self.vendors
    }

    pub fn equilibrium(&self, alpha: f64) -> Option<&EquilibriumSolution> {
        self.equilibria.iter().find(|(a, _)| *a == alpha).map(|(_, s)| s)
    }

    pub fn equilibria(&self) -> &[(f64, EquilibriumSolution)] {
        &self.equilibria
    }

    pub fn auction_date(&self, index: u32) -> NaiveDate {
        let days = u64::from(index) * u64::from(self.config.auction_spacing_days);
        self.config.start_date.checked_add_days(Days::new(days)).expect("auction date in range")
    }

    fn group(&self, size: SizeClass) -> &VendorGroup {
        match size {
            SizeClass::Small => &self.config.vendor_pool.small,
            SizeClass::Large => &self.config.vendor_pool.large,
        }
    }

    fn bid_price(&self, size: SizeClass, alpha: f64, cost: f64) -> f64 {
        match self.config.strategy {
            StrategyMode::MarkupRule { small_markup, large_markup } => {
                let m = if size == SizeClass::Small { small_markup } else { large_markup };
                cost * (1.0 + m)
            }
            StrategyMode::ShadedRule { shade } => cost + shade * (self.group(size).cost.upper() - cost),
            StrategyMode::EquilibriumModel { .. } => {
                self.equilibrium(alpha).expect("solved for every configured alpha").bid(size, cost)
            }
        }
    }

    /// Bids of auction `index`, sorted by item then vendor. Each auction draws
    /// from its own stream of the master seed, so auctions may run in any order.
    pub fn auction(&self, index: u32) -> Result<Vec<BidRecord>, SimError> {
        let cfg = self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::from(index));

        let date = self.auction_date(index);
        // zero-padded to a common width so ids sort numerically
        let width = (cfg.n_auctions.max(1).ilog10() + 1).max(4) as usize;
        let auction_id = format!("A{:0width$}", index + 1);
        let solicitation_id = format!("SOL{:0width$}", index + 1);
        let years = date.year() - cfg.start_date.year();

        let mut items: Vec<Item> = Vec::new();
        let mut product_of: BTreeMap<ItemId, usize> = BTreeMap::new();
        let mut policies = Vec::new();
        let mut bids = Vec::new();
        let mut alphas = Vec::new();
        let mut sdvosb_fractions = Vec::new();

        for (pi, product) in cfg.products.iter().enumerate() {
            let included = rng.random::<f64>() < product.inclusion_prob;
            let alpha = product.alphas[rng.random_range(0..product.alphas.len())];
            let sdvosb = if rng.random::<f64>() < product.sdvosb_prob { product.sdvosb_fraction } else { 0.0 };
            alphas.push(alpha);
            sdvosb_fractions.push(sdvosb);
            if !included {
                continue;
            }
            let n_items = rng.random_range(product.items.min..=product.items.max);
            let first = items.len();
            for k in 0..n_items {
                let half = rng.random::<f64>() < product.half_load_prob;
                let state = STATES[rng.random_range(0..STATES.len())];
                let window = u64::from(rng.random_range(0..2u32));
                let start = date.checked_add_days(Days::new(30 + 14 * window)).expect("date in range");
                let item_id = ItemId(format!("{:02}-{:03}", pi + 1, k + 1));
                product_of.insert(item_id.clone(), pi);
                items.push(Item {
                    item_id,
                    solicitation_id: solicitation_id.as_str().into(),
                    product_code: product.product_code.clone(),
                    quantity_lbs: if half { product.truckload_lbs / 2 } else { product.truckload_lbs },
                    destination: Destination { city: String::new(), state: state.into(), zip: String::new() },
                    window_start: start,
                    window_end: start.checked_add_days(Days::new(13)).expect("date in range"),
                });
            }
            policies.push(SetAsidePolicy {
                applies_to: product.product_code.clone(),
                alpha,
                sdvosb_fraction: sdvosb,
            });
            for vendor in &self.vendors {
                let group = self.group(vendor.size_class);
                let joins = rng.random::<f64>() < group.participation;
                let u = rng.random::<f64>();
                // a full set-aside excludes large vendors
                if !joins || (vendor.size_class == SizeClass::Large && alpha >= 1.0) {
                    continue;
                }
                let bid = self.bid_price(vendor.size_class, alpha, group.cost.draw(u));
                let price = Price::from_dollars(bid)
                    .ok_or_else(|| SimError::InvalidConfig(format!("strategy produced an invalid bid {bid}")))?;
                for it in &items[first..] {
                    bids.push(Bid { vendor_id: vendor.vendor_id.clone(), item_id: it.item_id.clone(), price_per_lb: price });
                }
            }
        }

        let problem = AllocationProblem {
            solicitation: Solicitation {
                solicitation_id: solicitation_id.as_str().into(),
                auction_date: date,
                items,
                policies,
            },
            bids,
            vendors: self.vendors.clone(),
            capacities: Vec::new(),
            price_ceiling: BTreeMap::new(),
        };
        let result = solve_allocation(&problem)
            .map_err(|source| SimError::Allocation { auction_id: auction_id.clone(), source })?;

        let mut n_bidders: BTreeMap<&ItemId, u32> = BTreeMap::new();
        for b in &problem.bids {
            *n_bidders.entry(&b.item_id).or_default() += 1;
        }
        let sol = &problem.solicitation;
        let wholesale = cfg.wholesale.price(cfg.start_date, date.year(), date.month());
        let mut records = Vec::with_capacity(problem.bids.len());
        for b in &problem.bids {
            let item = sol.items.iter().find(|it| it.item_id == b.item_id).expect("bid on a listed item");
            let pi = product_of[&b.item_id];
            let product = &cfg.products[pi];
            let vendor = self.vendors.iter().find(|v| v.vendor_id == b.vendor_id).expect("known vendor");
            let total = sol.product_quantity(&item.product_code).expect("product present");
            records.push(BidRecord {
                auction_id: auction_id.clone(),
                date,
                solicitation_id: sol.solicitation_id.clone(),
                product_code: item.product_code.clone(),
                package_class: product.package_class.clone(),
                item_id: item.item_id.clone(),
                quantity_lbs: item.quantity_lbs,
                destination_state: item.destination.state.clone(),
                window_start: item.window_start,
                window_end: item.window_end,
                vendor_id: b.vendor_id.clone(),
                vendor_type: vendor.size_class,
                sdvosb: sdvosb_fractions[pi] > 0.0,
                price_per_lb: b.price_per_lb,
                won: result.awards.get(&b.item_id).is_some_and(|a| a.vendor_id == b.vendor_id),
                set_aside: alphas[pi],
                demand_mlbs: demand_from_lbs(total).million_lbs,
                n_bidders_item: n_bidders[&b.item_id],
                wholesale_price: wholesale,
                usda_ref_price: product.usda_ref_price * libm::pow(1.0 + cfg.usda_growth, f64::from(years)),
            });
        }
        records.sort_by(|a, b| (&a.item_id, &a.vendor_id).cmp(&(&b.item_id, &b.vendor_id)));
        Ok(records)
    }

    /// Monthly wholesale prices covering every auction month.
    pub fn wholesale_table(&self) -> Vec<WholesalePrice> {
        let cfg = self.config;
        let last = self.auction_date(cfg.n_auctions.saturating_sub(1));
        let mut out = Vec::new();
        let (mut y, mut m) = (cfg.start_date.year(), cfg.start_date.month());
        while (y, m) <= (last.year(), last.month()) {
            out.push(WholesalePrice { year: y, month: m, price_per_lb: cfg.wholesale.price(cfg.start_date, y, m) });
            (y, m) = if m == 12 { (y + 1, 1) } else { (y, m + 1) };
        }
        out
    }

    /// Annual USDA reference prices per product over the campaign's years.
    pub fn usda_table(&self) -> Vec<UsdaPrice> {
        let cfg = self.config;
        let (first, last) = (cfg.start_date.year(), self.auction_date(cfg.n_auctions.saturating_sub(1)).year());
        let mut out = Vec::new();
        for p in &cfg.products {
            for y in first..=last {
                out.push(UsdaPrice {
                    product_code: p.product_code.clone(),
                    year: y,
                    price_per_lb: p.usda_ref_price * libm::pow(1.0 + cfg.usda_growth, f64::from(y - first)),
                });
            }
        }
        out.sort_by(|a, b| (&a.product_code, a.year).cmp(&(&b.product_code, b.year)));
        out
    }
}

/// Runs every auction in order. Output is sorted by auction, item and vendor.
pub fn simulate_campaign(config: &SimConfig) -> Result<Vec<BidRecord>, SimError> {
    let campaign = Campaign::new(config)?;
    let mut records = Vec::new();
    for index in 0..config.n_auctions {
        records.extend(campaign.auction(index)?);
    }
    Ok(records)
}
