use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::{PackageClass, ProductCode};
use crate::equilibrium::{ValueDistribution, DEFAULT_GRID_SIZE, DEFAULT_TOLERANCE};

use super::SimError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n_auctions: u32,
    pub start_date: NaiveDate,
    /// Days between consecutive auctions.
    pub auction_spacing_days: u32,
    pub products: Vec<ProductSpec>,
    pub vendor_pool: VendorPool,
    pub strategy: StrategyMode,
    pub wholesale: WholesaleSeries,
    /// Annual growth of every product's USDA reference price.
    #[serde(default)]
    pub usda_growth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSpec {
    pub product_code: ProductCode,
    pub package_class: PackageClass,
    /// Set-aside fractions; each auction draws one uniformly.
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub sdvosb_fraction: f64,
    /// Chance a solicitation of the product carries the SDVOSB sub-quota.
    #[serde(default = "one")]
    pub sdvosb_prob: f64,
    pub truckload_lbs: u64,
    /// Items per auction, drawn uniformly from `[min, max]`.
    pub items: ItemCount,
    /// Chance an item is a half truckload.
    #[serde(default)]
    pub half_load_prob: f64,
    /// Chance the product is solicited in a given auction.
    #[serde(default = "one")]
    pub inclusion_prob: f64,
    /// USDA reference price in the campaign's first year, dollars per lb.
    pub usda_ref_price: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemCount {
    pub min: u32,
    pub max: u32,
}

/// A fixed cost (a bare number) or a distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Fixed(f64),
    Distribution(ValueDistribution),
}

impl CostSpec {
    pub(crate) fn draw(&self, u: f64) -> f64 {
        match self {
            CostSpec::Fixed(c) => *c,
            CostSpec::Distribution(d) => d.quantile(u),
        }
    }

    /// Highest possible cost.
    pub(crate) fn upper(&self) -> f64 {
        match self {
            CostSpec::Fixed(c) => *c,
            CostSpec::Distribution(d) => d.support().1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VendorGroup {
    pub count: u32,
    pub participation: f64,
    pub cost: CostSpec,
    /// SDVOSB status by vendor index; missing entries are `false`.
    #[serde(default)]
    pub sdvosb_flags: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VendorPool {
    pub small: VendorGroup,
    pub large: VendorGroup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyMode {
    /// Two small and one large bidder per market play the solved equilibrium.
    EquilibriumModel {
        #[serde(default = "grid_size")]
        grid_size: usize,
        #[serde(default = "tolerance")]
        tolerance: f64,
    },
    /// `bid = cost (1 + m)` with `m` per size class.
    MarkupRule { small_markup: f64, large_markup: f64 },
    /// `bid = cost + shade (v_hi - cost)`.
    ShadedRule { shade: f64 },
}

fn grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

fn tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

/// `base + drift * years + amplitude * sin(2 pi (month - 1) / 12)`, years
/// counted from the campaign's first month.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WholesaleSeries {
    pub base: f64,
    pub drift_per_year: f64,
    pub seasonal_amplitude: f64,
}

impl WholesaleSeries {
    pub fn price(&self, start: NaiveDate, year: i32, month: u32) -> f64 {
        use chrono::Datelike;
        let months = (year - start.year()) * 12 + month as i32 - start.month() as i32;
        let seasonal = libm::sin(core::f64::consts::TAU * f64::from(month - 1) / 12.0);
        self.base + self.drift_per_year * f64::from(months) / 12.0 + self.seasonal_amplitude * seasonal
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.products.is_empty() {
            return bad("at least one product is required".into());
        }
        if self.auction_spacing_days == 0 && self.n_auctions > 1 {
            return bad("auction_spacing_days must be positive".into());
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        for (k, p) in self.products.iter().enumerate() {
            if self.products[..k].iter().any(|q| q.product_code == p.product_code) {
                return bad(format!("product `{}` listed twice", p.product_code));
            }
            if p.alphas.is_empty() || !p.alphas.iter().all(|&a| prob(a)) {
                return bad(format!("product `{}`: alphas must be a nonempty list in [0, 1]", p.product_code));
            }
            if !prob(p.sdvosb_fraction) || !prob(p.sdvosb_prob) || !prob(p.half_load_prob) || !prob(p.inclusion_prob) {
                return bad(format!("product `{}`: fractions and probabilities must lie in [0, 1]", p.product_code));
            }
            if p.truckload_lbs < 2 || p.items.min > p.items.max || p.items.max == 0 {
                return bad(format!("product `{}`: needs truckload_lbs >= 2 and 1 <= max items, min <= max", p.product_code));
            }
            if !(p.usda_ref_price > 0.0) {
                return bad(format!("product `{}`: usda_ref_price must be positive", p.product_code));
            }
        }
        for (name, g) in [("small", &self.vendor_pool.small), ("large", &self.vendor_pool.large)] {
            if !prob(g.participation) {
                return bad(format!("{name} participation {} outside [0, 1]", g.participation));
            }
            match &g.cost {
                CostSpec::Fixed(c) if !(c.is_finite() && *c > 0.0) => {
                    return bad(format!("{name} fixed cost must be positive"));
                }
                CostSpec::Distribution(d) => {
                    d.validate().map_err(|m| SimError::InvalidConfig(format!("{name} cost: {m}")))?;
                    if d.support().0 < 0.0 {
                        return bad(format!("{name} cost support must be nonnegative"));
                    }
                }
                CostSpec::Fixed(_) => {}
            }
            if g.sdvosb_flags.len() > g.count as usize {
                return bad(format!("{name} sdvosb_flags longer than the vendor count"));
            }
        }
        if self.vendor_pool.large.sdvosb_flags.iter().any(|&f| f) {
            return bad("SDVOSB vendors are small businesses; large flags must be false".into());
        }
        if self.vendor_pool.small.count + self.vendor_pool.large.count == 0 {
            return bad("vendor pool is empty".into());
        }
        match self.strategy {
            StrategyMode::MarkupRule { small_markup, large_markup } => {
                if !(small_markup >= 0.0 && large_markup >= 0.0) {
                    return bad("markups must be nonnegative".into());
                }
            }
            StrategyMode::ShadedRule { shade } => {
                if !prob(shade) {
                    return bad("shade must lie in [0, 1]".into());
                }
            }
            StrategyMode::EquilibriumModel { .. } => {
                let pool = &self.vendor_pool;
                if pool.small.count != 2 || pool.large.count != 1 || pool.small.participation != 1.0
                    || pool.large.participation != 1.0
                {
                    return Err(SimError::Unsupported(format!(
                        "equilibrium strategies need exactly 2 small and 1 large bidder in every market, \
                         got pools of {} small and {} large with participation {} and {}",
                        pool.small.count, pool.large.count, pool.small.participation, pool.large.participation
                    )));
                }
                if !matches!(pool.small.cost, CostSpec::Distribution(_)) || !matches!(pool.large.cost, CostSpec::Distribution(_)) {
                    return Err(SimError::Unsupported("equilibrium strategies need cost distributions".into()));
                }
            }
        }
        Ok(())
    }

    /// A market shaped like the USDA ground-beef program: 128 auctions, nine
    /// products, 14 small and 5 large vendors.
    pub fn beef_program(seed: u64) -> Self {
        let product = |code: &str, pkg: &str, alphas: &[f64], load: u64, items: (u32, u32), incl: f64, usda: f64| ProductSpec {
            product_code: code.into(),
            package_class: pkg.into(),
            alphas: alphas.to_vec(),
            sdvosb_fraction: 0.0,
            sdvosb_prob: 0.35,
            truckload_lbs: load,
            items: ItemCount { min: items.0, max: items.1 },
            half_load_prob: 0.04,
            inclusion_prob: incl,
            usda_ref_price: usda,
        };
        // four product groups, each sold in two or three package classes
        let mut products = vec![
            product("BEEF FINE GROUND FRZ CTN-40 LB", "CTN-40", &[0.5, 0.5, 0.5, 0.0], 40_000, (4, 18), 0.9, 2.55),
            product("BEEF FINE GROUND FRZ PKG-40/1 LB", "PKG-40/1", &[0.5, 0.5, 0.0], 40_000, (2, 12), 0.7, 2.60),
            product("BEEF FINE GROUND FRZ CTN-42 LB", "CTN-42", &[0.5, 0.0, 1.0], 42_000, (1, 5), 0.3, 2.55),
            product("BEEF PATTIES 100% FRZ CTN-40 LB", "CTN-40", &[0.5, 0.0], 40_000, (2, 10), 0.6, 2.85),
            product("BEEF PATTIES 100% FRZ CTN-38 LB", "CTN-38", &[0.5, 1.0], 38_000, (1, 6), 0.4, 2.90),
            product("BEEF FINE GROUND LFT FRZ CTN-42 LB", "CTN-42", &[0.5, 0.0, 1.0], 42_000, (1, 5), 0.3, 2.70),
            product("BEEF FINE GROUND LFT FRZ PKG-40/1 LB", "PKG-40/1", &[1.0, 0.5], 40_000, (1, 3), 0.25, 2.75),
            product("BEEF CRUMBLES FRZ CTN-38 LB", "CTN-38", &[0.0, 0.5], 38_000, (1, 4), 0.3, 3.20),
            product("BEEF CRUMBLES FRZ CTN-40 LB", "CTN-40", &[1.0, 0.0], 40_000, (1, 3), 0.2, 3.25),
        ];
        products[0].sdvosb_fraction = 0.1;
        products[1].sdvosb_fraction = 0.1;
        SimConfig {
            seed,
            n_auctions: 128,
            start_date: NaiveDate::from_ymd_opt(2014, 1, 7).expect("valid date"),
            auction_spacing_days: 14,
            products,
            vendor_pool: VendorPool {
                small: VendorGroup {
                    count: 14,
                    participation: 0.45,
                    cost: CostSpec::Distribution(ValueDistribution::uniform(1.9, 3.1)),
                    sdvosb_flags: vec![false, false, true, false, false, false, true],
                },
                large: VendorGroup {
                    count: 5,
                    participation: 0.35,
                    cost: CostSpec::Distribution(ValueDistribution::uniform(1.8, 2.9)),
                    sdvosb_flags: Vec::new(),
                },
            },
            strategy: StrategyMode::MarkupRule { small_markup: 0.06, large_markup: 0.04 },
            wholesale: WholesaleSeries { base: 2.1, drift_per_year: 0.04, seasonal_amplitude: 0.08 },
            usda_growth: 0.02,
        }
    }

    /// Two small and one large bidder per market, costs uniform on `[lo, hi]`,
    /// equilibrium strategies; one product with the given set-aside fractions.
    pub fn equilibrium_market(seed: u64, n_auctions: u32, alphas: &[f64], items: u32, lo: f64, hi: f64) -> Self {
        let cost = CostSpec::Distribution(ValueDistribution::uniform(lo, hi));
        SimConfig {
            seed,
            n_auctions,
            start_date: NaiveDate::from_ymd_opt(2015, 1, 6).expect("valid date"),
            auction_spacing_days: 7,
            products: vec![ProductSpec {
                product_code: "BEEF FINE GROUND FRZ CTN-40 LB".into(),
                package_class: "CTN-40".into(),
                alphas: alphas.to_vec(),
                sdvosb_fraction: 0.0,
                sdvosb_prob: 1.0,
                truckload_lbs: 40_000,
                items: ItemCount { min: items, max: items },
                half_load_prob: 0.0,
                inclusion_prob: 1.0,
                usda_ref_price: 2.5,
            }],
            vendor_pool: VendorPool {
                small: VendorGroup { count: 2, participation: 1.0, cost: cost.clone(), sdvosb_flags: Vec::new() },
                large: VendorGroup { count: 1, participation: 1.0, cost, sdvosb_flags: Vec::new() },
            },
            strategy: StrategyMode::EquilibriumModel { grid_size: DEFAULT_GRID_SIZE, tolerance: DEFAULT_TOLERANCE },
            wholesale: WholesaleSeries { base: 2.1, drift_per_year: 0.04, seasonal_amplitude: 0.08 },
            usda_growth: 0.02,
        }
    }
}
