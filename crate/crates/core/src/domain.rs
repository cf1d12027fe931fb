//! Auction domain model and set-aside quota arithmetic.
//!
//! Quantities are integer pounds and prices are fixed-point dollars per pound
//! with four fractional digits, so quota and cost arithmetic is exact.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// USDA product code, e.g. `BEEF FINE GROUND FRZ CTN-40 LB`.
    ProductCode
);
id_type!(ItemId);
id_type!(VendorId);
id_type!(SolicitationId);
id_type!(
    /// Package size class such as `CTN-40` or `PKG-40/1`.
    PackageClass
);

/// Fixed-point price in ten-thousandths of a dollar per pound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Price(u64);

pub const PRICE_SCALE: u64 = 10_000;

impl Price {
    pub const fn from_ten_thousandths(units: u64) -> Self {
        Price(units)
    }

    pub const fn ten_thousandths(self) -> u64 {
        self.0
    }

    /// Rounds to the nearest 1/10,000 dollar. `None` for non-finite or negative input.
    pub fn from_dollars(x: f64) -> Option<Self> {
        if !x.is_finite() || x < 0.0 {
            return None;
        }
        let units = libm::round(x * PRICE_SCALE as f64);
        if units > u64::MAX as f64 {
            return None;
        }
        Some(Price(units as u64))
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / PRICE_SCALE as f64
    }

    /// Cost of `lbs` pounds at this price.
    pub fn cost_of(self, lbs: u64) -> Money {
        Money(self.0 * lbs)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:04}", self.0 / PRICE_SCALE, self.0 % PRICE_SCALE)
    }
}

impl TryFrom<f64> for Price {
    type Error = DomainError;

    fn try_from(x: f64) -> Result<Self, Self::Error> {
        Price::from_dollars(x).ok_or(DomainError::InvalidPrice(x.to_string()))
    }
}

impl From<Price> for f64 {
    fn from(p: Price) -> f64 {
        p.dollars()
    }
}

impl FromStr for Price {
    type Err = DomainError;

    /// Exact decimal parse; digits past the fourth decimal are rounded half-up.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DomainError::InvalidPrice(s.to_string());
        let t = s.trim();
        if t.is_empty() || t.starts_with('-') || t.starts_with('+') {
            return Err(bad());
        }
        let (int_part, frac_part) = match t.split_once('.') {
            Some((a, b)) => (a, b),
            None => (t, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let all_digits = |x: &str| x.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) {
            return Err(bad());
        }
        let whole: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
        let mut frac: u64 = 0;
        for (i, b) in frac_part.bytes().take(4).enumerate() {
            frac += u64::from(b - b'0') * 10u64.pow(3 - i as u32);
        }
        if let Some(b) = frac_part.bytes().nth(4) {
            if b >= b'5' {
                frac += 1;
            }
        }
        whole
            .checked_mul(PRICE_SCALE)
            .and_then(|w| w.checked_add(frac))
            .map(Price)
            .ok_or_else(bad)
    }
}

/// Currency amount in ten-thousandths of a dollar.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Money(pub u64);

impl Money {
    pub fn dollars(self) -> f64 {
        self.0 as f64 / PRICE_SCALE as f64
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:04}", self.0 / PRICE_SCALE, self.0 % PRICE_SCALE)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SizeClass {
    Small,
    Large,
}

impl SizeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SizeClass::Small => "SMALL",
            SizeClass::Large => "LARGE",
        }
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SizeClass {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SMALL" => Ok(SizeClass::Small),
            "LARGE" => Ok(SizeClass::Large),
            _ => Err(DomainError::InvalidSizeClass(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub product_code: ProductCode,
    pub description: String,
    pub package_size_class: PackageClass,
    /// Annual USDA reference price, dollars per lb.
    pub reference_price_usda: f64,
    pub truckload_lbs: u64,
}

impl Product {
    /// Product code with the package size stripped. Two products that differ
    /// only in packaging share this key.
    pub fn analysis_group_key(&self) -> String {
        analysis_group_key(&self.product_code, &self.package_size_class)
    }
}

/// Strips a trailing package class (and any separator and `LB` unit suffix)
/// from a product code.
pub fn analysis_group_key(code: &ProductCode, package: &PackageClass) -> String {
    let sep = |c: char| c == ' ' || c == '-' || c == '_';
    let mut s = code.as_str().trim_end();
    if let Some(rest) = s.strip_suffix("LB") {
        s = rest.trim_end_matches(sep);
    }
    let pkg = package.as_str().trim();
    if !pkg.is_empty() {
        if let Some(rest) = s.strip_suffix(pkg) {
            s = rest;
        }
    }
    s.trim_end_matches(sep).to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetAsidePolicy {
    pub applies_to: ProductCode,
    /// Fraction of the product's solicited quantity reserved for small vendors.
    pub alpha: f64,
    /// Service-disabled veteran-owned sub-quota; SDVOSB awards count toward both tallies.
    #[serde(default)]
    pub sdvosb_fraction: f64,
}

impl SetAsidePolicy {
    pub fn new(applies_to: impl Into<ProductCode>, alpha: f64) -> Self {
        Self { applies_to: applies_to.into(), alpha, sdvosb_fraction: 0.0 }
    }
}


#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Destination {
    pub city: String,
    pub state: String,
    pub zip: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: ItemId,
    pub solicitation_id: SolicitationId,
    pub product_code: ProductCode,
    pub quantity_lbs: u64,
    #[serde(default)]
    pub destination: Destination,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
}

impl Item {
    pub fn window(&self) -> WindowKey {
        WindowKey::Exact { start: self.window_start, end: self.window_end }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solicitation {
    pub solicitation_id: SolicitationId,
    pub auction_date: NaiveDate,
    pub items: Vec<Item>,
    pub policies: Vec<SetAsidePolicy>,
}

impl Solicitation {
    pub fn policy(&self, product: &ProductCode) -> Option<&SetAsidePolicy> {
        self.policies.iter().find(|p| &p.applies_to == product)
    }

    /// Distinct product codes in item order of first appearance.
    pub fn products(&self) -> Vec<ProductCode> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for it in &self.items {
            if seen.insert(&it.product_code) {
                out.push(it.product_code.clone());
            }
        }
        out
    }

    /// Total solicited pounds of `product`, or an error if no item carries it.
    pub fn product_quantity(&self, product: &ProductCode) -> Result<u64, DomainError> {
        let mut found = false;
        let mut total = 0u64;
        for it in self.items.iter().filter(|it| &it.product_code == product) {
            found = true;
            total += it.quantity_lbs;
        }
        if found {
            Ok(total)
        } else {
            Err(DomainError::UnknownProduct(product.clone()))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vendor {
    pub vendor_id: VendorId,
    pub size_class: SizeClass,
    #[serde(default)]
    pub sdvosb: bool,
}

impl Vendor {
    /// Whether awards to this vendor count toward the small-business quota.
    /// SDVOSB vendors are small businesses by definition.
    pub fn counts_as_small(&self) -> bool {
        self.size_class == SizeClass::Small || self.sdvosb
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub vendor_id: VendorId,
    pub item_id: ItemId,
    pub price_per_lb: Price,
}

/// Delivery-window bucket a capacity constraint applies to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKey {
    /// Items whose window is exactly this `(start, end)` pair.
    Exact { start: NaiveDate, end: NaiveDate },
    /// Every delivery window of the product(s).
    Any,
}

impl WindowKey {
    pub fn covers(&self, item: &Item) -> bool {
        match self {
            WindowKey::Any => true,
            WindowKey::Exact { start, end } => *start == item.window_start && *end == item.window_end,
        }
    }
}

/// Maximum quantity a vendor will supply for some products and window bucket.
///
/// A constraint naming several products couples them, and they are then
/// solved jointly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConstraint {
    pub vendor_id: VendorId,
    pub products: Vec<ProductCode>,
    pub window_key: WindowKey,
    pub max_quantity_lbs: u64,
}

impl CapacityConstraint {
    pub fn applies_to(&self, vendor: &VendorId, item: &Item) -> bool {
        &self.vendor_id == vendor && self.products.contains(&item.product_code) && self.window_key.covers(item)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainError {
    UnknownProduct(ProductCode),
    InvalidPrice(String),
    InvalidSizeClass(String),
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainError::UnknownProduct(p) => write!(f, "product `{p}` does not appear in the solicitation"),
            DomainError::InvalidPrice(s) => write!(f, "invalid price `{s}`"),
            DomainError::InvalidSizeClass(s) => write!(f, "invalid vendor size class `{s}` (expected SMALL or LARGE)"),
        }
    }
}

impl core::error::Error for DomainError {}

/// Set-aside quota of `product` in pounds: alpha times the product's total
/// solicited quantity. Not rounded to whole items.
pub fn compute_setaside_quota(solicitation: &Solicitation, product: &ProductCode) -> Result<f64, DomainError> {
    let total = solicitation.product_quantity(product)?;
    let alpha = solicitation.policy(product).map_or(0.0, |p| p.alpha);
    Ok(alpha * total as f64)
}

/// SDVOSB sub-quota of `product` in pounds.
pub fn compute_sdvosb_quota(solicitation: &Solicitation, product: &ProductCode) -> Result<f64, DomainError> {
    let total = solicitation.product_quantity(product)?;
    let frac = solicitation.policy(product).map_or(0.0, |p| p.sdvosb_fraction);
    Ok(frac * total as f64)
}

/// Smallest whole-pound award that satisfies a fractional quota.
pub fn quota_requirement_lbs(quota_lbs: f64) -> u64 {
    // quotas are alpha * integer; absorb representation error of alpha
    let r = libm::ceil(quota_lbs - 1e-6);
    if r <= 0.0 {
        0
    } else {
        r as u64
    }
}

/// Range of product demand observed in the USDA beef data, million lbs.
pub const DEMAND_REFERENCE_RANGE: (f64, f64) = (0.038, 13.272);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemandLevel {
    pub million_lbs: f64,
    /// False when the value falls outside [`DEMAND_REFERENCE_RANGE`]; a data-quality warning only.
    pub in_reference_range: bool,
}

/// Total solicited quantity of `product` in million pounds.
pub fn demand_level(solicitation: &Solicitation, product: &ProductCode) -> Result<DemandLevel, DomainError> {
    let total = solicitation.product_quantity(product)?;
    Ok(demand_from_lbs(total))
}

pub fn demand_from_lbs(total_lbs: u64) -> DemandLevel {
    let million_lbs = total_lbs as f64 / 1_000_000.0;
    let (lo, hi) = DEMAND_REFERENCE_RANGE;
    DemandLevel { million_lbs, in_reference_range: (lo..=hi).contains(&million_lbs) }
}

/// How strictly set-aside fractions are checked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    /// Only the observed levels 0, 0.5 and 1 are accepted.
    Replication,
    /// Any fraction in [0, 1].
    #[default]
    Research,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DuplicateItemId(ItemId),
    MissingPolicy(ProductCode),
    DuplicatePolicy(ProductCode),
    NonPositiveQuantity(ItemId),
    InvertedWindow(ItemId),
    ForeignItem { item: ItemId, solicitation: SolicitationId },
    FractionOutOfRange { product: ProductCode, value: f64 },
    NonReplicationLevel { product: ProductCode, alpha: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateItemId(id) => write!(f, "duplicate item_id `{id}`"),
            Violation::MissingPolicy(p) => write!(f, "product `{p}` has no set-aside policy"),
            Violation::DuplicatePolicy(p) => write!(f, "product `{p}` has more than one set-aside policy"),
            Violation::NonPositiveQuantity(id) => write!(f, "item `{id}` has nonpositive quantity"),
            Violation::InvertedWindow(id) => write!(f, "item `{id}` has window_start after window_end"),
            Violation::ForeignItem { item, solicitation } => {
                write!(f, "item `{item}` belongs to solicitation `{solicitation}`")
            }
            Violation::FractionOutOfRange { product, value } => {
                write!(f, "set-aside fraction {value} for `{product}` is outside [0, 1]")
            }
            Violation::NonReplicationLevel { product, alpha } => {
                write!(f, "set-aside {alpha} for `{product}` is not one of 0, 0.5, 1")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_solicitation(solicitation: &Solicitation) -> ValidationReport {
    validate_solicitation_with(solicitation, PolicyMode::Research)
}

pub fn validate_solicitation_with(solicitation: &Solicitation, mode: PolicyMode) -> ValidationReport {
    let mut violations = Vec::new();
    let mut ids = BTreeSet::new();
    for it in &solicitation.items {
        if !ids.insert(&it.item_id) {
            violations.push(Violation::DuplicateItemId(it.item_id.clone()));
        }
        if it.quantity_lbs == 0 {
            violations.push(Violation::NonPositiveQuantity(it.item_id.clone()));
        }
        if it.window_start > it.window_end {
            violations.push(Violation::InvertedWindow(it.item_id.clone()));
        }
        if it.solicitation_id != solicitation.solicitation_id {
            violations.push(Violation::ForeignItem {
                item: it.item_id.clone(),
                solicitation: it.solicitation_id.clone(),
            });
        }
    }
    let mut policy_count: BTreeMap<&ProductCode, usize> = BTreeMap::new();
    for p in &solicitation.policies {
        *policy_count.entry(&p.applies_to).or_default() += 1;
        for value in [p.alpha, p.sdvosb_fraction] {
            if !(0.0..=1.0).contains(&value) {
                violations.push(Violation::FractionOutOfRange { product: p.applies_to.clone(), value });
            }
        }
        if mode == PolicyMode::Replication && ![0.0, 0.5, 1.0].contains(&p.alpha) {
            violations.push(Violation::NonReplicationLevel { product: p.applies_to.clone(), alpha: p.alpha });
        }
    }
    for (product, n) in &policy_count {
        if *n > 1 {
            violations.push(Violation::DuplicatePolicy((*product).clone()));
        }
    }
    for product in solicitation.products() {
        if !policy_count.contains_key(&product) {
            violations.push(Violation::MissingPolicy(product));
        }
    }
    ValidationReport { violations }
}
