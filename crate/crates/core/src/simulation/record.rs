use alloc::string::String;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::{ItemId, PackageClass, Price, ProductCode, SizeClass, SolicitationId, VendorId};

/// One sealed bid on one item, with the covariates the regressions use.
///
/// Field order is the canonical bids-file column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidRecord {
    pub auction_id: String,
    pub date: NaiveDate,
    pub solicitation_id: SolicitationId,
    pub product_code: ProductCode,
    pub package_class: PackageClass,
    pub item_id: ItemId,
    pub quantity_lbs: u64,
    pub destination_state: String,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub vendor_id: VendorId,
    pub vendor_type: SizeClass,
    /// An SDVOSB sub-quota applies to the item's product.
    pub sdvosb: bool,
    pub price_per_lb: Price,
    pub won: bool,
    pub set_aside: f64,
    pub demand_mlbs: f64,
    pub n_bidders_item: u32,
    pub wholesale_price: f64,
    pub usda_ref_price: f64,
}

impl BidRecord {
    /// Items are identified by auction and item id together.
    pub fn item_key(&self) -> (&str, &ItemId) {
        (&self.auction_id, &self.item_id)
    }
}
