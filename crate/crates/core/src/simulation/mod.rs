//! Synthetic auction campaigns and their descriptive statistics.
//!
//! Every auction draws from its own ChaCha8 stream (`set_stream(index)`) of
//! the master seed, so a campaign is reproducible bit for bit and auctions can
//! be generated in parallel and merged in id order.

mod campaign;
mod config;
pub(crate) mod record;
mod summary;

use alloc::string::String;
use core::fmt;

pub use campaign::{simulate_campaign, Campaign};
pub use config::{CostSpec, ItemCount, ProductSpec, SimConfig, StrategyMode, VendorGroup, VendorPool, WholesaleSeries};
pub use record::BidRecord;
pub use summary::{
    bidder_pool_timeline, item_bidders, summary_statistics, win_share_report, ItemBidders, Moments, SummaryColumn,
    SummaryTable, TimelinePoint, WinShareAggregate, WinShareCell, WinShareReport, TABLE1_ROWS,
};

use crate::allocation::AllocationError;
use crate::equilibrium::EquilibriumError;

#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    InvalidConfig(String),
    Unsupported(String),
    Equilibrium { alpha: f64, source: EquilibriumError },
    Allocation { auction_id: String, source: AllocationError },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidConfig(m) => write!(f, "invalid simulation config: {m}"),
            SimError::Unsupported(m) => write!(f, "unsupported configuration: {m}"),
            SimError::Equilibrium { alpha, source } => write!(f, "equilibrium at alpha {alpha}: {source}"),
            SimError::Allocation { auction_id, source } => write!(f, "allocation of auction {auction_id}: {source}"),
        }
    }
}

impl core::error::Error for SimError {}
