//! Winner determination for one solicitation.
//!
//! Items go to bidders under a lexicographic order of objectives:
//!
//! 1. maximize the total awarded quantity;
//! 2. maximize small-business quota credit, `sum_p min(small_p, quota_p)`,
//!    which enforces `small_p >= min(quota_p, S*_p)` where `S*_p` is the
//!    largest small-vendor quantity attainable at the phase-1 optimum;
//! 3. the same for the SDVOSB sub-quota (SDVOSB vendors count toward both);
//! 4. minimize total cost.
//!
//! Remaining ties go to the award vector that is smallest when items are
//! read in ascending `item_id` order and each award is ranked by `vendor_id`
//! (unawarded sorts last).
//!
//! Products are solved independently unless a capacity constraint names more
//! than one product, in which case the coupled products form one component.

mod oracle;
mod problem;
mod search;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{
    Bid, CapacityConstraint, ItemId, Money, Price, ProductCode, Solicitation, ValidationReport, Vendor, VendorId,
};

pub use oracle::{brute_force_allocation, ORACLE_MAX_ITEMS_PER_PRODUCT, ORACLE_MAX_VENDORS_PER_PRODUCT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationProblem {
    pub solicitation: Solicitation,
    pub bids: Vec<Bid>,
    pub vendors: Vec<Vendor>,
    #[serde(default)]
    pub capacities: Vec<CapacityConstraint>,
    /// Optional per-product price ceiling; bids above it are dropped before solving.
    #[serde(default)]
    pub price_ceiling: BTreeMap<ProductCode, Price>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Award {
    pub vendor_id: VendorId,
    pub price_per_lb: Price,
    pub quantity_lbs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotaReport {
    pub product_code: ProductCode,
    pub quota_lbs: f64,
    /// Whole-pound requirement implied by `quota_lbs`.
    pub required_lbs: u64,
    pub awarded_lbs: u64,
    pub quota_met: bool,
    /// The quota could not be met at the maximal awarded quantity and was lowered.
    pub relaxed: bool,
}

/// Objective values reached in each phase for one independently solved component.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub products: Vec<ProductCode>,
    pub awarded_lbs: u64,
    pub small_credit_lbs: u64,
    pub sdvosb_credit_lbs: u64,
    pub total_cost: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub awards: BTreeMap<ItemId, Award>,
    pub unawarded: Vec<ItemId>,
    pub total_cost: Money,
    pub quota_report: Vec<QuotaReport>,
    pub sdvosb_report: Vec<QuotaReport>,
    pub lexicographic_trace: Vec<PhaseTrace>,
}

impl AllocationResult {
    pub fn awarded_lbs_for(&self, vendor: &VendorId) -> u64 {
        self.awards.values().filter(|a| &a.vendor_id == vendor).map(|a| a.quantity_lbs).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductFeasibility {
    pub product_code: ProductCode,
    /// Largest awardable quantity of the product's component (the product
    /// itself unless capacities couple it to others).
    pub max_awardable_lbs: u64,
    /// Largest small-vendor quantity of this product at that awarded quantity.
    pub max_small_lbs: u64,
    pub quota_lbs: f64,
    pub required_lbs: u64,
    pub attainable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub products: Vec<ProductFeasibility>,
}

/// Size limits of the exact solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverLimits {
    pub max_items: usize,
    pub max_vendors: usize,
    pub max_nodes: u64,
}

impl Default for SolverLimits {
    fn default() -> Self {
        Self { max_items: 64, max_vendors: 32, max_nodes: 50_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AllocationError {
    Invalid(ValidationReport),
    UnknownItem(ItemId),
    UnknownVendor(VendorId),
    DuplicateVendor(VendorId),
    DuplicateBid { vendor: VendorId, item: ItemId },
    InstanceTooLarge { products: Vec<ProductCode>, items: usize, vendors: usize, max_items: usize, max_vendors: usize },
    SearchLimitExceeded { products: Vec<ProductCode>, max_nodes: u64 },
    OracleBoundExceeded { product: ProductCode, items: usize, vendors: usize },
}

impl fmt::Display for AllocationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocationError::Invalid(r) => write!(f, "invalid solicitation: {r}"),
            AllocationError::UnknownItem(i) => write!(f, "bid references unknown item `{i}`"),
            AllocationError::UnknownVendor(v) => write!(f, "bid or capacity references unknown vendor `{v}`"),
            AllocationError::DuplicateVendor(v) => write!(f, "vendor `{v}` listed more than once"),
            AllocationError::DuplicateBid { vendor, item } => {
                write!(f, "vendor `{vendor}` has more than one bid on item `{item}`")
            }
            AllocationError::InstanceTooLarge { products, items, vendors, max_items, max_vendors } => write!(
                f,
                "instance too large: component {products:?} has {items} items and {vendors} vendors; \
                 the exact solver is bounded at {max_items} items and {max_vendors} vendors"
            ),
            AllocationError::SearchLimitExceeded { products, max_nodes } => {
                write!(f, "instance too large: search over {products:?} exceeded {max_nodes} nodes")
            }
            AllocationError::OracleBoundExceeded { product, items, vendors } => write!(
                f,
                "instance exceeds brute-force bound for `{product}`: {items} items, {vendors} vendors \
                 (limit {ORACLE_MAX_ITEMS_PER_PRODUCT} items, {ORACLE_MAX_VENDORS_PER_PRODUCT} vendors)"
            ),
        }
    }
}

impl core::error::Error for AllocationError {}

pub fn solve_allocation(problem: &AllocationProblem) -> Result<AllocationResult, AllocationError> {
    solve_allocation_with(problem, SolverLimits::default())
}

pub fn solve_allocation_with(
    problem: &AllocationProblem,
    limits: SolverLimits,
) -> Result<AllocationResult, AllocationError> {
    let prepared = problem::Prepared::new(problem, false)?;
    solve_prepared(&prepared, limits)
}

/// Solves every product as one joint component. Agrees with
/// [`solve_allocation`] whenever no constraint couples products.
pub fn solve_allocation_joint(problem: &AllocationProblem) -> Result<AllocationResult, AllocationError> {
    let prepared = problem::Prepared::new(problem, true)?;
    solve_prepared(&prepared, SolverLimits { max_items: usize::MAX, max_vendors: usize::MAX, ..Default::default() })
}

fn solve_prepared(prepared: &problem::Prepared, limits: SolverLimits) -> Result<AllocationResult, AllocationError> {
    let mut solutions = Vec::with_capacity(prepared.components.len());
    for comp in &prepared.components {
        if comp.items.len() > limits.max_items || comp.vendor_count > limits.max_vendors {
            return Err(AllocationError::InstanceTooLarge {
                products: comp.products.clone(),
                items: comp.items.len(),
                vendors: comp.vendor_count,
                max_items: limits.max_items,
                max_vendors: limits.max_vendors,
            });
        }
        let objective = search::Objective::standard(comp);
        let assignment = search::solve(comp, &objective, limits.max_nodes)
            .ok_or_else(|| AllocationError::SearchLimitExceeded { products: comp.products.clone(), max_nodes: limits.max_nodes })?;
        solutions.push(assignment);
    }
    Ok(prepared.assemble(&solutions))
}

/// Per product: maximal awardable quantity, maximal small-vendor quantity at
/// that level, and whether the set-aside quota is attainable without relaxation.
/// Products coupled by a spanning capacity are each judged with the others unconstrained.
pub fn check_feasibility(problem: &AllocationProblem) -> Result<FeasibilityReport, AllocationError> {
    let prepared = problem::Prepared::new(problem, false)?;
    let limits = SolverLimits::default();
    let mut products = Vec::new();
    for comp in &prepared.components {
        for (p, code) in comp.products.iter().enumerate() {
            let objective = search::Objective::max_small_of(comp, p);
            let assignment = search::solve(comp, &objective, limits.max_nodes).ok_or_else(|| {
                AllocationError::SearchLimitExceeded { products: comp.products.clone(), max_nodes: limits.max_nodes }
            })?;
            let tally = comp.tally(&assignment);
            let required = comp.req_small[p];
            products.push(ProductFeasibility {
                product_code: code.clone(),
                max_awardable_lbs: tally.awarded,
                max_small_lbs: tally.small[p],
                quota_lbs: comp.quota_lbs[p],
                required_lbs: required,
                attainable: tally.small[p] >= required,
            });
        }
    }
    products.sort_by(|a, b| a.product_code.cmp(&b.product_code));
    Ok(FeasibilityReport { products })
}

#[cfg(test)]
mod tests;
