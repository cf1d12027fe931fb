//! Procurement auctions with small-business set-asides.
//!
//! The crate is `no_std` (with `alloc`) and holds the algorithmic core:
//!
//! * [`domain`]: solicitations, items, bids, vendors, set-aside quota arithmetic.
//! * [`allocation`]: exact winner determination under quota and capacity
//!   constraints, plus an exhaustive oracle.
//! * [`equilibrium`]: the two-small/one-large bidding equilibrium under a
//!   partial set-aside, solved by forward shooting.
//! * [`simulation`]: seeded synthetic auction campaigns and descriptive statistics.
//! * [`econometrics`]: design matrices, weighted least squares and sandwich
//!   covariance.
//!
//! File formats, the command line and everything touching the filesystem live
//! in the `setaside` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod allocation;
pub mod domain;
pub mod econometrics;
pub mod equilibrium;
mod linalg;
mod math;
pub mod simulation;

pub use linalg::Matrix;
