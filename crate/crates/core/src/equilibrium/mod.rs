//! Bidding equilibrium of the two-small/one-large first-price procurement
//! auction under a partial set-aside.
//!
//! A fraction `alpha` of the `M` items is reserved for small bidders. Each
//! bidder quotes one per-unit price for all items. The equilibrium is described
//! by inverse bid functions `c_i(p)`: the cost of a type-`i` bidder who bids `p`.
//! For `alpha < 1` the pair solves
//!
//! ```text
//! c1' = (1 - F1(c1)) / (2 f1(c1) (p - c2))
//! c2' = (1 - (1-alpha) F2(c2)) / ((1-alpha) f2(c2)) * (1/(p - c1) - 1/(2 (p - c2)))
//! ```
//!
//! with `c1 = c2 = v_lo` at the common lowest bid `b_low` and `c1 = c2 = v_hi`
//! at `p = v_hi`. The lowest bid is found by forward shooting. At `alpha = 1`
//! the large bidder is excluded and the small bidders play the symmetric
//! equilibrium.

mod distribution;
mod ode;
mod quadrature;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use distribution::ValueDistribution;

use crate::domain::SizeClass;
use crate::math::{interp, linspace};

pub const N_SMALL: u32 = 2;
pub const N_LARGE: u32 = 1;

pub const DEFAULT_GRID_SIZE: usize = 2001;
/// Default bound on the shooting boundary mismatch, in cost units.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// Relative distance below `v_hi` where integration stops; the singular top is
/// bridged linearly.
const TOP_GAP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumModel {
    /// Item count `M`; scales profits only.
    #[serde(default = "one")]
    pub items: u32,
    pub alpha: f64,
    /// Small-bidder cost distribution.
    pub f1: ValueDistribution,
    /// Large-bidder cost distribution.
    pub f2: ValueDistribution,
}

fn one() -> u32 {
    1
}

impl EquilibriumModel {
    pub fn new(alpha: f64, f1: ValueDistribution, f2: ValueDistribution) -> Self {
        Self { items: 1, alpha, f1, f2 }
    }

    /// Both bidder types draw from uniform(lo, hi).
    pub fn uniform(alpha: f64, lo: f64, hi: f64) -> Self {
        Self::new(alpha, ValueDistribution::uniform(lo, hi), ValueDistribution::uniform(lo, hi))
    }

    pub fn support(&self) -> (f64, f64) {
        self.f1.support()
    }

    pub fn validate(&self) -> Result<(), EquilibriumError> {
        if self.items == 0 {
            return Err(EquilibriumError::InvalidModel("item count must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(EquilibriumError::InvalidModel(alloc::format!("alpha {} outside [0, 1]", self.alpha)));
        }
        self.f1.validate().map_err(EquilibriumError::InvalidModel)?;
        self.f2.validate().map_err(EquilibriumError::InvalidModel)?;
        let ((a1, b1), (a2, b2)) = (self.f1.support(), self.f2.support());
        let tol = 1e-12 * (b1 - a1);
        if libm::fabs(a1 - a2) > tol || libm::fabs(b1 - b2) > tol {
            return Err(EquilibriumError::UnsupportedConfiguration(alloc::format!(
                "cost supports differ: [{a1}, {b1}] vs [{a2}, {b2}]"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EquilibriumError {
    InvalidModel(String),
    UnsupportedConfiguration(String),
    /// No sign change of the shooting outcome on the scanned `b_low` interval.
    BracketFailure { lo: f64, hi: f64 },
    NonMonotone { bidder: SizeClass, index: usize },
    NotConverged { mismatch: f64, tolerance: f64 },
}

impl fmt::Display for EquilibriumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidModel(m) => write!(f, "invalid equilibrium model: {m}"),
            Self::UnsupportedConfiguration(m) => write!(f, "unsupported configuration: {m}"),
            Self::BracketFailure { lo, hi } => {
                write!(f, "shooting could not bracket the lowest bid on [{lo}, {hi}]")
            }
            Self::NonMonotone { bidder, index } => {
                write!(f, "{} inverse bid function is not increasing at grid index {index}", bidder.as_str())
            }
            Self::NotConverged { mismatch, tolerance } => {
                write!(f, "boundary mismatch {mismatch:e} exceeds tolerance {tolerance:e}")
            }
        }
    }
}

impl core::error::Error for EquilibriumError {}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Sup of both first-order residuals over the interior grid.
    pub max_foc_residual: f64,
    /// `max_i |v_hi - c_i|` where integration stopped, before the linear bridge.
    pub boundary_mismatch: f64,
    pub shooting_iterations: u32,
}

/// Inverse bid functions on a uniform price grid over `[b_low, v_hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub alpha: f64,
    pub b_low: f64,
    pub price_grid: Vec<f64>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    /// Derivatives of `c1`, `c2` along the grid.
    pub dc1: Vec<f64>,
    pub dc2: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Expected profit and whether an inverse bid had to be clamped to the support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Profit {
    pub value: f64,
    pub clamped: bool,
}

fn clamp_flag(model: &EquilibriumModel, c: f64) -> (f64, bool) {
    let (lo, hi) = model.support();
    let k = c.clamp(lo, hi);
    (k, k != c)
}

/// `M (p - v1) [1 - F1(c1)] [1 - (1-alpha) F2(c2)]`, with `c1`, `c2` the
/// opponents' inverse bids at `p`.
pub fn expected_profit_small(model: &EquilibriumModel, p: f64, v1: f64, c1: f64, c2: f64) -> Profit {
    let (c1, k1) = clamp_flag(model, c1);
    let (c2, k2) = clamp_flag(model, c2);
    let win = (1.0 - model.f1.cdf(c1)) * (1.0 - (1.0 - model.alpha) * model.f2.cdf(c2));
    Profit { value: f64::from(model.items) * (p - v1) * win, clamped: k1 || k2 }
}

/// `(1-alpha) M (p - v2) [1 - F1(c1)]^2`.
pub fn expected_profit_large(model: &EquilibriumModel, p: f64, v2: f64, c1: f64) -> Profit {
    let (c1, clamped) = clamp_flag(model, c1);
    let lose = 1.0 - model.f1.cdf(c1);
    Profit { value: (1.0 - model.alpha) * f64::from(model.items) * (p - v2) * lose * lose, clamped }
}

/// First-order residuals `(small, large)`; both vanish along an equilibrium.
pub fn foc_residual(model: &EquilibriumModel, p: f64, c1: f64, c2: f64, dc1: f64, dc2: f64) -> (f64, f64) {
    let (f1, d1) = (model.f1.cdf(c1), model.f1.pdf(c1));
    let (f2, d2) = (model.f2.cdf(c2), model.f2.pdf(c2));
    let beta = 1.0 - model.alpha;
    let small =
        (1.0 - f1) * (1.0 - beta * f2) - (p - c1) * (d1 * dc1 * (1.0 - beta * f2) + (1.0 - f1) * beta * d2 * dc2);
    let large = (1.0 - f1) - (p - c2) * 2.0 * d1 * dc1;
    (small, large)
}

/// Symmetric first-price procurement strategy among `n` bidders with costs
/// drawn from `dist`: `b(v) = v + int_v^hi (1-F)^(n-1) / (1-F(v))^(n-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricStrategy {
    pub dist: ValueDistribution,
    pub n_bidders: u32,
}

impl SymmetricStrategy {
    pub fn bid(&self, v: f64) -> f64 {
        let (lo, hi) = self.dist.support();
        let v = v.clamp(lo, hi);
        let k = (self.n_bidders - 1) as i32;
        let tail = libm::pow(1.0 - self.dist.cdf(v), f64::from(k));
        if v >= hi || tail <= 0.0 {
            return hi;
        }
        let integral = quadrature::integrate(|t| libm::pow(1.0 - self.dist.cdf(t), f64::from(k)), v, hi, 1e-13 * (hi - lo));
        v + integral / tail
    }

    /// The cost that bids `p`, by bisection on the increasing bid function.
    pub fn inverse(&self, p: f64) -> f64 {
        let (lo, hi) = self.dist.support();
        if p <= self.bid(lo) {
            return lo;
        }
        if p >= hi {
            return hi;
        }
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-14 * (hi - lo) {
            let m = 0.5 * (a + b);
            if self.bid(m) < p {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

pub fn solve_symmetric(dist: &ValueDistribution, n_bidders: u32) -> Result<SymmetricStrategy, EquilibriumError> {
    if n_bidders < 2 {
        return Err(EquilibriumError::UnsupportedConfiguration("symmetric equilibrium needs at least two bidders".into()));
    }
    dist.validate().map_err(EquilibriumError::InvalidModel)?;
    Ok(SymmetricStrategy { dist: dist.clone(), n_bidders })
}

pub fn solve_equilibrium(
    model: &EquilibriumModel,
    grid_size: usize,
    tolerance: f64,
) -> Result<EquilibriumSolution, EquilibriumError> {
    model.validate()?;
    if grid_size < 3 {
        return Err(EquilibriumError::InvalidModel("grid needs at least three points".into()));
    }
    let sol = if model.alpha >= 1.0 { solve_full_set_aside(model, grid_size)? } else { shoot(model, grid_size, tolerance)? };
    for (bidder, c) in [(SizeClass::Small, &sol.c1), (SizeClass::Large, &sol.c2)] {
        if let Some(w) = c.windows(2).position(|w| w[1] <= w[0]) {
            return Err(EquilibriumError::NonMonotone { bidder, index: w + 1 });
        }
    }
    Ok(sol)
}

fn solve_full_set_aside(model: &EquilibriumModel, grid_size: usize) -> Result<EquilibriumSolution, EquilibriumError> {
    let strategy = solve_symmetric(&model.f1, N_SMALL)?;
    let (lo, hi) = model.support();
    let b_low = strategy.bid(lo);
    let price_grid = linspace(b_low, hi, grid_size);
    let n1 = f64::from(N_SMALL - 1);
    let c1: Vec<f64> = price_grid.iter().map(|&p| strategy.inverse(p)).collect();
    let mut dc1: Vec<f64> = price_grid
        .iter()
        .zip(&c1)
        .map(|(&p, &c)| (1.0 - model.f1.cdf(c)) / (n1 * model.f1.pdf(c) * (p - c)))
        .collect();
    // 0/0 at the top; carry the last finite slope
    dc1[grid_size - 1] = dc1[grid_size - 2];
    // the large bidder is excluded; its schedule mirrors the small one
    let mut sol = EquilibriumSolution {
        alpha: model.alpha,
        b_low,
        c2: c1.clone(),
        dc2: dc1.clone(),
        price_grid,
        c1,
        dc1,
        diagnostics: Diagnostics { max_foc_residual: 0.0, boundary_mismatch: 0.0, shooting_iterations: 0 },
    };
    sol.diagnostics.max_foc_residual = (1..grid_size - 1)
        .map(|k| libm::fabs(foc_residual(model, sol.price_grid[k], sol.c1[k], sol.c2[k], sol.dc1[k], sol.dc2[k]).0))
        .fold(0.0, f64::max);
    Ok(sol)
}

fn ode_options(span: f64) -> ode::Options {
    ode::Options { rtol: 1e-10, atol: 1e-12 * span, h_max: 0.01 * span, max_steps: 50_000 }
}

fn field(model: &EquilibriumModel) -> impl Fn(f64, &[f64; 2]) -> Option<[f64; 2]> + '_ {
    let beta = 1.0 - model.alpha;
    move |p, c| {
        let (m1, m2) = (p - c[0], p - c[1]);
        let (d1, d2) = (model.f1.pdf(c[0]), model.f2.pdf(c[1]));
        if !(m1 > 0.0 && m2 > 0.0 && d1 > 0.0 && d2 > 0.0) {
            return None;
        }
        let dc1 = (1.0 - model.f1.cdf(c[0])) / (2.0 * d1 * m2);
        // f1 c1' / (1 - F1) simplified through the large bidder's condition
        let dc2 = (1.0 - beta * model.f2.cdf(c[1])) / (beta * d2) * (1.0 / m1 - 0.5 / m2);
        Some([dc1, dc2])
    }
}

fn trajectory(model: &EquilibriumModel, b_low: f64) -> ode::Trajectory<2> {
    let (lo, hi) = model.support();
    let p_end = hi - TOP_GAP * (hi - lo);
    ode::integrate(field(model), b_low, [lo, lo], p_end, ode_options(hi - lo), |p, c| {
        c.iter().any(|&ci| ci >= hi || ci >= p)
    })
}

/// `true` when the trajectory from `b_low` survives to the top of the grid.
fn reaches_top(model: &EquilibriumModel, b_low: f64) -> bool {
    trajectory(model, b_low).halt == ode::Halt::Completed
}

fn shoot(model: &EquilibriumModel, grid_size: usize, tolerance: f64) -> Result<EquilibriumSolution, EquilibriumError> {
    let (lo, hi) = model.support();
    let span = hi - lo;
    let p_end = hi - TOP_GAP * span;

    let (mut a, mut b) = (lo + 1e-9 * span, hi - 1e-3 * span);
    if reaches_top(model, a) || !reaches_top(model, b) {
        return Err(EquilibriumError::BracketFailure { lo: a, hi: b });
    }
    let mut iterations = 0u32;
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || iterations >= 200 {
            break;
        }
        iterations += 1;
        if reaches_top(model, m) {
            b = m;
        } else {
            a = m;
        }
    }

    let traj = trajectory(model, b);
    let end = traj.y;
    let mismatch = end.iter().map(|&c| libm::fabs(hi - c)).fold(0.0, f64::max);
    if mismatch > tolerance {
        return Err(EquilibriumError::NotConverged { mismatch, tolerance });
    }

    let price_grid = linspace(b, hi, grid_size);
    let (_, end_slope) = traj.eval(p_end).unwrap_or((end, [0.0; 2]));
    let n = price_grid.len();
    let (mut c1, mut c2, mut dc1, mut dc2) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (k, &p) in price_grid.iter().enumerate() {
        let (c, dc) = if k == 0 {
            ([lo, lo], traj.eval(p).map_or([0.0; 2], |e| e.1))
        } else if k == n - 1 {
            ([hi, hi], end_slope)
        } else if let Some(e) = traj.eval(p) {
            e
        } else {
            // inside the bridge to (v_hi, v_hi)
            let t = (p - p_end) / (hi - p_end);
            ([end[0] + t * (hi - end[0]), end[1] + t * (hi - end[1])], end_slope)
        };
        c1.push(c[0]);
        c2.push(c[1]);
        dc1.push(dc[0]);
        dc2.push(dc[1]);
    }

    let max_foc_residual = (1..n - 1)
        .filter(|&k| price_grid[k] <= p_end)
        .map(|k| {
            let (s, l) = foc_residual(model, price_grid[k], c1[k], c2[k], dc1[k], dc2[k]);
            libm::fabs(s).max(libm::fabs(l))
        })
        .fold(0.0, f64::max);

    Ok(EquilibriumSolution {
        alpha: model.alpha,
        b_low: b,
        price_grid,
        c1,
        c2,
        dc1,
        dc2,
        diagnostics: Diagnostics { max_foc_residual, boundary_mismatch: mismatch, shooting_iterations: iterations },
    })
}

impl EquilibriumSolution {
    /// Inverse bids at `p`; prices outside `[b_low, v_hi]` are clamped to the
    /// grid ends and flagged.
    pub fn inverse_bids(&self, p: f64) -> (f64, f64, bool) {
        let clamped = p < self.b_low || p > self.price_grid[self.price_grid.len() - 1];
        (interp(&self.price_grid, &self.c1, p), interp(&self.price_grid, &self.c2, p), clamped)
    }

    /// Equilibrium bid of a bidder with cost `v`.
    pub fn bid(&self, bidder: SizeClass, v: f64) -> f64 {
        let c = match bidder {
            SizeClass::Small => &self.c1,
            SizeClass::Large => &self.c2,
        };
        interp(c, &self.price_grid, v)
    }

    /// `E[g(b_i(v))]` over the bidder's cost distribution.
    fn expect(&self, model: &EquilibriumModel, bidder: SizeClass, g: impl Fn(f64) -> f64) -> f64 {
        let dist = match bidder {
            SizeClass::Small => &model.f1,
            SizeClass::Large => &model.f2,
        };
        let n = 4000;
        let total: f64 = (0..n).map(|k| g(self.bid(bidder, dist.quantile((k as f64 + 0.5) / n as f64)))).sum();
        total / n as f64
    }

    pub fn mean_bid(&self, model: &EquilibriumModel, bidder: SizeClass) -> f64 {
        self.expect(model, bidder, |b| b)
    }

    /// Mean log bid; the quantity a log-price regression recovers.
    pub fn mean_log_bid(&self, model: &EquilibriumModel, bidder: SizeClass) -> f64 {
        self.expect(model, bidder, libm::log)
    }
}

/// Relative profit left on the table by the solved bid of a type-`bidder`
/// bidder with cost `v`, against `points` prices spanning `[v, v_hi]`, with
/// opponents held at the solved strategies.
pub fn best_response_gap(
    model: &EquilibriumModel,
    solution: &EquilibriumSolution,
    v: f64,
    bidder: SizeClass,
    points: usize,
) -> f64 {
    let (_, hi) = model.support();
    if v >= hi {
        return 0.0;
    }
    let profit = |p: f64| {
        let (c1, c2, _) = solution.inverse_bids(p);
        match bidder {
            SizeClass::Small => expected_profit_small(model, p, v, c1, c2).value,
            SizeClass::Large => expected_profit_large(model, p, v, c1).value,
        }
    };
    let at_solved = profit(solution.bid(bidder, v));
    let best = linspace(v, hi, points.max(2)).into_iter().map(profit).fold(f64::NEG_INFINITY, f64::max);
    (best - at_solved) / best.max(1e-12)
}

/// The large bidder's markup implied by its first-order condition,
/// `(1 - F1(c1)) / (2 f1(c1) c1')`; equals `p - c2(p)` in equilibrium.
pub fn markup_large(model: &EquilibriumModel, solution: &EquilibriumSolution, p: f64) -> f64 {
    let c1 = interp(&solution.price_grid, &solution.c1, p);
    let dc1 = interp(&solution.price_grid, &solution.dc1, p);
    (1.0 - model.f1.cdf(c1)) / (2.0 * model.f1.pdf(c1) * dc1)
}
