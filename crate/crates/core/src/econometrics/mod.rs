//! Weighted least squares with heteroskedasticity-consistent covariance.
//!
//! Three models are supported: bidder counts per item and bidder type, log
//! offer prices, and log winning prices. Set-aside level enters as a category
//! interacted with bidder type; the baseline cell is large bidders at the
//! lowest set-aside level, and cells absent from the data get no column.

mod design;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::ProductCode;
use crate::linalg::{gram_inverse, householder_qr, solve_upper, Matrix};
use crate::math::compensated_sum;
use crate::simulation::BidRecord;

pub use design::{build_design_matrix, join_covariates, Design, UsdaPrice, WholesalePrice};

pub const NBID_TERM: &str = "Number of bidders";
pub const NBID_SQ_TERM: &str = "Number of bidders^2";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Response {
    /// Number of bidders of one type on one item; two rows per item.
    NBidders,
    LogOffer,
    /// Log price of winning bids only.
    LogWin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    /// `Small` plus one dummy per observed (non-baseline set-aside, bidder type) cell.
    SetAsideByType,
    Demand,
    DemandSq,
    NBid,
    NBidSq,
    LogUsdaRef,
    LogWholesale,
    /// One dummy per product code.
    ProductFe,
    /// One dummy per product with the package class stripped; pair with `Package`.
    ProductGroupFe,
    YearFe,
    /// One dummy per vendor, with a baseline vendor in each size class.
    VendorFe,
    Package,
    Sdvosb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Weighting {
    Quantity,
    ProductEqualized,
    Unit,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HcFlavor {
    Hc0,
    #[default]
    Hc1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub response: Response,
    pub terms: Vec<Term>,
    pub weighting: Weighting,
    #[serde(default)]
    pub hc: HcFlavor,
}

impl RegressionSpec {
    /// Bidder counts on set-aside by type, demand, product and year effects.
    pub fn n_bidders(weighting: Weighting) -> Self {
        use Term::*;
        Self {
            response: Response::NBidders,
            terms: vec![SetAsideByType, Demand, DemandSq, ProductFe, YearFe, Sdvosb],
            weighting,
            hc: HcFlavor::Hc1,
        }
    }

    /// Log offer price on set-aside by type, demand, competition, reference
    /// prices, product group, vendor and package effects.
    pub fn log_offer(weighting: Weighting) -> Self {
        use Term::*;
        Self {
            response: Response::LogOffer,
            terms: vec![
                SetAsideByType,
                Demand,
                DemandSq,
                NBid,
                NBidSq,
                LogUsdaRef,
                LogWholesale,
                ProductGroupFe,
                VendorFe,
                Package,
                Sdvosb,
            ],
            weighting,
            hc: HcFlavor::Hc1,
        }
    }

    pub fn log_win(weighting: Weighting) -> Self {
        Self { response: Response::LogWin, ..Self::log_offer(weighting) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EconError {
    /// Each group lists exactly-collinear columns, the dependent one last.
    RankDeficient { groups: Vec<Vec<String>> },
    NoObservations,
    LengthMismatch { rows: usize, y: usize, w: usize },
    NonPositiveWeight { row: usize },
    /// A log was requested of a non-positive value.
    NonPositiveValue { column: &'static str, auction_id: String, item_id: String },
    UnsupportedTerm { term: Term, response: Response },
    ZeroVariance,
    ZeroProductQuantity(ProductCode),
    MissingTerm(&'static str),
    MissingWholesale { year: i32, month: u32 },
    MissingUsdaPrice { product: ProductCode, year: i32 },
}

impl fmt::Display for EconError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EconError::RankDeficient { groups } => {
                f.write_str("design matrix is rank deficient; collinear columns:")?;
                for g in groups {
                    write!(f, " [{}]", g.join(", "))?;
                }
                Ok(())
            }
            EconError::NoObservations => f.write_str("no observations"),
            EconError::LengthMismatch { rows, y, w } => {
                write!(f, "length mismatch: {rows} design rows, {y} responses, {w} weights")
            }
            EconError::NonPositiveWeight { row } => write!(f, "weight of row {row} is not positive"),
            EconError::NonPositiveValue { column, auction_id, item_id } => {
                write!(f, "cannot take log of non-positive {column} (auction {auction_id}, item {item_id})")
            }
            EconError::UnsupportedTerm { term, response } => {
                write!(f, "term {term:?} is not available for response {response:?}")
            }
            EconError::ZeroVariance => f.write_str("response has zero weighted variance; R^2 undefined"),
            EconError::ZeroProductQuantity(p) => write!(f, "product `{p}` has zero total quantity"),
            EconError::MissingTerm(t) => write!(f, "fit has no `{t}` coefficient"),
            EconError::MissingWholesale { year, month } => {
                write!(f, "no wholesale price for {year}-{month:02}")
            }
            EconError::MissingUsdaPrice { product, year } => {
                write!(f, "no USDA reference price for `{product}` ({year})")
            }
        }
    }
}

impl core::error::Error for EconError {}

/// Coefficients and residuals of a weighted least squares fit.
#[derive(Clone, Debug, PartialEq)]
pub struct WlsFit {
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `(X^T W X)^{-1}`.
    pub bread: Matrix,
}

fn check_inputs(x: &Matrix, y: &[f64], w: &[f64]) -> Result<(), EconError> {
    if x.rows() != y.len() || x.rows() != w.len() {
        return Err(EconError::LengthMismatch { rows: x.rows(), y: y.len(), w: w.len() });
    }
    if x.rows() == 0 {
        return Err(EconError::NoObservations);
    }
    if let Some(row) = w.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(EconError::NonPositiveWeight { row });
    }
    Ok(())
}

fn named_groups(groups: Vec<Vec<usize>>, name: &dyn Fn(usize) -> String) -> EconError {
    EconError::RankDeficient { groups: groups.into_iter().map(|g| g.into_iter().map(name).collect()).collect() }
}

fn column_label(j: usize) -> String {
    alloc::format!("column {j}")
}

/// Solves `(X^T W X) b = X^T W y` by Householder QR of `sqrt(W) X`.
pub fn fit_wls(x: &Matrix, y: &[f64], w: &[f64]) -> Result<WlsFit, EconError> {
    wls(x, y, w, &column_label)
}

fn wls(x: &Matrix, y: &[f64], w: &[f64], name: &dyn Fn(usize) -> String) -> Result<WlsFit, EconError> {
    check_inputs(x, y, w)?;
    let a = root_weighted(x, w);
    let b: Vec<f64> = y.iter().zip(w).map(|(y, w)| y * libm::sqrt(*w)).collect();
    let qr = householder_qr(&a, &b).map_err(|d| named_groups(d.groups, name))?;
    let coefficients = solve_upper(&qr.r, &qr.qtb);
    let fitted = x.matvec(&coefficients);
    let residuals = y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    Ok(WlsFit { coefficients, fitted, residuals, bread: gram_inverse(&qr.r) })
}

fn root_weighted(x: &Matrix, w: &[f64]) -> Matrix {
    let mut a = x.clone();
    for (i, wi) in w.iter().enumerate() {
        let s = libm::sqrt(*wi);
        for j in 0..x.cols() {
            a[(i, j)] *= s;
        }
    }
    a
}

/// Sandwich covariance `B (sum_i (w_i e_i)^2 x_i x_i^T) B` with `B = (X^T W X)^{-1}`.
pub fn robust_covariance(x: &Matrix, w: &[f64], residuals: &[f64], flavor: HcFlavor) -> Result<Matrix, EconError> {
    check_inputs(x, residuals, w)?;
    let qr = householder_qr(&root_weighted(x, w), &vec![0.0; x.rows()])
        .map_err(|d| named_groups(d.groups, &column_label))?;
    Ok(sandwich(x, w, residuals, &gram_inverse(&qr.r), flavor))
}

fn sandwich(x: &Matrix, w: &[f64], residuals: &[f64], bread: &Matrix, flavor: HcFlavor) -> Matrix {
    let (n, k) = (x.rows(), x.cols());
    let mut meat = Matrix::zeros(k, k);
    for i in 0..n {
        let s = w[i] * residuals[i];
        let s2 = s * s;
        if s2 == 0.0 {
            continue;
        }
        let row = x.row(i);
        for a in 0..k {
            let ra = row[a] * s2;
            if ra == 0.0 {
                continue;
            }
            for b in a..k {
                meat[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            meat[(a, b)] = meat[(b, a)];
        }
    }
    let mut cov = bread.matmul(&meat).matmul(bread);
    if flavor == HcFlavor::Hc1 && n > k {
        cov.scale(n as f64 / (n - k) as f64);
    }
    // exact symmetry
    for a in 0..k {
        for b in 0..a {
            let m = 0.5 * (cov[(a, b)] + cov[(b, a)]);
            cov[(a, b)] = m;
            cov[(b, a)] = m;
        }
    }
    cov
}

/// `1 - sum w (y - yhat)^2 / sum w (y - ybar_w)^2`.
pub fn weighted_r2(y: &[f64], fitted: &[f64], w: &[f64]) -> Result<f64, EconError> {
    if y.len() != fitted.len() || y.len() != w.len() {
        return Err(EconError::LengthMismatch { rows: fitted.len(), y: y.len(), w: w.len() });
    }
    if y.is_empty() {
        return Err(EconError::NoObservations);
    }
    let wsum = compensated_sum(w.iter().copied());
    let ybar = compensated_sum(y.iter().zip(w).map(|(y, w)| y * w)) / wsum;
    let tss = compensated_sum(y.iter().zip(w).map(|(y, w)| w * (y - ybar) * (y - ybar)));
    if !(tss > 0.0) {
        return Err(EconError::ZeroVariance);
    }
    let rss = compensated_sum(y.iter().zip(fitted).zip(w).map(|((y, f), w)| w * (y - f) * (y - f)));
    Ok(1.0 - rss / tss)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: RegressionSpec,
    pub columns: Vec<String>,
    pub coefficients: Vec<f64>,
    pub robust_se: Vec<f64>,
    pub covariance: Matrix,
    pub n_obs: usize,
    pub weighted_r2: f64,
}

impl FitResult {
    fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coefficients[i])
    }

    pub fn robust_se_of(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.robust_se[i])
    }

    /// Coefficients keyed by column name.
    pub fn named(&self) -> BTreeMap<&str, (f64, f64)> {
        self.columns
            .iter()
            .zip(self.coefficients.iter().zip(&self.robust_se))
            .map(|(c, (b, s))| (c.as_str(), (*b, *s)))
            .collect()
    }
}

/// Builds the design, fits it and attaches the robust covariance.
pub fn estimate(records: &[BidRecord], spec: &RegressionSpec) -> Result<FitResult, EconError> {
    let d = build_design_matrix(records, spec)?;
    fit_design(&d, spec)
}

pub fn fit_design(d: &Design, spec: &RegressionSpec) -> Result<FitResult, EconError> {
    let fit = wls(&d.x, &d.y, &d.w, &|j| d.columns[j].clone())?;
    let covariance = sandwich(&d.x, &d.w, &fit.residuals, &fit.bread, spec.hc);
    let robust_se = covariance.diagonal().into_iter().map(|v| libm::sqrt(v.max(0.0))).collect();
    Ok(FitResult {
        spec: spec.clone(),
        columns: d.columns.clone(),
        coefficients: fit.coefficients,
        robust_se,
        covariance,
        n_obs: d.x.rows(),
        weighted_r2: weighted_r2(&d.y, &fit.fitted, &d.w)?,
    })
}

/// Weights proportional to quantity within each product, summing to exactly
/// 1.0 per product when added in input order.
pub fn product_equalized_weights(records: &[BidRecord]) -> Result<Vec<f64>, EconError> {
    let products: Vec<&ProductCode> = records.iter().map(|r| &r.product_code).collect();
    let quantities: Vec<u64> = records.iter().map(|r| r.quantity_lbs).collect();
    equalize(&products, &quantities)
}

pub(crate) fn equalize(products: &[&ProductCode], quantities: &[u64]) -> Result<Vec<f64>, EconError> {
    let mut totals: BTreeMap<&ProductCode, (u128, usize)> = BTreeMap::new();
    for (i, (p, q)) in products.iter().zip(quantities).enumerate() {
        let e = totals.entry(p).or_insert((0, 0));
        e.0 += u128::from(*q);
        e.1 = i;
    }
    if let Some((p, _)) = totals.iter().find(|(_, (t, _))| *t == 0) {
        return Err(EconError::ZeroProductQuantity((*p).clone()));
    }
    let mut w: Vec<f64> =
        products.iter().zip(quantities).map(|(p, q)| *q as f64 / totals[p].0 as f64).collect();
    // absorb rounding into each product's last weight
    let mut partial: BTreeMap<&ProductCode, f64> = BTreeMap::new();
    for (i, p) in products.iter().enumerate() {
        let last = totals[p].1;
        let s = partial.entry(p).or_insert(0.0);
        if i == last {
            let mut v = 1.0 - *s;
            while *s + v > 1.0 {
                v = v.next_down();
            }
            while *s + v < 1.0 {
                v = v.next_up();
            }
            w[i] = v;
        }
        *s += w[i];
    }
    Ok(w)
}

/// Proportional change implied by a coefficient on a log response.
pub fn interpret_log_coefficient(beta: f64) -> f64 {
    libm::expm1(beta)
}

/// Proportional change in the response from the `(n+1)`-th bidder, given
/// linear and quadratic bidder-count terms on a log response.
pub fn marginal_effect_nbid(fit: &FitResult, n: f64) -> Result<f64, EconError> {
    let b1 = fit.coefficient(NBID_TERM).ok_or(EconError::MissingTerm(NBID_TERM))?;
    let b2 = fit.coefficient(NBID_SQ_TERM).ok_or(EconError::MissingTerm(NBID_SQ_TERM))?;
    Ok(nbid_effect(b1, b2, n))
}

pub fn nbid_effect(beta_n: f64, beta_n2: f64, n: f64) -> f64 {
    libm::expm1(beta_n + beta_n2 * (2.0 * n + 1.0))
}

#[cfg(test)]
mod tests;
