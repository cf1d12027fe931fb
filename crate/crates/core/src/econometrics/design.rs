//! Observation assembly and dummy encoding.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{equalize, EconError, RegressionSpec, Response, Term, Weighting, NBID_SQ_TERM, NBID_TERM};
use crate::domain::{analysis_group_key, PackageClass, ProductCode, SizeClass, VendorId};
use crate::linalg::Matrix;
use crate::simulation::BidRecord;

#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub columns: Vec<String>,
}

/// Monthly wholesale price, joined to items by auction year and month.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WholesalePrice {
    pub year: i32,
    pub month: u32,
    pub price_per_lb: f64,
}

/// Annual USDA market price of one product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsdaPrice {
    pub product_code: ProductCode,
    pub year: i32,
    pub price_per_lb: f64,
}

/// Fills `wholesale_price` by (year, month) and `usda_ref_price` by
/// (product, year); a product without a price for the auction year takes its
/// latest available year.
pub fn join_covariates(
    records: &mut [BidRecord],
    wholesale: &[WholesalePrice],
    usda: &[UsdaPrice],
) -> Result<(), EconError> {
    let ws: BTreeMap<(i32, u32), f64> = wholesale.iter().map(|w| ((w.year, w.month), w.price_per_lb)).collect();
    let us: BTreeMap<(&ProductCode, i32), f64> =
        usda.iter().map(|u| ((&u.product_code, u.year), u.price_per_lb)).collect();
    for r in records.iter_mut() {
        let (year, month) = (r.date.year(), r.date.month());
        r.wholesale_price = *ws.get(&(year, month)).ok_or(EconError::MissingWholesale { year, month })?;
        let exact = us.get(&(&r.product_code, year)).copied();
        let latest = || {
            us.range((&r.product_code, i32::MIN)..=(&r.product_code, i32::MAX)).next_back().map(|(_, p)| *p)
        };
        r.usda_ref_price = exact.or_else(latest).ok_or_else(|| EconError::MissingUsdaPrice {
            product: r.product_code.clone(),
            year,
        })?;
    }
    Ok(())
}

/// One regression row before encoding.
struct Obs<'a> {
    y: f64,
    qty: u64,
    product: &'a ProductCode,
    package: &'a PackageClass,
    size: SizeClass,
    set_aside: f64,
    demand: f64,
    nbid: f64,
    usda: f64,
    wholesale: f64,
    year: i32,
    vendor: Option<&'a VendorId>,
    sdvosb: bool,
    // for error messages
    auction_id: &'a str,
    item_id: &'a str,
}

fn log_of(v: f64, column: &'static str, o: &Obs) -> Result<f64, EconError> {
    if v > 0.0 {
        Ok(libm::log(v))
    } else {
        Err(EconError::NonPositiveValue { column, auction_id: o.auction_id.to_string(), item_id: o.item_id.to_string() })
    }
}

fn observations<'a>(records: &'a [BidRecord], response: Response) -> Result<Vec<Obs<'a>>, EconError> {
    let base = |r: &'a BidRecord, y: f64, size: SizeClass, vendor: Option<&'a VendorId>| Obs {
        y,
        qty: r.quantity_lbs,
        product: &r.product_code,
        package: &r.package_class,
        size,
        set_aside: r.set_aside,
        demand: r.demand_mlbs,
        nbid: f64::from(r.n_bidders_item),
        usda: r.usda_ref_price,
        wholesale: r.wholesale_price,
        year: r.date.year(),
        vendor,
        sdvosb: r.sdvosb,
        auction_id: &r.auction_id,
        item_id: r.item_id.as_str(),
    };
    match response {
        Response::NBidders => {
            // distinct bidders of each type per item
            let mut items: BTreeMap<(&str, &str), (&BidRecord, BTreeSet<&VendorId>, BTreeSet<&VendorId>)> =
                BTreeMap::new();
            for r in records {
                let e = items
                    .entry((&r.auction_id, r.item_id.as_str()))
                    .or_insert_with(|| (r, BTreeSet::new(), BTreeSet::new()));
                // item covariates come from the lowest vendor id, whatever the input order
                if r.vendor_id < e.0.vendor_id {
                    e.0 = r;
                }
                match r.vendor_type {
                    SizeClass::Small => e.1.insert(&r.vendor_id),
                    SizeClass::Large => e.2.insert(&r.vendor_id),
                };
            }
            let mut out = Vec::with_capacity(2 * items.len());
            for (r, small, large) in items.into_values() {
                // a full set-aside excludes large bidders by rule
                if r.set_aside < 1.0 {
                    out.push(base(r, large.len() as f64, SizeClass::Large, None));
                }
                out.push(base(r, small.len() as f64, SizeClass::Small, None));
            }
            Ok(out)
        }
        Response::LogOffer | Response::LogWin => {
            let mut rows: Vec<&BidRecord> =
                records.iter().filter(|r| response == Response::LogOffer || r.won).collect();
            rows.sort_by(|a, b| {
                (&a.auction_id, &a.item_id, &a.vendor_id).cmp(&(&b.auction_id, &b.item_id, &b.vendor_id))
            });
            rows.into_iter()
                .map(|r| {
                    let o = base(r, 0.0, r.vendor_type, Some(&r.vendor_id));
                    let y = log_of(r.price_per_lb.dollars(), "price_per_lb", &o)?;
                    Ok(Obs { y, ..o })
                })
                .collect()
        }
    }
}

fn percent_label(level: f64) -> String {
    let pct = level * 100.0;
    if libm::fabs(pct - libm::round(pct)) < 1e-9 {
        format!("{}", libm::round(pct) as i64)
    } else {
        let s = format!("{pct:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn size_label(s: SizeClass) -> &'static str {
    match s {
        SizeClass::Small => "Small",
        SizeClass::Large => "Large",
    }
}

/// A column is a label plus a value per observation.
type Column<'a> = (String, alloc::boxed::Box<dyn Fn(&Obs) -> f64 + 'a>);

/// One dummy per level except the (lexicographically smallest) baseline.
fn dummies<'a, K: Ord + Clone + 'a>(
    obs: &[Obs],
    key: impl Fn(&Obs) -> K + Clone + 'a,
    label: impl Fn(&K) -> String,
) -> Vec<Column<'a>> {
    let levels: BTreeSet<K> = obs.iter().map(&key).collect();
    levels
        .into_iter()
        .skip(1)
        .map(|level| {
            let key = key.clone();
            let name = label(&level);
            (name, alloc::boxed::Box::new(move |o: &Obs| f64::from(u8::from(key(o) == level))) as _)
        })
        .collect()
}

pub fn build_design_matrix(records: &[BidRecord], spec: &RegressionSpec) -> Result<Design, EconError> {
    let obs = observations(records, spec.response)?;
    if obs.is_empty() {
        return Err(EconError::NoObservations);
    }

    let mut cols: Vec<Column> = Vec::new();
    cols.push(("Constant".into(), alloc::boxed::Box::new(|_: &Obs| 1.0)));
    for &term in &spec.terms {
        match term {
            Term::SetAsideByType => {
                cols.push(("Small".into(), alloc::boxed::Box::new(|o: &Obs| f64::from(u8::from(o.size == SizeClass::Small)))));
                let mut levels: Vec<f64> = obs.iter().map(|o| o.set_aside).collect();
                levels.sort_by(f64::total_cmp);
                levels.dedup();
                let cells: BTreeSet<(u64, SizeClass)> = obs.iter().map(|o| (o.set_aside.to_bits(), o.size)).collect();
                for &level in levels.iter().skip(1) {
                    for size in [SizeClass::Large, SizeClass::Small] {
                        if cells.contains(&(level.to_bits(), size)) {
                            cols.push((
                                format!("SA{}%, {}", percent_label(level), size_label(size)),
                                alloc::boxed::Box::new(move |o: &Obs| {
                                    f64::from(u8::from(o.set_aside == level && o.size == size))
                                }),
                            ));
                        }
                    }
                }
            }
            Term::Demand => cols.push(("Demand".into(), alloc::boxed::Box::new(|o: &Obs| o.demand))),
            Term::DemandSq => cols.push(("Demand^2".into(), alloc::boxed::Box::new(|o: &Obs| o.demand * o.demand))),
            Term::NBid | Term::NBidSq if spec.response == Response::NBidders => {
                return Err(EconError::UnsupportedTerm { term, response: spec.response });
            }
            Term::NBid => cols.push((NBID_TERM.into(), alloc::boxed::Box::new(|o: &Obs| o.nbid))),
            Term::NBidSq => cols.push((NBID_SQ_TERM.into(), alloc::boxed::Box::new(|o: &Obs| o.nbid * o.nbid))),
            Term::LogUsdaRef => {
                for o in &obs {
                    log_of(o.usda, "usda_ref_price", o)?;
                }
                cols.push(("log(USDA price)".into(), alloc::boxed::Box::new(|o: &Obs| libm::log(o.usda))));
            }
            Term::LogWholesale => {
                for o in &obs {
                    log_of(o.wholesale, "wholesale_price", o)?;
                }
                cols.push(("log(wholesale price)".into(), alloc::boxed::Box::new(|o: &Obs| libm::log(o.wholesale))));
            }
            Term::ProductFe => cols.extend(dummies(&obs, |o| o.product.clone(), |p| format!("Product {p}"))),
            Term::ProductGroupFe => cols.extend(dummies(
                &obs,
                |o| analysis_group_key(o.product, o.package),
                |k| format!("Product {k}"),
            )),
            Term::YearFe => cols.extend(dummies(&obs, |o| o.year, |y| format!("Year {y}"))),
            Term::VendorFe => {
                if spec.response == Response::NBidders {
                    return Err(EconError::UnsupportedTerm { term, response: spec.response });
                }
                // drop the first vendor of each size class; `Small` carries the class gap
                for size in [SizeClass::Large, SizeClass::Small] {
                    let vendors: BTreeSet<&VendorId> =
                        obs.iter().filter(|o| o.size == size).filter_map(|o| o.vendor).collect();
                    for v in vendors.into_iter().skip(1) {
                        let v = v.clone();
                        cols.push((
                            format!("Vendor {v}"),
                            alloc::boxed::Box::new(move |o: &Obs| f64::from(u8::from(o.vendor == Some(&v)))),
                        ));
                    }
                }
            }
            Term::Package => cols.extend(dummies(&obs, |o| o.package.clone(), |p| format!("Package {p}"))),
            Term::Sdvosb => cols.push(("SDVOSB".into(), alloc::boxed::Box::new(|o: &Obs| f64::from(u8::from(o.sdvosb))))),
        }
    }

    let k = cols.len();
    let mut data = Vec::with_capacity(obs.len() * k);
    for o in &obs {
        data.extend(cols.iter().map(|(_, f)| f(o)));
    }
    let w = match spec.weighting {
        Weighting::Quantity => obs.iter().map(|o| o.qty as f64).collect(),
        Weighting::Unit => alloc::vec![1.0; obs.len()],
        Weighting::ProductEqualized => {
            let products: Vec<&ProductCode> = obs.iter().map(|o| o.product).collect();
            let qty: Vec<u64> = obs.iter().map(|o| o.qty).collect();
            equalize(&products, &qty)?
        }
    };
    Ok(Design {
        x: Matrix::from_row_major(obs.len(), k, data),
        y: obs.iter().map(|o| o.y).collect(),
        w,
        columns: cols.into_iter().map(|(n, _)| n).collect(),
    })
}
