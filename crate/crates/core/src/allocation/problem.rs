//! Indexing of an [`AllocationProblem`] into independently solvable components.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use super::{AllocationError, AllocationProblem, AllocationResult, Award, PhaseTrace, QuotaReport};
use crate::domain::{
    compute_sdvosb_quota, compute_setaside_quota, quota_requirement_lbs, validate_solicitation, ItemId, Money,
    Price, ProductCode,
};

#[derive(Clone, Debug)]
pub(crate) struct BidOption {
    /// Rank of the vendor in ascending `vendor_id` order.
    pub vendor: usize,
    pub price: Price,
    pub cost: u64,
    pub small: bool,
    pub sdvosb: bool,
    /// Component-local capacity constraints this award consumes.
    pub caps: Vec<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct CompItem {
    pub item: usize,
    pub product: usize,
    pub qty: u64,
    /// Sorted by vendor rank.
    pub options: Vec<BidOption>,
}

#[derive(Clone, Debug)]
pub(crate) struct Component {
    pub products: Vec<ProductCode>,
    /// Sorted by item id.
    pub items: Vec<CompItem>,
    pub cap_max: Vec<u64>,
    pub vendor_count: usize,
    pub quota_lbs: Vec<f64>,
    pub sdvosb_quota_lbs: Vec<f64>,
    pub req_small: Vec<u64>,
    pub req_sdvosb: Vec<u64>,
    pub product_total: Vec<u64>,
}

/// Per-item choice: index into `CompItem::options`, or `None` for unawarded.
pub(crate) type Assignment = Vec<Option<usize>>;

pub(crate) struct Tally {
    pub awarded: u64,
    pub small: Vec<u64>,
    pub sdvosb: Vec<u64>,
    pub cost: u64,
}

impl Component {
    pub fn tally(&self, a: &Assignment) -> Tally {
        let np = self.products.len();
        let mut t = Tally { awarded: 0, small: vec![0; np], sdvosb: vec![0; np], cost: 0 };
        for (it, choice) in self.items.iter().zip(a) {
            if let Some(k) = choice {
                let o = &it.options[*k];
                t.awarded += it.qty;
                t.cost += o.cost;
                if o.small {
                    t.small[it.product] += it.qty;
                }
                if o.sdvosb {
                    t.sdvosb[it.product] += it.qty;
                }
            }
        }
        t
    }
}

pub(crate) struct Prepared<'a> {
    pub problem: &'a AllocationProblem,
    pub vendor_ids: Vec<crate::domain::VendorId>,
    pub components: Vec<Component>,
}

impl<'a> Prepared<'a> {
    pub fn new(problem: &'a AllocationProblem, joint: bool) -> Result<Self, AllocationError> {
        let report = validate_solicitation(&problem.solicitation);
        if !report.is_valid() {
            return Err(AllocationError::Invalid(report));
        }
        let sol = &problem.solicitation;

        let mut vendor_rank: BTreeMap<&crate::domain::VendorId, usize> = BTreeMap::new();
        for v in &problem.vendors {
            if vendor_rank.insert(&v.vendor_id, 0).is_some() {
                return Err(AllocationError::DuplicateVendor(v.vendor_id.clone()));
            }
        }
        for (rank, (_, r)) in vendor_rank.iter_mut().enumerate() {
            *r = rank;
        }
        let vendor_ids: Vec<_> = vendor_rank.keys().map(|v| (*v).clone()).collect();
        let vendor_by_rank: Vec<_> = vendor_ids
            .iter()
            .map(|id| problem.vendors.iter().find(|v| &v.vendor_id == id).expect("ranked vendor exists"))
            .collect();

        let item_index: BTreeMap<&ItemId, usize> =
            sol.items.iter().enumerate().map(|(i, it)| (&it.item_id, i)).collect();
        for c in &problem.capacities {
            if !vendor_rank.contains_key(&c.vendor_id) {
                return Err(AllocationError::UnknownVendor(c.vendor_id.clone()));
            }
        }

        // products, grouped by capacity coupling
        let products: Vec<ProductCode> = sol.products().into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let pidx: BTreeMap<&ProductCode, usize> = products.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let mut parent: Vec<usize> = (0..products.len()).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut y = x;
            while parent[y] != r {
                let next = parent[y];
                parent[y] = r;
                y = next;
            }
            r
        }
        let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
            let (ra, rb) = (find(parent, a), find(parent, b));
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent[hi] = lo;
            }
        };
        if joint {
            for i in 1..products.len() {
                union(&mut parent, 0, i);
            }
        }
        for c in &problem.capacities {
            let present: Vec<usize> = c.products.iter().filter_map(|p| pidx.get(p).copied()).collect();
            for w in present.windows(2) {
                union(&mut parent, w[0], w[1]);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..products.len() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }

        // bids per item, checked and filtered by ceiling
        let mut bids_by_item: Vec<Vec<(usize, Price)>> = vec![Vec::new(); sol.items.len()];
        for b in &problem.bids {
            let &item = item_index.get(&b.item_id).ok_or_else(|| AllocationError::UnknownItem(b.item_id.clone()))?;
            let &vendor =
                vendor_rank.get(&b.vendor_id).ok_or_else(|| AllocationError::UnknownVendor(b.vendor_id.clone()))?;
            if bids_by_item[item].iter().any(|(v, _)| *v == vendor) {
                return Err(AllocationError::DuplicateBid { vendor: b.vendor_id.clone(), item: b.item_id.clone() });
            }
            let product = &sol.items[item].product_code;
            if let Some(ceiling) = problem.price_ceiling.get(product) {
                if b.price_per_lb > *ceiling {
                    continue;
                }
            }
            bids_by_item[item].push((vendor, b.price_per_lb));
        }

        let mut item_order: Vec<usize> = (0..sol.items.len()).collect();
        item_order.sort_by(|&a, &b| sol.items[a].item_id.cmp(&sol.items[b].item_id));

        let mut components = Vec::with_capacity(groups.len());
        for members in groups.values() {
            let comp_products: Vec<ProductCode> = members.iter().map(|&i| products[i].clone()).collect();
            let local: BTreeMap<&ProductCode, usize> =
                comp_products.iter().enumerate().map(|(i, p)| (p, i)).collect();
            let caps: Vec<usize> = problem
                .capacities
                .iter()
                .enumerate()
                .filter(|(_, c)| c.products.iter().any(|p| local.contains_key(p)))
                .map(|(i, _)| i)
                .collect();
            let mut vendors_seen = BTreeSet::new();
            let mut items = Vec::new();
            for &i in &item_order {
                let it = &sol.items[i];
                let Some(&lp) = local.get(&it.product_code) else { continue };
                let mut options: Vec<BidOption> = bids_by_item[i]
                    .iter()
                    .map(|&(v, price)| {
                        vendors_seen.insert(v);
                        let vendor = vendor_by_rank[v];
                        BidOption {
                            vendor: v,
                            price,
                            cost: price.cost_of(it.quantity_lbs).0,
                            small: vendor.counts_as_small(),
                            sdvosb: vendor.sdvosb,
                            caps: caps
                                .iter()
                                .enumerate()
                                .filter(|(_, &ci)| problem.capacities[ci].applies_to(&vendor.vendor_id, it))
                                .map(|(local_ci, _)| local_ci)
                                .collect(),
                        }
                    })
                    .collect();
                options.sort_by_key(|o| o.vendor);
                items.push(CompItem { item: i, product: lp, qty: it.quantity_lbs, options });
            }
            let mut quota_lbs = Vec::new();
            let mut sdv_lbs = Vec::new();
            let mut totals = Vec::new();
            for p in &comp_products {
                let q = compute_setaside_quota(sol, p).expect("product present");
                let s = compute_sdvosb_quota(sol, p).expect("product present");
                quota_lbs.push(q);
                sdv_lbs.push(s);
                totals.push(sol.product_quantity(p).expect("product present"));
            }
            components.push(Component {
                products: comp_products,
                items,
                cap_max: caps.iter().map(|&ci| problem.capacities[ci].max_quantity_lbs).collect(),
                vendor_count: vendors_seen.len(),
                req_small: quota_lbs.iter().map(|&q| quota_requirement_lbs(q)).collect(),
                req_sdvosb: sdv_lbs.iter().map(|&q| quota_requirement_lbs(q)).collect(),
                quota_lbs,
                sdvosb_quota_lbs: sdv_lbs,
                product_total: totals,
            });
        }

        Ok(Prepared { problem, vendor_ids, components })
    }

    pub fn assemble(&self, solutions: &[Assignment]) -> AllocationResult {
        let sol = &self.problem.solicitation;
        let mut awards = BTreeMap::new();
        let mut unawarded = Vec::new();
        let mut total_cost = 0u64;
        let mut quota_report = Vec::new();
        let mut sdvosb_report = Vec::new();
        let mut trace = Vec::new();
        for (comp, a) in self.components.iter().zip(solutions) {
            let t = comp.tally(a);
            for (ci, choice) in comp.items.iter().zip(a) {
                let it = &sol.items[ci.item];
                match choice {
                    Some(k) => {
                        let o = &ci.options[*k];
                        awards.insert(
                            it.item_id.clone(),
                            Award {
                                vendor_id: self.vendor_ids[o.vendor].clone(),
                                price_per_lb: o.price,
                                quantity_lbs: it.quantity_lbs,
                            },
                        );
                    }
                    None => unawarded.push(it.item_id.clone()),
                }
            }
            total_cost += t.cost;
            let mut credit_small = 0;
            let mut credit_sdv = 0;
            for (p, code) in comp.products.iter().enumerate() {
                credit_small += t.small[p].min(comp.req_small[p]);
                credit_sdv += t.sdvosb[p].min(comp.req_sdvosb[p]);
                let met = t.small[p] as f64 >= comp.quota_lbs[p];
                quota_report.push(QuotaReport {
                    product_code: code.clone(),
                    quota_lbs: comp.quota_lbs[p],
                    required_lbs: comp.req_small[p],
                    awarded_lbs: t.small[p],
                    quota_met: met,
                    relaxed: !met,
                });
                let met = t.sdvosb[p] as f64 >= comp.sdvosb_quota_lbs[p];
                sdvosb_report.push(QuotaReport {
                    product_code: code.clone(),
                    quota_lbs: comp.sdvosb_quota_lbs[p],
                    required_lbs: comp.req_sdvosb[p],
                    awarded_lbs: t.sdvosb[p],
                    quota_met: met,
                    relaxed: !met,
                });
            }
            trace.push(PhaseTrace {
                products: comp.products.clone(),
                awarded_lbs: t.awarded,
                small_credit_lbs: credit_small,
                sdvosb_credit_lbs: credit_sdv,
                total_cost: Money(t.cost),
            });
        }
        unawarded.sort();
        quota_report.sort_by(|a, b| a.product_code.cmp(&b.product_code));
        sdvosb_report.sort_by(|a, b| a.product_code.cmp(&b.product_code));
        AllocationResult {
            awards,
            unawarded,
            total_cost: Money(total_cost),
            quota_report,
            sdvosb_report,
            lexicographic_trace: trace,
        }
    }
}
