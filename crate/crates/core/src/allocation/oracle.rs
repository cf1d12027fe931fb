//! Exhaustive enumeration oracle for small instances.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::problem::{Assignment, Component, Prepared};
use super::{AllocationError, AllocationProblem, AllocationResult};

pub const ORACLE_MAX_ITEMS_PER_PRODUCT: usize = 8;
pub const ORACLE_MAX_VENDORS_PER_PRODUCT: usize = 5;

/// Enumerates every item -> (vendor | unawarded) assignment, discards those
/// violating a capacity, and keeps the best under the same lexicographic rule
/// and tie-break as [`super::solve_allocation`].
pub fn brute_force_allocation(problem: &AllocationProblem) -> Result<AllocationResult, AllocationError> {
    let prepared = Prepared::new(problem, false)?;
    let mut solutions = Vec::with_capacity(prepared.components.len());
    for comp in &prepared.components {
        for (p, code) in comp.products.iter().enumerate() {
            let items = comp.items.iter().filter(|it| it.product == p).count();
            let mut vendors: Vec<usize> = comp
                .items
                .iter()
                .filter(|it| it.product == p)
                .flat_map(|it| it.options.iter().map(|o| o.vendor))
                .collect();
            vendors.sort_unstable();
            vendors.dedup();
            if items > ORACLE_MAX_ITEMS_PER_PRODUCT || vendors.len() > ORACLE_MAX_VENDORS_PER_PRODUCT {
                return Err(AllocationError::OracleBoundExceeded {
                    product: code.clone(),
                    items,
                    vendors: vendors.len(),
                });
            }
        }
        solutions.push(enumerate(comp));
    }
    Ok(prepared.assemble(&solutions))
}

/// (awarded, small credit, sdvosb credit, cost) of a capacity-feasible assignment.
fn evaluate(comp: &Component, a: &Assignment) -> Option<(u64, u64, u64, u64)> {
    let mut used = vec![0u64; comp.cap_max.len()];
    let np = comp.products.len();
    let mut small = vec![0u64; np];
    let mut sdv = vec![0u64; np];
    let mut awarded = 0;
    let mut cost = 0;
    for (it, choice) in comp.items.iter().zip(a) {
        let Some(k) = choice else { continue };
        let o = &it.options[*k];
        for &c in &o.caps {
            used[c] += it.qty;
        }
        awarded += it.qty;
        cost += o.cost;
        if o.small {
            small[it.product] += it.qty;
        }
        if o.sdvosb {
            sdv[it.product] += it.qty;
        }
    }
    if used.iter().zip(&comp.cap_max).any(|(u, m)| u > m) {
        return None;
    }
    let small_credit = (0..np).map(|p| small[p].min(comp.req_small[p])).sum();
    let sdv_credit = (0..np).map(|p| sdv[p].min(comp.req_sdvosb[p])).sum();
    Some((awarded, small_credit, sdv_credit, cost))
}

fn better(a: (u64, u64, u64, u64), b: (u64, u64, u64, u64)) -> Ordering {
    a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(b.3.cmp(&a.3))
}

/// Canonical order of an award vector: vendor rank per item, unawarded last.
fn canonical(comp: &Component, a: &Assignment) -> Vec<usize> {
    comp.items.iter().zip(a).map(|(it, c)| c.map_or(usize::MAX, |k| it.options[k].vendor)).collect()
}

fn enumerate(comp: &Component) -> Assignment {
    let n = comp.items.len();
    let radix: Vec<usize> = comp.items.iter().map(|it| it.options.len() + 1).collect();
    let mut digits = vec![0usize; n];
    let to_assignment = |d: &[usize]| -> Assignment {
        d.iter().zip(&radix).map(|(&x, &r)| if x + 1 == r { None } else { Some(x) }).collect()
    };
    let mut best: Option<((u64, u64, u64, u64), Assignment)> = None;
    loop {
        let a = to_assignment(&digits);
        if let Some(v) = evaluate(comp, &a) {
            let replace = match &best {
                None => true,
                Some((bv, ba)) => match better(v, *bv) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => canonical(comp, &a) < canonical(comp, ba),
                },
            };
            if replace {
                best = Some((v, a));
            }
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == n {
                return best.expect("the empty award is always feasible").1;
            }
            digits[i] += 1;
            if digits[i] < radix[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}
