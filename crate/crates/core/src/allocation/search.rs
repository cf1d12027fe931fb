//! Branch-and-bound over per-item vendor choices.
//!
//! The search runs twice. The first pass finds the optimal lexicographic key
//! using a quota-aware greedy branching order. The second pass walks choices
//! in canonical order (vendor rank, unawarded last) and stops at the first
//! complete assignment reaching that key, which is the tie-break winner.
//!
//! Both passes prune with an optimistic key: every still-awardable item is
//! counted as awarded at its cheapest feasible bid, quota credit assumes all
//! small-eligible items go small, and the cost of meeting the quota deficit
//! is bounded below by a fractional cover over the per-item premium of the
//! cheapest small (or SDVOSB) bid.
//!
//! Two reductions keep ties between identical bids from blowing up the tree.
//! An option beaten on cost (or equal on cost from an earlier-ranked vendor)
//! by an uncapacitated option with at least its small and SDVOSB flags is
//! never chosen. Items with identical option lists take choices in
//! non-decreasing canonical rank, which keeps the lexicographically smallest
//! member of every permutation class.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::problem::{Assignment, BidOption, Component};

/// Which quantities phases 2 and 3 reward, and whether cost matters.
pub(crate) struct Objective {
    pub small_cap: Vec<u64>,
    pub sdv_cap: Vec<u64>,
    pub with_cost: bool,
}

impl Objective {
    pub fn standard(comp: &Component) -> Self {
        Self { small_cap: comp.req_small.clone(), sdv_cap: comp.req_sdvosb.clone(), with_cost: true }
    }

    /// Maximize awarded quantity, then the uncapped small quantity of product `p`.
    pub fn max_small_of(comp: &Component, p: usize) -> Self {
        let mut small_cap = vec![0; comp.products.len()];
        small_cap[p] = comp.product_total[p];
        Self { small_cap, sdv_cap: vec![0; comp.products.len()], with_cost: false }
    }
}

/// Lexicographic objective value; `Ord` ranks better keys greater.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Key {
    pub awarded: u64,
    pub small: u64,
    pub sdv: u64,
    pub cost: u64,
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.awarded
            .cmp(&other.awarded)
            .then(self.small.cmp(&other.small))
            .then(self.sdv.cmp(&other.sdv))
            .then(other.cost.cmp(&self.cost))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Search<'a> {
    comp: &'a Component,
    obj: &'a Objective,
    used: Vec<u64>,
    small: Vec<u64>,
    sdv: Vec<u64>,
    awarded: u64,
    cost: u64,
    assign: Assignment,
    nodes: u64,
    max_nodes: u64,
    aborted: bool,
    best: Option<(Key, Assignment)>,
    // scratch for bound()
    small_rem: Vec<u64>,
    sdv_rem: Vec<u64>,
    small_prem: Vec<Vec<(u64, u64)>>,
    sdv_prem: Vec<Vec<(u64, u64)>>,
    live: Vec<Vec<bool>>,
    prev_twin: Vec<Option<usize>>,
}

fn dominates(a: &BidOption, b: &BidOption) -> bool {
    a.caps.is_empty()
        && a.small >= b.small
        && a.sdvosb >= b.sdvosb
        && (a.cost < b.cost || (a.cost == b.cost && a.vendor < b.vendor))
}

fn same_options(a: &[BidOption], b: &[BidOption]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            (x.vendor, x.cost, x.small, x.sdvosb) == (y.vendor, y.cost, y.small, y.sdvosb) && x.caps == y.caps
        })
}

fn reductions(comp: &Component) -> (Vec<Vec<bool>>, Vec<Option<usize>>) {
    let live = comp
        .items
        .iter()
        .map(|it| it.options.iter().map(|o| !it.options.iter().any(|a| dominates(a, o))).collect())
        .collect();
    let prev_twin = (0..comp.items.len())
        .map(|k| {
            let it = &comp.items[k];
            (0..k).rev().find(|&t| {
                let tw = &comp.items[t];
                tw.product == it.product && tw.qty == it.qty && same_options(&tw.options, &it.options)
            })
        })
        .collect();
    (live, prev_twin)
}

/// Returns the optimal assignment, or `None` if the node budget ran out.
pub(crate) fn solve(comp: &Component, obj: &Objective, max_nodes: u64) -> Option<Assignment> {
    let np = comp.products.len();
    let (live, prev_twin) = reductions(comp);
    let mut s = Search {
        comp,
        obj,
        used: vec![0; comp.cap_max.len()],
        small: vec![0; np],
        sdv: vec![0; np],
        awarded: 0,
        cost: 0,
        assign: vec![None; comp.items.len()],
        nodes: 0,
        max_nodes,
        aborted: false,
        best: None,
        small_rem: vec![0; np],
        sdv_rem: vec![0; np],
        small_prem: vec![Vec::new(); np],
        sdv_prem: vec![Vec::new(); np],
        live,
        prev_twin,
    };
    s.optimize(0);
    if s.aborted {
        return None;
    }
    let (target, incumbent) = s.best.take().expect("the empty award is always feasible");
    if !obj.with_cost {
        return Some(incumbent);
    }
    if s.first_reaching(0, target) {
        Some(s.assign)
    } else if s.aborted {
        None
    } else {
        unreachable!("second pass must reach the key found by the first")
    }
}

impl Search<'_> {
    fn key(&self) -> Key {
        let credit = |tally: &[u64], cap: &[u64]| tally.iter().zip(cap).map(|(t, c)| (*t).min(*c)).sum();
        Key {
            awarded: self.awarded,
            small: credit(&self.small, &self.obj.small_cap),
            sdv: credit(&self.sdv, &self.obj.sdv_cap),
            cost: if self.obj.with_cost { self.cost } else { 0 },
        }
    }

    /// Lowest option index item `k` may take; `None` always remains allowed.
    fn min_choice(&self, k: usize) -> usize {
        match self.prev_twin[k] {
            Some(t) => self.assign[t].unwrap_or(self.comp.items[k].options.len()),
            None => 0,
        }
    }

    fn fits(&self, o: &BidOption, qty: u64) -> bool {
        o.caps.iter().all(|&c| self.used[c] + qty <= self.comp.cap_max[c])
    }

    fn apply(&mut self, k: usize, choice: Option<usize>) {
        self.assign[k] = choice;
        if let Some(j) = choice {
            let it = &self.comp.items[k];
            let o = &it.options[j];
            for &c in &o.caps {
                self.used[c] += it.qty;
            }
            self.awarded += it.qty;
            self.cost += o.cost;
            if o.small {
                self.small[it.product] += it.qty;
            }
            if o.sdvosb {
                self.sdv[it.product] += it.qty;
            }
        }
    }

    fn undo(&mut self, k: usize) {
        if let Some(j) = self.assign[k].take() {
            let it = &self.comp.items[k];
            let o = &it.options[j];
            for &c in &o.caps {
                self.used[c] -= it.qty;
            }
            self.awarded -= it.qty;
            self.cost -= o.cost;
            if o.small {
                self.small[it.product] -= it.qty;
            }
            if o.sdvosb {
                self.sdv[it.product] -= it.qty;
            }
        }
    }

    /// Optimistic key over all completions of items `k..`.
    fn bound(&mut self, k: usize) -> Key {
        let np = self.comp.products.len();
        for p in 0..np {
            self.small_rem[p] = 0;
            self.sdv_rem[p] = 0;
            self.small_prem[p].clear();
            self.sdv_prem[p].clear();
        }
        let mut awarded = self.awarded;
        let mut cost = self.cost;
        for (it, live) in self.comp.items[k..].iter().zip(&self.live[k..]) {
            let (mut best, mut best_small, mut best_sdv) = (u64::MAX, u64::MAX, u64::MAX);
            for (o, _) in it.options.iter().zip(live).filter(|(o, &l)| l && self.fits(o, it.qty)) {
                best = best.min(o.cost);
                if o.small {
                    best_small = best_small.min(o.cost);
                }
                if o.sdvosb {
                    best_sdv = best_sdv.min(o.cost);
                }
            }
            if best == u64::MAX {
                continue;
            }
            awarded += it.qty;
            cost += best;
            if best_small != u64::MAX {
                self.small_rem[it.product] += it.qty;
                self.small_prem[it.product].push((best_small - best, it.qty));
            }
            if best_sdv != u64::MAX {
                self.sdv_rem[it.product] += it.qty;
                self.sdv_prem[it.product].push((best_sdv - best, it.qty));
            }
        }
        let mut small_credit = 0;
        let mut sdv_credit = 0;
        let mut premium = 0;
        for p in 0..np {
            let cap = self.obj.small_cap[p];
            let reach = (self.small[p] + self.small_rem[p]).min(cap);
            small_credit += reach;
            let small_deficit = reach.saturating_sub(self.small[p]);

            let cap = self.obj.sdv_cap[p];
            let reach = (self.sdv[p] + self.sdv_rem[p]).min(cap);
            sdv_credit += reach;
            let sdv_deficit = reach.saturating_sub(self.sdv[p]);

            if self.obj.with_cost {
                let a = fractional_cover(&mut self.small_prem[p], small_deficit);
                let b = fractional_cover(&mut self.sdv_prem[p], sdv_deficit);
                premium += a.max(b);
            }
        }
        Key {
            awarded,
            small: small_credit,
            sdv: sdv_credit,
            cost: if self.obj.with_cost { cost + premium } else { 0 },
        }
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            self.aborted = true;
        }
        !self.aborted
    }

    fn optimize(&mut self, k: usize) {
        if !self.tick() {
            return;
        }
        if k == self.comp.items.len() {
            let key = self.key();
            if self.best.as_ref().is_none_or(|(b, _)| key > *b) {
                self.best = Some((key, self.assign.clone()));
            }
            return;
        }
        if let Some((b, _)) = self.best {
            if self.bound(k) <= b {
                return;
            }
        }
        let it = &self.comp.items[k];
        let p = it.product;
        let small_short = self.small[p] < self.obj.small_cap[p];
        let sdv_short = self.sdv[p] < self.obj.sdv_cap[p];
        let live = &self.live[k];
        let mut order: Vec<usize> = (self.min_choice(k)..it.options.len())
            .filter(|&j| live[j] && self.fits(&it.options[j], it.qty))
            .collect();
        order.sort_by_key(|&j| {
            let o = &it.options[j];
            let rank = if sdv_short && o.sdvosb {
                0
            } else if small_short && o.small {
                1
            } else {
                2
            };
            (rank, o.cost, o.vendor)
        });
        for j in order {
            self.apply(k, Some(j));
            self.optimize(k + 1);
            self.undo(k);
            if self.aborted {
                return;
            }
        }
        self.optimize(k + 1);
    }

    /// Depth-first in canonical order; leaves the winning assignment in `self.assign`.
    fn first_reaching(&mut self, k: usize, target: Key) -> bool {
        if !self.tick() {
            return false;
        }
        if k == self.comp.items.len() {
            return self.key() == target;
        }
        if self.bound(k) < target {
            return false;
        }
        let n_opts = self.comp.items[k].options.len();
        for j in self.min_choice(k)..n_opts {
            let it = &self.comp.items[k];
            if !self.live[k][j] || !self.fits(&it.options[j], it.qty) {
                continue;
            }
            self.apply(k, Some(j));
            if self.first_reaching(k + 1, target) {
                return true;
            }
            self.undo(k);
            if self.aborted {
                return false;
            }
        }
        self.first_reaching(k + 1, target)
    }
}

/// Lower bound on the premium of covering `deficit` lbs, items taken
/// fractionally in order of premium per lb.
fn fractional_cover(cands: &mut [(u64, u64)], deficit: u64) -> u64 {
    if deficit == 0 {
        return 0;
    }
    cands.sort_unstable_by(|a, b| (u128::from(a.0) * u128::from(b.1)).cmp(&(u128::from(b.0) * u128::from(a.1))));
    let mut left = deficit;
    let mut total = 0u64;
    for &(prem, qty) in cands.iter() {
        if qty >= left {
            total += (u128::from(prem) * u128::from(left) / u128::from(qty)) as u64;
            return total;
        }
        total += prem;
        left -= qty;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_order_is_lexicographic_with_cost_reversed() {
        let k = |a, s, d, c| Key { awarded: a, small: s, sdv: d, cost: c };
        assert!(k(2, 0, 0, 100) > k(1, 9, 9, 0));
        assert!(k(2, 1, 0, 100) > k(2, 0, 9, 0));
        assert!(k(2, 1, 1, 5) > k(2, 1, 1, 6));
    }

    #[test]
    fn fractional_cover_takes_cheapest_per_pound_first() {
        let mut c = vec![(100, 10), (10, 10), (50, 20)];
        // 10 lbs at 1/lb, then 5 of 20 lbs at 2.5/lb
        assert_eq!(fractional_cover(&mut c, 15), 10 + 12);
        assert_eq!(fractional_cover(&mut c, 0), 0);
    }
}
