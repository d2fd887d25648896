//! Brute-force references for small instances: the offline optimum of one
//! realization, the exact expected optimum, a buyer's unrestricted best
//! purchase against a menu, and the Poisson-binomial tail bound.

use thiserror::Error;

use crate::lp::{simple_paths, DEFAULT_MAX_PATHS};
use crate::menu::Menu;
use crate::model::{Demand, Instance};
use crate::sim::{Mode, MenuState};

/// Positive-value buyers above which `offline_opt` refuses.
pub const OPT_BUYER_LIMIT: usize = 20;
/// Realizations above which `expected_opt` refuses.
pub const REALIZATION_LIMIT: f64 = 1e6;
/// Candidate entries above which `brute_force_utility` refuses.
pub const UTILITY_ENTRY_LIMIT: usize = 15;
/// Probability vectors longer than this are refused by `pbd_tail_check`.
pub const PBD_LIMIT: usize = 25;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{what} is {size}, above the oracle limit {limit}")]
    TooLarge { what: &'static str, size: f64, limit: f64 },
    #[error("path enumeration failed: {0}")]
    Paths(String),
}

/// Items given to one accepted buyer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub buyer: usize,
    pub items: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactWelfare {
    pub value: f64,
    pub witness: Vec<Assignment>,
}

/// Recomputes the welfare of an allocation, or explains why it is
/// infeasible.
pub fn check_allocation(instance: &Instance, values: &[u32], witness: &[Assignment]) -> Result<f64, String> {
    let mut loads = vec![0u32; instance.m()];
    let mut seen = vec![false; instance.n()];
    let mut total = 0.0;
    for a in witness {
        if std::mem::replace(&mut seen[a.buyer], true) {
            return Err(format!("buyer {} served twice", a.buyer));
        }
        let buyer = &instance.buyers[a.buyer];
        let ok = match &buyer.demand {
            Demand::Bundle(s) => s.iter().all(|i| a.items.contains(i)),
            Demand::Route { source, target } => connects(instance, &a.items, *source, *target),
        };
        if !ok {
            return Err(format!("buyer {} does not receive its demand", a.buyer));
        }
        for &i in &a.items {
            loads[i] += 1;
            if loads[i] > instance.items[i].capacity {
                return Err(format!("item {} over capacity", instance.items[i].id));
            }
        }
        total += values[a.buyer] as f64;
    }
    Ok(total)
}

/// Whether the given edges connect `s` and `t`.
fn connects(instance: &Instance, edges: &[usize], s: usize, t: usize) -> bool {
    let Some(graph) = &instance.graph else {
        return false;
    };
    let mut parent: Vec<usize> = (0..graph.nodes.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &e in edges {
        let (u, v) = graph.edges[e];
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        parent[a] = b;
    }
    find(&mut parent, s) == find(&mut parent, t)
}

/// Item sets a buyer may be served with: its bundle, or each simple path.
fn options(instance: &Instance, buyer: usize) -> Result<Vec<Vec<usize>>, OracleError> {
    match &instance.buyers[buyer].demand {
        Demand::Bundle(s) => Ok(vec![s.clone()]),
        Demand::Route { source, target } => {
            simple_paths(instance, *source, *target, DEFAULT_MAX_PATHS).map_err(|e| OracleError::Paths(e.to_string()))
        }
    }
}

/// Exact maximum-welfare allocation for one realization, by depth-first
/// branch and bound over buyers in decreasing value order.
pub fn offline_opt(instance: &Instance, values: &[u32]) -> Result<ExactWelfare, OracleError> {
    let mut order: Vec<usize> = (0..instance.n()).filter(|&b| values[b] > 0).collect();
    if order.len() > OPT_BUYER_LIMIT {
        return Err(OracleError::TooLarge {
            what: "positive-value buyer count",
            size: order.len() as f64,
            limit: OPT_BUYER_LIMIT as f64,
        });
    }
    order.sort_by_key(|&b| (std::cmp::Reverse(values[b]), b));
    let opts: Vec<Vec<Vec<usize>>> = order.iter().map(|&b| options(instance, b)).collect::<Result<_, _>>()?;
    let mut suffix = vec![0.0; order.len() + 1];
    for k in (0..order.len()).rev() {
        let routable = if opts[k].is_empty() { 0.0 } else { values[order[k]] as f64 };
        suffix[k] = suffix[k + 1] + routable;
    }

    struct Search<'a> {
        order: &'a [usize],
        opts: &'a [Vec<Vec<usize>>],
        values: &'a [u32],
        suffix: &'a [f64],
        caps: Vec<u32>,
        loads: Vec<u32>,
        current: Vec<Assignment>,
        best: f64,
        best_set: Vec<Assignment>,
    }

    impl Search<'_> {
        fn go(&mut self, k: usize, acc: f64) {
            if acc > self.best {
                self.best = acc;
                self.best_set = self.current.clone();
            }
            if k == self.order.len() || acc + self.suffix[k] <= self.best {
                return;
            }
            let b = self.order[k];
            for p in 0..self.opts[k].len() {
                let items = &self.opts[k][p];
                if items.iter().all(|&i| self.loads[i] < self.caps[i]) {
                    for &i in items {
                        self.loads[i] += 1;
                    }
                    self.current.push(Assignment {
                        buyer: b,
                        items: items.clone(),
                    });
                    self.go(k + 1, acc + self.values[b] as f64);
                    self.current.pop();
                    for &i in &self.opts[k][p] {
                        self.loads[i] -= 1;
                    }
                }
            }
            self.go(k + 1, acc);
        }
    }

    let mut search = Search {
        order: &order,
        opts: &opts,
        values,
        suffix: &suffix,
        caps: instance.capacities(),
        loads: vec![0; instance.m()],
        current: Vec::new(),
        best: 0.0,
        best_set: Vec::new(),
    };
    search.go(0, 0.0);
    let mut witness = search.best_set;
    witness.sort_by_key(|a| a.buyer);
    Ok(ExactWelfare {
        value: search.best,
        witness,
    })
}

/// Exact E[OPT] over the product of all buyer supports.
pub fn expected_opt(instance: &Instance) -> Result<f64, OracleError> {
    let count: f64 = instance.buyers.iter().map(|b| b.dist.entries().len() as f64).product();
    if count > REALIZATION_LIMIT {
        return Err(OracleError::TooLarge {
            what: "realization count",
            size: count,
            limit: REALIZATION_LIMIT,
        });
    }
    let n = instance.n();
    let mut digits = vec![0usize; n];
    let mut total = 0.0;
    loop {
        let mut p = 1.0;
        let mut values = vec![0u32; n];
        for (b, &d) in digits.iter().enumerate() {
            let (v, q) = instance.buyers[b].dist.entries()[d];
            values[b] = v;
            p *= q;
        }
        total += p * offline_opt(instance, &values)?.value;
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == n {
                return Ok(total);
            }
            digits[k] += 1;
            if digits[k] < instance.buyers[k].dist.entries().len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// A buyer's utility-maximizing set of menu entries.
#[derive(Clone, Debug, PartialEq)]
pub struct BestPurchase {
    pub entries: Vec<usize>,
    pub utility: f64,
}

/// Exhaustive utility maximization over subsets of available entries, one
/// copy each. Entries priced above `value` or disjoint from the buyer's
/// demand can never be part of a strictly profitable set, so only the others
/// count toward the size limit. Ties keep the first subset in mask order, so
/// the empty purchase wins when nothing beats zero utility.
pub fn brute_force_utility(
    instance: &Instance,
    buyer: usize,
    value: u32,
    menu: &Menu,
    state: &MenuState,
    mode: Mode,
) -> Result<BestPurchase, OracleError> {
    let b = &instance.buyers[buyer];
    let relevant = |items: &[usize]| match &b.demand {
        Demand::Bundle(s) => items.iter().any(|i| s.contains(i)),
        Demand::Route { .. } => !items.is_empty(),
    };
    let cand: Vec<usize> = (0..menu.entries.len())
        .filter(|&e| {
            let entry = &menu.entries[e];
            state.remaining[e] > 0
                && entry.price <= value as f64
                && entry.goods.items().is_some_and(|items| relevant(items))
        })
        .collect();
    if cand.len() > UTILITY_ENTRY_LIMIT {
        return Err(OracleError::TooLarge {
            what: "candidate entry count",
            size: cand.len() as f64,
            limit: UTILITY_ENTRY_LIMIT as f64,
        });
    }
    let caps = instance.capacities();
    let mut best = BestPurchase {
        entries: Vec::new(),
        utility: 0.0,
    };
    for mask in 1u32..(1 << cand.len()) {
        let chosen: Vec<usize> = (0..cand.len()).filter(|k| mask & (1 << k) != 0).map(|k| cand[k]).collect();
        let price: f64 = chosen.iter().map(|&e| menu.entries[e].price).sum();
        let utility = value as f64 - price;
        if utility <= best.utility {
            continue;
        }
        let mut items: Vec<usize> = chosen.iter().flat_map(|&e| menu.entries[e].goods.items().unwrap().to_vec()).collect();
        if mode == Mode::Alg {
            let mut loads = state.loads.clone();
            if items.iter().any(|&i| {
                loads[i] += 1;
                loads[i] > caps[i]
            }) {
                continue;
            }
        }
        items.sort_unstable();
        items.dedup();
        let covered = match &b.demand {
            Demand::Bundle(s) => s.iter().all(|i| items.binary_search(i).is_ok()),
            Demand::Route { source, target } => connects(instance, &items, *source, *target),
        };
        if covered {
            best = BestPurchase { entries: chosen, utility };
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PbdVerdict {
    pub mu: f64,
    /// `Pr[X ≥ μ/2]`.
    pub tail: f64,
    /// `0.5·min(1, μ)`.
    pub bound: f64,
    pub holds: bool,
}

/// Exact Poisson-binomial pmf by convolution.
pub fn pbd_pmf(probabilities: &[f64]) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for &p in probabilities {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &mass) in pmf.iter().enumerate() {
            next[k] += mass * (1.0 - p);
            next[k + 1] += mass * p;
        }
        pmf = next;
    }
    pmf
}

/// Checks `Pr[X ≥ μ/2] ≥ 0.5·min(1, μ)` for a sum of independent Bernoullis.
/// The comparison allows 1e-12 of rounding.
pub fn pbd_tail_check(probabilities: &[f64]) -> Result<PbdVerdict, OracleError> {
    if probabilities.len() > PBD_LIMIT {
        return Err(OracleError::TooLarge {
            what: "probability vector length",
            size: probabilities.len() as f64,
            limit: PBD_LIMIT as f64,
        });
    }
    let mu: f64 = probabilities.iter().sum();
    let pmf = pbd_pmf(probabilities);
    let tail: f64 = pmf.iter().enumerate().filter(|(k, _)| *k as f64 >= mu / 2.0).map(|(_, p)| p).sum();
    let bound = 0.5 * mu.min(1.0);
    Ok(PbdVerdict {
        mu,
        tail,
        bound,
        holds: tail >= bound - 1e-12,
    })
}

/// `Pr[Bin(n, p) ≥ k]`, summed from the upper end.
pub fn binomial_tail(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let ln_choose = |n: u64, j: u64| -> f64 { (1..=j).map(|i| ((n - j + i) as f64 / i as f64).ln()).sum() };
    (k..=n)
        .map(|j| {
            let log = ln_choose(n, j) + j as f64 * p.ln() + (n - j) as f64 * (-p).ln_1p();
            log.exp()
        })
        .sum::<f64>()
        .min(1.0)
}
