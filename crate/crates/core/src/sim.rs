//! Sequential execution of a posted menu, the capacity-blind benchmark run,
//! arrival-order adversaries, and the seeded Monte Carlo driver.
//!
//! A buyer looks only at entries dedicated to its own demand group and at
//! universal entries, and buys the cheapest one it can afford (ties go to the
//! lower entry index). In `Alg` mode an entry is available only while every
//! item it uses has spare capacity; `Ualg` ignores capacities but still
//! respects copy counts.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::menu::{Arm, Menu, PreparedMechanism};
use crate::model::{sample_realization, DemandKey, Instance};
use crate::rng::{Purpose, Stream};

/// Trials per parallel work unit; chunk results are reduced in order so the
/// statistics do not depend on scheduling.
pub const CHUNK: u64 = 1000;

/// Active buyers above which exact worst-order search is refused.
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Random orders tried by the heuristic adversary besides its greedy order.
pub const BEST_OF_K: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    Alg,
    Ualg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adversary {
    Random,
    ExhaustiveWorst,
    GreedyHeuristic,
    /// Buyers in instance order.
    Fixed,
    /// Exhaustive when few buyers are active, heuristic otherwise.
    Auto,
}

impl Adversary {
    pub fn tag(&self) -> &'static str {
        match self {
            Adversary::Random => "random",
            Adversary::ExhaustiveWorst => "exhaustive-worst",
            Adversary::GreedyHeuristic => "greedy-heuristic",
            Adversary::Fixed => "fixed",
            Adversary::Auto => "auto",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(Adversary::Random),
            "exhaustive-worst" => Some(Adversary::ExhaustiveWorst),
            "greedy-heuristic" => Some(Adversary::GreedyHeuristic),
            "fixed" => Some(Adversary::Fixed),
            "auto" => Some(Adversary::Auto),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(
        "exhaustive-worst order needs at most {limit} active buyers, found {active}; \
         use greedy-heuristic or auto"
    )]
    TooManyActive { active: usize, limit: usize },
}

/// A permutation of the buyers and the strategy that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrivalOrder {
    pub order: Vec<usize>,
    pub strategy: Adversary,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Purchase {
    pub buyer: usize,
    pub entry: usize,
    pub price: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutcome {
    pub mode: Mode,
    pub accepted: Vec<Purchase>,
    pub welfare: f64,
    /// Copies consumed per item.
    pub loads: Vec<u32>,
}

impl SimOutcome {
    pub fn accepted_buyers(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.accepted.iter().map(|p| p.buyer).collect();
        b.sort_unstable();
        b
    }
}

/// ALG and UALG on the same inputs, with the buyers they disagree on.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedOutcome {
    pub alg: SimOutcome,
    pub ualg: SimOutcome,
    /// Accepted by UALG but not by ALG.
    pub blocked: Vec<usize>,
    /// Accepted by ALG but not by UALG. Always empty for bundle demands; a
    /// routing buyer blocked on one path may still buy a copy on another.
    pub extra: Vec<usize>,
}

impl PairedOutcome {
    pub fn blocked_value(&self, values: &[u32]) -> f64 {
        self.blocked.iter().map(|&b| values[b] as f64).sum()
    }

    pub fn extra_value(&self, values: &[u32]) -> f64 {
        self.extra.iter().map(|&b| values[b] as f64).sum()
    }
}

/// Per-buyer candidate entries of a menu, cheapest first.
#[derive(Clone, Debug)]
pub struct MenuIndex {
    candidates: Vec<Vec<usize>>,
}

impl MenuIndex {
    pub fn new(instance: &Instance, menu: &Menu) -> Self {
        let mut by_key: HashMap<DemandKey, Vec<usize>> = HashMap::new();
        let mut universal = Vec::new();
        for (i, entry) in menu.entries.iter().enumerate() {
            match entry.goods.key() {
                Some(key) => by_key.entry(key).or_default().push(i),
                None => universal.push(i),
            }
        }
        let mut cache: HashMap<DemandKey, Vec<usize>> = HashMap::new();
        let candidates = instance
            .buyers
            .iter()
            .map(|b| {
                let key = b.demand.key();
                cache
                    .entry(key.clone())
                    .or_insert_with(|| {
                        let mut c: Vec<usize> = by_key.get(&key).cloned().unwrap_or_default();
                        c.extend(&universal);
                        c.sort_by(|&x, &y| {
                            menu.entries[x]
                                .price
                                .total_cmp(&menu.entries[y].price)
                                .then(x.cmp(&y))
                        });
                        c
                    })
                    .clone()
            })
            .collect();
        Self { candidates }
    }

    pub fn candidates(&self, buyer: usize) -> &[usize] {
        &self.candidates[buyer]
    }

    /// Whether the buyer can afford any of its entries, ignoring availability.
    pub fn is_active(&self, menu: &Menu, buyer: usize, value: u32) -> bool {
        self.candidates[buyer]
            .first()
            .is_some_and(|&e| menu.entries[e].price <= value as f64)
    }
}

/// Mutable counters of one run.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MenuState {
    pub remaining: Vec<u32>,
    pub loads: Vec<u32>,
}

impl MenuState {
    pub fn new(instance: &Instance, menu: &Menu) -> Self {
        Self {
            remaining: menu.entries.iter().map(|e| e.copies).collect(),
            loads: vec![0; instance.m()],
        }
    }
}

/// The restricted buyer policy: cheapest available own-group or universal
/// entry priced at most `value`.
pub fn buyer_choice(
    capacities: &[u32],
    index: &MenuIndex,
    menu: &Menu,
    state: &MenuState,
    buyer: usize,
    value: u32,
    mode: Mode,
) -> Option<usize> {
    for &e in index.candidates(buyer) {
        let entry = &menu.entries[e];
        if entry.price > value as f64 {
            return None;
        }
        if state.remaining[e] == 0 {
            continue;
        }
        let Some(items) = entry.goods.items() else {
            continue;
        };
        if mode == Mode::Alg && items.iter().any(|&i| state.loads[i] >= capacities[i]) {
            continue;
        }
        return Some(e);
    }
    None
}

fn apply(menu: &Menu, state: &mut MenuState, entry: usize) {
    state.remaining[entry] -= 1;
    for &i in menu.entries[entry].goods.items().expect("bought entries are routed") {
        state.loads[i] += 1;
    }
}

/// Runs buyers in `order` against `menu` in either mode.
pub fn run(instance: &Instance, index: &MenuIndex, menu: &Menu, values: &[u32], order: &[usize], mode: Mode) -> SimOutcome {
    let capacities = instance.capacities();
    let mut state = MenuState::new(instance, menu);
    let mut accepted = Vec::new();
    let mut welfare = 0.0;
    for &b in order {
        if let Some(e) = buyer_choice(&capacities, index, menu, &state, b, values[b], mode) {
            apply(menu, &mut state, e);
            if mode == Mode::Alg {
                debug_assert!(menu.entries[e]
                    .goods
                    .items()
                    .unwrap()
                    .iter()
                    .all(|&i| state.loads[i] <= capacities[i]));
            }
            accepted.push(Purchase {
                buyer: b,
                entry: e,
                price: menu.entries[e].price,
            });
            welfare += values[b] as f64;
        }
    }
    SimOutcome {
        mode,
        accepted,
        welfare,
        loads: state.loads,
    }
}

pub fn run_alg(instance: &Instance, menu: &Menu, values: &[u32], order: &[usize]) -> SimOutcome {
    run(instance, &MenuIndex::new(instance, menu), menu, values, order, Mode::Alg)
}

pub fn run_ualg(instance: &Instance, menu: &Menu, values: &[u32], order: &[usize]) -> SimOutcome {
    run(instance, &MenuIndex::new(instance, menu), menu, values, order, Mode::Ualg)
}

/// ALG and UALG on the same order, diffed.
pub fn run_paired(instance: &Instance, index: &MenuIndex, menu: &Menu, values: &[u32], order: &[usize]) -> PairedOutcome {
    let alg = run(instance, index, menu, values, order, Mode::Alg);
    let ualg = run(instance, index, menu, values, order, Mode::Ualg);
    let a = alg.accepted_buyers();
    let u = ualg.accepted_buyers();
    let blocked = u.iter().copied().filter(|b| a.binary_search(b).is_err()).collect();
    let extra = a.iter().copied().filter(|b| u.binary_search(b).is_err()).collect();
    PairedOutcome {
        alg,
        ualg,
        blocked,
        extra,
    }
}

fn alg_welfare(instance: &Instance, index: &MenuIndex, menu: &Menu, values: &[u32], order: &[usize]) -> f64 {
    run(instance, index, menu, values, order, Mode::Alg).welfare
}

/// Active buyers first (in the given relative order), then everyone else in
/// index order. Inactive buyers never buy, so their position is irrelevant.
fn split_active(index: &MenuIndex, menu: &Menu, values: &[u32]) -> (Vec<usize>, Vec<usize>) {
    (0..values.len()).partition(|&b| index.is_active(menu, b, values[b]))
}

/// Minimum ALG welfare over orders of the active buyers, by memoized search
/// over (placed set, counters).
fn worst_order(instance: &Instance, index: &MenuIndex, menu: &Menu, values: &[u32], active: &[usize]) -> Vec<usize> {
    let capacities = instance.capacities();
    let k = active.len();
    let mut memo: HashMap<(u32, MenuState), f64> = HashMap::new();

    fn best(
        mask: u32,
        state: &MenuState,
        k: usize,
        ctx: &(&[u32], &MenuIndex, &Menu, &[u32], &[usize]),
        memo: &mut HashMap<(u32, MenuState), f64>,
    ) -> f64 {
        if mask == (1u32 << k) - 1 {
            return 0.0;
        }
        if let Some(v) = memo.get(&(mask, state.clone())) {
            return *v;
        }
        let (caps, index, menu, values, active) = *ctx;
        let mut min = f64::INFINITY;
        for i in 0..k {
            if mask & (1 << i) != 0 {
                continue;
            }
            let b = active[i];
            let mut next = state.clone();
            let gain = match buyer_choice(caps, index, menu, state, b, values[b], Mode::Alg) {
                Some(e) => {
                    apply(menu, &mut next, e);
                    values[b] as f64
                }
                None => 0.0,
            };
            min = min.min(gain + best(mask | (1 << i), &next, k, ctx, memo));
        }
        memo.insert((mask, state.clone()), min);
        min
    }

    let ctx = (capacities.as_slice(), index, menu, values, active);
    let mut state = MenuState::new(instance, menu);
    let mut mask = 0u32;
    let mut order = Vec::with_capacity(k);
    let target = best(0, &state, k, &ctx, &mut memo);
    let mut spent = 0.0;
    // Walk the memo greedily, taking the first buyer that stays on an optimum.
    while order.len() < k {
        let mut chosen = None;
        for i in 0..k {
            if mask & (1 << i) != 0 {
                continue;
            }
            let b = active[i];
            let mut next = state.clone();
            let gain = match buyer_choice(&capacities, index, menu, &state, b, values[b], Mode::Alg) {
                Some(e) => {
                    apply(menu, &mut next, e);
                    values[b] as f64
                }
                None => 0.0,
            };
            let rest = best(mask | (1 << i), &next, k, &ctx, &mut memo);
            if spent + gain + rest <= target + 1e-9 {
                chosen = Some((i, next, gain));
                break;
            }
        }
        let (i, next, gain) = chosen.expect("some buyer attains the optimum");
        order.push(active[i]);
        mask |= 1 << i;
        state = next;
        spent += gain;
    }
    order
}

/// Produces an arrival order after seeing the menu and all values.
pub fn adversary_order(
    strategy: Adversary,
    instance: &Instance,
    menu: &Menu,
    index: &MenuIndex,
    values: &[u32],
    stream: &mut Stream,
) -> Result<ArrivalOrder, SimError> {
    let n = instance.n();
    let order = match strategy {
        Adversary::Fixed => (0..n).collect(),
        Adversary::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(stream);
            order
        }
        Adversary::ExhaustiveWorst => {
            let (active, idle) = split_active(index, menu, values);
            if active.len() > EXHAUSTIVE_LIMIT {
                return Err(SimError::TooManyActive {
                    active: active.len(),
                    limit: EXHAUSTIVE_LIMIT,
                });
            }
            let mut order = worst_order(instance, index, menu, values, &active);
            order.extend(idle);
            order
        }
        Adversary::GreedyHeuristic => greedy_order(instance, menu, index, values, stream),
        Adversary::Auto => {
            let (active, idle) = split_active(index, menu, values);
            if active.len() <= EXHAUSTIVE_LIMIT {
                let mut order = worst_order(instance, index, menu, values, &active);
                order.extend(idle);
                order
            } else {
                greedy_order(instance, menu, index, values, stream)
            }
        }
    };
    Ok(ArrivalOrder { order, strategy })
}

/// Low-value affordable buyers first, so that they burn contested capacity;
/// then the worst of that order and `BEST_OF_K` uniform orders.
fn greedy_order(instance: &Instance, menu: &Menu, index: &MenuIndex, values: &[u32], stream: &mut Stream) -> Vec<usize> {
    let (mut active, idle) = split_active(index, menu, values);
    active.sort_by_key(|&b| (values[b], b));
    let mut best = active.clone();
    best.extend(&idle);
    let mut best_welfare = alg_welfare(instance, index, menu, values, &best);
    for _ in 0..BEST_OF_K {
        let mut cand = active.clone();
        cand.shuffle(stream);
        cand.extend(&idle);
        let w = alg_welfare(instance, index, menu, values, &cand);
        if w < best_welfare {
            best_welfare = w;
            best = cand;
        }
    }
    best
}

/// Mean, standard error, and 95% normal half-width.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub ci95: f64,
}

#[derive(Clone, Debug, Default)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn summary(&self) -> Summary {
        if self.n == 0.0 {
            return Summary::default();
        }
        let mean = self.sum / self.n;
        let var = if self.n > 1.0 {
            ((self.sum_sq - self.n * mean * mean) / (self.n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let se = (var / self.n).sqrt();
        Summary {
            mean,
            se,
            ci95: 1.96 * se,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Accumulator {
    alg: Moments,
    ualg: Moments,
    blocked_count: Moments,
    blocked_value: Moments,
    extra_count: Moments,
    alg_loads: Vec<Moments>,
    ualg_loads: Vec<Moments>,
    lp_arm: Moments,
    identity_violations: u64,
}

impl Accumulator {
    fn new(m: usize) -> Self {
        Self {
            alg_loads: vec![Moments::default(); m],
            ualg_loads: vec![Moments::default(); m],
            ..Default::default()
        }
    }

    fn merge(&mut self, o: &Accumulator) {
        self.alg.merge(&o.alg);
        self.ualg.merge(&o.ualg);
        self.blocked_count.merge(&o.blocked_count);
        self.blocked_value.merge(&o.blocked_value);
        self.extra_count.merge(&o.extra_count);
        for (a, b) in self.alg_loads.iter_mut().zip(&o.alg_loads) {
            a.merge(b);
        }
        for (a, b) in self.ualg_loads.iter_mut().zip(&o.ualg_loads) {
            a.merge(b);
        }
        self.lp_arm.merge(&o.lp_arm);
        self.identity_violations += o.identity_violations;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stats {
    pub trials: u64,
    pub alg: Summary,
    pub ualg: Summary,
    pub blocked_count: Summary,
    pub blocked_value: Summary,
    /// Buyers accepted by ALG only; nonzero only on routing instances.
    pub extra_count: Summary,
    pub alg_loads: Vec<Summary>,
    pub ualg_loads: Vec<Summary>,
    /// Fraction of trials that posted the LP menu.
    pub lp_arm_fraction: f64,
    /// Runs where `ALG = UALG − blocked + extra` failed; always zero.
    pub identity_violations: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct McConfig {
    pub trials: u64,
    pub adversary: Adversary,
    pub master_seed: u64,
}

/// One trial: draw the menu, draw values, let the adversary order buyers, run
/// both modes.
pub fn run_trial(
    instance: &Instance,
    mechanism: &PreparedMechanism,
    adversary: Adversary,
    master_seed: u64,
    trial: u64,
) -> Result<(PairedOutcome, Vec<u32>, Arm), SimError> {
    let drawn = mechanism.draw(master_seed, trial);
    let realization = sample_realization(instance, &mut Stream::for_trial(master_seed, trial, Purpose::Realization));
    let index = MenuIndex::new(instance, &drawn.menu);
    let mut adv = Stream::for_trial(master_seed, trial, Purpose::Adversary);
    let order = adversary_order(adversary, instance, &drawn.menu, &index, &realization.values, &mut adv)?;
    let paired = run_paired(instance, &index, &drawn.menu, &realization.values, &order.order);
    Ok((paired, realization.values, drawn.arm))
}

/// Seeded Monte Carlo estimate; bit-identical for a fixed `master_seed`.
pub fn monte_carlo(instance: &Instance, mechanism: &PreparedMechanism, cfg: McConfig) -> Result<Stats, SimError> {
    assert!(cfg.trials >= 1, "at least one trial");
    let m = instance.m();
    let chunks = cfg.trials.div_ceil(CHUNK);
    let parts: Vec<Result<Accumulator, SimError>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Accumulator::new(m);
            let end = ((c + 1) * CHUNK).min(cfg.trials);
            for trial in c * CHUNK..end {
                let (p, values, arm) = run_trial(instance, mechanism, cfg.adversary, cfg.master_seed, trial)?;
                let bv = p.blocked_value(&values);
                let identity = p.ualg.welfare - bv + p.extra_value(&values);
                if identity != p.alg.welfare {
                    acc.identity_violations += 1;
                }
                acc.alg.push(p.alg.welfare);
                acc.ualg.push(p.ualg.welfare);
                acc.blocked_count.push(p.blocked.len() as f64);
                acc.blocked_value.push(bv);
                acc.extra_count.push(p.extra.len() as f64);
                for (mo, l) in acc.alg_loads.iter_mut().zip(&p.alg.loads) {
                    mo.push(*l as f64);
                }
                for (mo, l) in acc.ualg_loads.iter_mut().zip(&p.ualg.loads) {
                    mo.push(*l as f64);
                }
                acc.lp_arm.push(if arm == Arm::LpMenu { 1.0 } else { 0.0 });
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accumulator::new(m);
    for part in parts {
        total.merge(&part?);
    }
    Ok(Stats {
        trials: cfg.trials,
        alg: total.alg.summary(),
        ualg: total.ualg.summary(),
        blocked_count: total.blocked_count.summary(),
        blocked_value: total.blocked_value.summary(),
        extra_count: total.extra_count.summary(),
        alg_loads: total.alg_loads.iter().map(Moments::summary).collect(),
        ualg_loads: total.ualg_loads.iter().map(Moments::summary).collect(),
        lp_arm_fraction: total.lp_arm.summary().mean,
        identity_violations: total.identity_violations,
    })
}
