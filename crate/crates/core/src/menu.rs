//! Randomized static menus built from a classified LP optimum.
//!
//! For every demand group `S` with important value `w`, the menu always holds
//! `|A_S|` copies at price `w + 1`. When `w` is crucial and its mass outweighs
//! the tail above it, extra copies go on sale at price `w`: `⌊x⌋` of them when
//! `x > 1`, otherwise a single copy that appears with probability
//! `max{x, x/q}`. Routing types draw a concrete path per copy after sampling.

use std::collections::HashMap;

use rand::Rng;
use serde_json::json;

use crate::lp::BundleStructure;
use crate::model::{DemandKey, Instance};
use crate::rng::{Purpose, Stream, StreamId};

#[derive(Clone, Debug, PartialEq)]
pub enum Goods {
    Bundle(Vec<usize>),
    /// A routing copy; `path` is filled in by [`instantiate_graph_menu`].
    Route {
        key: DemandKey,
        path: Option<Vec<usize>>,
    },
    /// Every item; offered to every buyer.
    All(Vec<usize>),
}

impl Goods {
    /// Items consumed by a purchase, or `None` for an unrouted copy.
    pub fn items(&self) -> Option<&[usize]> {
        match self {
            Goods::Bundle(items) | Goods::All(items) => Some(items),
            Goods::Route { path, .. } => path.as_deref(),
        }
    }

    /// The demand group this entry is dedicated to; `None` for universal entries.
    pub fn key(&self) -> Option<DemandKey> {
        match self {
            Goods::Bundle(items) => Some(DemandKey::Bundle(items.clone())),
            Goods::Route { key, .. } => Some(key.clone()),
            Goods::All(_) => None,
        }
    }
}

/// Which price level of its group an entry sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tier {
    /// Price `w + 1`.
    Above,
    /// Price `w`.
    Important,
    /// The single all-items entry.
    Grand,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MenuEntry {
    pub goods: Goods,
    pub price: f64,
    pub copies: u32,
    pub tier: Tier,
}

impl MenuEntry {
    pub fn to_json(&self, instance: &Instance) -> serde_json::Value {
        let goods = match &self.goods {
            Goods::Bundle(items) | Goods::All(items) => json!(names(instance, items)),
            Goods::Route { path: Some(p), .. } => json!(names(instance, p)),
            Goods::Route { key, path: None } => crate::lp::structure::key_json(instance, key),
        };
        json!({"goods": goods, "price": self.price, "copies": self.copies})
    }
}

fn names<'a>(instance: &'a Instance, items: &[usize]) -> Vec<&'a str> {
    items.iter().map(|&e| instance.items[e].id.as_str()).collect()
}

/// A posted menu, fixed before any buyer arrives.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Menu {
    pub entries: Vec<MenuEntry>,
}

impl Menu {
    pub fn to_json(&self, instance: &Instance) -> serde_json::Value {
        json!(self.entries.iter().map(|e| e.to_json(instance)).collect::<Vec<_>>())
    }
}

/// Which Algorithm-1 branch fired for a group.
#[derive(Clone, Debug, PartialEq)]
pub enum Branch {
    /// No crucial value: only the `w + 1` copies.
    NoCrucial,
    /// Crucial value whose mass does not beat the tail.
    TailDominates,
    /// `x > 1`: `copies` deterministic copies at `w`, plus an optional coin copy
    /// under ceiling randomization.
    Floor { copies: u32, extra_coin: Option<f64> },
    /// `x ≤ 1`: one coin copy at `w`.
    Coin { probability: f64 },
    /// A routing type without any path: nothing is offered.
    Unroutable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub key: DemandKey,
    pub important_value: u32,
    pub branch: Branch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomizedMenu {
    pub deterministic: Vec<MenuEntry>,
    /// Single-copy entries and their inclusion probabilities.
    pub coins: Vec<(MenuEntry, f64)>,
    pub provenance: Vec<Provenance>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MenuOptions {
    /// Offer `⌈x⌉` copies with probability `frac(x)` instead of `⌊x⌋`.
    pub ceil_randomization: bool,
}

fn goods_for(s: &BundleStructure) -> Goods {
    match &s.key {
        DemandKey::Bundle(items) => Goods::Bundle(items.clone()),
        key @ DemandKey::Route(..) => Goods::Route {
            key: key.clone(),
            path: None,
        },
    }
}

/// Algorithm 1 over every classified group. Prices are unperturbed integers.
pub fn construct_menu(structures: &[BundleStructure], opts: MenuOptions) -> RandomizedMenu {
    let mut deterministic = Vec::new();
    let mut coins = Vec::new();
    let mut provenance = Vec::new();
    for s in structures {
        let w = s.important_value;
        if s.is_route() && s.paths.is_empty() {
            provenance.push(Provenance {
                key: s.key.clone(),
                important_value: w,
                branch: Branch::Unroutable,
            });
            continue;
        }
        deterministic.push(MenuEntry {
            goods: goods_for(s),
            price: (w + 1) as f64,
            copies: s.buyers.len() as u32,
            tier: Tier::Above,
        });
        let at_w = |copies| MenuEntry {
            goods: goods_for(s),
            price: w as f64,
            copies,
            tier: Tier::Important,
        };
        let branch = match s.crucial_mass {
            None => Branch::NoCrucial,
            Some(x) if x * w as f64 <= s.tail_value => Branch::TailDominates,
            Some(x) if x > 1.0 => {
                let copies = x.floor() as u32;
                deterministic.push(at_w(copies));
                let frac = x - x.floor();
                let extra_coin = (opts.ceil_randomization && frac > 0.0).then_some(frac);
                if let Some(p) = extra_coin {
                    coins.push((at_w(1), p));
                }
                Branch::Floor { copies, extra_coin }
            }
            Some(x) => {
                let q = s.q_at(w);
                assert!(q > 0.0, "crucial value with zero probability mass");
                let probability = x.max(x / q).min(1.0);
                coins.push((at_w(1), probability));
                Branch::Coin { probability }
            }
        };
        provenance.push(Provenance {
            key: s.key.clone(),
            important_value: w,
            branch,
        });
    }
    RandomizedMenu {
        deterministic,
        coins,
        provenance,
    }
}

/// Includes each coin entry independently with its probability.
pub fn sample_menu(rmenu: &RandomizedMenu, stream: &mut Stream) -> Menu {
    let mut entries = rmenu.deterministic.clone();
    for (entry, p) in &rmenu.coins {
        let u: f64 = stream.gen();
        if u < *p {
            entries.push(entry.clone());
        }
    }
    Menu { entries }
}

/// `δ = 1/(4R)`.
pub fn perturbation_delta(max_value: u32) -> Option<f64> {
    (max_value > 0).then(|| 1.0 / (4.0 * max_value as f64))
}

/// Scales every price by `1 − δ` so that a buyer whose value equals a price
/// strictly prefers buying. Skipped when all values are zero.
pub fn perturb_prices(mut menu: Menu, max_value: u32) -> Menu {
    if let Some(delta) = perturbation_delta(max_value) {
        for entry in &mut menu.entries {
            entry.price *= 1.0 - delta;
        }
    }
    menu
}

/// Roulette weights over a type's paths for a copy at the given tier.
pub fn path_weights(s: &BundleStructure, tier: Tier) -> Vec<f64> {
    let w = s.important_value;
    let mut weights = vec![0.0; s.paths.len()];
    for (v, masses) in s.values.iter().zip(&s.path_mass) {
        let take = match tier {
            Tier::Important => *v == w,
            Tier::Above => *v > w,
            Tier::Grand => false,
        };
        if take {
            for (acc, m) in weights.iter_mut().zip(masses) {
                *acc += m;
            }
        }
    }
    weights
}

fn roulette(weights: &[f64], stream: &mut Stream) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        // No LP mass at this level. Such a copy is priced above every value
        // that reached it in the LP, so the path choice is immaterial.
        return 0;
    }
    let u: f64 = stream.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Gives every routing copy an independently drawn path, proportional to the
/// LP mass at its price level. Each copy becomes its own entry, in draw order:
/// buyers take the first affordable copy, so merging copies by path would
/// sell low-index paths first and skew edge loads away from the LP.
pub fn instantiate_graph_menu(menu: &Menu, structures: &[BundleStructure], stream: &mut Stream) -> Menu {
    let by_key: HashMap<&DemandKey, &BundleStructure> = structures.iter().map(|s| (&s.key, s)).collect();
    let mut entries = Vec::with_capacity(menu.entries.len());
    for entry in &menu.entries {
        let Goods::Route { key, path: None } = &entry.goods else {
            entries.push(entry.clone());
            continue;
        };
        let s = by_key[key];
        let weights = path_weights(s, entry.tier);
        for _ in 0..entry.copies {
            let p = roulette(&weights, stream);
            entries.push(MenuEntry {
                goods: Goods::Route {
                    key: key.clone(),
                    path: Some(s.paths[p].clone()),
                },
                price: entry.price,
                copies: 1,
                tier: entry.tier,
            });
        }
    }
    Menu { entries }
}

/// One copy of all items at price `2·FOPT_γ`.
pub fn alg2_menu(instance: &Instance, fopt_gamma: f64) -> Menu {
    assert!(fopt_gamma >= 0.0);
    Menu {
        entries: vec![MenuEntry {
            goods: Goods::All((0..instance.m()).collect()),
            price: 2.0 * fopt_gamma,
            copies: 1,
            tier: Tier::Grand,
        }],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mechanism {
    LpMenu,
    Alg2,
    /// LP menu with probability 1/3, the grand-bundle menu otherwise.
    Combined,
}

impl Mechanism {
    pub fn tag(&self) -> &'static str {
        match self {
            Mechanism::LpMenu => "lp_menu",
            Mechanism::Alg2 => "alg2",
            Mechanism::Combined => "combined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lp_menu" => Some(Mechanism::LpMenu),
            "alg2" => Some(Mechanism::Alg2),
            "combined" => Some(Mechanism::Combined),
            _ => None,
        }
    }
}

pub const LP_ARM_PROBABILITY: f64 = 1.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arm {
    LpMenu,
    Alg2,
}

/// Everything needed to post a menu in any trial.
#[derive(Clone, Debug)]
pub struct PreparedMechanism {
    pub kind: Mechanism,
    pub randomized: RandomizedMenu,
    pub structures: Vec<BundleStructure>,
    pub alg2: Menu,
    pub max_value: u32,
}

/// A menu drawn for one trial, with the streams that produced it.
#[derive(Clone, Debug)]
pub struct DrawnMenu {
    pub menu: Menu,
    pub arm: Arm,
    pub streams: Vec<StreamId>,
}

impl PreparedMechanism {
    pub fn new(
        instance: &Instance,
        kind: Mechanism,
        structures: Vec<BundleStructure>,
        fopt_gamma: f64,
        opts: MenuOptions,
    ) -> Self {
        Self {
            kind,
            randomized: construct_menu(&structures, opts),
            structures,
            alg2: alg2_menu(instance, fopt_gamma),
            max_value: instance.max_value(),
        }
    }

    pub fn choose_arm(&self, stream: &mut Stream) -> Arm {
        match self.kind {
            Mechanism::LpMenu => Arm::LpMenu,
            Mechanism::Alg2 => Arm::Alg2,
            Mechanism::Combined => {
                if stream.gen::<f64>() < LP_ARM_PROBABILITY {
                    Arm::LpMenu
                } else {
                    Arm::Alg2
                }
            }
        }
    }

    /// Samples, routes, and perturbs the LP menu.
    pub fn draw_lp_menu(&self, menu_stream: &mut Stream, routing_stream: &mut Stream) -> Menu {
        let mut menu = sample_menu(&self.randomized, menu_stream);
        if menu.entries.iter().any(|e| matches!(e.goods, Goods::Route { .. })) {
            menu = instantiate_graph_menu(&menu, &self.structures, routing_stream);
        }
        perturb_prices(menu, self.max_value)
    }

    pub fn draw(&self, master_seed: u64, trial: u64) -> DrawnMenu {
        let mut mix = Stream::for_trial(master_seed, trial, Purpose::MechanismMix);
        let arm = self.choose_arm(&mut mix);
        match arm {
            Arm::Alg2 => DrawnMenu {
                menu: self.alg2.clone(),
                arm,
                streams: vec![mix.id()],
            },
            Arm::LpMenu => {
                let mut coins = Stream::for_trial(master_seed, trial, Purpose::Menu);
                let mut routing = Stream::for_trial(master_seed, trial, Purpose::Routing);
                let menu = self.draw_lp_menu(&mut coins, &mut routing);
                DrawnMenu {
                    menu,
                    arm,
                    streams: vec![mix.id(), coins.id(), routing.id()],
                }
            }
        }
    }
}
