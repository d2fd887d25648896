//! Property batteries over generated instances, reported per invariant with
//! counterexamples instead of panics.

use rand::Rng;
use serde::Serialize;

use crate::generate::{generate, GenSpec, Support};
use crate::lowerbound::{sample_qi_family, verify_qi, QIFamily, QiVerdict};
use crate::lp::structure::key_label;
use crate::lp::{build_lp, instance_gamma, normalize_solution, solve_lp, solve_pipeline, LpError, DEFAULT_MAX_PATHS};
use crate::menu::{construct_menu, perturb_prices, sample_menu, MenuOptions};
use crate::model::{sample_realization, Instance};
use crate::oracle::{brute_force_utility, pbd_tail_check};
use crate::rng::{Purpose, Stream};
use crate::sim::{buyer_choice, MenuIndex, MenuState, Mode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    LpStructure,
    Subadditivity,
    Qi,
    Pbd,
    All,
}

impl Scope {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lp_structure" => Some(Scope::LpStructure),
            "subadditivity" => Some(Scope::Subadditivity),
            "qi" => Some(Scope::Qi),
            "pbd" => Some(Scope::Pbd),
            "all" => Some(Scope::All),
            _ => None,
        }
    }

    fn includes(self, other: Scope) -> bool {
        self == Scope::All || self == other
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// The first failure, described.
    pub counterexample: Option<String>,
}

impl Check {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            failures: 0,
            counterexample: None,
        }
    }

    fn record(&mut self, outcome: Result<(), String>) {
        self.cases += 1;
        if let Err(why) = outcome {
            self.failures += 1;
            self.counterexample.get_or_insert(why);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random instances per structural battery.
    pub instances: usize,
    pub pbd_vectors: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 100,
            pbd_vectors: 10_000,
        }
    }
}

/// Small instances cycling through d-single-minded, general, routing, and
/// tree settings.
pub fn structural_instance(k: usize, rng: &mut Stream) -> Instance {
    let spec = match k % 4 {
        0 => GenSpec::DSingleMinded {
            n: rng.gen_range(1..=8),
            m: rng.gen_range(1..=6),
            d: rng.gen_range(1..=3),
            capacity: rng.gen_range(1..=3),
            max_value: rng.gen_range(1..=4),
            support: Support::Full,
        },
        1 => GenSpec::GeneralSingleMinded {
            n: rng.gen_range(1..=8),
            m: rng.gen_range(1..=6),
            capacity: rng.gen_range(1..=3),
            max_value: rng.gen_range(1..=4),
            support: Support::Full,
        },
        2 => GenSpec::Graph {
            nodes: rng.gen_range(3..=6),
            extra_edges: rng.gen_range(0..=3),
            n: rng.gen_range(1..=6),
            capacity: rng.gen_range(1..=2),
            max_value: rng.gen_range(1..=3),
            support: Support::Full,
        },
        _ => GenSpec::Tree {
            nodes: rng.gen_range(2..=10),
            n: rng.gen_range(1..=8),
        },
    };
    generate(&spec, rng)
}

/// Single-minded or tree instances with at most five items.
pub fn small_item_instance(k: usize, rng: &mut Stream) -> Instance {
    let spec = match k % 3 {
        0 => GenSpec::DSingleMinded {
            n: rng.gen_range(2..=6),
            m: rng.gen_range(2..=5),
            d: rng.gen_range(1..=3),
            capacity: rng.gen_range(1..=3),
            max_value: rng.gen_range(1..=4),
            support: Support::Full,
        },
        1 => GenSpec::GeneralSingleMinded {
            n: rng.gen_range(2..=6),
            m: rng.gen_range(2..=5),
            capacity: rng.gen_range(1..=3),
            max_value: rng.gen_range(1..=4),
            support: Support::Full,
        },
        _ => GenSpec::Tree {
            nodes: rng.gen_range(3..=6),
            n: rng.gen_range(2..=6),
        },
    };
    generate(&spec, rng)
}

fn lp_structure(opts: VerifyOptions, out: &mut Vec<Check>) {
    let mut three_block = Check::new("three_block_law");
    let mut normalization = Check::new("normalization_preserves_objective");
    for k in 0..opts.instances {
        let mut rng = Stream::for_trial(opts.seed, k as u64, Purpose::Auxiliary);
        let inst = structural_instance(k, &mut rng);
        let gamma = instance_gamma(&inst);
        three_block.record(match solve_pipeline(&inst, gamma, true, DEFAULT_MAX_PATHS) {
            Ok(_) => Ok(()),
            Err(e) => Err(format!("instance {k} ({}): {e}", inst.kind.tag())),
        });
        normalization.record((|| -> Result<(), String> {
            let model = build_lp(&inst, gamma, DEFAULT_MAX_PATHS).map_err(|e| e.to_string())?;
            let sol = solve_lp(&model).map_err(|e| e.to_string())?;
            let norm = normalize_solution(&sol).map_err(|e: LpError| e.to_string())?;
            if (norm.objective - sol.objective).abs() > 1e-9 * sol.objective.max(1.0) {
                return Err(format!("instance {k}: objective {} became {}", sol.objective, norm.objective));
            }
            if norm.normalization_weight() > sol.normalization_weight() + 1e-9 {
                return Err(format!("instance {k}: normalization weight increased"));
            }
            Ok(())
        })());
    }
    out.push(three_block);
    out.push(normalization);
}

/// Every cover of a demanded bundle by other demanded bundles costs at least
/// the bundle's own price, for every price the menu can post.
pub fn check_subadditive(instance: &Instance) -> Result<(), String> {
    let solved = solve_pipeline(instance, instance_gamma(instance), true, DEFAULT_MAX_PATHS).map_err(|e| e.to_string())?;
    let rm = construct_menu(&solved.structures, MenuOptions::default());
    let entries: Vec<_> = rm.deterministic.iter().chain(rm.coins.iter().map(|(e, _)| e)).collect();
    let max_value = instance.max_value();
    let delta = crate::menu::perturbation_delta(max_value).unwrap_or(0.0);
    let price = |p: f64| p * (1.0 - delta);
    for s in &entries {
        let s_items = s.goods.items().expect("bundle entries");
        let others: Vec<_> = entries.iter().filter(|e| e.goods.key() != s.goods.key()).collect();
        if others.len() > 16 {
            return Err(format!("{} candidate cover entries exceed the enumeration limit", others.len()));
        }
        for mask in 1u32..(1 << others.len()) {
            let chosen: Vec<_> = (0..others.len()).filter(|k| mask & (1 << k) != 0).map(|k| others[k]).collect();
            let covers = s_items
                .iter()
                .all(|i| chosen.iter().any(|e| e.goods.items().unwrap().contains(i)));
            if !covers {
                continue;
            }
            let total: f64 = chosen.iter().map(|e| price(e.price)).sum();
            if total < price(s.price) - 1e-9 {
                let label = |e: &crate::menu::MenuEntry| format!("{}@{}", key_label(instance, &e.goods.key().unwrap()), e.price);
                return Err(format!(
                    "{} is undercut by the cover [{}] costing {total}",
                    label(s),
                    chosen.iter().map(|e| label(e)).collect::<Vec<_>>().join(", ")
                ));
            }
        }
    }
    Ok(())
}

/// Runs sampled menus on random orders and compares, at every arrival, the
/// restricted policy's utility with the exhaustive optimum.
pub fn check_utility_agreement(instance: &Instance, seed: u64, rounds: u64) -> Result<usize, String> {
    let solved = solve_pipeline(instance, instance_gamma(instance), true, DEFAULT_MAX_PATHS).map_err(|e| e.to_string())?;
    let rm = construct_menu(&solved.structures, MenuOptions::default());
    let caps = instance.capacities();
    let mut states = 0;
    for round in 0..rounds {
        let menu = perturb_prices(
            sample_menu(&rm, &mut Stream::for_trial(seed, round, Purpose::Menu)),
            instance.max_value(),
        );
        let values = sample_realization(instance, &mut Stream::for_trial(seed, round, Purpose::Realization)).values;
        let mut order: Vec<usize> = (0..instance.n()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut Stream::for_trial(seed, round, Purpose::Adversary));
        let index = MenuIndex::new(instance, &menu);
        for mode in [Mode::Alg, Mode::Ualg] {
            let mut state = MenuState::new(instance, &menu);
            for &b in &order {
                let v = values[b];
                let pick = buyer_choice(&caps, &index, &menu, &state, b, v, mode);
                let restricted = pick.map_or(0.0, |e| v as f64 - menu.entries[e].price);
                let best = brute_force_utility(instance, b, v, &menu, &state, mode).map_err(|e| e.to_string())?;
                states += 1;
                if (best.utility - restricted).abs() > 1e-9 {
                    return Err(format!(
                        "round {round}, {mode:?}: buyer '{}' with value {v} gets {restricted} from its own entries \
                         but {} from entries {:?}",
                        instance.buyers[b].id, best.utility, best.entries
                    ));
                }
                if let Some(e) = pick {
                    state.remaining[e] -= 1;
                    for &i in menu.entries[e].goods.items().unwrap() {
                        state.loads[i] += 1;
                    }
                }
            }
        }
    }
    Ok(states)
}

fn subadditivity(opts: VerifyOptions, out: &mut Vec<Check>) {
    let mut prices = Check::new("prices_subadditive");
    let mut agreement = Check::new("restricted_policy_matches_exhaustive_utility");
    for k in 0..opts.instances {
        let mut rng = Stream::for_trial(opts.seed, k as u64, Purpose::Auxiliary);
        let inst = small_item_instance(k, &mut rng);
        prices.record(check_subadditive(&inst).map_err(|e| format!("instance {k}: {e}")));
        agreement.record(check_utility_agreement(&inst, opts.seed, 5).map(|_| ()).map_err(|e| format!("instance {k}: {e}")));
    }
    out.push(prices);
    out.push(agreement);
}

/// Verifies a family at its own order, as one check.
pub fn family_check(name: &str, family: &QIFamily) -> Check {
    let mut c = Check::new(name);
    c.record(match verify_qi(family, family.r) {
        Ok(QiVerdict::Certified) => Ok(()),
        Ok(QiVerdict::Fails(cx)) => Err(format!("{cx:?}")),
        Err(e) => Err(e.to_string()),
    });
    c
}

fn qi(opts: VerifyOptions, out: &mut Vec<Check>) {
    let mut sampled = Check::new("sampled_families_certify");
    for (k, &(m, t, r, n, balanced)) in [(30, 2, 2, 20, false), (24, 3, 2, 4, true), (60, 2, 3, 10, false)].iter().enumerate() {
        let mut rng = Stream::for_trial(opts.seed, k as u64, Purpose::Auxiliary);
        sampled.record(match sample_qi_family(m, t, r, n, balanced, &mut rng, 100) {
            Ok(f) if f.is_certified() => Ok(()),
            Ok(_) => Err(format!("({m},{t},{r},{n}) returned uncertified")),
            Err(e) => Err(format!("({m},{t},{r},{n}): {e}")),
        });
    }
    out.push(sampled);
    let broken = QIFamily::new(4, 2, 2, vec![vec![0, 0, 1, 1], vec![0, 0, 1, 1]]).expect("well-formed");
    let detected = family_check("broken_family", &broken);
    let mut negative = Check::new("broken_family_rejected");
    negative.record(match detected.counterexample {
        Some(_) => Ok(()),
        None => Err("duplicated partitions were certified".into()),
    });
    negative.counterexample = negative.counterexample.or(detected.counterexample.map(|c| format!("expected: {c}")));
    out.push(negative);
}

fn pbd(opts: VerifyOptions, out: &mut Vec<Check>) {
    let mut c = Check::new("pbd_tail_lemma");
    let mut rng = Stream::for_trial(opts.seed, 0, Purpose::Auxiliary);
    for k in 0..opts.pbd_vectors {
        let len = rng.gen_range(0..=25);
        // Mix of uniform and small probabilities so that μ < 1 is common.
        let scale = if k % 2 == 0 { 1.0 } else { 0.1 };
        let ps: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() * scale).collect();
        let v = pbd_tail_check(&ps).expect("length within limit");
        c.record(if v.holds { Ok(()) } else { Err(format!("{ps:?}: tail {} < bound {}", v.tail, v.bound)) });
    }
    out.push(c);
}

pub fn verify_suite(scope: Scope, opts: VerifyOptions) -> Report {
    let mut checks = Vec::new();
    if scope.includes(Scope::LpStructure) {
        lp_structure(opts, &mut checks);
    }
    if scope.includes(Scope::Subadditivity) {
        subadditivity(opts, &mut checks);
    }
    if scope.includes(Scope::Qi) {
        qi(opts, &mut checks);
    }
    if scope.includes(Scope::Pbd) {
        pbd(opts, &mut checks);
    }
    Report { checks }
}
