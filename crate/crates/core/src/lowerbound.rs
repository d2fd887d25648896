//! Hard instances built from qualitatively independent (QI) partitions.
//!
//! A family of `N` labelings of `[m]` into `t` classes is `r`-way QI when
//! every choice of one class from each of `r` distinct labelings has a common
//! element. Buyers are the classes, items have `B` copies, and `r = B + 1`
//! makes it impossible to serve buyers from more than `B` groups, while any
//! `B` groups fit together. Each buyer has value 1 with probability `1/t`.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{instance_gamma, solve_pipeline, LpError, DEFAULT_MAX_PATHS};
use crate::menu::{Mechanism, MenuOptions, PreparedMechanism};
use crate::model::{sample_realization, Buyer, Demand, Instance, InstanceKind, Item, ValueDistribution};
use crate::oracle::binomial_tail;
use crate::rng::{Purpose, Stream};
use crate::sim::{run, MenuIndex, Mode};

/// Largest `C(N, r)·t^r` that `verify_qi` will enumerate.
pub const VERIFY_BUDGET: f64 = 1e8;
pub const DEFAULT_MAX_RESTARTS: usize = 100;

#[derive(Debug, Error)]
pub enum LbError {
    #[error("verification needs C({n}, {r})·{t}^{r} = {cost:.3e} intersections, above the budget {VERIFY_BUDGET:e}")]
    Budget { n: usize, r: usize, t: u32, cost: f64 },
    #[error("parameters outside the construction's hypotheses: {0}")]
    Hypothesis(String),
    #[error("invalid family: {0}")]
    Invalid(String),
    #[error("no certified family after {restarts} restarts; union-bound failure estimate {estimate:.3e}")]
    Exhausted { restarts: usize, estimate: f64 },
    #[error("covering property fails for vectors {u} and {v}: no coordinate difference is {s} mod p")]
    NotCovering { u: usize, v: usize, s: u32 },
    #[error("family is not certified at order {0}")]
    Uncertified(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// `N` labelings of `[m]` with labels in `0..t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QIFamily {
    pub m: usize,
    pub t: u32,
    pub r: usize,
    pub partitions: Vec<Vec<u32>>,
    /// Only `certify` sets this; imported flags are ignored.
    #[serde(default, skip_deserializing)]
    certified: bool,
}

/// Why a family is not QI.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Counterexample {
    EmptyClass { partition: usize, class: u32 },
    EmptyIntersection { partitions: Vec<usize>, classes: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum QiVerdict {
    Certified,
    Fails(Counterexample),
}

impl QIFamily {
    pub fn new(m: usize, t: u32, r: usize, partitions: Vec<Vec<u32>>) -> Result<Self, LbError> {
        let f = Self {
            m,
            t,
            r,
            partitions,
            certified: false,
        };
        f.check_shape()?;
        Ok(f)
    }

    pub fn from_json_str(text: &str) -> Result<Self, LbError> {
        let f: Self = serde_json::from_str(text).map_err(|e| LbError::Invalid(e.to_string()))?;
        f.check_shape()?;
        Ok(f)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("family serializes")
    }

    fn check_shape(&self) -> Result<(), LbError> {
        if self.t == 0 || self.r == 0 {
            return Err(LbError::Invalid("t and r must be positive".into()));
        }
        for (i, p) in self.partitions.iter().enumerate() {
            if p.len() != self.m {
                return Err(LbError::Invalid(format!("labeling {i} has length {}, expected {}", p.len(), self.m)));
            }
            if let Some(&l) = p.iter().find(|&&l| l >= self.t) {
                return Err(LbError::Invalid(format!("labeling {i} uses label {l} ≥ t = {}", self.t)));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_certified(&self) -> bool {
        self.certified
    }

    /// Verifies at the family's own order and marks it certified.
    pub fn certify(mut self) -> Result<(Self, QiVerdict), LbError> {
        let verdict = verify_qi(&self, self.r)?;
        self.certified = verdict == QiVerdict::Certified;
        Ok((self, verdict))
    }

    /// Elements of class `a` of labeling `i`.
    pub fn class(&self, i: usize, a: u32) -> Vec<usize> {
        (0..self.m).filter(|&e| self.partitions[i][e] == a).collect()
    }

    pub fn class_sizes(&self, i: usize) -> Vec<usize> {
        let mut sizes = vec![0; self.t as usize];
        for &l in &self.partitions[i] {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

type Bits = Vec<u64>;

fn bitsets(family: &QIFamily) -> Vec<Vec<Bits>> {
    let words = family.m.div_ceil(64);
    family
        .partitions
        .iter()
        .map(|p| {
            let mut classes = vec![vec![0u64; words]; family.t as usize];
            for (e, &l) in p.iter().enumerate() {
                classes[l as usize][e / 64] |= 1 << (e % 64);
            }
            classes
        })
        .collect()
}

/// Depth-first over class choices for one tuple of labelings; returns the
/// first choice with an empty intersection.
fn empty_choice(sets: &[Vec<Bits>], tuple: &[usize], acc: &Bits, depth: usize, classes: &mut Vec<u32>) -> bool {
    if depth == tuple.len() {
        return false;
    }
    for (a, class) in sets[tuple[depth]].iter().enumerate() {
        let next: Bits = acc.iter().zip(class).map(|(x, y)| x & y).collect();
        classes.push(a as u32);
        if next.iter().all(|&w| w == 0) {
            // Any completion stays empty.
            classes.resize(tuple.len(), 0);
            return true;
        }
        if empty_choice(sets, tuple, &next, depth + 1, classes) {
            return true;
        }
        classes.pop();
    }
    false
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Checks every `r`-tuple of labelings and every class choice. Also checks
/// that each labeling uses all `t` labels.
pub fn verify_qi(family: &QIFamily, r: usize) -> Result<QiVerdict, LbError> {
    family.check_shape()?;
    let (n, t) = (family.n(), family.t);
    for i in 0..n {
        if let Some(a) = family.class_sizes(i).iter().position(|&s| s == 0) {
            return Ok(QiVerdict::Fails(Counterexample::EmptyClass {
                partition: i,
                class: a as u32,
            }));
        }
    }
    if n < r {
        return Ok(QiVerdict::Certified);
    }
    let cost = choose(n, r) * (t as f64).powi(r as i32);
    if cost > VERIFY_BUDGET {
        return Err(LbError::Budget { n, r, t, cost });
    }
    let sets = bitsets(family);
    let full: Bits = {
        let mut f = vec![u64::MAX; family.m.div_ceil(64)];
        if family.m % 64 != 0 {
            *f.last_mut().unwrap() = (1u64 << (family.m % 64)) - 1;
        }
        f
    };
    let found = (0..=n - r).into_par_iter().find_map_first(|first| {
        let mut rest: Vec<usize> = (first + 1..first + r).collect();
        loop {
            let mut tuple = Vec::with_capacity(r);
            tuple.push(first);
            tuple.extend(&rest);
            let mut classes = Vec::with_capacity(r);
            if empty_choice(&sets, &tuple, &full, 0, &mut classes) {
                return Some(Counterexample::EmptyIntersection {
                    partitions: tuple,
                    classes,
                });
            }
            if rest.is_empty() || !next_tail(&mut rest, first + 1, n) {
                return None;
            }
        }
    });
    Ok(found.map_or(QiVerdict::Certified, QiVerdict::Fails))
}

/// Advances a combination drawn from `lo..n`.
fn next_tail(c: &mut [usize], lo: usize, n: usize) -> bool {
    for x in c.iter_mut() {
        *x -= lo;
    }
    let more = next_combination(c, n - lo);
    for x in c.iter_mut() {
        *x += lo;
    }
    more
}

/// `(e·r/t)·exp(m/(r·t^r))`, a lower bound on the largest `r`-way QI family.
pub fn poljak_tuza_bound(m: usize, t: u32, r: usize) -> f64 {
    std::f64::consts::E * r as f64 / t as f64 * (m as f64 / (r as f64 * (t as f64).powi(r as i32))).exp()
}

/// Union bound on the probability that `n` uniform labelings are not QI.
pub fn failure_estimate(m: usize, t: u32, r: usize, n: usize) -> f64 {
    let tr = (t as f64).powi(r as i32);
    choose(n, r) * tr * (1.0 - 1.0 / tr).powi(m as i32)
}

fn uniform_labeling<R: Rng + ?Sized>(m: usize, t: u32, rng: &mut R) -> Vec<u32> {
    loop {
        let l: Vec<u32> = (0..m).map(|_| rng.gen_range(0..t)).collect();
        let mut seen = vec![false; t as usize];
        for &x in &l {
            seen[x as usize] = true;
        }
        if seen.iter().all(|&s| s) {
            return l;
        }
    }
}

fn balanced_labeling<R: Rng + ?Sized>(m: usize, t: u32, rng: &mut R) -> Vec<u32> {
    let mut l: Vec<u32> = (0..m).map(|e| (e % t as usize) as u32).collect();
    l.shuffle(rng);
    l
}

/// Samples `target_n` independent labelings and certifies them, resampling
/// the whole family on failure.
pub fn sample_qi_family(
    m: usize,
    t: u32,
    r: usize,
    target_n: usize,
    balanced: bool,
    stream: &mut Stream,
    max_restarts: usize,
) -> Result<QIFamily, LbError> {
    if t == 0 || r == 0 {
        return Err(LbError::Hypothesis("t and r must be positive".into()));
    }
    if (m as u64) < t as u64 {
        return Err(LbError::Hypothesis(format!("m = {m} < t = {t} leaves a class empty")));
    }
    if balanced && m % t as usize != 0 {
        return Err(LbError::Hypothesis(format!("balanced labelings need t | m, got m = {m}, t = {t}")));
    }
    for _ in 0..max_restarts.max(1) {
        let partitions = (0..target_n)
            .map(|_| {
                if balanced {
                    balanced_labeling(m, t, stream)
                } else {
                    uniform_labeling(m, t, stream)
                }
            })
            .collect();
        let (family, verdict) = QIFamily::new(m, t, r, partitions)?.certify()?;
        if verdict == QiVerdict::Certified {
            return Ok(family);
        }
    }
    Err(LbError::Exhausted {
        restarts: max_restarts.max(1),
        estimate: failure_estimate(m, t, r, target_n),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Setting {
    General { m: usize },
    DCapped { d: usize },
}

/// The number of classes used by the construction for `B` copies.
pub fn choose_t(setting: Setting, b: u32) -> Result<u32, LbError> {
    let (size, exponent, name) = match setting {
        Setting::General { m } => {
            if m < 16 {
                return Err(LbError::Hypothesis(format!("m = {m} < 16")));
            }
            (m as f64, b as f64 + 2.0, "m")
        }
        Setting::DCapped { d } => (d as f64, b as f64 + 1.0, "d"),
    };
    if b < 1 {
        return Err(LbError::Hypothesis("B must be at least 1".into()));
    }
    if b as f64 >= size.ln() {
        return Err(LbError::Hypothesis(format!("B = {b} ≥ ln {name} = {:.4}", size.ln())));
    }
    let t = (size / (2.0 * b as f64 * size.ln())).powf(1.0 / exponent).floor();
    if t < 1.0 {
        return Err(LbError::Hypothesis(format!("{name} = {size} is too small: t would be {t}")));
    }
    Ok(t as u32)
}

/// Vectors over `Z_p` whose pairwise differences hit every residue.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveringFamily {
    pub p: u32,
    pub ell: usize,
    pub vectors: Vec<Vec<u32>>,
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

impl CoveringFamily {
    pub fn check(&self) -> Result<(), LbError> {
        if !is_prime(self.p) {
            return Err(LbError::Invalid(format!("p = {} is not prime", self.p)));
        }
        for (k, u) in self.vectors.iter().enumerate() {
            if u.len() != self.ell || u.iter().any(|&x| x >= self.p) {
                return Err(LbError::Invalid(format!("vector {k} is not in Z_{}^{}", self.p, self.ell)));
            }
        }
        let p = self.p;
        for (a, u) in self.vectors.iter().enumerate() {
            for (b, v) in self.vectors.iter().enumerate() {
                if a == b {
                    continue;
                }
                let mut hit = vec![false; p as usize];
                for (x, y) in u.iter().zip(v) {
                    hit[((x + p - y) % p) as usize] = true;
                }
                if let Some(s) = hit.iter().position(|&h| !h) {
                    return Err(LbError::NotCovering { u: a, v: b, s: s as u32 });
                }
            }
        }
        Ok(())
    }
}

/// Maps a covering family to pairwise QI `p`-partitions of `[ℓ] × Z_p`:
/// element `(i, j)` (index `i·p + j`) lies in class `j − u_i` of vector `u`.
pub fn aam_to_qi(cov: &CoveringFamily) -> Result<QIFamily, LbError> {
    cov.check()?;
    let p = cov.p;
    let partitions = cov
        .vectors
        .iter()
        .map(|u| {
            (0..cov.ell)
                .flat_map(|i| (0..p).map(move |j| (j + p - u[i]) % p))
                .collect()
        })
        .collect();
    let (family, verdict) = QIFamily::new(cov.ell * p as usize, p, 2, partitions)?.certify()?;
    match verdict {
        QiVerdict::Certified => Ok(family),
        QiVerdict::Fails(c) => Err(LbError::Invalid(format!("covering family did not yield QI partitions: {c:?}"))),
    }
}

/// Items `e0..e{m-1}` with `B` copies; buyer `g{i}c{a}` wants class `a` of
/// labeling `i`. Buyers are numbered group-major.
pub fn build_lb_instance(family: &QIFamily, b: u32) -> Result<Instance, LbError> {
    if !family.is_certified() || family.r != b as usize + 1 {
        return Err(LbError::Uncertified(b as usize + 1));
    }
    let t = family.t;
    let items = (0..family.m)
        .map(|e| Item {
            id: format!("e{e}"),
            capacity: b,
        })
        .collect();
    let dist = ValueDistribution::bernoulli(1.0 / t as f64);
    let mut buyers = Vec::new();
    for i in 0..family.n() {
        for a in 0..t {
            buyers.push(Buyer {
                id: format!("g{i}c{a}"),
                demand: Demand::Bundle(family.class(i, a)),
                endpoints: None,
                dist: dist.clone(),
            });
        }
    }
    Instance::from_parts(InstanceKind::GeneralSingleMinded, items, buyers, None, None)
        .map_err(|e| LbError::Invalid(e.to_string()))
}

/// Group structure of a lower-bound instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GroupLayout {
    pub t: u32,
    pub b: u32,
    pub groups: usize,
}

impl GroupLayout {
    /// Reads `t` from the buyer count per group (ids `g{i}c{a}`) and `B` from
    /// the item capacity.
    pub fn infer(instance: &Instance) -> Result<Self, LbError> {
        let bad = |why: &str| LbError::Invalid(format!("not a lower-bound instance: {why}"));
        let mut t = 0u32;
        while instance.buyers.get(t as usize).is_some_and(|x| x.id.starts_with("g0c")) {
            t += 1;
        }
        if t == 0 || instance.n() % t as usize != 0 {
            return Err(bad("buyer ids are not g{i}c{a} in group-major order"));
        }
        for (k, buyer) in instance.buyers.iter().enumerate() {
            if buyer.id != format!("g{}c{}", k / t as usize, k % t as usize) {
                return Err(bad("buyer ids are not g{i}c{a} in group-major order"));
            }
        }
        let b = instance.min_capacity();
        if instance.items.iter().any(|i| i.capacity != b) {
            return Err(bad("capacities differ"));
        }
        Ok(Self {
            t,
            b,
            groups: instance.n() / t as usize,
        })
    }

    pub fn group(&self, buyer: usize) -> usize {
        buyer / self.t as usize
    }

    /// `Pr[all t buyers of a group are active] = t^{-t}`.
    pub fn full_probability(&self) -> f64 {
        (self.t as f64).powi(-(self.t as i32))
    }

    /// `Pr[X ≥ B]` for the number `X` of fully active groups.
    pub fn prob_enough_full_groups(&self) -> f64 {
        binomial_tail(self.groups as u64, self.full_probability(), self.b as u64)
    }

    /// Offline optimum of one realization: any `B` groups fit together and
    /// no `B + 1` do, so OPT is the sum of the `B` largest active counts.
    pub fn opt(&self, values: &[u32]) -> f64 {
        let mut counts = vec![0u32; self.groups];
        for (k, &v) in values.iter().enumerate() {
            counts[self.group(k)] += v;
        }
        counts.sort_unstable_by(|a, b| b.cmp(a));
        counts.iter().take(self.b as usize).map(|&c| c as f64).sum()
    }

    /// Exact `E[OPT]`: with `s_k = Pr[Bin(t, 1/t) ≥ k]`, the `j`-th largest
    /// group count is at least `k` exactly when `Bin(N, s_k) ≥ j`.
    pub fn expected_opt(&self) -> f64 {
        let t = self.t as u64;
        let q = 1.0 / self.t as f64;
        (1..=t)
            .map(|k| {
                let s = binomial_tail(t, q, k);
                (1..=self.b as u64).map(|j| binomial_tail(self.groups as u64, s, j)).sum::<f64>()
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Accept active buyers from the first `B` groups that show one.
    GreedyCommit,
    /// Post the LP menu; buyers take their cheapest affordable entry.
    LpMenu,
    /// Commit to `B` uniformly random groups before any arrival.
    RandomCommit,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::GreedyCommit, Policy::LpMenu, Policy::RandomCommit];

    pub fn tag(&self) -> &'static str {
        match self {
            Policy::GreedyCommit => "greedy-commit",
            Policy::LpMenu => "lp-menu",
            Policy::RandomCommit => "random-commit",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PolicyResult {
    pub policy: Policy,
    pub mean: f64,
    pub se: f64,
    pub ci95: f64,
    /// `E[OPT] / mean`.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub layout: GroupLayout,
    pub trials: u64,
    pub expected_opt: f64,
    pub opt_mc_mean: f64,
    pub opt_mc_se: f64,
    pub prob_enough_full_groups: f64,
    pub policies: Vec<PolicyResult>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if n > 1.0 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt())
}

/// Welfare of a group-commit policy on one arrival order.
fn commit_welfare(layout: &GroupLayout, instance: &Instance, values: &[u32], order: &[usize], allowed: Option<&[usize]>) -> f64 {
    let caps = instance.capacities();
    let mut loads = vec![0u32; instance.m()];
    let mut committed: Vec<usize> = Vec::new();
    let mut welfare = 0.0;
    for &k in order {
        if values[k] == 0 {
            continue;
        }
        let g = layout.group(k);
        let ok_group = match allowed {
            Some(set) => set.contains(&g),
            None => committed.contains(&g) || committed.len() < layout.b as usize,
        };
        let bundle = instance.buyers[k].bundle().expect("bundle buyers");
        if ok_group && bundle.iter().all(|&i| loads[i] < caps[i]) {
            for &i in bundle {
                loads[i] += 1;
            }
            if !committed.contains(&g) {
                committed.push(g);
            }
            welfare += values[k] as f64;
        }
    }
    welfare
}

/// Monte Carlo welfare of each policy under uniformly random arrival orders,
/// against the exact and simulated offline optimum.
pub fn evaluate_gap(instance: &Instance, policies: &[Policy], trials: u64, seed: u64) -> Result<GapReport, LbError> {
    let layout = GroupLayout::infer(instance)?;
    let mechanism = if policies.contains(&Policy::LpMenu) {
        let solved = solve_pipeline(instance, instance_gamma(instance), true, DEFAULT_MAX_PATHS)?;
        Some(PreparedMechanism::new(
            instance,
            Mechanism::LpMenu,
            solved.structures,
            solved.fopt_gamma,
            MenuOptions::default(),
        ))
    } else {
        None
    };
    let rows: Vec<(f64, Vec<f64>)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let values = sample_realization(instance, &mut Stream::for_trial(seed, trial, Purpose::Realization)).values;
            let mut order: Vec<usize> = (0..instance.n()).collect();
            order.shuffle(&mut Stream::for_trial(seed, trial, Purpose::Adversary));
            let welfare = policies
                .iter()
                .map(|p| match p {
                    Policy::GreedyCommit => commit_welfare(&layout, instance, &values, &order, None),
                    Policy::RandomCommit => {
                        let mut groups: Vec<usize> = (0..layout.groups).collect();
                        groups.shuffle(&mut Stream::for_trial(seed, trial, Purpose::Auxiliary));
                        groups.truncate(layout.b as usize);
                        commit_welfare(&layout, instance, &values, &order, Some(&groups))
                    }
                    Policy::LpMenu => {
                        let mech = mechanism.as_ref().expect("prepared above");
                        let menu = mech.draw(seed, trial).menu;
                        let index = MenuIndex::new(instance, &menu);
                        run(instance, &index, &menu, &values, &order, Mode::Alg).welfare
                    }
                })
                .collect();
            (layout.opt(&values), welfare)
        })
        .collect();
    let opts: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (opt_mc_mean, opt_mc_se) = mean_se(&opts);
    let expected_opt = layout.expected_opt();
    let results = policies
        .iter()
        .enumerate()
        .map(|(k, &policy)| {
            let xs: Vec<f64> = rows.iter().map(|r| r.1[k]).collect();
            let (mean, se) = mean_se(&xs);
            PolicyResult {
                policy,
                mean,
                se,
                ci95: 1.96 * se,
                ratio: if mean > 0.0 { expected_opt / mean } else { f64::INFINITY },
            }
        })
        .collect();
    Ok(GapReport {
        layout,
        trials,
        expected_opt,
        opt_mc_mean,
        opt_mc_se,
        prob_enough_full_groups: layout.prob_enough_full_groups(),
        policies: results,
    })
}
