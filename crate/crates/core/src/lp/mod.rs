//! The ex-ante LP: construction, solution, normalization, and the structural
//! quantities that drive menu construction.
//!
//! Variables are `x[b, v]` (or `x[b, v, p]` for routing instances) for every
//! value `v ≥ 1` carried by buyer `b`. Zero values never get a variable.

pub mod extend;
pub mod simplex;
pub mod structure;

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde_json::json;
use thiserror::Error;

use crate::model::{Demand, DemandKey, Instance, InstanceKind};
pub use extend::{extend_supports, Extension};
use simplex::{LinearProgram, Scalar, Sense, SimplexError};
pub use structure::{aggregate_and_classify, buyer_structures, BundleStructure, ValueClass};

pub const DEFAULT_MAX_PATHS: usize = 10_000;

/// Relative objective slack of the float normalization pin. Any slack lets the
/// weight objective shave mass off the lowest values, so it is kept two
/// orders below the 1e-9 objective tolerance promised to callers.
pub const NORMALIZATION_BAND: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum LpError {
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("pair ({from}, {to}) has more than {limit} simple paths")]
    PathOverflow {
        from: String,
        to: String,
        limit: usize,
    },
    #[error("normalization LP failed, check the objective band: {0}")]
    Normalization(SimplexError),
    #[error("three-block law violated for {bundle} at values {values:?}: {detail}")]
    Structure {
        bundle: String,
        values: Vec<u32>,
        detail: String,
    },
    #[error("fractional optimum is zero; support extension is undefined")]
    ZeroOptimum,
}

/// `e·(10d)^{1/B}` for d-single-minded buyers, `e·(20m)^{1/(B+1)}` for general
/// single-minded and routing buyers, `10` on trees.
pub fn scaling_factor(kind: InstanceKind, d_or_m: usize, b: u32) -> f64 {
    assert!(d_or_m >= 1 && b >= 1, "scaling factor needs d_or_m ≥ 1 and B ≥ 1");
    let e = std::f64::consts::E;
    match kind {
        InstanceKind::DSingleMinded { .. } => e * (10.0 * d_or_m as f64).powf(1.0 / b as f64),
        InstanceKind::GeneralSingleMinded | InstanceKind::GraphRouting => {
            e * (20.0 * d_or_m as f64).powf(1.0 / (b as f64 + 1.0))
        }
        InstanceKind::Tree => 10.0,
    }
}

/// The scaling factor with `d` or `m` and `B` read off the instance.
pub fn instance_gamma(instance: &Instance) -> f64 {
    let d_or_m = match instance.kind {
        InstanceKind::DSingleMinded { d } => d,
        _ => instance.m(),
    };
    scaling_factor(instance.kind, d_or_m, instance.min_capacity())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarKey {
    pub buyer: usize,
    pub value: u32,
    /// Index into the type's path list on routing instances.
    pub path: Option<usize>,
}

/// A built ex-ante LP, kept in float form and converted per scalar type.
#[derive(Clone, Debug)]
pub struct LpModel {
    pub gamma: f64,
    pub vars: Vec<VarKey>,
    /// Items consumed by each variable: the bundle, or the path's edges.
    pub var_items: Vec<Vec<usize>>,
    /// `c(e)/γ` per item.
    pub budgets: Vec<f64>,
    /// `Σ vars ≤ q` rows: one per (buyer, value).
    pub bounds: Vec<(Vec<usize>, f64)>,
    /// Simple paths per routing type, edges in walking order.
    pub paths: BTreeMap<DemandKey, Vec<Vec<usize>>>,
}

impl LpModel {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Stage-one program: maximize welfare.
    pub fn program<T: Scalar>(&self) -> LinearProgram<T> {
        let objective = self.vars.iter().map(|k| T::from_f64(k.value as f64)).collect();
        let mut lp = LinearProgram::new(self.num_vars(), objective, true);
        self.push_constraints(&mut lp);
        lp
    }

    fn push_constraints<T: Scalar>(&self, lp: &mut LinearProgram<T>) {
        let mut item_vars: Vec<Vec<usize>> = vec![Vec::new(); self.budgets.len()];
        for (j, items) in self.var_items.iter().enumerate() {
            for &e in items {
                item_vars[e].push(j);
            }
        }
        for (e, vars) in item_vars.into_iter().enumerate() {
            if vars.is_empty() {
                continue;
            }
            let coeffs = vars.into_iter().map(|j| (j, T::one())).collect();
            lp.push(coeffs, Sense::Le, T::from_f64(self.budgets[e]));
        }
        for (vars, q) in &self.bounds {
            let coeffs = vars.iter().map(|&j| (j, T::one())).collect();
            lp.push(coeffs, Sense::Le, T::from_f64(*q));
        }
    }

    /// Stage-two coefficient of each variable: one for `FracWeight` plus one per
    /// item it loads.
    pub fn weights(&self) -> Vec<f64> {
        self.var_items.iter().map(|items| 1.0 + items.len() as f64).collect()
    }
}

/// Bundle-demand LP with capacities scaled down by `gamma`.
pub fn build_ex_ante_lp(instance: &Instance, gamma: f64) -> LpModel {
    assert!(gamma >= 1.0, "γ must be at least 1");
    let mut vars = Vec::new();
    let mut var_items = Vec::new();
    let mut bounds = Vec::new();
    for (b, buyer) in instance.buyers.iter().enumerate() {
        let bundle = buyer
            .bundle()
            .expect("bundle LP on a routing instance; use build_graph_lp");
        for &(v, q) in buyer.dist.entries() {
            if v == 0 {
                continue;
            }
            bounds.push((vec![vars.len()], q));
            vars.push(VarKey {
                buyer: b,
                value: v,
                path: None,
            });
            var_items.push(bundle.to_vec());
        }
    }
    LpModel {
        gamma,
        vars,
        var_items,
        budgets: budgets(instance, gamma),
        bounds,
        paths: BTreeMap::new(),
    }
}

fn budgets(instance: &Instance, gamma: f64) -> Vec<f64> {
    instance.items.iter().map(|i| i.capacity as f64 / gamma).collect()
}

/// Simple paths between two nodes by depth-first search in sorted neighbor
/// order. Fails once more than `limit` paths exist.
pub fn simple_paths(instance: &Instance, source: usize, target: usize, limit: usize) -> Result<Vec<Vec<usize>>, LpError> {
    let graph = instance.graph.as_ref().expect("routing instance has a graph");
    let adj = graph.adjacency();
    let mut paths = Vec::new();
    let mut on_path = vec![false; graph.nodes.len()];
    let mut edges = Vec::new();

    fn dfs(
        node: usize,
        target: usize,
        adj: &[Vec<(usize, usize)>],
        on_path: &mut [bool],
        edges: &mut Vec<usize>,
        paths: &mut Vec<Vec<usize>>,
        limit: usize,
    ) -> bool {
        if node == target {
            paths.push(edges.clone());
            return paths.len() <= limit;
        }
        on_path[node] = true;
        for &(next, e) in &adj[node] {
            if on_path[next] {
                continue;
            }
            edges.push(e);
            let ok = dfs(next, target, adj, on_path, edges, paths, limit);
            edges.pop();
            if !ok {
                return false;
            }
        }
        on_path[node] = false;
        true
    }

    if !dfs(source, target, &adj, &mut on_path, &mut edges, &mut paths, limit) {
        return Err(LpError::PathOverflow {
            from: graph.nodes[source].clone(),
            to: graph.nodes[target].clone(),
            limit,
        });
    }
    Ok(paths)
}

/// Routing LP with one variable per (buyer, value, simple path).
pub fn build_graph_lp(instance: &Instance, gamma: f64, max_paths: usize) -> Result<LpModel, LpError> {
    assert!(gamma >= 1.0, "γ must be at least 1");
    let mut paths: BTreeMap<DemandKey, Vec<Vec<usize>>> = BTreeMap::new();
    for buyer in &instance.buyers {
        let key = buyer.demand.key();
        if paths.contains_key(&key) {
            continue;
        }
        let DemandKey::Route(a, b) = key else {
            panic!("graph LP on a bundle buyer");
        };
        paths.insert(key, simple_paths(instance, a, b, max_paths)?);
    }
    let mut vars = Vec::new();
    let mut var_items = Vec::new();
    let mut bounds = Vec::new();
    for (b, buyer) in instance.buyers.iter().enumerate() {
        let type_paths = &paths[&buyer.demand.key()];
        if type_paths.is_empty() {
            continue;
        }
        for &(v, q) in buyer.dist.entries() {
            if v == 0 {
                continue;
            }
            let mut group = Vec::with_capacity(type_paths.len());
            for (p, path) in type_paths.iter().enumerate() {
                group.push(vars.len());
                vars.push(VarKey {
                    buyer: b,
                    value: v,
                    path: Some(p),
                });
                let mut items = path.clone();
                items.sort_unstable();
                var_items.push(items);
            }
            bounds.push((group, q));
        }
    }
    Ok(LpModel {
        gamma,
        vars,
        var_items,
        budgets: budgets(instance, gamma),
        bounds,
        paths,
    })
}

/// Builds whichever LP matches the instance kind.
pub fn build_lp(instance: &Instance, gamma: f64, max_paths: usize) -> Result<LpModel, LpError> {
    if instance.is_graph() {
        build_graph_lp(instance, gamma, max_paths)
    } else {
        Ok(build_ex_ante_lp(instance, gamma))
    }
}

/// An optimal LP point together with the model it solves.
#[derive(Clone, Debug)]
pub struct FractionalSolution {
    pub model: LpModel,
    pub mass: Vec<f64>,
    /// Exact masses when solved over the rationals.
    pub exact: Option<Vec<BigRational>>,
    pub objective: f64,
    pub normalized: bool,
}

impl FractionalSolution {
    pub fn gamma(&self) -> f64 {
        self.model.gamma
    }

    /// `x[b, v]`, summed over paths.
    pub fn buyer_mass(&self, buyer: usize, value: u32) -> f64 {
        self.model
            .vars
            .iter()
            .zip(&self.mass)
            .filter(|(k, _)| k.buyer == buyer && k.value == value)
            .map(|(_, x)| *x)
            .sum()
    }

    /// Expected load `Σ x` on every item.
    pub fn item_loads(&self) -> Vec<f64> {
        let mut loads = vec![0.0; self.model.budgets.len()];
        for (items, x) in self.model.var_items.iter().zip(&self.mass) {
            for &e in items {
                loads[e] += x;
            }
        }
        loads
    }

    /// `FracWeight(x) + Σ_e w_e(x)`.
    pub fn normalization_weight(&self) -> f64 {
        self.model.weights().iter().zip(&self.mass).map(|(w, x)| w * x).sum()
    }

    /// Largest violation of the LP constraints by the float masses.
    pub fn max_residual(&self) -> f64 {
        self.model.program::<f64>().max_violation(&self.mass).0
    }

    /// `{gamma, objective, mass:[{buyer, value, path?, x}], bundles:[{bundle, w, blocks}]}`.
    pub fn to_json(&self, instance: &Instance, structures: &[BundleStructure]) -> serde_json::Value {
        let mass: Vec<serde_json::Value> = self
            .model
            .vars
            .iter()
            .zip(&self.mass)
            .filter(|(_, x)| **x != 0.0)
            .map(|(k, x)| {
                let mut entry = json!({
                    "buyer": instance.buyers[k.buyer].id,
                    "value": k.value,
                    "x": x,
                });
                if let (Some(p), Demand::Route { .. }) = (k.path, &instance.buyers[k.buyer].demand) {
                    let path = &self.model.paths[&instance.buyers[k.buyer].demand.key()][p];
                    entry["path"] = json!(path.iter().map(|&e| &instance.items[e].id).collect::<Vec<_>>());
                }
                entry
            })
            .collect();
        let bundles: Vec<serde_json::Value> = structures.iter().map(|s| s.to_json(instance)).collect();
        json!({
            "gamma": self.gamma(),
            "objective": self.objective,
            "mass": mass,
            "bundles": bundles,
        })
    }
}

/// Float solve of a built model.
pub fn solve_lp(model: &LpModel) -> Result<FractionalSolution, LpError> {
    let sol = simplex::solve(&model.program::<f64>())?;
    Ok(FractionalSolution {
        model: model.clone(),
        mass: sol.x,
        exact: None,
        objective: sol.objective,
        normalized: false,
    })
}

/// Exact rational solve of a built model.
pub fn solve_lp_exact(model: &LpModel) -> Result<FractionalSolution, LpError> {
    let sol = simplex::solve(&model.program::<BigRational>())?;
    Ok(FractionalSolution {
        model: model.clone(),
        mass: sol.x.iter().map(Scalar::to_f64).collect(),
        objective: sol.objective.to_f64(),
        exact: Some(sol.x),
        normalized: false,
    })
}

/// Among optima of the stage-one LP, picks one minimizing
/// `FracWeight + Σ_e w_e`. The float path pins the objective within
/// [`NORMALIZATION_BAND`]; the exact path pins it exactly.
pub fn normalize_solution(sol: &FractionalSolution) -> Result<FractionalSolution, LpError> {
    let model = &sol.model;
    let values: Vec<f64> = model.vars.iter().map(|k| k.value as f64).collect();
    let weights = model.weights();
    match &sol.exact {
        None => {
            let mut lp = LinearProgram::new(model.num_vars(), weights, false);
            model.push_constraints(&mut lp);
            let pin = values.iter().copied().enumerate().collect();
            lp.push(pin, Sense::Ge, sol.objective - NORMALIZATION_BAND * sol.objective.max(1.0));
            let out = simplex::solve(&lp).map_err(LpError::Normalization)?;
            let objective = values.iter().zip(&out.x).map(|(v, x)| v * x).sum();
            Ok(FractionalSolution {
                model: model.clone(),
                mass: out.x,
                exact: None,
                objective,
                normalized: true,
            })
        }
        Some(exact) => {
            let target = values
                .iter()
                .zip(exact)
                .fold(<BigRational as Scalar>::zero(), |acc, (v, x)| acc + BigRational::from_f64(*v) * x.clone());
            let mut lp = LinearProgram::new(
                model.num_vars(),
                weights.iter().map(|w| BigRational::from_f64(*w)).collect(),
                false,
            );
            model.push_constraints(&mut lp);
            let pin = values.iter().map(|v| BigRational::from_f64(*v)).enumerate().collect();
            lp.push(pin, Sense::Ge, target);
            let out = simplex::solve(&lp).map_err(LpError::Normalization)?;
            let objective = values
                .iter()
                .zip(&out.x)
                .fold(<BigRational as Scalar>::zero(), |acc, (v, x)| acc + BigRational::from_f64(*v) * x.clone());
            Ok(FractionalSolution {
                model: model.clone(),
                mass: out.x.iter().map(Scalar::to_f64).collect(),
                objective: objective.to_f64(),
                exact: Some(out.x),
                normalized: true,
            })
        }
    }
}


/// Everything downstream stages need from the LP layer.
#[derive(Clone, Debug)]
pub struct Solved {
    pub gamma: f64,
    /// Unscaled optimum.
    pub fopt: f64,
    /// Optimum with capacities divided by γ.
    pub fopt_gamma: f64,
    pub solution: FractionalSolution,
    pub structures: Vec<BundleStructure>,
}

/// Scaled solve, optional normalization, and classification; also reports the
/// unscaled optimum.
pub fn solve_pipeline(instance: &Instance, gamma: f64, normalize: bool, max_paths: usize) -> Result<Solved, LpError> {
    let fopt = solve_lp(&build_lp(instance, 1.0, max_paths)?)?.objective;
    let scaled = solve_lp(&build_lp(instance, gamma, max_paths)?)?;
    let fopt_gamma = scaled.objective;
    let solution = if normalize { normalize_solution(&scaled)? } else { scaled };
    let structures = aggregate_and_classify(instance, &solution)?;
    buyer_structures(instance, &solution)?;
    Ok(Solved {
        gamma,
        fopt,
        fopt_gamma,
        solution,
        structures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_item(capacity: u32, buyers: &[&str]) -> Instance {
        let buyers: Vec<String> = buyers
            .iter()
            .enumerate()
            .map(|(i, pmf)| format!(r#"{{"id": "b{i}", "bundle": ["e"], "pmf": {pmf}}}"#))
            .collect();
        Instance::from_json_str(&format!(
            r#"{{"kind": "general_single_minded", "items": [{{"id": "e", "capacity": {capacity}}}], "buyers": [{}]}}"#,
            buyers.join(",")
        ))
        .unwrap()
    }

    #[test]
    fn scaling_factor_formulas() {
        let e = std::f64::consts::E;
        let d = InstanceKind::DSingleMinded { d: 10 };
        assert!((scaling_factor(d, 10, 1) - 100.0 * e).abs() < 1e-9);
        assert!((scaling_factor(InstanceKind::GeneralSingleMinded, 20, 1) - 20.0 * e).abs() < 1e-9);
        assert_eq!(scaling_factor(InstanceKind::Tree, 3, 1), 10.0);
    }

    #[test]
    fn single_variable_saturates() {
        let inst = single_item(1, &[r#"{"5": 1}"#]);
        let sol = solve_lp(&build_ex_ante_lp(&inst, 1.0)).unwrap();
        assert!((sol.objective - 5.0).abs() < 1e-12);
        assert!((sol.buyer_mass(0, 5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_buyers_share_one_copy() {
        let inst = single_item(1, &[r#"{"1": 1}"#, r#"{"1": 1}"#]);
        let sol = solve_lp_exact(&build_ex_ante_lp(&inst, 1.0)).unwrap();
        assert_eq!(sol.objective, 1.0);
        assert_eq!(sol.buyer_mass(0, 1) + sol.buyer_mass(1, 1), 1.0);
    }

    #[test]
    fn budget_goes_to_the_high_value() {
        let inst = single_item(1, &[r#"{"1": 0.5, "2": 0.5}"#]);
        let sol = solve_lp(&build_ex_ante_lp(&inst, 2.0)).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!((sol.buyer_mass(0, 2) - 0.5).abs() < 1e-12);
        assert!(sol.buyer_mass(0, 1).abs() < 1e-12);
    }

    #[test]
    fn all_zero_values_give_zero() {
        let inst = single_item(1, &[r#"{"0": 1}"#, r#"{"0": 1}"#]);
        let sol = solve_lp(&build_ex_ante_lp(&inst, 1.0)).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert!(sol.mass.is_empty());
    }

    #[test]
    fn normalization_keeps_a_unique_optimum() {
        let inst = single_item(1, &[r#"{"0": 0.2, "1": 0.3, "2": 0.5}"#]);
        let sol = solve_lp(&build_ex_ante_lp(&inst, 1.0 / 0.7)).unwrap();
        let norm = normalize_solution(&sol).unwrap();
        for (a, b) in sol.mass.iter().zip(&norm.mass) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_prefers_the_smaller_bundle() {
        // T = {a}, T' = {a, b}; both value 1, one copy of a.
        let inst = Instance::from_json_str(
            r#"{"kind": "general_single_minded",
                "items": [{"id": "a", "capacity": 1}, {"id": "b", "capacity": 1}],
                "buyers": [{"id": "small", "bundle": ["a"], "pmf": {"1": 1}},
                           {"id": "big", "bundle": ["a", "b"], "pmf": {"1": 1}}]}"#,
        )
        .unwrap();
        for exact in [false, true] {
            let model = build_ex_ante_lp(&inst, 1.0);
            let sol = if exact { solve_lp_exact(&model) } else { solve_lp(&model) }.unwrap();
            let norm = normalize_solution(&sol).unwrap();
            assert!((norm.buyer_mass(0, 1) - 1.0).abs() < 1e-9, "{norm:?}");
            assert!(norm.buyer_mass(1, 1).abs() < 1e-9);
            assert!(norm.normalization_weight() <= sol.normalization_weight() + 1e-9);
        }
    }

    fn diamond() -> Instance {
        Instance::from_json_str(
            r#"{"kind": "graph_routing",
                "graph": {"nodes": ["s", "a", "b", "t"], "edges": [
                    {"id": "sa", "u": "s", "v": "a", "capacity": 1},
                    {"id": "at", "u": "a", "v": "t", "capacity": 1},
                    {"id": "sb", "u": "s", "v": "b", "capacity": 1},
                    {"id": "bt", "u": "b", "v": "t", "capacity": 1}]},
                "buyers": [{"id": "x", "pair": ["s", "t"], "pmf": {"1": 1}},
                           {"id": "y", "pair": ["t", "s"], "pmf": {"1": 1}}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn diamond_routes_both_buyers() {
        let inst = diamond();
        let model = build_graph_lp(&inst, 1.0, DEFAULT_MAX_PATHS).unwrap();
        assert_eq!(model.paths.len(), 1, "both buyers share the unordered type");
        assert_eq!(model.paths.values().next().unwrap().len(), 2);
        let sol = solve_lp(&model).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn path_cap_names_the_pair() {
        let err = build_graph_lp(&diamond(), 1.0, 1).unwrap_err();
        assert!(err.to_string().contains("(s, t)"), "{err}");
    }

    #[test]
    fn disconnected_pair_has_no_variables() {
        let inst = Instance::from_json_str(
            r#"{"kind": "graph_routing",
                "graph": {"nodes": ["s", "t", "u", "w"], "edges": [
                    {"id": "st", "u": "s", "v": "t", "capacity": 1},
                    {"id": "uw", "u": "u", "v": "w", "capacity": 1}]},
                "buyers": [{"id": "x", "pair": ["s", "t"], "pmf": {"2": 1}},
                           {"id": "y", "pair": ["s", "w"], "pmf": {"3": 1}}]}"#,
        )
        .unwrap();
        let sol = solve_lp(&build_graph_lp(&inst, 1.0, DEFAULT_MAX_PATHS).unwrap()).unwrap();
        assert!(sol.model.vars.iter().all(|k| k.buyer == 0));
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }
}
