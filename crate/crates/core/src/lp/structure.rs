//! Per-bundle aggregation and the zero / crucial / tight classification.

use num_rational::BigRational;
use serde_json::json;

use super::simplex::Scalar;
use super::{FractionalSolution, LpError};
use crate::model::{DemandKey, Instance};

/// `|x − q|` at or below this counts as tight on the float path.
pub const TIGHTNESS_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueClass {
    Zero,
    Crucial,
    Tight,
    /// No buyer of the group carries this value.
    Empty,
}

impl ValueClass {
    pub fn tag(&self) -> &'static str {
        match self {
            ValueClass::Zero => "zero",
            ValueClass::Crucial => "crucial",
            ValueClass::Tight => "tight",
            ValueClass::Empty => "empty",
        }
    }
}

/// Aggregated LP mass of one demand group and its classification.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleStructure {
    pub key: DemandKey,
    pub buyers: Vec<usize>,
    /// Ascending; always starts with 0.
    pub values: Vec<u32>,
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub classes: Vec<ValueClass>,
    /// Largest value with `x < q`; 0 when every positive value is tight.
    pub important_value: u32,
    /// `x[S, w]` when `w` is crucial.
    pub crucial_mass: Option<f64>,
    /// `Σ_{v > w} x[S, v]·v`.
    pub tail_value: f64,
    /// `Σ_v x[S, v]·v`.
    pub fopt_s: f64,
    /// Routing types: `path_mass[i][p]` is the mass on path `p` at `values[i]`.
    pub path_mass: Vec<Vec<f64>>,
    pub paths: Vec<Vec<usize>>,
}

impl BundleStructure {
    fn index_of(&self, v: u32) -> Option<usize> {
        self.values.binary_search(&v).ok()
    }

    pub fn x_at(&self, v: u32) -> f64 {
        self.index_of(v).map_or(0.0, |i| self.x[i])
    }

    pub fn q_at(&self, v: u32) -> f64 {
        self.index_of(v).map_or(0.0, |i| self.q[i])
    }

    pub fn class_at(&self, v: u32) -> ValueClass {
        self.index_of(v).map_or(ValueClass::Empty, |i| self.classes[i])
    }

    pub fn is_route(&self) -> bool {
        matches!(self.key, DemandKey::Route(..))
    }

    pub fn label(&self, instance: &Instance) -> String {
        key_label(instance, &self.key)
    }

    pub fn to_json(&self, instance: &Instance) -> serde_json::Value {
        let blocks: Vec<serde_json::Value> = self
            .values
            .iter()
            .zip(&self.classes)
            .zip(self.x.iter().zip(&self.q))
            .map(|((v, c), (x, q))| json!({"value": v, "class": c.tag(), "x": x, "q": q}))
            .collect();
        json!({
            "bundle": key_json(instance, &self.key),
            "w": self.important_value,
            "crucial_mass": self.crucial_mass,
            "tail_value": self.tail_value,
            "fopt_s": self.fopt_s,
            "blocks": blocks,
        })
    }
}

pub fn key_json(instance: &Instance, key: &DemandKey) -> serde_json::Value {
    match key {
        DemandKey::Bundle(items) => json!(items.iter().map(|&e| &instance.items[e].id).collect::<Vec<_>>()),
        DemandKey::Route(a, b) => {
            let nodes = &instance.graph.as_ref().expect("routes have a graph").nodes;
            json!([nodes[*a], nodes[*b]])
        }
    }
}

pub fn key_label(instance: &Instance, key: &DemandKey) -> String {
    match key {
        DemandKey::Bundle(items) => {
            let names: Vec<&str> = items.iter().map(|&e| instance.items[e].id.as_str()).collect();
            format!("{{{}}}", names.join(","))
        }
        DemandKey::Route(a, b) => {
            let nodes = &instance.graph.as_ref().expect("routes have a graph").nodes;
            format!("({}, {})", nodes[*a], nodes[*b])
        }
    }
}

fn classify<T: Scalar>(x: &T, q: &T, tol: &T) -> ValueClass {
    if *q <= T::zero() {
        return ValueClass::Empty;
    }
    let gap = q.clone() - x.clone();
    let abs_gap = if gap < T::zero() { -gap } else { gap };
    if abs_gap <= *tol {
        ValueClass::Tight
    } else if *x <= *tol {
        ValueClass::Zero
    } else {
        ValueClass::Crucial
    }
}

/// Checks zeros, then at most one crucial, then tights over positive values.
fn check_three_blocks(values: &[u32], classes: &[ValueClass]) -> Result<(), (Vec<u32>, String)> {
    let mut phase = 0;
    let mut last: Option<(u32, ValueClass)> = None;
    for (&v, &c) in values.iter().zip(classes) {
        if v == 0 || c == ValueClass::Empty {
            continue;
        }
        let next = match (phase, c) {
            (0, ValueClass::Zero) => 0,
            (0, ValueClass::Crucial) => 1,
            (_, ValueClass::Tight) => 2,
            _ => {
                let (pv, pc) = last.expect("a violation follows some earlier value");
                return Err((
                    vec![pv, v],
                    format!("{} at {v} after {} at {pv}", c.tag(), pc.tag()),
                ));
            }
        };
        phase = next;
        last = Some((v, c));
    }
    Ok(())
}

fn classes_for(x: &[f64], q: &[f64], exact: Option<(&[BigRational], &[BigRational])>) -> Vec<ValueClass> {
    match exact {
        Some((xe, qe)) => xe
            .iter()
            .zip(qe)
            .map(|(x, q)| classify(x, q, &BigRational::from_f64(0.0)))
            .collect(),
        None => x
            .iter()
            .zip(q)
            .map(|(x, q)| classify(x, q, &TIGHTNESS_TOLERANCE))
            .collect(),
    }
}

fn important_value(values: &[u32], classes: &[ValueClass]) -> u32 {
    values
        .iter()
        .zip(classes)
        .filter(|(v, c)| **v == 0 || matches!(c, ValueClass::Zero | ValueClass::Crucial))
        .map(|(v, _)| *v)
        .max()
        .unwrap_or(0)
}

/// Aggregates the solution per demand group, classifies every value, and
/// certifies the three-block law.
pub fn aggregate_and_classify(instance: &Instance, sol: &FractionalSolution) -> Result<Vec<BundleStructure>, LpError> {
    let mut out = Vec::new();
    for group in instance.demand_groups() {
        let mut values: Vec<u32> = std::iter::once(0)
            .chain(group.buyers.iter().flat_map(|&b| instance.buyers[b].dist.support()))
            .collect();
        values.sort_unstable();
        values.dedup();
        let paths = sol.model.paths.get(&group.key).cloned().unwrap_or_default();
        let k = values.len();
        let mut x = vec![0.0; k];
        let mut q = vec![0.0; k];
        let mut path_mass = if matches!(group.key, DemandKey::Route(..)) { vec![vec![0.0; paths.len()]; k] } else { Vec::new() };
        let mut xe = vec![BigRational::from_f64(0.0); k];
        let mut qe = vec![BigRational::from_f64(0.0); k];
        for &b in &group.buyers {
            for &(v, p) in instance.buyers[b].dist.entries() {
                let i = values.binary_search(&v).expect("value collected above");
                q[i] += p;
                qe[i] = qe[i].clone() + BigRational::from_f64(p);
            }
        }
        for (j, key) in sol.model.vars.iter().enumerate() {
            if instance.buyers[key.buyer].demand.key() != group.key {
                continue;
            }
            let i = values.binary_search(&key.value).expect("variable value in support");
            x[i] += sol.mass[j];
            if let Some(exact) = &sol.exact {
                xe[i] = xe[i].clone() + exact[j].clone();
            }
            if let Some(p) = key.path {
                path_mass[i][p] += sol.mass[j];
            }
        }
        // Routing types without any path carry no LP variables; their positive
        // values are unreachable, not crucial.
        let exact = sol.exact.as_ref().map(|_| (xe.as_slice(), qe.as_slice()));
        let mut classes = classes_for(&x, &q, exact);
        classes[0] = if q[0] > 0.0 { ValueClass::Zero } else { ValueClass::Empty };
        check_three_blocks(&values, &classes).map_err(|(vals, detail)| LpError::Structure {
            bundle: key_label(instance, &group.key),
            values: vals,
            detail,
        })?;
        let w = important_value(&values, &classes);
        let wi = values.binary_search(&w).expect("w is a listed value");
        let crucial_mass = (classes[wi] == ValueClass::Crucial).then(|| x[wi]);
        let tail_value = values
            .iter()
            .zip(&x)
            .filter(|(v, _)| **v > w)
            .map(|(v, x)| *v as f64 * x)
            .sum();
        let fopt_s = values.iter().zip(&x).map(|(v, x)| *v as f64 * x).sum();
        out.push(BundleStructure {
            key: group.key.clone(),
            buyers: group.buyers.clone(),
            values,
            x,
            q,
            classes,
            important_value: w,
            crucial_mass,
            tail_value,
            fopt_s,
            path_mass,
            paths,
        });
    }
    Ok(out)
}

/// Per-buyer classification, each certified against the three-block law.
pub fn buyer_structures(instance: &Instance, sol: &FractionalSolution) -> Result<Vec<Vec<(u32, ValueClass)>>, LpError> {
    let mut out = Vec::with_capacity(instance.n());
    for (b, buyer) in instance.buyers.iter().enumerate() {
        let entries: Vec<(u32, f64)> = buyer.dist.entries().iter().copied().filter(|&(v, _)| v > 0).collect();
        let values: Vec<u32> = entries.iter().map(|&(v, _)| v).collect();
        let q: Vec<f64> = entries.iter().map(|&(_, p)| p).collect();
        let x: Vec<f64> = values.iter().map(|&v| sol.buyer_mass(b, v)).collect();
        let exact = sol.exact.as_ref().map(|ex| {
            let xe: Vec<BigRational> = values
                .iter()
                .map(|&v| {
                    sol.model
                        .vars
                        .iter()
                        .zip(ex)
                        .filter(|(k, _)| k.buyer == b && k.value == v)
                        .fold(BigRational::from_f64(0.0), |acc, (_, x)| acc + x.clone())
                })
                .collect();
            let qe: Vec<BigRational> = q.iter().map(|&p| BigRational::from_f64(p)).collect();
            (xe, qe)
        });
        let classes = classes_for(&x, &q, exact.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())));
        check_three_blocks(&values, &classes).map_err(|(vals, detail)| LpError::Structure {
            bundle: format!("buyer '{}'", buyer.id),
            values: vals,
            detail,
        })?;
        out.push(values.into_iter().zip(classes).collect());
    }
    Ok(out)
}
