//! Random instance generators for tests, the verify suite, and the CLI.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lp::{simple_paths, DEFAULT_MAX_PATHS};
use crate::model::{build_tree_shape, tree_items, Buyer, Demand, Graph, Instance, InstanceKind, Item, ValueDistribution};

/// Which values each buyer's pmf charges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Every value in `0..=max_value`.
    Full,
    /// A random subset of this size, always containing 0.
    Random(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", rename_all = "snake_case")]
pub enum GenSpec {
    DSingleMinded {
        n: usize,
        m: usize,
        d: usize,
        capacity: u32,
        max_value: u32,
        support: Support,
    },
    GeneralSingleMinded {
        n: usize,
        m: usize,
        capacity: u32,
        max_value: u32,
        support: Support,
    },
    Graph {
        nodes: usize,
        extra_edges: usize,
        n: usize,
        capacity: u32,
        max_value: u32,
        support: Support,
    },
    /// A random spanning tree posed as a routing instance, so every pair has
    /// exactly one path.
    UniquePath {
        nodes: usize,
        n: usize,
        capacity: u32,
        max_value: u32,
    },
    /// Two parallel `s`–`t` paths of length two.
    Diamond { n: usize, capacity: u32, max_value: u32 },
    Tree { nodes: usize, n: usize },
}

fn random_pmf<R: Rng + ?Sized>(rng: &mut R, max_value: u32, support: Support) -> ValueDistribution {
    let values: Vec<u32> = match support {
        Support::Full => (0..=max_value).collect(),
        Support::Random(k) => {
            let k = k.clamp(1, max_value as usize + 1);
            let mut v: Vec<u32> = sample(rng, max_value as usize, k - 1).into_iter().map(|x| x as u32 + 1).collect();
            v.push(0);
            v.sort_unstable();
            v
        }
    };
    let weights: Vec<f64> = values.iter().map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    ValueDistribution::new(values.into_iter().zip(weights.into_iter().map(|w| w / total))).expect("normalized weights")
}

fn random_bundle<R: Rng + ?Sized>(rng: &mut R, m: usize, max_size: usize) -> Vec<usize> {
    let size = rng.gen_range(1..=max_size.min(m));
    let mut b = sample(rng, m, size).into_vec();
    b.sort_unstable();
    b
}

fn items(m: usize, capacity: u32) -> Vec<Item> {
    (0..m).map(|e| Item { id: format!("e{e}"), capacity }).collect()
}

fn random_pair<R: Rng + ?Sized>(rng: &mut R, nodes: usize) -> (usize, usize) {
    let v = sample(rng, nodes, 2).into_vec();
    (v[0], v[1])
}

/// Random spanning tree on `nodes` plus up to `extra` non-parallel edges.
fn random_graph<R: Rng + ?Sized>(rng: &mut R, nodes: usize, extra: usize) -> Graph {
    let mut edges: Vec<(usize, usize)> = (1..nodes).map(|v| (rng.gen_range(0..v), v)).collect();
    let max_edges = nodes * (nodes - 1) / 2;
    let mut tries = 0;
    while edges.len() < (nodes - 1 + extra).min(max_edges) && tries < 100 * (extra + 1) {
        tries += 1;
        let (u, v) = random_pair(rng, nodes);
        let key = (u.min(v), u.max(v));
        if !edges.iter().any(|&(a, b)| (a.min(b), a.max(b)) == key) {
            edges.push(key);
        }
    }
    Graph {
        nodes: (0..nodes).map(|v| format!("v{v}")).collect(),
        edges,
    }
}

fn routing_instance<R: Rng + ?Sized>(
    rng: &mut R,
    graph: Graph,
    n: usize,
    capacity: u32,
    max_value: u32,
    support: Support,
    fixed_pair: Option<(usize, usize)>,
) -> Instance {
    let items = (0..graph.edges.len()).map(|e| Item { id: format!("x{e}"), capacity }).collect();
    let buyers = (0..n)
        .map(|k| {
            let (source, target) = fixed_pair.unwrap_or_else(|| random_pair(rng, graph.nodes.len()));
            Buyer {
                id: format!("b{k}"),
                demand: Demand::Route { source, target },
                endpoints: None,
                dist: random_pmf(rng, max_value, support),
            }
        })
        .collect();
    Instance::from_parts(InstanceKind::GraphRouting, items, buyers, Some(graph), None).expect("generated graph instance is valid")
}

/// Draws one instance from `spec`.
pub fn generate<R: Rng + ?Sized>(spec: &GenSpec, rng: &mut R) -> Instance {
    match *spec {
        GenSpec::DSingleMinded {
            n,
            m,
            d,
            capacity,
            max_value,
            support,
        } => {
            let buyers = (0..n)
                .map(|k| Buyer {
                    id: format!("b{k}"),
                    demand: Demand::Bundle(random_bundle(rng, m, d)),
                    endpoints: None,
                    dist: random_pmf(rng, max_value, support),
                })
                .collect();
            Instance::from_parts(InstanceKind::DSingleMinded { d }, items(m, capacity), buyers, None, None)
                .expect("generated instance is valid")
        }
        GenSpec::GeneralSingleMinded {
            n,
            m,
            capacity,
            max_value,
            support,
        } => {
            let buyers = (0..n)
                .map(|k| Buyer {
                    id: format!("b{k}"),
                    demand: Demand::Bundle(random_bundle(rng, m, m)),
                    endpoints: None,
                    dist: random_pmf(rng, max_value, support),
                })
                .collect();
            Instance::from_parts(InstanceKind::GeneralSingleMinded, items(m, capacity), buyers, None, None)
                .expect("generated instance is valid")
        }
        GenSpec::Graph {
            nodes,
            extra_edges,
            n,
            capacity,
            max_value,
            support,
        } => {
            let graph = random_graph(rng, nodes.max(2), extra_edges);
            routing_instance(rng, graph, n, capacity, max_value, support, None)
        }
        GenSpec::UniquePath {
            nodes,
            n,
            capacity,
            max_value,
        } => {
            let graph = random_graph(rng, nodes.max(2), 0);
            routing_instance(rng, graph, n, capacity, max_value, Support::Full, None)
        }
        GenSpec::Diamond { n, capacity, max_value } => {
            let graph = Graph {
                nodes: ["s", "a", "b", "t"].map(String::from).to_vec(),
                edges: vec![(0, 1), (1, 3), (0, 2), (2, 3)],
            };
            routing_instance(rng, graph, n, capacity, max_value, Support::Full, Some((0, 3)))
        }
        GenSpec::Tree { nodes, n } => {
            let nodes = nodes.clamp(2, 15);
            let names: Vec<String> = (0..nodes).map(|v| format!("v{v}")).collect();
            let parent = (0..nodes).map(|v| (v > 0).then(|| rng.gen_range(0..v))).collect();
            let shape = build_tree_shape(names, parent).expect("random parent array is a tree");
            let items = tree_items(&shape);
            let buyers = (0..n)
                .map(|k| {
                    let (a, b) = random_pair(rng, nodes);
                    Buyer {
                        id: format!("b{k}"),
                        demand: Demand::Bundle(shape.path_edges(a, b)),
                        endpoints: Some((a, b)),
                        dist: ValueDistribution::bernoulli(rng.gen_range(0.2..0.8)),
                    }
                })
                .collect();
            Instance::from_parts(InstanceKind::Tree, items, buyers, None, Some(shape)).expect("generated tree is valid")
        }
    }
}

/// The general single-minded instance whose bundles are the unique paths of
/// a routing instance. `None` when some pair has zero or several paths.
pub fn as_single_minded(instance: &Instance) -> Option<Instance> {
    let mut buyers = Vec::with_capacity(instance.n());
    for b in &instance.buyers {
        let Demand::Route { source, target } = b.demand else {
            return None;
        };
        let paths = simple_paths(instance, source, target, DEFAULT_MAX_PATHS).ok()?;
        let [path] = paths.as_slice() else {
            return None;
        };
        let mut bundle = path.clone();
        bundle.sort_unstable();
        buyers.push(Buyer {
            id: b.id.clone(),
            demand: Demand::Bundle(bundle),
            endpoints: None,
            dist: b.dist.clone(),
        });
    }
    Instance::from_parts(InstanceKind::GeneralSingleMinded, instance.items.clone(), buyers, None, None).ok()
}
