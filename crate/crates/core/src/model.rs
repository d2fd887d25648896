//! Problem instances, value distributions, realizations, and their JSON form.
//!
//! Item ids and buyer ids are opaque strings in files and dense indices in
//! memory. For graph and tree instances the items are the edges. Tree buyers
//! name a node pair that is expanded to its unique edge path at load time.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{Stream, StreamId};

/// Tolerance on the total probability mass of a pmf.
pub const PMF_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed instance file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::Invalid(msg.into())
}

/// A finite distribution over nonnegative integer values.
///
/// Only values with strictly positive mass are stored; they form the support.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueDistribution {
    entries: Vec<(u32, f64)>,
}

impl ValueDistribution {
    pub fn new(pmf: impl IntoIterator<Item = (u32, f64)>) -> Result<Self, String> {
        let mut merged: BTreeMap<u32, f64> = BTreeMap::new();
        for (value, p) in pmf {
            if !p.is_finite() || p < 0.0 || p > 1.0 {
                return Err(format!("probability {p} of value {value} is outside [0, 1]"));
            }
            *merged.entry(value).or_insert(0.0) += p;
        }
        let total: f64 = merged.values().sum();
        if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(format!("pmf sums to {total}, expected 1"));
        }
        let entries: Vec<(u32, f64)> = merged.into_iter().filter(|&(_, p)| p > 0.0).collect();
        if entries.is_empty() {
            return Err("pmf has no positive mass".into());
        }
        Ok(Self { entries })
    }

    pub fn point(value: u32) -> Self {
        Self {
            entries: vec![(value, 1.0)],
        }
    }

    /// Value 1 with probability `p`, else 0.
    pub fn bernoulli(p: f64) -> Self {
        Self::new([(0, 1.0 - p), (1, p)]).expect("bernoulli parameter in [0, 1]")
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn prob(&self, value: u32) -> f64 {
        self.entries
            .binary_search_by_key(&value, |&(v, _)| v)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(v, _)| v)
    }

    pub fn contains(&self, value: u32) -> bool {
        self.prob(value) > 0.0
    }

    pub fn max_value(&self) -> u32 {
        self.entries.last().map(|&(v, _)| v).unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|&(v, p)| v as f64 * p).sum()
    }

    /// True when every value in `0..=r` carries positive mass.
    pub fn has_full_support(&self, r: u32) -> bool {
        self.entries.len() == r as usize + 1
            && self.entries.iter().enumerate().all(|(i, &(v, _))| v == i as u32)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(v, p) in &self.entries {
            acc += p;
            if u < acc {
                return v;
            }
        }
        self.max_value()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Demand {
    /// Sorted, duplicate-free item indices.
    Bundle(Vec<usize>),
    /// Endpoints of a routing request; any simple path satisfies the buyer.
    Route { source: usize, target: usize },
}

/// Grouping key for buyers facing the same menu entries: the bundle itself,
/// or the unordered endpoint pair of a routing request.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DemandKey {
    Bundle(Vec<usize>),
    Route(usize, usize),
}

impl Demand {
    pub fn key(&self) -> DemandKey {
        match self {
            Demand::Bundle(items) => DemandKey::Bundle(items.clone()),
            Demand::Route { source, target } => {
                DemandKey::Route(*source.min(target), *source.max(target))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Buyer {
    pub id: String,
    pub demand: Demand,
    /// Node pair a tree buyer named in its file; `demand` holds the expanded path.
    pub endpoints: Option<(usize, usize)>,
    pub dist: ValueDistribution,
}

impl Buyer {
    pub fn bundle(&self) -> Option<&[usize]> {
        match &self.demand {
            Demand::Bundle(items) => Some(items),
            Demand::Route { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Item {
    pub id: String,
    pub capacity: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceKind {
    DSingleMinded { d: usize },
    GeneralSingleMinded,
    GraphRouting,
    Tree,
}

impl InstanceKind {
    pub fn tag(&self) -> &'static str {
        match self {
            InstanceKind::DSingleMinded { .. } => "d_single_minded",
            InstanceKind::GeneralSingleMinded => "general_single_minded",
            InstanceKind::GraphRouting => "graph_routing",
            InstanceKind::Tree => "tree",
        }
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Undirected multigraph; edge `i` is item `i` of the instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Adjacency lists of (neighbor, edge index), sorted by neighbor then edge.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            adj[u].push((v, e));
            if u != v {
                adj[v].push((u, e));
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// Rooted tree stored as a parent array. The edge above node `c` is item
/// `edge_above[c]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeShape {
    pub nodes: Vec<String>,
    pub parent: Vec<Option<usize>>,
    pub root: usize,
    pub edge_above: Vec<Option<usize>>,
}

impl TreeShape {
    fn depth(&self, mut node: usize) -> usize {
        let mut depth = 0;
        while let Some(p) = self.parent[node] {
            node = p;
            depth += 1;
        }
        depth
    }

    /// Edge indices of the unique path between two nodes, sorted.
    pub fn path_edges(&self, a: usize, b: usize) -> Vec<usize> {
        let (mut a, mut b) = (a, b);
        let (mut da, mut db) = (self.depth(a), self.depth(b));
        let mut edges = Vec::new();
        while da > db {
            edges.push(self.edge_above[a].expect("non-root has an edge"));
            a = self.parent[a].expect("non-root has a parent");
            da -= 1;
        }
        while db > da {
            edges.push(self.edge_above[b].expect("non-root has an edge"));
            b = self.parent[b].expect("non-root has a parent");
            db -= 1;
        }
        while a != b {
            edges.push(self.edge_above[a].expect("non-root has an edge"));
            edges.push(self.edge_above[b].expect("non-root has an edge"));
            a = self.parent[a].expect("non-root has a parent");
            b = self.parent[b].expect("non-root has a parent");
        }
        edges.sort_unstable();
        edges
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub kind: InstanceKind,
    pub items: Vec<Item>,
    pub buyers: Vec<Buyer>,
    pub graph: Option<Graph>,
    pub tree: Option<TreeShape>,
}

/// Buyers sharing a demand key, in buyer-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandGroup {
    pub key: DemandKey,
    pub buyers: Vec<usize>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.buyers.len()
    }

    pub fn m(&self) -> usize {
        self.items.len()
    }

    /// Minimum item capacity `B`.
    pub fn min_capacity(&self) -> u32 {
        self.items.iter().map(|i| i.capacity).min().unwrap_or(0)
    }

    /// Largest value in any buyer's support (`R`).
    pub fn max_value(&self) -> u32 {
        self.buyers.iter().map(|b| b.dist.max_value()).max().unwrap_or(0)
    }

    pub fn capacities(&self) -> Vec<u32> {
        self.items.iter().map(|i| i.capacity).collect()
    }

    pub fn is_graph(&self) -> bool {
        matches!(self.kind, InstanceKind::GraphRouting)
    }

    /// Buyers grouped by demand key, groups sorted by key.
    pub fn demand_groups(&self) -> Vec<DemandGroup> {
        let mut groups: BTreeMap<DemandKey, Vec<usize>> = BTreeMap::new();
        for (b, buyer) in self.buyers.iter().enumerate() {
            groups.entry(buyer.demand.key()).or_default().push(b);
        }
        groups
            .into_iter()
            .map(|(key, buyers)| DemandGroup { key, buyers })
            .collect()
    }

    /// True when all buyers share the support `{0, …, R}` with positive mass.
    pub fn has_common_full_support(&self) -> bool {
        let r = self.max_value();
        self.buyers.iter().all(|b| b.dist.has_full_support(r))
    }

    pub fn item_index(&self) -> HashMap<&str, usize> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.id.as_str(), i))
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        load_instance(path)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Checks every structural invariant; constructors call this.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.items.is_empty() {
            return Err(invalid("instance has no items"));
        }
        let mut seen = HashSet::new();
        for item in &self.items {
            if item.capacity == 0 {
                return Err(invalid(format!("item '{}' has capacity 0", item.id)));
            }
            if !seen.insert(item.id.as_str()) {
                return Err(invalid(format!("duplicate item id '{}'", item.id)));
            }
        }
        let mut buyer_ids = HashSet::new();
        for buyer in &self.buyers {
            if !buyer_ids.insert(buyer.id.as_str()) {
                return Err(invalid(format!("duplicate buyer id '{}'", buyer.id)));
            }
            match &buyer.demand {
                Demand::Bundle(items) => {
                    if items.is_empty() {
                        return Err(invalid(format!("buyer '{}' has an empty bundle", buyer.id)));
                    }
                    if items.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(invalid(format!(
                            "buyer '{}' bundle is not sorted and duplicate-free",
                            buyer.id
                        )));
                    }
                    if items.iter().any(|&e| e >= self.items.len()) {
                        return Err(invalid(format!("buyer '{}' demands an unknown item", buyer.id)));
                    }
                    if let InstanceKind::DSingleMinded { d } = self.kind {
                        if items.len() > d {
                            return Err(invalid(format!(
                                "buyer '{}' demands {} items but d = {d}",
                                buyer.id,
                                items.len()
                            )));
                        }
                    }
                }
                Demand::Route { source, target } => {
                    let graph = self
                        .graph
                        .as_ref()
                        .ok_or_else(|| invalid(format!("buyer '{}' routes without a graph", buyer.id)))?;
                    if source == target {
                        return Err(invalid(format!("buyer '{}' has source = target", buyer.id)));
                    }
                    if *source >= graph.nodes.len() || *target >= graph.nodes.len() {
                        return Err(invalid(format!("buyer '{}' names an unknown node", buyer.id)));
                    }
                }
            }
        }
        match self.kind {
            InstanceKind::DSingleMinded { d } if d == 0 => {
                return Err(invalid("d must be at least 1"));
            }
            InstanceKind::GraphRouting => {
                let graph = self.graph.as_ref().ok_or_else(|| invalid("graph instance without a graph"))?;
                if graph.edges.len() != self.items.len() {
                    return Err(invalid("graph edges and items disagree"));
                }
                if self.buyers.iter().any(|b| matches!(b.demand, Demand::Bundle(_))) {
                    return Err(invalid("graph instance buyers must name a pair"));
                }
            }
            InstanceKind::Tree => {
                if self.tree.is_none() {
                    return Err(invalid("tree instance without a tree"));
                }
                if let Some(item) = self.items.iter().find(|i| i.capacity != 1) {
                    return Err(invalid(format!("tree edge '{}' must have capacity 1", item.id)));
                }
                if let Some(b) = self.buyers.iter().find(|b| b.dist.support().any(|v| v > 1)) {
                    return Err(invalid(format!("tree buyer '{}' must have a {{0,1}} value", b.id)));
                }
            }
            _ => {}
        }
        if !matches!(self.kind, InstanceKind::GraphRouting)
            && self.buyers.iter().any(|b| matches!(b.demand, Demand::Route { .. }))
        {
            return Err(invalid("only graph instances may contain routing buyers"));
        }
        Ok(())
    }

    fn from_file(file: InstanceFile) -> Result<Self, ModelError> {
        let kind = match file.kind.as_str() {
            "d_single_minded" => InstanceKind::DSingleMinded {
                d: file
                    .d
                    .ok_or_else(|| invalid("d_single_minded instance needs field 'd'"))?,
            },
            "general_single_minded" => InstanceKind::GeneralSingleMinded,
            "graph_routing" => InstanceKind::GraphRouting,
            "tree" => InstanceKind::Tree,
            other => return Err(invalid(format!("unknown instance kind '{other}'"))),
        };

        let mut graph = None;
        let mut tree = None;
        let items: Vec<Item> = match kind {
            InstanceKind::GraphRouting => {
                let g = file.graph.as_ref().ok_or_else(|| invalid("graph instance needs field 'graph'"))?;
                let node_ix = index_names(&g.nodes, "node")?;
                let mut edges = Vec::with_capacity(g.edges.len());
                let mut items = Vec::with_capacity(g.edges.len());
                for edge in &g.edges {
                    let u = lookup(&node_ix, &edge.u, "node")?;
                    let v = lookup(&node_ix, &edge.v, "node")?;
                    if u == v {
                        return Err(invalid(format!("edge '{}' is a self-loop", edge.id)));
                    }
                    edges.push((u, v));
                    items.push(Item {
                        id: edge.id.clone(),
                        capacity: edge.capacity,
                    });
                }
                if !file.items.is_empty() {
                    let listed: Vec<Item> = file
                        .items
                        .iter()
                        .map(|i| Item {
                            id: i.id.clone(),
                            capacity: i.capacity,
                        })
                        .collect();
                    if listed != items {
                        return Err(invalid("top-level items disagree with graph edges"));
                    }
                }
                graph = Some(Graph {
                    nodes: g.nodes.clone(),
                    edges,
                });
                items
            }
            InstanceKind::Tree => {
                let t = file.tree.as_ref().ok_or_else(|| invalid("tree instance needs field 'tree'"))?;
                let shape = build_tree(t)?;
                let items = tree_items(&shape);
                tree = Some(shape);
                items
            }
            _ => file
                .items
                .iter()
                .map(|i| Item {
                    id: i.id.clone(),
                    capacity: i.capacity,
                })
                .collect(),
        };

        let item_ix = index_names(items.iter().map(|i| &i.id), "item")?;
        let mut buyers = Vec::with_capacity(file.buyers.len());
        for bf in &file.buyers {
            let mut pmf = Vec::with_capacity(bf.pmf.len());
            for (key, &p) in &bf.pmf {
                let value: u32 = key
                    .trim()
                    .parse()
                    .map_err(|_| invalid(format!("buyer '{}': pmf key '{key}' is not a nonnegative integer", bf.id)))?;
                pmf.push((value, p));
            }
            let dist = ValueDistribution::new(pmf).map_err(|e| invalid(format!("buyer '{}': {e}", bf.id)))?;
            let (demand, endpoints) = match (kind, &bf.bundle, &bf.pair) {
                (InstanceKind::GraphRouting, None, Some((s, t))) => {
                    let g = file.graph.as_ref().expect("checked above");
                    let node_ix = index_names(&g.nodes, "node")?;
                    let source = lookup(&node_ix, s, "node")
                        .map_err(|e| invalid(format!("buyer '{}': {e}", bf.id)))?;
                    let target = lookup(&node_ix, t, "node")
                        .map_err(|e| invalid(format!("buyer '{}': {e}", bf.id)))?;
                    (Demand::Route { source, target }, None)
                }
                (InstanceKind::Tree, None, Some((s, t))) => {
                    let shape = tree.as_ref().expect("built above");
                    let node_ix = index_names(&shape.nodes, "node")?;
                    let a = lookup(&node_ix, s, "node").map_err(|e| invalid(format!("buyer '{}': {e}", bf.id)))?;
                    let b = lookup(&node_ix, t, "node").map_err(|e| invalid(format!("buyer '{}': {e}", bf.id)))?;
                    if a == b {
                        return Err(invalid(format!("buyer '{}' has source = target", bf.id)));
                    }
                    (Demand::Bundle(shape.path_edges(a, b)), Some((a, b)))
                }
                (InstanceKind::GraphRouting | InstanceKind::Tree, _, _) => {
                    return Err(invalid(format!("buyer '{}' must give exactly a 'pair'", bf.id)));
                }
                (_, Some(bundle), None) => {
                    let mut ids = Vec::with_capacity(bundle.len());
                    for name in bundle {
                        ids.push(lookup(&item_ix, name, "item").map_err(|e| invalid(format!("buyer '{}': {e}", bf.id)))?);
                    }
                    ids.sort_unstable();
                    if ids.windows(2).any(|w| w[0] == w[1]) {
                        return Err(invalid(format!("buyer '{}' lists an item twice", bf.id)));
                    }
                    (Demand::Bundle(ids), None)
                }
                _ => return Err(invalid(format!("buyer '{}' must give exactly a 'bundle'", bf.id))),
            };
            buyers.push(Buyer {
                id: bf.id.clone(),
                demand,
                endpoints,
                dist,
            });
        }

        let instance = Instance {
            kind,
            items,
            buyers,
            graph,
            tree,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn to_file(&self) -> InstanceFile {
        let d = match self.kind {
            InstanceKind::DSingleMinded { d } => Some(d),
            _ => None,
        };
        let buyers = self
            .buyers
            .iter()
            .map(|b| {
                let pmf = b.dist.entries().iter().map(|&(v, p)| (v.to_string(), p)).collect();
                let (bundle, pair) = match (&b.demand, b.endpoints) {
                    (_, Some((s, t))) => {
                        let names = &self.tree.as_ref().expect("endpoints only on trees").nodes;
                        (None, Some((names[s].clone(), names[t].clone())))
                    }
                    (Demand::Bundle(items), None) => (
                        Some(items.iter().map(|&e| self.items[e].id.clone()).collect()),
                        None,
                    ),
                    (Demand::Route { source, target }, None) => {
                        let names = &self.graph.as_ref().expect("routes need a graph").nodes;
                        (None, Some((names[*source].clone(), names[*target].clone())))
                    }
                };
                BuyerFile {
                    id: b.id.clone(),
                    bundle,
                    pair,
                    pmf,
                }
            })
            .collect();
        let (items, graph, tree) = match self.kind {
            InstanceKind::GraphRouting => {
                let g = self.graph.as_ref().expect("validated");
                let edges = g
                    .edges
                    .iter()
                    .zip(&self.items)
                    .map(|(&(u, v), item)| EdgeFile {
                        id: item.id.clone(),
                        u: g.nodes[u].clone(),
                        v: g.nodes[v].clone(),
                        capacity: item.capacity,
                    })
                    .collect();
                (
                    Vec::new(),
                    Some(GraphFile {
                        nodes: g.nodes.clone(),
                        edges,
                    }),
                    None,
                )
            }
            InstanceKind::Tree => {
                let t = self.tree.as_ref().expect("validated");
                let parent = t.parent.iter().map(|p| p.map(|p| t.nodes[p].clone())).collect();
                (
                    Vec::new(),
                    None,
                    Some(TreeFile {
                        nodes: t.nodes.clone(),
                        parent,
                        root: t.nodes[t.root].clone(),
                    }),
                )
            }
            _ => (
                self.items
                    .iter()
                    .map(|i| ItemFile {
                        id: i.id.clone(),
                        capacity: i.capacity,
                    })
                    .collect(),
                None,
                None,
            ),
        };
        InstanceFile {
            kind: self.kind.tag().to_string(),
            d,
            items,
            graph,
            tree,
            buyers,
        }
    }

    /// Builds a validated instance from parts, expanding tree pairs is the
    /// caller's job. Used by generators.
    pub fn from_parts(
        kind: InstanceKind,
        items: Vec<Item>,
        buyers: Vec<Buyer>,
        graph: Option<Graph>,
        tree: Option<TreeShape>,
    ) -> Result<Self, ModelError> {
        let instance = Instance {
            kind,
            items,
            buyers,
            graph,
            tree,
        };
        instance.validate()?;
        Ok(instance)
    }
}

/// Parses a parent array into a rooted tree; edge items are numbered by child
/// node order.
pub fn build_tree_shape(nodes: Vec<String>, parent: Vec<Option<usize>>) -> Result<TreeShape, ModelError> {
    if nodes.len() != parent.len() {
        return Err(invalid("tree parent array length differs from node count"));
    }
    let roots: Vec<usize> = parent.iter().enumerate().filter(|(_, p)| p.is_none()).map(|(i, _)| i).collect();
    if roots.len() != 1 {
        return Err(invalid(format!("tree must have exactly one root, found {}", roots.len())));
    }
    let root = roots[0];
    let mut edge_above = vec![None; nodes.len()];
    let mut next = 0;
    for (c, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            if p >= nodes.len() {
                return Err(invalid(format!("node '{}' has an unknown parent", nodes[c])));
            }
            edge_above[c] = Some(next);
            next += 1;
        }
    }
    // Every node must reach the root without revisiting.
    for start in 0..nodes.len() {
        let mut node = start;
        let mut steps = 0;
        while let Some(p) = parent[node] {
            node = p;
            steps += 1;
            if steps > nodes.len() {
                return Err(invalid("tree parent array contains a cycle"));
            }
        }
    }
    Ok(TreeShape {
        nodes,
        parent,
        root,
        edge_above,
    })
}

fn build_tree(file: &TreeFile) -> Result<TreeShape, ModelError> {
    let node_ix = index_names(&file.nodes, "node")?;
    let parent = file
        .parent
        .iter()
        .map(|p| p.as_ref().map(|name| lookup(&node_ix, name, "node")).transpose())
        .collect::<Result<Vec<_>, _>>()?;
    let shape = build_tree_shape(file.nodes.clone(), parent)?;
    if shape.nodes[shape.root] != file.root {
        return Err(invalid(format!("declared root '{}' has a parent", file.root)));
    }
    Ok(shape)
}

/// Unit-capacity edge items of a tree, named `parent-child`.
pub fn tree_items(shape: &TreeShape) -> Vec<Item> {
    let mut items = vec![None; shape.parent.iter().filter(|p| p.is_some()).count()];
    for (c, e) in shape.edge_above.iter().enumerate() {
        if let Some(e) = *e {
            let p = shape.parent[c].expect("edge implies parent");
            items[e] = Some(Item {
                id: format!("{}-{}", shape.nodes[p], shape.nodes[c]),
                capacity: 1,
            });
        }
    }
    items.into_iter().map(|i| i.expect("every edge named")).collect()
}

fn index_names<'a, I, S>(names: I, what: &str) -> Result<HashMap<String, usize>, ModelError>
where
    I: IntoIterator<Item = &'a S>,
    S: AsRef<str> + 'a + ?Sized,
{
    let mut map = HashMap::new();
    for (i, name) in names.into_iter().enumerate() {
        if map.insert(name.as_ref().to_string(), i).is_some() {
            return Err(invalid(format!("duplicate {what} id '{}'", name.as_ref())));
        }
    }
    Ok(map)
}

fn lookup(map: &HashMap<String, usize>, name: &str, what: &str) -> Result<usize, ModelError> {
    map.get(name)
        .copied()
        .ok_or_else(|| invalid(format!("unknown {what} '{name}'")))
}

/// Reads and validates an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Instance::from_json_str(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<ItemFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeFile>,
    pub buyers: Vec<BuyerFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemFile {
    pub id: String,
    pub capacity: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeFile {
    pub id: String,
    pub u: String,
    pub v: String,
    pub capacity: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub nodes: Vec<String>,
    pub parent: Vec<Option<String>>,
    pub root: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuyerFile {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<(String, String)>,
    pub pmf: BTreeMap<String, f64>,
}

/// One draw of every buyer's value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Realization {
    pub values: Vec<u32>,
    pub provenance: Option<StreamId>,
}

impl Realization {
    pub fn fixed(values: Vec<u32>) -> Self {
        Self {
            values,
            provenance: None,
        }
    }

    /// `{buyer_id: value}` for replay.
    pub fn to_json(&self, instance: &Instance) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = instance
            .buyers
            .iter()
            .zip(&self.values)
            .map(|(b, &v)| (b.id.clone(), serde_json::Value::from(v)))
            .collect();
        serde_json::Value::Object(map)
    }

    pub fn from_json(instance: &Instance, value: &serde_json::Value) -> Result<Self, ModelError> {
        let map = value
            .as_object()
            .ok_or_else(|| invalid("realization must be a JSON object"))?;
        let mut values = Vec::with_capacity(instance.n());
        for buyer in &instance.buyers {
            let v = map
                .get(&buyer.id)
                .and_then(|v| v.as_u64())
                .ok_or_else(|| invalid(format!("realization lacks buyer '{}'", buyer.id)))?;
            let v = u32::try_from(v).map_err(|_| invalid(format!("value of '{}' overflows", buyer.id)))?;
            if !buyer.dist.contains(v) {
                return Err(invalid(format!("value {v} is outside the support of '{}'", buyer.id)));
            }
            values.push(v);
        }
        Ok(Self::fixed(values))
    }
}

/// Draws every buyer's value independently from its pmf.
pub fn sample_realization(instance: &Instance, stream: &mut Stream) -> Realization {
    let provenance = Some(stream.id());
    let values = instance.buyers.iter().map(|b| b.dist.sample(stream)).collect();
    Realization { values, provenance }
}
