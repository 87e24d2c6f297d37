//! Directed graph model, random DAG generation, CPDAG conversion and
//! structure-recovery metrics.
//!
//! Nodes are 0-based internally. The JSON form uses 1-based indices.

use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("node index {index} out of range for a graph with {p} nodes")]
    NodeOutOfRange { index: usize, p: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("directed cycle through edge {from} -> {to}")]
    Cycle { from: usize, to: usize },
    #[error("invalid indegree bound d = {d} for p = {p} (need d < p)")]
    InvalidIndegree { p: usize, d: usize },
    #[error("dimension mismatch: {0} vs {1} nodes")]
    DimensionMismatch(usize, usize),
    #[error("edge {0} -> {1} is both directed and undirected")]
    MixedEdge(usize, usize),
    #[error("label count {labels} does not match node count {p}")]
    LabelCount { labels: usize, p: usize },
    #[error("malformed graph JSON: {0}")]
    Json(String),
}

/// A permutation of `0..p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ordering(Vec<usize>);

impl Ordering {
    pub fn new(order: Vec<usize>) -> Result<Self, GraphError> {
        let p = order.len();
        let mut seen = vec![false; p];
        for &v in &order {
            if v >= p {
                return Err(GraphError::NodeOutOfRange { index: v, p });
            }
            if seen[v] {
                return Err(GraphError::Json(format!("node {v} repeated in ordering")));
            }
            seen[v] = true;
        }
        Ok(Ordering(order))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `positions()[v]` is the rank of node `v`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            pos[v] = i;
        }
        pos
    }

    /// True when every edge points from an earlier to a later node.
    pub fn respects(&self, dag: &Dag) -> bool {
        if self.len() != dag.p() {
            return false;
        }
        let pos = self.positions();
        dag.edges().all(|(j, k)| pos[j] < pos[k])
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

/// Directed acyclic graph. Parent lists are sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
    order: Vec<usize>,
    labels: Option<Vec<String>>,
}

impl Dag {
    /// Builds a DAG from `(parent, child)` pairs.
    pub fn new(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        if p == 0 {
            return Err(GraphError::Empty);
        }
        let mut parents = vec![BTreeSet::new(); p];
        for (j, k) in edges {
            for idx in [j, k] {
                if idx >= p {
                    return Err(GraphError::NodeOutOfRange { index: idx, p });
                }
            }
            if j == k {
                return Err(GraphError::SelfLoop(j));
            }
            parents[k].insert(j);
        }
        let parents: Vec<Vec<usize>> = parents.into_iter().map(|s| s.into_iter().collect()).collect();
        let order = kahn_order(p, &parents)?;
        Ok(Dag {
            parents,
            order,
            labels: None,
        })
    }

    pub fn empty(p: usize) -> Result<Self, GraphError> {
        Dag::new(p, std::iter::empty())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, GraphError> {
        if labels.len() != self.p() {
            return Err(GraphError::LabelCount {
                labels: labels.len(),
                p: self.p(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.parents.len()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn parents(&self, k: usize) -> &[usize] {
        &self.parents[k]
    }

    pub fn has_edge(&self, j: usize, k: usize) -> bool {
        self.parents[k].binary_search(&j).is_ok()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn indegree(&self, k: usize) -> usize {
        self.parents[k].len()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Edges `(parent, child)` sorted by child, then parent.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(k, ps)| ps.iter().map(move |&j| (j, k)))
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges().collect()
    }

    /// Canonical `(min, max)` pairs of the underlying undirected graph.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges().map(|(j, k)| (j.min(k), j.max(k))).collect()
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Dag, GraphError> {
        if perm.len() != self.p() {
            return Err(GraphError::DimensionMismatch(perm.len(), self.p()));
        }
        Dag::new(self.p(), self.edges().map(|(j, k)| (perm[j], perm[k])))
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            p: self.p(),
            edges: self.edges().map(|(j, k)| [j + 1, k + 1]).collect(),
            undirected: Vec::new(),
            labels: self.labels.clone(),
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Dag, GraphError> {
        if !json.undirected.is_empty() {
            return Err(GraphError::Json("a DAG cannot carry undirected edges".into()));
        }
        let edges = json
            .edges
            .iter()
            .map(|&[j, k]| one_based_pair(j, k, json.p))
            .collect::<Result<Vec<_>, _>>()?;
        let dag = Dag::new(json.p, edges)?;
        match &json.labels {
            Some(l) => dag.with_labels(l.clone()),
            None => Ok(dag),
        }
    }
}

fn one_based_pair(j: usize, k: usize, p: usize) -> Result<(usize, usize), GraphError> {
    if j == 0 || k == 0 || j > p || k > p {
        let index = if j == 0 || j > p { j } else { k };
        return Err(GraphError::NodeOutOfRange { index, p });
    }
    Ok((j - 1, k - 1))
}

/// Kahn's algorithm with lowest-index tie-breaking.
fn kahn_order(p: usize, parents: &[Vec<usize>]) -> Result<Vec<usize>, GraphError> {
    let mut children = vec![Vec::new(); p];
    let mut remaining: Vec<usize> = parents.iter().map(Vec::len).collect();
    for (k, ps) in parents.iter().enumerate() {
        for &j in ps {
            children[j].push(k);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..p).filter(|&v| remaining[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(p);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in &children[v] {
            remaining[c] -= 1;
            if remaining[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() < p {
        let placed: BTreeSet<usize> = order.iter().copied().collect();
        // Some unplaced node has an unplaced parent; that edge lies on or leads into a cycle.
        // Walk parents until a node repeats to name an edge on the cycle itself.
        let start = (0..p).find(|v| !placed.contains(v)).expect("unplaced node");
        let mut visited = vec![usize::MAX; p];
        let mut cur = start;
        let mut step = 0;
        loop {
            visited[cur] = step;
            let next = *parents[cur]
                .iter()
                .find(|j| !placed.contains(j))
                .expect("unplaced node has an unplaced parent");
            if visited[next] != usize::MAX {
                return Err(GraphError::Cycle { from: next, to: cur });
            }
            cur = next;
            step += 1;
        }
    }
    Ok(order)
}

/// Topological ordering, ties broken by lowest node index.
pub fn topological_order(dag: &Dag) -> Ordering {
    Ordering(dag.order.clone())
}

/// Random DAG with indegree at most `d`.
///
/// A uniformly random permutation fixes the ground-truth ordering. The node at
/// ordering position `m` (0-based) draws its parent count uniformly from
/// `0..=min(d, m)` and its parents uniformly without replacement from its
/// predecessors.
pub fn random_dag(p: usize, d: usize, seed: u64) -> Result<Dag, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_dag_with(p, d, &mut rng)
}

pub fn random_dag_with<R: Rng + ?Sized>(p: usize, d: usize, rng: &mut R) -> Result<Dag, GraphError> {
    if p == 0 {
        return Err(GraphError::Empty);
    }
    if d >= p {
        return Err(GraphError::InvalidIndegree { p, d });
    }
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(rng);
    let mut edges = Vec::new();
    for m in 1..p {
        let count = rng.random_range(0..=d.min(m));
        let chosen = rand::seq::index::sample(rng, m, count);
        for i in chosen.iter() {
            edges.push((perm[i], perm[m]));
        }
    }
    Dag::new(p, edges)
}

/// Completed partially directed acyclic graph: the Markov equivalence class of a DAG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    p: usize,
    directed: BTreeSet<(usize, usize)>,
    undirected: BTreeSet<(usize, usize)>,
}

impl Cpdag {
    pub fn new(
        p: usize,
        directed: impl IntoIterator<Item = (usize, usize)>,
        undirected: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut d = BTreeSet::new();
        let mut u = BTreeSet::new();
        for (j, k) in directed {
            check_pair(j, k, p)?;
            d.insert((j, k));
        }
        for (j, k) in undirected {
            check_pair(j, k, p)?;
            u.insert((j.min(k), j.max(k)));
        }
        for &(j, k) in &d {
            if u.contains(&(j.min(k), j.max(k))) {
                return Err(GraphError::MixedEdge(j, k));
            }
        }
        Ok(Cpdag {
            p,
            directed: d,
            undirected: u,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn directed(&self) -> &BTreeSet<(usize, usize)> {
        &self.directed
    }

    pub fn undirected(&self) -> &BTreeSet<(usize, usize)> {
        &self.undirected
    }

    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.directed
            .iter()
            .map(|&(j, k)| (j.min(k), j.max(k)))
            .chain(self.undirected.iter().copied())
            .collect()
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            p: self.p,
            edges: self.directed.iter().map(|&(j, k)| [j + 1, k + 1]).collect(),
            undirected: self.undirected.iter().map(|&(j, k)| [j + 1, k + 1]).collect(),
            labels: None,
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Cpdag, GraphError> {
        let d = json
            .edges
            .iter()
            .map(|&[j, k]| one_based_pair(j, k, json.p))
            .collect::<Result<Vec<_>, _>>()?;
        let u = json
            .undirected
            .iter()
            .map(|&[j, k]| one_based_pair(j, k, json.p))
            .collect::<Result<Vec<_>, _>>()?;
        Cpdag::new(json.p, d, u)
    }
}

fn check_pair(j: usize, k: usize, p: usize) -> Result<(), GraphError> {
    for idx in [j, k] {
        if idx >= p {
            return Err(GraphError::NodeOutOfRange { index: idx, p });
        }
    }
    if j == k {
        return Err(GraphError::SelfLoop(j));
    }
    Ok(())
}

/// Dense mixed-graph state used while orienting edges.
struct Pdag {
    p: usize,
    // dir[a * p + b]: a -> b
    dir: Vec<bool>,
    // und[a * p + b] == und[b * p + a]
    und: Vec<bool>,
}

impl Pdag {
    fn directed(&self, a: usize, b: usize) -> bool {
        self.dir[a * self.p + b]
    }

    fn undirected(&self, a: usize, b: usize) -> bool {
        self.und[a * self.p + b]
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.directed(a, b) || self.directed(b, a) || self.undirected(a, b)
    }

    fn orient(&mut self, a: usize, b: usize) {
        let p = self.p;
        self.und[a * p + b] = false;
        self.und[b * p + a] = false;
        self.dir[a * p + b] = true;
    }

    /// One pass of Meek's rules R1-R4. Returns whether anything changed.
    fn meek_pass(&mut self) -> bool {
        let p = self.p;
        let mut changed = false;
        for a in 0..p {
            for b in 0..p {
                if a == b || !self.undirected(a, b) {
                    continue;
                }
                if self.forced(a, b) {
                    self.orient(a, b);
                    changed = true;
                }
            }
        }
        changed
    }

    /// Whether the undirected edge a - b must be oriented a -> b.
    fn forced(&self, a: usize, b: usize) -> bool {
        let p = self.p;
        // R1: c -> a - b, c and b nonadjacent.
        if (0..p).any(|c| c != b && self.directed(c, a) && !self.adjacent(c, b)) {
            return true;
        }
        // R2: a -> c -> b.
        if (0..p).any(|c| self.directed(a, c) && self.directed(c, b)) {
            return true;
        }
        // R3: a - c -> b, a - e -> b, c and e nonadjacent.
        let mids: Vec<usize> = (0..p)
            .filter(|&c| c != b && self.undirected(a, c) && self.directed(c, b))
            .collect();
        for (i, &c) in mids.iter().enumerate() {
            for &e in &mids[i + 1..] {
                if !self.adjacent(c, e) {
                    return true;
                }
            }
        }
        // R4: a - e -> c -> b, a adjacent to c, e and b nonadjacent.
        for c in 0..p {
            if c == a || c == b || !self.directed(c, b) || !self.adjacent(a, c) {
                continue;
            }
            if (0..p).any(|e| e != b && e != c && self.undirected(a, e) && self.directed(e, c) && !self.adjacent(e, b)) {
                return true;
            }
        }
        false
    }

    fn into_cpdag(self) -> Cpdag {
        let p = self.p;
        let mut directed = BTreeSet::new();
        let mut undirected = BTreeSet::new();
        for a in 0..p {
            for b in 0..p {
                if self.directed(a, b) {
                    directed.insert((a, b));
                } else if a < b && self.undirected(a, b) {
                    undirected.insert((a, b));
                }
            }
        }
        Cpdag { p, directed, undirected }
    }
}

/// Markov equivalence class of `dag`: v-structure edges directed, Meek rules
/// iterated to a fixpoint, everything else undirected.
pub fn cpdag_of(dag: &Dag) -> Cpdag {
    let p = dag.p();
    let mut g = Pdag {
        p,
        dir: vec![false; p * p],
        und: vec![false; p * p],
    };
    for (j, k) in dag.edges() {
        g.und[j * p + k] = true;
        g.und[k * p + j] = true;
    }
    for k in 0..p {
        let ps = dag.parents(k);
        for (i, &a) in ps.iter().enumerate() {
            for &c in &ps[i + 1..] {
                if !dag.adjacent(a, c) {
                    g.orient(a, k);
                    g.orient(c, k);
                }
            }
        }
    }
    while g.meek_pass() {}
    g.into_cpdag()
}

/// Applies Meek's rules to a partially directed graph until nothing changes.
pub fn meek_closure(pdag: &Cpdag) -> Cpdag {
    let p = pdag.p;
    let mut g = Pdag {
        p,
        dir: vec![false; p * p],
        und: vec![false; p * p],
    };
    for &(a, b) in &pdag.directed {
        g.dir[a * p + b] = true;
    }
    for &(a, b) in &pdag.undirected {
        g.und[a * p + b] = true;
        g.und[b * p + a] = true;
    }
    while g.meek_pass() {}
    g.into_cpdag()
}

/// Undirected graph over `p` nodes, edges stored as `(min, max)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl UndirectedGraph {
    pub fn new(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        let mut set = BTreeSet::new();
        for (j, k) in edges {
            check_pair(j, k, p)?;
            set.insert((j.min(k), j.max(k)));
        }
        Ok(UndirectedGraph { p, edges: set })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            p: self.p,
            edges: Vec::new(),
            undirected: self.edges.iter().map(|&(j, k)| [j + 1, k + 1]).collect(),
            labels: None,
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self, GraphError> {
        if !json.edges.is_empty() {
            return Err(GraphError::Json("an undirected graph cannot carry directed edges".into()));
        }
        let u = json
            .undirected
            .iter()
            .map(|&[j, k]| one_based_pair(j, k, json.p))
            .collect::<Result<Vec<_>, _>>()?;
        UndirectedGraph::new(json.p, u)
    }
}

/// On-disk graph schema shared by DAGs, CPDAGs and undirected graphs (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    pub p: usize,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub undirected: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl GraphJson {
    pub fn to_string_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph JSON serializes")
    }

    pub fn parse(s: &str) -> Result<Self, GraphError> {
        serde_json::from_str(s).map_err(|e| GraphError::Json(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureMetrics {
    pub precision: f64,
    pub recall: f64,
    pub true_positives: usize,
    pub estimated: usize,
    pub truth: usize,
}

impl StructureMetrics {
    pub fn from_counts(true_positives: usize, estimated: usize, truth: usize) -> Self {
        let precision = if estimated == 0 {
            1.0
        } else {
            true_positives as f64 / estimated as f64
        };
        let recall = if truth == 0 { 1.0 } else { true_positives as f64 / truth as f64 };
        StructureMetrics {
            precision,
            recall,
            true_positives,
            estimated,
            truth,
        }
    }

    fn of_sets<T: Ord>(est: &BTreeSet<T>, truth: &BTreeSet<T>) -> Self {
        Self::from_counts(est.intersection(truth).count(), est.len(), truth.len())
    }
}

/// Directed-edge precision and recall; orientation must match.
pub fn edge_metrics(estimated: &Dag, truth: &Dag) -> Result<StructureMetrics, GraphError> {
    if estimated.p() != truth.p() {
        return Err(GraphError::DimensionMismatch(estimated.p(), truth.p()));
    }
    Ok(StructureMetrics::of_sets(&estimated.edge_set(), &truth.edge_set()))
}

/// CPDAG precision and recall; an edge matches only with identical type and orientation.
pub fn cpdag_metrics(estimated: &Cpdag, truth: &Cpdag) -> Result<StructureMetrics, GraphError> {
    if estimated.p() != truth.p() {
        return Err(GraphError::DimensionMismatch(estimated.p(), truth.p()));
    }
    let tp = estimated.directed.intersection(&truth.directed).count()
        + estimated.undirected.intersection(&truth.undirected).count();
    let est = estimated.directed.len() + estimated.undirected.len();
    let tru = truth.directed.len() + truth.undirected.len();
    Ok(StructureMetrics::from_counts(tp, est, tru))
}

/// Precision and recall of unoriented adjacencies.
pub fn skeleton_metrics(
    estimated: &BTreeSet<(usize, usize)>,
    truth: &BTreeSet<(usize, usize)>,
) -> StructureMetrics {
    StructureMetrics::of_sets(estimated, truth)
}
