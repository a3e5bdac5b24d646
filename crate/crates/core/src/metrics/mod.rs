//! Structural network metrics and stance accuracy.
//!
//! Everything except density works on the undirected, unweighted projection:
//! `{u, v}` is an edge when either `(u, v)` or `(v, u)` is.

mod community;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{SocialGraph, UserId};
use crate::opinion::StanceLabel;
use crate::SimRng;

pub use community::{detect_communities, detect_communities_from, louvain};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("{0} is undefined for this graph")]
    Undefined(&'static str),
    #[error("partition covers {got} users, graph has {expected}")]
    PartitionSize { expected: usize, got: usize },
}

/// Undirected simple graph with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Undirected {
    adj: Vec<Vec<usize>>,
    edges: usize,
}

impl Undirected {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut edges = 0;
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            edges += list.len();
        }
        Undirected { adj, edges: edges / 2 }
    }

    pub fn from_graph(graph: &SocialGraph) -> Self {
        Self::from_edges(graph.len(), graph.edges().map(|(s, t)| (s.index(), t.index())))
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    /// Component label per node, numbered in order of smallest member.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

/// Community index per user, contiguous from 0 in order of first appearance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
}

impl Partition {
    pub fn new(raw: impl IntoIterator<Item = usize>) -> Self {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let assignment = raw
            .into_iter()
            .map(|c| {
                let next = remap.len();
                *remap.entry(c).or_insert(next)
            })
            .collect();
        Partition { assignment }
    }

    pub fn single(n: usize) -> Self {
        Partition { assignment: vec![0; n] }
    }

    pub fn singletons(n: usize) -> Self {
        Partition { assignment: (0..n).collect() }
    }

    pub fn components(graph: &SocialGraph) -> Self {
        Partition::new(Undirected::from_graph(graph).components())
    }

    pub fn community_of(&self, user: UserId) -> usize {
        self.assignment[user.index()]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn community_count(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    /// Members of each community, ascending.
    pub fn groups(&self) -> Vec<Vec<UserId>> {
        let mut groups = vec![Vec::new(); self.community_count()];
        for (u, &c) in self.assignment.iter().enumerate() {
            groups[c].push(UserId(u as u32));
        }
        groups
    }
}

/// Directed density `m / (n (n - 1))`.
pub fn density(graph: &SocialGraph) -> Result<f64, MetricError> {
    let n = graph.len();
    if n < 2 {
        return Err(MetricError::Undefined("density"));
    }
    Ok(graph.edge_count() as f64 / (n as f64 * (n as f64 - 1.0)))
}

pub(crate) fn modularity_undirected(g: &Undirected, assignment: &[usize]) -> Result<f64, MetricError> {
    if assignment.len() != g.len() {
        return Err(MetricError::PartitionSize { expected: g.len(), got: assignment.len() });
    }
    if g.edge_count() == 0 {
        return Err(MetricError::Undefined("modularity"));
    }
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let mut inside = vec![0usize; k];
    let mut degree = vec![0usize; k];
    for u in 0..g.len() {
        let c = assignment[u];
        degree[c] += g.degree(u);
        inside[c] += g.neighbors(u).iter().filter(|&&v| v > u && assignment[v] == c).count();
    }
    let m = g.edge_count() as f64;
    Ok(inside.iter().zip(&degree).map(|(&e, &d)| e as f64 / m - (d as f64 / (2.0 * m)).powi(2)).sum())
}

/// Newman modularity `Σ_c (e_c / m − (d_c / 2m)²)` on the undirected projection.
pub fn modularity_of(graph: &SocialGraph, partition: &Partition) -> Result<f64, MetricError> {
    modularity_undirected(&Undirected::from_graph(graph), partition.assignment())
}

/// Mean local clustering; nodes of degree < 2 count as 0.
pub fn clustering_coefficient(graph: &SocialGraph) -> f64 {
    clustering_undirected(&Undirected::from_graph(graph))
}

fn clustering_undirected(g: &Undirected) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    let mut mark = vec![false; g.len()];
    let mut total = 0.0;
    for u in 0..g.len() {
        let deg = g.degree(u);
        if deg < 2 {
            continue;
        }
        for &v in g.neighbors(u) {
            mark[v] = true;
        }
        let mut links = 0usize;
        for &v in g.neighbors(u) {
            links += g.neighbors(v).iter().filter(|&&w| mark[w]).count();
        }
        for &v in g.neighbors(u) {
            mark[v] = false;
        }
        // Each triangle through u was seen from both of its other corners.
        total += (links / 2) as f64 / (deg * (deg - 1) / 2) as f64;
    }
    total / g.len() as f64
}

/// Mean BFS distance over pairs inside the largest connected component (the
/// one with the smallest member wins a size tie).
pub fn average_path_length(graph: &SocialGraph) -> Result<f64, MetricError> {
    path_length_undirected(&Undirected::from_graph(graph))
}

fn path_length_undirected(g: &Undirected) -> Result<f64, MetricError> {
    let labels = g.components();
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; count];
    for &c in &labels {
        sizes[c] += 1;
    }
    let Some((largest, &size)) = sizes.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))) else {
        return Err(MetricError::Undefined("average path length"));
    };
    if size < 2 {
        return Err(MetricError::Undefined("average path length"));
    }
    let mut dist = vec![usize::MAX; g.len()];
    let mut queue = VecDeque::new();
    let mut total: u64 = 0;
    for source in (0..g.len()).filter(|&u| labels[u] == largest) {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    total += dist[v] as u64;
                    queue.push_back(v);
                }
            }
        }
    }
    Ok(total as f64 / (size as f64 * (size as f64 - 1.0)))
}

/// Fraction of labelled users whose current opinion band matches their label.
pub fn stance_accuracy(graph: &SocialGraph, labels: &BTreeMap<UserId, StanceLabel>) -> Result<f64, MetricError> {
    let mut seen = 0usize;
    let mut hits = 0usize;
    for (&id, &label) in labels {
        if let Ok(user) = graph.user(id) {
            seen += 1;
            if user.opinion.band() == label {
                hits += 1;
            }
        }
    }
    if seen == 0 {
        return Err(MetricError::Undefined("stance accuracy"));
    }
    Ok(hits as f64 / seen as f64)
}

/// Labels stored on the users themselves.
pub fn labels_of(graph: &SocialGraph) -> BTreeMap<UserId, StanceLabel> {
    graph.users().iter().filter_map(|u| u.ground_truth.map(|l| (u.id, l))).collect()
}

/// One checkpoint's metrics. `None` marks an undefined value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub step: u64,
    pub modularity: Option<f64>,
    pub clustering: f64,
    pub path_length: Option<f64>,
    pub density: Option<f64>,
    pub stance_accuracy: Option<f64>,
}

impl MetricsReport {
    pub const COLUMNS: [&'static str; 6] = ["step", "modularity", "clustering", "path_length", "density", "stance_accuracy"];

    /// Measures `graph`; modularity is taken on detected communities.
    pub fn measure(graph: &SocialGraph, step: u64, rng: &mut SimRng) -> Self {
        let modularity = detect_communities(graph, rng).ok().and_then(|p| modularity_of(graph, &p).ok());
        MetricsReport {
            step,
            modularity,
            clustering: clustering_coefficient(graph),
            path_length: average_path_length(graph).ok(),
            density: density(graph).ok(),
            stance_accuracy: stance_accuracy(graph, &labels_of(graph)).ok(),
        }
    }

    /// Metric values in [`Self::COLUMNS`] order, without the step.
    pub fn values(&self) -> [Option<f64>; 5] {
        [self.modularity, Some(self.clustering), self.path_length, self.density, self.stance_accuracy]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::UserState;
    use crate::opinion::Opinion;

    fn graph(n: u32, edges: &[(u32, u32)]) -> SocialGraph {
        let users = (0..n).map(|i| UserState::new(UserId(i), Opinion::NEUTRAL)).collect();
        SocialGraph::with_edges(users, edges.iter().map(|&(a, b)| (UserId(a), UserId(b)))).unwrap()
    }

    fn complete(n: u32) -> SocialGraph {
        let edges: Vec<(u32, u32)> = (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
        graph(n, &edges)
    }

    #[test]
    fn density_examples() {
        assert_eq!(density(&complete(4)).unwrap(), 1.0);
        assert_eq!(density(&graph(3, &[(0, 1), (1, 2)])).unwrap(), 2.0 / 6.0);
        assert_eq!(density(&graph(3, &[])).unwrap(), 0.0);
        assert_eq!(density(&graph(1, &[])), Err(MetricError::Undefined("density")));
    }

    #[test]
    fn modularity_examples() {
        let two = graph(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]);
        let by_component = Partition::new([0, 0, 0, 1, 1, 1]);
        assert!((modularity_of(&two, &by_component).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(modularity_of(&two, &Partition::single(6)).unwrap(), 0.0);
        assert_eq!(modularity_of(&graph(3, &[]), &Partition::single(3)), Err(MetricError::Undefined("modularity")));
        assert!(matches!(modularity_of(&two, &Partition::single(2)), Err(MetricError::PartitionSize { .. })));
    }

    #[test]
    fn mutual_follows_count_once() {
        let g = graph(3, &[(0, 1), (1, 0), (1, 2)]);
        assert_eq!(Undirected::from_graph(&g).edge_count(), 2);
    }

    #[test]
    fn clustering_examples() {
        assert_eq!(clustering_coefficient(&graph(3, &[(0, 1), (1, 2), (2, 0)])), 1.0);
        assert_eq!(clustering_coefficient(&graph(4, &[(0, 1), (0, 2), (0, 3)])), 0.0);
        // 4-cycle 0-1-2-3 with chord 0-2: nodes 0 and 2 have 2 of 3 pairs
        // linked, nodes 1 and 3 have 1 of 1.
        let chord = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        assert!((clustering_coefficient(&chord) - (2.0 / 3.0 * 2.0 + 2.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn path_length_examples() {
        assert!((average_path_length(&graph(3, &[(0, 1), (1, 2)])).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(average_path_length(&complete(5)).unwrap(), 1.0);
        // Path of 4 (pair distances 1,1,1,2,2,3) plus a separate pair.
        let split = graph(6, &[(0, 1), (1, 2), (2, 3), (4, 5)]);
        assert!((average_path_length(&split).unwrap() - 10.0 / 6.0).abs() < 1e-12);
        assert_eq!(average_path_length(&graph(3, &[])), Err(MetricError::Undefined("average path length")));
    }

    #[test]
    fn stance_accuracy_examples() {
        let mut g = graph(4, &[]);
        let labels: BTreeMap<UserId, StanceLabel> = (0..4).map(|i| (UserId(i), StanceLabel::Favor)).collect();
        for i in 0..4 {
            g.set_opinion(UserId(i), Opinion::new(1.0)).unwrap();
        }
        assert_eq!(stance_accuracy(&g, &labels).unwrap(), 1.0);
        g.set_opinion(UserId(0), Opinion::new(0.0)).unwrap();
        g.set_opinion(UserId(1), Opinion::new(-1.0)).unwrap();
        assert_eq!(stance_accuracy(&g, &labels).unwrap(), 0.5);
        assert_eq!(stance_accuracy(&g, &BTreeMap::new()), Err(MetricError::Undefined("stance accuracy")));
    }

    #[test]
    fn partition_is_normalized() {
        let p = Partition::new([7, 7, 2, 9, 2]);
        assert_eq!(p.assignment(), &[0, 0, 1, 2, 1]);
        assert_eq!(p.community_count(), 3);
        assert_eq!(p.groups()[1], vec![UserId(2), UserId(4)]);
    }
}
