//! Greedy modularity ascent: Louvain local moves plus aggregation.

use rand::Rng;

use super::{modularity_undirected, MetricError, Partition, Undirected};
use crate::graph::SocialGraph;
use crate::SimRng;

const GAIN_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 1000;

/// Weighted graph for one aggregation level. `self_weight` holds loop
/// weights; a loop adds twice its weight to the node's degree.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_weight: Vec<f64>,
    degree: Vec<f64>,
    total: f64,
}

impl Level {
    fn from_undirected(g: &Undirected) -> Self {
        let adj: Vec<Vec<(usize, f64)>> = (0..g.len()).map(|u| g.neighbors(u).iter().map(|&v| (v, 1.0)).collect()).collect();
        let self_weight = vec![0.0; g.len()];
        Self::finish(adj, self_weight)
    }

    fn finish(adj: Vec<Vec<(usize, f64)>>, self_weight: Vec<f64>) -> Self {
        let degree: Vec<f64> =
            adj.iter().zip(&self_weight).map(|(list, s)| list.iter().map(|(_, w)| w).sum::<f64>() + 2.0 * s).collect();
        let total = degree.iter().sum();
        Level { adj, self_weight, degree, total }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Sweeps nodes in ascending order, moving each to the neighboring
    /// community with the best gain, until a sweep moves nothing. Returns
    /// whether any node moved.
    fn local_moves(&self, community: &mut [usize], rng: &mut SimRng) -> bool {
        let n = self.len();
        let mut tot = vec![0.0; n];
        for u in 0..n {
            tot[community[u]] += self.degree[u];
        }
        let mut links = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut ties: Vec<usize> = Vec::new();
        let mut any = false;
        for _ in 0..MAX_SWEEPS {
            let mut moved = false;
            for u in 0..n {
                let own = community[u];
                let k = self.degree[u];
                for &(v, w) in &self.adj[u] {
                    let c = community[v];
                    if links[c] == 0.0 {
                        touched.push(c);
                    }
                    links[c] += w;
                }
                tot[own] -= k;
                let gain = |c: usize, links: &[f64], tot: &[f64]| links[c] - tot[c] * k / self.total;
                let mut best = gain(own, &links, &tot);
                for &c in &touched {
                    best = best.max(gain(c, &links, &tot));
                }
                ties.clear();
                if gain(own, &links, &tot) < best - GAIN_TOLERANCE {
                    touched.sort_unstable();
                    ties.extend(touched.iter().copied().filter(|&c| gain(c, &links, &tot) >= best - GAIN_TOLERANCE));
                }
                let target = match ties.len() {
                    0 => own,
                    1 => ties[0],
                    len => ties[rng.gen_range(0..len)],
                };
                tot[target] += k;
                community[u] = target;
                if target != own {
                    moved = true;
                    any = true;
                }
                for &c in &touched {
                    links[c] = 0.0;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
        }
        any
    }

    /// Collapses each community into one node.
    fn aggregate(&self, community: &[usize], count: usize) -> Level {
        let mut self_weight = vec![0.0; count];
        let mut maps: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); count];
        for u in 0..self.len() {
            let cu = community[u];
            self_weight[cu] += self.self_weight[u];
            for &(v, w) in &self.adj[u] {
                let cv = community[v];
                if cu == cv {
                    // Seen from both ends.
                    self_weight[cu] += w / 2.0;
                } else {
                    *maps[cu].entry(cv).or_default() += w;
                }
            }
        }
        let adj = maps.into_iter().map(|m| m.into_iter().collect()).collect();
        Level::finish(adj, self_weight)
    }
}

/// Runs Louvain from `start` and returns the final assignment.
pub fn louvain(g: &Undirected, start: &Partition, rng: &mut SimRng) -> Partition {
    let mut level = Level::from_undirected(g);
    // membership[u] = node of the current level that original node u sits in.
    let mut membership: Vec<usize> = (0..g.len()).collect();
    let mut community: Vec<usize> = start.assignment().to_vec();
    if level.total == 0.0 {
        return Partition::new(community);
    }
    loop {
        level.local_moves(&mut community, rng);
        let normalized = Partition::new(community.iter().copied());
        let count = normalized.community_count();
        for m in membership.iter_mut() {
            *m = normalized.assignment()[*m];
        }
        if count == level.len() {
            break;
        }
        level = level.aggregate(normalized.assignment(), count);
        community = (0..count).collect();
    }
    Partition::new(membership)
}

/// Communities by modularity ascent from singletons, compared against the
/// connected-components partition; the higher-modularity one is returned.
pub fn detect_communities(graph: &SocialGraph, rng: &mut SimRng) -> Result<Partition, MetricError> {
    let g = Undirected::from_graph(graph);
    if g.edge_count() == 0 {
        return Err(MetricError::Undefined("modularity"));
    }
    let ascent = louvain(&g, &Partition::singletons(g.len()), rng);
    let components = Partition::new(g.components());
    let q_ascent = modularity_undirected(&g, ascent.assignment())?;
    let q_components = modularity_undirected(&g, components.assignment())?;
    Ok(if q_components > q_ascent + GAIN_TOLERANCE { components } else { ascent })
}

/// Modularity ascent from a given starting partition.
pub fn detect_communities_from(graph: &SocialGraph, start: &Partition, rng: &mut SimRng) -> Result<Partition, MetricError> {
    let g = Undirected::from_graph(graph);
    if start.len() != g.len() {
        return Err(MetricError::PartitionSize { expected: g.len(), got: start.len() });
    }
    if g.edge_count() == 0 {
        return Err(MetricError::Undefined("modularity"));
    }
    Ok(louvain(&g, start, rng))
}
