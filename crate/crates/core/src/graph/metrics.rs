//! Structural metrics reported next to training results.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub mean_degree: f64,
    pub clustering: f64,
    /// `None` when the graph is disconnected or has a single node.
    pub avg_path_length: Option<f64>,
    /// Newman modularity of the stored community labels; `None` without
    /// labels or edges.
    pub modularity: Option<f64>,
    /// `None` unless at least two communities are labeled.
    pub cross_density: Option<f64>,
    /// Fraction of nodes in the largest connected component.
    pub giant_fraction: f64,
}

impl GraphMetrics {
    pub fn compute(graph: &Graph) -> Self {
        let n = graph.node_count();
        let components = graph.connected_components();
        let giant = components.iter().map(Vec::len).max().unwrap_or(0);
        let avg_path_length = if components.len() == 1 && n >= 2 {
            avg_path_length(graph).ok()
        } else {
            None
        };
        let modularity = graph
            .communities()
            .and_then(|labels| modularity(graph, labels).ok());
        GraphMetrics {
            mean_degree: degree_stats(graph).mean,
            clustering: clustering_coefficient(graph),
            avg_path_length,
            modularity,
            cross_density: cross_density(graph).ok(),
            giant_fraction: giant as f64 / n as f64,
        }
    }
}

/// Number of edges among the neighbors of `node`, via sorted-list merges.
fn neighbor_links(graph: &Graph, node: usize) -> usize {
    let nbrs = graph.neighbors(node);
    let mut links = 0;
    for (idx, &a) in nbrs.iter().enumerate() {
        let rest = &nbrs[idx + 1..];
        let na = graph.neighbors(a);
        let (mut i, mut j) = (0, 0);
        while i < rest.len() && j < na.len() {
            match rest[i].cmp(&na[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    links += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    links
}

/// Local clustering of `node`; 0 for degree below 2.
pub fn local_clustering(graph: &Graph, node: usize) -> f64 {
    let k = graph.degree(node);
    if k < 2 {
        return 0.0;
    }
    2.0 * neighbor_links(graph, node) as f64 / (k * (k - 1)) as f64
}

/// Mean local clustering over all nodes (degree < 2 counts as 0).
pub fn clustering_coefficient(graph: &Graph) -> f64 {
    let n = graph.node_count();
    (0..n).map(|v| local_clustering(graph, v)).sum::<f64>() / n as f64
}

fn bfs_distances(graph: &Graph, source: usize, dist: &mut [usize], queue: &mut VecDeque<usize>) {
    dist.fill(usize::MAX);
    dist[source] = 0;
    queue.clear();
    queue.push_back(source);
    while let Some(v) = queue.pop_front() {
        let d = dist[v] + 1;
        for &w in graph.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = d;
                queue.push_back(w);
            }
        }
    }
}

/// Mean shortest-path length over unordered pairs of distinct nodes.
pub fn avg_path_length(graph: &Graph) -> Result<f64> {
    let n = graph.node_count();
    if n < 2 {
        return Err(Error::UndefinedMetric("path length needs at least 2 nodes"));
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::with_capacity(n);
    let mut total: u64 = 0;
    for s in 0..n {
        bfs_distances(graph, s, &mut dist, &mut queue);
        for &d in &dist[s + 1..] {
            if d == usize::MAX {
                return Err(Error::DisconnectedGraph);
            }
            total += d as u64;
        }
    }
    let pairs = (n as u64) * (n as u64 - 1) / 2;
    Ok(total as f64 / pairs as f64)
}

/// Newman–Girvan modularity `Q = Σ_c (e_cc − a_c²)`.
pub fn modularity(graph: &Graph, partition: &[usize]) -> Result<f64> {
    if partition.len() != graph.node_count() {
        return Err(Error::Shape(format!(
            "partition labels {} nodes, graph has {}",
            partition.len(),
            graph.node_count()
        )));
    }
    let m = graph.edge_count();
    if m == 0 {
        return Err(Error::UndefinedMetric("modularity of an edgeless graph"));
    }
    let k = partition.iter().max().map_or(0, |&c| c + 1);
    let mut intra = vec![0usize; k];
    let mut degree_sum = vec![0usize; k];
    for (v, &c) in partition.iter().enumerate() {
        degree_sum[c] += graph.degree(v);
    }
    for (a, b) in graph.edges() {
        if partition[a] == partition[b] {
            intra[partition[a]] += 1;
        }
    }
    let m = m as f64;
    Ok(intra
        .iter()
        .zip(&degree_sum)
        .map(|(&l, &d)| {
            let a = d as f64 / (2.0 * m);
            l as f64 / m - a * a
        })
        .sum())
}

/// Realized density of inter-community edges:
/// inter-community edges divided by inter-community node pairs.
pub fn cross_density(graph: &Graph) -> Result<f64> {
    let Some(labels) = graph.communities() else {
        return Err(Error::UndefinedMetric("cross density needs community labels"));
    };
    let sizes = graph.community_sizes();
    if sizes.len() < 2 {
        return Err(Error::UndefinedMetric("cross density needs at least 2 communities"));
    }
    let n = graph.node_count() as u64;
    let same: u64 = sizes.iter().map(|&(_, s)| (s as u64) * (s as u64)).sum();
    let cross_pairs = (n * n - same) / 2;
    let cross_edges = graph
        .edges()
        .filter(|&(a, b)| labels[a] != labels[b])
        .count();
    Ok(cross_edges as f64 / cross_pairs as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub mean: f64,
    pub max: usize,
    /// `histogram[k]` counts nodes of degree `k`.
    pub histogram: Vec<usize>,
}

pub fn degree_stats(graph: &Graph) -> DegreeStats {
    let degrees = graph.degrees();
    let max = degrees.iter().copied().max().unwrap_or(0);
    let mut histogram = vec![0; max + 1];
    for &d in &degrees {
        histogram[d] += 1;
    }
    DegreeStats {
        mean: 2.0 * graph.edge_count() as f64 / graph.node_count() as f64,
        max,
        histogram,
    }
}
