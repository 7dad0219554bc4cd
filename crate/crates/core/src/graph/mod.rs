//! Undirected simple graphs with optional community labels.
//!
//! Self-loops are never stored: every node implicitly exchanges messages
//! with itself when the graph is translated into a network, so the stored
//! adjacency is the neighborhood minus the node itself.

mod edgelist;
mod metrics;

pub use edgelist::{parse_edge_list, read_edge_list, write_edge_list, EdgeList};
pub use metrics::{
    avg_path_length, clustering_coefficient, cross_density, degree_stats, local_clustering,
    modularity, DegreeStats, GraphMetrics,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    /// Sorted, deduplicated neighbor lists. `adjacency[i]` never contains `i`.
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
    communities: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a graph on `n` nodes from unordered pairs. Self-pairs are dropped
    /// and duplicates (in either orientation) collapse to one edge.
    pub fn from_edge_pairs<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(Error::TooSmall { n });
        }
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in pairs {
            for id in [a, b] {
                if id >= n {
                    return Err(Error::InvalidNodeId { id, node_count: n });
                }
            }
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        Ok(Self::from_raw_adjacency(adjacency))
    }

    /// Edgeless graph on `n` nodes.
    pub fn empty(n: usize) -> Result<Self> {
        Self::from_edge_pairs(n, std::iter::empty())
    }

    fn from_raw_adjacency(mut adjacency: Vec<Vec<usize>>) -> Self {
        let mut twice = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            twice += list.len();
        }
        Graph {
            adjacency,
            edge_count: twice / 2,
            communities: None,
        }
    }

    /// Attaches one community label per node.
    pub fn with_communities(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.node_count() {
            return Err(Error::Shape(format!(
                "{} community labels for {} nodes",
                labels.len(),
                self.node_count()
            )));
        }
        self.communities = Some(labels);
        Ok(self)
    }

    pub fn without_communities(mut self) -> Self {
        self.communities = None;
        self
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.node_count() && self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Edges as `(low, high)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn communities(&self) -> Option<&[usize]> {
        self.communities.as_deref()
    }

    pub fn community_of(&self, node: usize) -> Option<usize> {
        self.communities.as_ref().map(|c| c[node])
    }

    /// Number of distinct community labels, 0 when unlabeled.
    pub fn community_count(&self) -> usize {
        match &self.communities {
            None => 0,
            Some(labels) => {
                let mut seen: Vec<usize> = labels.clone();
                seen.sort_unstable();
                seen.dedup();
                seen.len()
            }
        }
    }

    /// `(label, size)` pairs sorted by label.
    pub fn community_sizes(&self) -> Vec<(usize, usize)> {
        let Some(labels) = &self.communities else {
            return Vec::new();
        };
        let mut counts = std::collections::BTreeMap::new();
        for &c in labels {
            *counts.entry(c).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }

    /// Connected components, each sorted ascending, ordered by lowest node id.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut members = Vec::new();
            while let Some(v) = stack.pop() {
                members.push(v);
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() == 1
    }

    /// Subgraph induced by `nodes`, relabeled to `0..nodes.len()` in ascending
    /// original-id order. Community labels are carried over.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let n = self.node_count();
        let mut keep: Vec<usize> = nodes.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if let Some(&bad) = keep.iter().find(|&&v| v >= n) {
            return Err(Error::InvalidNodeId {
                id: bad,
                node_count: n,
            });
        }
        if keep.is_empty() {
            return Err(Error::TooSmall { n: 0 });
        }
        let mut new_id = vec![usize::MAX; n];
        for (k, &v) in keep.iter().enumerate() {
            new_id[v] = k;
        }
        let adjacency = keep
            .iter()
            .map(|&v| {
                self.adjacency[v]
                    .iter()
                    .filter_map(|&w| (new_id[w] != usize::MAX).then_some(new_id[w]))
                    .collect()
            })
            .collect();
        let mut sub = Graph::from_raw_adjacency(adjacency);
        sub.communities = self
            .communities
            .as_ref()
            .map(|labels| keep.iter().map(|&v| labels[v]).collect());
        Ok(sub)
    }

    /// Induced subgraph on the largest connected component. Ties go to the
    /// component holding the lowest node id.
    pub fn largest_component(&self) -> Graph {
        let components = self.connected_components();
        // Components are ordered by lowest id, so the first maximum wins ties.
        let mut best = &components[0];
        for c in &components[1..] {
            if c.len() > best.len() {
                best = c;
            }
        }
        if best.len() == self.node_count() {
            return self.clone();
        }
        self.induced_subgraph(best)
            .expect("component node ids are valid")
    }

    /// Checks the structural invariants by direct scan: symmetric adjacency,
    /// no self-loops, no duplicates, labels for every node.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.node_count();
        let mut twice = 0;
        for (i, list) in self.adjacency.iter().enumerate() {
            twice += list.len();
            for w in list.windows(2) {
                if w[0] >= w[1] {
                    return Err(format!("neighbors of {i} not strictly sorted"));
                }
            }
            for &j in list {
                if j >= n {
                    return Err(format!("neighbor {j} of {i} out of range"));
                }
                if j == i {
                    return Err(format!("self-loop at {i}"));
                }
                if self.adjacency[j].binary_search(&i).is_err() {
                    return Err(format!("edge ({i},{j}) not symmetric"));
                }
            }
        }
        if twice != 2 * self.edge_count {
            return Err("edge count out of sync".into());
        }
        if let Some(labels) = &self.communities {
            if labels.len() != n {
                return Err("community labels do not cover all nodes".into());
            }
        }
        Ok(())
    }
}
