//! Biological comparison graphs from user-supplied connectome edge lists.

use std::path::PathBuf;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::generate::gen_er;
use crate::graph::{read_edge_list, Graph};
use crate::rng::rng_from_seed;

/// Neuron count of the whole-brain network.
pub const WHOLE_BRAIN_NODES: usize = 277;
/// Neuron count of the frontal network, also the random sample size.
pub const FRONTAL_NODES: usize = 131;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectomeSource {
    pub path: PathBuf,
    pub declared_nodes: Option<usize>,
    /// Collapse directed entries silently. When false, reciprocal lines are
    /// still merged but reported as a warning.
    pub symmetrize: bool,
}

impl ConnectomeSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        ConnectomeSource {
            path: path.into(),
            declared_nodes: None,
            symmetrize: true,
        }
    }

    pub fn expect_nodes(mut self, n: usize) -> Self {
        self.declared_nodes = Some(n);
        self
    }
}

#[derive(Debug, Clone)]
pub struct ImportedConnectome {
    pub graph: Graph,
    pub warnings: Vec<String>,
}

pub fn import_connectome(src: &ConnectomeSource) -> Result<ImportedConnectome> {
    let list = read_edge_list(&src.path)?;
    let mut warnings = Vec::new();
    if !src.symmetrize {
        let mut seen = std::collections::HashSet::new();
        let reciprocal = list
            .pairs
            .iter()
            .filter(|&&(a, b)| {
                let dup = seen.contains(&(b, a));
                seen.insert((a, b));
                dup && a != b
            })
            .count();
        if reciprocal > 0 {
            warnings.push(format!(
                "{reciprocal} reciprocal entries merged into undirected edges"
            ));
        }
    }
    let graph = list.into_graph()?;
    if let Some(expected) = src.declared_nodes {
        if expected != graph.node_count() {
            let msg = format!(
                "{}: expected {expected} nodes, found {}",
                src.path.display(),
                graph.node_count()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(ImportedConnectome { graph, warnings })
}

/// Uniform sample of `n_sample` nodes without replacement, reduced to the
/// largest component of the induced subgraph.
pub fn sample_subgraph(graph: &Graph, n_sample: usize, seed: u64) -> Result<Graph> {
    let n = graph.node_count();
    if n_sample > n {
        return Err(Error::TooLarge {
            requested: n_sample,
            available: n,
        });
    }
    if n_sample == 0 {
        return Err(Error::TooSmall { n: 0 });
    }
    let mut rng = rng_from_seed(seed);
    let nodes = sample(&mut rng, n, n_sample).into_vec();
    Ok(graph.induced_subgraph(&nodes)?.largest_component())
}

/// ER graph on the same node count with `p = E / C(n, 2)`, reduced to its
/// largest component.
pub fn matched_er(graph: &Graph, seed: u64) -> Result<Graph> {
    let n = graph.node_count();
    if n < 2 {
        return Err(Error::TooSmall { n });
    }
    let p = matched_er_probability(graph);
    Ok(gen_er(n, p, seed)?.largest_component())
}

pub fn matched_er_probability(graph: &Graph) -> f64 {
    let n = graph.node_count() as f64;
    (graph.edge_count() as f64 / (n * (n - 1.0) / 2.0)).min(1.0)
}
