use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Assignment of graph nodes to contiguous unit slices of the hidden width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    width: usize,
    /// `(offset, length)` per node, in ascending node order.
    slices: Vec<(usize, usize)>,
}

impl BlockPartition {
    /// The first `width % n` nodes get `ceil(width / n)` units, the rest
    /// `floor(width / n)`.
    pub fn new(n_nodes: usize, width: usize) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Shape("partition needs at least one node".into()));
        }
        if n_nodes > width {
            return Err(Error::TooManyNodes {
                nodes: n_nodes,
                width,
            });
        }
        let base = width / n_nodes;
        let extra = width % n_nodes;
        let mut offset = 0;
        let slices = (0..n_nodes)
            .map(|i| {
                let len = base + usize::from(i < extra);
                let slice = (offset, len);
                offset += len;
                slice
            })
            .collect();
        Ok(BlockPartition { width, slices })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn node_count(&self) -> usize {
        self.slices.len()
    }

    pub fn slices(&self) -> &[(usize, usize)] {
        &self.slices
    }

    pub fn units(&self, node: usize) -> std::ops::Range<usize> {
        let (offset, len) = self.slices[node];
        offset..offset + len
    }

    /// Owning node for every unit.
    pub fn unit_owners(&self) -> Vec<usize> {
        let mut owners = Vec::with_capacity(self.width);
        for (node, &(_, len)) in self.slices.iter().enumerate() {
            owners.extend(std::iter::repeat_n(node, len));
        }
        owners
    }
}

/// Unit-level connectivity of one message-exchange round. Block `(i, j)` is
/// open iff `i == j` or `(i, j)` is an edge of the relational graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerMask {
    partition: BlockPartition,
    blocks: Array2<bool>,
    units: Array2<bool>,
}

impl LayerMask {
    pub fn build(graph: &Graph, partition: &BlockPartition) -> Result<Self> {
        if graph.node_count() != partition.node_count() {
            return Err(Error::Shape(format!(
                "graph has {} nodes, partition has {}",
                graph.node_count(),
                partition.node_count()
            )));
        }
        let n = graph.node_count();
        let mut blocks = Array2::from_elem((n, n), false);
        for i in 0..n {
            blocks[[i, i]] = true;
        }
        for (a, b) in graph.edges() {
            blocks[[a, b]] = true;
            blocks[[b, a]] = true;
        }
        Ok(Self::from_blocks(partition.clone(), blocks))
    }

    pub(crate) fn from_blocks(partition: BlockPartition, blocks: Array2<bool>) -> Self {
        let owners = partition.unit_owners();
        let width = partition.width();
        let units = Array2::from_shape_fn((width, width), |(u, v)| blocks[[owners[u], owners[v]]]);
        LayerMask {
            partition,
            blocks,
            units,
        }
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn width(&self) -> usize {
        self.partition.width()
    }

    pub fn block_open(&self, i: usize, j: usize) -> bool {
        self.blocks[[i, j]]
    }

    pub fn blocks(&self) -> &Array2<bool> {
        &self.blocks
    }

    /// `width × width`, indexed `[receiving unit, sending unit]`.
    pub fn units(&self) -> &Array2<bool> {
        &self.units
    }

    /// Number of closed (always-zero) unit entries.
    pub fn closed_count(&self) -> usize {
        self.units.iter().filter(|&&open| !open).count()
    }

    /// Open off-diagonal blocks as `(low, high)` node pairs: the graph's edges.
    pub fn open_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.blocks.nrows();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.blocks[[i, j]] {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Open entries per row (effective fan-in of each receiving unit).
    pub fn row_counts(&self) -> Vec<usize> {
        self.units
            .rows()
            .into_iter()
            .map(|r| r.iter().filter(|&&o| o).count())
            .collect()
    }

    /// Open entries per column (effective fan-out of each sending unit).
    pub fn column_counts(&self) -> Vec<usize> {
        self.units
            .columns()
            .into_iter()
            .map(|c| c.iter().filter(|&&o| o).count())
            .collect()
    }
}
