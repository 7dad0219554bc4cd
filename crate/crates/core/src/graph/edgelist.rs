//! Plain-text edge lists.
//!
//! One edge per line as two whitespace-separated 0-based ids. An optional
//! third column (a weight) is accepted and dropped. Lines starting with `#`
//! are comments, except for two structured forms this crate writes itself:
//!
//! ```text
//! # nodes <n>
//! # community <node> <label>
//! ```
//!
//! `# nodes` preserves isolated trailing nodes; `# community` lines carry
//! community labels.

use std::fmt::Write as _;
use std::path::Path;

use super::Graph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeList {
    pub declared_nodes: Option<usize>,
    pub pairs: Vec<(usize, usize)>,
    pub communities: Vec<(usize, usize)>,
}

impl EdgeList {
    /// Node count implied by the file: the `# nodes` header when present,
    /// otherwise one past the largest id mentioned.
    pub fn implied_node_count(&self) -> usize {
        let max_id = self
            .pairs
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .chain(self.communities.iter().map(|&(v, _)| v))
            .max()
            .map_or(0, |m| m + 1);
        self.declared_nodes.unwrap_or(0).max(max_id)
    }

    pub fn into_graph(self) -> Result<Graph> {
        let n = self.implied_node_count();
        let graph = Graph::from_edge_pairs(n, self.pairs)?;
        if self.communities.is_empty() {
            return Ok(graph);
        }
        let mut labels = vec![None; n];
        for (node, label) in self.communities {
            labels[node] = Some(label);
        }
        let labels: Option<Vec<usize>> = labels.into_iter().collect();
        match labels {
            Some(labels) => graph.with_communities(labels),
            None => Err(Error::Format(
                "community block does not label every node".into(),
            )),
        }
    }
}

fn parse_id(token: &str, line_no: usize) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| Error::Format(format!("line {line_no}: invalid node id {token:?}")))
}

pub fn parse_edge_list(text: &str) -> Result<EdgeList> {
    let mut out = EdgeList::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let tokens: Vec<&str> = comment.split_whitespace().collect();
            match tokens.as_slice() {
                ["nodes", n] => out.declared_nodes = Some(parse_id(n, line_no)?),
                ["community", node, label] => out
                    .communities
                    .push((parse_id(node, line_no)?, parse_id(label, line_no)?)),
                _ => {}
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 2 || tokens.len() > 3 {
            return Err(Error::Format(format!(
                "line {line_no}: expected 2 or 3 columns, found {}",
                tokens.len()
            )));
        }
        out.pairs
            .push((parse_id(tokens[0], line_no)?, parse_id(tokens[1], line_no)?));
    }
    Ok(out)
}

pub fn read_edge_list(path: &Path) -> Result<EdgeList> {
    let text = std::fs::read_to_string(path)?;
    parse_edge_list(&text).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_edge_list(graph: &Graph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# nodes {}", graph.node_count());
    for (a, b) in graph.edges() {
        let _ = writeln!(s, "{a} {b}");
    }
    if let Some(labels) = graph.communities() {
        for (node, label) in labels.iter().enumerate() {
            let _ = writeln!(s, "# community {node} {label}");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_weights_and_reciprocal_duplicates() {
        let text = "# a connectome\n3 5\n5 3 0.7\n\n0 1\n";
        let list = parse_edge_list(text).unwrap();
        let g = list.into_graph().unwrap();
        assert_eq!(g.node_count(), 6);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (3, 5)]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_edge_list("0 1\n2 x\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_edge_list("0 1\n\n4\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn round_trip_keeps_isolated_nodes_and_labels() {
        let g = Graph::from_edge_pairs(5, [(0, 1), (1, 2)])
            .unwrap()
            .with_communities(vec![0, 0, 1, 1, 1])
            .unwrap();
        let back = parse_edge_list(&write_edge_list(&g))
            .unwrap()
            .into_graph()
            .unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn partial_community_block_is_rejected() {
        let err = parse_edge_list("0 1\n# community 0 0\n")
            .unwrap()
            .into_graph()
            .unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }
}
