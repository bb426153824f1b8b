//! Line-oriented text format for computation DAGs.
//!
//! One record per line:
//!
//! ```text
//! node <id> <kind>
//! edge <src> <dst> <weight>
//! root <id>
//! ```
//!
//! `#` starts a comment and blank lines are ignored. Node ids must be
//! dense and declared in order; edge order is preserved because it
//! encodes left/right children.

use std::fmt::Write as _;

use thiserror::Error;

use crate::{ComputationDag, Edge, NodeId, NodeKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: unknown record '{what}'")]
    UnknownRecord { line: usize, what: String },
    #[error("line {line}: malformed '{record}' record: {reason}")]
    Malformed {
        line: usize,
        record: &'static str,
        reason: String,
    },
    #[error("line {line}: unknown node kind '{what}'")]
    UnknownKind { line: usize, what: String },
    #[error("line {line}: node id {got} out of order, expected {expected}")]
    NonDenseId {
        line: usize,
        got: u32,
        expected: u32,
    },
    #[error("missing root record")]
    MissingRoot,
}

/// Render a DAG in the text format.
pub fn serialize(dag: &ComputationDag) -> String {
    let mut out = String::new();
    for (id, kind) in dag.nodes() {
        writeln!(out, "node {} {}", id, kind.name()).unwrap();
    }
    for e in dag.edges() {
        writeln!(out, "edge {} {} {}", e.src, e.dst, e.weight).unwrap();
    }
    writeln!(out, "root {}", dag.root()).unwrap();
    out
}

/// Parse the text format back into a DAG. Structural invariants are not
/// checked here; run [`crate::validate`] on the result.
pub fn parse(text: &str) -> Result<ComputationDag, ParseError> {
    let mut nodes: Vec<NodeKind> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut root: Option<NodeId> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let record = parts.next().unwrap();
        let rest: Vec<&str> = parts.collect();
        match record {
            "node" => {
                let [id, kind] = rest.as_slice() else {
                    return Err(ParseError::Malformed {
                        line,
                        record: "node",
                        reason: "expected 'node <id> <kind>'".into(),
                    });
                };
                let id: u32 = id.parse().map_err(|_| ParseError::Malformed {
                    line,
                    record: "node",
                    reason: format!("bad id '{id}'"),
                })?;
                if id as usize != nodes.len() {
                    return Err(ParseError::NonDenseId {
                        line,
                        got: id,
                        expected: nodes.len() as u32,
                    });
                }
                let kind = NodeKind::from_name(kind).ok_or_else(|| ParseError::UnknownKind {
                    line,
                    what: (*kind).to_string(),
                })?;
                nodes.push(kind);
            }
            "edge" => {
                let [src, dst, weight] = rest.as_slice() else {
                    return Err(ParseError::Malformed {
                        line,
                        record: "edge",
                        reason: "expected 'edge <src> <dst> <weight>'".into(),
                    });
                };
                let parse_u32 = |s: &str| -> Result<u32, ParseError> {
                    s.parse().map_err(|_| ParseError::Malformed {
                        line,
                        record: "edge",
                        reason: format!("bad integer '{s}'"),
                    })
                };
                let weight: u64 = weight.parse().map_err(|_| ParseError::Malformed {
                    line,
                    record: "edge",
                    reason: format!("bad weight '{weight}'"),
                })?;
                edges.push(Edge {
                    src: NodeId(parse_u32(src)?),
                    dst: NodeId(parse_u32(dst)?),
                    weight,
                });
            }
            "root" => {
                let [id] = rest.as_slice() else {
                    return Err(ParseError::Malformed {
                        line,
                        record: "root",
                        reason: "expected 'root <id>'".into(),
                    });
                };
                let id: u32 = id.parse().map_err(|_| ParseError::Malformed {
                    line,
                    record: "root",
                    reason: format!("bad id '{id}'"),
                })?;
                root = Some(NodeId(id));
            }
            other => {
                return Err(ParseError::UnknownRecord {
                    line,
                    what: other.to_string(),
                })
            }
        }
    }

    let root = root.ok_or(ParseError::MissingRoot)?;
    Ok(ComputationDag::new(nodes, edges, root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DagBuilder;

    #[test]
    fn single_node_round_trip() {
        let mut b = DagBuilder::new();
        b.node(NodeKind::Regular);
        let dag = b.build();
        let text = serialize(&dag);
        assert_eq!(parse(&text).unwrap(), dag);
    }

    #[test]
    fn round_trip_preserves_edge_order() {
        let mut b = DagBuilder::new();
        let r = b.node(NodeKind::Spawn);
        let left = b.node(NodeKind::Regular);
        let right = b.node(NodeKind::Regular);
        b.edge(r, left);
        b.edge(r, right);
        let dag = b.build();
        let parsed = parse(&serialize(&dag)).unwrap();
        assert_eq!(parsed, dag);
        let children: Vec<_> = parsed.children(r).collect();
        assert_eq!(children, vec![left, right]);
    }

    #[test]
    fn malformed_edge_reports_line() {
        let text = "node 0 Regular\nedge a\nroot 0\n";
        match parse(text) {
            Err(ParseError::Malformed { line: 2, record: "edge", .. }) => {}
            other => panic!("unexpected result: {other:?}"),
        }
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let text = "# a comment\n\nnode 0 Regular  # trailing\n\nroot 0\n";
        let dag = parse(text).unwrap();
        assert_eq!(dag.node_count(), 1);
    }

    #[test]
    fn unknown_kind_reports_line() {
        let text = "node 0 Widget\nroot 0\n";
        match parse(text) {
            Err(ParseError::UnknownKind { line: 1, what }) => assert_eq!(what, "Widget"),
            other => panic!("unexpected result: {other:?}"),
        }
    }

    #[test]
    fn missing_root_rejected() {
        assert_eq!(parse("node 0 Regular\n"), Err(ParseError::MissingRoot));
    }
}
