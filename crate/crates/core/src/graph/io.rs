//! The `hkgraph v1` line format.
//!
//! ```text
//! hkgraph v1 <vertex_count> <edge_count>
//! <u> <v> <weight>          (edge_count lines, canonical order u < v)
//! label <u> <name>          (zero or more)
//! ```
//!
//! Weights are written with the shortest decimal that parses back to the same
//! `f64`, so load/store round-trips are exact.

use std::fmt::Write as _;

use super::WeightedGraph;
use crate::error::{LabError, Result};

pub const HKGRAPH_MAGIC: &str = "hkgraph v1";

pub(super) fn write_hkgraph(g: &WeightedGraph) -> String {
    let mut out = String::with_capacity(16 * (g.edge_count() + 1));
    let _ = writeln!(out, "{HKGRAPH_MAGIC} {} {}", g.vertex_count(), g.edge_count());
    for &(u, v, w) in g.edges() {
        let _ = writeln!(out, "{u} {v} {w}");
    }
    for (v, name) in g.labels() {
        let _ = writeln!(out, "label {v} {name}");
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> LabError {
    LabError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(token: Option<&str>, line: usize, what: &str) -> Result<T> {
    token
        .ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("malformed {what}")))
}

/// Parses the `hkgraph v1` format.
pub fn parse_hkgraph(text: &str) -> Result<WeightedGraph> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let rest = header
        .strip_prefix(HKGRAPH_MAGIC)
        .ok_or_else(|| parse_err(1, format!("expected header `{HKGRAPH_MAGIC} <n> <m>`")))?;
    let mut tokens = rest.split_whitespace();
    let vertex_count: usize = parse_num(tokens.next(), 1, "vertex count")?;
    let edge_count: usize = parse_num(tokens.next(), 1, "edge count")?;
    if tokens.next().is_some() {
        return Err(parse_err(1, "trailing tokens in header"));
    }

    let mut edges = Vec::with_capacity(edge_count);
    let mut labels = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let first = tokens.next().unwrap_or_default();
        if first == "label" {
            let v: usize = parse_num(tokens.next(), no, "label vertex")?;
            let name = tokens.next().ok_or_else(|| parse_err(no, "missing label name"))?;
            if tokens.next().is_some() {
                return Err(parse_err(no, "label names may not contain whitespace"));
            }
            labels.push((v, name.to_string()));
        } else {
            if !labels.is_empty() {
                return Err(parse_err(no, "edge line after label lines"));
            }
            let u: usize = parse_num(Some(first), no, "edge endpoint")?;
            let v: usize = parse_num(tokens.next(), no, "edge endpoint")?;
            let w: f64 = parse_num(tokens.next(), no, "edge weight")?;
            if tokens.next().is_some() {
                return Err(parse_err(no, "trailing tokens on edge line"));
            }
            edges.push((u, v, w));
        }
    }
    if edges.len() != edge_count {
        return Err(parse_err(
            1,
            format!("header declares {edge_count} edges, found {}", edges.len()),
        ));
    }
    WeightedGraph::from_edges(vertex_count, edges)?.with_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn writes_expected_text() {
        let g = WeightedGraph::from_edges(3, [(1, 0, 1.0), (1, 2, 0.25)])
            .unwrap()
            .with_labels([(2, "z0")])
            .unwrap();
        assert_eq!(g.to_hkgraph(), "hkgraph v1 3 2\n0 1 1\n1 2 0.25\nlabel 2 z0\n");
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_hkgraph("").is_err());
        assert!(parse_hkgraph("hkgraph v2 2 1\n0 1 1\n").is_err());
        assert!(parse_hkgraph("hkgraph v1 2 2\n0 1 1\n").is_err());
        assert!(parse_hkgraph("hkgraph v1 2 1\n0 1 x\n").is_err());
        assert!(parse_hkgraph("hkgraph v1 2 1\n0 1 1\nlabel 5 a\n").is_err());
        assert!(parse_hkgraph("hkgraph v1 2 1\n0 1 -3\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(weights in proptest::collection::vec(1e-6f64..1e6, 1..40)) {
            let n = weights.len() + 1;
            let g = WeightedGraph::from_edges(n, weights.iter().enumerate().map(|(i, &w)| (i, i + 1, w)))
                .unwrap()
                .with_labels([(0, "z0"), (n - 1, "frontier")])
                .unwrap();
            let text = g.to_hkgraph();
            let back = parse_hkgraph(&text).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(back.to_hkgraph(), text);
        }
    }
}
