//! Plain-text graph, label and basis files.
//!
//! Edge lists hold one `u v [weight]` per line with 0-indexed nodes; label
//! files hold `node label`; basis files hold one element per line as
//! space-separated node ids. Blank lines and `#` comments are skipped.

use std::io::Write;
use std::path::Path;

use super::{Basis, BasisElement, Provenance};
use crate::{Error, Result};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_node(token: &str, line: usize) -> Result<usize> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid node id {token:?}"),
    })
}

/// Weighted edges; missing weights default to 1.
pub fn parse_edge_list(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    let mut edges = Vec::new();
    for (line, content) in content_lines(text) {
        let fields: Vec<&str> = content.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::Parse {
                line,
                message: format!("expected `u v [weight]`, found {} fields", fields.len()),
            });
        }
        let u = parse_node(fields[0], line)?;
        let v = parse_node(fields[1], line)?;
        let w = match fields.get(2) {
            Some(tok) => tok.parse::<f64>().ok().filter(|w| *w > 0.0 && w.is_finite()).ok_or(
                Error::Parse {
                    line,
                    message: format!("invalid edge weight {tok:?}"),
                },
            )?,
            None => 1.0,
        };
        edges.push((u, v, w));
    }
    Ok(edges)
}

pub fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

/// `(node, label)` pairs in file order.
pub fn parse_labels(text: &str) -> Result<Vec<(usize, String)>> {
    content_lines(text)
        .map(|(line, content)| {
            let mut fields = content.split_whitespace();
            let node = parse_node(fields.next().unwrap_or(""), line)?;
            let label = fields.next().ok_or(Error::Parse {
                line,
                message: "missing label".into(),
            })?;
            if fields.next().is_some() {
                return Err(Error::Parse {
                    line,
                    message: "expected `node label`".into(),
                });
            }
            Ok((node, label.to_string()))
        })
        .collect()
}

pub fn write_basis<W: Write>(basis: &Basis, mut out: W) -> Result<()> {
    for element in basis.iter() {
        let ids: Vec<String> = element.members.iter().map(usize::to_string).collect();
        writeln!(out, "{}", ids.join(" "))?;
    }
    Ok(())
}

pub fn parse_basis(text: &str, n_contexts: usize) -> Result<Basis> {
    let elements = content_lines(text)
        .map(|(line, content)| {
            let members = content
                .split_whitespace()
                .map(|tok| parse_node(tok, line))
                .collect::<Result<Vec<_>>>()?;
            Ok(BasisElement {
                members,
                provenance: Provenance::Loaded,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Basis::new(n_contexts, elements)
}
