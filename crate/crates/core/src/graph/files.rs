//! Text formats for graph data.
//!
//! - edge list: one `u<TAB>v` pair per line, 0-based ids;
//! - features: one whitespace-separated row of reals per node;
//! - labels: `node_id<TAB>label_id` lines; absent nodes are unlabeled.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parse an edge list. `file` is used for diagnostics only.
pub fn read_edge_list(reader: impl BufRead, file: &str) -> Result<Vec<(u32, u32)>> {
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (u, v) = match (it.next(), it.next(), it.next()) {
            (Some(u), Some(v), None) => (u, v),
            _ => return Err(parse_err(file, i + 1, "expected `u<TAB>v`")),
        };
        let u: u32 = u
            .parse()
            .map_err(|_| parse_err(file, i + 1, format!("bad node id {u:?}")))?;
        let v: u32 = v
            .parse()
            .map_err(|_| parse_err(file, i + 1, format!("bad node id {v:?}")))?;
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn write_edge_list(mut writer: impl Write, edges: &[(u32, u32)]) -> Result<()> {
    for (u, v) in edges {
        writeln!(writer, "{u}\t{v}")?;
    }
    Ok(())
}

/// Parse a feature matrix; every row must have the same width.
pub fn read_features(reader: impl BufRead, file: &str) -> Result<Tensor> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse).collect();
        let row = row.map_err(|e| parse_err(file, i + 1, format!("bad real: {e}")))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    file,
                    i + 1,
                    format!("row width {} != {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    Tensor::from_rows(&rows)
}

/// Parse a label file into per-node labels for `node_count` nodes.
pub fn read_labels(reader: impl BufRead, file: &str, node_count: usize) -> Result<Vec<Option<u32>>> {
    let mut labels = vec![None; node_count];
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (node, label) = match (it.next(), it.next(), it.next()) {
            (Some(n), Some(l), None) => (n, l),
            _ => return Err(parse_err(file, i + 1, "expected `node_id<TAB>label_id`")),
        };
        let node: usize = node
            .parse()
            .map_err(|_| parse_err(file, i + 1, format!("bad node id {node:?}")))?;
        let label: u32 = label
            .parse()
            .map_err(|_| parse_err(file, i + 1, format!("bad label id {label:?}")))?;
        if node >= node_count {
            return Err(parse_err(
                file,
                i + 1,
                format!("node {node} out of range ({node_count} nodes)"),
            ));
        }
        labels[node] = Some(label);
    }
    Ok(labels)
}

pub fn write_labels(mut writer: impl Write, labels: &[Option<u32>]) -> Result<()> {
    for (node, label) in labels.iter().enumerate() {
        if let Some(l) = label {
            writeln!(writer, "{node}\t{l}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_roundtrip() {
        let edges = vec![(0, 1), (1, 2), (5, 3)];
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &edges).unwrap();
        let back = read_edge_list(buf.as_slice(), "test.edges").unwrap();
        assert_eq!(edges, back);
    }

    #[test]
    fn malformed_edge_line_reports_location() {
        let err = read_edge_list("0\t1\nbogus\n".as_bytes(), "x.edges").unwrap_err();
        match err {
            Error::Parse { file, line, .. } => {
                assert_eq!(file, "x.edges");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn features_require_consistent_width() {
        let t = read_features("1 2 3\n4 5 6\n".as_bytes(), "f").unwrap();
        assert_eq!(t.shape(), (2, 3));
        assert!(read_features("1 2\n3\n".as_bytes(), "f").is_err());
    }

    #[test]
    fn labels_allow_gaps() {
        let l = read_labels("0\t4\n2\t7\n".as_bytes(), "l", 4).unwrap();
        assert_eq!(l, vec![Some(4), None, Some(7), None]);
        assert!(read_labels("9\t1\n".as_bytes(), "l", 4).is_err());
    }
}
