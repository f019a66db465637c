// SPDX-License-Identifier: Apache-2.0

//! Text formats for graphs, partitions and attribute tables.
//!
//! Edge list: one `i j [w]` edge per line, separated by whitespace or commas,
//! `#` starts a comment line. Partition: one integer label per line. Attributes:
//! CSV, one row per node, with an optional header row.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::{AttributeMatrix, Graph, Partition};
use crate::error::{Error, Result};

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn temp_sibling(path: &Path) -> std::path::PathBuf {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    dir.join(format!(".{name}.{}.tmp", std::process::id()))
}

fn stage(tmp: &Path, contents: &str) -> std::io::Result<()> {
    let mut f = fs::File::create(tmp)?;
    f.write_all(contents.as_bytes())?;
    f.sync_all()
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    write_all_atomic(&[(path.as_ref(), contents)])
}

/// Stages every file before renaming any, so a failed write leaves no target touched.
pub fn write_all_atomic(files: &[(&Path, &str)]) -> Result<()> {
    let temps: Vec<_> = files.iter().map(|(p, _)| temp_sibling(p)).collect();
    let cleanup = |temps: &[std::path::PathBuf]| {
        for t in temps {
            let _ = fs::remove_file(t);
        }
    };
    for ((path, contents), tmp) in files.iter().zip(&temps) {
        if let Err(e) = stage(tmp, contents) {
            cleanup(&temps);
            return Err(Error::io(path, e));
        }
    }
    for ((path, _), tmp) in files.iter().zip(&temps) {
        if let Err(e) = fs::rename(tmp, path) {
            cleanup(&temps);
            return Err(Error::io(path, e));
        }
    }
    Ok(())
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut max_id = None;
    for (line_no, line) in content_lines(text) {
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::Parse {
                line: line_no,
                column: None,
                message: format!("expected `i j [weight]`, found {} fields", fields.len()),
            });
        }
        let node = |col: usize| -> Result<usize> {
            fields[col].parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                column: Some(col + 1),
                message: format!("`{}` is not a nonnegative integer node id", fields[col]),
            })
        };
        let (i, j) = (node(0)?, node(1)?);
        let w = match fields.get(2) {
            Some(s) => s.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                column: Some(3),
                message: format!("`{s}` is not a number"),
            })?,
            None => 1.0,
        };
        if !w.is_finite() || w < 0.0 {
            return Err(Error::validation(format!(
                "line {line_no}: edge weight {w} must be finite and nonnegative"
            )));
        }
        if i == j {
            return Err(Error::validation(format!(
                "line {line_no}: self-loop on node {i}"
            )));
        }
        max_id = max_id.max(Some(i.max(j)));
        edges.push((i, j, w));
    }
    // `# nodes: N` keeps trailing isolated nodes across a write/load cycle.
    let declared = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix("# nodes:"))
        .find_map(|v| v.trim().parse::<usize>().ok());
    let n = match (max_id.map(|m| m + 1), declared) {
        (Some(n), Some(d)) => n.max(d),
        (Some(n), None) => n,
        (None, _) => return Err(Error::validation("edge list has no edges")),
    };
    Graph::from_edges(n, edges)
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    parse_edge_list(&read_to_string(path.as_ref())?)
}

/// Full `f64` precision, so reloading reproduces the graph exactly.
pub fn format_edge_list(graph: &Graph) -> String {
    let mut out = format!("# nodes: {}\n", graph.n_nodes());
    for (i, j, w) in graph.edges() {
        let _ = writeln!(out, "{i} {j} {w}");
    }
    out
}

pub fn write_edge_list(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &format_edge_list(graph))
}

pub fn parse_partition(text: &str) -> Result<Partition> {
    let mut labels = Vec::new();
    for (line_no, line) in content_lines(text) {
        let label = line.parse::<usize>().map_err(|_| Error::Parse {
            line: line_no,
            column: Some(1),
            message: format!("`{line}` is not a nonnegative integer label"),
        })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::validation("partition file has no labels"));
    }
    Partition::from_labels(labels)
}

pub fn load_partition(path: impl AsRef<Path>) -> Result<Partition> {
    parse_partition(&read_to_string(path.as_ref())?)
}

pub fn format_partition(partition: &Partition) -> String {
    let mut out = String::with_capacity(partition.len() * 3);
    for &c in partition.labels() {
        let _ = writeln!(out, "{c}");
    }
    out
}

pub fn write_partition(partition: &Partition, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &format_partition(partition))
}

/// Parses attribute CSV text. The first row is treated as a header when none of
/// its cells is numeric.
pub fn parse_attributes(text: &str) -> Result<AttributeMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(idx + 1, |p| p.line() as usize),
            column: None,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if rows.is_empty() && width.is_none() && record.iter().all(|c| c.parse::<f64>().is_err())
        {
            // header row
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse {
                line,
                column: None,
                message: format!("row has {} cells, expected {expected}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, cell) in record.iter().enumerate() {
            let v = cell.parse::<f64>().map_err(|_| Error::Parse {
                line,
                column: Some(col + 1),
                message: format!("`{cell}` is not numeric"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: Some(col + 1),
                    message: format!("`{cell}` is not finite"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::validation("attribute file has no data rows"));
    }
    AttributeMatrix::from_rows(&rows)
}

pub fn load_attributes(path: impl AsRef<Path>) -> Result<AttributeMatrix> {
    parse_attributes(&read_to_string(path.as_ref())?)
}

/// Headerless CSV.
pub fn format_attributes(x: &AttributeMatrix) -> String {
    let mut out = String::new();
    for row in x.rows() {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_attributes(x: &AttributeMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &format_attributes(x))
}
