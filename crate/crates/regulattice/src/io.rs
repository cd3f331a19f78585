//! Matrix ingestion: dense CSV, coordinate triplets, and edge lists.
//!
//! File indices are 1-based (the usual coordinate-format convention) and
//! convert to 0-based exactly once, here. Parse failures carry the
//! offending line number. Blank lines are ignored in all formats.

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

/// Supported input encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    /// One matrix row per line, comma-separated reals.
    DenseCsv,
    /// Header `m n nnz`, then `i j value` lines; missing entries are zero.
    CoordinateTriplet,
    /// Lines `u v [w]` (weight defaults to 1) building a symmetric
    /// adjacency matrix; self-loops are rejected.
    EdgeList,
}

impl MatrixFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            MatrixFormat::DenseCsv => "csv-dense",
            MatrixFormat::CoordinateTriplet => "coordinate-triplet",
            MatrixFormat::EdgeList => "edge-list",
        }
    }

    /// Whether this format describes a graph rather than a bare matrix.
    pub fn is_graph(&self) -> bool {
        matches!(self, MatrixFormat::EdgeList)
    }
}

impl fmt::Display for MatrixFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv-dense" => Ok(MatrixFormat::DenseCsv),
            "coordinate-triplet" => Ok(MatrixFormat::CoordinateTriplet),
            "edge-list" => Ok(MatrixFormat::EdgeList),
            other => Err(Error::Domain(format!(
                "unknown format '{other}'; expected csv-dense, coordinate-triplet, or edge-list"
            ))),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_real(token: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what} '{token}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what} '{token}' is not finite")));
    }
    Ok(v)
}

fn parse_index(token: &str, line: usize, what: &str) -> Result<usize> {
    let v: usize = token
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what} '{token}'")))?;
    if v == 0 {
        return Err(parse_err(line, format!("{what} must be 1-based, got 0")));
    }
    Ok(v)
}

/// Numbered, non-blank, trimmed lines of a reader.
fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = std::io::Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, r)| r.map(|s| (i + 1, s.trim().to_string())))
        .filter(|r| !matches!(r, Ok((_, s)) if s.is_empty()))
}

/// Parses comma-separated rows of reals.
pub fn parse_dense_csv<R: BufRead>(reader: R) -> Result<RealMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for item in lines(reader) {
        let (line, text) = item?;
        let mut row = Vec::new();
        for token in text.split(',') {
            row.push(parse_real(token.trim(), line, "entry")?);
        }
        if rows.is_empty() {
            width = row.len();
        } else if row.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} entries, got {}", row.len()),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no rows"));
    }
    RealMatrix::from_rows(rows)
}

/// Parses a `m n nnz` header followed by 1-based `i j value` triplets.
pub fn parse_coordinate<R: BufRead>(reader: R) -> Result<RealMatrix> {
    let mut it = lines(reader);
    let (line, header) = it
        .next()
        .transpose()?
        .ok_or_else(|| parse_err(1, "missing 'm n nnz' header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(parse_err(line, "header must be 'm n nnz'"));
    }
    let m = parse_index(fields[0], line, "row count")?;
    let n = parse_index(fields[1], line, "column count")?;
    let nnz: usize = fields[2]
        .parse()
        .map_err(|_| parse_err(line, format!("bad entry count '{}'", fields[2])))?;

    let mut data = vec![0.0f64; m * n];
    let mut seen = vec![false; m * n];
    let mut count = 0usize;
    let mut last_line = line;
    for item in it {
        let (line, text) = item?;
        last_line = line;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(line, "expected 'i j value'"));
        }
        let i = parse_index(fields[0], line, "row index")?;
        let j = parse_index(fields[1], line, "column index")?;
        if i > m || j > n {
            return Err(parse_err(line, format!("entry ({i}, {j}) outside {m}x{n}")));
        }
        let v = parse_real(fields[2], line, "value")?;
        let at = (i - 1) * n + (j - 1);
        if seen[at] {
            return Err(parse_err(line, format!("duplicate entry at ({i}, {j})")));
        }
        seen[at] = true;
        data[at] = v;
        count += 1;
    }
    if count != nnz {
        return Err(parse_err(
            last_line,
            format!("header promised {nnz} entries, file has {count}"),
        ));
    }
    RealMatrix::new(m, n, data)
}

/// Parses 1-based `u v [w]` edges into a symmetric adjacency matrix.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<RealMatrix> {
    let mut edges: Vec<(usize, usize, f64, usize)> = Vec::new();
    let mut n = 0usize;
    for item in lines(reader) {
        let (line, text) = item?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        let w = match fields.len() {
            2 => 1.0,
            3 => parse_real(fields[2], line, "weight")?,
            _ => return Err(parse_err(line, "expected 'u v' or 'u v w'")),
        };
        let u = parse_index(fields[0], line, "vertex")?;
        let v = parse_index(fields[1], line, "vertex")?;
        if u == v {
            return Err(parse_err(line, format!("self-loop at vertex {u}")));
        }
        n = n.max(u).max(v);
        edges.push((u - 1, v - 1, w, line));
    }
    if n == 0 {
        return Err(parse_err(1, "no edges"));
    }
    let mut data = vec![0.0f64; n * n];
    let mut seen = vec![false; n * n];
    for (u, v, w, line) in edges {
        if seen[u * n + v] {
            return Err(parse_err(
                line,
                format!("duplicate edge ({}, {})", u + 1, v + 1),
            ));
        }
        seen[u * n + v] = true;
        seen[v * n + u] = true;
        data[u * n + v] = w;
        data[v * n + u] = w;
    }
    RealMatrix::new(n, n, data)
}

/// Loads a matrix from a file; the flag reports whether the format
/// carries graph semantics.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<(RealMatrix, bool)> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let matrix = match format {
        MatrixFormat::DenseCsv => parse_dense_csv(reader)?,
        MatrixFormat::CoordinateTriplet => parse_coordinate(reader)?,
        MatrixFormat::EdgeList => parse_edge_list(reader)?,
    };
    Ok((matrix, format.is_graph()))
}
