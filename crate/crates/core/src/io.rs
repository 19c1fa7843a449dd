//! Plain-text file formats shared by the command-line tools.
//!
//! Matrix files: line 1 is `n m`, followed by `n` rows of `m` floats in
//! shortest round-trip notation. Labeled instances append a trailer:
//! a line `d k`, a line of `k` 1-based inlier indices, and `d` rows of
//! `n` floats for the planted basis columns. Graph files: line 1 is
//! `V degree E`, then one 1-based `i j` edge per line. Reduction sidecar
//! files map each point to its edge: `point_index i j alpha beta`
//! (1-based indices).

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::error::Error;
use crate::instance::{LabeledInstance, PointSet};
use crate::sse::{ReductionInstance, RegularGraph};
use crate::Result;

fn parse_err(line_no: usize, what: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line_no}: {what}"))
}

/// Non-empty lines with their 1-based positions.
fn lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect()
}

fn parse_counts<const K: usize>(line_no: usize, line: &str) -> Result<[usize; K]> {
    let fields: Vec<usize> = line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(line_no, format!("expected integer, got '{t}'"))))
        .collect::<Result<_>>()?;
    fields
        .try_into()
        .map_err(|_| parse_err(line_no, format!("expected {K} integers")))
}

fn parse_row(line_no: usize, line: &str, expected: usize) -> Result<Vec<f64>> {
    let row: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(line_no, format!("expected float, got '{t}'"))))
        .collect::<Result<_>>()?;
    if row.len() != expected {
        return Err(parse_err(line_no, format!("expected {expected} floats, got {}", row.len())));
    }
    Ok(row)
}

fn write_rows(out: &mut String, rows: usize, cols: usize, entry: impl Fn(usize, usize) -> f64) {
    for r in 0..rows {
        for c in 0..cols {
            if c > 0 {
                out.push(' ');
            }
            // `Display` for f64 is the shortest representation that
            // parses back bit-exact.
            let _ = write!(out, "{}", entry(r, c));
        }
        out.push('\n');
    }
}

/// Serialize a matrix in the shared text format.
pub fn write_matrix(matrix: &DMatrix<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", matrix.nrows(), matrix.ncols());
    write_rows(&mut out, matrix.nrows(), matrix.ncols(), |r, c| matrix[(r, c)]);
    out
}

/// Serialize a labeled instance: matrix plus `d k` trailer.
pub fn write_labeled_instance(instance: &LabeledInstance) -> String {
    let mut out = write_matrix(instance.points.matrix());
    let _ = writeln!(out, "{} {}", instance.d, instance.inliers.len());
    let indices: Vec<String> = instance.inliers.iter().map(|i| (i + 1).to_string()).collect();
    let _ = writeln!(out, "{}", indices.join(" "));
    // Basis columns become trailer rows.
    let basis = &instance.subspace_basis;
    write_rows(&mut out, basis.ncols(), basis.nrows(), |r, c| basis[(c, r)]);
    out
}

/// A parsed instance file, with or without the planted trailer.
#[derive(Debug, Clone)]
pub enum InstanceFile {
    Unlabeled(PointSet),
    Labeled(LabeledInstance),
}

impl InstanceFile {
    pub fn points(&self) -> &PointSet {
        match self {
            InstanceFile::Unlabeled(p) => p,
            InstanceFile::Labeled(inst) => &inst.points,
        }
    }
}

/// Parse an instance file, accepting a matrix alone or a matrix with the
/// labeled trailer.
pub fn parse_instance(text: &str, tol: &Tolerances) -> Result<InstanceFile> {
    let lines = lines(text);
    if lines.is_empty() {
        return Err(Error::Parse("empty input".into()));
    }
    let [n, m] = parse_counts(lines[0].0, lines[0].1)?;
    if lines.len() < 1 + n {
        return Err(Error::Parse(format!("expected {n} matrix rows, found {}", lines.len() - 1)));
    }
    let mut data = Vec::with_capacity(n * m);
    for &(line_no, line) in &lines[1..1 + n] {
        data.extend(parse_row(line_no, line, m)?);
    }
    let points = PointSet::new(DMatrix::from_row_slice(n, m, &data), tol)?;

    let rest = &lines[1 + n..];
    if rest.is_empty() {
        return Ok(InstanceFile::Unlabeled(points));
    }

    let [d, k] = parse_counts(rest[0].0, rest[0].1)?;
    if !(1 <= d && d < n) {
        return Err(parse_err(rest[0].0, format!("planted dimension {d} out of range 1..{n}")));
    }
    if rest.len() != 2 + d {
        return Err(Error::Parse(format!(
            "trailer needs 1 index line and {d} basis rows, found {} lines",
            rest.len() - 1
        )));
    }
    let (idx_no, idx_line) = rest[1];
    let mut inliers = Vec::with_capacity(k);
    for token in idx_line.split_whitespace() {
        let one_based: usize = token
            .parse()
            .map_err(|_| parse_err(idx_no, format!("expected index, got '{token}'")))?;
        if one_based == 0 || one_based > m {
            return Err(parse_err(idx_no, format!("index {one_based} out of range 1..={m}")));
        }
        inliers.push(one_based - 1);
    }
    if inliers.len() != k {
        return Err(parse_err(idx_no, format!("expected {k} indices, got {}", inliers.len())));
    }
    inliers.sort_unstable();
    if inliers.windows(2).any(|w| w[0] == w[1]) {
        return Err(parse_err(idx_no, "duplicate inlier index"));
    }

    let mut basis = DMatrix::zeros(n, d);
    for (col, &(line_no, line)) in rest[2..].iter().enumerate() {
        let row = parse_row(line_no, line, n)?;
        for (r, v) in row.into_iter().enumerate() {
            basis[(r, col)] = v;
        }
    }
    Ok(InstanceFile::Labeled(LabeledInstance {
        points,
        d,
        subspace_basis: basis,
        inliers,
        noise_scale: 0.0,
    }))
}

/// Parse a whitespace-separated vector file (any line layout).
pub fn parse_vector(text: &str) -> Result<DVector<f64>> {
    let mut values = Vec::new();
    for (line_no, line) in lines(text) {
        values.extend(parse_row(line_no, line, line.split_whitespace().count())?);
    }
    if values.is_empty() {
        return Err(Error::Parse("vector file has no entries".into()));
    }
    Ok(DVector::from_vec(values))
}

pub fn write_vector(v: &DVector<f64>) -> String {
    let mut out = String::new();
    write_rows(&mut out, 1, v.len(), |_, c| v[c]);
    out
}

/// Serialize a graph: `V degree E` header and 1-based edges.
pub fn write_graph(graph: &RegularGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", graph.vertex_count(), graph.degree(), graph.edge_count());
    for &(a, b) in graph.edges() {
        let _ = writeln!(out, "{} {}", a + 1, b + 1);
    }
    out
}

pub fn parse_graph(text: &str) -> Result<RegularGraph> {
    let lines = lines(text);
    if lines.is_empty() {
        return Err(Error::Parse("empty graph file".into()));
    }
    let [v, degree, e] = parse_counts(lines[0].0, lines[0].1)?;
    if lines.len() != 1 + e {
        return Err(Error::Parse(format!("expected {e} edge lines, found {}", lines.len() - 1)));
    }
    let mut edges = Vec::with_capacity(e);
    for &(line_no, line) in &lines[1..] {
        let [a, b] = parse_counts(line_no, line)?;
        if a == 0 || b == 0 || a > v || b > v {
            return Err(parse_err(line_no, format!("edge ({a}, {b}) out of range 1..={v}")));
        }
        edges.push((a - 1, b - 1));
    }
    RegularGraph::new(v, degree, edges)
}

/// Serialize the point-to-edge sidecar of a reduction instance:
/// `point_index i j alpha beta` per line, indices 1-based.
pub fn write_sidecar(instance: &ReductionInstance) -> String {
    let mut out = String::new();
    for (col, (&(a, b), &(alpha, beta))) in instance
        .edge_of_point
        .iter()
        .zip(&instance.coefficients)
        .enumerate()
    {
        let _ = writeln!(out, "{} {} {} {alpha} {beta}", col + 1, a + 1, b + 1);
    }
    out
}

/// One sidecar line: point column, edge endpoints, coefficients
/// (all 0-based after parsing).
#[derive(Debug, Clone, PartialEq)]
pub struct SidecarEntry {
    pub point: usize,
    pub edge: (usize, usize),
    pub alpha: f64,
    pub beta: f64,
}

pub fn parse_sidecar(text: &str) -> Result<Vec<SidecarEntry>> {
    let mut entries = Vec::new();
    for (line_no, line) in lines(text) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(parse_err(line_no, "expected 'point i j alpha beta'"));
        }
        let index = |t: &str| -> Result<usize> {
            let v: usize = t
                .parse()
                .map_err(|_| parse_err(line_no, format!("expected index, got '{t}'")))?;
            if v == 0 {
                return Err(parse_err(line_no, "indices are 1-based"));
            }
            Ok(v - 1)
        };
        let float = |t: &str| -> Result<f64> {
            t.parse()
                .map_err(|_| parse_err(line_no, format!("expected float, got '{t}'")))
        };
        entries.push(SidecarEntry {
            point: index(tokens[0])?,
            edge: (index(tokens[1])?, index(tokens[2])?),
            alpha: float(tokens[3])?,
            beta: float(tokens[4])?,
        });
    }
    if entries.is_empty() {
        return Err(Error::Parse("sidecar file has no entries".into()));
    }
    Ok(entries)
}
