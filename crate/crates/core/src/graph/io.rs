//! Plain-text graph formats.
//!
//! * edge file: whitespace-separated `src dst [weight]` lines, `#` comments;
//! * feature file: CSV, row `i` holds the features of node `i`;
//! * label file: CSV `node_id,class_id` lines, optional header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{PastelError, Result};
use crate::graph::Graph;
use crate::numerics::Matrix;

/// Paths of the three graph files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphFiles {
    pub edges: PathBuf,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl GraphFiles {
    /// `graph.edges`, `features.csv` and `labels.csv` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            edges: dir.join("graph.edges"),
            features: Some(dir.join("features.csv")),
            labels: Some(dir.join("labels.csv")),
        }
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> PastelError {
    PastelError::Parse {
        file: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn parse_id(path: &Path, line: usize, tok: &str) -> Result<u64> {
    tok.trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad node id `{tok}`")))
}

type RawEdges = Vec<(u64, u64, f64)>;

fn read_edges(path: &Path) -> Result<RawEdges> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        if !(2..=3).contains(&toks.len()) {
            return Err(parse_err(path, line, "expected `src dst [weight]`"));
        }
        let u = parse_id(path, line, toks[0])?;
        let v = parse_id(path, line, toks[1])?;
        let w = match toks.get(2) {
            Some(t) => t
                .parse::<f64>()
                .map_err(|_| parse_err(path, line, format!("bad weight `{t}`")))?,
            None => 1.0,
        };
        if !w.is_finite() || w <= 0.0 {
            return Err(parse_err(path, line, format!("weight {w} must be positive")));
        }
        out.push((u, v, w));
    }
    Ok(out)
}

fn read_features(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let body = raw.trim();
        let row: Vec<f64> = if body.is_empty() {
            Vec::new()
        } else {
            body.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| parse_err(path, k + 1, format!("bad feature `{t}`")))
                })
                .collect::<Result<_>>()?
        };
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    k + 1,
                    format!("{} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Matrix::from_vec(rows.len(), cols, rows.into_iter().flatten().collect())
}

fn read_labels(path: &Path) -> Result<Vec<(u64, usize)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() || (line == 1 && body.eq_ignore_ascii_case("node_id,class_id")) {
            continue;
        }
        let mut parts = body.split(',');
        let (Some(node), Some(class), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(path, line, "expected `node_id,class_id`"));
        };
        let node = parse_id(path, line, node)?;
        let class = class
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_err(path, line, format!("bad class id `{class}`")))?;
        out.push((node, class));
    }
    Ok(out)
}

/// Loads a graph and its (possibly partial) labels.
///
/// With a feature file, nodes are `0..rows` and every id must fall in that
/// range. Without one, the distinct ids of the edge and label files are
/// densified to `0..n` in ascending order. Edges are symmetrised and
/// duplicates collapse onto one edge (the last weight wins).
pub fn load_graph(files: &GraphFiles) -> Result<(Graph, Vec<Option<usize>>)> {
    let edges = read_edges(&files.edges)?;
    let labels = match &files.labels {
        Some(p) => read_labels(p)?,
        None => Vec::new(),
    };
    let features = match &files.features {
        Some(p) => Some(read_features(p)?),
        None => None,
    };

    let index: BTreeMap<u64, usize> = match &features {
        Some(f) => {
            let n = f.rows() as u64;
            let ids = edges
                .iter()
                .flat_map(|&(u, v, _)| [u, v])
                .chain(labels.iter().map(|l| l.0));
            if let Some(bad) = ids.into_iter().find(|&id| id >= n) {
                return Err(PastelError::InconsistentNodeCount(format!(
                    "node id {bad} but the feature file has {n} rows"
                )));
            }
            (0..n).map(|i| (i, i as usize)).collect()
        }
        None => {
            let mut ids: Vec<u64> = edges
                .iter()
                .flat_map(|&(u, v, _)| [u, v])
                .chain(labels.iter().map(|l| l.0))
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect()
        }
    };
    let n = index.len();
    let features = features.unwrap_or_else(|| Matrix::zeros(n, 0));

    let dense: Vec<(usize, usize, f64)> = edges
        .iter()
        .map(|&(u, v, w)| (index[&u], index[&v], w))
        .collect();
    let graph = Graph::from_edges(n, &dense, features)?;

    let mut node_labels = vec![None; n];
    for (id, class) in labels {
        node_labels[index[&id]] = Some(class);
    }
    Ok((graph, node_labels))
}

/// Writes a graph in the formats read by [`load_graph`].
pub fn save_graph(g: &Graph, labels: &[Option<usize>], files: &GraphFiles) -> Result<()> {
    let a = g.adjacency();
    let mut out = String::new();
    for u in 0..g.n() {
        for v in u..g.n() {
            let w = a[(u, v)];
            if w != 0.0 {
                writeln!(out, "{u} {v} {w:?}").expect("string write");
            }
        }
    }
    fs::write(&files.edges, out)?;

    if let Some(p) = &files.features {
        let mut out = String::new();
        let f = g.features();
        for i in 0..f.rows() {
            let row: Vec<String> = f.row(i).iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        fs::write(p, out)?;
    }
    if let Some(p) = &files.labels {
        let mut out = String::from("node_id,class_id\n");
        for (i, l) in labels.iter().enumerate() {
            if let Some(c) = l {
                writeln!(out, "{i},{c}").expect("string write");
            }
        }
        fs::write(p, out)?;
    }
    Ok(())
}
