//! Data ingestion and machine-readable exports: numeric CSV matrices,
//! node-label files, graph JSON documents, and the results table.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use covsel::mat::{DataMatrix, EdgeSet, SymMat};

use crate::record::ResultRecord;
use crate::CliError;

/// A parsed numeric matrix plus column names when a header row was present.
#[derive(Clone, Debug)]
pub struct LoadedMatrix {
    pub data: DataMatrix,
    pub column_names: Option<Vec<String>>,
}

/// Parses a rectangular numeric CSV. A single header row is auto-detected:
/// if any cell of the first row fails to parse as a finite number, the row
/// is treated as column names. NaN/inf cells are rejected with their
/// location; ragged rows name the offending line.
pub fn load_matrix_csv(path: &Path) -> Result<LoadedMatrix, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_matrix_csv(&text)
}

/// Reader-based variant of [`load_matrix_csv`].
pub fn load_matrix_from_reader<R: Read>(mut reader: R) -> Result<LoadedMatrix, CliError> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| CliError::Data(format!("cannot read input: {e}")))?;
    parse_matrix_csv(&text)
}

pub fn parse_matrix_csv(text: &str) -> Result<LoadedMatrix, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut column_names: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;

    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| CliError::Data(format!("line {line}: {e}")))?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if let Some(w) = width {
            if record.len() != w {
                return Err(CliError::Data(format!(
                    "line {line}: expected {w} columns, found {}",
                    record.len()
                )));
            }
        }

        let mut parsed = Vec::with_capacity(record.len());
        let mut failure: Option<usize> = None;
        for (col, cell) in record.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => parsed.push(v),
                Ok(_) => {
                    return Err(CliError::Data(format!(
                        "line {line}, column {}: non-finite value '{cell}'",
                        col + 1
                    )))
                }
                Err(_) => {
                    failure = Some(col);
                    break;
                }
            }
        }
        match failure {
            None => {
                width.get_or_insert(record.len());
                rows.push(parsed);
            }
            Some(_) if idx == 0 => {
                column_names = Some(record.iter().map(|c| c.to_string()).collect());
                width = Some(record.len());
            }
            Some(col) => {
                return Err(CliError::Data(format!(
                    "line {line}, column {}: non-numeric cell '{}'",
                    col + 1,
                    record.get(col).unwrap_or("")
                )))
            }
        }
    }

    if rows.is_empty() {
        return Err(CliError::Data("no data rows found".into()));
    }
    let data = DataMatrix::from_rows(&rows).map_err(|e| CliError::Data(e.to_string()))?;
    Ok(LoadedMatrix { data, column_names })
}

/// One label per line (or per CSV cell on a single line).
pub fn load_labels(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let labels: Vec<String> = if text.lines().filter(|l| !l.trim().is_empty()).count() > 1 {
        text.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect()
    } else {
        text.split(',').map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect()
    };
    if labels.is_empty() {
        return Err(CliError::Data(format!("no labels found in {}", path.display())));
    }
    Ok(labels)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeExport {
    pub id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeExport {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Graph document: nodes with optional labels, edges with estimate weights,
/// stable (i asc, then j) ordering.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<NodeExport>,
    pub edges: Vec<EdgeExport>,
}

impl GraphExport {
    pub fn new(
        edges: &EdgeSet,
        weights: &SymMat,
        node_labels: Option<&[String]>,
    ) -> Result<Self, CliError> {
        if weights.dim() != edges.dim() {
            return Err(CliError::Data(format!(
                "weights are {}x{} but the edge set has {} nodes",
                weights.dim(),
                weights.dim(),
                edges.dim()
            )));
        }
        if let Some(labels) = node_labels {
            if labels.len() != edges.dim() {
                return Err(CliError::Data(format!(
                    "{} labels for {} nodes",
                    labels.len(),
                    edges.dim()
                )));
            }
        }
        let nodes = (0..edges.dim())
            .map(|id| NodeExport { id, label: node_labels.map(|l| l[id].clone()) })
            .collect();
        // EdgeSet iteration is already (i asc, then j).
        let edges = edges
            .iter()
            .map(|(i, j)| EdgeExport { i, j, weight: weights.get(i, j) })
            .collect();
        Ok(Self { nodes, edges })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CliError> {
        let g: GraphExport =
            serde_json::from_str(s).map_err(|e| CliError::Data(format!("bad graph JSON: {e}")))?;
        let dim = g.nodes.len();
        for e in &g.edges {
            if e.i >= e.j || e.j >= dim {
                return Err(CliError::Data(format!(
                    "edge ({}, {}) is not an ordered pair below {dim}",
                    e.i, e.j
                )));
            }
        }
        Ok(g)
    }

    pub fn edge_set(&self) -> Result<EdgeSet, CliError> {
        EdgeSet::from_pairs(self.nodes.len(), self.edges.iter().map(|e| (e.i, e.j)))
            .map_err(|e| CliError::Data(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_json())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
    }
}

/// Writes the results table with the ResultRecord columns in order.
pub fn write_results_csv(records: &[ResultRecord], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    for r in records {
        w.serialize(r).map_err(|e| CliError::Data(format!("csv write: {e}")))?;
    }
    w.flush().map_err(|e| CliError::Data(format!("csv flush: {e}")))?;
    Ok(())
}

pub fn results_to_json(records: &[ResultRecord]) -> String {
    serde_json::to_string_pretty(records).expect("records serialize")
}
