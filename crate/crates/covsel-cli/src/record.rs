//! One row per (method x setting x replicate) in the results table.

use serde::{Deserialize, Serialize};

/// Column order is the on-disk CSV order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRecord {
    pub design: String,
    pub method: String,
    /// Value of the swept knob, empty when the design has no sweep.
    pub knob_value: String,
    pub n: usize,
    pub p_o: usize,
    pub p_h: usize,
    pub replicate: usize,
    pub seed: u64,
    pub eta: f64,
    pub lambda: f64,
    /// Threshold level; empty for unthresholded methods.
    pub tau: Option<f64>,
    /// Sparse/low-rank trade-off; empty except for lvglasso.
    pub gamma: Option<f64>,
    pub edges_selected: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f1: f64,
    pub runtime_ms: u64,
    pub converged: bool,
}
