//! Topological certificates that justify boundary-only propagation.
//!
//! * Homeomorphism over a box: the interval Jacobian determinant excludes 0.
//!   This is sufficient only, so a failed check is `Inconclusive`.
//! * Open map: every layer is non-widening, has a full-row-rank weight
//!   matrix and a strictly monotone continuous activation. Compositions of
//!   open maps are open, so the check is per layer.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Cells;
use crate::interval::{interval_det, interval_jacobian, IBox, Interval, MAX_DET_DIM};
use crate::model::Network;

pub const DEFAULT_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HomeoVerdict {
    Verified,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeoCertificate {
    pub verdict: HomeoVerdict,
    pub det_interval: Interval,
    #[serde(rename = "box")]
    pub region: IBox,
}

impl HomeoCertificate {
    pub fn is_verified(&self) -> bool {
        self.verdict == HomeoVerdict::Verified
    }
}

pub fn check_homeomorphism(net: &Network, x: &IBox) -> Result<HomeoCertificate> {
    if net.input_dim() != net.output_dim() {
        return Err(Error::NotSquare {
            rows: net.output_dim(),
            cols: net.input_dim(),
        });
    }
    if net.input_dim() > MAX_DET_DIM {
        return Err(Error::UnsupportedSize(net.input_dim()));
    }
    let j = interval_jacobian(net, x)?;
    let det = interval_det(&j)?;
    let verdict = if det.contains_zero() {
        HomeoVerdict::Inconclusive
    } else {
        HomeoVerdict::Verified
    };
    Ok(HomeoCertificate {
        verdict,
        det_interval: det,
        region: x.clone(),
    })
}

/// Numerical rank: pivots of partially pivoted elimination whose magnitude
/// exceeds `tol · max|W| · max(rows, cols)`.
pub fn matrix_rank(w: &Array2<f64>, tol: f64) -> usize {
    let (rows, cols) = w.dim();
    let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    let threshold = tol * scale * rows.max(cols) as f64;
    let mut a = w.clone();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let p = (rank..rows)
            .max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))
            .unwrap();
        if a[[p, col]].abs() <= threshold {
            continue;
        }
        if p != rank {
            for c in 0..cols {
                a.swap([rank, c], [p, c]);
            }
        }
        for i in (rank + 1)..rows {
            let f = a[[i, col]] / a[[rank, col]];
            if f != 0.0 {
                for c in col..cols {
                    a[[i, c]] -= f * a[[rank, c]];
                }
            }
        }
        rank += 1;
    }
    rank
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFinding {
    pub layer: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub width_non_increasing: bool,
    pub rank: usize,
    pub required_rank: usize,
    pub activation: String,
    pub activation_monotone: bool,
}

impl LayerFinding {
    pub fn ok(&self) -> bool {
        self.width_non_increasing && self.rank == self.required_rank && self.activation_monotone
    }

    pub fn describe(&self) -> String {
        let mut problems = Vec::new();
        if !self.width_non_increasing {
            problems.push(format!("width increases {}->{}", self.d_in, self.d_out));
        }
        if self.rank != self.required_rank {
            problems.push(format!("rank {} < {}", self.rank, self.required_rank));
        }
        if !self.activation_monotone {
            problems.push(format!("{} is not strictly monotone", self.activation));
        }
        if problems.is_empty() {
            format!(
                "layer {}: {}->{} rank {} {} ok",
                self.layer, self.d_in, self.d_out, self.rank, self.activation
            )
        } else {
            format!("layer {}: {}", self.layer, problems.join(", "))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpenMapVerdict {
    Verified,
    Refuted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenMapCertificate {
    pub verdict: OpenMapVerdict,
    pub reasons: Vec<LayerFinding>,
}

impl OpenMapCertificate {
    pub fn is_verified(&self) -> bool {
        self.verdict == OpenMapVerdict::Verified
    }
}

fn layer_findings(net: &Network, tol: f64) -> Vec<LayerFinding> {
    net.layers()
        .iter()
        .enumerate()
        .map(|(i, l)| LayerFinding {
            layer: i,
            d_in: l.input_dim(),
            d_out: l.output_dim(),
            width_non_increasing: l.output_dim() <= l.input_dim(),
            rank: matrix_rank(l.weights(), tol),
            required_rank: l.output_dim(),
            activation: l.activation().name().to_string(),
            activation_monotone: l.activation().is_strictly_monotone(),
        })
        .collect()
}

/// Structural open-map check; layer indices in findings are relative to `net`.
pub fn check_open_map(net: &Network, tol: f64) -> OpenMapCertificate {
    let reasons = layer_findings(net, tol);
    let verdict = if reasons.iter().all(LayerFinding::ok) {
        OpenMapVerdict::Verified
    } else {
        OpenMapVerdict::Refuted
    };
    OpenMapCertificate { verdict, reasons }
}

/// Smallest `s` with `slice(s, last)` certified open; `net.len()` if none.
pub fn find_open_suffix(net: &Network, tol: f64) -> usize {
    let findings = layer_findings(net, tol);
    findings
        .iter()
        .rposition(|f| !f.ok())
        .map_or(0, |last_bad| last_bad + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellClassification {
    pub k: usize,
    pub counts: Vec<usize>,
    /// Interior cells with a homeomorphism certificate (the removable set).
    pub homeo_cells: Vec<usize>,
    /// Everything else; covers the closure of the input minus the removed set.
    pub kept_cells: Vec<usize>,
}

impl CellClassification {
    pub fn total(&self) -> usize {
        self.counts.iter().product()
    }
}

fn touches_boundary(idx: &[usize], counts: &[usize], region: &IBox) -> bool {
    idx.iter()
        .zip(counts)
        .zip(region.dims())
        .any(|((&i, &c), d)| d.is_degenerate() || i == 0 || i + 1 == c)
}

/// Splits `x` into the `k`-grid and certifies each interior cell.
pub fn classify_cells(net: &Network, x: &IBox, k: usize) -> Result<CellClassification> {
    if net.input_dim() != net.output_dim() {
        return Err(Error::NotSquare {
            rows: net.output_dim(),
            cols: net.input_dim(),
        });
    }
    if net.input_dim() > MAX_DET_DIM {
        return Err(Error::UnsupportedSize(net.input_dim()));
    }
    if k == 0 {
        return Err(Error::Config("grid resolution must be at least 1".into()));
    }
    let cells = Cells::new(x, k);
    let counts = cells.counts().to_vec();
    let certified: Vec<bool> = (0..cells.total())
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let idx = cells.index_of(i);
            if touches_boundary(&idx, &counts, x) {
                return Ok(false);
            }
            Ok(check_homeomorphism(net, &cells.cell(i))?.is_verified())
        })
        .collect::<Result<Vec<_>>>()?;
    let (homeo_cells, kept_cells): (Vec<usize>, Vec<usize>) =
        (0..certified.len()).partition(|&i| certified[i]);
    Ok(CellClassification {
        k,
        counts,
        homeo_cells,
        kept_cells,
    })
}
