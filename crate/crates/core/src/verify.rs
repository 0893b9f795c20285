//! Verification pipelines wrapped in a partition-refinement loop.
//!
//! * `entire`: partition the whole input box.
//! * `boundary`: homeomorphism certified over the input box, so only the
//!   partitioned boundary is propagated.
//! * `subset`: certified interior grid cells are dropped and only the kept
//!   cells (which cover the input's boundary) are propagated.
//! * `openmap`: propagate the input box through the prefix that is not an
//!   open map, then only the boundary of that intermediate hull through the
//!   open suffix.
//!
//! Each round's hull is intersected with the previous round's, so reported
//! hulls shrink monotonically.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boundary_cells, contained_in_safe, partition_box, Cells, SafeSet};
use crate::interval::{ibp_output, IBox};
use crate::model::Network;
use crate::topology::{
    check_homeomorphism, check_open_map, classify_cells, find_open_suffix, HomeoCertificate,
    OpenMapCertificate, DEFAULT_RANK_TOL,
};
use crate::zonotope::zono_forward;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Ibp,
    #[serde(rename = "zono")]
    Zonotope,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Ibp => "ibp",
            Engine::Zonotope => "zono",
        }
    }

    /// Interval hull of the engine's enclosure of `net(x)`.
    pub fn hull(&self, net: &Network, x: &IBox) -> Result<IBox> {
        match self {
            Engine::Ibp => ibp_output(net, x),
            Engine::Zonotope => zono_forward(net, x).map(|(h, _)| h),
        }
    }
}

/// Grid resolution used in each refinement round (rounds start at 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// `k = round`
    Linear,
    /// `k = 2^(round-1)`
    Doubling,
    Custom(Vec<usize>),
}

impl Schedule {
    pub fn k(&self, round: usize) -> usize {
        match self {
            Schedule::Linear => round,
            Schedule::Doubling => 1 << (round - 1),
            Schedule::Custom(ks) => ks[round - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub engine: Engine,
    pub max_rounds: usize,
    pub schedule: Schedule,
    /// Base homeomorphism grid for the subset method; doubled every round.
    pub homeo_grid: usize,
    pub rank_tol: f64,
    /// Worker-pool width; `None` uses the global pool.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            engine: Engine::Ibp,
            max_rounds: 8,
            schedule: Schedule::Linear,
            homeo_grid: 10,
            rank_tol: DEFAULT_RANK_TOL,
            workers: None,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1");
        }
        if self.homeo_grid == 0 {
            return bad("homeomorphism grid must be at least 1");
        }
        if self.rank_tol.is_nan() || self.rank_tol <= 0.0 {
            return bad("rank tolerance must be positive");
        }
        if self.workers == Some(0) {
            return bad("worker count must be at least 1");
        }
        if let Schedule::Custom(ks) = &self.schedule {
            if ks.len() < self.max_rounds {
                return bad("custom schedule is shorter than max_rounds");
            }
            if ks.first() == Some(&0) || ks.windows(2).any(|w| w[1] <= w[0]) {
                return bad("custom schedule must be positive and strictly increasing");
            }
        }
        if self.schedule == Schedule::Doubling && self.max_rounds > 32 {
            return bad("doubling schedule supports at most 32 rounds");
        }
        Ok(())
    }

    fn subset_grid(&self, round: usize) -> usize {
        self.homeo_grid << (round - 1)
    }

    fn with_pool<T: Send>(&self, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        match self.workers {
            None => f(),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?
                .install(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Safe,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Boundary,
    Entire,
    Subset,
    OpenMap,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Boundary => "boundary",
            Method::Entire => "entire",
            Method::Subset => "subset",
            Method::OpenMap => "openmap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub k: usize,
    pub cells: usize,
    pub hull: IBox,
    pub contained: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub k: usize,
    pub total: usize,
    pub homeo: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homeomorphism: Option<HomeoCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub open_map: Option<OpenMapCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub open_suffix: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix_hull: Option<IBox>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub verdict: Verdict,
    pub method: Method,
    pub engine: Engine,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<String>,
    pub rounds: Vec<RoundRecord>,
    pub certificates: Certificates,
    pub final_hull: IBox,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per round: `round,k,cells,lo1,hi1,…,contained,seconds`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dims = self.final_hull.dim();
        let mut header = vec!["round".to_string(), "k".into(), "cells".into()];
        for i in 1..=dims {
            header.push(format!("lo{i}"));
            header.push(format!("hi{i}"));
        }
        header.push("contained".into());
        header.push("seconds".into());
        w.write_record(&header)?;
        for r in &self.rounds {
            let mut row = vec![r.round.to_string(), r.k.to_string(), r.cells.to_string()];
            for d in r.hull.dims() {
                row.push(d.lo.to_string());
                row.push(d.hi.to_string());
            }
            row.push(r.contained.to_string());
            row.push(r.seconds.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Union hull of the engine enclosures of every cell.
pub fn reach(net: &Network, engine: Engine, cells: &[IBox]) -> Result<IBox> {
    cells
        .par_iter()
        .map(|c| engine.hull(net, c))
        .try_reduce_with(|a, b| Ok(a.hull(&b)))
        .unwrap_or(Err(Error::EmptyBox))
}

fn check_safe_dim(net: &Network, x: &IBox, s: &SafeSet) -> Result<()> {
    if x.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "input box",
            expected: net.input_dim(),
            found: x.dim(),
        });
    }
    if s.dim() != net.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "safe set",
            expected: net.output_dim(),
            found: s.dim(),
        });
    }
    Ok(())
}

/// Runs rounds until the hull fits the safe set or rounds run out.
/// `round_cells(r)` yields `(k, cells)` for round `r`.
fn refine(
    net: &Network,
    s: &SafeSet,
    cfg: &VerifyConfig,
    mut round_cells: impl FnMut(usize) -> Result<(usize, Vec<IBox>)>,
) -> Result<(Verdict, Vec<RoundRecord>)> {
    let mut rounds: Vec<RoundRecord> = Vec::new();
    for round in 1..=cfg.max_rounds {
        let started = Instant::now();
        let (k, cells) = round_cells(round)?;
        let mut hull = cfg.with_pool(|| reach(net, cfg.engine, &cells))?;
        if let Some(prev) = rounds.last() {
            // both are sound enclosures, so is their intersection
            hull = hull.intersect(&prev.hull).unwrap_or(hull);
        }
        let contained = contained_in_safe(&hull, s)?;
        rounds.push(RoundRecord {
            round,
            k,
            cells: cells.len(),
            hull,
            contained,
            seconds: started.elapsed().as_secs_f64(),
        });
        if contained {
            return Ok((Verdict::Safe, rounds));
        }
    }
    Ok((Verdict::Unknown, rounds))
}

fn report(
    verdict: Verdict,
    method: Method,
    cfg: &VerifyConfig,
    rounds: Vec<RoundRecord>,
    certificates: Certificates,
) -> Report {
    let final_hull = rounds.last().expect("at least one round").hull.clone();
    Report {
        verdict,
        method,
        engine: cfg.engine,
        relaxation: (cfg.engine == Engine::Zonotope).then(|| "min-slope parallelogram".to_string()),
        rounds,
        certificates,
        final_hull,
    }
}

pub fn verify_entire(net: &Network, x: &IBox, s: &SafeSet, cfg: &VerifyConfig) -> Result<Report> {
    cfg.validate()?;
    check_safe_dim(net, x, s)?;
    let (verdict, rounds) = refine(net, s, cfg, |r| {
        let k = cfg.schedule.k(r);
        Ok((k, partition_box(x, k)))
    })?;
    Ok(report(
        verdict,
        Method::Entire,
        cfg,
        rounds,
        Certificates::default(),
    ))
}

/// Boundary-only verification; requires a homeomorphism certificate.
pub fn verify_invertible(
    net: &Network,
    x: &IBox,
    s: &SafeSet,
    cfg: &VerifyConfig,
) -> Result<Report> {
    cfg.validate()?;
    check_safe_dim(net, x, s)?;
    let cert = check_homeomorphism(net, x)?;
    if !cert.is_verified() {
        return Err(Error::HomeomorphismNotCertified);
    }
    let (verdict, rounds) = refine(net, s, cfg, |r| {
        let k = cfg.schedule.k(r);
        Ok((k, boundary_cells(x, k)))
    })?;
    let certs = Certificates {
        homeomorphism: Some(cert),
        ..Default::default()
    };
    Ok(report(verdict, Method::Boundary, cfg, rounds, certs))
}

/// Drops certified interior cells and propagates only the kept cells.
pub fn verify_noninvertible(
    net: &Network,
    x: &IBox,
    s: &SafeSet,
    cfg: &VerifyConfig,
) -> Result<Report> {
    cfg.validate()?;
    check_safe_dim(net, x, s)?;
    let mut summaries = Vec::new();
    let (verdict, rounds) = refine(net, s, cfg, |r| {
        let k = cfg.subset_grid(r);
        let class = cfg.with_pool(|| classify_cells(net, x, k))?;
        let grid = Cells::new(x, k);
        let cells: Vec<IBox> = class.kept_cells.iter().map(|&i| grid.cell(i)).collect();
        summaries.push(CellSummary {
            k,
            total: class.total(),
            homeo: class.homeo_cells.len(),
            kept: class.kept_cells.len(),
        });
        Ok((k, cells))
    })?;
    let certs = Certificates {
        cells: summaries,
        ..Default::default()
    };
    Ok(report(verdict, Method::Subset, cfg, rounds, certs))
}

/// Prefix over the whole box, then the boundary of the intermediate hull
/// through the open suffix.
pub fn verify_openmap(net: &Network, x: &IBox, s: &SafeSet, cfg: &VerifyConfig) -> Result<Report> {
    cfg.validate()?;
    check_safe_dim(net, x, s)?;
    let split = find_open_suffix(net, cfg.rank_tol);
    if split == net.len() {
        return Err(Error::NoOpenSuffix);
    }
    let suffix = net.slice(split, net.len() - 1)?;
    let start = if split == 0 {
        x.clone()
    } else {
        let prefix = net.slice(0, split - 1)?;
        cfg.engine.hull(&prefix, x)?
    };
    let (verdict, rounds) = refine(&suffix, s, cfg, |r| {
        let k = cfg.schedule.k(r);
        Ok((k, boundary_cells(&start, k)))
    })?;
    let certs = Certificates {
        open_map: Some(check_open_map(&suffix, cfg.rank_tol)),
        open_suffix: Some(split),
        prefix_hull: (split > 0).then_some(start),
        ..Default::default()
    };
    Ok(report(verdict, Method::OpenMap, cfg, rounds, certs))
}

/// The boundary method that applies to `net` over `x`: a homeomorphism
/// certificate, then an open suffix, then cell classification (square
/// networks), else the entire-set method.
pub fn applicable_method(net: &Network, x: &IBox, cfg: &VerifyConfig) -> Result<Method> {
    let square = net.input_dim() == net.output_dim();
    let small = net.input_dim() <= crate::interval::MAX_DET_DIM;
    if square && small && check_homeomorphism(net, x)?.is_verified() {
        return Ok(Method::Boundary);
    }
    if find_open_suffix(net, cfg.rank_tol) < net.len() {
        return Ok(Method::OpenMap);
    }
    if square && small {
        return Ok(Method::Subset);
    }
    Ok(Method::Entire)
}

pub fn verify_with(
    method: Method,
    net: &Network,
    x: &IBox,
    s: &SafeSet,
    cfg: &VerifyConfig,
) -> Result<Report> {
    match method {
        Method::Boundary => verify_invertible(net, x, s, cfg),
        Method::Entire => verify_entire(net, x, s, cfg),
        Method::Subset => verify_noninvertible(net, x, s, cfg),
        Method::OpenMap => verify_openmap(net, x, s, cfg),
    }
}

pub fn verify_auto(net: &Network, x: &IBox, s: &SafeSet, cfg: &VerifyConfig) -> Result<Report> {
    cfg.validate()?;
    check_safe_dim(net, x, s)?;
    let method = applicable_method(net, x, cfg)?;
    verify_with(method, net, x, s, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub entire: Report,
    pub boundary: Report,
    /// `|ub - lb|_boundary / |ub - lb|_entire` per output dimension.
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Entire-set versus boundary-based hull widths without partitioning,
/// i.e. one round at `k = 1` for both sides.
pub fn compare(net: &Network, x: &IBox, s: &SafeSet, cfg: &VerifyConfig) -> Result<Comparison> {
    let single = VerifyConfig {
        max_rounds: 1,
        schedule: Schedule::Custom(vec![1]),
        ..cfg.clone()
    };
    single.validate()?;
    check_safe_dim(net, x, s)?;
    let entire = verify_entire(net, x, s, &single)?;
    let method = applicable_method(net, x, &single)?;
    let boundary = verify_with(method, net, x, s, &single)?;
    let ratios: Vec<f64> = boundary
        .final_hull
        .dims()
        .iter()
        .zip(entire.final_hull.dims())
        .map(|(b, e)| {
            if e.width() == 0.0 {
                1.0
            } else {
                b.width() / e.width()
            }
        })
        .collect();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(Comparison {
        entire,
        boundary,
        ratios,
        min,
        max,
        mean,
    })
}
