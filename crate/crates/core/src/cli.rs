//! Command-line front end.
//!
//! Exit codes: 0 when a computation completes (or verification is Safe),
//! 1 when verification ends Unknown, 2 on usage or input errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::{partition_box, SafeSet};
use crate::interval::{IBox, Interval};
use crate::model::{Activation, Layer, Network, NetworkDocument};
use crate::oracle::mc_reach;
use crate::topology::{check_homeomorphism, check_open_map, DEFAULT_RANK_TOL};
use crate::verify::{
    applicable_method, compare, reach, verify_with, Engine, Method, Report, Schedule, Verdict,
    VerifyConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNKNOWN: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "topoverify",
    version,
    about = "Set-boundary safety verification of feedforward networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EngineArg {
    Ibp,
    Zono,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Engine {
        match e {
            EngineArg::Ibp => Engine::Ibp,
            EngineArg::Zono => Engine::Zonotope,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Boundary,
    Entire,
    Subset,
    Openmap,
    Auto,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    #[arg(long)]
    pub net: PathBuf,
    /// Input box, e.g. "[-0.5,0.5]x[-0.5,0.5]".
    #[arg(long, allow_hyphen_values = true)]
    pub input: String,
    #[arg(long, value_enum, default_value = "ibp")]
    pub engine: EngineArg,
    /// Worker-pool width (defaults to the machine's parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interval hull of the network image of a box.
    Reach {
        #[command(flatten)]
        common: Common,
        /// Cells per dimension.
        #[arg(long, default_value_t = 1)]
        grid: usize,
    },
    /// Verify that every input in the box maps into the safe set.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Safe set; `*` leaves a dimension unconstrained.
        #[arg(long, allow_hyphen_values = true)]
        safe: String,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        #[arg(long, default_value_t = 8)]
        rounds: usize,
        /// Base homeomorphism grid of the subset method.
        #[arg(long, default_value_t = 10)]
        grid: usize,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Interval-Jacobian homeomorphism certificate over a box.
    CheckHomeo {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        input: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Structural open-map certificate for layers `from..=to`.
    CheckOpenmap {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, default_value_t = 0)]
        from: usize,
        #[arg(long)]
        to: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Entire-set versus boundary-based hull width ratios.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        safe: Option<String>,
        #[arg(long, default_value_t = 10)]
        grid: usize,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Monte-Carlo sample of the reachable set.
    Mc {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        input: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Random network whose trapezoidal suffix is a certified open map.
    GenNet {
        /// Layer widths, e.g. "4-4-3-3-2".
        #[arg(long)]
        widths: String,
        #[arg(long, default_value = "sigmoid")]
        activation: String,
        #[arg(long, default_value = "identity")]
        output_activation: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `[lo,hi]x[lo,hi]x…`; `*` stands for an unconstrained dimension.
fn parse_dims(text: &str) -> Result<Vec<Option<Interval>>> {
    let bad = |m: String| Error::Parse(format!("box `{text}`: {m}"));
    let mut dims = Vec::new();
    let mut rest = text.trim();
    loop {
        rest = rest.trim_start();
        if let Some(r) = rest.strip_prefix('*') {
            dims.push(None);
            rest = r;
        } else if let Some(r) = rest.strip_prefix('[') {
            let close = r.find(']').ok_or_else(|| bad("missing `]`".into()))?;
            let (lo, hi) = r[..close]
                .split_once(',')
                .ok_or_else(|| bad("expected `lo,hi`".into()))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("`{}`: {e}", s.trim())))
            };
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            dims.push(Some(Interval::new(lo, hi).map_err(|e| bad(e.to_string()))?));
            rest = &r[close + 1..];
        } else {
            return Err(bad(format!("unexpected `{rest}`")));
        }
        rest = rest.trim_start();
        if rest.is_empty() {
            return Ok(dims);
        }
        rest = rest
            .strip_prefix('x')
            .or_else(|| rest.strip_prefix('×'))
            .ok_or_else(|| bad(format!("expected `x` before `{rest}`")))?;
    }
}

pub fn parse_box(text: &str) -> Result<IBox> {
    let dims = parse_dims(text)?
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Parse(format!("box `{text}`: `*` is only allowed in safe sets")))?;
    IBox::new(dims)
}

pub fn parse_safe(text: &str) -> Result<SafeSet> {
    SafeSet::new(parse_dims(text)?)
}

fn parse_widths(text: &str) -> Result<Vec<usize>> {
    let widths = text
        .split(['-', ',', 'x'])
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("width `{w}`: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::Parse(format!(
            "widths `{text}`: need at least two positive widths"
        )));
    }
    Ok(widths)
}

/// First layer index from which widths never increase.
pub fn trapezoid_start(widths: &[usize]) -> usize {
    (0..widths.len() - 1)
        .rev()
        .find(|&i| widths[i + 1] > widths[i])
        .map_or(0, |i| i + 1)
}

pub const GEN_MAX_ATTEMPTS: usize = 100;

/// Random network with parameters uniform in `[-1,1]/√fan_in`, redrawn
/// until its trapezoidal suffix passes the open-map check.
pub fn gen_net(
    widths: &[usize],
    hidden: Activation,
    output: Activation,
    seed: u64,
) -> Result<NetworkDocument> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::Config("need at least two positive widths".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = trapezoid_start(widths);
    let n_layers = widths.len() - 1;
    for _ in 0..GEN_MAX_ATTEMPTS {
        let layers = (0..n_layers)
            .map(|i| {
                let (fan_in, fan_out) = (widths[i], widths[i + 1]);
                let scale = 1.0 / (fan_in as f64).sqrt();
                let w = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    rng.gen_range(-1.0..=1.0) * scale
                });
                let b = Array1::from_shape_simple_fn(fan_out, || rng.gen_range(-1.0..=1.0) * scale);
                let act = if i + 1 == n_layers { output } else { hidden };
                Layer::new(w, b, act)
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Network::new(layers)?;
        if start == n_layers
            || check_open_map(&net.slice(start, n_layers - 1)?, DEFAULT_RANK_TOL).is_verified()
        {
            return Ok(net.to_document());
        }
    }
    Err(Error::GaveUp(GEN_MAX_ATTEMPTS))
}

/// Six significant digits for human-readable summaries.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-5..=9).contains(&mag) {
        return format!("{v:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn fmt_box(b: &IBox) -> String {
    b.dims()
        .iter()
        .map(|d| format!("[{}, {}]", sig6(d.lo), sig6(d.hi)))
        .collect::<Vec<_>>()
        .join(" x ")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

fn write_json(path: Option<&PathBuf>, value: &impl serde::Serialize) -> Result<()> {
    if let Some(p) = path {
        write_text(p, &serde_json::to_string_pretty(value)?)?;
    }
    Ok(())
}

fn print_report(r: &Report) {
    println!("method: {}  engine: {}", r.method, r.engine.name());
    for round in &r.rounds {
        println!(
            "  round {} k={} cells={} hull={} contained={} ({:.3}s)",
            round.round,
            round.k,
            round.cells,
            fmt_box(&round.hull),
            round.contained,
            round.seconds
        );
    }
    println!("final hull: {}", fmt_box(&r.final_hull));
    println!(
        "verdict: {}",
        match r.verdict {
            Verdict::Safe => "Safe",
            Verdict::Unknown => "Unknown",
        }
    );
}

fn config(
    engine: EngineArg,
    rounds: usize,
    grid: usize,
    tol: f64,
    workers: Option<usize>,
) -> VerifyConfig {
    VerifyConfig {
        engine: engine.into(),
        max_rounds: rounds,
        schedule: Schedule::Linear,
        homeo_grid: grid,
        rank_tol: tol,
        workers,
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Reach { common, grid } => {
            let net = Network::load(&common.net)?;
            let x = parse_box(&common.input)?;
            let engine: Engine = common.engine.into();
            let cells = partition_box(&x, grid);
            let cfg = config(common.engine, 1, 1, DEFAULT_RANK_TOL, common.workers);
            let hull = cfg_pool(&cfg, || reach(&net, engine, &cells))?;
            println!("hull: {}", fmt_box(&hull));
            write_json(
                common.json.as_ref(),
                &json!({ "engine": engine, "grid": grid, "cells": cells.len(), "hull": hull }),
            )?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            common,
            safe,
            method,
            rounds,
            grid,
            tol,
            csv,
        } => {
            let net = Network::load(&common.net)?;
            let x = parse_box(&common.input)?;
            let s = parse_safe(&safe)?;
            let cfg = config(common.engine, rounds, grid, tol, common.workers);
            cfg.validate()?;
            let method = match method {
                MethodArg::Boundary => Method::Boundary,
                MethodArg::Entire => Method::Entire,
                MethodArg::Subset => Method::Subset,
                MethodArg::Openmap => Method::OpenMap,
                MethodArg::Auto => applicable_method(&net, &x, &cfg)?,
            };
            let report = verify_with(method, &net, &x, &s, &cfg)?;
            print_report(&report);
            write_json(common.json.as_ref(), &report)?;
            if let Some(p) = csv {
                report.write_csv(BufWriter::new(File::create(p)?))?;
            }
            Ok(match report.verdict {
                Verdict::Safe => EXIT_OK,
                Verdict::Unknown => EXIT_UNKNOWN,
            })
        }
        Command::CheckHomeo { net, input, json } => {
            let net = Network::load(&net)?;
            let x = parse_box(&input)?;
            let cert = check_homeomorphism(&net, &x)?;
            println!(
                "homeomorphism: {:?}  det in [{}, {}]",
                cert.verdict,
                sig6(cert.det_interval.lo),
                sig6(cert.det_interval.hi)
            );
            write_json(json.as_ref(), &cert)?;
            Ok(EXIT_OK)
        }
        Command::CheckOpenmap {
            net,
            from,
            to,
            tol,
            json,
        } => {
            let full = Network::load(&net)?;
            let to = to.unwrap_or(full.len().saturating_sub(1));
            let sub = full.slice(from, to)?;
            let cert = check_open_map(&sub, tol);
            println!("open map (layers {from}..={to}): {:?}", cert.verdict);
            for f in &cert.reasons {
                println!("  {}", f.describe());
            }
            write_json(json.as_ref(), &cert)?;
            Ok(EXIT_OK)
        }
        Command::Compare {
            common,
            safe,
            grid,
            tol,
            csv,
        } => {
            let net = Network::load(&common.net)?;
            let x = parse_box(&common.input)?;
            let s = match safe {
                Some(text) => parse_safe(&text)?,
                None => SafeSet::new(vec![
                    Some(Interval {
                        lo: f64::MIN,
                        hi: f64::MAX
                    });
                    net.output_dim()
                ])?,
            };
            let cfg = config(common.engine, 1, grid, tol, common.workers);
            let cmp = compare(&net, &x, &s, &cfg)?;
            println!(
                "entire ({}): {}",
                cmp.entire.method,
                fmt_box(&cmp.entire.final_hull)
            );
            println!(
                "boundary ({}): {}",
                cmp.boundary.method,
                fmt_box(&cmp.boundary.final_hull)
            );
            println!(
                "ratios: {}",
                cmp.ratios
                    .iter()
                    .map(|r| sig6(*r))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            println!(
                "min {} max {} mean {}",
                sig6(cmp.min),
                sig6(cmp.max),
                sig6(cmp.mean)
            );
            write_json(common.json.as_ref(), &cmp)?;
            if let Some(p) = csv {
                let mut w = csv::Writer::from_writer(BufWriter::new(File::create(p)?));
                w.write_record([
                    "dim",
                    "entire_lo",
                    "entire_hi",
                    "boundary_lo",
                    "boundary_hi",
                    "ratio",
                ])?;
                for (i, ((e, b), r)) in cmp
                    .entire
                    .final_hull
                    .dims()
                    .iter()
                    .zip(cmp.boundary.final_hull.dims())
                    .zip(&cmp.ratios)
                    .enumerate()
                {
                    w.write_record([
                        (i + 1).to_string(),
                        e.lo.to_string(),
                        e.hi.to_string(),
                        b.lo.to_string(),
                        b.hi.to_string(),
                        r.to_string(),
                    ])?;
                }
                w.flush()?;
            }
            Ok(EXIT_OK)
        }
        Command::Mc {
            net,
            input,
            samples,
            seed,
            json,
            csv,
        } => {
            let net = Network::load(&net)?;
            let x = parse_box(&input)?;
            let cloud = mc_reach(&net, &x, samples, seed)?;
            println!(
                "samples: {}  seed: {}  rng: {}",
                cloud.count, cloud.seed, cloud.rng
            );
            println!("sample hull: {}", fmt_box(&cloud.hull));
            write_json(
                json.as_ref(),
                &json!({ "seed": seed, "rng": cloud.rng, "count": cloud.count, "hull": cloud.hull }),
            )?;
            if let Some(p) = csv {
                cloud.write_csv(BufWriter::new(File::create(p)?))?;
            }
            Ok(EXIT_OK)
        }
        Command::GenNet {
            widths,
            activation,
            output_activation,
            seed,
            out,
        } => {
            let widths = parse_widths(&widths)?;
            let hidden = Activation::from_name(&activation, None)?;
            let output = Activation::from_name(&output_activation, None)?;
            let doc = gen_net(&widths, hidden, output, seed)?;
            let text = serde_json::to_string_pretty(&doc)?;
            match out {
                Some(p) => write_text(&p, &text)?,
                None => println!("{text}"),
            }
            Ok(EXIT_OK)
        }
    }
}

fn cfg_pool<T: Send>(cfg: &VerifyConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match cfg.workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(f),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
