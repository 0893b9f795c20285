//! End-to-end runs of the `topoverify` binary: one per subcommand plus the
//! exit-code contract and report determinism.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use serde_json::Value;
use topoverify::Network;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topoverify"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn bounds(v: &Value) -> Vec<(f64, f64)> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|d| (d["lo"].as_f64().unwrap(), d["hi"].as_f64().unwrap()))
        .collect()
}

const NET_INPUT: &str = "[-0.5,0.5]x[-0.5,0.5]";
const NET_SAFE: &str = "[0.9,1.27]x[-0.27,0.25]";

#[test]
fn verify_openmap_is_safe() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let csv = dir.path().join("rounds.csv");
    let net = data("net2432.json");
    let o = run(&[
        "verify",
        "--net",
        path(&net),
        "--input",
        NET_INPUT,
        "--safe",
        NET_SAFE,
        "--method",
        "openmap",
        "--engine",
        "ibp",
        "--json",
        path(&json),
        "--csv",
        path(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("verdict: Safe"));
    assert!(stdout(&o).contains("[0.903961, 1.26405]"), "{}", stdout(&o));
    let r = read_json(&json);
    assert_eq!(r["verdict"], "safe");
    assert_eq!(r["method"], "openmap");
    let hull = bounds(&r["final_hull"]);
    for ((lo, hi), (wl, wh)) in hull.iter().zip([(0.9040, 1.2640), (-0.2656, 0.2449)]) {
        assert_close(*lo, wl, 5e-4, "lo");
        assert_close(*hi, wh, 5e-4, "hi");
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("round,k,cells,lo1,hi1,lo2,hi2,contained,seconds"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn verify_unknown_exits_one() {
    let net = data("net2432.json");
    let o = run(&[
        "verify",
        "--net",
        path(&net),
        "--input",
        NET_INPUT,
        "--safe",
        "[1.0,1.1]x*",
        "--rounds",
        "2",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("verdict: Unknown"));
}

#[test]
fn verify_auto_picks_a_method() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let o = run(&[
        "verify",
        "--net",
        path(&data("net2432.json")),
        "--input",
        NET_INPUT,
        "--safe",
        NET_SAFE,
        "--json",
        path(&json),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(&json)["method"], "openmap");

    let o = run(&[
        "verify",
        "--net",
        path(&data("identity.json")),
        "--input",
        "[0,1]x[0,1]",
        "--safe",
        "[-0.1,1.1]x[-0.1,1.1]",
        "--json",
        path(&json),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(&json)["method"], "boundary");
}

#[test]
fn input_errors_exit_two() {
    let net = data("net2432.json");
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "verify",
            "--net",
            path(&net),
            "--input",
            "[0.5,-0.5]x[0,1]",
            "--safe",
            NET_SAFE,
        ],
        vec![
            "verify",
            "--net",
            path(&net),
            "--input",
            "[0,1]",
            "--safe",
            NET_SAFE,
        ],
        vec![
            "verify",
            "--net",
            "/nonexistent/net.json",
            "--input",
            NET_INPUT,
            "--safe",
            NET_SAFE,
        ],
        vec![
            "verify",
            "--net",
            path(&net),
            "--input",
            NET_INPUT,
            "--safe",
            "*x*",
        ],
        vec![
            "verify",
            "--net",
            path(&net),
            "--input",
            NET_INPUT,
            "--safe",
            NET_SAFE,
            "--method",
            "nope",
        ],
        vec![
            "verify",
            "--net",
            path(&net),
            "--input",
            NET_INPUT,
            "--safe",
            NET_SAFE,
            "--method",
            "boundary",
        ],
        vec!["reach", "--net", path(&net)],
        vec!["frobnicate"],
        vec![],
    ];
    for args in cases {
        assert_eq!(code(&run(&args)), 2, "args {args:?}");
    }
}

#[test]
fn zonotope_engine_rejects_piecewise_activations() {
    let dir = tempfile::tempdir().unwrap();
    let net_path = dir.path().join("leaky.json");
    let doc = topoverify::cli::gen_net(
        &[2, 2],
        topoverify::Activation::Identity,
        topoverify::Activation::LeakyRelu { slope: 0.1 },
        3,
    )
    .unwrap();
    std::fs::write(&net_path, serde_json::to_string(&doc).unwrap()).unwrap();
    let args = [
        "reach",
        "--net",
        path(&net_path),
        "--input",
        "[0,1]x[0,1]",
        "--engine",
    ];
    assert_eq!(code(&run(&[&args[..], &["ibp"]].concat())), 0);
    let o = run(&[&args[..], &["zono"]].concat());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("leaky_relu"));
}

#[test]
fn reach_identity_gives_the_box() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("h.json");
    let o = run(&[
        "reach",
        "--net",
        path(&data("identity.json")),
        "--input",
        "[0,1]x[0,1]",
        "--json",
        path(&json),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        bounds(&read_json(&json)["hull"]),
        vec![(0.0, 1.0), (0.0, 1.0)]
    );
    let o = run(&[
        "reach",
        "--net",
        path(&data("net2432.json")),
        "--input",
        NET_INPUT,
        "--grid",
        "3",
        "--engine",
        "zono",
        "--json",
        path(&json),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(&json)["cells"], 9);
}

#[test]
fn check_openmap_lists_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("om.json");
    let net = data("net2432.json");
    let o = run(&[
        "check-openmap",
        "--net",
        path(&net),
        "--from",
        "1",
        "--json",
        path(&json),
    ]);
    assert_eq!(code(&o), 0);
    let c = read_json(&json);
    assert_eq!(c["verdict"], "verified");
    let ranks: Vec<u64> = c["reasons"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["rank"].as_u64().unwrap())
        .collect();
    assert_eq!(ranks, vec![3, 2]);

    let o = run(&["check-openmap", "--net", path(&net), "--json", path(&json)]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(&json)["verdict"], "refuted");
    assert!(stdout(&o).contains("width increases 2->4"));
    assert_eq!(
        code(&run(&[
            "check-openmap",
            "--net",
            path(&net),
            "--from",
            "2",
            "--to",
            "5"
        ])),
        2
    );
}

#[test]
fn check_homeo_reports_det_interval() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("h.json");
    let o = run(&[
        "check-homeo",
        "--net",
        path(&data("net2432.json")),
        "--input",
        NET_INPUT,
        "--json",
        path(&json),
    ]);
    assert_eq!(code(&o), 0);
    let c = read_json(&json);
    assert_eq!(c["verdict"], "inconclusive");
    assert!(c["det_interval"]["lo"].as_f64().unwrap() <= 0.0);
    assert!(c["det_interval"]["hi"].as_f64().unwrap() >= 0.0);

    let o = run(&[
        "check-homeo",
        "--net",
        path(&data("identity.json")),
        "--input",
        "[0,1]x[0,1]",
        "--json",
        path(&json),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(&json)["verdict"], "verified");
}

#[test]
fn compare_writes_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("c.json");
    let csv = dir.path().join("c.csv");
    let o = run(&[
        "compare",
        "--net",
        path(&data("net2432.json")),
        "--input",
        NET_INPUT,
        "--json",
        path(&json),
        "--csv",
        path(&csv),
    ]);
    assert_eq!(code(&o), 0);
    let ratios: Vec<f64> = read_json(&json)["ratios"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_close(ratios[0], 0.9471, 1e-3, "ratio 1");
    assert_close(ratios[1], 0.8989, 1e-3, "ratio 2");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("dim,entire_lo,entire_hi,boundary_lo,boundary_hi,ratio"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn mc_exports_samples() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("mc.json");
    let csv = dir.path().join("mc.csv");
    let o = run(&[
        "mc",
        "--net",
        path(&data("net2432.json")),
        "--input",
        NET_INPUT,
        "--samples",
        "500",
        "--seed",
        "4",
        "--json",
        path(&json),
        "--csv",
        path(&csv),
    ]);
    assert_eq!(code(&o), 0);
    let j = read_json(&json);
    assert_eq!(j["rng"], "chacha8-stream");
    assert_eq!(j["count"], 500);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("x1,x2,y1,y2\n"));
    assert_eq!(text.lines().count(), 501);
}

#[test]
fn gen_net_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let o = run(&[
            "gen-net",
            "--widths",
            "4-4-3-3-2",
            "--seed",
            "7",
            "--out",
            path(p),
        ]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let net = Network::load(&a).unwrap();
    assert_eq!(net.widths(), vec![4, 4, 3, 3, 2]);

    let o = run(&["gen-net", "--widths", "2-4-2", "--activation", "tanh"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        Network::from_json(&stdout(&o)).unwrap().widths(),
        vec![2, 4, 2]
    );
    assert_eq!(code(&run(&["gen-net", "--widths", "3"])), 2);
    assert_eq!(
        code(&run(&[
            "gen-net",
            "--widths",
            "3-2",
            "--activation",
            "relu6"
        ])),
        2
    );
}

/// Report JSON without its wall-clock fields.
fn without_timings(p: &Path) -> String {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"seconds\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let net = data("net2432.json");
    let mut outputs = Vec::new();
    for (i, workers) in ["1", "1", "3"].iter().enumerate() {
        let json = dir.path().join(format!("r{i}.json"));
        let o = run(&[
            "verify",
            "--net",
            path(&net),
            "--input",
            NET_INPUT,
            "--safe",
            "[1.0,1.1]x*",
            "--method",
            "subset",
            "--rounds",
            "2",
            "--workers",
            workers,
            "--json",
            path(&json),
        ]);
        assert_eq!(code(&o), 1);
        outputs.push(without_timings(&json));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}
