use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn velocity(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_velocity")).args(args).output().unwrap()
}

fn pricefeed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pricefeed")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn scenario_files() -> Vec<PathBuf> {
    let mut files: Vec<_> = fs::read_dir(scenarios())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json") && p.file_name().is_some_and(|n| n != "genesis.json")
        })
        .collect();
    files.sort();
    files
}

#[test]
fn bundled_scenarios_pass_and_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let files = scenario_files();
    assert!(files.len() >= 4);
    for file in files {
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        for out in [&a, &b] {
            let res = velocity(&["run", "--scenario", file.to_str().unwrap(), "--out", out.to_str().unwrap()]);
            let text = String::from_utf8_lossy(&res.stdout);
            assert!(res.status.success(), "{}: {text}{}", file.display(), String::from_utf8_lossy(&res.stderr));
            assert!(!text.contains("FAIL"), "{text}");
        }
        let log = fs::read(&a).unwrap();
        assert!(!log.is_empty());
        assert_eq!(log, fs::read(&b).unwrap(), "{}", file.display());
    }
}

#[test]
fn json_outcome_and_seed_override() {
    let dir = TempDir::new().unwrap();
    let scenario = scenarios().join("random-walk.json");
    let out = dir.path().join("log.jsonl");
    let run = |seed: &str| {
        let res = velocity(&[
            "run",
            "--scenario",
            scenario.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
            "--json",
        ]);
        assert!(res.status.success());
        (stdout_json(&res), fs::read_to_string(&out).unwrap())
    };
    let (outcome, first) = run("1");
    assert_eq!(outcome["name"], "random-walk");
    assert!(outcome["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    let (_, second) = run("2");
    assert_ne!(first, second);

    let flat = scenarios().join("demo-flat.json");
    let res = velocity(&["run", "--scenario", flat.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn tick_file_override() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("log.jsonl");
    let res = velocity(&[
        "run",
        "--scenario",
        scenarios().join("demo-flat.json").to_str().unwrap(),
        "--ticks",
        scenarios().join("ticks-1000s.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--json",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let outcome = stdout_json(&res);
    assert_eq!(outcome["sweeps"][0]["settled"], 1);
    let missing = velocity(&[
        "run",
        "--scenario",
        scenarios().join("demo-flat.json").to_str().unwrap(),
        "--ticks",
        "/nonexistent.csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn attack_variants() {
    for depth in ["1", "5", "10"] {
        let patched = stdout_json(&velocity(&["attack", "--fixture", "reentrant", "--depth", depth, "--patched"]));
        assert_eq!(patched["gain"], 0, "depth {depth}");
        assert_eq!(patched["settled"], true);
        let vulnerable = stdout_json(&velocity(&["attack", "--fixture", "reentrant", "--depth", depth, "--vulnerable"]));
        assert!(vulnerable["gain"].as_i64().unwrap() > 0, "depth {depth}");
    }
    let throwing = stdout_json(&velocity(&["attack", "--fixture", "throwing", "--patched"]));
    assert_eq!(throwing["settled"], false);
    assert_eq!(throwing["gain"], 0);

    assert_eq!(velocity(&["attack", "--fixture", "reentrant"]).status.code(), Some(2));
    assert_eq!(velocity(&["attack", "--fixture", "throwing", "--depth", "2", "--patched"]).status.code(), Some(2));
    assert_ne!(velocity(&["attack", "--fixture", "bogus", "--patched"]).status.code(), Some(0));
}

#[test]
fn generated_walk_replays_faithfully() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("walk.csv");
    let gen = |path: &Path| {
        let res = pricefeed(&[
            "gen-walk",
            "--seed",
            "9",
            "--seconds",
            "1000",
            "--start",
            "13.50",
            "--vol",
            "0.001",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        fs::read_to_string(path).unwrap()
    };
    let text = gen(&csv);
    assert_eq!(text, gen(&dir.path().join("again.csv")));
    assert_eq!(text.lines().count(), 1001);
    assert!(text.starts_with("timestamp,usdbtc,btceth,btcetc,btcdoge\n"));

    let stdout = pricefeed(&["gen-walk", "--seed", "9", "--seconds", "1000", "--start", "13.50", "--vol", "0.001"]);
    assert_eq!(String::from_utf8(stdout.stdout).unwrap(), text);

    let log = dir.path().join("replay.jsonl");
    let res = pricefeed(&[
        "replay",
        "--ticks",
        csv.to_str().unwrap(),
        "--genesis",
        scenarios().join("genesis.json").to_str().unwrap(),
        "--out",
        log.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = stdout_json(&res);
    assert_eq!(summary["mismatches"], Value::Array(vec![]));
    let (first, last) = (summary["first_block"].as_u64().unwrap(), summary["last_block"].as_u64().unwrap());
    assert_eq!((first, last), (1, 83));
    let set_prices = fs::read_to_string(&log)
        .unwrap()
        .lines()
        .filter(|l| l.contains("\"setPrice\"") && l.contains("\"status\":\"Success\""))
        .count();
    assert_eq!(set_prices as u64, last - first + 1);

    let capped = stdout_json(&pricefeed(&[
        "replay",
        "--ticks",
        csv.to_str().unwrap(),
        "--genesis",
        scenarios().join("genesis.json").to_str().unwrap(),
        "--blocks",
        "10",
    ]));
    assert_eq!(capped["blocks"], 10);
    assert_eq!(capped["last_block"], 9);
}

#[test]
fn bad_pricefeed_inputs() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    let mut csv = String::from("timestamp,usdbtc,btceth,btcetc,btcdoge\n10,1.00,1.00,1.00,1.00\n");
    for t in 13..60 {
        csv.push_str(&format!("{t},1.00,1.00,1.00,1.00\n"));
    }
    fs::write(&bad, csv).unwrap();
    let genesis = scenarios().join("genesis.json");
    let strict = pricefeed(&["replay", "--ticks", bad.to_str().unwrap(), "--genesis", genesis.to_str().unwrap()]);
    assert_eq!(strict.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("gap"));
    let lenient = pricefeed(&[
        "replay",
        "--ticks",
        bad.to_str().unwrap(),
        "--genesis",
        genesis.to_str().unwrap(),
        "--lenient",
    ]);
    assert!(lenient.status.success(), "{}", String::from_utf8_lossy(&lenient.stderr));

    let zero = pricefeed(&["gen-walk", "--seed", "1", "--seconds", "0", "--start", "1.00", "--vol", "0.1"]);
    assert_eq!(zero.status.code(), Some(2));
    let price = pricefeed(&["gen-walk", "--seed", "1", "--seconds", "5", "--start", "1.234", "--vol", "0.1"]);
    assert_eq!(price.status.code(), Some(2));
}
