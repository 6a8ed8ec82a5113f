use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn co2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_co2")).args(args).output().unwrap()
}

fn co2_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_co2"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn path(name: &str) -> String {
    corpus(name).display().to_string()
}

#[test]
fn sale_run_has_six_steps() {
    let out = co2(&["--json", "run", &path("sale_pcl.co2"), "--strategy", "first"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["steps"].as_array().unwrap().len(), 6);
    assert_eq!(v["stuck"], Value::Bool(true));
}

#[test]
fn trace_json_follows_the_schema() {
    let out = co2(&["--json", "run", &path("escrow_ccs.co2")]);
    let v = json(&out);
    for (i, s) in v["steps"].as_array().unwrap().iter().enumerate() {
        let o = s.as_object().unwrap();
        assert_eq!(o["step"], Value::from(i + 1));
        assert!(o["rule"].is_string() && o["state"].is_string());
        assert!(o["agents"].as_array().unwrap().iter().all(Value::is_string));
        for key in o.keys() {
            assert!(["step", "rule", "agents", "session", "label", "state"].contains(&key.as_str()), "{key}");
        }
        if o["rule"] == "Do" {
            assert!(o["label"].is_array() && o["session"].is_string());
        }
    }
}

#[test]
fn snake_oil_seller_is_dishonest() {
    let out = co2(&["--json", "honesty", &path("snakeoil_promise_ship.co2"), "--principal", "A"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    let r = &v[0];
    assert_eq!(r["principal"], "A");
    assert_eq!(r["verdict"], "dishonest");
    assert_eq!(r["session"], "s1");
    assert_eq!(r["obligations"], serde_json::json!(["ship"]));
    assert!(!r["witness"]["path"].as_array().unwrap().is_empty());
}

#[test]
fn bounds_make_honesty_inconclusive() {
    let out = co2(&["honesty", &path("sale_pcl.co2"), "--max-depth", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_co2"))
        .args(["honesty", &path("sale_pcl.co2")])
        .env("CO2_STATE_CAP", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn prove_sale_entailment() {
    let out = co2(&[
        "prove",
        "--contract",
        "A says ((B says pay) -> ship)",
        "--contract",
        "B says pay",
        "--goal",
        "(A says ship) /\\ (B says pay)",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("true"));
    let out = co2(&["prove", "--contract", "A says ((B says pay) -> ship)", "--goal", "A says ship"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ltl_and_encode() {
    let out = co2(&["--json", "ltl", "--contract", "A says (pay?.ship^) | B says (pay!)", "--formula", "<>(pay! /\\ <>ship^)"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"], Value::Bool(true));
    let out = co2(&["ltl", "--contract", "A says (pay?.ship^) | B says (pay!)", "--formula", "[]pay!"]);
    assert_eq!(out.status.code(), Some(1));
    let out = co2(&["--json", "encode", "--formula", "(A says ((B says b) -->> a)) /\\ (B says b)"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["definitions"].as_array().unwrap().len(), 2);
    assert!(v["contract"].as_str().unwrap().contains("A says"));
}

#[test]
fn theorems_on_a_small_corpus() {
    let out = co2(&["--json", "theorems", "--corpus", "40", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["agreeing"], Value::from(40));
}

#[test]
fn errors_exit_with_three_and_a_span() {
    let dir = std::env::temp_dir().join(format!("co2-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let empty = dir.join("empty.co2");
    std::fs::write(&empty, "").unwrap();
    let out = co2(&["run", &empty.display().to_string()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing system block"));
    let bad = dir.join("bad.co2");
    std::fs::write(&bad, "A[do x pay").unwrap();
    let out = co2(&["run", &bad.display().to_string()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.co2:1:2: error: unclosed `[`"));
    assert!(out.stdout.is_empty());
    let out = co2(&["run", &path("sale_pcl.co2"), "--strategy", "sometimes"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn interactive_runs_replay_exactly() {
    let script = "0\n0\n0\n0\n1\n0\n";
    let a = co2_stdin(&["--json", "run", &path("sale_pcl.co2"), "--strategy", "interactive"], script);
    let b = co2_stdin(&["--json", "run", &path("sale_pcl.co2"), "--strategy", "interactive"], script);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["choices"], serde_json::json!([0, 0, 0, 0, 1, 0]));
    assert_eq!(v["stuck"], Value::Bool(true));
    // the choices of a random run replay it
    let r = co2(&["--json", "run", &path("escrow_ccs.co2"), "--strategy", "random:11"]);
    let rv = json(&r);
    let script: String = rv["choices"].as_array().unwrap().iter().map(|c| format!("{c}\n")).collect();
    let i = co2_stdin(&["--json", "run", &path("escrow_ccs.co2"), "--strategy", "interactive"], &script);
    assert_eq!(json(&i)["steps"], rv["steps"]);
}

#[test]
fn corpus_matches_golden_files() {
    let golden = corpus("golden");
    let mut n = 0;
    for e in std::fs::read_dir(&golden).unwrap() {
        let g_path = e.unwrap().path();
        let g: Value = serde_json::from_str(&std::fs::read_to_string(&g_path).unwrap()).unwrap();
        let name = g_path.file_stem().unwrap().to_str().unwrap().to_string();
        let file = path(&format!("{name}.co2"));
        let run = json(&co2(&["--json", "run", &file, "--max-steps", "50"]));
        if let Some(steps) = g["steps"].as_u64() {
            let got = run["steps"].as_array().unwrap();
            assert_eq!(got.len() as u64, steps, "{name}");
            assert_eq!(got.last().unwrap()["state"], g["terminal"], "{name}");
            assert_eq!(run["stuck"], Value::Bool(true), "{name}");
        } else {
            assert_eq!(run["max_steps_reached"], Value::Bool(true), "{name}");
        }
        let verdicts = json(&co2(&["--json", "honesty", &file]));
        for v in verdicts.as_array().unwrap() {
            let p = v["principal"].as_str().unwrap();
            assert_eq!(v["verdict"], g["verdicts"][p], "{name} {p}");
        }
        assert_eq!(verdicts.as_array().unwrap().len(), g["verdicts"].as_object().unwrap().len(), "{name}");
        if let Some(a) = g.get("agree") {
            let out = json(&co2(&[
                "--json",
                "agree",
                &file,
                "--broker",
                a["broker"].as_str().unwrap(),
                "--phi",
                a["phi"].as_str().unwrap(),
            ]));
            let fused: Vec<Vec<String>> = out
                .as_array()
                .unwrap()
                .iter()
                .map(|w| {
                    w["fused"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .map(|c| {
                            let c = c.as_str().unwrap();
                            c[1..c.find('}').unwrap()].to_string()
                        })
                        .collect()
                })
                .collect();
            assert_eq!(serde_json::to_value(&fused).unwrap(), a["fused"], "{name}");
        }
        n += 1;
    }
    assert_eq!(n, 11);
}
