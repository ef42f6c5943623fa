use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mbqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbqc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

fn json_of(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.push("--json");
    let o = mbqc(&full);
    assert!(
        o.status.code() == Some(0) || args[0] == "selftest",
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_str(&stdout(&o)).expect("valid json")
}

fn schema_for(report: &Value) -> Value {
    let id = report["schema"].as_str().expect("schema id");
    let name = id
        .strip_prefix("mbqc/")
        .and_then(|s| s.strip_suffix("/v1"))
        .expect("versioned id");
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.v1.json"));
    serde_json::from_str(&std::fs::read_to_string(&path).expect("schema file exists"))
        .expect("schema parses")
}

fn assert_valid(report: &Value) {
    let schema = schema_for(report);
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(report)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{}: {errors:#?}", report["schema"]);
}

#[test]
fn w_geometric_measure_matches_closed_form() {
    let r = json_of(&["measure", "geometric", "--family", "w", "--n", "6"]);
    let v = r["results"]["result"]["value"].as_f64().unwrap();
    assert!((v - (1.0 - (5.0f64 / 6.0).powi(5))).abs() < 1e-6, "{v}");
    assert!(r["results"]["result"].get("witness").is_none());
    let with = json_of(&[
        "measure",
        "geometric",
        "--family",
        "w",
        "--n",
        "3",
        "--witness",
    ]);
    assert!(with["results"]["result"]["witness"]["product"].is_array());
}

#[test]
fn w_family_is_ruled_out_at_small_eta() {
    let r = json_of(&["criteria", "--family", "w", "--eta", "1e-3", "--delta", "0"]);
    assert_eq!(r["results"]["decision"], "ruled_out");
    assert!(!r["results"]["trace"].as_array().unwrap().is_empty());
    let later = json_of(&[
        "criteria", "--family", "w", "--eta", "1.1e-3", "--delta", "0",
    ]);
    assert_eq!(later["results"]["decision"], "not_ruled_out");
}

#[test]
fn unbounded_width_verdicts_serialize_infinity_as_null() {
    let r = json_of(&["criteria", "--family", "ghz", "--measure", "srw"]);
    assert_eq!(r["results"]["decision"], "ruled_out");
    assert!(r["results"]["required_value"].is_null());
    assert_valid(&r);
}

#[test]
fn exit_codes() {
    assert_eq!(mbqc(&["--help"]).status.code(), Some(0));
    assert_eq!(mbqc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        mbqc(&[
            "measure",
            "geometric",
            "--family",
            "w",
            "--n",
            "4",
            "--bogus"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        mbqc(&["eps-bound", "--formula", "star", "--eta", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        mbqc(&["eps-bound", "--formula", "closed", "--eta", "0.01"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(mbqc(&["percolate", "--L", "16"]).status.code(), Some(2));
    assert_eq!(
        mbqc(&["measure", "geometric", "--family", "cluster2d", "--n", "5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        mbqc(&[
            "locc",
            "run",
            "--state",
            "/nonexistent.json",
            "--protocol",
            "/nonexistent.json"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        mbqc(&[
            "criteria",
            "--family",
            "w",
            "--measure",
            "ewd",
            "--check",
            "det",
            "--eta",
            "0.1"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(mbqc(&["--seed", "abc", "selftest"]).status.code(), Some(2));
}

#[test]
fn oversized_sweeps_are_refused() {
    let o = mbqc(&["sweep", "star", "--eta", "1e-6:1:100001"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("refused"));
    let o = mbqc(&[
        "sweep",
        "bound",
        "--eg",
        "0.1:1:1000",
        "--eta",
        "1e-6:0.1:1000",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        mbqc(&["sweep", "star", "--eta", "1e-6:1:1000"])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn reruns_are_byte_identical() {
    let runs: [&[&str]; 4] = [
        &[
            "percolate",
            "--L",
            "24",
            "--p",
            "0.6",
            "--trials",
            "300",
            "--seed",
            "7",
            "--json",
        ],
        &[
            "deformed",
            "--lambda",
            "0.7",
            "--L",
            "32",
            "--samples",
            "20",
            "--trials",
            "50",
            "--csv",
        ],
        &[
            "locc",
            "stability",
            "--mu",
            "0.05",
            "--trials",
            "12",
            "--seed",
            "3",
            "--json",
        ],
        &[
            "measure",
            "geometric",
            "--family",
            "ghz",
            "--n",
            "4",
            "--witness",
            "--json",
        ],
    ];
    for args in runs {
        let a = mbqc(args);
        let b = mbqc(args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        let mut one = args.to_vec();
        one.extend(["--threads", "1"]);
        assert_eq!(a.stdout, mbqc(&one).stdout, "{args:?} single-threaded");
    }
}

#[test]
fn seeds_are_recorded() {
    let d = json_of(&["percolate", "--L", "8", "--p", "0.5", "--trials", "10"]);
    assert_eq!(d["config"]["seed_source"], "default");
    let seed = d["config"]["seed"].as_u64().unwrap();
    assert_eq!(d["results"]["seed"].as_u64(), Some(seed));
    let f = json_of(&[
        "percolate",
        "--L",
        "8",
        "--p",
        "0.5",
        "--trials",
        "10",
        "--seed",
        "99",
    ]);
    assert_eq!(f["config"]["seed"], 99);
    let r = json_of(&[
        "percolate",
        "--L",
        "8",
        "--p",
        "0.5",
        "--trials",
        "10",
        "--seed",
        "random",
    ]);
    assert_eq!(r["config"]["seed_source"], "random");
    let replay_seed = r["config"]["seed"].as_u64().unwrap().to_string();
    let replay = json_of(&[
        "percolate",
        "--L",
        "8",
        "--p",
        "0.5",
        "--trials",
        "10",
        "--seed",
        &replay_seed,
    ]);
    assert_eq!(replay["results"], r["results"]);
}

#[test]
fn csv_floats_round_trip() {
    let o = mbqc(&["sweep", "star", "--eta", "1e-9:0.3:50", "--log", "--csv"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eta,value,clamped,validity_ok"));
    let j = json_of(&["sweep", "star", "--eta", "1e-9:0.3:50", "--log"]);
    let rows = j["results"]["rows"].as_array().unwrap();
    let mut count = 0;
    for (line, row) in lines.zip(rows) {
        let cells: Vec<&str> = line.split(',').collect();
        let eta: f64 = cells[0].parse().unwrap();
        assert_eq!(eta.to_bits(), row[0].as_f64().unwrap().to_bits());
        let mantissa = cells[1].split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17, "{}", cells[1]);
        count += 1;
    }
    assert_eq!(count, 50);
}

#[test]
fn star_sweep_decreases_from_one() {
    let j = json_of(&["sweep", "star", "--eta", "1e-12:0.4:40", "--log"]);
    let values: Vec<f64> = j["results"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r[1].as_f64().unwrap())
        .collect();
    assert!(values[0] > 0.999);
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn frontier_sweep_is_a_hyperbola_for_trace_distance() {
    let j = json_of(&[
        "sweep",
        "frontier",
        "--eps",
        "0.01",
        "--delta",
        "0.02",
        "--mu",
        "0.01:0.1:4",
        "--points",
        "10",
    ]);
    for row in j["results"]["rows"].as_array().unwrap() {
        let (mu, e, d) = (
            row[0].as_f64().unwrap(),
            row[1].as_f64().unwrap(),
            row[2].as_f64().unwrap(),
        );
        if d < 1.0 {
            assert!((e * d - (0.03 + mu)).abs() < 1e-12);
        }
    }
}

#[test]
fn out_path_and_format_words() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bound.json");
    let o = mbqc(&[
        "eps-bound",
        "--eg",
        "0.5",
        "--eta",
        "0.01",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(written["results"]["bounds"].as_array().unwrap().len(), 3);
    assert_valid(&written);
    let csv = stdout(&mbqc(&[
        "criteria", "frontier", "--eps", "0", "--delta", "0", "--mu", "0.05", "--out", "csv",
    ]));
    assert!(csv.starts_with("eps_prime,delta_prime,delta_prime_eta\n"));
}

#[test]
fn locc_run_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let state = dir.path().join("bell.json");
    std::fs::write(
        &state,
        format!(r#"{{"n":2,"amplitudes":[[{h},0],[0,0],[0,0],[{h},0]]}}"#),
    )
    .unwrap();
    let protocol = dir.path().join("p.json");
    std::fs::write(
        &protocol,
        r#"{"steps":[{"qubit":0,"theta":0,"phi":0}],"outputs":[1],"corrections":{"1":"X"}}"#,
    )
    .unwrap();
    let r = json_of(&[
        "locc",
        "run",
        "--state",
        state.to_str().unwrap(),
        "--protocol",
        protocol.to_str().unwrap(),
    ]);
    assert_valid(&r);
    let leaves = r["results"]["tree"]["leaves"].as_array().unwrap();
    assert_eq!(leaves.len(), 2);
    for l in leaves {
        assert!((l["probability"].as_f64().unwrap() - 0.5).abs() < 1e-12);
        // the correction maps both branches onto |0⟩
        let amps = &l["residual"]["terms"][0][1]["amplitudes"];
        assert!(
            (amps[0][0].as_f64().unwrap().abs() - 1.0).abs() < 1e-12,
            "{amps}"
        );
    }
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n\": 1}").unwrap();
    assert_eq!(
        mbqc(&[
            "locc",
            "run",
            "--state",
            bad.to_str().unwrap(),
            "--protocol",
            protocol.to_str().unwrap()
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn every_report_matches_its_schema() {
    let runs: Vec<Vec<&str>> = vec![
        vec!["measure", "geometric", "--family", "w", "--n", "5"],
        vec![
            "measure",
            "srw",
            "--family",
            "cluster2d",
            "--n",
            "6",
            "--sup",
            "--witness",
        ],
        vec![
            "measure",
            "ewd",
            "--family",
            "cluster1d",
            "--n",
            "5",
            "--witness",
        ],
        vec![
            "eps-bound",
            "--eps",
            "0.1",
            "--distance",
            "bures",
            "--eg",
            "0.8",
        ],
        vec!["eps-bound", "--formula", "star", "--eta", "0.5"],
        vec![
            "criteria",
            "--family",
            "cluster2d",
            "--eps",
            "0.01",
            "--delta",
            "0.1",
        ],
        vec![
            "criteria",
            "--family",
            "cluster2d",
            "--measure",
            "srw",
            "--check",
            "efficiency",
        ],
        vec![
            "criteria",
            "frontier",
            "--eps",
            "0.01",
            "--delta",
            "0",
            "--mu",
            "0.02",
            "--distance",
            "bures",
        ],
        vec!["criteria", "threshold"],
        vec!["percolate", "--L", "16", "--p", "0.59", "--trials", "100"],
        vec!["percolate", "threshold", "--L", "8", "--trials", "50"],
        vec![
            "deformed",
            "--lambda",
            "0.8",
            "--L",
            "16",
            "--samples",
            "5",
            "--trials",
            "20",
        ],
        vec!["deformed", "--lambda", "0.3", "--samples", "0"],
        vec!["locc", "noisy-cluster", "--n", "4", "--p", "0.2"],
        vec![
            "locc",
            "noisy-cluster",
            "--n",
            "5",
            "--p",
            "0.05",
            "--patterns",
            "3",
        ],
        vec![
            "locc",
            "noisy-cluster",
            "--p",
            "0.1",
            "--grid",
            "--flip",
            "2",
        ],
        vec!["locc", "stability", "--mu", "0.1", "--trials", "5"],
        vec![
            "sweep",
            "bound",
            "--eg",
            "0.2:1:3",
            "--eta",
            "1e-6:1e-2:3",
            "--log",
        ],
        vec![
            "sweep",
            "percolate",
            "--L",
            "8",
            "--p",
            "0.4:0.8:3",
            "--trials",
            "40",
        ],
        vec![
            "sweep",
            "criteria",
            "--family",
            "ghz",
            "--eta",
            "1e-4:1e-1:4",
            "--delta",
            "0:0.5:3",
            "--log",
        ],
        vec!["selftest"],
    ];
    for args in runs {
        let r = json_of(&args);
        assert_eq!(
            r["command"]
                .as_str()
                .map(|c| r["schema"].as_str().unwrap().contains(c)),
            Some(true)
        );
        assert_valid(&r);
    }
}

#[test]
fn noisy_cluster_branches_stay_within_p() {
    let r = json_of(&[
        "locc",
        "noisy-cluster",
        "--n",
        "6",
        "--p",
        "0.2",
        "--patterns",
        "4",
    ]);
    let rep = &r["results"]["report"];
    assert_eq!(rep["pass"], true);
    for b in rep["branches"].as_array().unwrap() {
        assert!(b["distance"].as_f64().unwrap() <= 0.2 + 1e-9);
        assert!((b["probability"].as_f64().unwrap() - 1.0 / 32.0).abs() < 1e-12);
    }
}

#[test]
fn selftest_exit_code_tracks_its_table() {
    let o = mbqc(&["selftest", "--json"]);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let checks = r["results"]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 11);
    let failed = checks.iter().filter(|c| c["status"] == "fail").count();
    assert_eq!(r["results"]["failed"].as_u64(), Some(failed as u64));
    assert_eq!(o.status.code(), Some(if failed == 0 { 0 } else { 1 }));
    assert_eq!(checks[3]["status"], "skipped");
    let human = stdout(&mbqc(&["selftest"]));
    assert!(human.lines().nth(1).unwrap().starts_with("check"));
}

#[test]
fn schemas_reject_malformed_reports() {
    let good = json_of(&["criteria", "--family", "w", "--eta", "1e-3"]);
    let validator = jsonschema::validator_for(&schema_for(&good)).unwrap();
    assert!(validator.is_valid(&good));
    let mut missing = good.clone();
    missing["results"]
        .as_object_mut()
        .unwrap()
        .remove("decision");
    assert!(!validator.is_valid(&missing));
    let mut wrong = good.clone();
    wrong["results"]["decision"] = "maybe".into();
    assert!(!validator.is_valid(&wrong));
    let mut extra = good;
    extra["timing"] = 1.0.into();
    assert!(!validator.is_valid(&extra));
}
