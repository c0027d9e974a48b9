use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn disc_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disc-lab")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn strip_wall_time(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time_ms");
            map.values_mut().for_each(strip_wall_time);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

#[test]
fn brute_on_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "tri.txt", "3 3\n1 2\n2 3\n1 3\n");
    let out = disc_lab(&["solve", &input, "--algo", "brute", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["report_version"], 1);
    assert_eq!(report["outcome"]["achieved_disc"], 2);
    assert_eq!(report["instance"]["n"], 3);
    assert_eq!(report["algorithm"]["name"], "brute");
}

#[test]
fn beck_fiala_on_generated_degree_two_instance() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bd.txt");
    let input = input.to_str().unwrap();
    let gen = disc_lab(&["gen", "--kind", "bounded-degree", "--n", "40", "--m", "25", "--t", "2", "--seed", "7", "-o", input]);
    assert_eq!(gen.status.code(), Some(0));
    let out = disc_lab(&["solve", input, "--algo", "beck-fiala", "--verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert!(report["outcome"]["achieved_disc"].as_u64().unwrap() <= 3);
    assert_eq!(report["instance"]["max_degree"], 2);
    assert_eq!(report["verification"]["matches"], true);
}

#[test]
fn lm_reports_reproduce_from_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let gen = disc_lab(&["gen", "--kind", "random", "--n", "24", "--m", "24", "--p", "0.5", "--seed", "3"]);
    let input = write(dir.path(), "r.txt", std::str::from_utf8(&gen.stdout).unwrap());
    let run = || {
        let out = disc_lab(&["solve", &input, "--seed", "11", "--json"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let mut v = json(&out);
        strip_wall_time(&mut v);
        v
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a["algorithm"]["name"], "lm");
    assert_eq!(a["algorithm"]["seed"], 11);
    assert!(a["outcome"]["bound_satisfied"].as_bool().unwrap());
    assert_eq!(a["outcome"]["coloring"].as_array().unwrap().len(), 24);
}

#[test]
fn verify_compares_with_the_optimum_on_small_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "s.txt", "# five points\n5 3\n1 2 3\n3 4 5\n1 5\n");
    let out = disc_lab(&["solve", &input, "--verify", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    let optimum = report["verification"]["optimum"].as_u64().unwrap();
    assert!(report["outcome"]["achieved_disc"].as_u64().unwrap() >= optimum);
}

#[test]
fn text_mode_is_human_readable() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "tri.txt", "3 3\n1 2\n2 3\n1 3\n");
    let out = disc_lab(&["solve", &input, "--algo", "beck-fiala", "--text"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("disc       "), "{text}");
    assert!(serde_json::from_str::<Value>(&text).is_err());
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.txt", "3 2\n1 x\n\n");
    let out = disc_lab(&["solve", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let missing = dir.path().join("nope.txt");
    assert_eq!(disc_lab(&["solve", missing.to_str().unwrap()]).status.code(), Some(1));

    let members: Vec<String> = (1..=21).map(|i| i.to_string()).collect();
    let big = format!("21 1\n{}\n", members.join(" "));
    let big = write(dir.path(), "big.txt", &big);
    assert_eq!(disc_lab(&["solve", &big, "--algo", "brute"]).status.code(), Some(1));

    let tri = write(dir.path(), "tri.txt", "3 3\n1 2\n2 3\n1 3\n");
    assert_eq!(disc_lab(&["solve", &tri, "--algo", "brute", "--delta", "0.05"]).status.code(), Some(1));
    assert_eq!(disc_lab(&["gen", "--kind", "random", "--n", "4", "--m", "4"]).status.code(), Some(1));
}

#[test]
fn gen_output_is_deterministic_and_parseable() {
    let a = disc_lab(&["gen", "--kind", "random", "--n", "10", "--m", "6", "--p", "0.3", "--seed", "5"]);
    let b = disc_lab(&["gen", "--kind", "random", "--n", "10", "--m", "6", "--p", "0.3", "--seed", "5"]);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("# random"));
    assert_eq!(text.lines().nth(1), Some("10 6"));
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn bench_reports_claims_and_ignores_thread_count() {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_disc-lab"))
            .args(["bench", "--suite", "beck-fiala", "--trials", "16", "--seed", "4", "--json"])
            .env("DISC_LAB_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        let mut v = json(&out);
        strip_wall_time(&mut v);
        v
    };
    let one = run("1");
    assert_eq!(one["passed"], true);
    assert_eq!(one["results"]["violations"], 0);
    assert_eq!(one["claims"][0]["status"], "pass");
    assert_eq!(one, run("2"));
}

#[test]
fn bad_thread_setting_is_an_input_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_disc-lab"))
        .args(["bench", "--suite", "rounding", "--trials", "100"])
        .env("DISC_LAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn rounding_bench_in_text_mode() {
    let out = disc_lab(&["bench", "--suite", "rounding", "--trials", "2000", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 4, "{text}");
}
