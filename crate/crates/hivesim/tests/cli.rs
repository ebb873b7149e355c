use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hivesim"))
}

fn follow() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/follow.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn same_seed_gives_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a.csv"),
        dir.path().join("b.csv"),
        dir.path().join("c.csv"),
    );
    let f = follow();
    for (out, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        let o = run(&[
            "run",
            "--scenario",
            p(&f),
            "--seed",
            seed,
            "--ticks",
            "20000",
            "--metrics",
            p(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b, c) = (fs::read(a).unwrap(), fs::read(b).unwrap(), fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("time_s,collisions,radio_bytes,drops,a1_x_m,"));
    assert_eq!(text.lines().count(), 1 + 20);
}

#[test]
fn jsonl_metrics_by_extension() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.jsonl");
    let o = run(&[
        "run",
        "--scenario",
        p(&follow()),
        "--ticks",
        "3000",
        "--metrics",
        p(&out),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(out).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2]["time_s"], 3.0);
    assert_eq!(rows[0]["agents"].as_array().unwrap().len(), 4);
}

#[test]
fn replay_detects_identity_and_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let f = follow();
    assert!(
        run(&["run", "--scenario", p(&f), "--ticks", "5000", "--metrics", p(&out)])
            .status
            .success()
    );
    let same = run(&["replay", "--scenario", p(&f), "--ticks", "5000", "--metrics", p(&out)]);
    assert_eq!(same.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&same.stdout).contains("identical"));
    let other = run(&[
        "replay",
        "--scenario",
        p(&f),
        "--ticks",
        "5000",
        "--seed",
        "99",
        "--metrics",
        p(&out),
    ]);
    assert_eq!(other.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&other.stdout).contains("differs at line"));
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "unknown_key.json",
            r#"{"agents": [{"id": 1, "pose": {"x_m": 0, "y_m": 0}}], "speed": 3}"#,
        ),
        (
            "dup.json",
            r#"{"agents": [{"id": 1, "pose": {"x_m": 0, "y_m": 0}}, {"id": 1, "pose": {"x_m": 1, "y_m": 0}}]}"#,
        ),
        ("syntax.json", r#"{"agents": [ "#),
        (
            "gain.json",
            r#"{"steer": {"k_attract": -1}, "agents": [{"id": 1, "pose": {"x_m": 0, "y_m": 0}}]}"#,
        ),
    ];
    for (name, text) in cases {
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        let o = run(&["run", "--scenario", p(&path), "--ticks", "10"]);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
    let missing = run(&["run", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(run(&["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["bench", "bandwidth", "--size", "3"]).status.code(), Some(2));
}

#[test]
fn stdin_script_drives_a_headless_run() {
    let f = follow();
    let script = concat!(
        r#"{"at_s": 1, "type": "call_action", "target": 2, "name": "stop", "req": 1}"#,
        "\n",
        r#"{"type": "list_agents", "req": 2}"#,
        "\n",
        r#"{"at_s": 1.5, "type": "call_action", "target": 2, "name": "warp"}"#,
        "\n"
    );
    let o = run_stdin(&["run", "--scenario", p(&f), "--ticks", "2000", "--stdin"], script);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let replies: Vec<serde_json::Value> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let types: Vec<&str> = replies.iter().map(|r| r["type"].as_str().unwrap()).collect();
    assert_eq!(types, ["agents", "ack", "action_result", "error"]);
    assert_eq!(replies[1]["tick"], 1000);
    assert_eq!(replies[2]["tick"], 1026);

    let bad = run_stdin(
        &["run", "--scenario", p(&f), "--ticks", "10", "--stdin"],
        "{\"type\":\"list_agents\"}\n{oops\n",
    );
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 2"));
}

#[test]
fn bench_csvs_have_their_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 5] = [
        (&["distance", "--seed", "1"], "truth,measured,error"),
        (&["angle", "--seed", "1"], "truth,measured,error"),
        (&["refresh", "--max-slots", "8"], "n_slots,hz"),
        (
            &["bandwidth", "--n", "3", "--duration-s", "3"],
            "window_start_s,measured_bps,predicted_bps",
        ),
        (
            &["latency", "--rate", "100", "--rate", "200"],
            "rate_hz,offered,delivered,dropped,loss_fraction,mean_latency_ms,max_latency_ms",
        ),
    ];
    for (i, (args, header)) in cases.into_iter().enumerate() {
        let out = dir.path().join(format!("{i}.csv"));
        let mut full = vec!["bench"];
        full.extend_from_slice(args);
        full.extend_from_slice(&["--out", p(&out)]);
        let o = run(&full);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let text = fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().next(), Some(header), "{args:?}");
        assert!(text.lines().count() > 2);
    }
    let refresh = fs::read_to_string(dir.path().join("2.csv")).unwrap();
    let row: Vec<&str> = refresh.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "2");
    assert!((row[1].parse::<f64>().unwrap() - 28.0).abs() < 1.0);
    let distance = fs::read_to_string(dir.path().join("0.csv")).unwrap();
    assert_eq!(distance.lines().count(), 1 + 18 * 200);
}
