use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chanlint::ingest::serialize_scenario;
use chanlint::report::ReportDocument;
use chanlint::Scenario;

fn core_fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chanlint")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_fixture_reports_and_exits_one() {
    let f = core_fixture("fixture_f.json");
    let o = run(&["analyze", path_str(&f)]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("== insecure communications (3) =="), "{text}");
    assert!(text.contains("[AFFINITY]"));
}

#[test]
fn analyze_empty_scenario_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("empty.json");
    std::fs::write(&f, serialize_scenario(&Scenario::new())).unwrap();
    let o = run(&["analyze", path_str(&f)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("anomalies: 0"));
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    for args in [
        vec!["analyze", path_str(&bad)],
        vec!["analyze", "/nonexistent/scenario.json"],
        vec!["analyze", path_str(&bad), "--format", "pdf"],
        vec!["generate", "--pis", "10", "--conflicts", "10", "--entities", "2"],
        vec!["bogus"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn generate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = run(&[
            "generate", "--pis", "100", "--conflicts", "100", "--entities", "100", "--seed", "7", "--out",
            path_str(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let o = run(&["analyze", path_str(&a)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn json_report_reparses() {
    let f = core_fixture("fixture_f.json");
    let o = run(&["analyze", path_str(&f), "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let doc = ReportDocument::from_json(&stdout(&o)).unwrap();
    assert_eq!(doc.anomalies.len(), 11);
    assert_eq!(doc.schema_version, 1);
}

#[test]
fn dot_bundle_is_written_to_a_directory() {
    let f = core_fixture("fixture_f.json");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dots");
    let o = run(&["analyze", path_str(&f), "--format", "dot-bundle", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let n = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "dot"))
        .count();
    assert_eq!(n, 11);
    assert!(out.join("index.txt").exists());
}

#[test]
fn map_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let s2s = dir.path().join("s2s.json");
    let o = run(&["map", "strongswan", path_str(&core_fixture("listings/net_to_net.conf")), "--out", path_str(&s2s)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("(192.168.0.1, 192.168.0.2, IPsec, (5,5,5), (10.1.0.0/16, *, 10.2.0.0/16, *, *), ∅)"));
    let o = run(&["analyze", path_str(&s2s)]);
    assert_eq!(o.status.code(), Some(0));

    let vpn = dir.path().join("vpn.json");
    let o = run(&[
        "map",
        "openvpn",
        path_str(&core_fixture("listings/openvpn_client.conf")),
        path_str(&core_fixture("listings/openvpn_server.conf")),
        "--local-address",
        "192.168.1.100",
        "--out",
        path_str(&vpn),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("(192.168.1.100:*, 192.168.1.1:1194, TLS, (5,5,5), *, ∅)"));

    let o = run(&["map", "ssh", path_str(&core_fixture("listings/ssh_client.conf"))]);
    assert_eq!(o.status.code(), Some(2), "the client address is required");
}

#[test]
fn custom_cipher_mapping() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("weak.conf");
    std::fs::write(
        &conf,
        "remote 10.0.0.1 1194\ncipher BF-CBC\nauth SHA1\n",
    )
    .unwrap();
    let o = run(&["map", "openvpn", path_str(&conf), "--local-address", "10.0.0.2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "map",
        "openvpn",
        path_str(&conf),
        "--local-address",
        "10.0.0.2",
        "--cipher",
        "bf+sha1=1,1,1",
        "--out",
        path_str(&dir.path().join("weak.json")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("TLS, (1,1,1)"));
}

#[test]
fn bench_reports_both_phases() {
    let o = run(&["bench", "--sweep", "pis", "--fixed", "60", "--points", "10,20,30", "--reps", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("pre-computation") && text.contains("analysis"));
    assert_eq!(text.lines().filter(|l| l.trim_start().starts_with("60 ")).count(), 3);
    let o = run(&["bench", "--sweep", "entities", "--fixed", "20", "--points", "60,80", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 6);
}
