use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bianchi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bianchi"))
        .args(args)
        .env_remove("BIANCHI_THREADS")
        .output()
        .expect("run bianchi")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json output")
}

fn appendix() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/appendix.csv").display().to_string()
}

#[test]
fn sieve_csv_small_range() {
    let o = bianchi(&["sieve", "--max-d", "100", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d");
    assert_eq!(lines.len(), 34);
    assert_eq!(&lines[1..4], ["1", "2", "3"]);
    assert_eq!(*lines.last().unwrap(), "95");
}

#[test]
fn sieve_golden_and_mismatch() {
    let o = bianchi(&["sieve", "--max-d", "20000", "--golden", &appendix(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["golden"]["match"], Value::Bool(true));
    assert_eq!(v["count"], 89);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    let text = std::fs::read_to_string(appendix()).unwrap().replace("15015,E2", "15017,E2");
    std::fs::write(&bad, text).unwrap();
    let o = bianchi(&["sieve", "--max-d", "20000", "--golden", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sieve_checkpoint_resume_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck.csv");
    let args = ["sieve", "--max-d", "60000", "--format", "json", "--checkpoint", ck.to_str().unwrap()];
    let a = bianchi(&args);
    assert!(a.status.success());
    assert!(std::fs::read_to_string(&ck).unwrap().starts_with("d,status,first_witness\n"));
    let b = bianchi(&args);
    assert!(b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let plain = bianchi(&["sieve", "--max-d", "60000", "--format", "json"]);
    assert_eq!(a.stdout, plain.stdout);
}

#[test]
fn sieve_output_independent_of_threads() {
    let one = bianchi(&["sieve", "--max-d", "50000", "--threads", "1"]);
    let four = Command::new(env!("CARGO_BIN_EXE_bianchi"))
        .args(["sieve", "--max-d", "50000"])
        .env("BIANCHI_THREADS", "4")
        .output()
        .unwrap();
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn sieve_rejects_zero_and_bad_checkpoint() {
    assert_eq!(bianchi(&["sieve", "--max-d", "0"]).status.code(), Some(2));
    let o = bianchi(&["sieve", "--max-d", "100", "--checkpoint", "/nonexistent-dir/x/ck.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_examples() {
    let o = bianchi(&["check", "1:1:0:0:-6", "--group", "gamma", "--format", "json"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["search"]["kind"], "not_embedded");
    assert_eq!(v["search"]["witness"], "[[1, 1], [0, 1]]");
    assert_eq!(v["search"]["trace"], "11/6");
    assert_eq!(v["orientation"]["kind"], "orientation_reversing");

    let o = bianchi(&["check", "13:13:0:8:13", "--group", "gamma", "--format", "json"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["search"]["kind"], "inconclusive");
    assert_eq!(v["dset_necessary"], true);
    assert_eq!(v["discriminant_bound"], true);
    assert_eq!(v["closed"], "closed");
    assert_eq!(v["embedded"]["kind"], "embedded_congruence");
    assert_eq!(v["embedded"]["modulus"], 169);

    let o = bianchi(&["check", "1:1:0:0:-6", "--group", "gamma0:21", "--format", "csv"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("field,value\n"));
}

#[test]
fn check_usage_errors() {
    assert_eq!(bianchi(&["check", "1:1:0:0"]).status.code(), Some(2));
    assert_eq!(bianchi(&["check", "1:1:1:0:-6"]).status.code(), Some(2));
    assert_eq!(bianchi(&["check", "1:1:0:0:-6", "--group", "weird"]).status.code(), Some(2));
    assert_eq!(bianchi(&["check", "1:1:0:0:6"]).status.code(), Some(2));
    assert_eq!(bianchi(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn surfaces_examples() {
    let o = bianchi(&["surfaces", "--d", "13", "--format", "json"]);
    assert!(o.status.success());
    let v = json(&o);
    let items = v["surfaces"].as_array().unwrap();
    assert!(!items.is_empty());
    for s in items {
        assert_eq!(s["embedded"]["kind"], "embedded_congruence");
        assert_eq!(s["closed"], "closed");
        assert_eq!(s["search"]["kind"], "inconclusive");
    }
    assert!(v["distinct"]["lower"].as_u64().unwrap() >= 1);

    let v = json(&bianchi(&["surfaces", "--d", "21", "--format", "json"]));
    assert!(v["surfaces"].as_array().unwrap().is_empty());
    assert_eq!(v["note"], "d in E1");

    assert_eq!(bianchi(&["surfaces", "--d", "12"]).status.code(), Some(2));
}

#[test]
fn tables_report_and_mutation() {
    let o = bianchi(&["tables", "--format", "json"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["diffs"].as_array().unwrap().len(), 0);
    assert_eq!(v["cuspidal_subset"], true);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    let text = std::fs::read_to_string(appendix()).unwrap().replace("21,E1,4,Z2xZ2", "21,E1,4,Z4");
    std::fs::write(&bad, text).unwrap();
    let o = bianchi(&["tables", "--golden", bad.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("21,structure,Z4,Z2xZ2"));

    let missing = dir.path().join("missing.csv");
    assert_eq!(bianchi(&["tables", "--golden", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn classgroup_and_dset() {
    let v = json(&bianchi(&["classgroup", "--d", "14", "--format", "json"]));
    assert_eq!(v["h"], 4);
    assert_eq!(v["structure"], "Z4");
    assert_eq!(v["order_four"], true);

    let v = json(&bianchi(&["dset", "--d", "13", "--format", "json"]));
    assert_eq!(v["first_witness"], 3);
    let v = json(&bianchi(&["dset", "--d", "21", "--format", "json"]));
    assert_eq!(v["verdict"]["verdict"], "NoClosedEmbedded");
    let o = bianchi(&["dset", "--d", "30", "--format", "csv"]);
    assert_eq!(stdout(&o), "r,kind\n6,shared_factor\n");
}

#[test]
fn picard_subcommand() {
    let o = bianchi(&["picard", "--disc", "3", "--height", "4", "--image-prime", "2:1", "--level", "1:1", "--format", "json"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["image"]["order"], 60);
    assert_eq!(v["level"]["verdict"], "NoClosedEmbedded");
    assert_eq!(v["search"]["kind"], "not_embedded");
    assert_eq!(bianchi(&["picard", "--disc", "6", "--variant", "one"]).status.code(), Some(2));
    assert_eq!(bianchi(&["picard", "--disc", "3", "--level", "3:0"]).status.code(), Some(2));
}

#[test]
fn text_output_is_deterministic() {
    let a = bianchi(&["surfaces", "--d", "30", "--limit", "3"]);
    let b = bianchi(&["surfaces", "--d", "30", "--limit", "3", "--threads", "2"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(a.stderr.is_empty());
    let t = bianchi(&["surfaces", "--d", "30", "--limit", "3", "--timing"]);
    assert_eq!(a.stdout, t.stdout);
    assert!(String::from_utf8_lossy(&t.stderr).contains("elapsed"));
}
