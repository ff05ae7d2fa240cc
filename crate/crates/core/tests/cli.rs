use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invoice-eval")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn synth_then_evaluate_identity_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["synth", "corpus", "-n", "4", "--seed", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    for f in ["manifest.json", "expected.json", "gt/doc-0000.json", "ledgers/doc-0003.json", "predictions/synthetic/doc-0002.json"] {
        assert!(dir.path().join("corpus").join(f).is_file(), "{f}");
    }

    let out = bin(&["evaluate", "corpus/manifest.json", "--gate", "accuracy=1.0"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["corpus_id"], "synth-3");
    assert_eq!(report["methods"]["synthetic"]["metrics"]["accuracy"]["overall"], 1.0);
    assert!(text(&out.stderr).contains("synthetic: accuracy 100.0%"));
}

#[test]
fn violated_gate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("errors.json"), r#"{"seed": 1, "counts": {"perturb_money": 2}}"#).unwrap();
    let out = bin(&["synth", "c", "-n", "2", "--seed", "1", "--errors", "errors.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let out = bin(&["evaluate", "c/manifest.json", "--gate", "accuracy=1", "--out", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stdout).contains("gate failed"));
    assert!(dir.path().join("r.json").is_file());
}

#[test]
fn report_rerenders_saved_json() {
    let dir = tempfile::tempdir().unwrap();
    bin(&["synth", "c", "-n", "2"], dir.path());
    let out = bin(&["evaluate", "c/manifest.json", "--out", "r.json", "--workers", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let out = bin(&["report", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let md = text(&out.stdout);
    assert!(md.starts_with("# Evaluation report: synth-0"));
    assert!(md.contains("| synthetic | 100 |"));
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(&["evaluate", "missing.json"], dir.path()).status.code(), Some(2));
    assert_eq!(bin(&["synth", "x", "-n", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(bin(&["evaluate"], dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    assert_eq!(bin(&["check", "bad.json"], dir.path()).status.code(), Some(2));
    assert_eq!(bin(&["report", "bad.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn check_reports_rules_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    bin(&["synth", "c", "-n", "1", "--seed", "9"], dir.path());
    let out = bin(&["check", "c/gt/doc-0000.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().count(), 5);
    assert!(stdout.lines().last().unwrap() == "verdict: pass");

    let gt = std::fs::read_to_string(dir.path().join("c/gt/doc-0000.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&gt).unwrap();
    let gross = v["invoice"]["gross_amount"]["amount"].as_str().unwrap().parse::<f64>().unwrap();
    v["invoice"]["gross_amount"]["amount"] = serde_json::Value::String(format!("{:.2}", gross + 1.0));
    std::fs::write(dir.path().join("broken.json"), v.to_string()).unwrap();
    let out = bin(&["check", "broken.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stdout).contains("R1_header_sum        fail"));
}

#[test]
fn all_absent_invoice_is_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.json"), "{}").unwrap();
    let out = bin(&["check", "empty.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text(&out.stdout).lines().last(), Some("verdict: not_applicable"));
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("errors.json"), r#"{"seed": 4, "counts": {"drop_field": 1, "duplicate_row": 1}}"#).unwrap();
    for name in ["a", "b"] {
        let out = bin(&["synth", name, "-n", "10", "--seed", "42", "--errors", "errors.json"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    }
    let a = tree(&dir.path().join("a"));
    assert_eq!(a.len(), 10 * 3 + 2);
    assert_eq!(a, tree(&dir.path().join("b")));
}

#[test]
fn fixture_gate_and_rerendered_markdown() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two_methods");
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture.join("manifest.json");
    let config = fixture.join("config.json");
    let (m, c) = (manifest.to_str().unwrap(), config.to_str().unwrap());

    let out = bin(&["evaluate", m, "--config", c, "--method", "docling", "--gate", "accuracy=0.9", "--out", "d.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stdout).contains("docling: accuracy 63."));

    let out = bin(&["evaluate", m, "--config", c, "--out", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let direct = bin(&["evaluate", m, "--config", c, "--format", "md"], dir.path());
    let rerendered = bin(&["report", "r.json", "--format", "md"], dir.path());
    assert_eq!(text(&direct.stdout), text(&rerendered.stdout));
}
