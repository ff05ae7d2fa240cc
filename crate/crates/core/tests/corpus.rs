use std::path::Path;

use invoice_eval::config::EvalConfig;
use invoice_eval::corpus::{load_manifest, parse_manifest, report_from_json, report_to_json, CorpusError};
use invoice_eval::evaluate::{evaluate_corpus, EvalOptions};
use invoice_eval::schema::{invoice_to_string, parse_invoice};
use invoice_eval::synth::{generate_invoice, GenConfig};
use proptest::prelude::*;

const META: &str = r#"{"source_kind": "digital", "language": "en", "vendor_id": "v1", "template_id": "t1", "page_count": 1}"#;

fn manifest_text(entries: &[(&str, &str, &str)]) -> String {
    let docs: Vec<String> = entries
        .iter()
        .map(|(id, gt, pred)| format!(r#"{{"doc_id": "{id}", "gt_path": "{gt}", "predictions": {{"m": {pred}}}, "meta": {META}}}"#))
        .collect();
    format!(r#"{{"corpus_id": "c", "documents": [{}]}}"#, docs.join(","))
}

fn write(dir: &Path, name: &str, text: &str) {
    let path = dir.join(name);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

#[test]
fn manifest_structural_errors() {
    let origin = Path::new("m.json");
    let dup = manifest_text(&[("a", "gt.json", r#""p.json""#), ("a", "gt.json", r#""p.json""#)]);
    assert!(matches!(parse_manifest(&dup, origin), Err(CorpusError::DuplicateId(id)) if id == "a"));
    assert!(matches!(parse_manifest(r#"{"corpus_id": "c", "documents": []}"#, origin), Err(CorpusError::Empty)));
    match parse_manifest("{\n  \"corpus_id\": 3\n}", origin) {
        Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    let zero_pages = manifest_text(&[("a", "gt.json", r#""p.json""#)]).replace("\"page_count\": 1", "\"page_count\": 0");
    assert!(matches!(parse_manifest(&zero_pages, origin), Err(CorpusError::InvalidMeta(_))));
}

#[test]
fn dangling_paths_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "gt.json", "{}");
    write(dir.path(), "m.json", &manifest_text(&[("a", "gt.json", r#""nowhere.json""#)]));
    match load_manifest(&dir.path().join("m.json")) {
        Err(CorpusError::DanglingPath { doc_id, path }) => assert_eq!((doc_id.as_str(), path.as_str()), ("a", "nowhere.json")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn adapters_and_malformed_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, _) = generate_invoice(11, &GenConfig::default()).unwrap();
    write(dir.path(), "gt/a.json", &invoice_to_string(&gt));
    write(dir.path(), "gt/b.json", &invoice_to_string(&gt));
    write(dir.path(), "pred/a.json", &invoice_to_string(&gt));
    write(dir.path(), "pred/b.json", "[1, 2");
    let text = manifest_text(&[
        ("a", "gt/a.json", r#"{"path": "pred/a.json", "adapter": "canonical"}"#),
        ("b", "gt/b.json", r#""pred/b.json""#),
    ]);
    write(dir.path(), "m.json", &text);
    let manifest = load_manifest(&dir.path().join("m.json")).unwrap();
    let report = evaluate_corpus(&manifest, &EvalConfig::default(), &EvalOptions::default()).unwrap();
    let m = &report.methods["m"];
    assert_eq!(m.documents[0].counts.accuracy().overall, Some(1.0));
    // An unreadable prediction scores as all-missing with a diagnostic.
    assert!(!m.documents[1].diagnostics.is_empty());
    assert_eq!(m.documents[1].counts.correct(), 0);
    assert_eq!(m.metrics.documents, 2);
}

#[test]
fn report_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, _) = generate_invoice(5, &GenConfig::default()).unwrap();
    write(dir.path(), "gt.json", &invoice_to_string(&gt));
    write(dir.path(), "p.json", &invoice_to_string(&gt));
    write(dir.path(), "m.json", &manifest_text(&[("a", "gt.json", r#""p.json""#)]));
    let manifest = load_manifest(&dir.path().join("m.json")).unwrap();
    let report = evaluate_corpus(&manifest, &EvalConfig::default(), &EvalOptions::default()).unwrap();
    let json = report_to_json(&report);
    let back = report_from_json(&json, "r.json").unwrap();
    assert_eq!(back, report);
    assert_eq!(report_to_json(&back), json);
}

proptest! {
    #[test]
    fn generated_invoices_round_trip_through_json(seed in any::<u64>()) {
        let (gt, _) = generate_invoice(seed, &GenConfig::default()).unwrap();
        let text = invoice_to_string(&gt);
        let back = parse_invoice(&text).unwrap();
        prop_assert_eq!(&back, &gt);
        prop_assert_eq!(invoice_to_string(&back), text);
    }
}
