//! Writes the two-method comparison fixture under `tests/fixtures/two_methods`.
//!
//! One hundred generated invoices are scored for two extractors. The
//! `llama` predictions use the nested schema format with confidences and
//! report 30 s per page; the `docling` predictions use a flat key/value
//! export without tax rows and report 10 s per page. Arithmetic faults are
//! planted in chosen documents, then field-level faults that leave the
//! arithmetic untouched are added one by one until the rounded accuracy
//! reaches the target.
//!
//! Usage: `cargo run --example build_two_method_fixture [OUT_DIR]`

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use invoice_eval::config::{EvalConfig, MethodAnnotations};
use invoice_eval::consistency::Status;
use invoice_eval::corpus::{adapt_prediction, AdapterKind, CorpusManifest, ManifestEntry, ManifestMeta, PredictionRef};
use invoice_eval::evaluate::evaluate_document;
use invoice_eval::metrics::{percent, DocumentScore};
use invoice_eval::schema::json::encode_value;
use invoice_eval::schema::registry::{self, ARITHMETIC_HEADER_FIELDS};
use invoice_eval::schema::{
    invoice_to_string, CanonicalInvoice, DocumentMeta, FieldValue, MonetaryAmount, Quantity, SourceKind, TableRow,
    TemplateSplit,
};
use invoice_eval::synth::{generate_invoice, GenConfig};
use rust_decimal::Decimal;
use serde_json::{json, Map, Value};

const DOCS: usize = 100;
const BASE_SEED: u64 = 4100;

struct Method {
    name: &'static str,
    adapter: AdapterKind,
    seconds_per_page: f64,
    accuracy_pct: u64,
    /// Documents whose first line gets a wrong quantity.
    line_faults: Vec<usize>,
    /// Documents whose gross amount is off by one unit.
    total_faults: Vec<usize>,
    emits_tax_rows: bool,
}

#[derive(Clone, Copy)]
enum Fault {
    Header(&'static str, bool),
    LineRate(usize),
}

fn methods() -> Vec<Method> {
    vec![
        Method {
            name: "llama",
            adapter: AdapterKind::SchemaLlm,
            seconds_per_page: 30.0,
            accuracy_pct: 94,
            line_faults: vec![3, 23, 43, 63, 83],
            total_faults: vec![11, 61],
            emits_tax_rows: true,
        },
        Method {
            name: "docling",
            adapter: AdapterKind::FlatKv,
            seconds_per_page: 10.0,
            accuracy_pct: 63,
            line_faults: (0..DOCS).filter(|i| i % 5 == 2).collect(),
            total_faults: Vec::new(),
            emits_tax_rows: false,
        },
    ]
}

fn config() -> EvalConfig {
    let mut cfg = EvalConfig::default();
    cfg.report.method_order = vec!["llama".into(), "docling".into()];
    let text = |s: &str| Some(s.to_string());
    cfg.report.annotations.insert(
        "llama".into(),
        MethodAnnotations {
            display_name: text("Llama Extractor"),
            input_format: text("Raw Text/PDF/JPG"),
            model_architecture: text("Large Language Model"),
            preprocessing_required: text("Minimal"),
            computational_resources: text("Medium"),
            primary_error_sources: text("Variable descriptions, numeric formatting"),
            complex_layout_handling: text("Good"),
            multi_page_support: text("Yes"),
            setup_complexity: text("Medium"),
            scalability: text("Excellent"),
            cost_efficiency: text("Medium"),
            real_time_processing: text("Yes"),
        },
    );
    cfg.report.annotations.insert(
        "docling".into(),
        MethodAnnotations {
            display_name: text("Docling Method"),
            input_format: text("Raw Text/PDF/JPG"),
            model_architecture: text("Layout Analysis + OCR"),
            preprocessing_required: text("Required"),
            computational_resources: text("Low"),
            primary_error_sources: text("Mathematical validation, line item description"),
            complex_layout_handling: text("Fair"),
            multi_page_support: text("Limited"),
            setup_complexity: text("Low"),
            scalability: text("Fair"),
            cost_efficiency: text("High"),
            real_time_processing: text("Yes"),
        },
    );
    cfg
}

fn ground_truth(i: usize) -> (CanonicalInvoice, DocumentMeta) {
    let gen = GenConfig {
        source_kind: if i % 3 == 0 { SourceKind::Scanned } else { SourceKind::Digital },
        template_split: if i % 4 == 0 { TemplateSplit::Unseen } else { TemplateSplit::Seen },
        template_id: format!("tpl-{:02}", i % 5 + 1),
        ..GenConfig::default()
    };
    let (gt, mut meta) = generate_invoice(BASE_SEED + i as u64, &gen).expect("valid generator config");
    meta.doc_id = format!("inv-{i:03}");
    (gt, meta)
}

fn shift_quantity(inv: &mut CanonicalInvoice) {
    let q = inv.line_items[0].quantity.as_qty().expect("generated quantity").to_decimal();
    inv.line_items[0].quantity = FieldValue::Qty(Quantity::from_decimal(q + Decimal::ONE).unwrap());
}

fn shift_gross(inv: &mut CanonicalInvoice) {
    let m = inv.header("invoice.gross_amount").as_money().expect("generated gross").clone();
    let moved = MonetaryAmount::from_decimal(m.to_decimal() + Decimal::ONE, m.currency).unwrap();
    inv.set_header("invoice.gross_amount", FieldValue::Money(moved));
}

fn apply(inv: &mut CanonicalInvoice, fault: Fault) {
    match fault {
        Fault::Header(path, true) => {
            inv.set_header(path, FieldValue::Absent);
        }
        Fault::Header(path, false) => {
            let value = match inv.header(path) {
                FieldValue::Identifier(_) => FieldValue::Identifier("0000-UNREAD".into()),
                _ => FieldValue::Text("illegible".into()),
            };
            inv.set_header(path, value);
        }
        Fault::LineRate(row) => inv.line_items[row].tax_rate = FieldValue::Absent,
    }
}

/// Faults that change field outcomes only: header fields outside the
/// arithmetic, then line tax rates. Spread across documents round-robin.
fn candidates(gts: &[CanonicalInvoice]) -> Vec<(usize, Fault)> {
    let header: Vec<&'static str> = registry::header_fields()
        .map(|s| s.path)
        .filter(|p| !ARITHMETIC_HEADER_FIELDS.contains(p) && *p != "invoice.currency")
        .collect();
    let mut out = Vec::new();
    for (k, path) in header.iter().enumerate() {
        let is_date = registry::lookup(path).unwrap().ty == invoice_eval::schema::SemanticType::Date;
        for (i, gt) in gts.iter().enumerate() {
            if gt.header(path).is_present() {
                out.push((i, Fault::Header(path, is_date || (i + k) % 2 == 0)));
            }
        }
    }
    let rows = gts.iter().map(|g| g.line_items.len()).max().unwrap_or(0);
    for r in 0..rows {
        for (i, gt) in gts.iter().enumerate() {
            if r < gt.line_items.len() {
                out.push((i, Fault::LineRate(r)));
            }
        }
    }
    out
}

fn plain(v: &FieldValue) -> Value {
    match encode_value(v) {
        Value::Object(o) => o["amount"].clone(),
        other => other,
    }
}

fn nested_row<R: TableRow>(row: &R, confidence: f64) -> Value {
    let mut obj = Map::new();
    for f in R::FIELDS {
        let v = row.field(f);
        if v.is_present() {
            obj.insert(f.to_string(), json!({"value": plain(v), "confidence": confidence}));
        }
    }
    Value::Object(obj)
}

fn schema_llm_json(inv: &CanonicalInvoice, seconds: f64) -> Value {
    let mut root = Map::new();
    for entity in ["bill_to", "supplier", "invoice"] {
        let mut obj = Map::new();
        for spec in registry::header_fields().filter(|s| s.path.starts_with(&format!("{entity}."))) {
            let v = inv.header(spec.path);
            if v.is_present() {
                let confidence = if spec.ty == invoice_eval::schema::SemanticType::Text { 0.88 } else { 0.97 };
                obj.insert(spec.name.to_string(), json!({"value": plain(v), "confidence": confidence}));
            }
        }
        root.insert(entity.into(), Value::Object(obj));
    }
    root.insert("line_items".into(), Value::Array(inv.line_items.iter().map(|r| nested_row(r, 0.9)).collect()));
    root.insert("tax_lines".into(), Value::Array(inv.tax_lines.iter().map(|r| nested_row(r, 0.95)).collect()));
    root.insert("processing_seconds".into(), json!(seconds));
    Value::Object(root)
}

const FLAT_HEADER_KEYS: &[(&str, &str)] = &[
    ("invoice.invoice_number", "invoice_no"),
    ("invoice.issue_date", "invoice_date"),
    ("invoice.due_date", "due"),
    ("invoice.payment_terms", "terms"),
    ("invoice.currency", "currency_code"),
    ("invoice.net_amount", "subtotal"),
    ("invoice.tax_amount", "vat_amount"),
    ("invoice.roundoff_amount", "rounding"),
    ("invoice.gross_amount", "total_amount"),
    ("supplier.seller_name", "vendor_name"),
    ("supplier.seller_address", "vendor_address"),
    ("supplier.supplier_tax_id", "vat_id"),
    ("supplier.bank_account", "iban"),
    ("bill_to.buyer_name", "customer_name"),
    ("bill_to.buyer_address", "customer_address"),
    ("bill_to.buyer_tax_id", "customer_tax_id"),
];

fn flat_kv_json(inv: &CanonicalInvoice, seconds: f64) -> Value {
    let mut root = Map::new();
    for (path, key) in FLAT_HEADER_KEYS {
        let v = inv.header(path);
        if v.is_present() {
            root.insert(key.to_string(), plain(v));
        }
    }
    let rows: Vec<Value> = inv
        .line_items
        .iter()
        .map(|r| {
            let mut obj = Map::new();
            for (field, key) in [("description", "desc"), ("quantity", "qty"), ("unit_price", "price"), ("line_total", "amount"), ("tax_rate", "vat_rate")] {
                let v = r.field(field);
                if v.is_present() {
                    obj.insert(key.into(), plain(v));
                }
            }
            Value::Object(obj)
        })
        .collect();
    root.insert("rows".into(), Value::Array(rows));
    root.insert("processing_seconds".into(), json!(seconds));
    Value::Object(root)
}

fn render(method: &Method, inv: &CanonicalInvoice, pages: u32) -> String {
    let seconds = method.seconds_per_page * f64::from(pages);
    let value = match method.adapter {
        AdapterKind::FlatKv => flat_kv_json(inv, seconds),
        _ => schema_llm_json(inv, seconds),
    };
    let mut text = serde_json::to_string_pretty(&value).unwrap();
    text.push('\n');
    text
}

/// Renders the prediction, reads it back through the adapter and scores it.
fn score(method: &Method, id: &str, gt: &CanonicalInvoice, pred: &CanonicalInvoice, pages: u32, cfg: &EvalConfig) -> (String, DocumentScore) {
    let text = render(method, pred, pages);
    let env = adapt_prediction(text.as_bytes(), method.adapter, method.name, &cfg.normalization);
    assert!(env.diagnostics.is_empty(), "{id}: {:?}", env.diagnostics);
    assert_eq!(&env.invoice, pred, "{id}: adapter round trip");
    (text, evaluate_document(id, gt, &env, pages, cfg))
}

fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two_methods"));
    let cfg = config();
    let (gts, metas): (Vec<_>, Vec<_>) = (0..DOCS).map(ground_truth).unzip();
    let faults = candidates(&gts);
    let mut files: BTreeMap<(usize, &str), String> = BTreeMap::new();

    for method in methods() {
        let mut preds = gts.clone();
        for (i, pred) in preds.iter_mut().enumerate() {
            if method.line_faults.contains(&i) {
                shift_quantity(pred);
            }
            if method.total_faults.contains(&i) {
                shift_gross(pred);
            }
            if !method.emits_tax_rows {
                pred.tax_lines.clear();
            }
        }
        let mut scores: Vec<(String, DocumentScore)> = (0..DOCS)
            .map(|i| score(&method, &metas[i].doc_id, &gts[i], &preds[i], metas[i].page_count, &cfg))
            .collect();
        let annotated: usize = scores.iter().map(|(_, s)| s.counts.annotated()).sum();
        let mut correct: usize = scores.iter().map(|(_, s)| s.counts.correct()).sum();

        let mut next = faults.iter();
        while percent(correct, annotated) != Some(method.accuracy_pct) {
            let &(i, fault) = next.next().expect("enough candidate faults to reach the target");
            let before = &scores[i].1;
            let mut pred = preds[i].clone();
            apply(&mut pred, fault);
            let after = score(&method, &metas[i].doc_id, &gts[i], &pred, metas[i].page_count, &cfg);
            assert_eq!(after.1.counts.annotated(), before.counts.annotated());
            assert_eq!(after.1.verdict, before.verdict, "{}: field fault changed the verdict", metas[i].doc_id);
            assert_eq!(after.1.r2_status(), before.r2_status());
            assert_eq!(after.1.line_items.matched, before.line_items.matched);
            correct = correct + after.1.counts.correct() - before.counts.correct();
            preds[i] = pred;
            scores[i] = after;
        }

        let pass = scores.iter().filter(|(_, s)| s.verdict == Status::Pass).count();
        let r2_fail = scores.iter().filter(|(_, s)| s.r2_status() == Status::Fail).count();
        println!(
            "{}: accuracy {correct}/{annotated} = {:?}%, pass {pass}/{DOCS}, line arithmetic failures {r2_fail}",
            method.name,
            percent(correct, annotated)
        );
        for (i, (text, _)) in scores.into_iter().enumerate() {
            files.insert((i, method.name), text);
        }
    }

    let mut entries = Vec::new();
    for (i, (gt, meta)) in gts.iter().zip(&metas).enumerate() {
        let gt_path = format!("gt/{}.json", meta.doc_id);
        write(&out.join(&gt_path), &invoice_to_string(gt));
        let mut predictions = BTreeMap::new();
        for method in methods() {
            let path = format!("predictions/{}/{}.json", method.name, meta.doc_id);
            write(&out.join(&path), &files[&(i, method.name)]);
            predictions.insert(method.name.to_string(), PredictionRef::Spec { path, adapter: method.adapter });
        }
        entries.push(ManifestEntry { doc_id: meta.doc_id.clone(), gt_path, predictions, meta: ManifestMeta::from(meta) });
    }
    let manifest = CorpusManifest { corpus_id: "two-methods".into(), documents: entries, base_dir: out.clone() };
    write(&out.join("manifest.json"), &manifest.to_json());
    let mut cfg_text = serde_json::to_string_pretty(&cfg).unwrap();
    cfg_text.push('\n');
    write(&out.join("config.json"), &cfg_text);
    println!("wrote {}", out.display());
}
