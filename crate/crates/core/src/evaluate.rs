//! Per-document scoring and the corpus evaluation driver.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::alignment::{align_rows, table_completeness, table_outcomes, TAX_LINE_WEIGHTS};
use crate::config::EvalConfig;
use crate::consistency::{check_invoice, Status};
use crate::corpus::{adapt_prediction, CorpusError, CorpusManifest, PredictionEnvelope};
use crate::matching::compare_field;
use crate::metrics::{aggregate_corpus, entity_counts, ClassCounts, DocumentScore, EvaluationReport, MetricsError};
use crate::schema::json::{parse_invoice, Diagnostic, InvoiceFileError};
use crate::schema::registry;
use crate::schema::CanonicalInvoice;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("ground truth {path}: {source}")]
    GroundTruth { path: String, source: InvoiceFileError },
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Scores one prediction against its ground truth.
pub fn evaluate_document(
    doc_id: &str,
    gt: &CanonicalInvoice,
    pred: &PredictionEnvelope,
    pages: u32,
    cfg: &EvalConfig,
) -> DocumentScore {
    let policy = &cfg.normalization;
    let mcfg = &cfg.matching;
    let inv = &pred.invoice;
    let mut diagnostics = pred.diagnostics.clone();
    let mut outcomes = Vec::new();
    for spec in registry::header_fields().filter(|s| s.in_accuracy) {
        match compare_field(spec.path, gt.header(spec.path), inv.header(spec.path), mcfg, policy) {
            Ok(o) => outcomes.push(o),
            Err(e) => diagnostics.push(Diagnostic::new(spec.path, e.to_string())),
        }
    }
    let weights = cfg.line_items.field_weights.as_array();
    let threshold = cfg.line_items.min_row_similarity;
    let lines = align_rows(&gt.line_items, &inv.line_items, &weights, threshold, mcfg, policy);
    outcomes.extend(table_outcomes(&lines, &gt.line_items, &inv.line_items, mcfg, policy));
    let taxes = align_rows(&gt.tax_lines, &inv.tax_lines, &TAX_LINE_WEIGHTS, threshold, mcfg, policy);
    outcomes.extend(table_outcomes(&taxes, &gt.tax_lines, &inv.tax_lines, mcfg, policy));

    let (consistency, consistency_fault, verdict) = match check_invoice(inv, cfg.consistency.tolerance) {
        Ok(c) => {
            let v = c.verdict;
            (Some(c), None, v)
        }
        Err(mix) => (None, Some(mix.to_string()), Status::Fail),
    };
    diagnostics.sort();
    DocumentScore {
        doc_id: doc_id.to_string(),
        counts: ClassCounts::from_outcomes(&outcomes),
        entities: entity_counts(&outcomes),
        line_items: table_completeness(&lines, gt.line_items.len(), inv.line_items.len()),
        tax_lines: table_completeness(&taxes, gt.tax_lines.len(), inv.tax_lines.len()),
        consistency,
        consistency_fault,
        verdict,
        seconds: pred.processing_seconds,
        pages,
        diagnostics,
        outcomes,
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Methods to evaluate; empty means every method in the manifest.
    pub methods: Vec<String>,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// Replace extractor-reported times with measured wall clock.
    pub measure_time: bool,
}

fn read_ground_truth(manifest: &CorpusManifest, rel: &str) -> Result<CanonicalInvoice, EvalError> {
    let path = manifest.resolve(rel);
    let text = std::fs::read_to_string(&path)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    parse_invoice(&text).map_err(|source| EvalError::GroundTruth { path: path.display().to_string(), source })
}

fn load_prediction(manifest: &CorpusManifest, doc: usize, method: &str, cfg: &EvalConfig) -> PredictionEnvelope {
    let entry = &manifest.documents[doc];
    let Some(pref) = entry.predictions.get(method) else {
        let mut env = PredictionEnvelope::empty(method);
        env.diagnostics.push(Diagnostic::new("", "no prediction for this method"));
        return env;
    };
    let path = manifest.resolve(pref.path());
    match std::fs::read(&path) {
        Ok(bytes) => adapt_prediction(&bytes, pref.adapter(), method, &cfg.normalization),
        Err(e) => {
            let mut env = PredictionEnvelope::empty(method);
            env.diagnostics.push(Diagnostic::new("", format!("cannot read {}: {e}", path.display())));
            env
        }
    }
}

/// Evaluates every (document, method) pair. Output does not depend on the
/// number of workers or the order in which documents finish.
pub fn evaluate_corpus(manifest: &CorpusManifest, cfg: &EvalConfig, opts: &EvalOptions) -> Result<EvaluationReport, EvalError> {
    let available = manifest.methods();
    let methods = if opts.methods.is_empty() {
        available
    } else {
        for m in &opts.methods {
            if !available.contains(m) {
                return Err(EvalError::UnknownMethod(m.clone()));
            }
        }
        let mut m = opts.methods.clone();
        m.sort();
        m.dedup();
        m
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| EvalError::Pool(e.to_string()))?;

    let scored: Vec<(usize, Vec<DocumentScore>)> = pool.install(|| {
        manifest
            .documents
            .par_iter()
            .enumerate()
            .map(|(i, entry)| -> Result<(usize, Vec<DocumentScore>), EvalError> {
                let gt = read_ground_truth(manifest, &entry.gt_path)?;
                let scores = methods
                    .iter()
                    .map(|m| {
                        let start = Instant::now();
                        let env = load_prediction(manifest, i, m, cfg);
                        let mut score = evaluate_document(&entry.doc_id, &gt, &env, entry.meta.page_count, cfg);
                        if opts.measure_time {
                            score.seconds = Some(start.elapsed().as_secs_f64());
                        }
                        score
                    })
                    .collect();
                Ok((i, scores))
            })
            .collect::<Result<Vec<_>, EvalError>>()
    })?;

    let metas = manifest.metas();
    let mut per_method: Vec<Vec<DocumentScore>> = vec![Vec::new(); methods.len()];
    for (_, scores) in scored {
        for (k, s) in scores.into_iter().enumerate() {
            per_method[k].push(s);
        }
    }
    let mut reports = BTreeMap::new();
    for (m, docs) in methods.iter().zip(per_method) {
        reports.insert(m.clone(), aggregate_corpus(docs, &metas)?);
    }
    Ok(EvaluationReport { corpus_id: manifest.corpus_id.clone(), config: cfg.clone(), methods: reports })
}

/// Loads a manifest from disk and evaluates it.
pub fn evaluate_manifest_file(path: &Path, cfg: &EvalConfig, opts: &EvalOptions) -> Result<EvaluationReport, EvalError> {
    let manifest = crate::corpus::load_manifest(path)?;
    evaluate_corpus(&manifest, cfg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::MatchClass;
    use crate::schema::{FieldValue, LineItem, MonetaryAmount, Quantity};

    fn eur(units: i64) -> FieldValue {
        FieldValue::Money(MonetaryAmount::new(units, 2, "EUR".parse().unwrap()).unwrap())
    }

    fn sample() -> CanonicalInvoice {
        let mut inv = CanonicalInvoice::default();
        inv.set_header("invoice.invoice_number", FieldValue::Identifier("INV-1".into()));
        inv.set_header("invoice.net_amount", eur(3000));
        inv.set_header("invoice.tax_amount", eur(570));
        inv.set_header("invoice.gross_amount", eur(3570));
        inv.line_items.push(LineItem {
            description: FieldValue::Text("Widget".into()),
            quantity: FieldValue::Qty(Quantity::new(3, 0).unwrap()),
            unit_price: eur(1000),
            line_total: eur(3000),
            tax_rate: FieldValue::Absent,
        });
        inv
    }

    fn envelope(inv: CanonicalInvoice) -> PredictionEnvelope {
        PredictionEnvelope { invoice: inv, ..PredictionEnvelope::empty("m") }
    }

    #[test]
    fn identity_scores_perfectly() {
        let gt = sample();
        let s = evaluate_document("d", &gt, &envelope(gt.clone()), 1, &EvalConfig::default());
        assert_eq!(s.counts.correct(), 8);
        assert_eq!(s.counts.annotated(), 8);
        assert_eq!(s.verdict, Status::Pass);
        assert_eq!(s.line_items.completeness, 1.0);
    }

    #[test]
    fn wrong_gross_fails_r1_and_counts_incorrect() {
        let gt = sample();
        let mut pred = gt.clone();
        pred.set_header("invoice.gross_amount", eur(3600));
        let s = evaluate_document("d", &gt, &envelope(pred), 1, &EvalConfig::default());
        assert_eq!(s.counts.get(MatchClass::Incorrect), 1);
        assert_eq!(s.verdict, Status::Fail);
    }

    #[test]
    fn empty_prediction_is_all_missing() {
        let gt = sample();
        let s = evaluate_document("d", &gt, &PredictionEnvelope::empty("m"), 1, &EvalConfig::default());
        assert_eq!(s.counts.missing, 8);
        assert_eq!(s.line_items.omissions, 1);
        assert_eq!(s.verdict, Status::NotApplicable);
    }
}
