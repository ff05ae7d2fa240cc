#![allow(dead_code)]

use invoice_eval::config::EvalConfig;
use invoice_eval::corpus::{adapt_prediction, AdapterKind};
use invoice_eval::evaluate::evaluate_document;
use invoice_eval::metrics::{DocumentScore, MetricBlock};
use invoice_eval::schema::{invoice_to_string, CanonicalInvoice};
use invoice_eval::synth::{
    capacity, expected_report, generate_invoice, inject_errors, ErrorKind, ErrorLedger, ErrorSpec, ExpectedMetrics,
    GenConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Non-arithmetic header fields that a case may leave out of the ground truth.
pub const OPTIONAL_FIELDS: [&str; 4] =
    ["supplier.bank_account", "invoice.payment_terms", "bill_to.buyer_tax_id", "invoice.due_date"];

pub fn gen_config(rng: &mut ChaCha8Rng) -> GenConfig {
    let absent = OPTIONAL_FIELDS.iter().filter(|_| rng.gen_bool(0.4)).map(|s| s.to_string()).collect();
    GenConfig { absent_fields: absent, ..GenConfig::default() }
}

/// A spec with random counts within what the ground truth can absorb.
pub fn random_spec(rng: &mut ChaCha8Rng, gt: &CanonicalInvoice, seed: u64, cfg: &EvalConfig) -> ErrorSpec {
    let mut spec = ErrorSpec::with_seed(seed);
    spec.drop_arithmetic_fields = rng.gen_bool(0.2);
    let cap = capacity(gt, seed, spec.drop_arithmetic_fields);
    for kind in ErrorKind::ALL {
        spec.counts.set(kind, rng.gen_range(0..=cap.get(kind)));
    }
    spec.within_tolerance.money = rng.gen_range(0..=spec.counts.perturb_money);
    if cfg.matching.date_tol_days > 0 {
        spec.within_tolerance.date = rng.gen_range(0..=spec.counts.perturb_date);
    }
    spec.magnitudes.text_edits = (1, rng.gen_range(1..=8));
    spec
}

/// Runs the prediction through canonical JSON and the adapter, then scores it.
pub fn score(doc_id: &str, gt: &CanonicalInvoice, pred: &CanonicalInvoice, cfg: &EvalConfig) -> DocumentScore {
    let bytes = invoice_to_string(pred);
    let env = adapt_prediction(bytes.as_bytes(), AdapterKind::Canonical, "synthetic", &cfg.normalization);
    assert!(env.diagnostics.is_empty(), "{:?}", env.diagnostics);
    evaluate_document(doc_id, gt, &env, 1, cfg)
}

pub struct Case {
    pub gts: Vec<CanonicalInvoice>,
    pub ledgers: Vec<ErrorLedger>,
    pub scores: Vec<DocumentScore>,
}

impl Case {
    pub fn expected(&self, cfg: &EvalConfig) -> ExpectedMetrics {
        let pairs: Vec<(&CanonicalInvoice, &ErrorLedger)> = self.gts.iter().zip(&self.ledgers).collect();
        expected_report(&pairs, cfg)
    }

    pub fn block(&self) -> MetricBlock {
        MetricBlock::from_documents(&self.scores)
    }
}

/// One oracle case: a few generated documents, each with its own random spec.
pub fn oracle_case(case_seed: u64, docs: usize, cfg: &EvalConfig) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
    let mut case = Case { gts: Vec::new(), ledgers: Vec::new(), scores: Vec::new() };
    for d in 0..docs {
        let gen = gen_config(&mut rng);
        let (gt, _) = generate_invoice(rng.gen(), &gen).expect("valid generator config");
        let spec_seed = rng.gen();
        let spec = random_spec(&mut rng, &gt, spec_seed, cfg);
        let (pred, ledger) = inject_errors(&gt, &spec, cfg).expect("feasible spec");
        case.scores.push(score(&format!("d{d}"), &gt, &pred, cfg));
        case.gts.push(gt);
        case.ledgers.push(ledger);
    }
    case
}
