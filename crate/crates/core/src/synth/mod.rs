//! Seeded synthetic invoices, controlled error injection and the counting
//! oracle that predicts what the evaluation must report for them.

mod generate;
mod inject;
mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{description_pool, generate_invoice, GenConfig};
pub use inject::{capacity, inject_errors, ErrorLedger, Expectation, LedgerEntry, RuleChange, RuleEffect};
pub use oracle::{expected_report, ExpectedMetrics, TableCounts};

use crate::config::EvalConfig;
use crate::schema::{CanonicalInvoice, DocumentMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    DropField,
    PerturbMoney,
    PerturbDate,
    CorruptText,
    DropRow,
    DuplicateRow,
    SpuriousField,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 7] = [
        ErrorKind::DropField,
        ErrorKind::PerturbMoney,
        ErrorKind::PerturbDate,
        ErrorKind::CorruptText,
        ErrorKind::DropRow,
        ErrorKind::DuplicateRow,
        ErrorKind::SpuriousField,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::DropField => "drop_field",
            ErrorKind::PerturbMoney => "perturb_money",
            ErrorKind::PerturbDate => "perturb_date",
            ErrorKind::CorruptText => "corrupt_text",
            ErrorKind::DropRow => "drop_row",
            ErrorKind::DuplicateRow => "duplicate_row",
            ErrorKind::SpuriousField => "spurious_field",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorCounts {
    pub drop_field: usize,
    pub perturb_money: usize,
    pub perturb_date: usize,
    pub corrupt_text: usize,
    pub drop_row: usize,
    pub duplicate_row: usize,
    pub spurious_field: usize,
}

impl ErrorCounts {
    pub fn get(&self, kind: ErrorKind) -> usize {
        match kind {
            ErrorKind::DropField => self.drop_field,
            ErrorKind::PerturbMoney => self.perturb_money,
            ErrorKind::PerturbDate => self.perturb_date,
            ErrorKind::CorruptText => self.corrupt_text,
            ErrorKind::DropRow => self.drop_row,
            ErrorKind::DuplicateRow => self.duplicate_row,
            ErrorKind::SpuriousField => self.spurious_field,
        }
    }

    pub fn set(&mut self, kind: ErrorKind, n: usize) {
        match kind {
            ErrorKind::DropField => self.drop_field = n,
            ErrorKind::PerturbMoney => self.perturb_money = n,
            ErrorKind::PerturbDate => self.perturb_date = n,
            ErrorKind::CorruptText => self.corrupt_text = n,
            ErrorKind::DropRow => self.drop_row = n,
            ErrorKind::DuplicateRow => self.duplicate_row = n,
            ErrorKind::SpuriousField => self.spurious_field = n,
        }
    }

    pub fn total(&self) -> usize {
        ErrorKind::ALL.iter().map(|k| self.get(*k)).sum()
    }
}

/// Perturbation sizes. Money deltas are added on top of the field's match
/// tolerance, so every draw lands strictly outside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Magnitudes {
    /// Extra minor units beyond tolerance, inclusive range.
    pub money_delta: (i64, i64),
    /// Extra days beyond the date tolerance, inclusive range.
    pub date_delta_days: (i64, i64),
    /// Characters inserted by one text corruption, inclusive range.
    pub text_edits: (usize, usize),
}

impl Default for Magnitudes {
    fn default() -> Self {
        Self { money_delta: (1, 500), date_delta_days: (1, 30), text_edits: (1, 6) }
    }
}

/// How many of the money and date perturbations stay inside tolerance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WithinTolerance {
    pub money: usize,
    pub date: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorSpec {
    pub seed: u64,
    pub counts: ErrorCounts,
    pub magnitudes: Magnitudes,
    pub within_tolerance: WithinTolerance,
    /// Allow drop_field on net, tax, roundoff and gross. Dropping them makes
    /// consistency rules inapplicable instead of failing.
    pub drop_arithmetic_fields: bool,
}

impl ErrorSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("{kind} needs {requested} targets but only {available} are available")]
    Infeasible { kind: &'static str, requested: usize, available: usize },
    #[error("invalid error spec: {0}")]
    InvalidSpec(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// One generated document with its prediction and ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDocument {
    pub meta: DocumentMeta,
    pub gt: CanonicalInvoice,
    pub pred: CanonicalInvoice,
    pub ledger: ErrorLedger,
}

/// Generates `n` documents with ids `doc-0000`, `doc-0001`, ... from
/// invoice seeds `seed`, `seed + 1`, .... Without an error spec the
/// predictions equal the ground truth; otherwise every document gets the
/// spec's counts under its own derived seed.
pub fn synth_corpus(
    n: usize,
    seed: u64,
    gen: &GenConfig,
    errors: Option<&ErrorSpec>,
    cfg: &EvalConfig,
) -> Result<Vec<SynthDocument>, SynthError> {
    (0..n)
        .map(|i| {
            let (gt, mut meta) = generate_invoice(seed.wrapping_add(i as u64), gen)?;
            meta.doc_id = format!("doc-{i:04}");
            let (pred, ledger) = match errors {
                None => (gt.clone(), ErrorLedger::default()),
                Some(spec) => {
                    let doc_spec = ErrorSpec { seed: sub_seed(spec.seed, "doc-errors", i as u64), ..*spec };
                    inject_errors(&gt, &doc_spec, cfg)?
                }
            };
            Ok(SynthDocument { meta, gt, pred, ledger })
        })
        .collect()
}

/// Expected metrics for a synthesized corpus.
pub fn expected_for(docs: &[SynthDocument], cfg: &EvalConfig) -> ExpectedMetrics {
    let pairs: Vec<(&CanonicalInvoice, &ErrorLedger)> = docs.iter().map(|d| (&d.gt, &d.ledger)).collect();
    expected_report(&pairs, cfg)
}

/// Independent sub-stream seed for a labelled purpose.
pub(crate) fn sub_seed(seed: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(splitmix(seed ^ h).wrapping_add(index))
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn rng_for(seed: u64, label: &str, index: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(sub_seed(seed, label, index))
}
