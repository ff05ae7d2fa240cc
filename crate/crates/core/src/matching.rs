//! Field-level comparison of a ground-truth value against a prediction.

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::{normalize_identifier, normalize_text, NormalizationPolicy};
use crate::schema::registry;
use crate::schema::{DateValue, FieldValue, MonetaryAmount, Quantity, ValueKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub relaxed_text_threshold: f64,
    /// Absolute money tolerance in document currency units.
    pub money_abs_tol: Decimal,
    /// Relative money tolerance as a fraction of the ground-truth amount.
    pub money_rel_tol: Decimal,
    pub qty_abs_tol: Decimal,
    pub date_tol_days: u32,
    pub identifier_relaxed: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            relaxed_text_threshold: 0.90,
            money_abs_tol: Decimal::new(1, 2),
            money_rel_tol: Decimal::new(1, 4),
            qty_abs_tol: Decimal::new(1, 3),
            date_tol_days: 0,
            identifier_relaxed: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchClass {
    CorrectExact,
    CorrectRelaxed,
    Incorrect,
    Missing,
    Spurious,
    BothAbsent,
}

impl MatchClass {
    pub const ALL: [MatchClass; 6] = [
        MatchClass::CorrectExact,
        MatchClass::CorrectRelaxed,
        MatchClass::Incorrect,
        MatchClass::Missing,
        MatchClass::Spurious,
        MatchClass::BothAbsent,
    ];

    pub fn is_correct(self) -> bool {
        matches!(self, MatchClass::CorrectExact | MatchClass::CorrectRelaxed)
    }

    /// Ground truth is present, so the outcome counts as an annotated field.
    pub fn is_annotated(self) -> bool {
        matches!(
            self,
            MatchClass::CorrectExact | MatchClass::CorrectRelaxed | MatchClass::Incorrect | MatchClass::Missing
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MatchClass::CorrectExact => "correct_exact",
            MatchClass::CorrectRelaxed => "correct_relaxed",
            MatchClass::Incorrect => "incorrect",
            MatchClass::Missing => "missing",
            MatchClass::Spurious => "spurious",
            MatchClass::BothAbsent => "both_absent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldOutcome {
    pub field_path: String,
    pub gt: FieldValue,
    pub pred: FieldValue,
    pub class: MatchClass,
    /// `None` where similarity is not meaningful (absent sides, numeric mismatch).
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("unknown field path {0}")]
    UnknownPath(String),
    #[error("type mismatch at {path}: registry declares {expected}, got {found}")]
    TypeMismatch { path: String, expected: ValueKind, found: ValueKind },
}

/// Normalized Levenshtein similarity; 1 when both strings are empty.
pub fn string_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b)
}

pub fn money_within_tolerance(gt: &MonetaryAmount, pred: &MonetaryAmount, cfg: &MatchConfig) -> bool {
    if !gt.currency.compatible(&pred.currency) {
        return false;
    }
    let g = gt.to_decimal();
    let diff = (g - pred.to_decimal()).abs();
    diff <= cfg.money_abs_tol.max(cfg.money_rel_tol * g.abs())
}

pub fn qty_within_tolerance(gt: &Quantity, pred: &Quantity, cfg: &MatchConfig) -> bool {
    (gt.to_decimal() - pred.to_decimal()).abs() <= cfg.qty_abs_tol
}

pub fn date_within_tolerance(gt: &DateValue, pred: &DateValue, cfg: &MatchConfig) -> bool {
    match (gt.epoch_day(), pred.epoch_day()) {
        (Some(a), Some(b)) => (a - b).abs() <= i64::from(cfg.date_tol_days),
        _ => false,
    }
}

fn graded(exact: bool, relaxed: bool) -> MatchClass {
    if exact {
        MatchClass::CorrectExact
    } else if relaxed {
        MatchClass::CorrectRelaxed
    } else {
        MatchClass::Incorrect
    }
}

/// Classifies a present/present pair of the same kind.
fn compare_present(
    gt: &FieldValue,
    pred: &FieldValue,
    cfg: &MatchConfig,
    policy: &NormalizationPolicy,
) -> (MatchClass, Option<f64>) {
    match (gt, pred) {
        (FieldValue::Text(g), FieldValue::Text(p)) => {
            if g == p {
                return (MatchClass::CorrectExact, Some(1.0));
            }
            let sim = string_similarity(&normalize_text(g, policy), &normalize_text(p, policy));
            (graded(false, sim >= cfg.relaxed_text_threshold), Some(sim))
        }
        (FieldValue::Identifier(g), FieldValue::Identifier(p)) => {
            if g == p {
                return (MatchClass::CorrectExact, Some(1.0));
            }
            let (ng, np) = (normalize_identifier(g, policy), normalize_identifier(p, policy));
            (graded(false, cfg.identifier_relaxed && ng == np), Some(string_similarity(&ng, &np)))
        }
        (FieldValue::Money(g), FieldValue::Money(p)) => {
            numeric(g == p, money_within_tolerance(g, p, cfg))
        }
        (FieldValue::Qty(g), FieldValue::Qty(p)) => numeric(g == p, qty_within_tolerance(g, p, cfg)),
        (FieldValue::Date(g), FieldValue::Date(p)) => numeric(g == p, date_within_tolerance(g, p, cfg)),
        _ => unreachable!("kinds checked by the caller"),
    }
}

fn numeric(exact: bool, relaxed: bool) -> (MatchClass, Option<f64>) {
    let class = graded(exact, relaxed);
    (class, exact.then_some(1.0))
}

/// Classifies one field pair. Tags must agree with the registry type of `path`.
pub fn compare_field(
    path: &str,
    gt: &FieldValue,
    pred: &FieldValue,
    cfg: &MatchConfig,
    policy: &NormalizationPolicy,
) -> Result<FieldOutcome, MatchError> {
    let spec = registry::lookup(path).ok_or_else(|| MatchError::UnknownPath(path.to_string()))?;
    let expected = spec.ty.value_kind();
    for value in [gt, pred] {
        if value.is_present() && value.kind() != expected {
            return Err(MatchError::TypeMismatch { path: path.to_string(), expected, found: value.kind() });
        }
    }
    let (class, similarity) = match (gt.is_present(), pred.is_present()) {
        (false, false) => (MatchClass::BothAbsent, None),
        (true, false) => (MatchClass::Missing, None),
        (false, true) => (MatchClass::Spurious, None),
        (true, true) => compare_present(gt, pred, cfg, policy),
    };
    Ok(FieldOutcome { field_path: path.to_string(), gt: gt.clone(), pred: pred.clone(), class, similarity })
}
