//! Row alignment for line items and tax lines: similarity, optimal
//! assignment, completeness and matched-row field outcomes.

mod assignment;

use serde::{Deserialize, Serialize};

use crate::matching::{compare_field, FieldOutcome, MatchClass, MatchConfig};
use crate::normalize::NormalizationPolicy;
use crate::schema::{row_path, FieldValue, TableRow};

pub use assignment::max_weight_matching;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldWeights {
    pub description: f64,
    pub quantity: f64,
    pub unit_price: f64,
    pub line_total: f64,
    pub tax_rate: f64,
}

impl Default for FieldWeights {
    fn default() -> Self {
        Self { description: 0.4, quantity: 0.15, unit_price: 0.15, line_total: 0.25, tax_rate: 0.05 }
    }
}

impl FieldWeights {
    /// Weights in line-item field order.
    pub fn as_array(&self) -> [f64; 5] {
        [self.description, self.quantity, self.unit_price, self.line_total, self.tax_rate]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineItemConfig {
    pub field_weights: FieldWeights,
    pub min_row_similarity: f64,
}

impl Default for LineItemConfig {
    fn default() -> Self {
        Self { field_weights: FieldWeights::default(), min_row_similarity: 0.50 }
    }
}

/// Tax lines weigh their three fields equally.
pub const TAX_LINE_WEIGHTS: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowPair {
    pub gt: usize,
    pub pred: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RowAlignment {
    pub pairs: Vec<RowPair>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

impl RowAlignment {
    pub fn total_similarity(&self) -> f64 {
        self.pairs.iter().map(|p| p.similarity).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableCompleteness {
    pub completeness: f64,
    pub matched: usize,
    pub gt_rows: usize,
    pub omissions: usize,
    pub duplications: usize,
}

/// Per-field score of a row pair; `None` when both sides are absent.
fn field_score(path: &str, gt: &FieldValue, pred: &FieldValue, mcfg: &MatchConfig, policy: &NormalizationPolicy) -> Option<f64> {
    let outcome = match compare_field(path, gt, pred, mcfg, policy) {
        Ok(o) => o,
        Err(_) => return Some(0.0),
    };
    match outcome.class {
        MatchClass::BothAbsent => None,
        MatchClass::CorrectExact | MatchClass::CorrectRelaxed => Some(1.0),
        MatchClass::Incorrect if matches!(gt, FieldValue::Text(_)) => outcome.similarity.or(Some(0.0)),
        _ => Some(0.0),
    }
}

/// Weighted field agreement of two rows. Weights of fields absent on both
/// sides are redistributed over the remaining fields.
pub fn row_similarity<R: TableRow>(
    gt: &R,
    pred: &R,
    weights: &[f64],
    mcfg: &MatchConfig,
    policy: &NormalizationPolicy,
) -> f64 {
    let mut weighted = 0.0;
    let mut active = 0.0;
    for (name, w) in R::FIELDS.iter().zip(weights) {
        let path = format!("{}.{}", R::TABLE, name);
        if let Some(score) = field_score(&path, gt.field(name), pred.field(name), mcfg, policy) {
            weighted += w * score;
            active += w;
        }
    }
    if active == 0.0 {
        1.0
    } else {
        weighted / active
    }
}

/// Resolution of similarities inside the assignment solver.
const QUANTUM: f64 = 1e12;

/// Optimal injective matching over a similarity matrix. Cells below
/// `threshold` are forbidden. Among equal totals more pairs are preferred,
/// then the lexicographically smallest `(gt, pred)` pair sequence.
pub fn align_matrix(sim: &[Vec<f64>], pred_count: usize, threshold: f64) -> RowAlignment {
    let gt_count = sim.len();
    let bonus = gt_count.min(pred_count) as i128 + 1;
    let values: Vec<Vec<i128>> = sim
        .iter()
        .map(|row| {
            row.iter()
                .map(|&s| if s >= threshold { (s * QUANTUM).round() as i128 * bonus + 1 } else { 0 })
                .collect()
        })
        .collect();
    let matched = max_weight_matching(&values, pred_count);
    let mut gt_used = vec![false; gt_count];
    let mut pred_used = vec![false; pred_count];
    let pairs = matched
        .into_iter()
        .map(|(g, p)| {
            gt_used[g] = true;
            pred_used[p] = true;
            RowPair { gt: g, pred: p, similarity: sim[g][p] }
        })
        .collect();
    RowAlignment {
        pairs,
        unmatched_gt: (0..gt_count).filter(|&i| !gt_used[i]).collect(),
        unmatched_pred: (0..pred_count).filter(|&j| !pred_used[j]).collect(),
    }
}

pub fn similarity_matrix<R: TableRow>(
    gt_rows: &[R],
    pred_rows: &[R],
    weights: &[f64],
    mcfg: &MatchConfig,
    policy: &NormalizationPolicy,
) -> Vec<Vec<f64>> {
    gt_rows
        .iter()
        .map(|g| pred_rows.iter().map(|p| row_similarity(g, p, weights, mcfg, policy)).collect())
        .collect()
}

pub fn align_rows<R: TableRow>(
    gt_rows: &[R],
    pred_rows: &[R],
    weights: &[f64],
    threshold: f64,
    mcfg: &MatchConfig,
    policy: &NormalizationPolicy,
) -> RowAlignment {
    let sim = similarity_matrix(gt_rows, pred_rows, weights, mcfg, policy);
    align_matrix(&sim, pred_rows.len(), threshold)
}

pub fn table_completeness(a: &RowAlignment, gt_count: usize, _pred_count: usize) -> TableCompleteness {
    let matched = a.pairs.len();
    let completeness = if gt_count == 0 { 1.0 } else { matched as f64 / gt_count as f64 };
    TableCompleteness {
        completeness,
        matched,
        gt_rows: gt_count,
        omissions: a.unmatched_gt.len(),
        duplications: a.unmatched_pred.len(),
    }
}

/// Field outcomes for an aligned table: matched pairs compare field by
/// field, omitted rows yield `Missing` and unmatched predictions `Spurious`
/// for each present field. Unmatched prediction paths use `[pN]` indices.
pub fn table_outcomes<R: TableRow>(
    a: &RowAlignment,
    gt_rows: &[R],
    pred_rows: &[R],
    mcfg: &MatchConfig,
    policy: &NormalizationPolicy,
) -> Vec<FieldOutcome> {
    let mut out = Vec::new();
    let absent = FieldValue::Absent;
    for pair in &a.pairs {
        for name in R::FIELDS {
            let path = row_path(R::TABLE, pair.gt, name);
            let (g, p) = (gt_rows[pair.gt].field(name), pred_rows[pair.pred].field(name));
            out.push(compare_field(&path, g, p, mcfg, policy).unwrap_or_else(|_| FieldOutcome {
                field_path: path,
                gt: g.clone(),
                pred: p.clone(),
                class: if g.is_present() { MatchClass::Incorrect } else { MatchClass::Spurious },
                similarity: None,
            }));
        }
    }
    for &i in &a.unmatched_gt {
        for name in R::FIELDS {
            let g = gt_rows[i].field(name);
            if g.is_present() {
                out.push(FieldOutcome {
                    field_path: row_path(R::TABLE, i, name),
                    gt: g.clone(),
                    pred: absent.clone(),
                    class: MatchClass::Missing,
                    similarity: None,
                });
            }
        }
    }
    for &j in &a.unmatched_pred {
        for name in R::FIELDS {
            let p = pred_rows[j].field(name);
            if p.is_present() {
                out.push(FieldOutcome {
                    field_path: format!("{}[p{j}].{name}", R::TABLE),
                    gt: absent.clone(),
                    pred: p.clone(),
                    class: MatchClass::Spurious,
                    similarity: None,
                });
            }
        }
    }
    out
}
