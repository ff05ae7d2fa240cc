use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::{rng_for, ErrorCounts, ErrorKind, ErrorSpec, SynthError};
use crate::config::EvalConfig;
use crate::consistency::RuleId;
use crate::matching::MatchClass;
use crate::normalize::normalize_text;
use crate::schema::registry::{self, FieldSpec, SemanticType, ARITHMETIC_HEADER_FIELDS};
use crate::schema::{row_path, CanonicalInvoice, DateValue, FieldValue, LineItem, MonetaryAmount, TableRow, TaxLine};

/// What the evaluation must observe for one injected error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Expectation {
    /// The targeted field scores with this class.
    Field { class: MatchClass },
    /// The ground-truth row stays unmatched; its present fields score Missing.
    Omission { row: usize },
    /// A copy of the ground-truth row stays unmatched; its fields score Spurious.
    Duplication { row: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum RuleChange {
    /// The rule's residual moves by `amount`; `line` names the ground-truth
    /// row for per-line rules.
    Shift { amount: Decimal, line: Option<usize> },
    /// A required operand is gone and the rule becomes inapplicable.
    Disable,
    /// One fewer line participates.
    RemoveOperand,
    /// One more line participates.
    AddOperand,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEffect {
    pub rule: RuleId,
    #[serde(flatten)]
    pub change: RuleChange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub kind: ErrorKind,
    /// Field path, or `line_items[i]` for row errors; indices refer to the ground truth.
    pub target: String,
    pub expected: Expectation,
    pub rules: Vec<RuleEffect>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorLedger {
    pub seed: u64,
    pub entries: Vec<LedgerEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Header(&'static FieldSpec),
    RowField(usize, &'static str),
    TaxField(usize, &'static str),
    Row(usize),
}

impl Target {
    fn path(self) -> String {
        match self {
            Target::Header(spec) => spec.path.to_string(),
            Target::RowField(i, f) => row_path(LineItem::TABLE, i, f),
            Target::TaxField(i, f) => row_path(TaxLine::TABLE, i, f),
            Target::Row(i) => format!("{}[{i}]", LineItem::TABLE),
        }
    }
}

/// Candidate targets per error kind, each list already in selection order.
/// Membership depends only on the ground truth and the seed, so raising a
/// count only ever appends errors.
fn domains(gt: &CanonicalInvoice, seed: u64, drop_arithmetic: bool) -> BTreeMap<ErrorKind, Vec<Target>> {
    let mut d: BTreeMap<ErrorKind, Vec<Target>> = ErrorKind::ALL.iter().map(|k| (*k, Vec::new())).collect();
    let mut push = |k: ErrorKind, t: Target| d.get_mut(&k).expect("all kinds").push(t);

    for (i, spec) in registry::header_fields().enumerate() {
        let value = gt.header(spec.path);
        if value.is_absent() {
            push(ErrorKind::SpuriousField, Target::Header(spec));
            continue;
        }
        let coin = rng_for(seed, "header-coin", i as u64).gen_bool(0.5);
        let t = Target::Header(spec);
        let specific = match spec.ty {
            SemanticType::Money if ARITHMETIC_HEADER_FIELDS.contains(&spec.path) && !drop_arithmetic => {
                push(ErrorKind::PerturbMoney, t);
                continue;
            }
            SemanticType::Money => ErrorKind::PerturbMoney,
            SemanticType::Date => ErrorKind::PerturbDate,
            SemanticType::Text | SemanticType::Identifier if has_visible_char(value) => ErrorKind::CorruptText,
            _ => ErrorKind::DropField,
        };
        push(if coin { ErrorKind::DropField } else { specific }, t);
    }

    let n = gt.line_items.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, "rows", 0));
    // order[0] is never touched, which keeps every line rule applicable.
    for (j, &r) in order.iter().skip(1).enumerate() {
        match j % 3 {
            0 => {
                let mut rng = rng_for(seed, "row-field", r as u64);
                let field = LineItem::FIELDS[rng.gen_range(0..LineItem::FIELDS.len())];
                let coin = rng.gen_bool(0.5);
                let value = gt.line_items[r].field(field);
                if value.is_absent() {
                    continue;
                }
                let specific = match field {
                    "description" if has_visible_char(value) => ErrorKind::CorruptText,
                    "unit_price" | "line_total" => ErrorKind::PerturbMoney,
                    _ => ErrorKind::DropField,
                };
                push(if coin { ErrorKind::DropField } else { specific }, Target::RowField(r, field));
            }
            1 => push(ErrorKind::DropRow, Target::Row(r)),
            _ => push(ErrorKind::DuplicateRow, Target::Row(r)),
        }
    }

    for (r, line) in gt.tax_lines.iter().enumerate() {
        let mut rng = rng_for(seed, "tax-field", r as u64);
        let field = TaxLine::FIELDS[rng.gen_range(0..TaxLine::FIELDS.len())];
        let coin = rng.gen_bool(0.5);
        if line.field(field).is_absent() {
            continue;
        }
        // Tax-line amounts are never dropped: losing the last one would
        // make the tax-line rule inapplicable.
        let kind = match field {
            "tax_amount" => ErrorKind::PerturbMoney,
            "taxable_base" if !coin => ErrorKind::PerturbMoney,
            _ => ErrorKind::DropField,
        };
        push(kind, Target::TaxField(r, field));
    }

    for (k, list) in d.iter_mut() {
        list.shuffle(&mut rng_for(seed, k.as_str(), 0));
    }
    d
}

fn has_visible_char(v: &FieldValue) -> bool {
    match v {
        FieldValue::Text(s) | FieldValue::Identifier(s) => s.chars().any(|c| !c.is_whitespace()),
        _ => false,
    }
}

/// Largest number of errors of each kind that `inject_errors` accepts for
/// this ground truth and seed.
pub fn capacity(gt: &CanonicalInvoice, seed: u64, drop_arithmetic_fields: bool) -> ErrorCounts {
    let mut c = ErrorCounts::default();
    for (k, list) in domains(gt, seed, drop_arithmetic_fields) {
        c.set(k, list.len());
    }
    c
}

fn value_at(inv: &CanonicalInvoice, t: Target) -> &FieldValue {
    match t {
        Target::Header(spec) => inv.header(spec.path),
        Target::RowField(i, f) => inv.line_items[i].field(f),
        Target::TaxField(i, f) => inv.tax_lines[i].field(f),
        Target::Row(_) => unreachable!("rows have no single value"),
    }
}

fn set_value(inv: &mut CanonicalInvoice, t: Target, v: FieldValue) {
    match t {
        Target::Header(spec) => {
            inv.set_header(spec.path, v);
        }
        Target::RowField(i, f) => *inv.line_items[i].field_mut(f).expect("row field") = v,
        Target::TaxField(i, f) => *inv.tax_lines[i].field_mut(f).expect("tax field") = v,
        Target::Row(_) => unreachable!("rows have no single value"),
    }
}

fn shift(rule: RuleId, amount: Decimal, line: Option<usize>) -> RuleEffect {
    RuleEffect { rule, change: RuleChange::Shift { amount, line } }
}

fn effect(rule: RuleId, change: RuleChange) -> RuleEffect {
    RuleEffect { rule, change }
}

fn money_of(v: &FieldValue) -> &MonetaryAmount {
    v.as_money().expect("money target")
}

/// Direction each money role moves in. Chosen so that all shifts on one
/// rule share a sign and never cancel.
fn money_sign(t: Target) -> i64 {
    match t {
        Target::Header(spec) if spec.path == "invoice.gross_amount" => -1,
        Target::RowField(_, "line_total") | Target::TaxField(_, "tax_amount") => -1,
        _ => 1,
    }
}

fn money_rules(gt: &CanonicalInvoice, t: Target, delta: Decimal) -> Vec<RuleEffect> {
    use RuleId::*;
    match t {
        Target::Header(spec) => match spec.path {
            "invoice.net_amount" => vec![shift(R1HeaderSum, delta, None), shift(R3LinesVsNet, -delta, None)],
            "invoice.tax_amount" => vec![shift(R1HeaderSum, delta, None), shift(R4TaxLinesVsTax, -delta, None)],
            "invoice.roundoff_amount" | "invoice.gross_amount" => vec![shift(R1HeaderSum, delta, None)],
            _ => Vec::new(),
        },
        Target::RowField(i, "unit_price") => {
            let qty = gt.line_items[i].quantity.as_qty().map(|q| q.to_decimal());
            qty.map_or_else(Vec::new, |q| vec![shift(R2LineArithmetic, q * delta, Some(i))])
        }
        Target::RowField(i, "line_total") => {
            vec![shift(R2LineArithmetic, delta, Some(i)), shift(R3LinesVsNet, -delta, None)]
        }
        Target::TaxField(_, "tax_amount") => vec![shift(R4TaxLinesVsTax, -delta, None)],
        _ => Vec::new(),
    }
}

fn drop_rules(gt: &CanonicalInvoice, t: Target) -> Vec<RuleEffect> {
    use RuleChange::*;
    use RuleId::*;
    match t {
        Target::Header(spec) => match spec.path {
            "invoice.net_amount" => vec![effect(R1HeaderSum, Disable), effect(R3LinesVsNet, Disable)],
            "invoice.tax_amount" => vec![effect(R1HeaderSum, Disable), effect(R4TaxLinesVsTax, Disable)],
            "invoice.gross_amount" => vec![effect(R1HeaderSum, Disable)],
            "invoice.roundoff_amount" => {
                // An absent roundoff counts as zero.
                vec![shift(R1HeaderSum, -money_of(gt.header(spec.path)).to_decimal(), None)]
            }
            _ => Vec::new(),
        },
        Target::RowField(_, "quantity" | "unit_price") => vec![effect(R2LineArithmetic, RemoveOperand)],
        Target::RowField(i, "line_total") => vec![
            effect(R2LineArithmetic, RemoveOperand),
            effect(R3LinesVsNet, RemoveOperand),
            shift(R3LinesVsNet, -money_of(&gt.line_items[i].line_total).to_decimal(), None),
        ],
        _ => Vec::new(),
    }
}

fn row_rules(gt: &CanonicalInvoice, row: usize, add: bool) -> Vec<RuleEffect> {
    use RuleId::*;
    let line = &gt.line_items[row];
    let op = if add { RuleChange::AddOperand } else { RuleChange::RemoveOperand };
    let mut out = Vec::new();
    if line.quantity.is_present() && line.unit_price.is_present() && line.line_total.is_present() {
        out.push(effect(R2LineArithmetic, op.clone()));
    }
    if let Some(total) = line.line_total.as_money() {
        out.push(effect(R3LinesVsNet, op));
        let t = total.to_decimal();
        out.push(shift(R3LinesVsNet, if add { t } else { -t }, None));
    }
    out
}

fn draw(rng: &mut impl Rng, lo: i64, hi: i64) -> i64 {
    rng.gen_range(lo..=hi)
}

fn check_spec(spec: &ErrorSpec) -> Result<(), SynthError> {
    let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
    let m = &spec.magnitudes;
    if m.money_delta.0 < 0 || m.money_delta.1 < m.money_delta.0.max(1) {
        return bad("money_delta must be a non-negative range reaching at least 1");
    }
    if m.date_delta_days.0 < 0 || m.date_delta_days.1 < m.date_delta_days.0.max(1) {
        return bad("date_delta_days must be a non-negative range reaching at least 1");
    }
    if m.text_edits.0 < 1 || m.text_edits.1 < m.text_edits.0 {
        return bad("text_edits must be a range starting at 1 or more");
    }
    if spec.within_tolerance.money > spec.counts.perturb_money {
        return bad("within_tolerance.money exceeds perturb_money");
    }
    if spec.within_tolerance.date > spec.counts.perturb_date {
        return bad("within_tolerance.date exceeds perturb_date");
    }
    Ok(())
}

enum Op {
    Set(Target, FieldValue),
    DropRow(usize),
    DuplicateRow(usize),
}

/// Applies the error spec to a copy of `gt` and records what each error
/// must do to the scores under `cfg`. Nothing is mutated if it
/// cannot be satisfied.
pub fn inject_errors(
    gt: &CanonicalInvoice,
    spec: &ErrorSpec,
    cfg: &EvalConfig,
) -> Result<(CanonicalInvoice, ErrorLedger), SynthError> {
    check_spec(spec)?;
    let doms = domains(gt, spec.seed, spec.drop_arithmetic_fields);
    for kind in ErrorKind::ALL {
        let (requested, available) = (spec.counts.get(kind), doms[&kind].len());
        if requested > available {
            return Err(SynthError::Infeasible { kind: kind.as_str(), requested, available });
        }
    }
    let mcfg = &cfg.matching;
    let mag = &spec.magnitudes;
    let mut ops = Vec::new();
    let mut entries = Vec::new();
    for kind in ErrorKind::ALL {
        for (n, &t) in doms[&kind].iter().take(spec.counts.get(kind)).enumerate() {
            let path = t.path();
            let mut rng = rng_for(spec.seed, &format!("{}:{path}", kind.as_str()), 0);
            let (expected, rules) = match kind {
                ErrorKind::DropField => {
                    ops.push(Op::Set(t, FieldValue::Absent));
                    (Expectation::Field { class: MatchClass::Missing }, drop_rules(gt, t))
                }
                ErrorKind::PerturbMoney => {
                    let g = money_of(value_at(gt, t));
                    let tol = mcfg.money_abs_tol.max(mcfg.money_rel_tol * g.to_decimal().abs());
                    let tol_units = (tol * Decimal::from(10i64.pow(g.scale))).floor().to_i64().unwrap_or(i64::MAX);
                    let within = n < spec.within_tolerance.money;
                    let delta = if within {
                        if tol_units < 1 {
                            return Err(SynthError::InvalidSpec(format!("no money tolerance to stay within at {path}")));
                        }
                        draw(&mut rng, 1, tol_units)
                    } else {
                        tol_units + draw(&mut rng, mag.money_delta.0.max(1), mag.money_delta.1)
                    };
                    let moved = MonetaryAmount::new(g.minor_units + money_sign(t) * delta, g.scale, g.currency)
                        .expect("same scale");
                    ops.push(Op::Set(t, FieldValue::Money(moved)));
                    let class = if within { MatchClass::CorrectRelaxed } else { MatchClass::Incorrect };
                    (Expectation::Field { class }, money_rules(gt, t, Decimal::new(delta, g.scale)))
                }
                ErrorKind::PerturbDate => {
                    let FieldValue::Date(g) = value_at(gt, t) else { unreachable!("date target") };
                    let tol = i64::from(mcfg.date_tol_days);
                    let within = n < spec.within_tolerance.date;
                    let delta = if within {
                        if tol < 1 {
                            return Err(SynthError::InvalidSpec("date tolerance is zero".into()));
                        }
                        draw(&mut rng, 1, tol)
                    } else {
                        tol + draw(&mut rng, mag.date_delta_days.0.max(1), mag.date_delta_days.1)
                    };
                    let day = g.epoch_day().expect("valid ground truth date");
                    let moved = DateValue::from_epoch_day(day + delta)
                        .ok_or_else(|| SynthError::InvalidSpec(format!("date delta leaves the calendar at {path}")))?;
                    ops.push(Op::Set(t, FieldValue::Date(moved)));
                    let class = if within { MatchClass::CorrectRelaxed } else { MatchClass::Incorrect };
                    (Expectation::Field { class }, Vec::new())
                }
                ErrorKind::CorruptText => {
                    let k = rng.gen_range(mag.text_edits.0..=mag.text_edits.1);
                    let (corrupted, class) = match value_at(gt, t) {
                        FieldValue::Text(s) => {
                            let n = normalize_text(s, &cfg.normalization).chars().count();
                            let similarity = 1.0 - (k as f64) / ((n + k) as f64);
                            let class = if similarity >= mcfg.relaxed_text_threshold {
                                MatchClass::CorrectRelaxed
                            } else {
                                MatchClass::Incorrect
                            };
                            (FieldValue::Text(insert_marks(s, k, &mut rng)), class)
                        }
                        FieldValue::Identifier(s) => {
                            (FieldValue::Identifier(insert_marks(s, k, &mut rng)), MatchClass::Incorrect)
                        }
                        other => unreachable!("text target holds {other:?}"),
                    };
                    ops.push(Op::Set(t, corrupted));
                    (Expectation::Field { class }, Vec::new())
                }
                ErrorKind::DropRow => {
                    let Target::Row(r) = t else { unreachable!("row target") };
                    ops.push(Op::DropRow(r));
                    (Expectation::Omission { row: r }, row_rules(gt, r, false))
                }
                ErrorKind::DuplicateRow => {
                    let Target::Row(r) = t else { unreachable!("row target") };
                    ops.push(Op::DuplicateRow(r));
                    (Expectation::Duplication { row: r }, row_rules(gt, r, true))
                }
                ErrorKind::SpuriousField => {
                    let Target::Header(fs) = t else { unreachable!("header target") };
                    ops.push(Op::Set(t, spurious_value(fs.ty)));
                    (Expectation::Field { class: MatchClass::Spurious }, Vec::new())
                }
            };
            entries.push(LedgerEntry { kind, target: path, expected, rules });
        }
    }

    let mut pred = gt.clone();
    let mut dropped = Vec::new();
    let mut copies = Vec::new();
    for op in ops {
        match op {
            Op::Set(t, v) => set_value(&mut pred, t, v),
            Op::DropRow(r) => dropped.push(r),
            Op::DuplicateRow(r) => copies.push(gt.line_items[r].clone()),
        }
    }
    pred.line_items = pred
        .line_items
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !dropped.contains(i))
        .map(|(_, row)| row)
        .collect();
    pred.line_items.extend(copies);
    Ok((pred, ErrorLedger { seed: spec.seed, entries }))
}

/// Inserts `k` copies of `#` as one block right after a random visible
/// character, so the edit distance to the original is exactly `k`.
fn insert_marks(s: &str, k: usize, rng: &mut impl Rng) -> String {
    let visible: Vec<usize> = s.char_indices().filter(|(_, c)| !c.is_whitespace()).map(|(i, c)| i + c.len_utf8()).collect();
    let at = visible[rng.gen_range(0..visible.len())];
    format!("{}{}{}", &s[..at], "#".repeat(k), &s[at..])
}

fn spurious_value(ty: SemanticType) -> FieldValue {
    match ty {
        SemanticType::Text => FieldValue::Text("Unrequested remark".into()),
        SemanticType::Identifier => FieldValue::Identifier("SPUR-0001".into()),
        SemanticType::Date => FieldValue::Date(DateValue::new(2020, 1, 1)),
        other => unreachable!("no spurious value for {other:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_invoice, GenConfig};

    fn gt() -> CanonicalInvoice {
        generate_invoice(11, &GenConfig::default()).unwrap().0
    }

    #[test]
    fn zero_spec_is_identity() {
        let gt = gt();
        let (pred, ledger) = inject_errors(&gt, &ErrorSpec::with_seed(3), &EvalConfig::default()).unwrap();
        assert_eq!(pred, gt);
        assert!(ledger.entries.is_empty());
    }

    #[test]
    fn infeasible_spec_is_rejected() {
        let gt = gt();
        let mut spec = ErrorSpec::with_seed(3);
        spec.counts.drop_field = 1000;
        assert!(matches!(inject_errors(&gt, &spec, &EvalConfig::default()), Err(SynthError::Infeasible { .. })));
        spec.counts.drop_field = 0;
        spec.counts.spurious_field = 1;
        assert!(inject_errors(&gt, &spec, &EvalConfig::default()).is_err());
    }

    #[test]
    fn gross_perturbation_flips_r1() {
        let gt = gt();
        let cfg = EvalConfig::default();
        // Search seeds for one whose first money target is the gross amount.
        let seed = (0..500)
            .find(|s| domains(&gt, *s, false)[&ErrorKind::PerturbMoney][0].path() == "invoice.gross_amount")
            .unwrap();
        let mut spec = ErrorSpec::with_seed(seed);
        spec.counts.perturb_money = 1;
        let (pred, ledger) = inject_errors(&gt, &spec, &cfg).unwrap();
        let e = &ledger.entries[0];
        assert_eq!(e.expected, Expectation::Field { class: MatchClass::Incorrect });
        assert_eq!(e.rules.len(), 1);
        assert_eq!(e.rules[0].rule, RuleId::R1HeaderSum);
        assert!(pred.header("invoice.gross_amount") != gt.header("invoice.gross_amount"));
    }

    #[test]
    fn counts_grow_by_appending() {
        let gt = gt();
        let cfg = EvalConfig::default();
        let cap = capacity(&gt, 9, false);
        let mut small = ErrorSpec::with_seed(9);
        small.counts.drop_field = cap.drop_field.min(1);
        let mut large = small;
        large.counts.drop_field = cap.drop_field;
        let (_, a) = inject_errors(&gt, &small, &cfg).unwrap();
        let (_, b) = inject_errors(&gt, &large, &cfg).unwrap();
        assert_eq!(a.entries[..], b.entries[..a.entries.len()]);
    }

    #[test]
    fn marks_form_one_block() {
        let mut rng = rng_for(1, "t", 0);
        for _ in 0..50 {
            let out = insert_marks("ab cd", 3, &mut rng);
            assert_eq!(out.replace("###", ""), "ab cd");
            assert!(!out.starts_with('#') && !out.contains(" #"));
        }
    }
}
