//! Arithmetic business rules over a single invoice.
//!
//! R1: net + tax + roundoff = gross. R2: quantity × unit price = line total
//! for every line. R3: Σ line totals = net. R4: Σ tax-line amounts = tax.

use std::fmt;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{CanonicalInvoice, Currency, FieldValue, MonetaryAmount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "R1_header_sum")]
    R1HeaderSum,
    #[serde(rename = "R2_line_arithmetic")]
    R2LineArithmetic,
    #[serde(rename = "R3_lines_vs_net")]
    R3LinesVsNet,
    #[serde(rename = "R4_tax_lines_vs_tax")]
    R4TaxLinesVsTax,
}

impl RuleId {
    pub const ALL: [RuleId; 4] =
        [RuleId::R1HeaderSum, RuleId::R2LineArithmetic, RuleId::R3LinesVsNet, RuleId::R4TaxLinesVsTax];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::R1HeaderSum => "R1_header_sum",
            RuleId::R2LineArithmetic => "R2_line_arithmetic",
            RuleId::R3LinesVsNet => "R3_lines_vs_net",
            RuleId::R4TaxLinesVsTax => "R4_tax_lines_vs_tax",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotApplicable => "not_applicable",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyResult {
    pub rule_id: RuleId,
    pub status: Status,
    pub residual: Option<Decimal>,
    pub detail: String,
}

impl ConsistencyResult {
    fn not_applicable(rule_id: RuleId, detail: impl Into<String>) -> Self {
        Self { rule_id, status: Status::NotApplicable, residual: None, detail: detail.into() }
    }

    fn judged(rule_id: RuleId, residual: Decimal, tol: Decimal, detail: String) -> Self {
        let status = if residual.abs() <= tol { Status::Pass } else { Status::Fail };
        Self { rule_id, status, residual: Some(residual), detail }
    }
}

impl fmt::Display for ConsistencyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let residual = self.residual.map_or_else(|| "n/a".to_string(), |r| r.to_string());
        let line = format!("{:<20} {:<15} residual {:<12} {}", self.rule_id.as_str(), self.status.as_str(), residual, self.detail);
        f.write_str(line.trim_end())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{rule}: operands mix currencies {first} and {second}")]
pub struct CurrencyMixture {
    pub rule: RuleId,
    pub first: Currency,
    pub second: Currency,
}

/// Checks that all known currencies among `amounts` agree.
fn single_currency<'a>(
    rule: RuleId,
    amounts: impl IntoIterator<Item = &'a MonetaryAmount>,
) -> Result<(), CurrencyMixture> {
    let mut seen: Option<Currency> = None;
    for m in amounts {
        if m.currency.is_unknown() {
            continue;
        }
        match seen {
            Some(c) if c != m.currency => return Err(CurrencyMixture { rule, first: c, second: m.currency }),
            _ => seen = Some(m.currency),
        }
    }
    Ok(())
}

fn money(v: &FieldValue) -> Option<&MonetaryAmount> {
    v.as_money()
}

pub fn check_r1_header(inv: &CanonicalInvoice, tol: Decimal) -> Result<ConsistencyResult, CurrencyMixture> {
    let rule = RuleId::R1HeaderSum;
    let net = money(inv.header("invoice.net_amount"));
    let tax = money(inv.header("invoice.tax_amount"));
    let gross = money(inv.header("invoice.gross_amount"));
    let roundoff = money(inv.header("invoice.roundoff_amount"));
    let (Some(net), Some(tax), Some(gross)) = (net, tax, gross) else {
        return Ok(ConsistencyResult::not_applicable(rule, "net, tax or gross absent"));
    };
    single_currency(rule, [net, tax, gross].into_iter().chain(roundoff))?;
    let roundoff = roundoff.map_or(Decimal::ZERO, MonetaryAmount::to_decimal);
    let residual = net.to_decimal() + tax.to_decimal() + roundoff - gross.to_decimal();
    Ok(ConsistencyResult::judged(rule, residual, tol, String::new()))
}

pub fn check_r2_lines(inv: &CanonicalInvoice, tol: Decimal) -> Result<ConsistencyResult, CurrencyMixture> {
    let rule = RuleId::R2LineArithmetic;
    let mut worst: Option<Decimal> = None;
    let mut failing = Vec::new();
    for (i, line) in inv.line_items.iter().enumerate() {
        let (Some(qty), Some(price), Some(total)) =
            (line.quantity.as_qty(), money(&line.unit_price), money(&line.line_total))
        else {
            continue;
        };
        single_currency(rule, [price, total])?;
        let product = (qty.to_decimal() * price.to_decimal())
            .round_dp_with_strategy(total.scale, RoundingStrategy::MidpointAwayFromZero);
        let residual = product - total.to_decimal();
        if residual.abs() > tol {
            failing.push(i);
        }
        if worst.map_or(true, |w| residual.abs() > w.abs()) {
            worst = Some(residual);
        }
    }
    let Some(residual) = worst else {
        return Ok(ConsistencyResult::not_applicable(rule, "no line with quantity, unit price and total"));
    };
    let detail = if failing.is_empty() {
        String::new()
    } else {
        let list: Vec<String> = failing.iter().map(ToString::to_string).collect();
        format!("failing lines: {}", list.join(", "))
    };
    Ok(ConsistencyResult::judged(rule, residual, tol, detail))
}

pub fn check_r3_lines_vs_net(inv: &CanonicalInvoice, tol: Decimal) -> Result<ConsistencyResult, CurrencyMixture> {
    let rule = RuleId::R3LinesVsNet;
    let totals: Vec<&MonetaryAmount> = inv.line_items.iter().filter_map(|l| money(&l.line_total)).collect();
    let Some(net) = money(inv.header("invoice.net_amount")) else {
        return Ok(ConsistencyResult::not_applicable(rule, "net absent"));
    };
    if totals.is_empty() {
        return Ok(ConsistencyResult::not_applicable(rule, "no line totals"));
    }
    single_currency(rule, totals.iter().copied().chain([net]))?;
    let sum: Decimal = totals.iter().map(|m| m.to_decimal()).sum();
    Ok(ConsistencyResult::judged(rule, sum - net.to_decimal(), tol, String::new()))
}

pub fn check_r4_tax_lines(inv: &CanonicalInvoice, tol: Decimal) -> Result<ConsistencyResult, CurrencyMixture> {
    let rule = RuleId::R4TaxLinesVsTax;
    let amounts: Vec<&MonetaryAmount> = inv.tax_lines.iter().filter_map(|t| money(&t.tax_amount)).collect();
    let Some(tax) = money(inv.header("invoice.tax_amount")) else {
        return Ok(ConsistencyResult::not_applicable(rule, "tax absent"));
    };
    if amounts.is_empty() {
        return Ok(ConsistencyResult::not_applicable(rule, "no tax-line amounts"));
    }
    single_currency(rule, amounts.iter().copied().chain([tax]))?;
    let sum: Decimal = amounts.iter().map(|m| m.to_decimal()).sum();
    Ok(ConsistencyResult::judged(rule, sum - tax.to_decimal(), tol, String::new()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentConsistency {
    /// Always four results in rule order.
    pub results: Vec<ConsistencyResult>,
    pub verdict: Status,
}

impl DocumentConsistency {
    pub fn status(&self, rule: RuleId) -> Status {
        self.results[rule.index()].status
    }
}

pub fn verdict(statuses: impl IntoIterator<Item = Status>) -> Status {
    let mut any_pass = false;
    for s in statuses {
        match s {
            Status::Fail => return Status::Fail,
            Status::Pass => any_pass = true,
            Status::NotApplicable => {}
        }
    }
    if any_pass {
        Status::Pass
    } else {
        Status::NotApplicable
    }
}

pub fn check_invoice(inv: &CanonicalInvoice, tol: Decimal) -> Result<DocumentConsistency, CurrencyMixture> {
    let results = vec![
        check_r1_header(inv, tol)?,
        check_r2_lines(inv, tol)?,
        check_r3_lines_vs_net(inv, tol)?,
        check_r4_tax_lines(inv, tol)?,
    ];
    let verdict = verdict(results.iter().map(|r| r.status));
    Ok(DocumentConsistency { results, verdict })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyCounts {
    pub pass: usize,
    pub fail: usize,
    pub not_applicable: usize,
    pub r2_pass: usize,
    pub r2_fail: usize,
}

impl ConsistencyCounts {
    pub fn add(&mut self, verdict: Status, r2: Status) {
        match verdict {
            Status::Pass => self.pass += 1,
            Status::Fail => self.fail += 1,
            Status::NotApplicable => self.not_applicable += 1,
        }
        match r2 {
            Status::Pass => self.r2_pass += 1,
            Status::Fail => self.r2_fail += 1,
            Status::NotApplicable => {}
        }
    }

    pub fn merge(&mut self, other: &ConsistencyCounts) {
        self.pass += other.pass;
        self.fail += other.fail;
        self.not_applicable += other.not_applicable;
        self.r2_pass += other.r2_pass;
        self.r2_fail += other.r2_fail;
    }

    /// Pass / (Pass + Fail); `None` when no document is applicable.
    pub fn pass_rate(&self) -> Option<f64> {
        ratio(self.pass, self.pass + self.fail)
    }

    /// Share of applicable per-line arithmetic evaluations that fail.
    pub fn math_error_rate(&self) -> Option<f64> {
        ratio(self.r2_fail, self.r2_pass + self.r2_fail)
    }
}

pub(crate) fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Tallies document verdicts and their R2 statuses.
pub fn pass_rate(docs: &[DocumentConsistency]) -> ConsistencyCounts {
    let mut counts = ConsistencyCounts::default();
    for d in docs {
        counts.add(d.verdict, d.status(RuleId::R2LineArithmetic));
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{LineItem, Quantity, TaxLine};

    fn eur(s: &str) -> FieldValue {
        let d = Decimal::from_str_exact(s).unwrap();
        FieldValue::Money(MonetaryAmount::from_decimal(d, "EUR".parse().unwrap()).unwrap())
    }

    fn qty(s: &str) -> FieldValue {
        FieldValue::Qty(Quantity::from_decimal(Decimal::from_str_exact(s).unwrap()).unwrap())
    }

    fn tol() -> Decimal {
        Decimal::new(1, 2)
    }

    fn header(net: &str, tax: &str, gross: &str) -> CanonicalInvoice {
        let mut inv = CanonicalInvoice::default();
        inv.set_header("invoice.net_amount", eur(net));
        inv.set_header("invoice.tax_amount", eur(tax));
        inv.set_header("invoice.roundoff_amount", eur("0.00"));
        inv.set_header("invoice.gross_amount", eur(gross));
        inv
    }

    fn line(q: &str, price: &str, total: &str) -> LineItem {
        LineItem { quantity: qty(q), unit_price: eur(price), line_total: eur(total), ..LineItem::default() }
    }

    #[test]
    fn r1_examples() {
        let r = check_r1_header(&header("100.00", "19.00", "119.00"), tol()).unwrap();
        assert_eq!((r.status, r.residual), (Status::Pass, Some(Decimal::ZERO)));
        let r = check_r1_header(&header("100.00", "19.00", "120.00"), tol()).unwrap();
        assert_eq!((r.status, r.residual), (Status::Fail, Some(Decimal::new(-100, 2))));
        let mut inv = header("100.00", "19.00", "119.00");
        inv.set_header("invoice.net_amount", FieldValue::Absent);
        assert_eq!(check_r1_header(&inv, tol()).unwrap().status, Status::NotApplicable);
        let mut inv = header("100.00", "19.00", "119.00");
        inv.set_header(
            "invoice.tax_amount",
            FieldValue::Money(MonetaryAmount::new(1900, 2, "USD".parse().unwrap()).unwrap()),
        );
        assert!(check_r1_header(&inv, tol()).is_err());
    }

    #[test]
    fn r2_examples() {
        let mut inv = CanonicalInvoice::default();
        inv.line_items.push(line("3", "10.00", "30.00"));
        assert_eq!(check_r2_lines(&inv, tol()).unwrap().status, Status::Pass);
        inv.line_items.push(line("3", "10.00", "31.00"));
        let r = check_r2_lines(&inv, tol()).unwrap();
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.detail, "failing lines: 1");
        // 2.5 × 0.333 = 0.8325, which rounds to 0.83 at two places.
        let mut inv = CanonicalInvoice::default();
        inv.line_items.push(line("2.5", "0.333", "0.83"));
        let r = check_r2_lines(&inv, tol()).unwrap();
        assert_eq!((r.status, r.residual), (Status::Pass, Some(Decimal::ZERO)));
        assert_eq!(check_r2_lines(&CanonicalInvoice::default(), tol()).unwrap().status, Status::NotApplicable);
    }

    #[test]
    fn r3_r4_examples() {
        let mut inv = header("100.00", "19.00", "119.00");
        assert_eq!(check_r3_lines_vs_net(&inv, tol()).unwrap().status, Status::NotApplicable);
        inv.line_items.push(line("1", "30.00", "30.00"));
        inv.line_items.push(line("1", "70.00", "70.00"));
        assert_eq!(check_r3_lines_vs_net(&inv, tol()).unwrap().status, Status::Pass);
        inv.set_header("invoice.net_amount", eur("99.00"));
        let r = check_r3_lines_vs_net(&inv, tol()).unwrap();
        assert_eq!((r.status, r.residual), (Status::Fail, Some(Decimal::new(100, 2))));

        let mut inv = header("100.00", "19.00", "119.00");
        assert_eq!(check_r4_tax_lines(&inv, tol()).unwrap().status, Status::NotApplicable);
        for amount in ["9.00", "10.00"] {
            inv.tax_lines.push(TaxLine { tax_amount: eur(amount), ..TaxLine::default() });
        }
        assert_eq!(check_r4_tax_lines(&inv, tol()).unwrap().status, Status::Pass);
        inv.set_header("invoice.tax_amount", eur("20.00"));
        let r = check_r4_tax_lines(&inv, tol()).unwrap();
        assert_eq!((r.status, r.residual), (Status::Fail, Some(Decimal::new(-100, 2))));
    }

    #[test]
    fn document_verdicts() {
        let mut inv = header("100.00", "19.00", "119.00");
        inv.line_items.push(line("1", "100.00", "100.00"));
        inv.tax_lines.push(TaxLine { tax_amount: eur("19.00"), ..TaxLine::default() });
        let doc = check_invoice(&inv, tol()).unwrap();
        assert_eq!(doc.verdict, Status::Pass);
        inv.set_header("invoice.gross_amount", eur("118.00"));
        let doc = check_invoice(&inv, tol()).unwrap();
        assert_eq!(doc.verdict, Status::Fail);
        assert_eq!(doc.status(RuleId::R2LineArithmetic), Status::Pass);
        let doc = check_invoice(&CanonicalInvoice::default(), tol()).unwrap();
        assert_eq!(doc.verdict, Status::NotApplicable);
    }

    #[test]
    fn rates() {
        let mut c = ConsistencyCounts::default();
        for i in 0..100 {
            c.add(if i < 80 { Status::Pass } else { Status::Fail }, Status::NotApplicable);
        }
        assert_eq!(c.pass_rate(), Some(0.80));
        let mut c = ConsistencyCounts::default();
        for i in 0..100 {
            c.add(if i < 93 { Status::Pass } else { Status::Fail }, Status::Pass);
        }
        assert_eq!(c.pass_rate(), Some(0.93));
        let mut c = ConsistencyCounts::default();
        c.add(Status::NotApplicable, Status::NotApplicable);
        assert_eq!((c.pass_rate(), c.math_error_rate()), (None, None));
    }
}
