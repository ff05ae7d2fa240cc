use std::collections::BTreeMap;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::{ErrorLedger, Expectation, RuleChange};
use crate::config::EvalConfig;
use crate::consistency::{ratio, ConsistencyCounts, RuleId, Status};
use crate::matching::MatchClass;
use crate::metrics::{Accuracy, ClassCounts, MetricBlock, PresenceF1};
use crate::schema::registry::{self, Entity};
use crate::schema::{CanonicalInvoice, TableRow};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCounts {
    pub gt_rows: usize,
    pub matched: usize,
    pub omissions: usize,
    pub duplications: usize,
}

impl TableCounts {
    pub fn completeness(&self) -> f64 {
        ratio(self.matched, self.gt_rows).unwrap_or(1.0)
    }
}

/// Metric values a corpus must score, derived by counting ledger entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpectedMetrics {
    pub documents: usize,
    pub counts: ClassCounts,
    pub entities: BTreeMap<Entity, ClassCounts>,
    pub line_items: TableCounts,
    pub tax_lines: TableCounts,
    pub consistency: ConsistencyCounts,
}

impl ExpectedMetrics {
    pub fn accuracy(&self) -> Accuracy {
        self.counts.accuracy()
    }

    pub fn presence(&self) -> PresenceF1 {
        self.counts.presence()
    }

    pub fn pass_rate(&self) -> Option<f64> {
        self.consistency.pass_rate()
    }

    pub fn math_error_rate(&self) -> Option<f64> {
        self.consistency.math_error_rate()
    }

    /// Every disagreement with an evaluated metric block; empty when equal.
    pub fn mismatches(&self, m: &MetricBlock) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: &str, equal: bool, detail: String| {
            if !equal {
                out.push(format!("{name}: {detail}"));
            }
        };
        check("documents", self.documents == m.documents, format!("{} vs {}", self.documents, m.documents));
        check("counts", self.counts == m.counts, format!("{:?} vs {:?}", self.counts, m.counts));
        for (e, c) in &self.entities {
            let got = m.entities.get(e).map(|x| x.counts).unwrap_or_default();
            check(e.as_str(), *c == got, format!("{c:?} vs {got:?}"));
        }
        check("accuracy", self.accuracy() == m.accuracy, format!("{:?} vs {:?}", self.accuracy(), m.accuracy));
        check("presence", self.presence() == m.presence, format!("{:?} vs {:?}", self.presence(), m.presence));
        for (name, want, got) in [("line_items", self.line_items, &m.line_items), ("tax_lines", self.tax_lines, &m.tax_lines)] {
            let equal = want.gt_rows == got.gt_rows
                && want.matched == got.matched
                && want.omissions == got.omissions
                && want.duplications == got.duplications
                && want.completeness() == got.completeness;
            check(name, equal, format!("{want:?} vs {got:?}"));
        }
        check(
            "consistency",
            self.consistency == m.consistency.counts
                && self.pass_rate() == m.consistency.pass_rate
                && self.math_error_rate() == m.consistency.math_error_rate,
            format!("{:?} vs {:?}", self.consistency, m.consistency.counts),
        );
        out
    }
}

#[derive(Default)]
struct Tally(BTreeMap<(Entity, MatchClass), i64>);

impl Tally {
    fn add(&mut self, e: Entity, c: MatchClass, n: i64) {
        *self.0.entry((e, c)).or_default() += n;
    }

    fn row<R: TableRow>(&mut self, e: Entity, row: &R, present: MatchClass, absent: Option<MatchClass>, n: i64) {
        for f in R::FIELDS {
            if row.field(f).is_present() {
                self.add(e, present, n);
            } else if let Some(a) = absent {
                self.add(e, a, n);
            }
        }
    }
}

struct RuleState {
    operands: i64,
    disabled: bool,
    residual: Decimal,
    lines: BTreeMap<usize, Decimal>,
}

impl RuleState {
    fn new(operands: i64) -> Self {
        Self { operands, disabled: false, residual: Decimal::ZERO, lines: BTreeMap::new() }
    }

    fn status(&self, tol: Decimal) -> Status {
        if self.disabled || self.operands <= 0 {
            Status::NotApplicable
        } else if self.residual.abs() > tol || self.lines.values().any(|r| r.abs() > tol) {
            Status::Fail
        } else {
            Status::Pass
        }
    }
}

fn baseline_rules(gt: &CanonicalInvoice) -> [RuleState; 4] {
    let present = |p: &str| gt.header(p).is_present();
    let header = |ok: bool, n: usize| RuleState::new(if ok { n as i64 } else { 0 });
    let complete = gt
        .line_items
        .iter()
        .filter(|l| l.quantity.is_present() && l.unit_price.is_present() && l.line_total.is_present())
        .count();
    let totals = gt.line_items.iter().filter(|l| l.line_total.is_present()).count();
    let amounts = gt.tax_lines.iter().filter(|t| t.tax_amount.is_present()).count();
    [
        header(present("invoice.net_amount") && present("invoice.tax_amount") && present("invoice.gross_amount"), 1),
        RuleState::new(complete as i64),
        header(present("invoice.net_amount"), totals),
        header(present("invoice.tax_amount"), amounts),
    ]
}

fn entity_of(target: &str) -> Entity {
    registry::lookup(target).expect("ledger targets are registry paths").entity
}

/// Expected corpus metrics for ground truths whose predictions were made
/// by `inject_errors` with the matching ledgers. Ground truths are assumed
/// arithmetically consistent, as the generator builds them.
pub fn expected_report(docs: &[(&CanonicalInvoice, &ErrorLedger)], cfg: &EvalConfig) -> ExpectedMetrics {
    let tol = cfg.consistency.tolerance;
    let mut tally = Tally::default();
    let mut out = ExpectedMetrics { documents: docs.len(), ..Default::default() };
    for (gt, ledger) in docs {
        for spec in registry::header_fields() {
            let class = if gt.header(spec.path).is_present() { MatchClass::CorrectExact } else { MatchClass::BothAbsent };
            tally.add(spec.entity, class, 1);
        }
        for row in &gt.line_items {
            tally.row(Entity::LineItem, row, MatchClass::CorrectExact, Some(MatchClass::BothAbsent), 1);
        }
        for row in &gt.tax_lines {
            tally.row(Entity::TaxLine, row, MatchClass::CorrectExact, Some(MatchClass::BothAbsent), 1);
        }
        let mut lines = TableCounts { gt_rows: gt.line_items.len(), matched: gt.line_items.len(), ..Default::default() };
        let mut rules = baseline_rules(gt);
        for entry in &ledger.entries {
            match entry.expected {
                Expectation::Field { class } => {
                    let e = entity_of(&entry.target);
                    let was = if class == MatchClass::Spurious { MatchClass::BothAbsent } else { MatchClass::CorrectExact };
                    tally.add(e, was, -1);
                    tally.add(e, class, 1);
                }
                Expectation::Omission { row } => {
                    let r = &gt.line_items[row];
                    tally.row(Entity::LineItem, r, MatchClass::CorrectExact, Some(MatchClass::BothAbsent), -1);
                    tally.row(Entity::LineItem, r, MatchClass::Missing, None, 1);
                    lines.matched -= 1;
                    lines.omissions += 1;
                }
                Expectation::Duplication { row } => {
                    tally.row(Entity::LineItem, &gt.line_items[row], MatchClass::Spurious, None, 1);
                    lines.duplications += 1;
                }
            }
            for effect in &entry.rules {
                let state = &mut rules[effect.rule.index()];
                match &effect.change {
                    RuleChange::Shift { amount, line: Some(i) } => *state.lines.entry(*i).or_default() += *amount,
                    RuleChange::Shift { amount, line: None } => state.residual += *amount,
                    RuleChange::Disable => state.disabled = true,
                    RuleChange::RemoveOperand => state.operands -= 1,
                    RuleChange::AddOperand => state.operands += 1,
                }
            }
        }
        let statuses: Vec<Status> = rules.iter().map(|r| r.status(tol)).collect();
        out.consistency.add(crate::consistency::verdict(statuses.iter().copied()), statuses[RuleId::R2LineArithmetic.index()]);
        out.line_items.gt_rows += lines.gt_rows;
        out.line_items.matched += lines.matched;
        out.line_items.omissions += lines.omissions;
        out.line_items.duplications += lines.duplications;
        out.tax_lines.gt_rows += gt.tax_lines.len();
        out.tax_lines.matched += gt.tax_lines.len();
    }
    for e in Entity::ALL {
        out.entities.insert(e, ClassCounts::default());
    }
    for ((e, class), n) in tally.0 {
        let n = usize::try_from(n).expect("counts never go negative");
        out.counts.add_n(class, n);
        out.entities.get_mut(&e).expect("all entities").add_n(class, n);
    }
    out
}
