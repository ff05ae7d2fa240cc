//! Document-, entity-, corpus- and stratum-level metrics. Corpus numbers
//! pool integer counts across documents before dividing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::TableCompleteness;
use crate::config::EvalConfig;
use crate::consistency::{ratio, ConsistencyCounts, DocumentConsistency, Status};
use crate::matching::{FieldOutcome, MatchClass};
use crate::schema::json::Diagnostic;
use crate::schema::registry::{self, Entity};
use crate::schema::DocumentMeta;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub correct_exact: usize,
    pub correct_relaxed: usize,
    pub incorrect: usize,
    pub missing: usize,
    pub spurious: usize,
    pub both_absent: usize,
}

impl ClassCounts {
    pub fn add(&mut self, class: MatchClass) {
        *self.slot(class) += 1;
    }

    pub fn add_n(&mut self, class: MatchClass, n: usize) {
        *self.slot(class) += n;
    }

    fn slot(&mut self, class: MatchClass) -> &mut usize {
        match class {
            MatchClass::CorrectExact => &mut self.correct_exact,
            MatchClass::CorrectRelaxed => &mut self.correct_relaxed,
            MatchClass::Incorrect => &mut self.incorrect,
            MatchClass::Missing => &mut self.missing,
            MatchClass::Spurious => &mut self.spurious,
            MatchClass::BothAbsent => &mut self.both_absent,
        }
    }

    pub fn get(&self, class: MatchClass) -> usize {
        match class {
            MatchClass::CorrectExact => self.correct_exact,
            MatchClass::CorrectRelaxed => self.correct_relaxed,
            MatchClass::Incorrect => self.incorrect,
            MatchClass::Missing => self.missing,
            MatchClass::Spurious => self.spurious,
            MatchClass::BothAbsent => self.both_absent,
        }
    }

    pub fn merge(&mut self, other: &ClassCounts) {
        for class in MatchClass::ALL {
            self.add_n(class, other.get(class));
        }
    }

    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a FieldOutcome>) -> Self {
        let mut counts = ClassCounts::default();
        for o in outcomes {
            counts.add(o.class);
        }
        counts
    }

    pub fn correct(&self) -> usize {
        self.correct_exact + self.correct_relaxed
    }

    /// Fields with a present ground-truth value.
    pub fn annotated(&self) -> usize {
        self.correct() + self.incorrect + self.missing
    }

    pub fn accuracy(&self) -> Accuracy {
        let overall = ratio(self.correct(), self.annotated());
        Accuracy { overall, exact_only: ratio(self.correct_exact, self.annotated()), relaxed_included: overall }
    }

    pub fn presence(&self) -> PresenceF1 {
        let both = self.correct() + self.incorrect;
        PresenceF1 {
            presence_only: Prf::from_counts(both, self.spurious, self.missing),
            presence_and_correctness: Prf::from_counts(
                self.correct(),
                self.spurious + self.incorrect,
                self.missing + self.incorrect,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub overall: Option<f64>,
    pub exact_only: Option<f64>,
    pub relaxed_included: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Undefined precision or recall is reported as 0, as is F1 when P + R = 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp).unwrap_or(0.0);
        let recall = ratio(tp, tp + fn_).unwrap_or(0.0);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { tp, fp, fn_, precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresenceF1 {
    /// A field counts as found when both sides are present.
    pub presence_only: Prf,
    /// A field counts as found only when also correct.
    pub presence_and_correctness: Prf,
}

/// Rounds `100 × num / den` half-up to an integer.
pub fn percent(num: usize, den: usize) -> Option<u64> {
    (den > 0).then(|| ((200 * num as u128 + den as u128) / (2 * den as u128)) as u64)
}

pub fn field_accuracy(outcomes: &[FieldOutcome]) -> Accuracy {
    ClassCounts::from_outcomes(outcomes).accuracy()
}

pub fn presence_f1(outcomes: &[FieldOutcome]) -> PresenceF1 {
    ClassCounts::from_outcomes(outcomes).presence()
}

/// Entity of an outcome path; unknown paths fall under the invoice header.
fn entity_of(path: &str) -> Entity {
    registry::lookup(path).map_or(Entity::Invoice, |spec| spec.entity)
}

pub fn entity_counts(outcomes: &[FieldOutcome]) -> BTreeMap<Entity, ClassCounts> {
    let mut map: BTreeMap<Entity, ClassCounts> = Entity::ALL.iter().map(|e| (*e, ClassCounts::default())).collect();
    for o in outcomes {
        map.get_mut(&entity_of(&o.field_path)).expect("all entities").add(o.class);
    }
    map
}

pub fn entity_breakdown(outcomes: &[FieldOutcome]) -> BTreeMap<Entity, Option<f64>> {
    entity_counts(outcomes).into_iter().map(|(e, c)| (e, c.accuracy().overall)).collect()
}

/// Everything measured for one (document, method) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub doc_id: String,
    pub counts: ClassCounts,
    pub entities: BTreeMap<Entity, ClassCounts>,
    pub line_items: TableCompleteness,
    pub tax_lines: TableCompleteness,
    pub consistency: Option<DocumentConsistency>,
    /// Set when the consistency checks could not run (mixed currencies).
    pub consistency_fault: Option<String>,
    pub verdict: Status,
    pub seconds: Option<f64>,
    pub pages: u32,
    pub diagnostics: Vec<Diagnostic>,
    pub outcomes: Vec<FieldOutcome>,
}

impl DocumentScore {
    pub fn r2_status(&self) -> Status {
        self.consistency
            .as_ref()
            .map_or(Status::NotApplicable, |c| c.status(crate::consistency::RuleId::R2LineArithmetic))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TableMetrics {
    pub gt_rows: usize,
    pub matched: usize,
    pub omissions: usize,
    pub duplications: usize,
    pub completeness: f64,
}

impl TableMetrics {
    fn pool<'a>(tables: impl IntoIterator<Item = &'a TableCompleteness>) -> Self {
        let mut m = TableMetrics::default();
        for t in tables {
            m.gt_rows += t.gt_rows;
            m.matched += t.matched;
            m.omissions += t.omissions;
            m.duplications += t.duplications;
        }
        m.completeness = ratio(m.matched, m.gt_rows).unwrap_or(1.0);
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyMetrics {
    pub counts: ConsistencyCounts,
    pub pass_rate: Option<f64>,
    pub pass_rate_pct: Option<u64>,
    pub math_error_rate: Option<f64>,
    pub math_error_pct: Option<u64>,
}

impl ConsistencyMetrics {
    fn from_counts(counts: ConsistencyCounts) -> Self {
        Self {
            counts,
            pass_rate: counts.pass_rate(),
            pass_rate_pct: percent(counts.pass, counts.pass + counts.fail),
            math_error_rate: counts.math_error_rate(),
            math_error_pct: percent(counts.r2_fail, counts.r2_pass + counts.r2_fail),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingMetrics {
    pub timed_documents: usize,
    pub total_seconds: f64,
    pub pages: u64,
    pub seconds_per_page: Option<f64>,
    pub mean_seconds_per_document: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityMetrics {
    pub counts: ClassCounts,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub documents: usize,
    pub counts: ClassCounts,
    pub accuracy: Accuracy,
    pub accuracy_pct: Option<u64>,
    /// Mean of per-document accuracies, for comparison with the pooled value.
    pub macro_accuracy: Option<f64>,
    pub entities: BTreeMap<Entity, EntityMetrics>,
    pub presence: PresenceF1,
    pub line_items: TableMetrics,
    pub tax_lines: TableMetrics,
    pub consistency: ConsistencyMetrics,
    pub timing: TimingMetrics,
    pub diagnostics: usize,
}

impl MetricBlock {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a DocumentScore> + Clone) -> Self {
        let mut counts = ClassCounts::default();
        let mut entities: BTreeMap<Entity, ClassCounts> =
            Entity::ALL.iter().map(|e| (*e, ClassCounts::default())).collect();
        let mut consistency = ConsistencyCounts::default();
        let mut documents = 0;
        let mut diagnostics = 0;
        let mut macro_sum = 0.0;
        let mut macro_n = 0;
        let mut timing = TimingMetrics {
            timed_documents: 0,
            total_seconds: 0.0,
            pages: 0,
            seconds_per_page: None,
            mean_seconds_per_document: None,
        };
        for d in docs.clone() {
            documents += 1;
            counts.merge(&d.counts);
            for (e, c) in &d.entities {
                entities.entry(*e).or_default().merge(c);
            }
            consistency.add(d.verdict, d.r2_status());
            diagnostics += d.diagnostics.len();
            if let Some(acc) = d.counts.accuracy().overall {
                macro_sum += acc;
                macro_n += 1;
            }
            if let Some(s) = d.seconds {
                timing.timed_documents += 1;
                timing.total_seconds += s;
                timing.pages += u64::from(d.pages);
            }
        }
        if timing.timed_documents > 0 {
            timing.mean_seconds_per_document = Some(timing.total_seconds / timing.timed_documents as f64);
            if timing.pages > 0 {
                timing.seconds_per_page = Some(timing.total_seconds / timing.pages as f64);
            }
        }
        Self {
            documents,
            counts,
            accuracy: counts.accuracy(),
            accuracy_pct: percent(counts.correct(), counts.annotated()),
            macro_accuracy: (macro_n > 0).then(|| macro_sum / macro_n as f64),
            entities: entities
                .into_iter()
                .map(|(e, c)| (e, EntityMetrics { counts: c, accuracy: c.accuracy().overall }))
                .collect(),
            presence: counts.presence(),
            line_items: TableMetrics::pool(docs.clone().into_iter().map(|d| &d.line_items)),
            tax_lines: TableMetrics::pool(docs.into_iter().map(|d| &d.tax_lines)),
            consistency: ConsistencyMetrics::from_counts(consistency),
            timing,
            diagnostics,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    SourceKind,
    Language,
    VendorId,
    TemplateSplit,
}

impl Dimension {
    pub const ALL: [Dimension; 4] =
        [Dimension::SourceKind, Dimension::Language, Dimension::VendorId, Dimension::TemplateSplit];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::SourceKind => "source_kind",
            Dimension::Language => "language",
            Dimension::VendorId => "vendor_id",
            Dimension::TemplateSplit => "template_split",
        }
    }

    pub fn key(self, meta: &DocumentMeta) -> String {
        match self {
            Dimension::SourceKind => meta.source_kind.as_str().to_string(),
            Dimension::Language => meta.language.clone(),
            Dimension::VendorId => meta.vendor_id.clone(),
            Dimension::TemplateSplit => meta.template_split.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub dimension: Dimension,
    pub key: String,
    pub metrics: MetricBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no document metadata for {0}")]
    MissingMeta(String),
}

pub fn stratify(
    docs: &[DocumentScore],
    metas: &BTreeMap<String, DocumentMeta>,
    dimension: Dimension,
) -> Result<Vec<Stratum>, MetricsError> {
    let mut groups: BTreeMap<String, Vec<&DocumentScore>> = BTreeMap::new();
    for d in docs {
        let meta = metas.get(&d.doc_id).ok_or_else(|| MetricsError::MissingMeta(d.doc_id.clone()))?;
        groups.entry(dimension.key(meta)).or_default().push(d);
    }
    Ok(groups
        .into_iter()
        .map(|(key, members)| Stratum { dimension, key, metrics: MetricBlock::from_documents(members) })
        .collect())
}

/// Per-field counts keyed by registry path.
pub fn field_counts(docs: &[DocumentScore]) -> BTreeMap<String, ClassCounts> {
    let mut map: BTreeMap<String, ClassCounts> = BTreeMap::new();
    for d in docs {
        for o in &d.outcomes {
            map.entry(registry::registry_path(&o.field_path).into_owned()).or_default().add(o.class);
        }
    }
    map
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub metrics: MetricBlock,
    pub fields: BTreeMap<String, ClassCounts>,
    pub strata: Vec<Stratum>,
    pub documents: Vec<DocumentScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub corpus_id: String,
    pub config: EvalConfig,
    pub methods: BTreeMap<String, MethodReport>,
}

/// Builds one method's report. Documents are sorted by id first so the
/// result never depends on completion order.
pub fn aggregate_corpus(
    mut docs: Vec<DocumentScore>,
    metas: &BTreeMap<String, DocumentMeta>,
) -> Result<MethodReport, MetricsError> {
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let mut strata = Vec::new();
    for dim in Dimension::ALL {
        strata.extend(stratify(&docs, metas, dim)?);
    }
    Ok(MethodReport { metrics: MetricBlock::from_documents(&docs), fields: field_counts(&docs), strata, documents: docs })
}
