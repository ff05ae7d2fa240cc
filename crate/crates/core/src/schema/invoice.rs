//! The five-entity canonical invoice record and its structural validation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::registry::{self, Entity, FieldSpec};
use super::value::{FieldValue, ValueKind, MAX_SCALE};

/// Field values of one header entity, keyed by field name.
///
/// `Absent` is never stored: setting a field to `Absent` removes it, so two
/// records that differ only in omitted-vs-null fields compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityFields(BTreeMap<String, FieldValue>);

static ABSENT: FieldValue = FieldValue::Absent;

impl EntityFields {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> &FieldValue {
        self.0.get(name).unwrap_or(&ABSENT)
    }

    pub fn set(&mut self, name: impl Into<String>, value: FieldValue) {
        let name = name.into();
        if value.is_absent() {
            self.0.remove(&name);
        } else {
            self.0.insert(name, value);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FieldValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<K: Into<String>> FromIterator<(K, FieldValue)> for EntityFields {
    fn from_iter<T: IntoIterator<Item = (K, FieldValue)>>(iter: T) -> Self {
        let mut fields = EntityFields::new();
        for (k, v) in iter {
            fields.set(k, v);
        }
        fields
    }
}

/// A fixed-shape table row (line item or tax line).
pub trait TableRow {
    /// Collection key in the canonical record, e.g. `line_items`.
    const TABLE: &'static str;
    const FIELDS: &'static [&'static str];

    fn field(&self, name: &str) -> &FieldValue;
    fn field_mut(&mut self, name: &str) -> Option<&mut FieldValue>;

    fn present_fields(&self) -> usize {
        Self::FIELDS.iter().filter(|f| self.field(f).is_present()).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineItem {
    pub description: FieldValue,
    pub quantity: FieldValue,
    pub unit_price: FieldValue,
    pub line_total: FieldValue,
    /// Percent, e.g. `19`.
    pub tax_rate: FieldValue,
}

impl TableRow for LineItem {
    const TABLE: &'static str = "line_items";
    const FIELDS: &'static [&'static str] =
        &["description", "quantity", "unit_price", "line_total", "tax_rate"];

    fn field(&self, name: &str) -> &FieldValue {
        match name {
            "description" => &self.description,
            "quantity" => &self.quantity,
            "unit_price" => &self.unit_price,
            "line_total" => &self.line_total,
            "tax_rate" => &self.tax_rate,
            _ => &ABSENT,
        }
    }

    fn field_mut(&mut self, name: &str) -> Option<&mut FieldValue> {
        match name {
            "description" => Some(&mut self.description),
            "quantity" => Some(&mut self.quantity),
            "unit_price" => Some(&mut self.unit_price),
            "line_total" => Some(&mut self.line_total),
            "tax_rate" => Some(&mut self.tax_rate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaxLine {
    pub rate: FieldValue,
    pub taxable_base: FieldValue,
    pub tax_amount: FieldValue,
}

impl TableRow for TaxLine {
    const TABLE: &'static str = "tax_lines";
    const FIELDS: &'static [&'static str] = &["rate", "taxable_base", "tax_amount"];

    fn field(&self, name: &str) -> &FieldValue {
        match name {
            "rate" => &self.rate,
            "taxable_base" => &self.taxable_base,
            "tax_amount" => &self.tax_amount,
            _ => &ABSENT,
        }
    }

    fn field_mut(&mut self, name: &str) -> Option<&mut FieldValue> {
        match name {
            "rate" => Some(&mut self.rate),
            "taxable_base" => Some(&mut self.taxable_base),
            "tax_amount" => Some(&mut self.tax_amount),
            _ => None,
        }
    }
}

pub type BoundingBox = [f64; 4];

/// Ground-truth or predicted invoice record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CanonicalInvoice {
    pub bill_to: EntityFields,
    pub supplier: EntityFields,
    pub invoice: EntityFields,
    pub line_items: Vec<LineItem>,
    pub tax_lines: Vec<TaxLine>,
    /// Pass-through layout metadata keyed by field path; never evaluated.
    pub boxes: BTreeMap<String, BoundingBox>,
}

impl CanonicalInvoice {
    pub fn entity(&self, entity: Entity) -> Option<&EntityFields> {
        match entity {
            Entity::BillTo => Some(&self.bill_to),
            Entity::Supplier => Some(&self.supplier),
            Entity::Invoice => Some(&self.invoice),
            Entity::LineItem | Entity::TaxLine => None,
        }
    }

    pub fn entity_mut(&mut self, entity: Entity) -> Option<&mut EntityFields> {
        match entity {
            Entity::BillTo => Some(&mut self.bill_to),
            Entity::Supplier => Some(&mut self.supplier),
            Entity::Invoice => Some(&mut self.invoice),
            Entity::LineItem | Entity::TaxLine => None,
        }
    }

    /// Value of a header field path such as `invoice.gross_amount`.
    pub fn header(&self, path: &str) -> &FieldValue {
        match registry::lookup(path) {
            Some(spec) => self.entity(spec.entity).map_or(&ABSENT, |e| e.get(spec.name)),
            None => &ABSENT,
        }
    }

    pub fn set_header(&mut self, path: &str, value: FieldValue) -> bool {
        let Some(spec) = registry::lookup(path) else { return false };
        match self.entity_mut(spec.entity) {
            Some(fields) => {
                fields.set(spec.name, value);
                true
            }
            None => false,
        }
    }

    /// Resolves any concrete field path: header paths plus
    /// `line_items[i].field` and `tax_lines[i].field`.
    pub fn resolve(&self, path: &str) -> Option<&FieldValue> {
        let spec = registry::lookup(path)?;
        match spec.entity {
            Entity::LineItem => {
                let idx = row_index(path)?;
                Some(self.line_items.get(idx)?.field(spec.name))
            }
            Entity::TaxLine => {
                let idx = row_index(path)?;
                Some(self.tax_lines.get(idx)?.field(spec.name))
            }
            _ => Some(self.header(path)),
        }
    }

    pub fn resolve_mut(&mut self, path: &str) -> Option<&mut FieldValue> {
        let spec = registry::lookup(path)?;
        match spec.entity {
            Entity::LineItem => self.line_items.get_mut(row_index(path)?)?.field_mut(spec.name),
            Entity::TaxLine => self.tax_lines.get_mut(row_index(path)?)?.field_mut(spec.name),
            _ => None,
        }
    }

    /// Number of present fields that count towards accuracy.
    pub fn present_field_count(&self) -> usize {
        let header = registry::header_fields()
            .filter(|f| f.in_accuracy && self.header(f.path).is_present())
            .count();
        let rows: usize = self.line_items.iter().map(TableRow::present_fields).sum();
        let taxes: usize = self.tax_lines.iter().map(TableRow::present_fields).sum();
        header + rows + taxes
    }
}

/// Parses the `[n]` index out of `line_items[n].field`.
pub fn row_index(path: &str) -> Option<usize> {
    let open = path.find('[')?;
    let close = path.find(']')?;
    path.get(open + 1..close)?.parse().ok()
}

pub fn row_path(table: &str, index: usize, field: &str) -> String {
    format!("{table}[{index}].{field}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Digital,
    Scanned,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Digital => "digital",
            SourceKind::Scanned => "scanned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateSplit {
    #[default]
    Seen,
    Unseen,
}

impl TemplateSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateSplit::Seen => "seen",
            TemplateSplit::Unseen => "unseen",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub doc_id: String,
    pub source_kind: SourceKind,
    pub language: String,
    pub vendor_id: String,
    pub template_id: String,
    #[serde(default)]
    pub template_split: TemplateSplit,
    pub page_count: u32,
}

impl DocumentMeta {
    pub fn check(&self) -> Result<(), String> {
        let lang = self.language.as_bytes();
        if lang.len() != 2 || !lang.iter().all(u8::is_ascii_lowercase) {
            return Err(format!("{}: language must be a 2-letter lowercase code", self.doc_id));
        }
        if self.page_count == 0 {
            return Err(format!("{}: page_count must be positive", self.doc_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ViolationKind {
    UnknownField,
    TypeMismatch { expected: ValueKind, found: ValueKind },
    InvalidDate,
    InvalidScale,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::UnknownField => write!(f, "unknown field {}", self.path),
            ViolationKind::TypeMismatch { expected, found } => {
                write!(f, "type mismatch at {} (expected {expected}, found {found})", self.path)
            }
            ViolationKind::InvalidDate => write!(f, "invalid calendar date at {}", self.path),
            ViolationKind::InvalidScale => {
                write!(f, "scale exceeds {MAX_SCALE} at {}", self.path)
            }
        }
    }
}

fn check_value(path: String, spec: &FieldSpec, value: &FieldValue, out: &mut Vec<Violation>) {
    if value.is_absent() {
        return;
    }
    let expected = spec.ty.value_kind();
    if value.kind() != expected {
        out.push(Violation {
            path,
            kind: ViolationKind::TypeMismatch { expected, found: value.kind() },
        });
        return;
    }
    match value {
        FieldValue::Date(d) if !d.is_valid() => {
            out.push(Violation { path, kind: ViolationKind::InvalidDate })
        }
        FieldValue::Money(m) if m.scale > MAX_SCALE => {
            out.push(Violation { path, kind: ViolationKind::InvalidScale })
        }
        FieldValue::Qty(q) if q.scale > MAX_SCALE => {
            out.push(Violation { path, kind: ViolationKind::InvalidScale })
        }
        _ => {}
    }
}

fn check_rows<R: TableRow>(rows: &[R], out: &mut Vec<Violation>) {
    for (i, row) in rows.iter().enumerate() {
        for name in R::FIELDS {
            let path = row_path(R::TABLE, i, name);
            if let Some(spec) = registry::lookup(&path) {
                check_value(path, spec, row.field(name), out);
            }
        }
    }
}

/// Checks a record against the registry and returns every violation found.
pub fn validate_invoice(record: &CanonicalInvoice) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    for entity in [Entity::BillTo, Entity::Supplier, Entity::Invoice] {
        let fields = record.entity(entity).expect("header entity");
        for (name, value) in fields.iter() {
            let path = format!("{}.{}", entity.as_str(), name);
            match registry::header_lookup(entity, name) {
                Some(spec) => check_value(path, spec, value, &mut violations),
                None => violations.push(Violation { path, kind: ViolationKind::UnknownField }),
            }
        }
    }
    check_rows(&record.line_items, &mut violations);
    check_rows(&record.tax_lines, &mut violations);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
