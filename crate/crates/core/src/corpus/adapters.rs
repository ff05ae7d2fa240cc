//! Prediction adapters: canonical records, flat key/value exports and
//! schema-constrained nested output with confidences.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::normalize::{parse_typed, NormalizationPolicy};
use crate::schema::json::{decode_invoice, decode_value, Diagnostic};
use crate::schema::registry::{self, Entity, FieldSpec};
use crate::schema::{row_path, CanonicalInvoice, Currency, FieldValue, LineItem, TableRow, TaxLine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    #[default]
    Canonical,
    FlatKv,
    SchemaLlm,
}

impl FromStr for AdapterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical" => Ok(AdapterKind::Canonical),
            "flat_kv" => Ok(AdapterKind::FlatKv),
            "schema_llm" => Ok(AdapterKind::SchemaLlm),
            other => Err(format!("unknown adapter {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionEnvelope {
    pub method_name: String,
    pub invoice: CanonicalInvoice,
    pub confidences: BTreeMap<String, f64>,
    pub rationales: BTreeMap<String, String>,
    /// Extractor-reported processing time for the whole document.
    pub processing_seconds: Option<f64>,
    pub diagnostics: Vec<Diagnostic>,
}

impl PredictionEnvelope {
    pub fn empty(method_name: &str) -> Self {
        Self {
            method_name: method_name.to_string(),
            invoice: CanonicalInvoice::default(),
            confidences: BTreeMap::new(),
            rationales: BTreeMap::new(),
            processing_seconds: None,
            diagnostics: Vec::new(),
        }
    }
}

/// Converts raw prediction bytes. Malformed content never fails: it yields
/// an envelope whose diagnostics describe what was dropped.
pub fn adapt_prediction(
    bytes: &[u8],
    adapter: AdapterKind,
    method_name: &str,
    policy: &NormalizationPolicy,
) -> PredictionEnvelope {
    let mut env = PredictionEnvelope::empty(method_name);
    let text = match std::str::from_utf8(bytes) {
        Ok(t) => t,
        Err(e) => {
            env.diagnostics.push(Diagnostic::new("", format!("not UTF-8: {e}")));
            return env;
        }
    };
    let raw: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            env.diagnostics.push(Diagnostic::new("", format!("invalid JSON at line {}, column {}", e.line(), e.column())));
            return env;
        }
    };
    let Some(obj) = raw.as_object() else {
        env.diagnostics.push(Diagnostic::new("", "expected a JSON object"));
        return env;
    };
    read_envelope_keys(obj, &mut env);
    match adapter {
        AdapterKind::Canonical => {
            let (inv, diags) = decode_invoice(&raw);
            env.invoice = inv;
            env.diagnostics.extend(diags);
        }
        AdapterKind::FlatKv => adapt_flat(obj, policy, &mut env),
        AdapterKind::SchemaLlm => adapt_nested(obj, policy, &mut env),
    }
    env.diagnostics.sort();
    env
}

fn read_envelope_keys(obj: &Map<String, Value>, env: &mut PredictionEnvelope) {
    if let Some(v) = obj.get("processing_seconds") {
        match v.as_f64().filter(|s| *s >= 0.0) {
            Some(s) => env.processing_seconds = Some(s),
            None => env.diagnostics.push(Diagnostic::new("processing_seconds", "expected a non-negative number")),
        }
    }
    if let Some(name) = obj.get("method_name").and_then(Value::as_str) {
        if name != env.method_name {
            env.diagnostics.push(Diagnostic::new("method_name", format!("file names method {name:?}")));
        }
    }
    if let Some(map) = obj.get("confidences").and_then(Value::as_object) {
        for (path, v) in map {
            match v.as_f64() {
                Some(c) if (0.0..=1.0).contains(&c) && registry::lookup(path).is_some() => {
                    env.confidences.insert(path.clone(), c);
                }
                _ => env.diagnostics.push(Diagnostic::new(format!("confidences.{path}"), "invalid confidence")),
            }
        }
    }
    if let Some(map) = obj.get("rationales").and_then(Value::as_object) {
        for (path, v) in map {
            if let Some(s) = v.as_str() {
                env.rationales.insert(path.clone(), s.to_string());
            }
        }
    }
}

/// Default flat-export vocabulary. Bare field names and full paths are
/// always accepted in addition to these.
const HEADER_ALIASES: &[(&str, &str)] = &[
    ("invoice_no", "invoice.invoice_number"),
    ("invoice_id", "invoice.invoice_number"),
    ("inv_no", "invoice.invoice_number"),
    ("invoice_date", "invoice.issue_date"),
    ("date", "invoice.issue_date"),
    ("due", "invoice.due_date"),
    ("terms", "invoice.payment_terms"),
    ("currency_code", "invoice.currency"),
    ("subtotal", "invoice.net_amount"),
    ("net", "invoice.net_amount"),
    ("net_total", "invoice.net_amount"),
    ("tax", "invoice.tax_amount"),
    ("vat", "invoice.tax_amount"),
    ("vat_amount", "invoice.tax_amount"),
    ("tax_total", "invoice.tax_amount"),
    ("rounding", "invoice.roundoff_amount"),
    ("roundoff", "invoice.roundoff_amount"),
    ("total", "invoice.gross_amount"),
    ("total_amount", "invoice.gross_amount"),
    ("grand_total", "invoice.gross_amount"),
    ("amount_due", "invoice.gross_amount"),
    ("vendor", "supplier.seller_name"),
    ("vendor_name", "supplier.seller_name"),
    ("supplier_name", "supplier.seller_name"),
    ("seller", "supplier.seller_name"),
    ("vendor_address", "supplier.seller_address"),
    ("supplier_address", "supplier.seller_address"),
    ("vat_id", "supplier.supplier_tax_id"),
    ("vendor_tax_id", "supplier.supplier_tax_id"),
    ("seller_tax_id", "supplier.supplier_tax_id"),
    ("iban", "supplier.bank_account"),
    ("customer", "bill_to.buyer_name"),
    ("customer_name", "bill_to.buyer_name"),
    ("buyer", "bill_to.buyer_name"),
    ("customer_address", "bill_to.buyer_address"),
    ("customer_tax_id", "bill_to.buyer_tax_id"),
    ("buyer_vat_id", "bill_to.buyer_tax_id"),
];

const LINE_ALIASES: &[(&str, &str)] = &[
    ("desc", "description"),
    ("item", "description"),
    ("name", "description"),
    ("qty", "quantity"),
    ("price", "unit_price"),
    ("amount", "line_total"),
    ("total", "line_total"),
    ("vat_rate", "tax_rate"),
    ("vat", "tax_rate"),
];

const TAX_ALIASES: &[(&str, &str)] = &[
    ("vat_rate", "rate"),
    ("tax_rate", "rate"),
    ("base", "taxable_base"),
    ("net", "taxable_base"),
    ("amount", "tax_amount"),
    ("tax", "tax_amount"),
    ("vat", "tax_amount"),
];

const ROW_KEYS: [&str; 2] = ["rows", "line_items"];
const TAX_ROW_KEYS: [&str; 2] = ["tax_rows", "tax_lines"];
const IGNORED_KEYS: [&str; 4] = ["processing_seconds", "method_name", "confidences", "rationales"];

/// Resolves a flat header key to its registry entry.
fn header_spec(key: &str, policy: &NormalizationPolicy) -> Option<&'static FieldSpec> {
    let k = key.to_lowercase();
    let target = policy
        .field_aliases
        .get(&k)
        .map(String::as_str)
        .or_else(|| HEADER_ALIASES.iter().find(|(a, _)| *a == k).map(|(_, p)| *p));
    if let Some(path) = target {
        return registry::lookup(path).filter(|s| is_header(s));
    }
    if let Some(spec) = registry::lookup(&k).filter(|s| is_header(s)) {
        return Some(spec);
    }
    registry::header_fields().find(|s| s.name == k)
}

fn is_header(spec: &FieldSpec) -> bool {
    matches!(spec.entity, Entity::BillTo | Entity::Supplier | Entity::Invoice)
}

/// Resolves a row key to a field name of table `R`.
fn row_field<R: TableRow>(key: &str, aliases: &[(&str, &'static str)], policy: &NormalizationPolicy) -> Option<&'static str> {
    let k = key.to_lowercase();
    if let Some(path) = policy.field_aliases.get(&k) {
        if let Some((table, field)) = path.split_once('.') {
            if table == R::TABLE {
                return R::FIELDS.iter().copied().find(|f| *f == field);
            }
        }
    }
    R::FIELDS
        .iter()
        .copied()
        .find(|f| *f == k)
        .or_else(|| aliases.iter().find(|(a, _)| *a == k).map(|(_, f)| *f))
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Parses one raw value into the field's type; failures become `Absent`.
fn typed(spec: &FieldSpec, path: &str, raw: &Value, policy: &NormalizationPolicy, diags: &mut Vec<Diagnostic>) -> FieldValue {
    if raw.is_null() {
        return FieldValue::Absent;
    }
    if raw.is_object() && spec.ty == crate::schema::SemanticType::Money {
        return decode_value(spec.ty, raw).unwrap_or_else(|msg| {
            diags.push(Diagnostic::new(path, msg));
            FieldValue::Absent
        });
    }
    let Some(text) = scalar_text(raw) else {
        diags.push(Diagnostic::new(path, format!("unsupported value {raw}")));
        return FieldValue::Absent;
    };
    match parse_typed(spec.ty, &text, policy) {
        Ok(v) => v,
        Err(e) => {
            diags.push(Diagnostic::new(path, e.to_string()));
            FieldValue::Absent
        }
    }
}

/// A policy whose default currency is the document's declared currency,
/// so bare amounts pick it up.
fn document_policy(declared: Option<&Value>, policy: &NormalizationPolicy) -> NormalizationPolicy {
    let mut p = policy.clone();
    if let Some(code) = declared.and_then(Value::as_str).and_then(|s| s.trim().parse::<Currency>().ok()) {
        p.default_currency = code;
    }
    p
}

fn adapt_flat(obj: &Map<String, Value>, policy: &NormalizationPolicy, env: &mut PredictionEnvelope) {
    let declared = obj.iter().find(|(k, _)| header_spec(k, policy).is_some_and(|s| s.path == "invoice.currency"));
    let policy = document_policy(declared.map(|(_, v)| v), policy);
    let diags = &mut env.diagnostics;
    let inv = &mut env.invoice;
    for (key, raw) in obj {
        if ROW_KEYS.contains(&key.as_str()) {
            inv.line_items = flat_rows::<LineItem>(raw, LINE_ALIASES, &policy, diags);
        } else if TAX_ROW_KEYS.contains(&key.as_str()) {
            inv.tax_lines = flat_rows::<TaxLine>(raw, TAX_ALIASES, &policy, diags);
        } else if IGNORED_KEYS.contains(&key.as_str()) {
        } else if let Some(spec) = header_spec(key, &policy) {
            if inv.header(spec.path).is_present() {
                diags.push(Diagnostic::new(spec.path, format!("duplicate key {key:?} ignored")));
                continue;
            }
            let value = typed(spec, spec.path, raw, &policy, diags);
            inv.set_header(spec.path, value);
        } else {
            diags.push(Diagnostic::new(key.clone(), "unmappable key dropped"));
        }
    }
}

fn flat_rows<R: TableRow + Default>(
    raw: &Value,
    aliases: &[(&str, &'static str)],
    policy: &NormalizationPolicy,
    diags: &mut Vec<Diagnostic>,
) -> Vec<R> {
    let Some(items) = raw.as_array() else {
        diags.push(Diagnostic::new(R::TABLE, "expected an array of rows"));
        return Vec::new();
    };
    let mut rows = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let mut row = R::default();
        let Some(obj) = item.as_object() else {
            diags.push(Diagnostic::new(format!("{}[{i}]", R::TABLE), "expected an object"));
            rows.push(row);
            continue;
        };
        for (key, v) in obj {
            let Some(field) = row_field::<R>(key, aliases, policy) else {
                diags.push(Diagnostic::new(format!("{}[{i}].{key}", R::TABLE), "unmappable key dropped"));
                continue;
            };
            let path = row_path(R::TABLE, i, field);
            let spec = registry::lookup(&path).expect("row field");
            *row.field_mut(field).expect("row field") = typed(spec, &path, v, policy, diags);
        }
        rows.push(row);
    }
    rows
}

/// Splits a `{value, confidence, rationale}` wrapper; plain values pass through.
fn unwrap_scored<'a>(raw: &'a Value, path: &str, env: &mut PredictionEnvelope) -> &'a Value {
    let Some(obj) = raw.as_object().filter(|o| o.contains_key("value")) else {
        return raw;
    };
    if let Some(c) = obj.get("confidence").and_then(Value::as_f64) {
        if (0.0..=1.0).contains(&c) {
            env.confidences.insert(path.to_string(), c);
        } else {
            env.diagnostics.push(Diagnostic::new(path, "confidence outside [0, 1]"));
        }
    }
    if let Some(r) = obj.get("rationale").and_then(Value::as_str) {
        env.rationales.insert(path.to_string(), r.to_string());
    }
    &obj["value"]
}

fn adapt_nested(obj: &Map<String, Value>, policy: &NormalizationPolicy, env: &mut PredictionEnvelope) {
    let declared = obj.get("invoice").and_then(|i| i.get("currency")).map(|v| {
        v.as_object().and_then(|o| o.get("value")).unwrap_or(v).clone()
    });
    let policy = document_policy(declared.as_ref(), policy);
    for (key, raw) in obj {
        match key.as_str() {
            "bill_to" | "supplier" | "invoice" => {
                let entity = match key.as_str() {
                    "bill_to" => Entity::BillTo,
                    "supplier" => Entity::Supplier,
                    _ => Entity::Invoice,
                };
                nested_entity(entity, raw, &policy, env);
            }
            "line_items" => env.invoice.line_items = nested_rows::<LineItem>(raw, &policy, env),
            "tax_lines" => env.invoice.tax_lines = nested_rows::<TaxLine>(raw, &policy, env),
            k if IGNORED_KEYS.contains(&k) => {}
            _ => env.diagnostics.push(Diagnostic::new(key.clone(), "unmappable key dropped")),
        }
    }
}

fn nested_entity(entity: Entity, raw: &Value, policy: &NormalizationPolicy, env: &mut PredictionEnvelope) {
    if raw.is_null() {
        return;
    }
    let Some(fields) = raw.as_object() else {
        env.diagnostics.push(Diagnostic::new(entity.as_str(), "expected an object"));
        return;
    };
    for (name, v) in fields {
        let path = format!("{}.{}", entity.as_str(), name);
        let Some(spec) = registry::header_lookup(entity, name) else {
            env.diagnostics.push(Diagnostic::new(path, "unmappable key dropped"));
            continue;
        };
        let inner = unwrap_scored(v, &path, env).clone();
        let value = typed(spec, &path, &inner, policy, &mut env.diagnostics);
        env.invoice.set_header(spec.path, value);
    }
}

fn nested_rows<R: TableRow + Default>(raw: &Value, policy: &NormalizationPolicy, env: &mut PredictionEnvelope) -> Vec<R> {
    if raw.is_null() {
        return Vec::new();
    }
    let Some(items) = raw.as_array() else {
        env.diagnostics.push(Diagnostic::new(R::TABLE, "expected an array"));
        return Vec::new();
    };
    let mut rows = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let mut row = R::default();
        if let Some(obj) = item.as_object() {
            for (name, v) in obj {
                let path = row_path(R::TABLE, i, name);
                let Some(spec) = registry::lookup(&path) else {
                    env.diagnostics.push(Diagnostic::new(path, "unmappable key dropped"));
                    continue;
                };
                let inner = unwrap_scored(v, &path, env).clone();
                let value = typed(spec, &path, &inner, policy, &mut env.diagnostics);
                *row.field_mut(name).expect("row field") = value;
            }
        } else {
            env.diagnostics.push(Diagnostic::new(format!("{}[{i}]", R::TABLE), "expected an object"));
        }
        rows.push(row);
    }
    rows
}
