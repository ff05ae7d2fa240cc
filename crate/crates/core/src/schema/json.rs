//! Canonical invoice JSON codec.
//!
//! Dates are `"YYYY-MM-DD"`, money is `{"amount": "1234.56", "currency": "EUR"}`,
//! quantities are decimal strings (JSON numbers are accepted on input), and
//! absent fields are either omitted or `null`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use super::invoice::{row_path, CanonicalInvoice, EntityFields, LineItem, TableRow, TaxLine};
use super::registry::{self, Entity, SemanticType};
use super::value::{parse_plain_decimal, Currency, DateValue, FieldValue, MonetaryAmount, Quantity};

/// Top-level keys that may accompany the five entities without a diagnostic.
pub const ENVELOPE_KEYS: [&str; 6] =
    ["meta", "boxes", "confidences", "rationales", "processing_seconds", "method_name"];

/// A non-fatal problem found while decoding, attached to a field path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum InvoiceFileError {
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid invoice record: {}", join(.0))]
    Invalid(Vec<Diagnostic>),
}

fn join(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl From<serde_json::Error> for InvoiceFileError {
    fn from(e: serde_json::Error) -> Self {
        InvoiceFileError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

pub fn encode_value(value: &FieldValue) -> Value {
    match value {
        FieldValue::Text(s) | FieldValue::Identifier(s) => Value::String(s.clone()),
        FieldValue::Date(d) => Value::String(d.to_string()),
        FieldValue::Money(m) => json!({"amount": m.amount_string(), "currency": m.currency.as_str()}),
        FieldValue::Qty(q) => Value::String(q.to_string()),
        FieldValue::Absent => Value::Null,
    }
}

/// Decodes one JSON value as the given semantic type. `null` is `Absent`.
pub fn decode_value(ty: SemanticType, raw: &Value) -> Result<FieldValue, String> {
    if raw.is_null() {
        return Ok(FieldValue::Absent);
    }
    match ty {
        SemanticType::Text => match raw {
            Value::String(s) => Ok(FieldValue::Text(s.clone())),
            other => Err(format!("expected a string, found {other}")),
        },
        SemanticType::Identifier => match raw {
            Value::String(s) => Ok(FieldValue::Identifier(s.clone())),
            other => Err(format!("expected a string, found {other}")),
        },
        SemanticType::Date => match raw {
            Value::String(s) => DateValue::parse_iso(s).map(FieldValue::Date).map_err(|e| e.to_string()),
            other => Err(format!("expected a date string, found {other}")),
        },
        SemanticType::Money => {
            let obj = raw.as_object().ok_or_else(|| format!("expected a money object, found {raw}"))?;
            let amount = decimal_text(obj.get("amount").unwrap_or(&Value::Null))
                .ok_or("money amount must be a decimal string")?;
            let currency = match obj.get("currency") {
                None | Some(Value::Null) => Currency::Unknown,
                Some(Value::String(c)) => c.parse().map_err(|e: super::value::ValueError| e.to_string())?,
                Some(other) => return Err(format!("invalid currency {other}")),
            };
            if let Some(extra) = obj.keys().find(|k| *k != "amount" && *k != "currency") {
                return Err(format!("unexpected money key {extra:?}"));
            }
            let value = parse_plain_decimal(&amount).map_err(|e| e.to_string())?;
            MonetaryAmount::from_decimal(value, currency).map(FieldValue::Money).map_err(|e| e.to_string())
        }
        SemanticType::Quantity | SemanticType::Percent => {
            let text = decimal_text(raw).ok_or_else(|| format!("expected a decimal, found {raw}"))?;
            let value = parse_plain_decimal(&text).map_err(|e| e.to_string())?;
            Quantity::from_decimal(value).map(FieldValue::Qty).map_err(|e| e.to_string())
        }
    }
}

fn decimal_text(raw: &Value) -> Option<String> {
    match raw {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn encode_entity(fields: &EntityFields) -> Value {
    Value::Object(fields.iter().map(|(k, v)| (k.to_string(), encode_value(v))).collect())
}

fn encode_rows<R: TableRow>(rows: &[R]) -> Value {
    Value::Array(
        rows.iter()
            .map(|row| {
                Value::Object(
                    R::FIELDS.iter().map(|f| (f.to_string(), encode_value(row.field(f)))).collect(),
                )
            })
            .collect(),
    )
}

/// Encodes a record as a JSON object with sorted keys.
pub fn encode_invoice(inv: &CanonicalInvoice) -> Value {
    let mut obj = Map::new();
    obj.insert("bill_to".into(), encode_entity(&inv.bill_to));
    obj.insert("supplier".into(), encode_entity(&inv.supplier));
    obj.insert("invoice".into(), encode_entity(&inv.invoice));
    obj.insert("line_items".into(), encode_rows(&inv.line_items));
    obj.insert("tax_lines".into(), encode_rows(&inv.tax_lines));
    if !inv.boxes.is_empty() {
        obj.insert("boxes".into(), serde_json::to_value(&inv.boxes).expect("finite boxes"));
    }
    Value::Object(obj)
}

/// Pretty JSON text with a trailing newline.
pub fn invoice_to_string(inv: &CanonicalInvoice) -> String {
    let mut text = serde_json::to_string_pretty(&encode_invoice(inv)).expect("serializable");
    text.push('\n');
    text
}

fn decode_entity(entity: Entity, raw: Option<&Value>, diags: &mut Vec<Diagnostic>) -> EntityFields {
    let mut fields = EntityFields::new();
    let Some(raw) = raw.filter(|v| !v.is_null()) else { return fields };
    let Some(obj) = raw.as_object() else {
        diags.push(Diagnostic::new(entity.as_str(), "expected an object"));
        return fields;
    };
    for (name, value) in obj {
        let path = format!("{}.{}", entity.as_str(), name);
        match registry::header_lookup(entity, name) {
            Some(spec) => match decode_value(spec.ty, value) {
                Ok(v) => fields.set(name.clone(), v),
                Err(msg) => diags.push(Diagnostic::new(path, msg)),
            },
            None => diags.push(Diagnostic::new(path, "unknown field")),
        }
    }
    fields
}

fn decode_rows<R: TableRow + Default>(raw: Option<&Value>, diags: &mut Vec<Diagnostic>) -> Vec<R> {
    let Some(raw) = raw.filter(|v| !v.is_null()) else { return Vec::new() };
    let Some(items) = raw.as_array() else {
        diags.push(Diagnostic::new(R::TABLE, "expected an array"));
        return Vec::new();
    };
    let mut rows = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let mut row = R::default();
        match item.as_object() {
            Some(obj) => {
                for (name, value) in obj {
                    let path = row_path(R::TABLE, i, name);
                    let Some(spec) = registry::lookup(&path) else {
                        diags.push(Diagnostic::new(path, "unknown field"));
                        continue;
                    };
                    match decode_value(spec.ty, value) {
                        Ok(v) => *row.field_mut(name).expect("registry row field") = v,
                        Err(msg) => diags.push(Diagnostic::new(path, msg)),
                    }
                }
            }
            None => diags.push(Diagnostic::new(format!("{}[{i}]", R::TABLE), "expected an object")),
        }
        rows.push(row);
    }
    rows
}

fn decode_boxes(raw: Option<&Value>, diags: &mut Vec<Diagnostic>) -> BTreeMap<String, [f64; 4]> {
    match raw {
        None | Some(Value::Null) => BTreeMap::new(),
        Some(v) => serde_json::from_value(v.clone()).unwrap_or_else(|e| {
            diags.push(Diagnostic::new("boxes", e.to_string()));
            BTreeMap::new()
        }),
    }
}

/// Lenient decode: malformed values become `Absent` and are reported.
pub fn decode_invoice(raw: &Value) -> (CanonicalInvoice, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let Some(obj) = raw.as_object() else {
        diags.push(Diagnostic::new("", "expected a JSON object"));
        return (CanonicalInvoice::default(), diags);
    };
    for key in obj.keys() {
        let known = ["bill_to", "supplier", "invoice", "line_items", "tax_lines"].contains(&key.as_str())
            || ENVELOPE_KEYS.contains(&key.as_str());
        if !known {
            diags.push(Diagnostic::new(key.clone(), "unknown top-level key"));
        }
    }
    let inv = CanonicalInvoice {
        bill_to: decode_entity(Entity::BillTo, obj.get("bill_to"), &mut diags),
        supplier: decode_entity(Entity::Supplier, obj.get("supplier"), &mut diags),
        invoice: decode_entity(Entity::Invoice, obj.get("invoice"), &mut diags),
        line_items: decode_rows::<LineItem>(obj.get("line_items"), &mut diags),
        tax_lines: decode_rows::<TaxLine>(obj.get("tax_lines"), &mut diags),
        boxes: decode_boxes(obj.get("boxes"), &mut diags),
    };
    (inv, diags)
}

/// Strict parse used for ground truth: any diagnostic is an error.
pub fn parse_invoice(text: &str) -> Result<CanonicalInvoice, InvoiceFileError> {
    let raw: Value = serde_json::from_str(text)?;
    let (inv, diags) = decode_invoice(&raw);
    if diags.is_empty() {
        Ok(inv)
    } else {
        Err(InvoiceFileError::Invalid(diags))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "bill_to": {"buyer_name": "Beta AG", "buyer_tax_id": null},
        "supplier": {"seller_name": "Acme GmbH"},
        "invoice": {
            "invoice_number": "INV-001",
            "issue_date": "2024-02-01",
            "gross_amount": {"amount": "119.00", "currency": "EUR"}
        },
        "line_items": [
            {"description": "Widget", "quantity": 2, "unit_price": {"amount": "50.00", "currency": "EUR"},
             "line_total": {"amount": "100.00", "currency": "EUR"}, "tax_rate": "19"}
        ],
        "tax_lines": [],
        "boxes": {"invoice.gross_amount": [1.0, 2.0, 3.0, 4.5]}
    }"#;

    #[test]
    fn parses_sample() {
        let inv = parse_invoice(SAMPLE).unwrap();
        assert_eq!(inv.header("invoice.invoice_number"), &FieldValue::Identifier("INV-001".into()));
        assert!(inv.header("bill_to.buyer_tax_id").is_absent());
        assert_eq!(inv.line_items[0].quantity, FieldValue::Qty(Quantity::new(2, 0).unwrap()));
        assert_eq!(inv.boxes["invoice.gross_amount"], [1.0, 2.0, 3.0, 4.5]);
    }

    #[test]
    fn round_trip() {
        let inv = parse_invoice(SAMPLE).unwrap();
        let again = parse_invoice(&invoice_to_string(&inv)).unwrap();
        assert_eq!(inv, again);
    }

    #[test]
    fn syntax_error_has_location() {
        match parse_invoice("{\n  \"invoice\": [\n") {
            Err(InvoiceFileError::Syntax { line, .. }) => assert!(line >= 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lenient_decode_reports_and_drops() {
        let raw: Value = serde_json::from_str(
            r#"{"invoice": {"issue_date": "01/02/2024", "colour": "red"}, "extra": 1}"#,
        )
        .unwrap();
        let (inv, diags) = decode_invoice(&raw);
        assert!(inv.header("invoice.issue_date").is_absent());
        let paths: Vec<_> = diags.iter().map(|d| d.path.as_str()).collect();
        assert_eq!(paths, ["extra", "invoice.colour", "invoice.issue_date"]);
    }

    #[test]
    fn empty_string_is_present() {
        let raw: Value = serde_json::from_str(r#"{"invoice": {"payment_terms": ""}}"#).unwrap();
        let (inv, diags) = decode_invoice(&raw);
        assert!(diags.is_empty());
        assert_eq!(inv.header("invoice.payment_terms"), &FieldValue::Text(String::new()));
    }
}
