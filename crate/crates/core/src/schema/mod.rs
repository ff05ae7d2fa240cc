//! Canonical invoice data model.

pub mod invoice;
pub mod json;
pub mod registry;
pub mod value;

pub use invoice::{
    row_index, row_path, validate_invoice, CanonicalInvoice, DocumentMeta, EntityFields, LineItem,
    SourceKind, TableRow, TaxLine, TemplateSplit, Violation, ViolationKind,
};
pub use json::{decode_invoice, encode_invoice, invoice_to_string, parse_invoice, Diagnostic};
pub use registry::{field_registry, Entity, FieldSpec, SemanticType};
pub use value::{Currency, DateValue, FieldValue, MonetaryAmount, Quantity, ValueError, ValueKind};
