//! The closed field registry: every canonical field path, the entity it
//! belongs to and its semantic type.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::value::ValueKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entity {
    BillTo,
    Supplier,
    Invoice,
    LineItem,
    TaxLine,
}

impl Entity {
    pub const ALL: [Entity; 5] =
        [Entity::BillTo, Entity::Supplier, Entity::Invoice, Entity::LineItem, Entity::TaxLine];

    pub fn as_str(&self) -> &'static str {
        match self {
            Entity::BillTo => "bill_to",
            Entity::Supplier => "supplier",
            Entity::Invoice => "invoice",
            Entity::LineItem => "line_item",
            Entity::TaxLine => "tax_line",
        }
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticType {
    Text,
    Identifier,
    Date,
    Money,
    Quantity,
    /// A quantity expressed in percent (tax rates).
    Percent,
}

impl SemanticType {
    /// The [`ValueKind`] a present value of this type must carry.
    pub fn value_kind(&self) -> ValueKind {
        match self {
            SemanticType::Text => ValueKind::Text,
            SemanticType::Identifier => ValueKind::Identifier,
            SemanticType::Date => ValueKind::Date,
            SemanticType::Money => ValueKind::Money,
            SemanticType::Quantity | SemanticType::Percent => ValueKind::Qty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldSpec {
    /// Registry path, e.g. `invoice.gross_amount` or `line_items.quantity`.
    pub path: &'static str,
    /// Field name within its entity.
    pub name: &'static str,
    pub entity: Entity,
    pub ty: SemanticType,
    pub in_accuracy: bool,
}

const fn spec(path: &'static str, name: &'static str, entity: Entity, ty: SemanticType) -> FieldSpec {
    FieldSpec { path, name, entity, ty, in_accuracy: true }
}

use Entity::*;
use SemanticType::*;

static REGISTRY: [FieldSpec; 24] = [
    spec("bill_to.buyer_name", "buyer_name", BillTo, Text),
    spec("bill_to.buyer_address", "buyer_address", BillTo, Text),
    spec("bill_to.buyer_tax_id", "buyer_tax_id", BillTo, Identifier),
    spec("supplier.seller_name", "seller_name", Supplier, Text),
    spec("supplier.seller_address", "seller_address", Supplier, Text),
    spec("supplier.supplier_tax_id", "supplier_tax_id", Supplier, Identifier),
    spec("supplier.bank_account", "bank_account", Supplier, Identifier),
    spec("invoice.invoice_number", "invoice_number", Invoice, Identifier),
    spec("invoice.issue_date", "issue_date", Invoice, Date),
    spec("invoice.due_date", "due_date", Invoice, Date),
    spec("invoice.payment_terms", "payment_terms", Invoice, Text),
    spec("invoice.currency", "currency", Invoice, Identifier),
    spec("invoice.net_amount", "net_amount", Invoice, Money),
    spec("invoice.tax_amount", "tax_amount", Invoice, Money),
    spec("invoice.roundoff_amount", "roundoff_amount", Invoice, Money),
    spec("invoice.gross_amount", "gross_amount", Invoice, Money),
    spec("line_items.description", "description", LineItem, Text),
    spec("line_items.quantity", "quantity", LineItem, Quantity),
    spec("line_items.unit_price", "unit_price", LineItem, Money),
    spec("line_items.line_total", "line_total", LineItem, Money),
    spec("line_items.tax_rate", "tax_rate", LineItem, Percent),
    spec("tax_lines.rate", "rate", TaxLine, Percent),
    spec("tax_lines.taxable_base", "taxable_base", TaxLine, Money),
    spec("tax_lines.tax_amount", "tax_amount", TaxLine, Money),
];

/// The full registry in a fixed order: bill-to, supplier, invoice header,
/// line-item fields, tax-line fields. Bounding boxes are not part of it.
pub fn field_registry() -> &'static [FieldSpec] {
    &REGISTRY
}

/// Registry entries of one header entity (bill-to, supplier or invoice).
pub fn entity_fields(entity: Entity) -> impl Iterator<Item = &'static FieldSpec> {
    field_registry().iter().filter(move |f| f.entity == entity)
}

/// Header fields (bill-to, supplier, invoice) in registry order.
pub fn header_fields() -> impl Iterator<Item = &'static FieldSpec> {
    field_registry()
        .iter()
        .filter(|f| matches!(f.entity, Entity::BillTo | Entity::Supplier | Entity::Invoice))
}

/// Strips row indices: `line_items[3].quantity` and `line_items[p3].quantity`
/// both become `line_items.quantity`.
pub fn registry_path(path: &str) -> std::borrow::Cow<'_, str> {
    match (path.find('['), path.find(']')) {
        (Some(open), Some(close)) if close > open => {
            std::borrow::Cow::Owned(format!("{}{}", &path[..open], &path[close + 1..]))
        }
        _ => std::borrow::Cow::Borrowed(path),
    }
}

/// Resolves a concrete or registry path to its registry entry.
pub fn lookup(path: &str) -> Option<&'static FieldSpec> {
    let key = registry_path(path);
    field_registry().iter().find(|f| f.path == key)
}

pub fn header_lookup(entity: Entity, name: &str) -> Option<&'static FieldSpec> {
    entity_fields(entity).find(|f| f.name == name)
}

/// Header money fields that consistency rules read.
pub const ARITHMETIC_HEADER_FIELDS: [&str; 4] = [
    "invoice.net_amount",
    "invoice.tax_amount",
    "invoice.roundoff_amount",
    "invoice.gross_amount",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_contains_listed_fields() {
        let reg = field_registry();
        assert_eq!(reg.len(), 24);
        let inv = lookup("invoice.invoice_number").unwrap();
        assert_eq!((inv.entity, inv.ty, inv.in_accuracy), (Invoice, Identifier, true));
        let tax_id = lookup("supplier.supplier_tax_id").unwrap();
        assert_eq!((tax_id.entity, tax_id.ty, tax_id.in_accuracy), (Supplier, Identifier, true));
        assert!(lookup("boxes").is_none());
        assert!(reg.iter().all(|f| !f.path.starts_with("boxes")));
        assert_eq!(header_fields().count(), 16);
        assert_eq!(entity_fields(BillTo).count(), 3);
        assert_eq!(entity_fields(Supplier).count(), 4);
        assert_eq!(entity_fields(Invoice).count(), 9);
    }

    #[test]
    fn indexed_paths_resolve() {
        assert_eq!(lookup("line_items[12].unit_price").unwrap().path, "line_items.unit_price");
        assert_eq!(lookup("line_items[p2].tax_rate").unwrap().ty, Percent);
        assert_eq!(lookup("tax_lines[0].rate").unwrap().entity, TaxLine);
        assert!(lookup("line_items[0].bogus").is_none());
    }

    #[test]
    fn registry_order_is_stable() {
        let paths: Vec<_> = field_registry().iter().map(|f| f.path).collect();
        let again: Vec<_> = field_registry().iter().map(|f| f.path).collect();
        assert_eq!(paths, again);
        assert_eq!(paths[0], "bill_to.buyer_name");
        assert_eq!(paths[23], "tax_lines.tax_amount");
    }
}
