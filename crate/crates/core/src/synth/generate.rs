use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};

use super::{rng_for, SynthError};
use crate::schema::registry::{self, ARITHMETIC_HEADER_FIELDS};
use crate::schema::{
    CanonicalInvoice, Currency, DateValue, DocumentMeta, FieldValue, LineItem, MonetaryAmount, Quantity, SourceKind,
    TaxLine, TemplateSplit,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Inclusive range of line-item counts.
    pub line_count: (usize, usize),
    pub language: String,
    pub currency: String,
    pub template_id: String,
    /// Fixed vendor id; by default one of eight derived from the seed.
    pub vendor_id: Option<String>,
    pub source_kind: SourceKind,
    pub template_split: TemplateSplit,
    /// Tax rates in percent that line items draw from.
    pub tax_rates: Vec<u32>,
    /// Header fields left absent in the ground truth.
    pub absent_fields: Vec<String>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            line_count: (4, 9),
            language: "en".into(),
            currency: "EUR".into(),
            template_id: "tpl-01".into(),
            vendor_id: None,
            source_kind: SourceKind::Digital,
            template_split: TemplateSplit::Seen,
            tax_rates: vec![7, 19],
            absent_fields: Vec::new(),
        }
    }
}

impl GenConfig {
    fn check(&self) -> Result<Currency, SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        let (lo, hi) = self.line_count;
        if lo < 1 || lo > hi || hi > description_pool().len() {
            return bad(format!("line_count must satisfy 1 <= min <= max <= {}", description_pool().len()));
        }
        if self.tax_rates.is_empty() || self.tax_rates.iter().any(|r| *r > 100) {
            return bad("tax_rates must be non-empty percentages".into());
        }
        for f in &self.absent_fields {
            match registry::lookup(f) {
                Some(spec) if registry::header_fields().any(|h| h.path == spec.path) => {}
                _ => return bad(format!("absent field {f:?} is not a header field")),
            }
            if ARITHMETIC_HEADER_FIELDS.contains(&f.as_str()) || f == "invoice.currency" {
                return bad(format!("absent field {f:?} is needed for arithmetic"));
            }
        }
        match self.currency.parse::<Currency>() {
            Ok(c) if !c.is_unknown() => Ok(c),
            _ => bad(format!("currency {:?} must be a three-letter code", self.currency)),
        }
    }
}

/// Line-item descriptions; normalized pairwise similarity stays at or
/// below one half so rows never resemble each other.
pub fn description_pool() -> &'static [&'static str] {
    &[
        "Office chair, ergonomic",
        "USB-C docking station",
        "Printer toner cartridge",
        "Annual software licence",
        "Network switch 24 port",
        "Wireless keyboard",
        "Consulting hours",
        "Shipping and handling",
        "Whiteboard markers (box)",
        "Laptop backpack",
        "Monitor arm mount",
        "Cloud storage plan",
        "HDMI cable 2m",
        "Paper A4 (5 reams)",
        "On-site installation",
        "Desk lamp LED",
        "Firewall appliance",
        "Coffee beans 1kg",
        "Training workshop",
        "External SSD 1TB",
    ]
}

const SELLERS: [(&str, &str); 8] = [
    ("Acme Office Supply GmbH", "Industriestrasse 12, 70565 Stuttgart"),
    ("Northwind Traders Ltd", "14 Harbour Road, Leeds LS1 4AB"),
    ("Blue Fjord Systems AS", "Strandgata 8, 5013 Bergen"),
    ("Contoso Components BV", "Keizersgracht 221, 1016 DV Amsterdam"),
    ("Papeterie Moreau SARL", "3 rue des Lilas, 69003 Lyon"),
    ("Rossi Forniture Srl", "Via Roma 45, 20121 Milano"),
    ("Vega Logistica SL", "Calle Mayor 19, 28013 Madrid"),
    ("Kestrel Digital Inc", "500 Market Street, San Francisco CA 94105"),
];

const BUYERS: [(&str, &str); 6] = [
    ("Globex Corporation", "1 Globex Plaza, Springfield"),
    ("Initech Services GmbH", "Am Wall 4, 28195 Bremen"),
    ("Umbrella Health BV", "Stationsplein 2, 3511 ED Utrecht"),
    ("Stark Fabrication Ltd", "77 Mill Lane, Sheffield S1 2HX"),
    ("Wayne Logistics SA", "Avenue Louise 54, 1050 Bruxelles"),
    ("Tyrell Research AG", "Bahnhofstrasse 9, 8001 Zurich"),
];

const PREFIXES: [&str; 8] = ["INV", "RE", "NW", "BF", "CC", "PM", "RF", "VL"];

fn digits(rng: &mut impl Rng, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect()
}

fn terms_text(language: &str, days: i64) -> String {
    match language {
        "de" => format!("Zahlbar innerhalb von {days} Tagen"),
        "fr" => format!("Paiement a {days} jours"),
        _ => format!("Net {days} days"),
    }
}

struct Lines {
    items: Vec<LineItem>,
    tax_lines: Vec<TaxLine>,
    net: i64,
    tax: i64,
}

/// Minimum distance in minor units between same-field values of different rows.
const SEPARATION: i64 = 100;

/// Apart by one unit plus 0.1% of both magnitudes, which keeps rows
/// distinguishable under relative money tolerances up to 0.05%.
fn far_from(value: i64, others: &[i64]) -> bool {
    others.iter().all(|o| (o - value).abs() >= SEPARATION + (o.abs() + value.abs()) / 1000)
}

fn build_lines(seed: u64, cfg: &GenConfig, currency: Currency) -> Lines {
    let money = |units: i64| FieldValue::Money(MonetaryAmount::new(units, 2, currency).expect("scale 2"));
    for attempt in 0.. {
        let mut rng = rng_for(seed, "lines", attempt);
        let n = rng.gen_range(cfg.line_count.0..=cfg.line_count.1);
        let mut descriptions: Vec<&str> = description_pool().to_vec();
        descriptions.shuffle(&mut rng);
        let mut prices = Vec::new();
        let mut totals = Vec::new();
        let mut rows = Vec::new();
        while rows.len() < n {
            let qty = rng.gen_range(1..=12i64);
            let price = rng.gen_range(150..=250_000i64);
            let total = qty * price;
            if !far_from(price, &prices) || !far_from(total, &totals) {
                continue;
            }
            prices.push(price);
            totals.push(total);
            let rate = cfg.tax_rates[rng.gen_range(0..cfg.tax_rates.len())];
            rows.push((descriptions[rows.len()], qty, price, total, rate));
        }
        let mut by_rate: BTreeMap<u32, i64> = BTreeMap::new();
        for r in &rows {
            *by_rate.entry(r.4).or_default() += r.3;
        }
        let bases: Vec<i64> = by_rate.values().copied().collect();
        if !bases.iter().enumerate().all(|(i, b)| far_from(*b, &bases[i + 1..])) {
            continue;
        }
        let mut tax_lines = Vec::new();
        let mut amounts = Vec::new();
        let mut tax = 0;
        for (rate, base) in &by_rate {
            let mut amount = (Decimal::new(*base, 2) * Decimal::from(*rate) / Decimal::from(100))
                .round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero);
            amount.rescale(2);
            let units = i64::try_from(amount.mantissa()).expect("small amount");
            tax += units;
            amounts.push(units);
            tax_lines.push(TaxLine {
                rate: FieldValue::Qty(Quantity::new(i64::from(*rate), 0).expect("rate")),
                taxable_base: money(*base),
                tax_amount: money(units),
            });
        }
        if !amounts.iter().enumerate().all(|(i, a)| far_from(*a, &amounts[i + 1..])) {
            continue;
        }
        let items = rows
            .iter()
            .map(|(d, q, p, t, r)| LineItem {
                description: FieldValue::Text((*d).to_string()),
                quantity: FieldValue::Qty(Quantity::new(*q, 0).expect("qty")),
                unit_price: money(*p),
                line_total: money(*t),
                tax_rate: FieldValue::Qty(Quantity::new(i64::from(*r), 0).expect("rate")),
            })
            .collect();
        return Lines { items, tax_lines, net: totals.iter().sum(), tax };
    }
    unreachable!("unbounded attempts")
}

/// Builds a complete, arithmetically consistent invoice. The same seed and
/// config always produce the same record.
pub fn generate_invoice(seed: u64, cfg: &GenConfig) -> Result<(CanonicalInvoice, DocumentMeta), SynthError> {
    let currency = cfg.check()?;
    let mut rng = rng_for(seed, "header", 0);
    let vendor = (seed % SELLERS.len() as u64) as usize;
    let (seller, seller_address) = SELLERS[vendor];
    let (buyer, buyer_address) = BUYERS[rng.gen_range(0..BUYERS.len())];
    let issue_day = DateValue::new(2021, 1, 1).epoch_day().expect("valid") + rng.gen_range(0..1460);
    let issue = DateValue::from_epoch_day(issue_day).expect("valid");
    let term = [14i64, 30, 45, 60][rng.gen_range(0..4)];
    let due = DateValue::from_epoch_day(issue_day + term).expect("valid");

    let lines = build_lines(seed, cfg, currency);
    let money = |units: i64| FieldValue::Money(MonetaryAmount::new(units, 2, currency).expect("scale 2"));
    let sum = lines.net + lines.tax;
    let gross = sum - sum.rem_euclid(5);

    let mut inv = CanonicalInvoice::default();
    let header: [(&str, FieldValue); 16] = [
        ("bill_to.buyer_name", FieldValue::Text(buyer.into())),
        ("bill_to.buyer_address", FieldValue::Text(buyer_address.into())),
        ("bill_to.buyer_tax_id", FieldValue::Identifier(format!("DE{}", digits(&mut rng, 9)))),
        ("supplier.seller_name", FieldValue::Text(seller.into())),
        ("supplier.seller_address", FieldValue::Text(seller_address.into())),
        ("supplier.supplier_tax_id", FieldValue::Identifier(format!("DE{}", digits(&mut rng, 9)))),
        ("supplier.bank_account", FieldValue::Identifier(format!("DE{}", digits(&mut rng, 20)))),
        (
            "invoice.invoice_number",
            FieldValue::Identifier(format!("{}-{}-{:06}", PREFIXES[vendor], issue.year, seed % 1_000_000)),
        ),
        ("invoice.issue_date", FieldValue::Date(issue)),
        ("invoice.due_date", FieldValue::Date(due)),
        ("invoice.payment_terms", FieldValue::Text(terms_text(&cfg.language, term))),
        ("invoice.currency", FieldValue::Identifier(currency.as_str().to_string())),
        ("invoice.net_amount", money(lines.net)),
        ("invoice.tax_amount", money(lines.tax)),
        ("invoice.roundoff_amount", money(gross - sum)),
        ("invoice.gross_amount", money(gross)),
    ];
    for (path, value) in header {
        if !cfg.absent_fields.iter().any(|f| f == path) {
            inv.set_header(path, value);
        }
    }
    inv.line_items = lines.items;
    inv.tax_lines = lines.tax_lines;

    let page_count = if inv.line_items.len() > 6 { 2 } else { 1 };
    let meta = DocumentMeta {
        doc_id: format!("synth-{seed}"),
        source_kind: cfg.source_kind,
        language: cfg.language.clone(),
        vendor_id: cfg.vendor_id.clone().unwrap_or_else(|| format!("vendor-{vendor}")),
        template_id: cfg.template_id.clone(),
        template_split: cfg.template_split,
        page_count,
    };
    Ok((inv, meta))
}
