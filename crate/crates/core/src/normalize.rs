//! Raw text to canonical values: text and identifier normalization, and
//! locale-tolerant parsing of dates, money and quantities.

use std::collections::BTreeMap;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::schema::{Currency, DateValue, FieldValue, MonetaryAmount, Quantity, SemanticType};
use crate::schema::value::MAX_SCALE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateOrder {
    #[default]
    DayFirst,
    MonthFirst,
    YearFirst,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationPolicy {
    pub date_order: DateOrder,
    pub text_case_fold: bool,
    pub text_collapse_whitespace: bool,
    pub text_strip_diacritics: bool,
    /// Characters deleted from identifiers before relaxed comparison.
    pub identifier_strip: String,
    pub default_currency: Currency,
    /// Extra month names (lowercase) on top of the built-in English ones,
    /// e.g. `{"januar": 1, "märz": 3}`.
    pub month_names: BTreeMap<String, u32>,
    /// Extra flat-export key aliases, source key to canonical field path.
    pub field_aliases: BTreeMap<String, String>,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        Self {
            date_order: DateOrder::DayFirst,
            text_case_fold: true,
            text_collapse_whitespace: true,
            text_strip_diacritics: false,
            identifier_strip: " -".to_string(),
            default_currency: Currency::Unknown,
            month_names: BTreeMap::new(),
            field_aliases: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse {what} from {raw:?}: {reason}")]
pub struct ParseError {
    pub what: &'static str,
    pub raw: String,
    pub reason: String,
}

fn fail(what: &'static str, raw: &str, reason: impl Into<String>) -> ParseError {
    ParseError { what, raw: raw.to_string(), reason: reason.into() }
}

fn strip_marks(s: &str) -> String {
    s.nfd().filter(|c| !is_combining_mark(*c)).collect()
}

pub fn normalize_text(raw: &str, policy: &NormalizationPolicy) -> String {
    let mut s: String = raw.nfc().collect();
    if policy.text_strip_diacritics {
        s = strip_marks(&s);
    }
    if policy.text_case_fold {
        s = s.to_lowercase();
        // Lowercasing can introduce combining marks (U+0130).
        if policy.text_strip_diacritics {
            s = strip_marks(&s);
        }
        s = s.nfc().collect();
    }
    if policy.text_collapse_whitespace {
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    } else {
        s.trim().to_string()
    }
}

pub fn normalize_identifier(raw: &str, policy: &NormalizationPolicy) -> String {
    raw.to_uppercase().chars().filter(|c| !policy.identifier_strip.contains(*c)).collect()
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

fn month_from_name(word: &str, policy: &NormalizationPolicy) -> Option<u32> {
    let w = word.to_lowercase();
    let w = w.trim_end_matches('.');
    if let Some(m) = policy.month_names.get(w) {
        return Some(*m);
    }
    if w == "sept" {
        return Some(9);
    }
    MONTHS.iter().position(|m| *m == w || (w.len() == 3 && m.starts_with(w))).map(|i| i as u32 + 1)
}

fn expand_year(digits: &str) -> Option<i32> {
    let y: i32 = digits.parse().ok()?;
    match digits.len() {
        2 if y < 69 => Some(2000 + y),
        2 => Some(1900 + y),
        4 => Some(y),
        _ => None,
    }
}

fn strip_ordinal(token: &str) -> &str {
    for suffix in ["st", "nd", "rd", "th"] {
        if let Some(rest) = token.strip_suffix(suffix) {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                return rest;
            }
        }
    }
    token
}

fn checked_date(year: i32, month: u32, day: u32) -> Option<DateValue> {
    let d = DateValue::new(year, month, day);
    d.is_valid().then_some(d)
}

fn parse_numeric_date(s: &str, policy: &NormalizationPolicy) -> Option<Result<DateValue, String>> {
    let sep = s.chars().find(|c| matches!(c, '/' | '.' | '-'))?;
    let parts: Vec<&str> = s.split(sep).collect();
    if parts.len() != 3 || !parts.iter().all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit())) {
        return None;
    }
    let num = |p: &str| p.parse::<u32>().unwrap_or(0);
    let (year, a, b) = if parts[0].len() == 4 || policy.date_order == DateOrder::YearFirst {
        (parts[0], num(parts[1]), num(parts[2]))
    } else {
        let (first, second) = (num(parts[0]), num(parts[1]));
        match policy.date_order {
            DateOrder::MonthFirst => (parts[2], first, second),
            _ => (parts[2], second, first),
        }
    };
    // (a, b) is (month, day) under the policy reading.
    let Some(year) = expand_year(year) else {
        return Some(Err("year must have 2 or 4 digits".into()));
    };
    let resolved = checked_date(year, a, b).or_else(|| checked_date(year, b, a));
    Some(resolved.ok_or_else(|| "no valid calendar date under either day/month order".into()))
}

fn parse_named_date(s: &str, policy: &NormalizationPolicy) -> Result<DateValue, String> {
    let tokens: Vec<&str> = s
        .split(|c: char| c.is_whitespace() || matches!(c, ',' | '/' | '-'))
        .filter(|t| !t.is_empty())
        .collect();
    let mut month = None;
    let mut numbers = Vec::new();
    for token in &tokens {
        let token = token.trim_end_matches('.');
        let digits = strip_ordinal(token);
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            numbers.push(digits);
        } else if let (None, Some(m)) = (month, month_from_name(token, policy)) {
            month = Some(m);
        } else {
            return Err(format!("unrecognized token {token:?}"));
        }
    }
    let month = month.ok_or("no month name")?;
    let [first, second] = numbers[..] else {
        return Err("expected a day and a year".into());
    };
    let (day, year) = if first.len() > 2 { (second, first) } else { (first, second) };
    let year = expand_year(year).ok_or("year must have 2 or 4 digits")?;
    let day: u32 = day.parse().map_err(|_| "bad day")?;
    checked_date(year, month, day).ok_or_else(|| "invalid calendar date".into())
}

/// Parses ISO, numeric (`/`, `.`, `-` separated) and English month-name dates.
pub fn parse_date(raw: &str, policy: &NormalizationPolicy) -> Result<DateValue, ParseError> {
    let s = raw.trim();
    if let Ok(d) = DateValue::parse_iso(s) {
        return Ok(d);
    }
    if let Some(result) = parse_numeric_date(s, policy) {
        return result.map_err(|reason| fail("date", raw, reason));
    }
    parse_named_date(s, policy).map_err(|reason| fail("date", raw, reason))
}

pub fn format_date(d: &DateValue) -> String {
    d.to_string()
}

fn is_group_char(c: char) -> bool {
    matches!(c, ' ' | '\'' | '\u{a0}' | '\u{202f}' | '\u{2009}')
}

struct NumberParts<'a> {
    prefix: &'a str,
    suffix: &'a str,
    value: Decimal,
}

/// Locates the numeric core and infers decimal and grouping separators.
fn split_number<'a>(s: &'a str, what: &'static str, raw: &str) -> Result<NumberParts<'a>, ParseError> {
    let first = s.find(|c: char| c.is_ascii_digit()).ok_or_else(|| fail(what, raw, "no digits"))?;
    let last = s.rfind(|c: char| c.is_ascii_digit()).expect("has a digit");
    let mut start = first;
    // A separator directly before the first digit starts the fraction (".5").
    if s[..first].ends_with(['.', ',']) {
        start -= 1;
    }
    let core = &s[start..=last];
    let (prefix, suffix) = (&s[..start], &s[last + 1..]);

    let mut groups: Vec<String> = vec![String::new()];
    let mut seps: Vec<char> = Vec::new();
    for c in core.chars() {
        if c.is_ascii_digit() {
            groups.last_mut().expect("nonempty").push(c);
        } else if c == '.' || c == ',' || is_group_char(c) {
            if groups.last().is_some_and(String::is_empty) && !seps.is_empty() {
                return Err(fail(what, raw, "adjacent separators"));
            }
            seps.push(c);
            groups.push(String::new());
        } else {
            return Err(fail(what, raw, format!("unexpected character {c:?}")));
        }
    }

    let has = |c: char| seps.contains(&c);
    let decimal_at = if has('.') && has(',') {
        let pos = seps.iter().rposition(|c| matches!(c, '.' | ',')).expect("present");
        let dec = seps[pos];
        if seps.iter().filter(|c| **c == dec).count() > 1 || pos + 1 != seps.len() {
            return Err(fail(what, raw, "inconsistent separators"));
        }
        Some(pos)
    } else if let Some(sep) = seps.iter().copied().find(|c| matches!(c, '.' | ',')) {
        let positions: Vec<usize> =
            seps.iter().enumerate().filter(|(_, c)| **c == sep).map(|(i, _)| i).collect();
        if positions.len() > 1 {
            None
        } else {
            let pos = positions[0];
            let before = &groups[pos];
            let after = &groups[pos + 1];
            let thousands = pos + 1 == seps.len()
                && after.len() == 3
                && (1..=3).contains(&before.len())
                && before != "0";
            if thousands {
                None
            } else {
                Some(pos)
            }
        }
    } else {
        None
    };

    if let Some(pos) = decimal_at {
        if pos + 1 != seps.len() {
            return Err(fail(what, raw, "grouping after the decimal separator"));
        }
    }
    let int_groups = &groups[..decimal_at.map_or(groups.len(), |p| p + 1)];
    let fraction = decimal_at.map_or("", |p| groups[p + 1].as_str());
    if int_groups.len() > 1 {
        let grouping_ok = (1..=3).contains(&int_groups[0].len())
            && int_groups[1..].iter().all(|g| g.len() == 3);
        if !grouping_ok {
            return Err(fail(what, raw, "inconsistent digit grouping"));
        }
    }
    let scale = fraction.len() as u32;
    if scale > MAX_SCALE {
        return Err(fail(what, raw, format!("more than {MAX_SCALE} decimal places")));
    }
    let digits: String = int_groups.concat() + fraction;
    let mantissa: i64 = digits.parse().map_err(|_| fail(what, raw, "value out of range"))?;
    Ok(NumberParts { prefix, suffix, value: Decimal::new(mantissa, scale) })
}

/// Strips surrounding parentheses and reads the sign marker.
fn sign_and_body(s: &str) -> (bool, &str) {
    let t = s.trim();
    if let Some(inner) = t.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        return (true, inner.trim());
    }
    (false, t)
}

fn currency_from_affixes(prefix: &str, suffix: &str, policy: &NormalizationPolicy) -> Currency {
    let affix = format!("{prefix} {suffix}");
    let words = affix.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty());
    let mut unknown = false;
    for word in words {
        if word == Currency::UNKNOWN_TOKEN {
            unknown = true;
        } else if word.len() == 3 && word.bytes().all(|b| b.is_ascii_uppercase()) {
            return word.parse().unwrap_or(Currency::Unknown);
        }
    }
    for c in affix.chars() {
        let code = match c {
            '€' => "EUR",
            '$' => "USD",
            '£' => "GBP",
            c if c.is_alphanumeric() || c.is_whitespace() || matches!(c, '-' | '+' | '.' | ',' | ':') => continue,
            _ => return Currency::Unknown,
        };
        return code.parse().expect("known code");
    }
    if unknown {
        Currency::Unknown
    } else {
        policy.default_currency
    }
}

fn signed_number<'a>(raw: &'a str, what: &'static str) -> Result<(NumberParts<'a>, bool), ParseError> {
    let (paren, body) = sign_and_body(raw);
    let parts = split_number(body, what, raw)?;
    let minus = parts.prefix.contains('-');
    if paren && minus {
        return Err(fail(what, raw, "double negative"));
    }
    Ok((parts, paren || minus))
}

/// Parses money text such as `"1.234,56 €"`, `"USD 1,234.56"` or `"(100.00)"`.
pub fn parse_money(raw: &str, policy: &NormalizationPolicy) -> Result<MonetaryAmount, ParseError> {
    let (parts, negative) = signed_number(raw, "money")?;
    let currency = currency_from_affixes(parts.prefix, parts.suffix, policy);
    let value = if negative { -parts.value } else { parts.value };
    MonetaryAmount::from_decimal(value, currency).map_err(|e| fail("money", raw, e.to_string()))
}

/// Like [`parse_money`] but ignores currency markers, `%` and unit text.
pub fn parse_quantity(raw: &str, _policy: &NormalizationPolicy) -> Result<Quantity, ParseError> {
    let (parts, negative) = signed_number(raw, "quantity")?;
    let value = if negative { -parts.value } else { parts.value };
    Quantity::from_decimal(value).map_err(|e| fail("quantity", raw, e.to_string()))
}

/// Plain amount text that [`parse_money`] reads back unambiguously.
fn plain_amount(value: Decimal) -> String {
    let mut text = value.to_string();
    // "123.456" would read as a thousands group; a trailing zero disambiguates.
    if value.scale() == 3 && value.abs() < Decimal::from(1000) {
        text.push('0');
    }
    text
}

pub fn format_money(m: &MonetaryAmount) -> String {
    format!("{} {}", plain_amount(m.to_decimal()), m.currency)
}

pub fn format_quantity(q: &Quantity) -> String {
    plain_amount(q.to_decimal())
}

/// Normalizes a raw adapter string into a value of the given type.
/// Text and identifiers are kept verbatim; matching normalizes them later.
pub fn parse_typed(ty: SemanticType, raw: &str, policy: &NormalizationPolicy) -> Result<FieldValue, ParseError> {
    Ok(match ty {
        SemanticType::Text => FieldValue::Text(raw.to_string()),
        SemanticType::Identifier => FieldValue::Identifier(raw.to_string()),
        SemanticType::Date => FieldValue::Date(parse_date(raw, policy)?),
        SemanticType::Money => FieldValue::Money(parse_money(raw, policy)?),
        SemanticType::Quantity | SemanticType::Percent => FieldValue::Qty(parse_quantity(raw, policy)?),
    })
}
