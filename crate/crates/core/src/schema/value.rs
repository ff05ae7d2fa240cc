//! Typed field values: exact decimals for money and quantities, calendar
//! dates, and the tagged [`FieldValue`] every matcher operates on.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rust_decimal::Decimal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest number of decimal places a money or quantity value may carry.
pub const MAX_SCALE: u32 = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("invalid currency code {0:?}")]
    Currency(String),
    #[error("scale {0} exceeds the maximum of {MAX_SCALE}")]
    Scale(u32),
    #[error("value {0} does not fit the minor-unit range")]
    Overflow(String),
    #[error("malformed decimal {0:?}")]
    Decimal(String),
    #[error("malformed date {0:?}")]
    Date(String),
}

/// ISO 4217-style currency code, or the `UNKNOWN` sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Currency {
    Code([u8; 3]),
    Unknown,
}

impl Currency {
    pub const UNKNOWN_TOKEN: &'static str = "UNKNOWN";

    pub fn as_str(&self) -> &str {
        match self {
            // Only ASCII uppercase bytes are ever stored.
            Currency::Code(bytes) => std::str::from_utf8(bytes).unwrap_or("???"),
            Currency::Unknown => Self::UNKNOWN_TOKEN,
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Currency::Unknown)
    }

    /// Two currencies are compatible when equal or when either is unknown.
    pub fn compatible(&self, other: &Currency) -> bool {
        self.is_unknown() || other.is_unknown() || self == other
    }
}

impl FromStr for Currency {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == Self::UNKNOWN_TOKEN {
            return Ok(Currency::Unknown);
        }
        let bytes = s.as_bytes();
        if bytes.len() == 3 && bytes.iter().all(u8::is_ascii_uppercase) {
            Ok(Currency::Code([bytes[0], bytes[1], bytes[2]]))
        } else {
            Err(ValueError::Currency(s.to_string()))
        }
    }
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Currency {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Currency {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn decimal_parts(value: Decimal) -> Result<(i64, u32), ValueError> {
    let normalized = if value.scale() > MAX_SCALE {
        let trimmed = value.normalize();
        if trimmed.scale() > MAX_SCALE {
            return Err(ValueError::Scale(trimmed.scale()));
        }
        trimmed
    } else {
        value
    };
    let units = i64::try_from(normalized.mantissa())
        .map_err(|_| ValueError::Overflow(normalized.to_string()))?;
    Ok((units, normalized.scale()))
}

/// Parses a plain canonical decimal: optional `-`, digits, optional `.` and digits.
pub fn parse_plain_decimal(s: &str) -> Result<Decimal, ValueError> {
    let body = s.strip_prefix('-').unwrap_or(s);
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits_ok = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    if !digits_ok(int_part) || frac_part.is_some_and(|f| !digits_ok(f)) {
        return Err(ValueError::Decimal(s.to_string()));
    }
    Decimal::from_str_exact(s).map_err(|_| ValueError::Decimal(s.to_string()))
}

/// Exact money amount: `minor_units × 10^-scale` in `currency`.
///
/// Equality is scale-invariant: `12340/3 EUR == 1234/2 EUR`.
#[derive(Debug, Clone, Copy)]
pub struct MonetaryAmount {
    pub minor_units: i64,
    pub scale: u32,
    pub currency: Currency,
}

impl MonetaryAmount {
    pub fn new(minor_units: i64, scale: u32, currency: Currency) -> Result<Self, ValueError> {
        if scale > MAX_SCALE {
            return Err(ValueError::Scale(scale));
        }
        Ok(Self { minor_units, scale, currency })
    }

    pub fn from_decimal(value: Decimal, currency: Currency) -> Result<Self, ValueError> {
        let (minor_units, scale) = decimal_parts(value)?;
        Ok(Self { minor_units, scale, currency })
    }

    pub fn to_decimal(&self) -> Decimal {
        Decimal::from_i128_with_scale(self.minor_units as i128, self.scale)
    }

    /// Plain decimal string with exactly `scale` fraction digits.
    pub fn amount_string(&self) -> String {
        self.to_decimal().to_string()
    }
}

impl PartialEq for MonetaryAmount {
    fn eq(&self, other: &Self) -> bool {
        self.currency == other.currency && self.to_decimal() == other.to_decimal()
    }
}

impl Eq for MonetaryAmount {}

impl fmt::Display for MonetaryAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.amount_string(), self.currency)
    }
}

#[derive(Serialize, Deserialize)]
struct MoneyRepr {
    amount: String,
    currency: Currency,
}

impl Serialize for MonetaryAmount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MoneyRepr { amount: self.amount_string(), currency: self.currency }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MonetaryAmount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = MoneyRepr::deserialize(deserializer)?;
        let value = parse_plain_decimal(&repr.amount).map_err(serde::de::Error::custom)?;
        MonetaryAmount::from_decimal(value, repr.currency).map_err(serde::de::Error::custom)
    }
}

/// Exact decimal quantity (counts, percentages) without a currency.
#[derive(Debug, Clone, Copy)]
pub struct Quantity {
    pub minor_units: i64,
    pub scale: u32,
}

impl Quantity {
    pub fn new(minor_units: i64, scale: u32) -> Result<Self, ValueError> {
        if scale > MAX_SCALE {
            return Err(ValueError::Scale(scale));
        }
        Ok(Self { minor_units, scale })
    }

    pub fn from_decimal(value: Decimal) -> Result<Self, ValueError> {
        let (minor_units, scale) = decimal_parts(value)?;
        Ok(Self { minor_units, scale })
    }

    pub fn to_decimal(&self) -> Decimal {
        Decimal::from_i128_with_scale(self.minor_units as i128, self.scale)
    }
}

impl PartialEq for Quantity {
    fn eq(&self, other: &Self) -> bool {
        self.to_decimal() == other.to_decimal()
    }
}

impl Eq for Quantity {}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal())
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let value = parse_plain_decimal(&s).map_err(serde::de::Error::custom)?;
        Quantity::from_decimal(value).map_err(serde::de::Error::custom)
    }
}

/// Calendar date. The fields are public so that malformed dates can be
/// represented and reported by validation; see [`DateValue::is_valid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DateValue {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

impl DateValue {
    pub fn new(year: i32, month: u32, day: u32) -> Self {
        Self { year, month, day }
    }

    fn to_naive(self) -> Option<NaiveDate> {
        NaiveDate::from_ymd_opt(self.year, self.month, self.day)
    }

    /// True for a real proleptic Gregorian date.
    pub fn is_valid(&self) -> bool {
        self.to_naive().is_some()
    }

    /// Days since 1970-01-01, or `None` for an invalid date.
    pub fn epoch_day(&self) -> Option<i64> {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1)?;
        Some(self.to_naive()?.signed_duration_since(epoch).num_days())
    }

    pub fn from_epoch_day(days: i64) -> Option<Self> {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1)?;
        let date = epoch.checked_add_signed(chrono::Duration::try_days(days)?)?;
        Some(Self::new(date.year(), date.month(), date.day()))
    }

    /// Strict `YYYY-MM-DD` parse of a valid date.
    pub fn parse_iso(s: &str) -> Result<Self, ValueError> {
        let err = || ValueError::Date(s.to_string());
        let mut parts = s.split('-');
        let (y, m, d) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(y), Some(m), Some(d), None) => (y, m, d),
            _ => return Err(err()),
        };
        let all_digits = |p: &str, n: usize| p.len() == n && p.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(y, 4) || !all_digits(m, 2) || !all_digits(d, 2) {
            return Err(err());
        }
        let date = Self::new(
            y.parse().map_err(|_| err())?,
            m.parse().map_err(|_| err())?,
            d.parse().map_err(|_| err())?,
        );
        if date.is_valid() {
            Ok(date)
        } else {
            Err(err())
        }
    }
}

impl fmt::Display for DateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl Serialize for DateValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DateValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        DateValue::parse_iso(&s).map_err(serde::de::Error::custom)
    }
}

/// The tag of a [`FieldValue`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Text,
    Date,
    Money,
    Qty,
    Identifier,
    Absent,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ValueKind::Text => "text",
            ValueKind::Date => "date",
            ValueKind::Money => "money",
            ValueKind::Qty => "quantity",
            ValueKind::Identifier => "identifier",
            ValueKind::Absent => "absent",
        };
        f.write_str(name)
    }
}

/// A typed field value. `Absent` is the only representation of a missing
/// field; an empty `Text` is a present value.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum FieldValue {
    Text(String),
    Date(DateValue),
    Money(MonetaryAmount),
    Qty(Quantity),
    Identifier(String),
    #[default]
    Absent,
}

impl FieldValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            FieldValue::Text(_) => ValueKind::Text,
            FieldValue::Date(_) => ValueKind::Date,
            FieldValue::Money(_) => ValueKind::Money,
            FieldValue::Qty(_) => ValueKind::Qty,
            FieldValue::Identifier(_) => ValueKind::Identifier,
            FieldValue::Absent => ValueKind::Absent,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, FieldValue::Absent)
    }

    pub fn is_present(&self) -> bool {
        !self.is_absent()
    }

    pub fn as_money(&self) -> Option<&MonetaryAmount> {
        match self {
            FieldValue::Money(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_qty(&self) -> Option<&Quantity> {
        match self {
            FieldValue::Qty(q) => Some(q),
            _ => None,
        }
    }
}
