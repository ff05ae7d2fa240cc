//! Evaluation config file: normalization, matching, line-item alignment,
//! consistency tolerance and report options. Omitted keys take defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::LineItemConfig;
use crate::matching::MatchConfig;
use crate::metrics::MetricBlock;
use crate::normalize::NormalizationPolicy;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyConfig {
    /// Largest residual, in document currency units, that still passes.
    pub tolerance: Decimal,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self { tolerance: Decimal::new(1, 2) }
    }
}

/// Free-text descriptions of a method, shown in the qualitative report tables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodAnnotations {
    pub display_name: Option<String>,
    pub input_format: Option<String>,
    pub model_architecture: Option<String>,
    pub preprocessing_required: Option<String>,
    pub computational_resources: Option<String>,
    pub primary_error_sources: Option<String>,
    pub complex_layout_handling: Option<String>,
    pub multi_page_support: Option<String>,
    pub setup_complexity: Option<String>,
    pub scalability: Option<String>,
    pub cost_efficiency: Option<String>,
    pub real_time_processing: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Row order of methods in rendered tables; unlisted methods follow by name.
    pub method_order: Vec<String>,
    pub annotations: BTreeMap<String, MethodAnnotations>,
    /// Metric gates, e.g. `{"accuracy": 0.9}`.
    pub gates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub normalization: NormalizationPolicy,
    pub matching: MatchConfig,
    pub line_items: LineItemConfig,
    pub consistency: ConsistencyConfig,
    pub report: ReportConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn in_unit(name: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.matching;
        in_unit("matching.relaxed_text_threshold", m.relaxed_text_threshold)?;
        for (name, v) in [
            ("matching.money_abs_tol", m.money_abs_tol),
            ("matching.money_rel_tol", m.money_rel_tol),
            ("matching.qty_abs_tol", m.qty_abs_tol),
            ("consistency.tolerance", self.consistency.tolerance),
        ] {
            if v.is_sign_negative() && !v.is_zero() {
                return Err(ConfigError::Invalid(format!("{name} must be non-negative")));
            }
        }
        in_unit("line_items.min_row_similarity", self.line_items.min_row_similarity)?;
        let weights = self.line_items.field_weights.as_array();
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(ConfigError::Invalid("line_items.field_weights must be non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invalid(format!("line_items.field_weights must sum to 1, got {sum}")));
        }
        for (m, month) in &self.normalization.month_names {
            if !(1..=12).contains(month) {
                return Err(ConfigError::Invalid(format!("month name {m:?} maps to {month}")));
            }
        }
        for (name, v) in &self.report.gates {
            name.parse::<GateMetric>().map_err(ConfigError::Invalid)?;
            if !v.is_finite() {
                return Err(ConfigError::Invalid(format!("gate {name} must be a number")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: EvalConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text, &path.display().to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GateMetric {
    Accuracy,
    ExactAccuracy,
    F1,
    PresenceF1,
    Completeness,
    PassRate,
    MathErrorRate,
}

impl FromStr for GateMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "accuracy" => GateMetric::Accuracy,
            "exact_accuracy" => GateMetric::ExactAccuracy,
            "f1" => GateMetric::F1,
            "presence_f1" => GateMetric::PresenceF1,
            "completeness" => GateMetric::Completeness,
            "pass_rate" => GateMetric::PassRate,
            "math_error_rate" => GateMetric::MathErrorRate,
            other => return Err(format!("unknown gate metric {other:?}")),
        })
    }
}

impl GateMetric {
    pub fn value(self, m: &MetricBlock) -> Option<f64> {
        match self {
            GateMetric::Accuracy => m.accuracy.overall,
            GateMetric::ExactAccuracy => m.accuracy.exact_only,
            GateMetric::F1 => Some(m.presence.presence_and_correctness.f1),
            GateMetric::PresenceF1 => Some(m.presence.presence_only.f1),
            GateMetric::Completeness => Some(m.line_items.completeness),
            GateMetric::PassRate => m.consistency.pass_rate,
            GateMetric::MathErrorRate => m.consistency.math_error_rate,
        }
    }

    /// Error rates are ceilings; every other gate is a floor.
    pub fn satisfied(self, value: Option<f64>, threshold: f64) -> bool {
        match (self, value) {
            (_, None) => false,
            (GateMetric::MathErrorRate, Some(v)) => v <= threshold,
            (_, Some(v)) => v >= threshold,
        }
    }
}

/// Parses a `METRIC=VALUE` gate flag.
pub fn parse_gate(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("gate {s:?} must look like metric=value"))?;
    name.parse::<GateMetric>()?;
    let value: f64 = value.parse().map_err(|_| format!("gate value {value:?} is not a number"))?;
    Ok((name.to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_apply_to_omitted_keys() {
        let cfg = EvalConfig::from_json(r#"{"matching": {"date_tol_days": 2}}"#, "cfg").unwrap();
        assert_eq!(cfg.matching.date_tol_days, 2);
        assert_eq!(cfg.matching.relaxed_text_threshold, 0.90);
        assert_eq!(cfg.consistency.tolerance, Decimal::new(1, 2));
        assert_eq!(cfg.line_items.min_row_similarity, 0.5);
        assert_eq!(EvalConfig::from_json("{}", "cfg").unwrap(), EvalConfig::default());
    }

    #[test]
    fn tolerances_accept_numbers_and_strings() {
        let cfg = EvalConfig::from_json(r#"{"consistency": {"tolerance": 0.05}}"#, "c").unwrap();
        assert_eq!(cfg.consistency.tolerance, Decimal::new(5, 2));
        let cfg = EvalConfig::from_json(r#"{"consistency": {"tolerance": "0.05"}}"#, "c").unwrap();
        assert_eq!(cfg.consistency.tolerance, Decimal::new(5, 2));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(EvalConfig::from_json(r#"{"matching": {"relaxed_text_threshold": 1.5}}"#, "c").is_err());
        assert!(EvalConfig::from_json(r#"{"line_items": {"field_weights": {"description": 0.9}}}"#, "c").is_err());
        assert!(EvalConfig::from_json(r#"{"matching": {"colour": 1}}"#, "c").is_err());
        assert!(EvalConfig::from_json(r#"{"report": {"gates": {"speed": 1}}}"#, "c").is_err());
        match EvalConfig::from_json("{\n\"matching\": }", "c") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trips_through_json() {
        let mut cfg = EvalConfig::default();
        cfg.report.gates.insert("accuracy".into(), 0.9);
        cfg.report.annotations.insert(
            "m".into(),
            MethodAnnotations { display_name: Some("Method M".into()), ..Default::default() },
        );
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(EvalConfig::from_json(&text, "c").unwrap(), cfg);
    }

    #[test]
    fn gates() {
        assert_eq!(parse_gate("accuracy=0.9").unwrap(), ("accuracy".into(), 0.9));
        assert!(parse_gate("accuracy").is_err());
        assert!(parse_gate("speed=1").is_err());
        assert!(!GateMetric::Accuracy.satisfied(Some(0.63), 0.9));
        assert!(GateMetric::MathErrorRate.satisfied(Some(0.05), 0.1));
        assert!(!GateMetric::PassRate.satisfied(None, 0.5));
    }
}
