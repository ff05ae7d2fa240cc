//! Report serialization: canonical JSON and a Markdown rendering.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::CorpusError;
use crate::config::MethodAnnotations;
use crate::consistency::RuleId;
use crate::metrics::{EvaluationReport, MetricBlock};
use crate::schema::registry::Entity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// Pretty JSON with object keys sorted at every level.
pub fn report_to_json(report: &EvaluationReport) -> String {
    // serde_json's default map is ordered, so a round trip through Value sorts keys.
    let value = serde_json::to_value(report).expect("report serializes");
    let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
    text.push('\n');
    text
}

pub fn report_from_json(text: &str, origin: &str) -> Result<EvaluationReport, CorpusError> {
    serde_json::from_str(text).map_err(|e| CorpusError::Parse {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn write_report(report: &EvaluationReport, format: ReportFormat, path: &Path) -> Result<(), CorpusError> {
    let text = match format {
        ReportFormat::Json => report_to_json(report),
        ReportFormat::Markdown => render_markdown(report),
    };
    std::fs::write(path, text).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })
}

/// Methods in display order: configured order first, the rest by name.
fn ordered_methods(report: &EvaluationReport) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for name in &report.config.report.method_order {
        if report.methods.contains_key(name) && !out.contains(&name.as_str()) {
            out.push(name);
        }
    }
    for name in report.methods.keys() {
        if !out.contains(&name.as_str()) {
            out.push(name);
        }
    }
    out
}

const NA: &str = "n/a";

fn pct(v: Option<u64>) -> String {
    v.map_or_else(|| NA.to_string(), |p| p.to_string())
}

fn frac(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| format!("{x:.4}"))
}

fn seconds(v: Option<f64>) -> String {
    match v {
        None => NA.to_string(),
        Some(s) if (s - s.round()).abs() < 0.05 => format!("{} sec", s.round()),
        Some(s) => format!("{s:.1} sec"),
    }
}

fn cell(v: &Option<String>) -> String {
    v.as_deref().map_or_else(|| NA.to_string(), |s| s.replace('|', "\\|"))
}

fn table(out: &mut String, title: &str, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "## {title}\n");
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

fn detail_row(label: &str, m: &MetricBlock) -> Vec<String> {
    let p = &m.presence;
    vec![
        label.to_string(),
        m.documents.to_string(),
        frac(m.accuracy.overall),
        frac(m.accuracy.exact_only),
        frac(m.macro_accuracy),
        format!("{:.4}", p.presence_only.f1),
        format!("{:.4}", p.presence_and_correctness.f1),
        format!("{:.4}", m.line_items.completeness),
        frac(m.consistency.pass_rate),
        frac(m.consistency.math_error_rate),
        m.counts.spurious.to_string(),
        m.diagnostics.to_string(),
    ]
}

const DETAIL_HEADER: [&str; 12] = [
    "Group",
    "Documents",
    "Accuracy",
    "Exact accuracy",
    "Macro accuracy",
    "Presence F1",
    "Correct-presence F1",
    "Line-item completeness",
    "Pass rate",
    "Math error rate",
    "Spurious",
    "Diagnostics",
];

pub fn render_markdown(report: &EvaluationReport) -> String {
    let methods = ordered_methods(report);
    let blank = MethodAnnotations::default();
    let notes = |m: &str| report.config.report.annotations.get(m).unwrap_or(&blank);
    let display = |m: &str| notes(m).display_name.clone().unwrap_or_else(|| m.to_string());

    let mut out = String::new();
    let _ = writeln!(out, "# Evaluation report: {}\n", report.corpus_id);

    let overall: Vec<Vec<String>> = methods
        .iter()
        .map(|m| {
            let b = &report.methods[*m].metrics;
            vec![
                display(m),
                pct(b.accuracy_pct),
                seconds(b.timing.seconds_per_page),
                pct(b.consistency.pass_rate_pct),
                pct(b.consistency.math_error_pct),
            ]
        })
        .collect();
    table(
        &mut out,
        "Overall performance and consistency",
        &[
            "Method",
            "Overall Accuracy (%)",
            "Processing Time (avg/page)",
            "Consistency Check Pass Rate (%)",
            "Mathematical Validation Errors(%)",
        ],
        &overall,
    );

    let annotated = |f: fn(&MethodAnnotations) -> [&Option<String>; 4]| -> Vec<Vec<String>> {
        methods
            .iter()
            .map(|m| std::iter::once(display(m)).chain(f(notes(m)).iter().map(|v| cell(v))).collect())
            .collect()
    };
    table(
        &mut out,
        "Technical characteristics",
        &["Method", "Input Format", "Model Architecture", "Pre-processing Required", "Computational Resources"],
        &annotated(|a| [&a.input_format, &a.model_architecture, &a.preprocessing_required, &a.computational_resources]),
    );
    let errors: Vec<Vec<String>> = methods
        .iter()
        .map(|m| {
            let a = notes(m);
            vec![display(m), cell(&a.primary_error_sources), cell(&a.complex_layout_handling), cell(&a.multi_page_support)]
        })
        .collect();
    table(
        &mut out,
        "Error analysis",
        &["Method", "Primary Error Sources", "Complex Layout Handling", "Multi-page Document Support"],
        &errors,
    );
    table(
        &mut out,
        "Practical considerations",
        &["Method", "Setup Complexity", "Scalability", "Cost Efficiency", "Real-time Processing"],
        &annotated(|a| [&a.setup_complexity, &a.scalability, &a.cost_efficiency, &a.real_time_processing]),
    );

    let details: Vec<Vec<String>> =
        methods.iter().map(|m| detail_row(&display(m), &report.methods[*m].metrics)).collect();
    table(&mut out, "Detailed metrics", &DETAIL_HEADER, &details);

    let mut entity_header = vec!["Method"];
    entity_header.extend(Entity::ALL.iter().map(|e| e.as_str()));
    let entity_rows: Vec<Vec<String>> = methods
        .iter()
        .map(|m| {
            let b = &report.methods[*m].metrics;
            std::iter::once(display(m))
                .chain(Entity::ALL.iter().map(|e| frac(b.entities.get(e).and_then(|x| x.accuracy))))
                .collect()
        })
        .collect();
    table(&mut out, "Accuracy by entity", &entity_header, &entity_rows);

    let mut rule_header = vec!["Method"];
    rule_header.extend(RuleId::ALL.iter().map(|r| r.as_str()));
    let rule_rows: Vec<Vec<String>> = methods
        .iter()
        .map(|m| {
            let docs = &report.methods[*m].documents;
            std::iter::once(display(m))
                .chain(RuleId::ALL.iter().map(|r| {
                    let (mut pass, mut fail) = (0, 0);
                    for d in docs {
                        match d.consistency.as_ref().map(|c| c.status(*r)) {
                            Some(crate::consistency::Status::Pass) => pass += 1,
                            Some(crate::consistency::Status::Fail) => fail += 1,
                            _ => {}
                        }
                    }
                    format!("{pass} pass / {fail} fail")
                }))
                .collect()
        })
        .collect();
    table(&mut out, "Consistency rules", &rule_header, &rule_rows);

    for m in &methods {
        let r = &report.methods[*m];
        let fields: Vec<Vec<String>> = r
            .fields
            .iter()
            .map(|(path, c)| {
                vec![
                    path.clone(),
                    c.correct_exact.to_string(),
                    c.correct_relaxed.to_string(),
                    c.incorrect.to_string(),
                    c.missing.to_string(),
                    c.spurious.to_string(),
                    frac(c.accuracy().overall),
                ]
            })
            .collect();
        table(
            &mut out,
            &format!("Field accuracy: {}", display(m)),
            &["Field", "Exact", "Relaxed", "Incorrect", "Missing", "Spurious", "Accuracy"],
            &fields,
        );
        let strata: Vec<Vec<String>> =
            r.strata.iter().map(|s| detail_row(&format!("{}={}", s.dimension.as_str(), s.key), &s.metrics)).collect();
        table(&mut out, &format!("Strata: {}", display(m)), &DETAIL_HEADER, &strata);
    }
    while out.ends_with("\n\n") {
        out.pop();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EvalConfig;
    use crate::metrics::MethodReport;
    use std::collections::BTreeMap;

    fn block(docs: usize, acc: u64, secs: f64, pass: u64, math: u64) -> MetricBlock {
        let mut b = MetricBlock::from_documents(&[]);
        b.documents = docs;
        b.accuracy_pct = Some(acc);
        b.timing.seconds_per_page = Some(secs);
        b.consistency.pass_rate_pct = Some(pass);
        b.consistency.math_error_pct = Some(math);
        b
    }

    fn report() -> EvaluationReport {
        let mut methods = BTreeMap::new();
        for (name, b) in [("a", block(100, 94, 30.0, 93, 5)), ("b", block(100, 63, 10.0, 80, 20))] {
            methods.insert(
                name.to_string(),
                MethodReport { metrics: b, fields: BTreeMap::new(), strata: Vec::new(), documents: Vec::new() },
            );
        }
        let mut config = EvalConfig::default();
        config.report.method_order = vec!["b".into(), "a".into()];
        config.report.annotations.insert(
            "a".into(),
            MethodAnnotations { display_name: Some("Method A".into()), scalability: Some("Excellent".into()), ..Default::default() },
        );
        EvaluationReport { corpus_id: "c".into(), config, methods }
    }

    #[test]
    fn overall_table_cells_and_order() {
        let md = render_markdown(&report());
        let lines: Vec<&str> = md.lines().collect();
        let header = lines.iter().position(|l| l.starts_with("| Method | Overall Accuracy")).unwrap();
        assert_eq!(lines[header + 2], "| b | 63 | 10 sec | 80 | 20 |");
        assert_eq!(lines[header + 3], "| Method A | 94 | 30 sec | 93 | 5 |");
        assert!(md.contains("| Method A | n/a | Excellent | n/a | n/a |"));
        assert!(md.ends_with("|\n"));
    }

    #[test]
    fn json_round_trip_is_stable() {
        let r = report();
        let text = report_to_json(&r);
        let back = report_from_json(&text, "r").unwrap();
        assert_eq!(report_to_json(&back), text);
    }

    #[test]
    fn seconds_format() {
        assert_eq!(seconds(Some(30.0)), "30 sec");
        assert_eq!(seconds(Some(2.5)), "2.5 sec");
        assert_eq!(seconds(None), "n/a");
    }
}
