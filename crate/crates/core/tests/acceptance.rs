//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use invoice_eval::alignment::align_matrix;
use invoice_eval::cli::{self, Cli};
use invoice_eval::config::EvalConfig;
use invoice_eval::consistency::{check_invoice, RuleId, Status};
use invoice_eval::evaluate::{evaluate_manifest_file, EvalOptions};
use invoice_eval::metrics::MetricBlock;
use invoice_eval::normalize::{format_date, format_money, parse_date, parse_money, NormalizationPolicy};
use invoice_eval::schema::{Currency, DateValue, FieldValue, MonetaryAmount};
use invoice_eval::synth::{capacity, generate_invoice, inject_errors, ErrorKind, ErrorSpec, GenConfig};
use clap::Parser;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two_methods")
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let cli = Cli::try_parse_from(std::iter::once("invoice-eval").chain(args.iter().copied())).expect("valid arguments");
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(&cli, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// 100 synthetic invoices (seed 7) scored against themselves.
fn identity_corpus() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus");
    let started = Instant::now();
    let (code, _, err) = run_cli(&["synth", corpus.to_str().unwrap(), "-n", "100", "--seed", "7"]);
    ensure(code == 0, || format!("synth exited {code}: {err}"))?;
    let opts = EvalOptions { workers: Some(1), ..EvalOptions::default() };
    let report = evaluate_manifest_file(&corpus.join("manifest.json"), &EvalConfig::default(), &opts)
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let m = &report.methods["synthetic"].metrics;
    ensure(m.documents == 100, || format!("{} documents", m.documents))?;
    ensure(m.accuracy.overall == Some(1.0), || format!("accuracy {:?}", m.accuracy))?;
    ensure(m.presence.presence_only.f1 == 1.0, || format!("presence F1 {:?}", m.presence.presence_only))?;
    ensure(m.presence.presence_and_correctness.f1 == 1.0, || {
        format!("correct-presence F1 {:?}", m.presence.presence_and_correctness)
    })?;
    ensure(m.line_items.completeness == 1.0, || format!("completeness {:?}", m.line_items))?;
    ensure(m.consistency.pass_rate == Some(1.0), || format!("pass rate {:?}", m.consistency))?;
    ensure(m.consistency.math_error_rate == Some(0.0), || format!("math error rate {:?}", m.consistency))?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("100 documents, all metrics exact, {elapsed:.2?}"))
}

/// 1,000 single-document cases with random error specs; the pipeline must
/// agree with the counting oracle on every count and rate.
fn oracle_equivalence() -> Outcome {
    let default_cfg = EvalConfig::default();
    let mut loose = EvalConfig::default();
    loose.matching.date_tol_days = 3;
    loose.matching.relaxed_text_threshold = 0.8;
    loose.consistency.tolerance = Decimal::new(5, 2);

    let started = Instant::now();
    let mut seen = BTreeSet::new();
    let mut injected = 0;
    for seed in 0..1000u64 {
        let cfg = if seed % 4 == 3 { &loose } else { &default_cfg };
        let case = common::oracle_case(50_000 + seed, 1, cfg);
        for l in &case.ledgers {
            injected += l.entries.len();
            seen.extend(l.entries.iter().map(|e| e.kind));
        }
        let diff = case.expected(cfg).mismatches(&case.block());
        ensure(diff.is_empty(), || format!("case {seed}: {diff:?}"))?;
    }
    let elapsed = started.elapsed();
    ensure(seen.len() == ErrorKind::ALL.len(), || format!("only saw {seen:?}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 cases, {injected} injected errors, all {} kinds, {elapsed:.2?}", seen.len()))
}

/// Exhaustive optimum over all partial injective matchings.
fn brute_force(sim: &[Vec<f64>], cols: usize, threshold: f64) -> f64 {
    fn go(sim: &[Vec<f64>], r: usize, used: &mut [bool], t: f64) -> f64 {
        if r == sim.len() {
            return 0.0;
        }
        let mut best = go(sim, r + 1, used, t);
        for c in 0..used.len() {
            if !used[c] && sim[r][c] >= t {
                used[c] = true;
                best = best.max(sim[r][c] + go(sim, r + 1, used, t));
                used[c] = false;
            }
        }
        best
    }
    go(sim, 0, &mut vec![false; cols], threshold)
}

fn assignment_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let thresholds = [0.0, 0.3, 0.5];
    for case in 0..500 {
        let rows = rng.gen_range(0..=7);
        let cols = rng.gen_range(0..=7);
        let coarse = rng.gen_bool(0.3);
        let sim: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| if coarse { f64::from(rng.gen_range(0..=4u8)) / 4.0 } else { rng.gen::<f64>() })
                    .collect()
            })
            .collect();
        let t = thresholds[case % 3];
        let a = align_matrix(&sim, cols, t);
        let (mut g_used, mut p_used) = (BTreeSet::new(), BTreeSet::new());
        for p in &a.pairs {
            ensure(g_used.insert(p.gt) && p_used.insert(p.pred), || format!("case {case}: not injective"))?;
            ensure(sim[p.gt][p.pred] >= t, || format!("case {case}: pair below threshold"))?;
        }
        let best = brute_force(&sim, cols, t);
        ensure((a.total_similarity() - best).abs() <= 1e-9, || {
            format!("case {case}: total {} vs optimum {best}", a.total_similarity())
        })?;
    }
    Ok("500 matrices up to 7x7 match the exhaustive optimum within 1e-9".into())
}

fn statuses(inv: &invoice_eval::schema::CanonicalInvoice, tol: Decimal) -> Result<Vec<Status>, String> {
    let c = check_invoice(inv, tol).map_err(|e| e.to_string())?;
    Ok(RuleId::ALL.iter().map(|r| c.status(*r)).collect())
}

fn consistency_sharpness() -> Outcome {
    let tolerances = [Decimal::new(1, 2), Decimal::new(5, 2), Decimal::new(10, 2), Decimal::ONE];
    let minor = Decimal::new(1, 2);
    for i in 0..200u64 {
        let (gt, _) = generate_invoice(9_000 + i, &GenConfig::default()).map_err(|e| e.to_string())?;
        let tol = tolerances[i as usize % tolerances.len()];
        let base = statuses(&gt, tol)?;
        ensure(base.iter().all(|s| *s == Status::Pass), || format!("invoice {i}: ground truth {base:?}"))?;
        let gross = *gt.header("invoice.gross_amount").as_money().expect("gross present");
        for sign in [Decimal::ONE, Decimal::NEGATIVE_ONE] {
            for (delta, want) in [(tol, Status::Pass), (tol + minor, Status::Fail)] {
                let mut inv = gt.clone();
                let moved = MonetaryAmount::from_decimal(gross.to_decimal() + sign * delta, gross.currency).unwrap();
                inv.set_header("invoice.gross_amount", FieldValue::Money(moved));
                let got = statuses(&inv, tol)?;
                ensure(got[0] == want, || format!("invoice {i}: gross {sign}x{delta} gave R1 {:?}", got[0]))?;
                ensure(got[1..] == base[1..], || format!("invoice {i}: other rules moved to {got:?}"))?;
            }
        }
    }
    Ok("200 invoices x 4 perturbations: R1 flips exactly past tolerance, other rules unchanged".into())
}

fn two_method_fixture() -> Outcome {
    let dir = fixture_dir();
    let (code, md, err) = run_cli(&[
        "evaluate",
        dir.join("manifest.json").to_str().unwrap(),
        "--config",
        dir.join("config.json").to_str().unwrap(),
        "--format",
        "md",
    ]);
    ensure(code == 0, || format!("evaluate exited {code}: {err}"))?;
    for row in ["| Llama Extractor | 94 | 30 sec | 93 | 5 |", "| Docling Method | 63 | 10 sec | 80 | 20 |"] {
        ensure(md.contains(row), || format!("missing row {row:?}"))?;
    }
    let llama = md.find("| Llama Extractor | 94").unwrap();
    let docling = md.find("| Docling Method | 63").unwrap();
    ensure(llama < docling, || "rows out of order".into())?;
    Ok("Markdown rows 94 | 30 sec | 93 | 5 and 63 | 10 sec | 80 | 20".into())
}

struct ChainPoint {
    accuracy: f64,
    f1: f64,
    completeness: f64,
    pass_rate: f64,
}

impl ChainPoint {
    fn of(m: &MetricBlock) -> Self {
        Self {
            accuracy: m.accuracy.overall.unwrap_or(0.0),
            f1: m.presence.presence_and_correctness.f1,
            completeness: m.line_items.completeness,
            pass_rate: m.consistency.pass_rate.unwrap_or(0.0),
        }
    }
}

/// Grows error counts one at a time and checks that no metric rises.
/// Pass rate is only checked when arithmetic operands are never dropped:
/// dropping one turns a failing rule into a not-applicable one.
fn run_chain(chain: usize, rng: &mut ChaCha8Rng, drop_arithmetic: bool, cfg: &EvalConfig) -> Result<usize, String> {
    let gen = common::gen_config(rng);
    let (gt, _) = generate_invoice(rng.gen(), &gen).map_err(|e| e.to_string())?;
    let mut spec = ErrorSpec::with_seed(rng.gen());
    spec.drop_arithmetic_fields = drop_arithmetic;
    spec.magnitudes.money_delta = (1, rng.gen_range(1..=2000));
    spec.magnitudes.text_edits = (1, rng.gen_range(1..=8));
    let cap = capacity(&gt, spec.seed, spec.drop_arithmetic_fields);
    let mut increments: Vec<ErrorKind> =
        ErrorKind::ALL.iter().flat_map(|k| std::iter::repeat(*k).take(cap.get(*k))).collect();
    increments.shuffle(rng);
    increments.truncate(rng.gen_range(4..=14));

    let mut prev: Option<ChainPoint> = None;
    let mut steps = 0;
    for (step, kind) in std::iter::once(None).chain(increments.into_iter().map(Some)).enumerate() {
        if let Some(k) = kind {
            spec.counts.set(k, spec.counts.get(k) + 1);
        }
        let (pred, _) = inject_errors(&gt, &spec, cfg).map_err(|e| e.to_string())?;
        let score = common::score("chain", &gt, &pred, cfg);
        let point = ChainPoint::of(&MetricBlock::from_documents(std::slice::from_ref(&score)));
        if let Some(p) = &prev {
            let mut checked = vec![
                ("accuracy", p.accuracy, point.accuracy),
                ("F1", p.f1, point.f1),
                ("completeness", p.completeness, point.completeness),
            ];
            if !drop_arithmetic {
                checked.push(("pass rate", p.pass_rate, point.pass_rate));
            }
            for (name, before, after) in checked {
                ensure(after <= before, || format!("chain {chain} step {step}: {name} rose {before} -> {after}"))?;
            }
        }
        prev = Some(point);
        steps += 1;
    }
    Ok(steps)
}

fn monotonicity() -> Outcome {
    let cfg = EvalConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut steps = 0;
    for chain in 0..200 {
        steps += run_chain(chain, &mut rng, false, &cfg)?;
    }
    let mut extra = 0;
    for chain in 200..250 {
        extra += run_chain(chain, &mut rng, true, &cfg)?;
    }
    Ok(format!(
        "200 chains ({steps} steps) with all four metrics non-increasing; \
         50 chains ({extra} steps) with dropped totals keep field metrics non-increasing"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fixture = fixture_dir();
    let manifest = fixture.join("manifest.json");
    let config = fixture.join("config.json");
    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        for format in ["json", "md"] {
            let out = dir.path().join(format!("report-{workers}.{format}"));
            let (code, _, err) = run_cli(&[
                "evaluate",
                manifest.to_str().unwrap(),
                "--config",
                config.to_str().unwrap(),
                "--workers",
                workers,
                "--format",
                format,
                "--out",
                out.to_str().unwrap(),
            ]);
            ensure(code == 0, || format!("workers {workers}: exit {code}: {err}"))?;
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
    }
    ensure(outputs[0] == outputs[2], || "JSON reports differ between 1 and 8 workers".into())?;
    ensure(outputs[1] == outputs[3], || "Markdown reports differ between 1 and 8 workers".into())?;
    Ok(format!("{} byte JSON and {} byte Markdown reports identical", outputs[0].len(), outputs[1].len()))
}

fn cur(code: &str) -> Currency {
    code.parse().expect("currency code")
}

/// Hand-computed expectations under the default policy with USD default.
const MONEY_TABLE: [(&str, i64, u32, &str); 20] = [
    ("1,234.56", 123456, 2, "USD"),
    ("1.234,56 €", 123456, 2, "EUR"),
    ("(100.00)", -10000, 2, "USD"),
    ("-42.5", -425, 1, "USD"),
    ("€ 0.99", 99, 2, "EUR"),
    ("£1,000", 1000, 0, "GBP"),
    ("$12", 12, 0, "USD"),
    ("12,5", 125, 1, "USD"),
    ("1 234 567,89 EUR", 123456789, 2, "EUR"),
    ("CHF 1'250.00", 125000, 2, "CHF"),
    ("1.000.000", 1000000, 0, "USD"),
    ("3,14159", 314159, 5, "USD"),
    ("2,500.5", 25005, 1, "USD"),
    ("USD -7.00", -700, 2, "USD"),
    ("1234.5678", 12345678, 4, "USD"),
    ("GBP 3.20", 320, 2, "GBP"),
    ("(1.234,00 €)", -123400, 2, "EUR"),
    (".75", 75, 2, "USD"),
    ("EUR 10.000,5", 100005, 1, "EUR"),
    ("99 ¥", 99, 0, "UNKNOWN"),
];

fn normalization_round_trips() -> Outcome {
    let policy = NormalizationPolicy { default_currency: cur("USD"), ..NormalizationPolicy::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let codes = ["EUR", "USD", "GBP", "CHF", "JPY", "SEK"];
    for i in 0..1000 {
        let scale = rng.gen_range(0..=6);
        let units = rng.gen_range(-1_000_000_000_000i64..=1_000_000_000_000);
        let m = MonetaryAmount::new(units, scale, cur(codes[i % codes.len()])).unwrap();
        let text = format_money(&m);
        let back = parse_money(&text, &policy).map_err(|e| format!("{text:?}: {e}"))?;
        ensure(back == m, || format!("money {m:?} -> {text:?} -> {back:?}"))?;

        let day = rng.gen_range(-25_000i64..=60_000);
        let d = DateValue::from_epoch_day(day).expect("in range");
        let text = format_date(&d);
        let back = parse_date(&text, &policy).map_err(|e| format!("{text:?}: {e}"))?;
        ensure(back == d, || format!("date {d:?} -> {text:?} -> {back:?}"))?;
    }
    let mut mismatches = Vec::new();
    for (raw, units, scale, code) in MONEY_TABLE {
        let want = MonetaryAmount::new(units, scale, cur(code)).unwrap();
        match parse_money(raw, &policy) {
            Ok(got) if got == want && got.scale == scale => {}
            other => mismatches.push(format!("{raw:?}: {other:?}")),
        }
    }
    ensure(mismatches.is_empty(), || mismatches.join("; "))?;
    Ok("1000 money and 1000 date round trips, 20 table entries agree".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("identity corpus", identity_corpus),
        ("oracle equivalence", oracle_equivalence),
        ("assignment optimality", assignment_optimality),
        ("consistency sharpness", consistency_sharpness),
        ("two-method fixture table", two_method_fixture),
        ("monotonicity", monotonicity),
        ("worker-count determinism", determinism),
        ("normalization round trips", normalization_round_trips),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
