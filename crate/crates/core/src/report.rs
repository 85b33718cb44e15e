//! Report bundles and their two serializations.
//!
//! `records` writes one JSON object per line to `report.jsonl`, each tagged
//! with a `record` field (`run`, `condition`, `probe`, `scan_summary`,
//! `equilibrium`, `buyer`, `replay`). `table` writes tab-separated files
//! (`conditions.tsv`, `probes.tsv`, `buyers.tsv`, `summary.tsv`,
//! `histogram.tsv`) whose headers are the `*_COLUMNS` constants below.
//! Floats carry 17 significant digits in both formats. Timing goes to
//! `metadata.json` only, so report bodies are reproducible byte for byte.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conditions::{Condition, ConditionReport};
use crate::families::FamilySpec;
use crate::mtw::ProbeRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Records,
    Table,
}

/// A probe tagged with the condition it was drawn for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedProbe {
    pub condition: Condition,
    #[serde(flatten)]
    pub record: ProbeRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub condition: Condition,
    pub probes: usize,
    pub rejected: usize,
    pub max_abs_discrepancy: f64,
    /// `|route − structured| / max(|structured|, 1e-2)`, maximized.
    pub max_rel_discrepancy: f64,
    /// Largest `|sum_form − structured|`, sum-form families only.
    pub max_sum_form_discrepancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCheck {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub dim: usize,
    pub market_size: usize,
    pub total_surplus: Option<f64>,
    pub min_slack: Option<f64>,
    pub max_matched_gap: Option<f64>,
    pub matching: Option<Vec<usize>>,
    pub validation_pass_fraction: Option<f64>,
    pub synthetic_buyers: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub min_sv_min: Option<f64>,
    pub min_sv_median: Option<f64>,
    pub min_sv_max: Option<f64>,
    pub max_relative_error: Option<f64>,
    pub min_bracket_eig: Option<f64>,
    /// Counts of `log10(min_sv)` in unit-width bins.
    pub sv_histogram: Vec<HistogramBin>,
    pub dim_estimate: Option<f64>,
    pub checks: Vec<NamedCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuyerRow {
    pub index: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub min_sv: f64,
    pub relative_error: f64,
    pub bracket_min_eig: f64,
    pub p0_min_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub condition: Option<Condition>,
    pub original: f64,
    pub replayed: f64,
    pub difference: f64,
    pub reproduced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub family: FamilySpec,
    pub reports: Vec<ConditionReport>,
    pub probes: Vec<TaggedProbe>,
    pub scan_summary: Option<ScanSummary>,
    pub equilibrium: Option<EquilibriumSummary>,
    pub buyers: Vec<BuyerRow>,
    pub replay: Option<ReplayRecord>,
}

impl ReportBundle {
    pub fn new(command: &str, seed: u64, config_hash: String, family: FamilySpec) -> Self {
        Self {
            command: command.to_string(),
            seed,
            config_hash,
            family,
            reports: Vec::new(),
            probes: Vec::new(),
            scan_summary: None,
            equilibrium: None,
            buyers: Vec::new(),
            replay: None,
        }
    }
}

/// Run information that is allowed to differ between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    pub version: String,
    pub threads: usize,
    pub elapsed_seconds: f64,
}

struct Precise;

impl serde_json::ser::Formatter for Precise {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }
}

/// Compact JSON with every float written to 17 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise);
    value.serialize(&mut ser).expect("report values serialize");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    record: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct RunHeader<'a> {
    command: &'a str,
    seed: u64,
    config_hash: &'a str,
    family: &'a FamilySpec,
}

fn line<T: Serialize>(out: &mut String, record: &'static str, body: &T) {
    out.push_str(&to_json(&Tagged { record, body }));
    out.push('\n');
}

/// JSON-lines body.
pub fn to_records(b: &ReportBundle) -> String {
    let mut out = String::new();
    let header = RunHeader {
        command: &b.command,
        seed: b.seed,
        config_hash: &b.config_hash,
        family: &b.family,
    };
    line(&mut out, "run", &header);
    for r in &b.reports {
        line(&mut out, "condition", r);
    }
    for p in &b.probes {
        line(&mut out, "probe", p);
    }
    if let Some(s) = &b.scan_summary {
        line(&mut out, "scan_summary", s);
    }
    if let Some(e) = &b.equilibrium {
        line(&mut out, "equilibrium", e);
    }
    for r in &b.buyers {
        line(&mut out, "buyer", r);
    }
    if let Some(r) = &b.replay {
        line(&mut out, "replay", r);
    }
    out
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|a| fmt_f64(*a)).collect::<Vec<_>>().join(";")
}

pub const CONDITION_COLUMNS: &[&str] = &[
    "condition",
    "subject",
    "verdict",
    "probes_total",
    "probes_rejected",
    "worst_value",
    "witness_x",
    "witness_y",
    "witness_z",
    "witness_u",
    "witness_v",
    "witness_t",
    "witness_value",
    "witness_note",
];

pub const PROBE_COLUMNS: &[&str] = &[
    "condition",
    "index",
    "x",
    "y",
    "u",
    "v",
    "z",
    "structured",
    "a",
    "b",
    "term1",
    "term2",
    "term3",
    "term4",
    "term5",
    "direct",
    "crosscurv",
    "sum_form",
    "sum_form_term1",
    "sum_form_term2",
    "normalized",
    "orthogonality",
    "discrepancy",
    "rejected",
];

pub const BUYER_COLUMNS: &[&str] = &["index", "x", "y", "z", "min_sv", "relative_error", "bracket_min_eig", "p0_min_eig"];

pub const HISTOGRAM_COLUMNS: &[&str] = &["log10_min_sv_lo", "log10_min_sv_hi", "count"];

fn tsv_row(out: &mut String, cells: &[String]) {
    let cleaned: Vec<String> = cells.iter().map(|c| c.replace(['\t', '\n'], " ")).collect();
    out.push_str(&cleaned.join("\t"));
    out.push('\n');
}

fn header(cols: &[&str]) -> String {
    let mut s = cols.join("\t");
    s.push('\n');
    s
}

/// Tab-separated files, as `(file name, contents)`.
pub fn to_tables(b: &ReportBundle) -> Vec<(String, String)> {
    let mut files = Vec::new();

    let mut summary = String::from("key\tvalue\n");
    tsv_row(&mut summary, &["command".into(), b.command.clone()]);
    tsv_row(&mut summary, &["seed".into(), b.seed.to_string()]);
    tsv_row(&mut summary, &["config_hash".into(), b.config_hash.clone()]);
    tsv_row(&mut summary, &["family".into(), to_json(&b.family)]);
    if let Some(s) = &b.scan_summary {
        tsv_row(&mut summary, &["scan_probes".into(), s.probes.to_string()]);
        tsv_row(&mut summary, &["scan_rejected".into(), s.rejected.to_string()]);
        tsv_row(&mut summary, &["max_abs_discrepancy".into(), fmt_f64(s.max_abs_discrepancy)]);
        tsv_row(&mut summary, &["max_rel_discrepancy".into(), fmt_f64(s.max_rel_discrepancy)]);
        tsv_row(&mut summary, &["max_sum_form_discrepancy".into(), fmt_opt(s.max_sum_form_discrepancy)]);
    }
    if let Some(e) = &b.equilibrium {
        let rows: [(&str, String); 13] = [
            ("dim", e.dim.to_string()),
            ("market_size", e.market_size.to_string()),
            ("total_surplus", fmt_opt(e.total_surplus)),
            ("min_slack", fmt_opt(e.min_slack)),
            ("max_matched_gap", fmt_opt(e.max_matched_gap)),
            ("validation_pass_fraction", fmt_opt(e.validation_pass_fraction)),
            ("synthetic_buyers", e.synthetic_buyers.to_string()),
            ("accepted", e.accepted.to_string()),
            ("rejected", e.rejected.to_string()),
            ("min_sv_min", fmt_opt(e.min_sv_min)),
            ("max_relative_error", fmt_opt(e.max_relative_error)),
            ("min_bracket_eig", fmt_opt(e.min_bracket_eig)),
            ("dim_estimate", fmt_opt(e.dim_estimate)),
        ];
        for (k, v) in rows {
            tsv_row(&mut summary, &[k.into(), v]);
        }
        for c in &e.checks {
            tsv_row(&mut summary, &[format!("check:{}", c.name), if c.passed { "PASS".into() } else { "FAIL".into() }]);
        }
        let mut hist = header(HISTOGRAM_COLUMNS);
        for bin in &e.sv_histogram {
            tsv_row(&mut hist, &[fmt_f64(bin.lo), fmt_f64(bin.hi), bin.count.to_string()]);
        }
        files.push(("histogram.tsv".to_string(), hist));
    }
    if let Some(r) = &b.replay {
        tsv_row(&mut summary, &["replay_original".into(), fmt_f64(r.original)]);
        tsv_row(&mut summary, &["replay_value".into(), fmt_f64(r.replayed)]);
        tsv_row(&mut summary, &["replay_difference".into(), fmt_f64(r.difference)]);
        tsv_row(&mut summary, &["replay_reproduced".into(), r.reproduced.to_string()]);
    }
    files.insert(0, ("summary.tsv".to_string(), summary));

    if !b.reports.is_empty() {
        let mut t = header(CONDITION_COLUMNS);
        for r in &b.reports {
            let w = r.witnesses.first();
            let opt_vec = |f: fn(&crate::conditions::Witness) -> &Option<Vec<f64>>| {
                w.and_then(|w| f(w).as_ref()).map(|v| fmt_vec(v)).unwrap_or_default()
            };
            tsv_row(
                &mut t,
                &[
                    r.condition.to_string(),
                    r.subject.clone(),
                    r.verdict.to_string(),
                    r.probes_total.to_string(),
                    r.probes_rejected.to_string(),
                    fmt_f64(r.worst_value),
                    opt_vec(|w| &w.x),
                    opt_vec(|w| &w.y),
                    opt_vec(|w| &w.z),
                    opt_vec(|w| &w.u),
                    opt_vec(|w| &w.v),
                    fmt_opt(w.and_then(|w| w.t)),
                    fmt_opt(w.map(|w| w.value)),
                    w.map(|w| w.note.clone()).unwrap_or_default(),
                ],
            );
        }
        files.push(("conditions.tsv".to_string(), t));
    }

    if !b.probes.is_empty() {
        let mut t = header(PROBE_COLUMNS);
        for p in &b.probes {
            let r = &p.record;
            let s = r.structured;
            let term = |k: usize| fmt_opt(s.map(|s| s.terms[k]));
            let sf = r.sum_form.as_ref();
            tsv_row(
                &mut t,
                &[
                    p.condition.to_string(),
                    r.index.to_string(),
                    fmt_vec(&r.x),
                    fmt_vec(&r.y),
                    fmt_vec(&r.u),
                    fmt_vec(&r.v),
                    fmt_vec(&r.z),
                    fmt_opt(s.map(|s| s.total)),
                    fmt_opt(s.map(|s| s.a)),
                    fmt_opt(s.map(|s| s.b)),
                    term(0),
                    term(1),
                    term(2),
                    term(3),
                    term(4),
                    fmt_opt(r.direct),
                    fmt_opt(r.crosscurv),
                    fmt_opt(sf.map(|f| f.total)),
                    fmt_opt(sf.map(|f| f.term1)),
                    fmt_opt(sf.map(|f| f.term2)),
                    fmt_opt(r.normalized),
                    fmt_f64(r.orthogonality),
                    fmt_opt(r.discrepancy),
                    r.rejected.clone().unwrap_or_default(),
                ],
            );
        }
        files.push(("probes.tsv".to_string(), t));
    }

    if !b.buyers.is_empty() {
        let mut t = header(BUYER_COLUMNS);
        for r in &b.buyers {
            tsv_row(
                &mut t,
                &[
                    r.index.to_string(),
                    fmt_vec(&r.x),
                    fmt_vec(&r.y),
                    fmt_vec(&r.z),
                    fmt_f64(r.min_sv),
                    fmt_f64(r.relative_error),
                    fmt_f64(r.bracket_min_eig),
                    fmt_f64(r.p0_min_eig),
                ],
            );
        }
        files.push(("buyers.tsv".to_string(), t));
    }
    files
}

/// The report body in the chosen format, as `(file name, contents)`.
pub fn render(b: &ReportBundle, format: Format) -> Vec<(String, String)> {
    match format {
        Format::Records => vec![("report.jsonl".to_string(), to_records(b))],
        Format::Table => to_tables(b),
    }
}

/// Writes the body files and `metadata.json` into `dir`.
pub fn write_bundle(b: &ReportBundle, meta: &Metadata, dir: &Path, format: Format) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, body) in render(b, format) {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
    }
    let path = dir.join("metadata.json");
    let mut m = to_json(meta);
    let _ = writeln!(m);
    std::fs::write(&path, m)?;
    written.push(path);
    Ok(written)
}
