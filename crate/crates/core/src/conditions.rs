//! Verdicts for the structural and curvature conditions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mtw::Route;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    A0,
    A1,
    A2,
    A3w,
    A3s,
    B3w,
    B3s,
    #[serde(rename = "b-convexity")]
    BConvexity,
}

impl Condition {
    pub const ALL: [Condition; 8] = [
        Condition::A0,
        Condition::A1,
        Condition::A2,
        Condition::A3w,
        Condition::A3s,
        Condition::B3w,
        Condition::B3s,
        Condition::BConvexity,
    ];

    /// Curvature conditions that restrict to pairs with `vᵀ b_xy u = 0`.
    pub fn is_orthogonal(self) -> bool {
        matches!(self, Condition::A3w | Condition::A3s)
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Condition::A3s | Condition::B3s)
    }

    pub fn is_curvature(self) -> bool {
        matches!(self, Condition::A3w | Condition::A3s | Condition::B3w | Condition::B3s)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.to_string().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::A0 => "A0",
            Condition::A1 => "A1",
            Condition::A2 => "A2",
            Condition::A3w => "A3w",
            Condition::A3s => "A3s",
            Condition::B3w => "B3w",
            Condition::B3s => "B3s",
            Condition::BConvexity => "b-convexity",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Fail => "FAIL",
        })
    }
}

/// Replayable evidence attached to a verdict. Only the fields relevant to
/// the check are filled.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub u: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub route: Option<Route>,
    pub value: f64,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    /// What was checked, e.g. `"h (x,z)-twist"`.
    pub subject: String,
    pub verdict: Verdict,
    pub probes_total: usize,
    pub probes_rejected: usize,
    pub worst_value: f64,
    pub witnesses: Vec<Witness>,
}

impl ConditionReport {
    pub fn new(condition: Condition, subject: impl Into<String>) -> Self {
        Self {
            condition,
            subject: subject.into(),
            verdict: Verdict::Pass,
            probes_total: 0,
            probes_rejected: 0,
            worst_value: f64::INFINITY,
            witnesses: Vec::new(),
        }
    }
}

/// Maximum number of witnesses kept per report.
pub const MAX_WITNESSES: usize = 8;

/// Keeps the `MAX_WITNESSES` smallest-valued witnesses, ordered ascending.
pub(crate) fn keep_worst(witnesses: &mut Vec<Witness>) {
    witnesses.sort_by(|a, b| a.value.total_cmp(&b.value));
    witnesses.truncate(MAX_WITNESSES);
}
