//! The four command pipelines behind the `hedonic` binary, usable from
//! library code as well.

use nalgebra::DVector;
use serde::Deserialize;

use crate::conditions::{Condition, ConditionReport, Verdict, Witness};
use crate::config::RunConfig;
use crate::equilibrium::run_equilibrium;
use crate::error::{Error, Result};
use crate::families::{Family, FamilySpec};
use crate::mtw::{mix, mtw_structured, scan_condition_with, check_bconvexity, check_bconvexity_premises, MtwProbe, Stencil};
use crate::report::{BuyerRow, EquilibriumSummary, HistogramBin, NamedCheck, ReplayRecord, ReportBundle, ScanSummary, TaggedProbe};
use crate::surplus::check_structure;
use crate::tensor_calc::{linalg, Point};

/// Dual feasibility tolerance for the discrete certificate.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// Smallest acceptable singular value of the contract Jacobian.
pub const MIN_SINGULAR_VALUE: f64 = 1e-8;
/// Largest acceptable closed-form vs finite-difference Jacobian error.
pub const JACOBIAN_REL_TOL: f64 = 1e-3;
/// Agreement required when replaying a witness.
pub const REPLAY_TOL: f64 = 1e-10;

fn build(cfg: &RunConfig) -> Result<Family> {
    Family::build(&cfg.family, cfg.tolerances)
}

fn bundle(command: &str, cfg: &RunConfig) -> ReportBundle {
    ReportBundle::new(command, cfg.seed, cfg.hash(), cfg.family.clone())
}

fn condition_seed(seed: u64, c: Condition) -> u64 {
    let idx = Condition::ALL.iter().position(|&a| a == c).unwrap_or(0);
    mix(seed, 1000 + idx as u64)
}

/// Structure checks, curvature scans and b-convexity for every configured
/// condition.
pub fn run_check(cfg: &RunConfig) -> Result<ReportBundle> {
    let fam = build(cfg)?;
    let pp = &fam.pair;
    let mut out = bundle("check", cfg);
    let wanted = |c: Condition| cfg.check.conditions.contains(&c);
    if [Condition::A0, Condition::A1, Condition::A2].into_iter().any(wanted) {
        out.reports.extend(check_structure(pp, &cfg.check.structure).into_iter().filter(|r| wanted(r.condition)));
    }
    for c in Condition::ALL.into_iter().filter(|c| c.is_curvature() && wanted(*c)) {
        let s = scan_condition_with(pp, fam.sum_form.as_ref(), c, &cfg.check.probes, condition_seed(cfg.seed, c))?;
        out.reports.push(s.report);
        out.probes.extend(s.probes.into_iter().map(|record| TaggedProbe { condition: c, record }));
    }
    if wanted(Condition::BConvexity) {
        out.reports.push(check_bconvexity_premises(pp, &cfg.check.bconvexity)?);
        out.reports.push(check_bconvexity(pp, &cfg.check.bconvexity)?);
    }
    Ok(out)
}

/// Curvature scan of one condition with every route per probe, plus the
/// sum-form formula when the family has that structure.
pub fn run_mtw_scan(cfg: &RunConfig) -> Result<ReportBundle> {
    let fam = build(cfg)?;
    let c = cfg.scan.condition;
    let s = scan_condition_with(&fam.pair, fam.sum_form.as_ref(), c, &cfg.scan.probes, cfg.seed)?;
    let mut out = bundle("mtw-scan", cfg);
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut max_sf: Option<f64> = None;
    for p in &s.probes {
        let Some(st) = p.structured else { continue };
        for r in [p.direct, p.crosscurv].into_iter().flatten() {
            max_abs = max_abs.max((r - st.total).abs());
            max_rel = max_rel.max((r - st.total).abs() / st.total.abs().max(1e-2));
        }
        if let Some(sf) = &p.sum_form {
            let d = (sf.total - st.total).abs();
            max_sf = Some(max_sf.map_or(d, |m| m.max(d)));
        }
    }
    out.scan_summary = Some(ScanSummary {
        condition: c,
        probes: s.probes.len(),
        rejected: s.report.probes_rejected,
        max_abs_discrepancy: max_abs,
        max_rel_discrepancy: max_rel,
        max_sum_form_discrepancy: max_sf,
    });
    out.reports.push(s.report);
    out.probes.extend(s.probes.into_iter().map(|record| TaggedProbe { condition: c, record }));
    Ok(out)
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

fn log_histogram(values: &[f64]) -> Vec<HistogramBin> {
    let mut bins: std::collections::BTreeMap<i64, usize> = Default::default();
    for &v in values.iter().filter(|v| **v > 0.0) {
        *bins.entry(v.log10().floor() as i64).or_default() += 1;
    }
    bins.into_iter()
        .map(|(k, count)| HistogramBin {
            lo: k as f64,
            hi: (k + 1) as f64,
            count,
        })
        .collect()
}

/// Discrete market with dual certificate, then the smooth-equilibrium
/// contract Jacobians and dimension estimate.
pub fn run_equilibrium_command(cfg: &RunConfig) -> Result<ReportBundle> {
    let fam = build(cfg)?;
    let n = fam.pair.dim();
    let r = run_equilibrium(&fam.pair, &cfg.equilibrium, cfg.seed)?;
    let mut out = bundle("equilibrium", cfg);

    let mut svs = r.min_singular_values.clone();
    svs.sort_by(f64::total_cmp);
    let max_rel = r.jacobians.iter().map(|j| j.relative_error).fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.max(e))));
    let min_bracket = r.jacobians.iter().map(|j| j.bracket_min_eig).fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.min(e))));

    let mut checks = Vec::new();
    if let Some(c) = &r.certificate {
        checks.push(NamedCheck {
            name: "dual_certificate".into(),
            passed: c.holds(CERTIFICATE_TOL),
            value: c.min_slack.min(-c.max_matched_gap),
            threshold: -CERTIFICATE_TOL,
        });
    }
    if let Some(&m) = svs.first() {
        checks.push(NamedCheck {
            name: "min_singular_value".into(),
            passed: m > MIN_SINGULAR_VALUE,
            value: m,
            threshold: MIN_SINGULAR_VALUE,
        });
    }
    if let Some(e) = max_rel {
        checks.push(NamedCheck {
            name: "jacobian_relative_error".into(),
            passed: e <= JACOBIAN_REL_TOL,
            value: e,
            threshold: JACOBIAN_REL_TOL,
        });
    }
    if let Some(d) = r.dim_estimate {
        checks.push(NamedCheck {
            name: "contract_dimension".into(),
            passed: d == n as f64,
            value: d,
            threshold: n as f64,
        });
    }
    if r.synthetic.is_empty() {
        checks.push(NamedCheck {
            name: "accepted_buyers".into(),
            passed: false,
            value: 0.0,
            threshold: 1.0,
        });
    }

    out.equilibrium = Some(EquilibriumSummary {
        dim: n,
        market_size: r.market.as_ref().map_or(0, |m| m.size()),
        total_surplus: r.assignment.as_ref().map(|a| a.total),
        min_slack: r.certificate.as_ref().map(|c| c.min_slack),
        max_matched_gap: r.certificate.as_ref().map(|c| c.max_matched_gap),
        matching: r.assignment.as_ref().map(|a| a.matching.clone()),
        validation_pass_fraction: r.validation.as_ref().map(|v| v.pass_fraction),
        synthetic_buyers: cfg.equilibrium.synthetic_buyers,
        accepted: r.synthetic.len(),
        rejected: r.rejected.len(),
        min_sv_min: svs.first().copied(),
        min_sv_median: median(&svs),
        min_sv_max: svs.last().copied(),
        max_relative_error: max_rel,
        min_bracket_eig: min_bracket,
        sv_histogram: log_histogram(&svs),
        dim_estimate: r.dim_estimate,
        checks,
    });

    let rejected: std::collections::BTreeSet<usize> = r.rejected.iter().map(|b| b.index).collect();
    let indices = (0..cfg.equilibrium.synthetic_buyers).filter(|i| !rejected.contains(i));
    for (index, (sp, j)) in indices.zip(r.synthetic.iter().zip(&r.jacobians)) {
        out.buyers.push(BuyerRow {
            index,
            x: sp.x.as_slice().to_vec(),
            y: sp.y.as_slice().to_vec(),
            z: sp.z.as_slice().to_vec(),
            min_sv: j.min_sv,
            relative_error: j.relative_error,
            bracket_min_eig: j.bracket_min_eig,
            p0_min_eig: linalg::min_eigenvalue(&sp.p0),
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WitnessInput {
    Report(ConditionReport),
    Tagged { condition: Option<Condition>, witness: Witness },
    Bare(Witness),
}

/// Parses a witness from JSON. Accepts a bare witness, an object
/// `{"condition": ..., "witness": {...}}`, or a whole condition record, in
/// which case its first witness is used.
pub fn parse_witness(json: &str) -> Result<(Option<Condition>, Witness)> {
    let input: WitnessInput = serde_json::from_str(json).map_err(|e| Error::Invalid(format!("witness JSON: {e}")))?;
    match input {
        WitnessInput::Report(r) => {
            let w = r.witnesses.into_iter().next().ok_or_else(|| Error::Invalid("condition record has no witnesses".into()))?;
            Ok((Some(r.condition), w))
        }
        WitnessInput::Tagged { condition, witness } => Ok((condition, witness)),
        WitnessInput::Bare(w) => Ok((None, w)),
    }
}

/// Recomputes the normalized structured curvature at a curvature witness.
pub fn replay_value(family: &FamilySpec, cfg: &RunConfig, witness: &Witness, stencil: &Stencil) -> Result<f64> {
    let fam = Family::build(family, cfg.tolerances)?;
    let need = |v: &Option<Vec<f64>>, name: &str| {
        v.clone().ok_or_else(|| Error::Invalid(format!("witness lacks `{name}`; only curvature witnesses can be replayed")))
    };
    let (x, y, u, v) = (need(&witness.x, "x")?, need(&witness.y, "y")?, need(&witness.u, "u")?, need(&witness.v, "v")?);
    let (u, v) = (DVector::from_vec(u), DVector::from_vec(v));
    let probe = MtwProbe::new(&fam.pair, &Point::from_vec(x), &Point::from_vec(y), &u, &v)?;
    let s = mtw_structured(&fam.pair, &probe, stencil)?;
    Ok(s.total / (u.norm_squared() * v.norm_squared()))
}

/// Replays a witness under the configured family and stencil.
pub fn run_replay(cfg: &RunConfig, witness_json: &str) -> Result<ReportBundle> {
    let (condition, w) = parse_witness(witness_json)?;
    let replayed = replay_value(&cfg.family, cfg, &w, &cfg.check.probes.stencil)?;
    let difference = (replayed - w.value).abs();
    let mut out = bundle("replay-witness", cfg);
    out.replay = Some(ReplayRecord {
        condition,
        original: w.value,
        replayed,
        difference,
        reproduced: difference <= REPLAY_TOL * w.value.abs().max(1.0),
    });
    Ok(out)
}

/// `0` when everything passed, `1` on any failure, `2` when the worst
/// outcome is inconclusive.
pub fn exit_code(b: &ReportBundle) -> i32 {
    let mut worst = Verdict::Pass;
    for r in &b.reports {
        worst = worst.max(r.verdict);
    }
    if let Some(e) = &b.equilibrium {
        if e.checks.iter().any(|c| !c.passed) {
            worst = Verdict::Fail;
        }
    }
    if let Some(r) = &b.replay {
        if !r.reproduced {
            worst = Verdict::Fail;
        }
    }
    match worst {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Inconclusive => 2,
    }
}
