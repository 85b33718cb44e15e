use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::routes::{mtw_all, structured_and_direct, StructuredMtw};
use super::{MtwProbe, Route, Stencil};
use crate::conditions::{keep_worst, Condition, ConditionReport, Verdict, Witness};
use crate::error::{Error, Result};
use crate::sum_form::{mtw_sum_form, SumFormProbeResult, SumFormProblem};
use crate::surplus::{evaluate_surplus, PreferencePair};
use crate::tensor_calc::{linalg, Point};

/// How probes are drawn for a curvature scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSampler {
    /// Number of `(x, y)` pairs drawn uniformly from the boxes. Ignored when
    /// `grid_per_dim` is set.
    pub pairs: usize,
    /// Use every pair of the `grid_per_dim^n` grids over X and Y instead.
    pub grid_per_dim: Option<usize>,
    /// Tangent pairs `(u, v)` per point pair.
    pub tangents: usize,
    /// Fraction of probes on which the direct route is also evaluated.
    pub spot_check_fraction: f64,
    /// Evaluate every route on every probe.
    pub all_routes: bool,
    pub stencil: Stencil,
}

impl Default for ProbeSampler {
    fn default() -> Self {
        Self {
            pairs: 50,
            grid_per_dim: None,
            tangents: 2,
            spot_check_fraction: 0.05,
            all_routes: false,
            stencil: Stencil::default(),
        }
    }
}

impl ProbeSampler {
    pub fn probe_count(&self, n: usize) -> usize {
        let pairs = match self.grid_per_dim {
            Some(k) => k.pow(n as u32).pow(2),
            None => self.pairs,
        };
        pairs * self.tangents
    }
}

/// One evaluated probe, in scan order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub index: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Maximizer at `(x, y)`.
    pub z: Vec<f64>,
    /// Structured route; `None` if the probe was rejected.
    pub structured: Option<StructuredMtw>,
    pub direct: Option<f64>,
    pub crosscurv: Option<f64>,
    pub sum_form: Option<SumFormProbeResult>,
    /// Structured value divided by `|u|² |v|²`.
    pub normalized: Option<f64>,
    /// `|vᵀ D²_xy b u|` relative to `|v| |D²_xy b u|`.
    pub orthogonality: f64,
    /// Largest deviation of the other computed routes from the structured one.
    pub discrepancy: Option<f64>,
    pub rejected: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub report: ConditionReport,
    pub probes: Vec<ProbeRecord>,
    /// Largest `|direct − structured|` over spot-checked probes, relative to
    /// `max(|structured|, 1e-2)`.
    pub max_spot_discrepancy: f64,
}

/// Verdict for a single normalized curvature value.
pub fn point_verdict(condition: Condition, value: f64, slack: f64) -> Verdict {
    if condition.is_strict() {
        if value >= slack {
            Verdict::Pass
        } else if value < -slack {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    } else if value >= -slack {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// SplitMix64 finalizer over `seed` and `index`.
pub(crate) fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

fn pair_for(pp: &PreferencePair, sampler: &ProbeSampler, seed: u64, pair: usize) -> (Point, Point) {
    match sampler.grid_per_dim {
        Some(k) => {
            let xs = pp.x_box.grid(k);
            let ys = pp.y_box.grid(k);
            (xs[pair / ys.len()].clone(), ys[pair % ys.len()].clone())
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 2 * pair as u64));
            (pp.x_box.sample(&mut rng), pp.y_box.sample(&mut rng))
        }
    }
}

fn evaluate_probe(
    pp: &PreferencePair,
    sum_form: Option<&SumFormProblem>,
    condition: Condition,
    sampler: &ProbeSampler,
    seed: u64,
    index: usize,
) -> ProbeRecord {
    let n = pp.dim();
    let (x, y) = pair_for(pp, sampler, seed, index / sampler.tangents.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 2 * index as u64 + 1));
    let u = unit(&mut rng, n);
    let mut record = ProbeRecord {
        index,
        x: x.as_slice().to_vec(),
        y: y.as_slice().to_vec(),
        u: u.as_slice().to_vec(),
        v: Vec::new(),
        z: Vec::new(),
        structured: None,
        direct: None,
        crosscurv: None,
        sum_form: None,
        normalized: None,
        orthogonality: 0.0,
        discrepancy: None,
        rejected: None,
    };
    let spot = rng.random::<f64>() < sampler.spot_check_fraction;
    let e = match evaluate_surplus(pp, &x, &y) {
        Ok(e) => e,
        Err(err) => {
            record.rejected = Some(err.to_string());
            return record;
        }
    };
    let v = if condition.is_orthogonal() {
        let basis = linalg::orthogonal_complement(&(&e.b_xy * &u));
        &basis * unit(&mut rng, basis.ncols())
    } else {
        unit(&mut rng, n)
    };
    record.v = v.as_slice().to_vec();
    record.z = e.z_star.as_slice().to_vec();
    let result = MtwProbe::from_evaluation(pp, &e, &u, &v).and_then(|probe| {
        record.orthogonality = probe.relative_orthogonality();
        if sampler.all_routes {
            let r = mtw_all(pp, &probe, &sampler.stencil)?;
            Ok((r.structured, Some(r.direct), Some(r.crosscurv)))
        } else {
            let (s, d) = structured_and_direct(pp, &probe, &sampler.stencil, spot)?;
            Ok((s, d, None))
        }
    });
    match result {
        Ok((s, d, c)) => {
            let scale = u.norm_squared() * v.norm_squared();
            record.normalized = Some(s.total / scale);
            record.structured = Some(s);
            record.direct = d;
            record.crosscurv = c;
            if let Some(sf) = sum_form {
                record.sum_form = mtw_sum_form(sf, &x, &y, &u, &v).ok();
            }
            let others = [d, c, record.sum_form.as_ref().map(|r| r.total)];
            let dev = others.iter().flatten().map(|o| (o - s.total).abs()).fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
            record.discrepancy = dev;
        }
        Err(err) => record.rejected = Some(err.to_string()),
    }
    record
}

/// Scans a curvature condition over seeded random probes.
pub fn scan_condition(pp: &PreferencePair, condition: Condition, sampler: &ProbeSampler, seed: u64) -> Result<ScanOutcome> {
    scan_condition_with(pp, None, condition, sampler, seed)
}

/// As [`scan_condition`], also evaluating the sum-form formula per probe.
pub fn scan_condition_with(
    pp: &PreferencePair,
    sum_form: Option<&SumFormProblem>,
    condition: Condition,
    sampler: &ProbeSampler,
    seed: u64,
) -> Result<ScanOutcome> {
    if !condition.is_curvature() {
        return Err(Error::Invalid(format!("{condition} is not a curvature condition")));
    }
    let n = pp.dim();
    let mut report = ConditionReport::new(condition, "MTW curvature of b");
    if condition.is_orthogonal() && n == 1 {
        // no non-zero v is orthogonal to b_xy u when n = 1
        report.worst_value = 0.0;
        return Ok(ScanOutcome {
            report,
            probes: Vec::new(),
            max_spot_discrepancy: 0.0,
        });
    }
    let total = sampler.probe_count(n);
    let probes: Vec<ProbeRecord> = (0..total)
        .into_par_iter()
        .map(|i| evaluate_probe(pp, sum_form, condition, sampler, seed, i))
        .collect();

    let slack = pp.tol.curvature_slack;
    report.probes_total = total;
    let mut max_spot: f64 = 0.0;
    let mut witnesses = Vec::new();
    for r in &probes {
        let Some(value) = r.normalized else {
            report.probes_rejected += 1;
            continue;
        };
        if let (Some(d), Some(s)) = (r.direct, r.structured) {
            max_spot = max_spot.max((d - s.total).abs() / s.total.abs().max(1e-2));
        }
        report.worst_value = report.worst_value.min(value);
        witnesses.push(Witness {
            x: Some(r.x.clone()),
            y: Some(r.y.clone()),
            z: Some(r.z.clone()),
            u: Some(r.u.clone()),
            v: Some(r.v.clone()),
            t: None,
            route: Some(Route::Structured),
            value,
            note: format!("probe {}", r.index),
        });
    }
    let accepted = report.probes_total - report.probes_rejected;
    report.verdict = if accepted == 0 {
        Verdict::Inconclusive
    } else {
        point_verdict(condition, report.worst_value, slack)
    };
    if report.verdict == Verdict::Fail {
        witnesses.retain(|w| point_verdict(condition, w.value, slack) == Verdict::Fail);
    }
    keep_worst(&mut witnesses);
    if report.verdict != Verdict::Fail {
        witnesses.truncate(1);
    }
    report.witnesses = witnesses;
    if !report.worst_value.is_finite() {
        report.worst_value = 0.0;
    }
    Ok(ScanOutcome {
        report,
        probes,
        max_spot_discrepancy: max_spot,
    })
}
