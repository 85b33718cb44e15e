use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::segment::{segment_from, BSegmentSample};
use super::stencil::{apply, apply_mat, Stencil, CENTER};
use super::MtwProbe;
use crate::error::Result;
use crate::surplus::{evaluate_surplus_from, inner_maximize, PreferencePair};
use crate::tensor_calc::linalg;

/// The A + B split of the structured route and the five terms of B.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StructuredMtw {
    pub total: f64,
    /// Second t-derivative of `vᵀ D²_xx h(x, z_t) v`.
    pub a: f64,
    pub b: f64,
    /// `[−2 v̈ᵀM⁻¹v, −2 v̇ᵀM⁻¹v̇, 4 v̇ᵀM⁻¹ṀM⁻¹v, vᵀM⁻¹M̈M⁻¹v, −2 vᵀM⁻¹ṀM⁻¹ṀM⁻¹v]`.
    pub terms: [f64; 5],
}

impl StructuredMtw {
    /// Terms 2 and 5, both non-negative when `M ≺ 0`.
    pub fn signed_terms(&self) -> (f64, f64) {
        (self.terms[1], self.terms[4])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteValues {
    pub direct: f64,
    pub crosscurv: f64,
    pub structured: StructuredMtw,
}

impl RouteValues {
    /// Largest deviation of the direct and crosscurv routes from the
    /// structured one.
    pub fn max_discrepancy(&self) -> f64 {
        let s = self.structured.total;
        (self.direct - s).abs().max((self.crosscurv - s).abs())
    }
}

fn is_degenerate(probe: &MtwProbe) -> bool {
    probe.u.norm() == 0.0 || probe.v.norm() == 0.0
}

fn t_segment(pp: &PreferencePair, probe: &MtwProbe, stencil: &Stencil) -> Result<BSegmentSample> {
    let anchor = evaluate_surplus_from(pp, &probe.x, &probe.y0, &probe.z0)?;
    segment_from(pp, &anchor, &probe.p, &stencil.nodes(probe.u.norm()), false)
}

fn direct_on(pp: &PreferencePair, probe: &MtwProbe, seg: &BSegmentSample, stencil: &Stencil) -> Result<f64> {
    let speed = probe.v.norm();
    let s_nodes = stencil.nodes(speed);
    let ws = stencil.second_weights(speed);
    let mut d_ss = Vec::with_capacity(seg.t_grid.len());
    for (y, z) in seg.y_t.iter().zip(&seg.z_t) {
        let mut vals = [0.0; 7];
        for (k, s) in s_nodes.iter().enumerate() {
            if ws[k] == 0.0 {
                continue;
            }
            let xs = &probe.x + *s * &probe.v;
            vals[k] = inner_maximize(pp, &xs, y, std::slice::from_ref(z))?.value;
        }
        d_ss.push(apply(&ws, &vals));
    }
    Ok(apply(&stencil.second_weights(probe.u.norm()), &d_ss))
}

fn crosscurv_on(probe: &MtwProbe, seg: &BSegmentSample, stencil: &Stencil) -> f64 {
    let vals: Vec<f64> = seg.evaluations.iter().map(|e| probe.v.dot(&(&e.b_xx * &probe.v))).collect();
    apply(&stencil.second_weights(probe.u.norm()), &vals)
}

fn structured_on(probe: &MtwProbe, seg: &BSegmentSample, stencil: &Stencil) -> Result<StructuredMtw> {
    let speed = probe.u.norm();
    let w1 = stencil.first_weights(speed);
    let w2 = stencil.second_weights(speed);
    let v = &probe.v;
    let a_vals: Vec<f64> = seg.evaluations.iter().map(|e| v.dot(&(&e.h_blocks.aa * v))).collect();
    let vt: Vec<DMatrix<f64>> = seg
        .evaluations
        .iter()
        .map(|e| DMatrix::from_column_slice(v.len(), 1, (e.h_blocks.za() * v).as_slice()))
        .collect();
    let mt: Vec<DMatrix<f64>> = seg.evaluations.iter().map(|e| e.m.clone()).collect();

    let a = apply(&w2, &a_vals);
    let m = &mt[CENTER];
    let mi = linalg::symmetrize(&linalg::inverse(m, "M_t at t = 0")?);
    let col = |m: DMatrix<f64>| -> DVector<f64> { m.column(0).into_owned() };
    let v0 = col(vt[CENTER].clone());
    let v1 = col(apply_mat(&w1, &vt));
    let v2 = col(apply_mat(&w2, &vt));
    let m1 = linalg::symmetrize(&apply_mat(&w1, &mt));
    let m2 = linalg::symmetrize(&apply_mat(&w2, &mt));

    let mi_v0 = &mi * &v0;
    let mi_v1 = &mi * &v1;
    let terms = [
        -2.0 * v2.dot(&mi_v0),
        -2.0 * v1.dot(&mi_v1),
        4.0 * mi_v1.dot(&(&m1 * &mi_v0)),
        mi_v0.dot(&(&m2 * &mi_v0)),
        -2.0 * (&m1 * &mi_v0).dot(&(&mi * (&m1 * &mi_v0))),
    ];
    let b: f64 = terms.iter().sum();
    Ok(StructuredMtw { total: a + b, a, b, terms })
}

/// Fourth mixed difference of `b(x + s v, b-exp_x(t p + q))` at `s = t = 0`.
pub fn mtw_direct(pp: &PreferencePair, probe: &MtwProbe, stencil: &Stencil) -> Result<f64> {
    if is_degenerate(probe) {
        return Ok(0.0);
    }
    let seg = t_segment(pp, probe, stencil)?;
    direct_on(pp, probe, &seg, stencil)
}

/// Second t-difference of `vᵀ D²_xx b(x, y_t) v` along the b-segment.
pub fn mtw_crosscurv(pp: &PreferencePair, probe: &MtwProbe, stencil: &Stencil) -> Result<f64> {
    if is_degenerate(probe) {
        return Ok(0.0);
    }
    let seg = t_segment(pp, probe, stencil)?;
    Ok(crosscurv_on(probe, &seg, stencil))
}

/// Curvature from `h`, `g` and `M_t` along the contract curve `z_t`.
pub fn mtw_structured(pp: &PreferencePair, probe: &MtwProbe, stencil: &Stencil) -> Result<StructuredMtw> {
    if is_degenerate(probe) {
        return Ok(StructuredMtw::default());
    }
    let seg = t_segment(pp, probe, stencil)?;
    structured_on(probe, &seg, stencil)
}

/// All three routes over one shared b-segment.
pub fn mtw_all(pp: &PreferencePair, probe: &MtwProbe, stencil: &Stencil) -> Result<RouteValues> {
    if is_degenerate(probe) {
        return Ok(RouteValues {
            direct: 0.0,
            crosscurv: 0.0,
            structured: StructuredMtw::default(),
        });
    }
    let seg = t_segment(pp, probe, stencil)?;
    Ok(RouteValues {
        direct: direct_on(pp, probe, &seg, stencil)?,
        crosscurv: crosscurv_on(probe, &seg, stencil),
        structured: structured_on(probe, &seg, stencil)?,
    })
}

/// Structured route plus, when `with_direct`, the direct route on the same
/// segment.
pub(crate) fn structured_and_direct(
    pp: &PreferencePair,
    probe: &MtwProbe,
    stencil: &Stencil,
    with_direct: bool,
) -> Result<(StructuredMtw, Option<f64>)> {
    if is_degenerate(probe) {
        return Ok((StructuredMtw::default(), with_direct.then_some(0.0)));
    }
    let seg = t_segment(pp, probe, stencil)?;
    let s = structured_on(probe, &seg, stencil)?;
    let d = if with_direct { Some(direct_on(pp, probe, &seg, stencil)?) } else { None };
    Ok((s, d))
}
