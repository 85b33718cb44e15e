//! b-exponential maps, b-segments and the Ma–Trudinger–Wang curvature.
//!
//! The curvature is computed by three independent routes: the fourth
//! mixed derivative of `b` along a b-segment (`direct`), the second
//! t-derivative of `vᵀ D²_xx b(x, y_t) v` (`crosscurv`), and the expansion
//! in terms of `h`, `g` and the contract Hessian `M_t` (`structured`).

mod bconvex;
mod routes;
mod scan;
mod segment;
mod stencil;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::surplus::{evaluate_surplus, PreferencePair, SurplusEvaluation};
use crate::tensor_calc::{check_point, Point};

pub use bconvex::{check_bconvexity, check_bconvexity_premises, BConvexitySampler, EndpointSource};
pub use routes::{mtw_all, mtw_crosscurv, mtw_direct, mtw_structured, RouteValues, StructuredMtw};
pub use scan::{point_verdict, scan_condition, scan_condition_with, ProbeRecord, ProbeSampler, ScanOutcome};
pub(crate) use scan::mix;
pub use segment::{b_exp, make_b_segment, BSegmentSample};
pub use stencil::Stencil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Direct,
    Crosscurv,
    Structured,
    SumForm,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Direct => "direct",
            Route::Crosscurv => "crosscurv",
            Route::Structured => "structured",
            Route::SumForm => "sum_form",
        })
    }
}

/// A point pair with tangent data and the covectors defining the b-segment
/// `D_x b(x, y_t) = t p + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MtwProbe {
    pub x: Point,
    pub y0: Point,
    /// Tangent at `x`.
    pub v: DVector<f64>,
    /// Tangent at `y0`.
    pub u: DVector<f64>,
    /// `D_x b(x, y0)`.
    pub q: DVector<f64>,
    /// `D²_xy b(x, y0) · u`.
    pub p: DVector<f64>,
    /// `vᵀ · D²_xy b · u`.
    pub orth_residual: f64,
    pub values: BTreeMap<Route, f64>,
    /// Maximizer at `(x, y0)`, used to seed continuation.
    pub z0: Point,
}

impl MtwProbe {
    pub fn new(pp: &PreferencePair, x: &Point, y0: &Point, u: &DVector<f64>, v: &DVector<f64>) -> Result<Self> {
        let e = evaluate_surplus(pp, x, y0)?;
        Self::from_evaluation(pp, &e, u, v)
    }

    pub fn from_evaluation(pp: &PreferencePair, e: &SurplusEvaluation, u: &DVector<f64>, v: &DVector<f64>) -> Result<Self> {
        check_point(u, pp.dim())?;
        check_point(v, pp.dim())?;
        let p = &e.b_xy * u;
        Ok(Self {
            x: e.x.clone(),
            y0: e.y.clone(),
            v: v.clone(),
            u: u.clone(),
            q: e.b_x.clone(),
            orth_residual: v.dot(&p),
            p,
            values: BTreeMap::new(),
            z0: e.z_star.clone(),
        })
    }

    /// `|vᵀ b_xy u|` relative to `|v| |b_xy u|`.
    pub fn relative_orthogonality(&self) -> f64 {
        let scale = self.v.norm() * self.p.norm();
        if scale == 0.0 {
            0.0
        } else {
            self.orth_residual.abs() / scale
        }
    }
}
