use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::surplus::{evaluate_surplus, evaluate_surplus_from, PreferencePair, SurplusEvaluation};
use crate::tensor_calc::{linalg, Point};

const MAX_ITERATIONS: usize = 60;
const MAX_HALVINGS: usize = 30;

/// `b-exp_x(cov)`: the `y` with `D_x b(x, y) = cov`, by damped Newton with
/// Jacobian `D²_xy b`.
pub fn b_exp(pp: &PreferencePair, x: &Point, cov: &DVector<f64>, y_guess: &Point) -> Result<Point> {
    let start = evaluate_surplus(pp, x, y_guess)?;
    Ok(b_exp_from(pp, x, cov, start)?.y)
}

/// Newton continuation from an existing evaluation; the maximizer of each
/// iterate seeds the next inner solve.
pub(crate) fn b_exp_from(
    pp: &PreferencePair,
    x: &Point,
    cov: &DVector<f64>,
    mut e: SurplusEvaluation,
) -> Result<SurplusEvaluation> {
    let tol = pp.tol.b_exp;
    let mut r = &e.b_x - cov;
    let mut rn = r.norm();
    for _ in 0..MAX_ITERATIONS {
        if rn <= tol * 1e-4 {
            break;
        }
        let step = linalg::solve(&e.b_xy, &r, "D²_xy b in b-exp")?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..=MAX_HALVINGS {
            let y_try = &e.y - lambda * &step;
            if let Ok(et) = evaluate_surplus_from(pp, x, &y_try, &e.z_star) {
                let rt = &et.b_x - cov;
                let tn = rt.norm();
                if tn < rn {
                    e = et;
                    r = rt;
                    rn = tn;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if rn <= tol {
        Ok(e)
    } else {
        Err(Error::NoConvergence {
            what: "b-exp",
            iterations: MAX_ITERATIONS,
            residual: rn,
        })
    }
}

/// Nodes of a b-segment `D_x b(x, y_t) = t p + q` through `y0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BSegmentSample {
    pub t_grid: Vec<f64>,
    pub y_t: Vec<Point>,
    pub z_t: Vec<Point>,
    /// `|D_x b(x, y_t) − (t p + q)|` per node.
    pub residuals: Vec<f64>,
    pub(crate) evaluations: Vec<SurplusEvaluation>,
}

impl BSegmentSample {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Solves the b-segment at every node of `t_grid` (any order, any sign) by
/// continuation outward from `t = 0`. Nodes with `t ∈ [0, 1]` must stay in
/// the Y box; stencil nodes outside that range may leave it.
pub fn make_b_segment(pp: &PreferencePair, x: &Point, y0: &Point, p: &DVector<f64>, t_grid: &[f64]) -> Result<BSegmentSample> {
    let anchor = evaluate_surplus(pp, x, y0)?;
    segment_from(pp, &anchor, p, t_grid, true)
}

pub(crate) fn segment_from(
    pp: &PreferencePair,
    anchor: &SurplusEvaluation,
    p: &DVector<f64>,
    t_grid: &[f64],
    check_box: bool,
) -> Result<BSegmentSample> {
    let x = &anchor.x;
    let q = anchor.b_x.clone();
    let velocity = linalg::solve(&anchor.b_xy, p, "D²_xy b at the segment anchor")?;
    let mut solved: Vec<Option<SurplusEvaluation>> = vec![None; t_grid.len()];

    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&a, &b| t_grid[a].abs().total_cmp(&t_grid[b].abs()));
    for side in [1.0_f64, -1.0] {
        // (t, evaluation) of the last two solved nodes on this side
        let mut trail: Vec<(f64, SurplusEvaluation)> = vec![(0.0, anchor.clone())];
        for &i in &order {
            let t = t_grid[i];
            if t == 0.0 {
                solved[i] = Some(anchor.clone());
                continue;
            }
            if t.signum() != side {
                continue;
            }
            let (t_prev, prev) = trail.last().expect("anchor present");
            let guess = match trail.len() {
                1 => &prev.y + (t - t_prev) * &velocity,
                _ => {
                    let (t_pp, pprev) = &trail[trail.len() - 2];
                    let slope = (&prev.y - &pprev.y) / (t_prev - t_pp);
                    &prev.y + (t - t_prev) * slope
                }
            };
            let cov = t * p + &q;
            let start = crate::surplus::evaluate_surplus_from(pp, x, &guess, &prev.z_star)
                .or_else(|_| crate::surplus::evaluate_surplus_from(pp, x, &prev.y, &prev.z_star))?;
            let e = b_exp_from(pp, x, &cov, start)?;
            trail.push((t, e.clone()));
            solved[i] = Some(e);
        }
    }

    let mut sample = BSegmentSample {
        t_grid: t_grid.to_vec(),
        y_t: Vec::with_capacity(t_grid.len()),
        z_t: Vec::with_capacity(t_grid.len()),
        residuals: Vec::with_capacity(t_grid.len()),
        evaluations: Vec::with_capacity(t_grid.len()),
    };
    for (i, e) in solved.into_iter().enumerate() {
        let e = e.expect("every node solved");
        let t = t_grid[i];
        let residual = (&e.b_x - (t * p + &q)).norm();
        if residual > pp.tol.segment {
            return Err(Error::SegmentDefect { t, residual });
        }
        if check_box && (0.0..=1.0).contains(&t) && !pp.y_box.contains_within(e.y.as_slice(), 1e-12) {
            return Err(Error::SegmentExitsBox(t));
        }
        sample.y_t.push(e.y.clone());
        sample.z_t.push(e.z_star.clone());
        sample.residuals.push(residual);
        sample.evaluations.push(e);
    }
    Ok(sample)
}
