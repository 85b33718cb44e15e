use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::segment::b_exp_from;
use crate::conditions::{keep_worst, Condition, ConditionReport, Verdict, Witness};
use crate::error::Result;
use crate::surplus::{evaluate_surplus, evaluate_surplus_from, PreferencePair};
use crate::tensor_calc::{damped_newton, NewtonOptions, Point};

/// Where the endpoints of the tested h-segments come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointSource {
    /// Grid nodes of the Z box.
    #[default]
    ZBox,
    /// Maximizers `z(x, y)` over a grid of the Y box.
    YImages,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BConvexitySampler {
    pub x_per_dim: usize,
    pub endpoint_per_dim: usize,
    pub t_nodes: usize,
    pub endpoints: EndpointSource,
}

impl Default for BConvexitySampler {
    fn default() -> Self {
        Self {
            x_per_dim: 3,
            endpoint_per_dim: 3,
            t_nodes: 9,
            endpoints: EndpointSource::ZBox,
        }
    }
}

fn t_grid(k: usize) -> Vec<f64> {
    let k = k.max(2);
    (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
}

fn pairs(len: usize) -> Vec<(usize, usize)> {
    (0..len).flat_map(|a| (a + 1..len).map(move |b| (a, b))).collect()
}

struct NodeCheck {
    value: f64,
    witness: Witness,
}

fn finish(mut report: ConditionReport, checks: Vec<NodeCheck>, tol: f64) -> ConditionReport {
    report.probes_total = checks.len();
    let mut witnesses: Vec<Witness> = Vec::new();
    for c in checks {
        report.worst_value = report.worst_value.min(c.value);
        witnesses.push(c.witness);
    }
    if report.probes_total == 0 {
        report.verdict = Verdict::Inconclusive;
        report.worst_value = 0.0;
        return report;
    }
    report.verdict = if report.worst_value >= -tol { Verdict::Pass } else { Verdict::Fail };
    if report.verdict == Verdict::Fail {
        witnesses.retain(|w| w.value < -tol);
    }
    keep_worst(&mut witnesses);
    if report.verdict != Verdict::Fail {
        witnesses.truncate(1);
    }
    report.witnesses = witnesses;
    report
}

/// Checks the premises under which Y is b-convex: every h-segment at `x`
/// between endpoint contracts stays in Z, and at each of its nodes
/// `D_z g(y, z_t) = −D_z h(x, z_t)` has a solution `y` in the Y box.
///
/// Node values are the signed margin of `y` in the Y box (negative
/// outside); unsolvable nodes get `−|residual|`.
pub fn check_bconvexity_premises(pp: &PreferencePair, sampler: &BConvexitySampler) -> Result<ConditionReport> {
    let report = ConditionReport::new(Condition::BConvexity, "h-segments map into Y");
    let xs = pp.x_box.grid(sampler.x_per_dim);
    let ts = t_grid(sampler.t_nodes);
    let opts = NewtonOptions::default();
    let tol = pp.tol.segment;

    let checks: Vec<Vec<NodeCheck>> = xs
        .par_iter()
        .map(|x| {
            let ends: Vec<Point> = match sampler.endpoints {
                EndpointSource::ZBox => pp.z_box.grid(sampler.endpoint_per_dim),
                EndpointSource::YImages => pp
                    .y_box
                    .grid(sampler.endpoint_per_dim)
                    .iter()
                    .filter_map(|y| evaluate_surplus(pp, x, y).ok().map(|e| e.z_star))
                    .collect(),
            };
            let mut out = Vec::new();
            for (a, b) in pairs(ends.len()) {
                let (Ok(ca), Ok(cb)) = (pp.h_x(x, &ends[a]), pp.h_x(x, &ends[b])) else {
                    continue;
                };
                let mut z = ends[a].clone();
                let mut y = pp.y_box.center();
                for &t in &ts {
                    let cov = (1.0 - t) * &ca + t * &cb;
                    let witness = |value: f64, z: &Point, y: Option<&Point>, note: &str| Witness {
                        x: Some(x.as_slice().to_vec()),
                        y: y.map(|y| y.as_slice().to_vec()),
                        z: Some(z.as_slice().to_vec()),
                        t: Some(t),
                        value,
                        note: note.to_string(),
                        ..Witness::default()
                    };
                    let zt = damped_newton("h-segment", z.clone(), |z| Ok(pp.h_x(x, z)? - &cov), |z| pp.h_xz(x, z), &opts);
                    let zt = match zt {
                        Ok(zt) => zt,
                        Err(_) => {
                            let r = pp.h_x(x, &z).map(|h| (h - &cov).norm()).unwrap_or(1.0);
                            out.push(NodeCheck {
                                value: -r,
                                witness: witness(-r, &z, None, "h-segment not solvable"),
                            });
                            break;
                        }
                    };
                    z = zt;
                    let zm = pp.z_box.margin(z.as_slice());
                    if zm < -tol {
                        out.push(NodeCheck {
                            value: zm,
                            witness: witness(zm, &z, None, "h-segment leaves Z"),
                        });
                        continue;
                    }
                    let Ok(hz) = pp.h_z(x, &z) else { continue };
                    let solved = damped_newton(
                        "g-exponential",
                        y.clone(),
                        |y| Ok(pp.g_z(y, &z)? + &hz),
                        |y| pp.g_zy(y, &z),
                        &opts,
                    );
                    match solved {
                        Ok(ys) => {
                            y = ys;
                            let m = pp.y_box.margin(y.as_slice());
                            let note = if m < -tol { "y outside Y" } else { "" };
                            out.push(NodeCheck {
                                value: m,
                                witness: witness(m, &z, Some(&y), note),
                            });
                        }
                        Err(_) => {
                            let r = pp.g_z(&y, &z).map(|g| (g + &hz).norm()).unwrap_or(1.0);
                            out.push(NodeCheck {
                                value: -r,
                                witness: witness(-r, &z, Some(&y), "no y solves the first-order condition"),
                            });
                        }
                    }
                }
            }
            out
        })
        .collect();
    Ok(finish(report, checks.into_iter().flatten().collect(), tol))
}

/// Direct check that `D_x b(x, Y)` is convex: along covector segments
/// between images of grid points of Y, `b-exp` must land in the Y box.
pub fn check_bconvexity(pp: &PreferencePair, sampler: &BConvexitySampler) -> Result<ConditionReport> {
    let report = ConditionReport::new(Condition::BConvexity, "D_x b(x, Y) convex");
    let xs = pp.x_box.grid(sampler.x_per_dim);
    let ys = pp.y_box.grid(sampler.endpoint_per_dim);
    let ts = t_grid(sampler.t_nodes);
    let tol = pp.tol.segment;

    let checks: Vec<Vec<NodeCheck>> = xs
        .par_iter()
        .map(|x| {
            let evals: Vec<_> = ys.iter().map(|y| evaluate_surplus(pp, x, y)).collect();
            let mut out = Vec::new();
            for (a, b) in pairs(ys.len()) {
                let (Ok(ea), Ok(eb)) = (&evals[a], &evals[b]) else { continue };
                let mut cur = ea.clone();
                for &t in &ts {
                    let cov = (1.0 - t) * &ea.b_x + t * &eb.b_x;
                    let witness = |value: f64, y: &Point, z: &Point, note: &str| Witness {
                        x: Some(x.as_slice().to_vec()),
                        y: Some(y.as_slice().to_vec()),
                        z: Some(z.as_slice().to_vec()),
                        t: Some(t),
                        value,
                        note: note.to_string(),
                        ..Witness::default()
                    };
                    let start = evaluate_surplus_from(pp, x, &cur.y, &cur.z_star).unwrap_or_else(|_| cur.clone());
                    match b_exp_from(pp, x, &cov, start) {
                        Ok(e) => {
                            let m = pp.y_box.margin(e.y.as_slice());
                            let note = if m < -tol { "b-exp outside Y" } else { "" };
                            out.push(NodeCheck {
                                value: m,
                                witness: witness(m, &e.y, &e.z_star, note),
                            });
                            cur = e;
                        }
                        Err(_) => {
                            let r = (&cur.b_x - &cov).norm();
                            out.push(NodeCheck {
                                value: -r,
                                witness: witness(-r, &cur.y, &cur.z_star, "b-exp not solvable"),
                            });
                            break;
                        }
                    }
                }
            }
            out
        })
        .collect();
    Ok(finish(report, checks.into_iter().flatten().collect(), tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{quadratic_pair, quartic_pair};
    use crate::tensor_calc::DomainBox;

    fn roomy_quadratic() -> PreferencePair {
        let mut pp = quadratic_pair(2);
        pp.z_box = DomainBox::cube(2, -1.0, 1.0);
        pp.y_box = DomainBox::cube(2, -2.0, 2.0);
        pp
    }

    #[test]
    fn quadratic_premises_pass_on_large_boxes() {
        let r = check_bconvexity_premises(&roomy_quadratic(), &BConvexitySampler::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        assert!(r.probes_total > 0);
    }

    #[test]
    fn shrunk_y_box_fails_with_outside_witness() {
        let mut pp = roomy_quadratic();
        pp.y_box = DomainBox::cube(2, 0.0, 0.1);
        let r = check_bconvexity_premises(&pp, &BConvexitySampler::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let w = &r.witnesses[0];
        // y = z_t − x for this family
        let (x, y, z) = (w.x.as_ref().unwrap(), w.y.as_ref().unwrap(), w.z.as_ref().unwrap());
        for i in 0..2 {
            assert!((y[i] - (z[i] - x[i])).abs() < 1e-9);
        }
        assert!(!pp.y_box.contains(y));
    }

    #[test]
    fn image_endpoints_stay_inside_for_sum_form() {
        let pp = quartic_pair(2, 1.0);
        let s = BConvexitySampler {
            endpoints: EndpointSource::YImages,
            ..BConvexitySampler::default()
        };
        assert_eq!(check_bconvexity_premises(&pp, &s).unwrap().verdict, Verdict::Pass);
        assert_eq!(check_bconvexity(&pp, &BConvexitySampler::default()).unwrap().verdict, Verdict::Pass);
    }
}
