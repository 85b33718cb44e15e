use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_surplus, join, PreferencePair};
use crate::conditions::{keep_worst, Condition, ConditionReport, Verdict, Witness};
use crate::error::Result;
use crate::tensor_calc::{partial, Point, ScalarField};

/// Grid densities for the structural checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureSampler {
    /// Nodes per coordinate for the twist and non-degeneracy grids.
    pub per_dim: usize,
    /// Nodes per coordinate for the fourth-order smoothness scan.
    pub smoothness_per_dim: usize,
}

impl Default for StructureSampler {
    fn default() -> Self {
        Self {
            per_dim: 5,
            smoothness_per_dim: 3,
        }
    }
}

/// Screens (A0), (A1) and (A2) for `h`, `g` and the induced surplus `b`.
///
/// Twist is judged by pairwise-distinct images on the grid and
/// non-degeneracy by the smallest `|det|` of the mixed Hessian block.
pub fn check_structure(pp: &PreferencePair, sampler: &StructureSampler) -> Vec<ConditionReport> {
    let xs = pp.x_box.grid(sampler.per_dim);
    let ys = pp.y_box.grid(sampler.per_dim);
    let zs = pp.z_box.grid(sampler.per_dim);
    let n = pp.dim();

    let mut reports = vec![
        smoothness(&pp.h, "h", &pp.x_box.grid(sampler.smoothness_per_dim), &pp.z_box.grid(sampler.smoothness_per_dim)),
        smoothness(&pp.g, "g", &pp.y_box.grid(sampler.smoothness_per_dim), &pp.z_box.grid(sampler.smoothness_per_dim)),
    ];

    let evals: Vec<((usize, usize), Result<crate::surplus::SurplusEvaluation>)> = (0..xs.len())
        .into_par_iter()
        .flat_map_iter(|i| (0..ys.len()).map(move |j| (i, j)))
        .map(|(i, j)| ((i, j), evaluate_surplus(pp, &xs[i], &ys[j])))
        .collect();

    // A0 for b: the implicit-function argument needs an interior maximizer
    // with non-singular M at every pair.
    let mut a0b = ConditionReport::new(Condition::A0, "b (interior maximizer, M non-singular)");
    a0b.worst_value = f64::NEG_INFINITY;
    for ((i, j), e) in &evals {
        a0b.probes_total += 1;
        match e {
            Ok(e) => {
                let lam = crate::tensor_calc::linalg::max_eigenvalue(&e.m);
                a0b.worst_value = a0b.worst_value.max(lam);
            }
            Err(err) => {
                a0b.verdict = Verdict::Fail;
                a0b.witnesses.push(Witness {
                    x: Some(xs[*i].as_slice().to_vec()),
                    y: Some(ys[*j].as_slice().to_vec()),
                    value: f64::NAN,
                    note: err.to_string(),
                    ..Witness::default()
                });
            }
        }
    }
    a0b.witnesses.truncate(crate::conditions::MAX_WITNESSES);
    reports.push(a0b);

    reports.push(nondegeneracy("h", &xs, &zs, pp.tol.nondegenerate, |a, z| pp.h_xz(a, z).map(|m| m.determinant())));
    reports.push(nondegeneracy("g", &ys, &zs, pp.tol.nondegenerate, |a, z| pp.g_zy(a, z).map(|m| m.determinant())));

    let mut a2b = ConditionReport::new(Condition::A2, "b non-degeneracy");
    for ((i, j), e) in &evals {
        match e {
            Ok(e) => {
                let det = e.b_xy.determinant();
                a2b.probes_total += 1;
                a2b.worst_value = a2b.worst_value.min(det.abs());
                if det.abs() < pp.tol.nondegenerate {
                    a2b.witnesses.push(Witness {
                        x: Some(xs[*i].as_slice().to_vec()),
                        y: Some(ys[*j].as_slice().to_vec()),
                        value: det.abs(),
                        ..Witness::default()
                    });
                }
            }
            Err(_) => a2b.probes_rejected += 1,
        }
    }
    finish_threshold(&mut a2b, pp.tol.nondegenerate);
    reports.push(a2b);

    let tol = pp.tol.twist;
    reports.push(twist("h (x,z)-twist", &xs, &zs, tol, |x, z| pp.h_x(x, z)));
    reports.push(twist("h (z,x)-twist", &zs, &xs, tol, |z, x| pp.h_z(x, z)));
    reports.push(twist("g (y,z)-twist", &ys, &zs, tol, |y, z| grad(&pp.g, y, z, 0, n)));
    reports.push(twist("g (z,y)-twist", &zs, &ys, tol, |z, y| pp.g_z(y, z)));

    let ny = ys.len();
    let lookup = |i: usize, j: usize| -> &Result<crate::surplus::SurplusEvaluation> { &evals[i * ny + j].1 };
    reports.push(twist_indexed("b (x,y)-twist", &xs, &ys, tol, |i, j| {
        lookup(i, j).as_ref().map(|e| e.b_x.clone()).map_err(Clone::clone)
    }));
    reports.push(twist_indexed("b (y,x)-twist", &ys, &xs, tol, |j, i| {
        lookup(i, j).as_ref().map(|e| e.b_y.clone()).map_err(Clone::clone)
    }));
    reports
}

fn grad(f: &ScalarField, a: &Point, z: &Point, offset: usize, len: usize) -> Result<DVector<f64>> {
    let args = join(a, z);
    let mut g = DVector::zeros(len);
    for i in 0..len {
        g[i] = partial(f, &args, &[offset + i])?;
    }
    Ok(g)
}

/// Every partial of order 1..=4 must be finite on the grid.
fn smoothness(f: &ScalarField, name: &str, agents: &[Point], zs: &[Point]) -> ConditionReport {
    let dim = f.dim();
    let mut indices: Vec<Vec<usize>> = Vec::new();
    for order in 1..=4 {
        multi_indices(dim, order, 0, &mut Vec::new(), &mut indices);
    }
    let mut rep = ConditionReport::new(Condition::A0, format!("{name} is C^4"));
    rep.worst_value = 0.0;
    let results: Vec<(usize, usize, f64, Option<String>)> = (0..agents.len())
        .into_par_iter()
        .flat_map_iter(|i| (0..zs.len()).map(move |k| (i, k)))
        .map(|(i, k)| {
            let args = join(&agents[i], &zs[k]);
            let mut largest = 0.0_f64;
            for idx in &indices {
                match partial(f, &args, idx) {
                    Ok(v) => largest = largest.max(v.abs()),
                    Err(e) => return (i, k, f64::NAN, Some(format!("partial {idx:?}: {e}"))),
                }
            }
            (i, k, largest, None)
        })
        .collect();
    for (i, k, largest, err) in results {
        rep.probes_total += 1;
        match err {
            None => rep.worst_value = rep.worst_value.max(largest),
            Some(note) => {
                rep.verdict = Verdict::Fail;
                if rep.witnesses.len() < crate::conditions::MAX_WITNESSES {
                    rep.witnesses.push(Witness {
                        x: Some(agents[i].as_slice().to_vec()),
                        z: Some(zs[k].as_slice().to_vec()),
                        value: f64::NAN,
                        note,
                        ..Witness::default()
                    });
                }
            }
        }
    }
    rep
}

fn multi_indices(dim: usize, order: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == order {
        out.push(cur.clone());
        return;
    }
    for i in from..dim {
        cur.push(i);
        multi_indices(dim, order, i, cur, out);
        cur.pop();
    }
}

fn nondegeneracy<F>(name: &str, agents: &[Point], zs: &[Point], tol: f64, det: F) -> ConditionReport
where
    F: Fn(&Point, &Point) -> Result<f64> + Sync,
{
    let mut rep = ConditionReport::new(Condition::A2, format!("{name} non-degeneracy"));
    let dets: Vec<(usize, usize, Result<f64>)> = (0..agents.len())
        .into_par_iter()
        .flat_map_iter(|i| (0..zs.len()).map(move |k| (i, k)))
        .map(|(i, k)| (i, k, det(&agents[i], &zs[k])))
        .collect();
    for (i, k, d) in dets {
        match d {
            Ok(d) => {
                rep.probes_total += 1;
                rep.worst_value = rep.worst_value.min(d.abs());
                if d.abs() < tol {
                    rep.witnesses.push(Witness {
                        x: Some(agents[i].as_slice().to_vec()),
                        z: Some(zs[k].as_slice().to_vec()),
                        value: d.abs(),
                        ..Witness::default()
                    });
                }
            }
            Err(_) => rep.probes_rejected += 1,
        }
    }
    finish_threshold(&mut rep, tol);
    rep
}

fn finish_threshold(rep: &mut ConditionReport, tol: f64) {
    rep.verdict = if rep.probes_total == 0 {
        Verdict::Inconclusive
    } else if rep.worst_value < tol {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    keep_worst(&mut rep.witnesses);
}

/// For every fixed first argument, the images of the second-argument grid
/// under `map` must be pairwise separated by at least `tol`.
fn twist<F>(subject: &str, fixed: &[Point], varying: &[Point], tol: f64, map: F) -> ConditionReport
where
    F: Fn(&Point, &Point) -> Result<DVector<f64>> + Sync,
{
    twist_indexed(subject, fixed, varying, tol, |i, j| map(&fixed[i], &varying[j]))
}

fn twist_indexed<F>(subject: &str, fixed: &[Point], varying: &[Point], tol: f64, map: F) -> ConditionReport
where
    F: Fn(usize, usize) -> Result<DVector<f64>> + Sync,
{
    let mut rep = ConditionReport::new(Condition::A1, subject);
    let per_fixed: Vec<(usize, usize, f64, Option<(usize, usize)>)> = (0..fixed.len())
        .into_par_iter()
        .map(|i| {
            let images: Vec<Option<DVector<f64>>> = (0..varying.len()).map(|j| map(i, j).ok()).collect();
            let rejected = images.iter().filter(|m| m.is_none()).count();
            let mut min_d = f64::INFINITY;
            let mut pair = None;
            for a in 0..images.len() {
                let Some(ia) = &images[a] else { continue };
                for b in (a + 1)..images.len() {
                    let Some(ib) = &images[b] else { continue };
                    let d = (ia - ib).norm();
                    if d < min_d {
                        min_d = d;
                        pair = Some((a, b));
                    }
                }
            }
            (i, rejected, min_d, pair)
        })
        .collect();
    for (i, rejected, min_d, pair) in per_fixed {
        rep.probes_total += 1;
        rep.probes_rejected += rejected;
        rep.worst_value = rep.worst_value.min(min_d);
        if let (true, Some((a, b))) = (min_d < tol, pair) {
            rep.witnesses.push(Witness {
                x: Some(fixed[i].as_slice().to_vec()),
                y: Some(varying[a].as_slice().to_vec()),
                z: Some(varying[b].as_slice().to_vec()),
                value: min_d,
                note: "first argument in x, colliding pair in y and z".into(),
                ..Witness::default()
            });
        }
    }
    finish_threshold(&mut rep, tol);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{bilinear_pair, quadratic_pair};
    use crate::tensor_calc::DomainBox;

    fn verdict(reports: &[ConditionReport], subject: &str) -> Verdict {
        reports.iter().find(|r| r.subject == subject).unwrap().verdict
    }

    #[test]
    fn quadratic_family_passes_everything() {
        let pp = quadratic_pair(2);
        let reports = check_structure(&pp, &StructureSampler::default());
        assert_eq!(reports.len(), 12);
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        }
        let h = reports.iter().find(|r| r.subject == "h non-degeneracy").unwrap();
        assert!((h.worst_value - 1.0).abs() < 1e-12);
        assert_eq!(verdict(&reports, "g (y,z)-twist"), Verdict::Pass);
        assert_eq!(verdict(&reports, "g (z,y)-twist"), Verdict::Pass);
    }

    #[test]
    fn linear_h_twist_on_small_box() {
        let h = ScalarField::new(2, DomainBox::unbounded(2), |a| a[0] * a[1] - 0.5 * a[1] * a[1]);
        let g = ScalarField::new(2, DomainBox::unbounded(2), |a| a[0] * a[1]);
        let pp = PreferencePair::new(
            h,
            g,
            DomainBox::cube(1, -0.5, 0.5),
            DomainBox::cube(1, -0.5, 0.5),
            DomainBox::cube(1, -1.0, 1.0),
        )
        .unwrap();
        let reports = check_structure(&pp, &StructureSampler::default());
        assert_eq!(verdict(&reports, "h (x,z)-twist"), Verdict::Pass);
    }

    #[test]
    fn degenerate_coupling_fails_twist_and_nondegeneracy() {
        // h depends on x only through x^2 z: D_x h collapses at x = 0 and
        // x ↦ D_z h is two-to-one
        let h = ScalarField::new(2, DomainBox::unbounded(2), |a| a[0] * a[0] * a[1] - 0.5 * a[1] * a[1]);
        let g = ScalarField::new(2, DomainBox::unbounded(2), |a| a[0] * a[1]);
        let pp = PreferencePair::new(
            h,
            g,
            DomainBox::cube(1, -0.5, 0.5),
            DomainBox::cube(1, -0.5, 0.5),
            DomainBox::cube(1, -2.0, 2.0),
        )
        .unwrap();
        let reports = check_structure(&pp, &StructureSampler::default());
        assert_eq!(verdict(&reports, "h non-degeneracy"), Verdict::Fail);
        assert_eq!(verdict(&reports, "h (z,x)-twist"), Verdict::Fail);
        assert_eq!(verdict(&reports, "h (x,z)-twist"), Verdict::Fail);
        let w = &reports.iter().find(|r| r.subject == "h (z,x)-twist").unwrap().witnesses;
        assert!(!w.is_empty());
    }

    #[test]
    fn bilinear_inherits_nondegeneracy() {
        let pp = bilinear_pair(2);
        let reports = check_structure(&pp, &StructureSampler { per_dim: 3, smoothness_per_dim: 2 });
        assert_eq!(verdict(&reports, "b non-degeneracy"), Verdict::Pass);
        assert_eq!(verdict(&reports, "b (x,y)-twist"), Verdict::Pass);
    }
}
