//! The family `h(x, z) = x·z − H*(z)`, `g(y, z) = y·z`, whose surplus is
//! `b(x, y) = H(x + y)` with `H` the convex conjugate of `H*`.
//!
//! Every tensor is evaluated on `H*`; derivatives of `H` come from the
//! conjugate point `z̄` with `∇H*(z̄) = x + y` through
//! `∇H(s) = z̄` and `D²H(s) = [D²H*(z̄)]⁻¹`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surplus::PreferencePair;
use crate::tensor_calc::{
    hessian, legendre_conjugate, linalg, partial, DomainBox, Point, ScalarField,
};

#[derive(Debug, Clone)]
pub struct SumFormProblem {
    pub h_star: ScalarField,
    /// Closed-form conjugate, when known. Only used for cross-checks.
    pub h: Option<ScalarField>,
    pub x_box: DomainBox,
    pub y_box: DomainBox,
    pub z_box: DomainBox,
}

impl SumFormProblem {
    pub fn new(h_star: ScalarField, x_box: DomainBox, y_box: DomainBox, z_box: DomainBox) -> Result<Self> {
        let n = h_star.dim();
        if [x_box.dim(), y_box.dim(), z_box.dim()].iter().any(|&d| d != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x_box.dim(),
            });
        }
        Ok(Self {
            h_star,
            h: None,
            x_box,
            y_box,
            z_box,
        })
    }

    pub fn with_conjugate(mut self, h: ScalarField) -> Self {
        self.h = Some(h);
        self
    }

    pub fn dim(&self) -> usize {
        self.h_star.dim()
    }

    /// `z̄` with `∇H*(z̄) = s`, i.e. `∇H(s)`.
    pub fn conjugate_point(&self, s: &Point) -> Result<Point> {
        let start = self.z_box.center();
        Ok(legendre_conjugate(&self.h_star, s, &start)?.1)
    }

    /// Smallest eigenvalue of `D²H*` over a grid of the Z box.
    pub fn min_convexity(&self, per_dim: usize) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for z in self.z_box.grid(per_dim) {
            worst = worst.min(linalg::min_eigenvalue(&hessian(&self.h_star, z.as_slice())?));
        }
        Ok(worst)
    }
}

/// `H = (H*)*` as a field. Values come from a Legendre solve per call; the
/// gradient is the conjugate point and the Hessian the inverse of `D²H*`
/// there. Higher orders fall back to finite differences.
pub fn conjugate_field(h_star: &ScalarField) -> ScalarField {
    let n = h_star.dim();
    let value_star = h_star.clone();
    let partial_star = h_star.clone();
    let start = Point::zeros(n);
    let start2 = start.clone();
    ScalarField::new(n, DomainBox::unbounded(n), move |p| {
        legendre_conjugate(&value_star, &Point::from_column_slice(p), &start)
            .map(|(v, _)| v)
            .unwrap_or(f64::NAN)
    })
    .with_partials(2, move |p, idx| {
        let Ok((_, z)) = legendre_conjugate(&partial_star, &Point::from_column_slice(p), &start2) else {
            return f64::NAN;
        };
        match idx {
            [i] => z[*i],
            [i, j] => hessian(&partial_star, z.as_slice())
                .ok()
                .and_then(|h| linalg::inverse(&h, "D²H*").ok())
                .map_or(f64::NAN, |inv| inv[(*i, *j)]),
            _ => f64::NAN,
        }
    })
}

/// The two sums of the curvature formula for `b = H(x + y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumFormProbeResult {
    /// `−Σ H*_{ijkl} p_k p_l w_i w_j`.
    pub term1: f64,
    /// `2 Σ H*_{ilk} H*_{rja} H_{lr} w_i w_j p_a p_k`, never negative.
    pub term2: f64,
    pub total: f64,
    pub p: Vec<f64>,
    pub w: Vec<f64>,
    pub z_bar: Vec<f64>,
}

/// Third- and fourth-order tensors of `H*` at `z`, flattened row-major.
fn tensors(h_star: &ScalarField, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = h_star.dim();
    let mut t3 = vec![0.0; n * n * n];
    let mut t4 = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let v = partial(h_star, z, &[i, j, k])?;
                for (a, b, c) in permutations3(i, j, k) {
                    t3[(a * n + b) * n + c] = v;
                }
                for l in k..n {
                    let v = partial(h_star, z, &[i, j, k, l])?;
                    for (a, b, c, d) in permutations4(i, j, k, l) {
                        t4[((a * n + b) * n + c) * n + d] = v;
                    }
                }
            }
        }
    }
    Ok((t3, t4))
}

fn permutations3(i: usize, j: usize, k: usize) -> [(usize, usize, usize); 6] {
    [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)]
}

fn permutations4(i: usize, j: usize, k: usize, l: usize) -> Vec<(usize, usize, usize, usize)> {
    let v = [i, j, k, l];
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    if a != b && a != c && a != d && b != c && b != d && c != d {
                        out.push((v[a], v[b], v[c], v[d]));
                    }
                }
            }
        }
    }
    out
}

/// Curvature of `b = H(x + y)` in the directions `(v, u)` computed from the
/// derivatives of `H*` at the conjugate point of `x + y`.
pub fn mtw_sum_form(prob: &SumFormProblem, x: &Point, y: &Point, u: &DVector<f64>, v: &DVector<f64>) -> Result<SumFormProbeResult> {
    let n = prob.dim();
    let s = x + y;
    let z_bar = prob.conjugate_point(&s)?;
    let d2 = hessian(&prob.h_star, z_bar.as_slice())?;
    if linalg::min_eigenvalue(&d2) <= 0.0 {
        return Err(Error::Invalid("H* is not strictly convex at the conjugate point".into()));
    }
    let d2h = linalg::symmetrize(&linalg::inverse(&d2, "D²H*")?);
    let p = &d2h * u;
    let w = &d2h * v;
    let (t3, t4) = tensors(&prob.h_star, z_bar.as_slice())?;

    let mut term1 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    term1 -= t4[((i * n + j) * n + k) * n + l] * p[k] * p[l] * w[i] * w[j];
                }
            }
        }
    }
    // a_l = Σ_{i,k} H*_{ilk} w_i p_k, so term2 = 2 aᵀ D²H a
    let mut a = DVector::zeros(n);
    for l in 0..n {
        for i in 0..n {
            for k in 0..n {
                a[l] += t3[(i * n + l) * n + k] * w[i] * p[k];
            }
        }
    }
    let term2 = 2.0 * a.dot(&(&d2h * &a));
    Ok(SumFormProbeResult {
        term1,
        term2,
        total: term1 + term2,
        p: p.as_slice().to_vec(),
        w: w.as_slice().to_vec(),
        z_bar: z_bar.as_slice().to_vec(),
    })
}

/// Realizes the problem as a generic preference pair: `h = x·z − H*(z)`,
/// `g = y·z`.
pub fn as_preference_pair(prob: &SumFormProblem) -> PreferencePair {
    let n = prob.dim();
    let hs_value = prob.h_star.clone();
    let hs_partial = prob.h_star.clone();
    let max_order = 4;
    let h = ScalarField::new(2 * n, DomainBox::unbounded(2 * n), move |a| {
        let (x, z) = a.split_at(n);
        x.iter().zip(z).map(|(p, q)| p * q).sum::<f64>() - hs_value.value(z)
    })
    .with_partials(max_order, move |a, idx| {
        let (x, z) = a.split_at(n);
        let xs: Vec<usize> = idx.iter().copied().filter(|&i| i < n).collect();
        let zs: Vec<usize> = idx.iter().copied().filter(|&i| i >= n).map(|i| i - n).collect();
        let coupling = match (xs.as_slice(), zs.as_slice()) {
            ([i], []) => z[*i],
            ([], [j]) => x[*j],
            ([i], [j]) if i == j => 1.0,
            _ => 0.0,
        };
        let conjugate = if xs.is_empty() {
            partial(&hs_partial, z, &zs).unwrap_or(f64::NAN)
        } else {
            0.0
        };
        coupling - conjugate
    });
    let g = linear_coupling(n);
    PreferencePair::new(h, g, prob.x_box.clone(), prob.y_box.clone(), prob.z_box.clone())
        .expect("sum-form boxes share one dimension")
}

/// `g(y, z) = y·z`.
pub(crate) fn linear_coupling(n: usize) -> ScalarField {
    ScalarField::new(2 * n, DomainBox::unbounded(2 * n), move |a| {
        let (y, z) = a.split_at(n);
        y.iter().zip(z).map(|(p, q)| p * q).sum()
    })
    .with_partials(4, move |a, idx| {
        let (y, z) = a.split_at(n);
        match idx {
            [i] if *i < n => z[*i],
            [j] => y[*j - n],
            [i, j] if (*i < n) != (*j < n) && i.min(j) + n == *i.max(j) => 1.0,
            _ => 0.0,
        }
    })
}

/// Sufficient condition for (B3s) in one dimension.
///
/// In 1-D the curvature is `(−H*'''' + 2 (H*''')² H'') p² w²`, so it is
/// strictly positive on a set of conjugate points whenever
/// `max H*'''' < 2 · min (H*''')² · min H''` there. Returns the ratio
/// `max H*'''' / (min (H*''')² · min H'')` over the conjugate points of the
/// sampled sums `x + y`; the criterion holds when it is below 2. `None` for
/// `n > 1`, where no scalar bound of this kind exists (for separable `H*`
/// the curvature vanishes on `w ⟂ p` and (B3s) fails regardless).
pub fn b3s_smallness_ratio(prob: &SumFormProblem, per_dim: usize) -> Result<Option<f64>> {
    if prob.dim() != 1 {
        return Ok(None);
    }
    let mut max4 = f64::NEG_INFINITY;
    let mut min3sq = f64::INFINITY;
    let mut min_h2 = f64::INFINITY;
    for x in prob.x_box.grid(per_dim) {
        for y in prob.y_box.grid(per_dim) {
            let z = prob.conjugate_point(&(&x + &y))?;
            let zs = z.as_slice();
            max4 = max4.max(partial(&prob.h_star, zs, &[0, 0, 0, 0])?);
            min3sq = min3sq.min(partial(&prob.h_star, zs, &[0, 0, 0])?.powi(2));
            min_h2 = min_h2.min(1.0 / partial(&prob.h_star, zs, &[0, 0])?);
        }
    }
    if min3sq == 0.0 || min_h2 <= 0.0 {
        return Ok(Some(f64::INFINITY));
    }
    Ok(Some(max4 / (min3sq * min_h2)))
}

/// `D²H(s)` through the conjugate point.
pub fn conjugate_hessian(prob: &SumFormProblem, s: &Point) -> Result<DMatrix<f64>> {
    let z = prob.conjugate_point(s)?;
    linalg::inverse(&hessian(&prob.h_star, z.as_slice())?, "D²H*")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{quadratic_hstar, quartic_hstar};
    use crate::tensor_calc::{differentiate, DerivativeRequest, Scheme};

    fn p(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    fn problem(h_star: ScalarField) -> SumFormProblem {
        let n = h_star.dim();
        SumFormProblem::new(
            h_star,
            DomainBox::cube(n, -0.5, 0.5),
            DomainBox::cube(n, -0.5, 0.5),
            DomainBox::cube(n, -3.0, 3.0),
        )
        .unwrap()
    }

    #[test]
    fn conjugate_of_half_norm() {
        let h = conjugate_field(&quadratic_hstar(&DMatrix::identity(2, 2)));
        let q = [0.4, -1.3];
        assert!((h.value(&q) - 0.5 * (0.16 + 1.69)).abs() < 1e-12);
        let d2 = hessian(&h, &q).unwrap();
        assert!((d2 - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn conjugate_of_diagonal_quadratic() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let h = conjugate_field(&quadratic_hstar(&a));
        let d2 = hessian(&h, &[0.3, 0.1]).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25]));
        assert!((d2 - want).norm() < 1e-12);
    }

    #[test]
    fn conjugate_hessian_of_quartic_matches_fd() {
        let h = conjugate_field(&quartic_hstar(1, 1.0));
        let s = [0.8];
        let z = legendre_conjugate(&quartic_hstar(1, 1.0), &p(&s), &p(&[0.0])).unwrap().1[0];
        let analytic = hessian(&h, &s).unwrap()[(0, 0)];
        assert!((analytic - 1.0 / (1.0 + 3.0 * z * z)).abs() < 1e-12);
        let plain = ScalarField::new(1, DomainBox::unbounded(1), {
            let h = h.clone();
            move |q| h.value(q)
        });
        let fd = differentiate(&plain, &s, &DerivativeRequest::new(&[0, 0], Scheme::RichardsonFd, 1e-2)).unwrap();
        assert!((fd - analytic).abs() < 1e-7, "{fd} vs {analytic}");
    }

    #[test]
    fn quadratic_has_no_curvature() {
        let prob = problem(quadratic_hstar(&DMatrix::identity(2, 2)));
        let r = mtw_sum_form(&prob, &p(&[0.1, 0.2]), &p(&[-0.3, 0.4]), &p(&[1.0, 0.0]), &p(&[0.6, 0.8])).unwrap();
        assert_eq!((r.term1, r.term2), (0.0, 0.0));
    }

    #[test]
    fn quartic_origin_is_negative() {
        // at x + y = 0: z̄ = 0, H*''' = 0, H*'''' = 6, H'' = 1
        let prob = problem(quartic_hstar(1, 1.0));
        let r = mtw_sum_form(&prob, &p(&[0.25]), &p(&[-0.25]), &p(&[1.0]), &p(&[1.0])).unwrap();
        assert!((r.total + 6.0).abs() < 1e-12);
        assert!(r.term2.abs() < 1e-12);
    }

    #[test]
    fn quartic_sign_crossover() {
        // total = (−6 + 72 z̄² H'') p² w² changes sign at z̄ = 1/3, s = 10/27
        let prob = problem(quartic_hstar(1, 1.0));
        let cross = 10.0 / 27.0;
        for (s, positive) in [(cross - 0.01, false), (cross + 0.01, true)] {
            let r = mtw_sum_form(&prob, &p(&[s / 2.0]), &p(&[s / 2.0]), &p(&[1.0]), &p(&[1.0])).unwrap();
            assert_eq!(r.total > 0.0, positive, "s = {s}: {}", r.total);
        }
        let r = mtw_sum_form(&prob, &p(&[cross / 2.0]), &p(&[cross / 2.0]), &p(&[1.0]), &p(&[1.0])).unwrap();
        assert!(r.total.abs() < 1e-12);
    }

    #[test]
    fn pair_reproduces_surplus() {
        let prob = problem(quartic_hstar(2, 1.0));
        let pp = as_preference_pair(&prob);
        let h = conjugate_field(&prob.h_star);
        let x = p(&[0.3, -0.1]);
        let y = p(&[0.2, 0.4]);
        let e = crate::surplus::evaluate_surplus(&pp, &x, &y).unwrap();
        let s = &x + &y;
        assert!((e.b_value - h.value(s.as_slice())).abs() < 1e-12);
        let d2h = conjugate_hessian(&prob, &s).unwrap();
        assert!((&e.b_xy - &d2h).norm() < 1e-10);
        let z = prob.conjugate_point(&s).unwrap();
        let d2 = hessian(&prob.h_star, z.as_slice()).unwrap();
        assert!((&e.m + d2).norm() < 1e-9);
    }

    #[test]
    fn smallness_ratio_on_positive_box() {
        let mut prob = problem(quartic_hstar(1, 1.0));
        prob.x_box = DomainBox::cube(1, 0.35, 0.5);
        prob.y_box = DomainBox::cube(1, 0.35, 0.5);
        let ratio = b3s_smallness_ratio(&prob, 6).unwrap().unwrap();
        assert!(ratio < 2.0, "{ratio}");
        prob.x_box = DomainBox::cube(1, -0.5, 0.5);
        prob.y_box = DomainBox::cube(1, -0.5, 0.5);
        assert!(b3s_smallness_ratio(&prob, 5).unwrap().unwrap() > 2.0);
        assert_eq!(b3s_smallness_ratio(&problem(quartic_hstar(2, 1.0)), 3).unwrap(), None);
    }
}
