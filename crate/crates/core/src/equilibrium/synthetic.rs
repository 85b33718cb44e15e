use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mtw::b_exp;
use crate::surplus::{evaluate_surplus, evaluate_surplus_from, PreferencePair, SurplusEvaluation};
use crate::tensor_calc::{gradient, hessian, linalg, DomainBox, Point, ScalarField};

/// `u(x) = c |x|²`.
pub fn quadratic_potential(n: usize, c: f64) -> ScalarField {
    ScalarField::new(n, DomainBox::unbounded(n), move |x| c * x.iter().map(|a| a * a).sum::<f64>()).with_partials(
        2,
        move |x, idx| match idx {
            [i] => 2.0 * c * x[*i],
            [i, j] => {
                if i == j {
                    2.0 * c
                } else {
                    0.0
                }
            }
            _ => 0.0,
        },
    )
}

/// `u(x) = b(x, ȳ) + δ |x|²`. With `δ = 0` every buyer is sent to `ȳ`.
pub fn anchored_potential(pp: &PreferencePair, y_bar: &Point, delta: f64) -> ScalarField {
    let n = pp.dim();
    let (pv, yv) = (pp.clone(), y_bar.clone());
    let (pd, yd) = (pp.clone(), y_bar.clone());
    ScalarField::new(n, DomainBox::unbounded(n), move |x| {
        let x = Point::from_column_slice(x);
        evaluate_surplus(&pv, &x, &yv).map_or(f64::NAN, |e| e.b_value + delta * x.norm_squared())
    })
    .with_partials(2, move |x, idx| {
        let xp = Point::from_column_slice(x);
        let Ok(e) = evaluate_surplus(&pd, &xp, &yd) else {
            return f64::NAN;
        };
        match idx {
            [i] => e.b_x[*i] + 2.0 * delta * x[*i],
            [i, j] => e.b_xx[(*i, *j)] + if i == j { 2.0 * delta } else { 0.0 },
            _ => f64::NAN,
        }
    })
}

/// A buyer on a synthetic equilibrium: `F(x) = b-exp_x(Du(x))` and
/// `P₀ = D²u(x) − D²_xx b(x, F(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPoint {
    pub x: Point,
    pub y: Point,
    pub z: Point,
    pub p0: DMatrix<f64>,
    pub evaluation: SurplusEvaluation,
}

/// Outcome per buyer; rejected buyers keep the reason.
pub type SyntheticOutcome = std::result::Result<SyntheticPoint, Error>;

fn synthetic_point(pp: &PreferencePair, potential: &ScalarField, x: &Point, y_guess: &Point) -> Result<SyntheticPoint> {
    let du = gradient(potential, x.as_slice())?;
    let d2u = hessian(potential, x.as_slice())?;
    let y = b_exp(pp, x, &du, y_guess)?;
    let e = evaluate_surplus(pp, x, &y)?;
    let p0 = linalg::symmetrize(&(d2u - &e.b_xx));
    let min = linalg::min_eigenvalue(&p0);
    if min < -1e-8 {
        return Err(Error::IndefiniteP0(min));
    }
    Ok(SyntheticPoint {
        x: x.clone(),
        y,
        z: e.z_star.clone(),
        p0,
        evaluation: e,
    })
}

/// Builds `F = b-exp(Du)` at every buyer. Buyers where `b-exp` fails or
/// `P₀` is not positive semidefinite are rejected.
pub fn synthetic_equilibrium(pp: &PreferencePair, potential: &ScalarField, buyers: &[Point]) -> Vec<SyntheticOutcome> {
    let guess = pp.y_box.center();
    buyers.par_iter().map(|x| synthetic_point(pp, potential, x, &guess)).collect()
}

/// Derivative of the contract map `x ↦ z(x, F(x))` from the closed form and
/// from finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractJacobian {
    pub j_formula: DMatrix<f64>,
    pub j_fd: DMatrix<f64>,
    pub min_sv: f64,
    /// Smallest eigenvalue of `−M⁻¹ + h_xz⁻¹ P₀ h_xz⁻ᵀ`.
    pub bracket_min_eig: f64,
    /// `‖J_formula − J_fd‖ / ‖J_formula‖`.
    pub relative_error: f64,
}

/// `[−M⁻¹ + h_xz⁻¹ P₀ h_zx⁻¹] · h_zx` at `(x0, y0)` and the bracket.
pub fn jacobian_formula(pp: &PreferencePair, x0: &Point, y0: &Point, p0: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let e = evaluate_surplus(pp, x0, y0)?;
    formula_at(&e, p0)
}

fn formula_at(e: &SurplusEvaluation, p0: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let h_xz = &e.h_blocks.az;
    let h_zx = e.h_blocks.za();
    let h_xz_inv = linalg::inverse(h_xz, "D²_xz h")?;
    let h_zx_inv = linalg::inverse(&h_zx, "D²_zx h")?;
    let bracket = -&e.m_inv + &h_xz_inv * p0 * &h_zx_inv;
    Ok((&bracket * &h_zx, linalg::symmetrize(&bracket)))
}

/// Closed-form and finite-difference Jacobians of the contract map at a
/// synthetic-equilibrium buyer. `step` is the central-difference step in x.
pub fn contract_jacobian(pp: &PreferencePair, potential: &ScalarField, point: &SyntheticPoint, step: f64) -> Result<ContractJacobian> {
    let (j_formula, bracket) = formula_at(&point.evaluation, &point.p0)?;
    let n = pp.dim();
    let contract = |x: &Point| -> Result<Point> {
        let du = gradient(potential, x.as_slice())?;
        let y = b_exp(pp, x, &du, &point.y)?;
        Ok(evaluate_surplus_from(pp, x, &y, &point.z)?.z_star)
    };
    let mut j_fd = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut xp = point.x.clone();
        let mut xm = point.x.clone();
        xp[k] += step;
        xm[k] -= step;
        let col = (contract(&xp)? - contract(&xm)?) / (2.0 * step);
        j_fd.set_column(k, &col);
    }
    let norm = j_formula.norm();
    if norm == 0.0 {
        return Err(Error::Singular("contract Jacobian"));
    }
    Ok(ContractJacobian {
        min_sv: linalg::min_singular_value(&j_formula),
        bracket_min_eig: linalg::min_eigenvalue(&bracket),
        relative_error: (&j_formula - &j_fd).norm() / norm,
        j_formula,
        j_fd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{quadratic_pair, quartic_pair};

    fn p(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    #[test]
    fn quadratic_family_closed_forms() {
        // u = c|x|²: F(x) = (2c − 1) x, P₀ = (2c − 1) I, J = 2c I
        let pp = quadratic_pair(2);
        let c = 1.0;
        let u = quadratic_potential(2, c);
        let x = p(&[0.2, -0.3]);
        let sp = synthetic_equilibrium(&pp, &u, std::slice::from_ref(&x)).pop().unwrap().unwrap();
        assert!((&sp.y - (2.0 * c - 1.0) * &x).norm() < 1e-12);
        assert!((&sp.p0 - DMatrix::identity(2, 2)).norm() < 1e-12);
        let j = contract_jacobian(&pp, &u, &sp, 1e-4).unwrap();
        assert!((&j.j_formula - 2.0 * DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        assert!((j.min_sv - 2.0).abs() < 1e-12);
        assert!(j.relative_error < 1e-8);
    }

    #[test]
    fn constant_map_still_has_full_rank() {
        let pp = quadratic_pair(2);
        let y_bar = p(&[0.1, 0.2]);
        let u = anchored_potential(&pp, &y_bar, 0.0);
        let sp = synthetic_equilibrium(&pp, &u, &[p(&[0.3, 0.1])]).pop().unwrap().unwrap();
        assert!((&sp.y - &y_bar).norm() < 1e-10);
        assert!(sp.p0.norm() < 1e-10);
        let j = contract_jacobian(&pp, &u, &sp, 1e-4).unwrap();
        assert!((j.min_sv - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quartic_anchored_potential() {
        // P₀ = H''(x + ȳ) + 2δ − H''(x + F(x)), H'' = 1/(1 + 3 z̄²)
        let pp = quartic_pair(1, 1.0);
        let (y_bar, delta) = (p(&[0.0]), 0.5);
        let u = anchored_potential(&pp, &y_bar, delta);
        let x = p(&[0.3]);
        let sp = synthetic_equilibrium(&pp, &u, std::slice::from_ref(&x)).pop().unwrap().unwrap();
        let hpp = |s: f64| {
            let mut z = s;
            for _ in 0..60 {
                z -= (z + z.powi(3) - s) / (1.0 + 3.0 * z * z);
            }
            1.0 / (1.0 + 3.0 * z * z)
        };
        let expect = hpp(0.3) + 2.0 * delta - hpp(0.3 + sp.y[0]);
        assert!((sp.p0[(0, 0)] - expect).abs() < 1e-10);
        let j = contract_jacobian(&pp, &u, &sp, 1e-4).unwrap();
        assert!(j.relative_error < 1e-4, "{}", j.relative_error);
        assert!(j.min_sv > 0.0 && j.bracket_min_eig > 0.0);
    }

    #[test]
    fn indefinite_p0_is_rejected() {
        let pp = quadratic_pair(1);
        let u = quadratic_potential(1, 0.25);
        let r = synthetic_equilibrium(&pp, &u, &[p(&[0.1])]).pop().unwrap();
        assert!(matches!(r, Err(Error::IndefiniteP0(_))));
    }
}
