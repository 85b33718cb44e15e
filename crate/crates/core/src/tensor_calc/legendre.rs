use nalgebra::DVector;

use super::diff::{gradient, hessian};
use super::field::{Point, ScalarField};
use super::linalg;
use crate::error::{Error, Result};

/// Stopping rules for the damped Newton iterations used by the conjugation
/// and root-finding routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Residual norm required for acceptance.
    pub tolerance: f64,
    /// Maximum number of step halvings per iteration.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-10,
            max_halvings: 30,
        }
    }
}

/// `sup_z [p·z − f(z)]` with its maximizer, found by damped Newton on
/// `∇f(z) = p` starting from `z0`.
pub fn legendre_conjugate(f: &ScalarField, p: &Point, z0: &Point) -> Result<(f64, Point)> {
    legendre_conjugate_with(f, p, z0, &NewtonOptions::default())
}

pub fn legendre_conjugate_with(
    f: &ScalarField,
    p: &Point,
    z0: &Point,
    opts: &NewtonOptions,
) -> Result<(f64, Point)> {
    if p.len() != f.dim() || z0.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: p.len().min(z0.len()),
        });
    }
    let residual = |z: &DVector<f64>| -> Result<DVector<f64>> { Ok(gradient(f, z.as_slice())? - p) };
    let z = damped_newton(
        "Legendre conjugation",
        z0.clone(),
        residual,
        |z| hessian(f, z.as_slice()),
        opts,
    )?;
    let value = p.dot(&z) - f.value(z.as_slice());
    if !value.is_finite() {
        return Err(Error::NonFinite("conjugate value"));
    }
    Ok((value, z))
}

/// Damped Newton for `r(z) = 0` with Jacobian `jac`, halving the step until
/// the residual norm decreases. Iterates past `opts.tolerance` while progress
/// is possible and accepts once the residual is within it.
pub(crate) fn damped_newton<R, J>(
    what: &'static str,
    mut z: DVector<f64>,
    residual: R,
    jac: J,
    opts: &NewtonOptions,
) -> Result<DVector<f64>>
where
    R: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<nalgebra::DMatrix<f64>>,
{
    let mut r = residual(&z)?;
    let mut rn = r.norm();
    for _ in 0..opts.max_iterations {
        if rn <= opts.tolerance * 1e-3 {
            break;
        }
        let step = linalg::solve(&jac(&z)?, &r, what)?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..=opts.max_halvings {
            let trial = &z - lambda * &step;
            if let Ok(rt) = residual(&trial) {
                let tn = rt.norm();
                if tn.is_finite() && tn < rn {
                    z = trial;
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
    if rn <= opts.tolerance {
        Ok(z)
    } else {
        Err(Error::NoConvergence {
            what,
            iterations: opts.max_iterations,
            residual: rn,
        })
    }
}
