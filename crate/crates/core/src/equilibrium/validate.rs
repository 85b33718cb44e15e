use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::assignment::{Assignment, DiscreteMarket};
use super::dimension::nearest;
use crate::error::Result;
use crate::surplus::{evaluate_surplus, PreferencePair};
use crate::tensor_calc::linalg;

/// First-order consistency of discrete potentials with `Du(x) = D_x b(x, F(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteValidation {
    pub pairs: usize,
    pub passed: usize,
    pub pass_fraction: f64,
    pub tolerance: f64,
    /// Per buyer: `|slope − D_x b| / max(|D_x b|, 1)`.
    pub relative_errors: Vec<f64>,
}

/// For each matched buyer, fits `u_j ≈ a + c·(x_j − x_i)` over its nearest
/// buyers by least squares and compares `c` with `D_x b(x_i, y_σ(i))`.
/// A pair passes when the difference is within `tolerance · max(|D_x b|, 1)`.
pub fn cross_validate_discrete(
    pp: &PreferencePair,
    market: &DiscreteMarket,
    result: &Assignment,
    k_neighbors: usize,
    tolerance: f64,
) -> Result<DiscreteValidation> {
    let n = pp.dim();
    let k = k_neighbors.max(n + 2).min(market.buyers.len());
    let mut errors = Vec::with_capacity(market.buyers.len());
    for (i, x) in market.buyers.iter().enumerate() {
        let e = evaluate_surplus(pp, x, &market.sellers[result.matching[i]])?;
        let idx = nearest(&market.buyers, i, k);
        let mut a = DMatrix::zeros(idx.len(), n + 1);
        let mut rhs = DVector::zeros(idx.len());
        for (r, &j) in idx.iter().enumerate() {
            a[(r, 0)] = 1.0;
            for c in 0..n {
                a[(r, c + 1)] = market.buyers[j][c] - x[c];
            }
            rhs[r] = result.u[j];
        }
        let normal = a.transpose() * &a;
        let coef = linalg::solve(&normal, &(a.transpose() * rhs), "neighbour least squares")?;
        let slope = coef.rows(1, n).into_owned();
        errors.push((slope - &e.b_x).norm() / e.b_x.norm().max(1.0));
    }
    let passed = errors.iter().filter(|&&r| r <= tolerance).count();
    Ok(DiscreteValidation {
        pairs: errors.len(),
        passed,
        pass_fraction: passed as f64 / errors.len().max(1) as f64,
        tolerance,
        relative_errors: errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_assignment;
    use crate::families::quadratic_pair;

    #[test]
    fn quadratic_one_dim_potentials_are_consistent() {
        let pp = quadratic_pair(1);
        let m = DiscreteMarket::sample(&pp, 200, 17).unwrap();
        let a = solve_assignment(&m);
        let v = cross_validate_discrete(&pp, &m, &a, 4, 0.1).unwrap();
        assert!(v.pass_fraction >= 0.9, "{}", v.pass_fraction);
    }
}
