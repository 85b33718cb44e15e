use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_calc::{linalg, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionOptions {
    /// Neighbours per point; `0` means `4n`.
    pub k_neighbors: usize,
    /// Eigenvalues below this fraction of the largest are treated as noise.
    pub relative_cut: f64,
}

impl Default for DimensionOptions {
    fn default() -> Self {
        Self {
            k_neighbors: 0,
            relative_cut: 1e-3,
        }
    }
}

/// Indices of the `k` nearest points to `points[i]`, itself included.
pub(crate) fn nearest(points: &[Point], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(j, p)| ((p - &points[i]).norm_squared(), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

fn local_rank(points: &[Point], idx: &[usize], cut: f64) -> Result<usize> {
    let n = points[0].len();
    let m = idx.len() as f64;
    let mean = idx.iter().fold(Point::zeros(n), |acc, &j| acc + &points[j]) / m;
    let mut cov = DMatrix::zeros(n, n);
    for &j in idx {
        let d = &points[j] - &mean;
        cov += &d * d.transpose();
    }
    cov /= m;
    let eig = linalg::sym_eigenvalues(&cov);
    let largest = eig.iter().copied().fold(0.0, f64::max);
    if largest <= 0.0 {
        return Err(Error::DegenerateNeighborhood);
    }
    Ok(eig.iter().filter(|&&e| e > cut * largest).count())
}

/// Local principal-component dimension: the median over points of the
/// number of covariance eigenvalues of each k-neighbourhood above
/// `relative_cut` times the largest.
pub fn contract_dimension(contracts: &[Point], opts: &DimensionOptions) -> Result<f64> {
    let n = contracts.first().map(Point::len).ok_or(Error::DegenerateNeighborhood)?;
    let k = if opts.k_neighbors == 0 { 4 * n } else { opts.k_neighbors };
    if contracts.len() < 10 * k {
        return Err(Error::Invalid(format!(
            "dimension estimate needs at least {} points, got {}",
            10 * k,
            contracts.len()
        )));
    }
    let mut ranks: Vec<usize> = (0..contracts.len())
        .into_par_iter()
        .map(|i| local_rank(contracts, &nearest(contracts, i, k), opts.relative_cut))
        .collect::<Result<_>>()?;
    ranks.sort_unstable();
    let m = ranks.len();
    Ok(if m % 2 == 1 {
        ranks[m / 2] as f64
    } else {
        0.5 * (ranks[m / 2 - 1] + ranks[m / 2]) as f64
    })
}
