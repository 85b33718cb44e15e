use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surplus::{inner_maximize, PreferencePair};
use crate::tensor_calc::Point;

/// Equal-size samples of buyers and sellers with their surplus matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMarket {
    pub buyers: Vec<Point>,
    pub sellers: Vec<Point>,
    /// `surplus[(i, j)] = b(x_i, y_j)`.
    pub surplus: DMatrix<f64>,
    pub seed: u64,
}

impl DiscreteMarket {
    /// Draws `n_agents` buyers and sellers uniformly from the X and Y boxes.
    pub fn sample(pp: &PreferencePair, n_agents: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let buyers: Vec<Point> = (0..n_agents).map(|_| pp.x_box.sample(&mut rng)).collect();
        let sellers: Vec<Point> = (0..n_agents).map(|_| pp.y_box.sample(&mut rng)).collect();
        Self::from_agents(pp, buyers, sellers, seed)
    }

    pub fn from_agents(pp: &PreferencePair, buyers: Vec<Point>, sellers: Vec<Point>, seed: u64) -> Result<Self> {
        if buyers.len() != sellers.len() {
            return Err(Error::DimensionMismatch {
                expected: buyers.len(),
                got: sellers.len(),
            });
        }
        let starts = pp.default_starts();
        let rows: Vec<Vec<f64>> = buyers
            .par_iter()
            .map(|x| {
                sellers
                    .iter()
                    .map(|y| inner_maximize(pp, x, y, &starts).map(|r| r.value))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let n = buyers.len();
        let surplus = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let market = Self {
            buyers,
            sellers,
            surplus,
            seed,
        };
        market.validate()?;
        Ok(market)
    }

    /// A market given only by its surplus matrix.
    pub fn from_matrix(surplus: DMatrix<f64>) -> Result<Self> {
        let market = Self {
            buyers: Vec::new(),
            sellers: Vec::new(),
            surplus,
            seed: 0,
        };
        market.validate()?;
        Ok(market)
    }

    fn validate(&self) -> Result<()> {
        let (r, c) = self.surplus.shape();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, got: c });
        }
        if r < 2 {
            return Err(Error::Invalid("a market needs at least two agents per side".into()));
        }
        if self.surplus.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("surplus matrix"));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.surplus.nrows()
    }
}

/// Optimal matching with dual potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Buyer `i` is matched to seller `matching[i]`.
    pub matching: Vec<usize>,
    /// Buyer potentials `u_i`.
    pub u: Vec<f64>,
    /// Seller potentials `v_j`.
    pub v: Vec<f64>,
    pub total: f64,
}

/// Residuals of `u_i + v_j ≥ b_ij` with equality on matched pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    /// `min_{i,j} u_i + v_j − b_ij`; non-negative up to rounding.
    pub min_slack: f64,
    /// `max_i |u_i + v_σ(i) − b_iσ(i)|`.
    pub max_matched_gap: f64,
}

impl DualCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.min_slack >= -tol && self.max_matched_gap <= tol
    }
}

/// Maximum-surplus perfect matching by shortest augmenting paths with
/// potentials, `O(N³)`.
pub fn solve_assignment(market: &DiscreteMarket) -> Assignment {
    let b = &market.surplus;
    let n = b.nrows();
    // minimize cost = −b; arrays are 1-based with column 0 as the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = -b[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut matching = vec![0usize; n];
    for j in 1..=n {
        matching[row_of[j] - 1] = j - 1;
    }
    let total = matching.iter().enumerate().map(|(i, &j)| b[(i, j)]).sum();
    Assignment {
        matching,
        u: u[1..].iter().map(|a| -a).collect(),
        v: v[1..].iter().map(|a| -a).collect(),
        total,
    }
}

pub fn dual_certificate(market: &DiscreteMarket, a: &Assignment) -> DualCertificate {
    let b = &market.surplus;
    let n = b.nrows();
    let mut min_slack = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            min_slack = min_slack.min(a.u[i] + a.v[j] - b[(i, j)]);
        }
    }
    let max_matched_gap = (0..n)
        .map(|i| (a.u[i] + a.v[a.matching[i]] - b[(i, a.matching[i])]).abs())
        .fold(0.0, f64::max);
    DualCertificate {
        min_slack,
        max_matched_gap,
    }
}
