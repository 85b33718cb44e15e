//! Discrete hedonic markets and the contract map of smooth equilibria.
//!
//! The discrete side solves the assignment problem exactly and certifies
//! it with dual potentials. The smooth side builds an equilibrium from a
//! chosen potential `u` via `F(x) = b-exp_x(Du(x))`, then checks that the
//! contract map `x ↦ z(x, F(x))` has a full-rank derivative and that the
//! contracts fill an `n`-dimensional set.

mod assignment;
mod dimension;
mod synthetic;
mod validate;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use assignment::{dual_certificate, solve_assignment, Assignment, DiscreteMarket, DualCertificate};
pub use dimension::{contract_dimension, DimensionOptions};
pub use synthetic::{
    anchored_potential, contract_jacobian, jacobian_formula, quadratic_potential, synthetic_equilibrium, ContractJacobian,
    SyntheticOutcome, SyntheticPoint,
};
pub use validate::{cross_validate_discrete, DiscreteValidation};

use crate::error::Result;
use crate::surplus::PreferencePair;
use crate::tensor_calc::{Point, ScalarField};

/// Potential used to build a smooth equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `u = c |x|²`.
    Quadratic { c: f64 },
    /// `u = b(x, ȳ) + δ |x|²` with `ȳ` the centre of the Y box.
    Anchored { delta: f64 },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Anchored { delta: 0.5 }
    }
}

impl PotentialSpec {
    pub fn build(&self, pp: &PreferencePair) -> ScalarField {
        match *self {
            PotentialSpec::Quadratic { c } => quadratic_potential(pp.dim(), c),
            PotentialSpec::Anchored { delta } => anchored_potential(pp, &pp.y_box.center(), delta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumOptions {
    /// Buyers and sellers in the discrete market; `0` skips it.
    pub market_size: usize,
    /// Buyers on the smooth equilibrium.
    pub synthetic_buyers: usize,
    pub potential: PotentialSpec,
    pub fd_step: f64,
    pub dimension: DimensionOptions,
    /// Neighbours used to differentiate discrete potentials.
    pub validation_neighbors: usize,
    pub validation_tolerance: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            market_size: 200,
            synthetic_buyers: 500,
            potential: PotentialSpec::default(),
            fd_step: 1e-4,
            dimension: DimensionOptions::default(),
            validation_neighbors: 0,
            validation_tolerance: 0.1,
        }
    }
}

/// A buyer dropped from the smooth equilibrium, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedBuyer {
    pub index: usize,
    pub x: Vec<f64>,
    pub reason: String,
}

/// Discrete solve plus the smooth-equilibrium contract statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub market: Option<DiscreteMarket>,
    pub assignment: Option<Assignment>,
    pub certificate: Option<DualCertificate>,
    pub validation: Option<DiscreteValidation>,
    pub synthetic: Vec<SyntheticPoint>,
    pub contracts: Vec<Point>,
    pub jacobians: Vec<ContractJacobian>,
    pub min_singular_values: Vec<f64>,
    pub rejected: Vec<RejectedBuyer>,
    pub dim_estimate: Option<f64>,
}

/// Samples buyers from the X box and runs the smooth-equilibrium checks.
pub fn run_synthetic(pp: &PreferencePair, opts: &EquilibriumOptions, seed: u64) -> Result<EquilibriumResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_B0B5);
    let buyers: Vec<Point> = (0..opts.synthetic_buyers).map(|_| pp.x_box.sample(&mut rng)).collect();
    run_synthetic_on(pp, opts, &buyers)
}

/// Smooth-equilibrium checks on the given buyers.
pub fn run_synthetic_on(pp: &PreferencePair, opts: &EquilibriumOptions, buyers: &[Point]) -> Result<EquilibriumResult> {
    use rayon::prelude::*;
    let potential = opts.potential.build(pp);
    let outcomes = synthetic_equilibrium(pp, &potential, buyers);
    let mut result = EquilibriumResult {
        market: None,
        assignment: None,
        certificate: None,
        validation: None,
        synthetic: Vec::new(),
        contracts: Vec::new(),
        jacobians: Vec::new(),
        min_singular_values: Vec::new(),
        rejected: Vec::new(),
        dim_estimate: None,
    };
    let mut accepted = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(sp) => accepted.push(sp),
            Err(e) => result.rejected.push(RejectedBuyer {
                index: i,
                x: buyers[i].as_slice().to_vec(),
                reason: e.to_string(),
            }),
        }
    }
    let jac: Vec<Result<ContractJacobian>> = accepted
        .par_iter()
        .map(|sp| contract_jacobian(pp, &potential, sp, opts.fd_step))
        .collect();
    for (sp, j) in accepted.into_iter().zip(jac) {
        match j {
            Ok(j) => {
                result.contracts.push(sp.z.clone());
                result.min_singular_values.push(j.min_sv);
                result.jacobians.push(j);
                result.synthetic.push(sp);
            }
            Err(e) => result.rejected.push(RejectedBuyer {
                index: buyers.iter().position(|b| b == &sp.x).unwrap_or(usize::MAX),
                x: sp.x.as_slice().to_vec(),
                reason: e.to_string(),
            }),
        }
    }
    result.rejected.sort_by_key(|r| r.index);
    let k = if opts.dimension.k_neighbors == 0 { 4 * pp.dim() } else { opts.dimension.k_neighbors };
    if result.contracts.len() >= 10 * k {
        result.dim_estimate = Some(contract_dimension(&result.contracts, &opts.dimension)?);
    }
    Ok(result)
}

/// Full pipeline: discrete market (when `market_size > 0`) and smooth
/// equilibrium.
pub fn run_equilibrium(pp: &PreferencePair, opts: &EquilibriumOptions, seed: u64) -> Result<EquilibriumResult> {
    let mut result = run_synthetic(pp, opts, seed)?;
    if opts.market_size >= 2 {
        let market = DiscreteMarket::sample(pp, opts.market_size, seed)?;
        let a = solve_assignment(&market);
        let k = if opts.validation_neighbors == 0 { 4 * pp.dim() } else { opts.validation_neighbors };
        result.certificate = Some(dual_certificate(&market, &a));
        result.validation = Some(cross_validate_discrete(pp, &market, &a, k, opts.validation_tolerance)?);
        result.assignment = Some(a);
        result.market = Some(market);
    }
    Ok(result)
}
