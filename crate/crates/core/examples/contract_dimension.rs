//! Smooth equilibrium built from an anchored potential: contract Jacobians
//! and the dimension of the contract set.

use hedonic::equilibrium::{run_synthetic, EquilibriumOptions};
use hedonic::families::quartic_pair;

fn main() -> hedonic::Result<()> {
    for n in 1..=3 {
        let pp = quartic_pair(n, 1.0);
        let opts = EquilibriumOptions {
            synthetic_buyers: 400,
            ..EquilibriumOptions::default()
        };
        let r = run_synthetic(&pp, &opts, 5)?;
        let min_sv = r.min_singular_values.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = r.jacobians.iter().map(|j| j.relative_error).fold(0.0, f64::max);
        println!(
            "n = {n}: {} buyers, {} rejected, min σ {:.4}, worst Jacobian error {:.1e}, dimension {:?}",
            r.synthetic.len(),
            r.rejected.len(),
            min_sv,
            worst,
            r.dim_estimate
        );
    }
    Ok(())
}
