//! Exact assignment for a sampled market, its dual certificate and the
//! consistency of the dual potentials with `D_x b`.

use hedonic::equilibrium::{cross_validate_discrete, dual_certificate, solve_assignment, DiscreteMarket};
use hedonic::families::quartic_pair;

fn main() -> hedonic::Result<()> {
    let pp = quartic_pair(1, 1.0);
    let market = DiscreteMarket::sample(&pp, 300, 11)?;
    let a = solve_assignment(&market);
    let cert = dual_certificate(&market, &a);
    println!("total surplus {:.10}", a.total);
    println!("min slack {:.2e}, max matched gap {:.2e}, holds: {}", cert.min_slack, cert.max_matched_gap, cert.holds(1e-8));
    let v = cross_validate_discrete(&pp, &market, &a, 6, 0.1)?;
    println!("slope check: {} of {} buyers within {}", v.passed, v.pairs, v.tolerance);
    Ok(())
}
