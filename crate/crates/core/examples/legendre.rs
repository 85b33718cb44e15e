//! Numerical convex conjugate of `H*(z) = |z|²/2 + ε Σ z_i⁴/4`, checked
//! against Fenchel–Young and the involution `H** = H*`.

use hedonic::families::quartic_hstar;
use hedonic::sum_form::conjugate_field;
use hedonic::tensor_calc::{legendre_conjugate, Point};

fn main() -> hedonic::Result<()> {
    let h_star = quartic_hstar(2, 1.0);
    let h = conjugate_field(&h_star);
    for s in [[0.3, -0.2], [1.0, 0.5], [-2.0, 0.1]] {
        let s = Point::from_column_slice(&s);
        let (value, z_bar) = legendre_conjugate(&h_star, &s, &Point::zeros(2))?;
        // equality in Fenchel–Young at the maximizer
        let gap = h_star.value(z_bar.as_slice()) + value - s.dot(&z_bar);
        let (back, _) = legendre_conjugate(&h, &z_bar, &Point::zeros(2))?;
        println!(
            "s = {:?}  H(s) = {value:.12}  z̄ = {:?}  FY gap = {gap:.1e}  |H**(z̄) − H*(z̄)| = {:.1e}",
            s.as_slice(),
            z_bar.as_slice(),
            (back - h_star.value(z_bar.as_slice())).abs()
        );
    }
    Ok(())
}
