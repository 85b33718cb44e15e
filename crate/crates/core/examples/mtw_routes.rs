//! The MTW curvature of one probe by the three routes, on a family that
//! is not of sum form.

use nalgebra::DVector;

use hedonic::families::coupled_pair;
use hedonic::mtw::{mtw_all, MtwProbe, Stencil};
use hedonic::tensor_calc::Point;

fn main() -> hedonic::Result<()> {
    let pp = coupled_pair(2, 0.4, 0.3);
    let x = Point::from_vec(vec![0.1, -0.2]);
    let y = Point::from_vec(vec![0.05, 0.15]);
    let u = DVector::from_vec(vec![0.6, 0.8]);
    let v = DVector::from_vec(vec![-0.8, 0.6]);
    let probe = MtwProbe::new(&pp, &x, &y, &u, &v)?;
    let r = mtw_all(&pp, &probe, &Stencil::default())?;
    println!("direct      {:+.10}", r.direct);
    println!("crosscurv   {:+.10}", r.crosscurv);
    println!("structured  {:+.10}", r.structured.total);
    println!("  A = {:+.6}, B = {:+.6}, terms = {:?}", r.structured.a, r.structured.b, r.structured.terms);
    println!("max discrepancy {:.2e}", r.max_discrepancy());
    Ok(())
}
