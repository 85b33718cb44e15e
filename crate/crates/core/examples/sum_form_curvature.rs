//! Curvature of `b = H(x + y)` from derivatives of `H*` alone, next to the
//! structured route.

use nalgebra::DVector;

use hedonic::families::{quartic_pair, quartic_problem};
use hedonic::mtw::{mtw_structured, MtwProbe, Stencil};
use hedonic::sum_form::mtw_sum_form;
use hedonic::tensor_calc::Point;

fn main() -> hedonic::Result<()> {
    let prob = quartic_problem(1, 1.0);
    let pp = quartic_pair(1, 1.0);
    let (u, v) = (DVector::from_vec(vec![1.0]), DVector::from_vec(vec![1.0]));
    println!("{:>6} {:>14} {:>14} {:>14}", "x+y", "sum form", "term2", "structured");
    for k in -4..=4 {
        let s = 0.25 * k as f64;
        let (x, y) = (Point::from_vec(vec![s / 2.0]), Point::from_vec(vec![s / 2.0]));
        let sf = mtw_sum_form(&prob, &x, &y, &u, &v)?;
        let st = mtw_structured(&pp, &MtwProbe::new(&pp, &x, &y, &u, &v)?, &Stencil::default())?;
        println!("{s:>6.2} {:>14.8} {:>14.8} {:>14.8}", sf.total, sf.term2, st.total);
    }
    Ok(())
}
