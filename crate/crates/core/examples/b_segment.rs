//! A b-segment: the curve `y_t` with `D_x b(x, y_t) = (1 − t) D_x b(x, y0) + t D_x b(x, y1)`.

use hedonic::families::quartic_pair;
use hedonic::mtw::make_b_segment;
use hedonic::surplus::evaluate_surplus;
use hedonic::tensor_calc::Point;

fn main() -> hedonic::Result<()> {
    let pp = quartic_pair(2, 1.0);
    let x = Point::from_vec(vec![0.1, 0.2]);
    let y0 = Point::from_vec(vec![-0.3, 0.1]);
    let y1 = Point::from_vec(vec![0.3, -0.2]);
    let q0 = evaluate_surplus(&pp, &x, &y0)?.b_x;
    let q1 = evaluate_surplus(&pp, &x, &y1)?.b_x;
    let t_grid: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
    let seg = make_b_segment(&pp, &x, &y0, &(q1 - q0), &t_grid)?;
    for (t, y) in seg.t_grid.iter().zip(&seg.y_t) {
        println!("t = {t:.3}  y = {:?}", y.as_slice());
    }
    println!("max residual {:.2e}", seg.max_residual());
    Ok(())
}
