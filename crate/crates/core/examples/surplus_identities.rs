//! Envelope identities for `b(x, y) = sup_z h(x, z) + g(y, z)`, compared
//! with central differences of `b` itself.

use hedonic::families::coupled_pair;
use hedonic::surplus::evaluate_surplus;
use hedonic::tensor_calc::Point;

fn main() -> hedonic::Result<()> {
    let pp = coupled_pair(2, 0.4, 0.3);
    let x = Point::from_vec(vec![0.2, -0.1]);
    let y = Point::from_vec(vec![-0.3, 0.25]);
    let e = evaluate_surplus(&pp, &x, &y)?;
    println!("z* = {:?}, b = {:.12}", e.z_star.as_slice(), e.b_value);

    let h = 1e-4;
    let b = |x: &Point, y: &Point| evaluate_surplus(&pp, x, y).map(|e| e.b_value);
    for i in 0..2 {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[i] += h;
        xm[i] -= h;
        let fd = (b(&xp, &y)? - b(&xm, &y)?) / (2.0 * h);
        println!("b_x[{i}]  envelope {:+.10}  fd {:+.10}", e.b_x[i], fd);
    }
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = 0.0;
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let (mut xs, mut ys) = (x.clone(), y.clone());
                xs[i] += si * h;
                ys[j] += sj * h;
                acc += si * sj * b(&xs, &ys)?;
            }
            println!("b_xy[{i},{j}] closed form {:+.8}  fd {:+.8}", e.b_xy[(i, j)], acc / (4.0 * h * h));
        }
    }
    println!("z_x =\n{}", e.z_x);
    Ok(())
}
