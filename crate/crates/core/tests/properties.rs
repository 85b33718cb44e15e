use nalgebra::DVector;
use proptest::prelude::*;

use hedonic::families::{coupled_pair, quadratic_pair, quartic_hstar};
use hedonic::mtw::{mtw_structured, MtwProbe, Stencil};
use hedonic::report::to_json;
use hedonic::sum_form::conjugate_field;
use hedonic::surplus::evaluate_surplus;
use hedonic::tensor_calc::{legendre_conjugate, Point};

fn pt(v: [f64; 2]) -> Point {
    Point::from_vec(v.to_vec())
}

fn coord() -> impl Strategy<Value = f64> {
    -0.45..0.45f64
}

fn unit() -> impl Strategy<Value = DVector<f64>> {
    (0.0..std::f64::consts::TAU).prop_map(|a| DVector::from_vec(vec![a.cos(), a.sin()]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn legendre_is_an_involution(s0 in -2.0..2.0f64, s1 in -2.0..2.0f64) {
        let h_star = quartic_hstar(2, 1.0);
        let (_, z_bar) = legendre_conjugate(&h_star, &pt([s0, s1]), &Point::zeros(2)).unwrap();
        let (back, s_back) = legendre_conjugate(&conjugate_field(&h_star), &z_bar, &Point::zeros(2)).unwrap();
        prop_assert!((back - h_star.value(z_bar.as_slice())).abs() < 1e-10);
        prop_assert!((s_back - pt([s0, s1])).norm() < 1e-8);
    }

    #[test]
    fn fenchel_young_inequality(s0 in -2.0..2.0f64, s1 in -2.0..2.0f64, z0 in -2.0..2.0f64, z1 in -2.0..2.0f64) {
        let h_star = quartic_hstar(2, 0.5);
        let s = pt([s0, s1]);
        let (h, _) = legendre_conjugate(&h_star, &s, &Point::zeros(2)).unwrap();
        prop_assert!(h + h_star.value(&[z0, z1]) >= s.dot(&pt([z0, z1])) - 1e-12);
    }

    #[test]
    fn mixed_partials_commute(x0 in coord(), x1 in coord(), y0 in coord(), y1 in coord()) {
        // D_x of the envelope b_y equals the closed-form D_y of b_x
        let pp = coupled_pair(2, 0.4, 0.3);
        let (x, y) = (pt([x0, x1]), pt([y0, y1]));
        let e = evaluate_surplus(&pp, &x, &y).unwrap();
        let h = 1e-5;
        for i in 0..2 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let col = (evaluate_surplus(&pp, &xp, &y).unwrap().b_y - evaluate_surplus(&pp, &xm, &y).unwrap().b_y) / (2.0 * h);
            for j in 0..2 {
                prop_assert!((col[j] - e.b_xy[(i, j)]).abs() < 1e-6, "{} vs {}", col[j], e.b_xy[(i, j)]);
            }
        }
    }

    #[test]
    fn curvature_scales_quadratically_in_each_tangent(
        x0 in coord(), x1 in coord(), y0 in coord(), y1 in coord(),
        u in unit(), v in unit(), lu in 0.3..3.0f64, lv in 0.3..3.0f64,
    ) {
        let pp = coupled_pair(2, 0.4, 0.3);
        let (x, y) = (pt([x0, x1]), pt([y0, y1]));
        let st = Stencil::default();
        let base = mtw_structured(&pp, &MtwProbe::new(&pp, &x, &y, &u, &v).unwrap(), &st).unwrap().total;
        let scaled = mtw_structured(&pp, &MtwProbe::new(&pp, &x, &y, &(lu * &u), &(lv * &v)).unwrap(), &st).unwrap().total;
        let expect = lu * lu * lv * lv * base;
        prop_assert!((scaled - expect).abs() <= 1e-6 * expect.abs().max(1e-3), "{scaled} vs {expect}");
    }

    #[test]
    fn quadratic_family_is_flat(x0 in coord(), x1 in coord(), y0 in coord(), y1 in coord(), u in unit(), v in unit()) {
        let pp = quadratic_pair(2);
        let probe = MtwProbe::new(&pp, &pt([x0, x1]), &pt([y0, y1]), &u, &v).unwrap();
        prop_assert!(mtw_structured(&pp, &probe, &Stencil::default()).unwrap().total.abs() < 1e-8);
    }

    #[test]
    fn report_floats_round_trip(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let back: f64 = serde_json::from_str(&to_json(&v)).unwrap();
        prop_assert_eq!(back.to_bits(), v.to_bits());
    }
}
