//! b-convexity of the target set for the quadratic family, with a roomy and
//! a cramped Y box, under both choices of segment endpoints.

use hedonic::families::{Family, FamilyKind, FamilySpec};
use hedonic::mtw::{check_bconvexity, check_bconvexity_premises, BConvexitySampler, EndpointSource};
use hedonic::surplus::Tolerances;

fn main() -> hedonic::Result<()> {
    for y_box in [[-2.0, 2.0], [0.0, 0.1]] {
        let mut spec = FamilySpec::new(FamilyKind::Quadratic, 2);
        spec.z_box = Some(vec![[-3.0, 3.0]]);
        spec.y_box = Some(vec![y_box]);
        let fam = Family::build(&spec, Tolerances::default())?;
        for endpoints in [EndpointSource::ZBox, EndpointSource::YImages] {
            let s = BConvexitySampler {
                endpoints,
                ..BConvexitySampler::default()
            };
            let r = check_bconvexity_premises(&fam.pair, &s)?;
            println!("Y = {y_box:?}²  {endpoints:?}: {} {}  worst {:+.4}", r.subject, r.verdict, r.worst_value);
        }
        let r = check_bconvexity(&fam.pair, &BConvexitySampler::default())?;
        println!("Y = {y_box:?}²  {} {}  worst {:+.4}", r.subject, r.verdict, r.worst_value);
    }
    Ok(())
}
