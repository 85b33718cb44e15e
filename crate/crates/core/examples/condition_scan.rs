//! Screening B3w on the quartic sum form, which fails near `x + y = 0`.

use hedonic::conditions::Condition;
use hedonic::families::quartic_pair;
use hedonic::mtw::{scan_condition, ProbeSampler};

fn main() -> hedonic::Result<()> {
    let pp = quartic_pair(1, 1.0);
    let sampler = ProbeSampler {
        pairs: 40,
        ..ProbeSampler::default()
    };
    let out = scan_condition(&pp, Condition::B3w, &sampler, 7)?;
    let r = &out.report;
    println!("{} {}: {} of {} probes, worst {:.6}", r.condition, r.verdict, r.probes_total - r.probes_rejected, r.probes_total, r.worst_value);
    for w in &r.witnesses {
        let s = w.x.as_ref().unwrap()[0] + w.y.as_ref().unwrap()[0];
        println!("  x + y = {s:+.4}  value {:+.6}", w.value);
    }
    Ok(())
}
