//! The same scan rendered as JSON records and as tables.

use hedonic::commands::run_mtw_scan;
use hedonic::config::RunConfig;
use hedonic::families::{FamilyKind, FamilySpec};
use hedonic::report::{render, Format};

fn main() -> hedonic::Result<()> {
    let mut cfg = RunConfig::for_family(FamilySpec::new(FamilyKind::LogconvexSumForm, 1));
    cfg.scan.probes.pairs = 3;
    let b = run_mtw_scan(&cfg)?;
    for format in [Format::Records, Format::Table] {
        for (name, body) in render(&b, format) {
            println!("== {name}\n{body}");
        }
    }
    Ok(())
}
