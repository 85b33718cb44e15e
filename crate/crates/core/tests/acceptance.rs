//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any criterion fails.

use std::time::Instant;

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hedonic::commands::{run_check, run_equilibrium_command, run_mtw_scan};
use hedonic::conditions::{Condition, Verdict};
use hedonic::config::RunConfig;
use hedonic::equilibrium::{
    contract_dimension, dual_certificate, run_synthetic, run_synthetic_on, solve_assignment, DimensionOptions, DiscreteMarket, EquilibriumOptions,
};
use hedonic::families::{Family, FamilyKind, FamilySpec};
use hedonic::mtw::{point_verdict, scan_condition, scan_condition_with, ProbeRecord, ProbeSampler};
use hedonic::report::{to_records, to_tables};
use hedonic::surplus::{evaluate_surplus, Tolerances};
use hedonic::tensor_calc::{linalg, Point};

const KINDS: [FamilyKind; 5] = [
    FamilyKind::Quadratic,
    FamilyKind::Bilinear,
    FamilyKind::QuarticSumForm,
    FamilyKind::LogconvexSumForm,
    FamilyKind::Coupled,
];

type Outcome = Result<(bool, String), String>;

fn family(kind: FamilyKind, n: usize) -> Family {
    Family::build(&FamilySpec::new(kind, n), Tolerances::default()).expect("shipped family builds")
}

fn sampler(pairs: usize, all_routes: bool) -> ProbeSampler {
    ProbeSampler {
        pairs,
        tangents: 1,
        all_routes,
        ..ProbeSampler::default()
    }
}

fn close(a: f64, b: f64, reference: f64) -> (bool, f64) {
    let allowed = (1e-3 * reference.abs()).max(1e-5);
    let d = (a - b).abs();
    (d <= allowed, d / allowed)
}

fn scan(fam: &Family, pairs: usize, all_routes: bool, seed: u64) -> Result<Vec<ProbeRecord>, String> {
    scan_condition_with(&fam.pair, fam.sum_form.as_ref(), Condition::B3w, &sampler(pairs, all_routes), seed)
        .map(|o| o.probes)
        .map_err(|e| e.to_string())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mut checked, mut bad, mut rejected, mut worst) = (0, 0, 0, 0.0_f64);
    for n in [1, 2] {
        let mut spec = FamilySpec::new(FamilyKind::QuarticSumForm, n);
        spec.x_box = Some(vec![[-0.5, 0.5]]);
        spec.y_box = Some(vec![[-0.5, 0.5]]);
        let fam = Family::build(&spec, Tolerances::default()).map_err(|e| e.to_string())?;
        let probes = scan_condition(&fam.pair, Condition::B3w, &sampler(100, true), 11 + n as u64).map_err(|e| e.to_string())?.probes;
        for p in probes {
            let (Some(s), Some(d), Some(c)) = (p.structured, p.direct, p.crosscurv) else {
                rejected += 1;
                continue;
            };
            checked += 1;
            let s = s.total;
            let mut ok = true;
            for (a, b) in [(d, s), (c, s), (d, c)] {
                let (pass, ratio) = close(a, b, s);
                ok &= pass;
                worst = worst.max(ratio);
            }
            bad += usize::from(!ok);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        bad == 0 && rejected == 0 && checked == 200 && secs <= 60.0,
        format!("{checked} probes, {rejected} rejected, {bad} outside tolerance, worst error/tolerance {worst:.3}, {secs:.1} s (limit 60 s)"),
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (mut checked, mut rejected, mut worst) = (0, 0, 0.0_f64);
    for (kind, seed) in [(FamilyKind::Bilinear, 21), (FamilyKind::Quadratic, 22)] {
        let fam = family(kind, 2);
        for p in scan(&fam, 200, true, seed)? {
            let (Some(s), Some(d), Some(c)) = (p.structured, p.direct, p.crosscurv) else {
                rejected += 1;
                continue;
            };
            checked += 1;
            let mut vals = vec![s.total, d, c];
            vals.extend(p.sum_form.map(|f| f.total));
            worst = vals.into_iter().fold(worst, |m, v| m.max(v.abs()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-8 && rejected == 0 && checked == 400 && secs <= 10.0,
        format!("{checked} probes, {rejected} rejected, max |MTW| {worst:.2e} (limit 1e-8), {secs:.1} s (limit 10 s)"),
    ))
}

fn criterion_3() -> Outcome {
    let (mut checked, mut bad, mut worst, mut min_term2) = (0, 0, 0.0_f64, f64::INFINITY);
    for (kind, n, seed) in [
        (FamilyKind::QuarticSumForm, 1, 31),
        (FamilyKind::QuarticSumForm, 2, 32),
        (FamilyKind::LogconvexSumForm, 2, 33),
    ] {
        for p in scan(&family(kind, n), 100, false, seed)? {
            let (Some(s), Some(sf)) = (p.structured, p.sum_form) else {
                bad += 1;
                continue;
            };
            checked += 1;
            let (ok, ratio) = close(sf.total, s.total, s.total);
            worst = worst.max(ratio);
            min_term2 = min_term2.min(sf.term2);
            bad += usize::from(!ok || sf.term2 < -1e-9);
        }
    }
    Ok((
        bad == 0 && checked == 300,
        format!("{checked} probes, {bad} bad, worst error/tolerance {worst:.2e}, min term2 {min_term2:.3e}"),
    ))
}

fn rel(a: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    (a - fd).norm() / fd.norm().max(1e-12)
}

/// Central differences of `b` and `z*` from surplus values alone.
fn fd_derivatives(fam: &Family, x: &Point, y: &Point) -> hedonic::Result<[DMatrix<f64>; 5]> {
    let n = x.len();
    let h1 = 1e-5;
    let h2 = 1e-3;
    let eval = |x: &Point, y: &Point| evaluate_surplus(&fam.pair, x, y);
    let shift = |p: &Point, i: usize, d: f64| {
        let mut q = p.clone();
        q[i] += d;
        q
    };
    let mut b_x = DMatrix::zeros(n, 1);
    let mut b_y = DMatrix::zeros(n, 1);
    let mut z_x = DMatrix::zeros(n, n);
    let mut z_y = DMatrix::zeros(n, n);
    let mut b_xy = DMatrix::zeros(n, n);
    for i in 0..n {
        let (xp, xm) = (eval(&shift(x, i, h1), y)?, eval(&shift(x, i, -h1), y)?);
        let (yp, ym) = (eval(x, &shift(y, i, h1))?, eval(x, &shift(y, i, -h1))?);
        b_x[i] = (xp.b_value - xm.b_value) / (2.0 * h1);
        b_y[i] = (yp.b_value - ym.b_value) / (2.0 * h1);
        z_x.set_column(i, &((&xp.z_star - &xm.z_star) / (2.0 * h1)));
        z_y.set_column(i, &((&yp.z_star - &ym.z_star) / (2.0 * h1)));
        for j in 0..n {
            let mut acc = 0.0;
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                acc += si * sj * eval(&shift(x, i, si * h2), &shift(y, j, sj * h2))?.b_value;
            }
            b_xy[(i, j)] = acc / (4.0 * h2 * h2);
        }
    }
    Ok([b_x, b_y, b_xy, z_x, z_y])
}

fn criterion_4() -> Outcome {
    let names = ["b_x", "b_y", "b_xy", "z_x", "z_y"];
    let mut worst = [0.0_f64; 5];
    let mut points = 0;
    for (k, kind) in KINDS.into_iter().enumerate() {
        let fam = family(kind, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(40 + k as u64);
        for _ in 0..50 {
            let x = fam.pair.x_box.sample(&mut rng);
            let y = fam.pair.y_box.sample(&mut rng);
            let e = evaluate_surplus(&fam.pair, &x, &y).map_err(|e| format!("{kind:?}: {e}"))?;
            let fd = fd_derivatives(&fam, &x, &y).map_err(|e| format!("{kind:?}: {e}"))?;
            let analytic = [
                DMatrix::from_column_slice(2, 1, e.b_x.as_slice()),
                DMatrix::from_column_slice(2, 1, e.b_y.as_slice()),
                e.b_xy.clone(),
                e.z_x.clone(),
                e.z_y.clone(),
            ];
            for q in 0..5 {
                worst[q] = worst[q].max(rel(&analytic[q], &fd[q]));
            }
            points += 1;
        }
    }
    let detail = names.iter().zip(worst).map(|(n, w)| format!("{n} {w:.1e}")).join(", ");
    Ok((
        worst.iter().all(|&w| w <= 1e-4) && points == 250,
        format!("{points} points over {} families, worst relative error: {detail}", KINDS.len()),
    ))
}

fn criterion_5() -> Outcome {
    let (mut probes, mut min_t2, mut min_t5, mut max_m) = (0, f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (k, kind) in KINDS.into_iter().enumerate() {
        for n in [1, 2] {
            let fam = family(kind, n);
            for p in scan(&fam, 60, false, 50 + 2 * k as u64 + n as u64)? {
                let Some(s) = p.structured else { continue };
                let (t2, t5) = s.signed_terms();
                min_t2 = min_t2.min(t2);
                min_t5 = min_t5.min(t5);
                let e = evaluate_surplus(&fam.pair, &Point::from_vec(p.x), &Point::from_vec(p.y)).map_err(|e| e.to_string())?;
                max_m = max_m.max(linalg::max_eigenvalue(&e.m));
                probes += 1;
            }
        }
    }
    Ok((
        min_t2 >= -1e-9 && min_t5 >= -1e-9 && max_m < 0.0 && probes > 0,
        format!("{probes} probes, min term2 {min_t2:.3e}, min term5 {min_t5:.3e}, max eig M {max_m:.3e}"),
    ))
}

/// `z̄` with `z̄ + z̄³ = s`.
fn quartic_conjugate_point(s: f64) -> f64 {
    let mut z = s / (1.0 + s * s).sqrt();
    for _ in 0..100 {
        z -= (z + z * z * z - s) / (1.0 + 3.0 * z * z);
    }
    z
}

fn criterion_6() -> Outcome {
    let fam = family(FamilyKind::QuarticSumForm, 1);
    let slack = fam.pair.tol.curvature_slack;
    let out = scan_condition(&fam.pair, Condition::B3w, &sampler(200, false), 61).map_err(|e| e.to_string())?;
    let (mut compared, mut mismatched, mut skipped, mut worst_dev) = (0, 0, 0, 0.0_f64);
    for p in &out.probes {
        let Some(value) = p.normalized else {
            mismatched += 1;
            continue;
        };
        let s = p.x[0] + p.y[0];
        let z = quartic_conjugate_point(s);
        let hpp = 1.0 / (1.0 + 3.0 * z * z);
        let (pu, wv) = (hpp * p.u[0], hpp * p.v[0]);
        let oracle = (-6.0 + 72.0 * z * z * hpp) * pu * pu * wv * wv / (p.u[0].powi(2) * p.v[0].powi(2));
        worst_dev = worst_dev.max((value - oracle).abs() / oracle.abs().max(1e-2));
        if oracle.abs() < 1e-6 {
            skipped += 1;
            continue;
        }
        compared += 1;
        let expect = if oracle > 0.0 { Verdict::Pass } else { Verdict::Fail };
        mismatched += usize::from(point_verdict(Condition::B3w, value, slack) != expect);
    }
    let r = &out.report;
    let near_origin = r.witnesses.first().and_then(|w| Some(w.x.as_ref()?[0] + w.y.as_ref()?[0]));
    let witness_ok = r.verdict == Verdict::Fail && near_origin.is_some_and(|s| s.abs() < 0.1);
    Ok((
        mismatched == 0 && witness_ok && compared > 150,
        format!(
            "{compared} verdicts compared, {mismatched} mismatched, {skipped} within 1e-6 of zero, worst deviation {worst_dev:.1e}, scan {} with worst witness at x+y = {:+.4}",
            r.verdict,
            near_origin.unwrap_or(f64::NAN)
        ),
    ))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let opts = EquilibriumOptions {
        market_size: 0,
        synthetic_buyers: 200,
        ..EquilibriumOptions::default()
    };
    let (mut runs, mut accepted, mut rejected, mut min_sv, mut worst_rel) = (0, 0, 0, f64::INFINITY, 0.0_f64);
    for (k, kind) in KINDS.into_iter().enumerate() {
        for n in 1..=3 {
            let fam = family(kind, n);
            let r = run_synthetic(&fam.pair, &opts, 70 + 3 * k as u64 + n as u64).map_err(|e| format!("{kind:?} n={n}: {e}"))?;
            runs += 1;
            accepted += r.jacobians.len();
            rejected += r.rejected.len();
            for j in &r.jacobians {
                min_sv = min_sv.min(j.min_sv);
                worst_rel = worst_rel.max(j.relative_error);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        min_sv > 1e-8 && worst_rel <= 1e-3 && rejected == 0 && accepted == runs * 200 && secs <= 120.0,
        format!("{runs} equilibria, {accepted} buyers, {rejected} rejected, min singular value {min_sv:.3e}, worst Jacobian error {worst_rel:.1e}, {secs:.1} s (limit 120 s)"),
    ))
}

fn criterion_8() -> Outcome {
    let opts = EquilibriumOptions {
        market_size: 0,
        synthetic_buyers: 500,
        ..EquilibriumOptions::default()
    };
    let mut estimates = Vec::new();
    let mut ok = true;
    for n in 1..=3 {
        let fam = family(FamilyKind::QuarticSumForm, n);
        let r = run_synthetic(&fam.pair, &opts, 80 + n as u64).map_err(|e| e.to_string())?;
        let d = contract_dimension(&r.contracts, &DimensionOptions::default()).map_err(|e| e.to_string())?;
        ok &= r.contracts.len() == 500 && d == n as f64;
        estimates.push(format!("n={n}: {d}"));
    }
    // buyers on a segment of a 2-D quadratic family; the contract map is affine there
    let fam = family(FamilyKind::Quadratic, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let buyers: Vec<Point> = (0..500)
        .map(|_| {
            let t: f64 = rng.random_range(-1.0..1.0);
            Point::from_vec(vec![0.3 * t, -0.1 + 0.4 * t])
        })
        .collect();
    let r = run_synthetic_on(&fam.pair, &opts, &buyers).map_err(|e| e.to_string())?;
    let d_line = contract_dimension(&r.contracts, &DimensionOptions::default()).map_err(|e| e.to_string())?;
    ok &= r.contracts.len() == 500;
    ok &= d_line == 1.0;
    Ok((ok, format!("{}, contracts on a line in 2-D: {d_line}", estimates.join(", "))))
}

fn brute_force_max(b: &DMatrix<f64>) -> f64 {
    let n = b.nrows();
    (0..n)
        .permutations(n)
        .map(|p| p.iter().enumerate().map(|(i, &j)| b[(i, j)]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_9() -> Outcome {
    let mut mismatches = 0;
    let mut worst = 0.0_f64;
    for seed in 0..50u64 {
        let kind = KINDS[seed as usize % KINDS.len()];
        let n_agents = 2 + (seed as usize % 7);
        let fam = family(kind, 1 + (seed as usize / 5) % 2);
        let market = DiscreteMarket::sample(&fam.pair, n_agents, seed).map_err(|e| e.to_string())?;
        let a = solve_assignment(&market);
        let best = brute_force_max(&market.surplus);
        let own: f64 = a.matching.iter().enumerate().map(|(i, &j)| market.surplus[(i, j)]).sum();
        let gap = (best - own).abs().max((best - a.total).abs()) / best.abs().max(1.0);
        worst = worst.max(gap);
        mismatches += usize::from(gap > 1e-9);
    }
    let fam = family(FamilyKind::QuarticSumForm, 2);
    let market = DiscreteMarket::sample(&fam.pair, 500, 9).map_err(|e| e.to_string())?;
    let a = solve_assignment(&market);
    let b = &market.surplus;
    let mut min_slack = f64::INFINITY;
    for i in 0..500 {
        for j in 0..500 {
            min_slack = min_slack.min(a.u[i] + a.v[j] - b[(i, j)]);
        }
    }
    let max_gap = (0..500).map(|i| (a.u[i] + a.v[a.matching[i]] - b[(i, a.matching[i])]).abs()).fold(0.0, f64::max);
    let cert = dual_certificate(&market, &a);
    let ok = mismatches == 0 && min_slack >= -1e-8 && max_gap <= 1e-8 && cert.holds(1e-8);
    Ok((
        ok,
        format!("50 small markets, {mismatches} differ from brute force (worst {worst:.1e}); N=500 min slack {min_slack:.2e}, max matched gap {max_gap:.2e}"),
    ))
}

fn bodies(cfg: &RunConfig) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for b in [run_check(cfg), run_mtw_scan(cfg), run_equilibrium_command(cfg)] {
        let b = b.map_err(|e| e.to_string())?;
        out.push(to_records(&b));
        out.extend(to_tables(&b).into_iter().map(|(name, body)| format!("{name}\n{body}")));
    }
    Ok(out)
}

fn criterion_10() -> Outcome {
    let mut cfg = RunConfig::for_family(FamilySpec::new(FamilyKind::QuarticSumForm, 2));
    cfg.seed = 1234;
    cfg.check.probes.pairs = 6;
    cfg.check.structure.per_dim = 3;
    cfg.scan.probes.pairs = 6;
    cfg.equilibrium.market_size = 40;
    cfg.equilibrium.synthetic_buyers = 100;
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?
            .install(|| bodies(&cfg))
    };
    let a = run(1)?;
    let b = run(1)?;
    let c = run(3)?;
    let bytes: usize = a.iter().map(|s| s.len()).sum();
    Ok((
        a == b && a == c,
        format!("{} report bodies, {bytes} bytes, identical across repeat runs and 1 vs 3 threads: {}", a.len(), a == b && a == c),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("three routes agree on the quartic sum form", criterion_1),
        ("bilinear and quadratic families have zero curvature", criterion_2),
        ("sum-form formula matches the structured route", criterion_3),
        ("analytic surplus derivatives match finite differences", criterion_4),
        ("signed terms are non-negative and M is negative definite", criterion_5),
        ("1-D quartic verdicts match the sign oracle", criterion_6),
        ("contract Jacobians are non-singular and match finite differences", criterion_7),
        ("contract dimension estimate", criterion_8),
        ("assignment matches brute force; dual certificate holds", criterion_9),
        ("reports are reproducible byte for byte", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!("criterion {:>2} {}: {name}; {detail}", k + 1, if ok { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
