use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use hedonic::commands::{exit_code, run_check, run_equilibrium_command, run_mtw_scan, run_replay};
use hedonic::config::RunConfig;
use hedonic::report::{render, write_bundle, Format, Metadata, ReportBundle};
use hedonic::Error;

#[derive(Parser)]
#[command(name = "hedonic", version, about = "Regularity screening and equilibria for hedonic surplus functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for report files; without it the body goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Witness JSON for replay-witness.
    #[arg(long, global = true)]
    witness: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Screen A0–A3s, B3w/B3s and b-convexity.
    Check,
    /// Curvature scan comparing all routes.
    MtwScan,
    /// Discrete market and smooth-equilibrium contract checks.
    Equilibrium,
    /// Recompute a reported curvature witness.
    ReplayWitness,
}

#[derive(ValueEnum, Clone, Copy)]
enum FormatArg {
    Records,
    Table,
}

const CONFIG_ERROR: u8 = 3;

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("hedonic: {msg}");
    ExitCode::from(code)
}

fn code_for(e: &Error) -> u8 {
    match e {
        Error::Invalid(_) | Error::Expression { .. } | Error::DimensionMismatch { .. } => CONFIG_ERROR,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = &cli.config else {
        return fail(CONFIG_ERROR, "--config is required");
    };
    let mut cfg = match RunConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(f) = cli.format {
        cfg.output.format = match f {
            FormatArg::Records => Format::Records,
            FormatArg::Table => Format::Table,
        };
    }
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            return fail(1, e);
        }
    }

    let start = Instant::now();
    let result: Result<ReportBundle, Error> = match cli.command {
        Command::Check => run_check(&cfg),
        Command::MtwScan => run_mtw_scan(&cfg),
        Command::Equilibrium => run_equilibrium_command(&cfg),
        Command::ReplayWitness => {
            let Some(w) = &cli.witness else {
                return fail(CONFIG_ERROR, "replay-witness needs --witness");
            };
            match std::fs::read_to_string(w) {
                Ok(json) => run_replay(&cfg, &json),
                Err(e) => return fail(CONFIG_ERROR, format!("{}: {e}", w.display())),
            }
        }
    };
    let bundle = match result {
        Ok(b) => b,
        Err(e) => return fail(code_for(&e), e),
    };

    let format = cfg.output.format;
    match &cli.out {
        Some(dir) => {
            let meta = Metadata {
                config_hash: bundle.config_hash.clone(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                threads: rayon::current_num_threads(),
                elapsed_seconds: start.elapsed().as_secs_f64(),
            };
            match write_bundle(&bundle, &meta, dir, format) {
                Ok(paths) => {
                    for p in paths {
                        eprintln!("wrote {}", p.display());
                    }
                }
                Err(e) => return fail(1, e),
            }
        }
        None => {
            let files = render(&bundle, format);
            let many = files.len() > 1;
            for (name, body) in files {
                if many {
                    println!("# {name}");
                }
                print!("{body}");
            }
        }
    }
    for r in &bundle.reports {
        eprintln!("{:<12} {:<13} {}", r.condition.to_string(), r.verdict.to_string(), r.subject);
    }
    ExitCode::from(exit_code(&bundle) as u8)
}
