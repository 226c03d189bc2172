//! Command-line driver for seeded identity verification sweeps.
//!
//! Exit codes: 0 when no trial failed or diverged, 1 on any failure or
//! non-convergence, 2 on configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use qsumint::config::{parse_config_file, Identity, PartialConfig, CONFIG_ENV_VAR};
use qsumint::report::emit_report;
use qsumint::runner::run;
use qsumint::Error;

#[derive(Parser, Debug)]
#[command(
    name = "verify",
    version,
    about = "Numerical verification sweeps for q-hypergeometric sum-integral identities",
    after_help = "Identities: qbeta | star-triangle | reflection | d-props | bailey\n\
                  A config file (--config or $QSUMINT_CONFIG) supplies defaults; flags win."
)]
struct Cli {
    /// Identity to verify.
    identity: String,

    /// Number of seeded trials.
    #[arg(long)]
    trials: Option<u32>,

    /// Base seed for the sweep.
    #[arg(long)]
    seed: Option<u64>,

    /// Pin the nome q (otherwise sampled per trial in [0.1, 0.4)).
    #[arg(long)]
    q: Option<f64>,

    /// Starting contour node count (power of two >= 8).
    #[arg(long)]
    nodes: Option<u32>,

    /// Cap on the |m| summation window.
    #[arg(long)]
    window: Option<i64>,

    /// Identity tolerance override.
    #[arg(long)]
    tol: Option<f64>,

    /// Write per-trial reports as JSON to this path ("-" for stdout).
    #[arg(long, conflicts_with = "csv")]
    json: Option<String>,

    /// Write per-trial reports as CSV to this path ("-" for stdout).
    #[arg(long)]
    csv: Option<String>,

    /// Config file path (default: $QSUMINT_CONFIG if set).
    #[arg(long)]
    config: Option<PathBuf>,
}

fn fail(code: u8, err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let identity = match Identity::parse(&cli.identity) {
        Ok(id) => id,
        Err(e) => return fail(2, &e),
    };

    let config_path = cli
        .config
        .clone()
        .or_else(|| std::env::var(CONFIG_ENV_VAR).ok().map(PathBuf::from));
    let from_file = match config_path {
        Some(path) => {
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    return fail(
                        2,
                        &Error::Io {
                            path: path.display().to_string(),
                            message: e.to_string(),
                        },
                    )
                }
            };
            match parse_config_file(&text) {
                Ok(p) => p,
                Err(e) => return fail(2, &e),
            }
        }
        None => PartialConfig::default(),
    };

    let from_flags = PartialConfig {
        identity: Some(identity),
        trials: cli.trials,
        seed: cli.seed,
        q: cli.q,
        tol: cli.tol,
        quad_nodes_min: cli.nodes,
        sum_window_max: cli.window,
        json: cli.json,
        csv: cli.csv,
        ..Default::default()
    };

    let config = match from_file.overlaid(from_flags).resolve() {
        Ok(c) => c,
        Err(e) => return fail(2, &e),
    };

    let outcome = match run(&config) {
        Ok(o) => o,
        Err(e @ Error::Config(_)) => return fail(2, &e),
        Err(e) => return fail(1, &e),
    };

    for r in &outcome.reports {
        println!(
            "trial {:>4}  {:<16} rel_err={:<10.3e} nodes={:<5} window={:<3} [{:.1} ms]{}",
            r.trial,
            r.status.to_string(),
            r.rel_err,
            r.settings.nodes_used,
            r.settings.window_used,
            r.wall_time_ms,
            if r.note.is_empty() {
                String::new()
            } else {
                format!("  ({})", r.note)
            }
        );
    }
    println!("{}", outcome.summary);

    if let Some((format, path)) = &config.output {
        if let Err(e) = emit_report(&outcome.reports, *format, path) {
            return fail(1, &e);
        }
    }

    if outcome.summary.has_failures() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
