use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use pdcfa::core::reach::{AnalysisConfig, Mode};
use pdcfa::core::report::Predicate;
use pdcfa::{load_bundle, run_bundle, write_reports, RunOptions};

#[derive(Parser)]
#[command(
    name = "pdcfa",
    version,
    about = "Taint and permission triage for app bundles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a bundle and write reports.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pushdown,
    Finite,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    /// Bundle directory containing manifest.json.
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Pushdown)]
    mode: ModeArg,
    /// Call-string depth for frame contexts (at most 4).
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Qualify allocation sites with the allocating frame's context.
    #[arg(long)]
    heap_context: bool,
    /// Worker count; reports do not depend on it.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    /// State budget per entry point [default: 500000].
    #[arg(long)]
    max_states: Option<usize>,
    /// Wall-clock budget per entry point [default: 300].
    #[arg(long)]
    max_seconds: Option<u64>,
    /// Finding filter, e.g. "taintHas(Location) && classIs(com/*)".
    #[arg(long = "where")]
    predicate: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn config(a: &AnalyzeArgs) -> AnalysisConfig {
    let mut cfg = AnalysisConfig::with_mode(
        match a.mode {
            ModeArg::Pushdown => Mode::Pushdown,
            ModeArg::Finite => Mode::Finite,
        },
        a.k,
    );
    cfg.heap_context = a.heap_context;
    if let Some(n) = a.max_states {
        cfg.max_states = n;
    }
    if let Some(s) = a.max_seconds {
        cfg.max_seconds = Some(s);
    }
    cfg
}

/// Every error here is a usage, input or analysis error (exit 2); running
/// out of budget is not an error and shows up in the exit code instead.
fn analyze(a: AnalyzeArgs) -> anyhow::Result<i32> {
    let cfg = config(&a);
    cfg.validate().map_err(anyhow::Error::msg)?;
    let predicate = match &a.predicate {
        Some(text) => Some(
            text.parse::<Predicate>()
                .with_context(|| format!("--where {text:?}"))?,
        ),
        None => None,
    };
    let bundle =
        load_bundle(&a.bundle).with_context(|| format!("loading bundle {}", a.bundle.display()))?;
    let opts = RunOptions {
        config: cfg,
        predicate,
        jobs: a.jobs as usize,
    };
    let out = run_bundle(&bundle, &opts).context("analysis failed")?;
    write_reports(&a.out, &out)
        .with_context(|| format!("writing reports to {}", a.out.display()))?;
    if let Some(limit) = &out.meta.limit {
        eprintln!("pdcfa: {limit}; reports are incomplete");
    }
    println!(
        "{}: {} finding(s) reported of {}, {} over-privileged, {} missing permission(s); reports in {}",
        bundle.manifest.app_name,
        out.flow.findings.len(),
        out.findings.len(),
        out.permissions.over_privileged.len(),
        out.permissions.missing.len(),
        a.out.display()
    );
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PDCFA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Analyze(a) => match analyze(a) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("pdcfa: {e:#}");
                2
            }
        },
    };
    ExitCode::from(code as u8)
}
