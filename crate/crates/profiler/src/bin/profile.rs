//! `profile --corpus <file> [--config <file>] [--scripted <dir>]
//! [--baseline [n]] [--sweep alpha,beta,tau] [--grid name=v,...] --out <dir>`
//!
//! Exit codes: 0 success, 2 some entries failed, 1 fatal or usage error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use serde::Serialize;
use serde_json::json;
use tokensteer_core::config::Config;
use tokensteer_core::wiring;
use tokensteer_profiler::report::{build_report, write_csv};
use tokensteer_profiler::run::{baseline, collect};
use tokensteer_profiler::sweep::{grid_points, parse_grid, point_name};
use tokensteer_profiler::load_corpus;

#[derive(Debug, Parser)]
#[command(name = "profile", about = "Decision-point statistics over a prompt corpus")]
struct Args {
    /// JSON array of {id, document, cursor_offset, language_hint}.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of recorded traces to use instead of a live backend.
    #[arg(long)]
    scripted: Option<PathBuf>,
    /// Emit this many whole completions per entry instead of profiling.
    #[arg(long, num_args = 0..=1, default_missing_value = "5",
          value_parser = clap::value_parser!(u64).range(1..=5))]
    baseline: Option<u64>,
    /// Comma-separated highlight parameters to sweep over their grids.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<String>,
    /// Grid override for a swept parameter, e.g. `tau=0.2,0.3`.
    #[arg(long)]
    grid: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Fatal> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

async fn run(args: Args) -> Result<bool, Fatal> {
    let mut cfg = Config::load(args.config.as_deref())?;
    cfg.service.log_dir = None;
    let entries = load_corpus(&args.corpus)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Fatal(format!("{}: {e}", args.out.display())))?;

    if let Some(n) = args.baseline {
        let backend = wiring::backend(&cfg, args.scripted.as_deref())?;
        let mut params = cfg.generation;
        params.temperature = cfg.expander.regen_temperature;
        let report = baseline(backend, &params, &entries, n as usize).await;
        write_json(&args.out.join("baseline.json"), &report)?;
        return Ok(report.errors.is_empty());
    }

    let mut overrides = BTreeMap::new();
    for g in &args.grid {
        let (name, values) = parse_grid(g)?;
        overrides.insert(name, values);
    }
    let points = if args.sweep.is_empty() {
        vec![cfg.highlight]
    } else {
        grid_points(&cfg.highlight, &args.sweep, &overrides)?
    };

    let mgr = Arc::new(wiring::manager(&cfg, args.scripted.as_deref())?);
    let (data, errors) = collect(mgr, &entries, cfg.expander.preview_concurrency).await;

    let write_pair = |dir: &Path, stem: &str, point| -> Result<(), Fatal> {
        let report = build_report(&data, &errors, point);
        write_json(&dir.join(format!("{stem}.json")), &report)?;
        let file = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        write_csv(&report, file)?;
        Ok(())
    };
    if args.sweep.is_empty() {
        write_pair(&args.out, "report", &points[0])?;
    } else {
        let dir = args.out.join("sweep");
        std::fs::create_dir_all(&dir)?;
        let mut index = Vec::new();
        for p in &points {
            let stem = point_name(p);
            write_pair(&dir, &stem, p)?;
            index.push(json!({"alpha": p.alpha, "beta": p.beta, "tau": p.tau, "report": format!("sweep/{stem}.json")}));
        }
        write_json(&args.out.join("sweep.json"), &index)?;
    }
    Ok(errors.is_empty())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("profile: {e}");
            return ExitCode::from(1);
        }
    };
    match rt.block_on(run(args)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Fatal(msg)) => {
            eprintln!("profile: {msg}");
            ExitCode::from(1)
        }
    }
}
