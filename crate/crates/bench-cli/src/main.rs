//! CLI for the saddle solver bench harness: `solve`, `gen`, `fit`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use saddle_bench::config::RunConfig;
use saddle_bench::fit::{fit_rate, last_half, FitField};
use saddle_bench::gen::generate_instance;
use saddle_bench::run::run;
use saddle_bench::runlog::RunLog;

#[derive(Parser)]
#[command(name = "saddle-bench", version, about = "Saddle-point solver benchmark harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a solver from a TOML config; writes run.csv and summary.json
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// output directory, created if missing
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate an instance file from a spec string, e.g.
    /// "submodular_grid(8,8,42)" or "eq_qp(30,5,7)"
    Gen {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the log-log slope of a gap column against the iteration index
    Fit {
        #[arg(long)]
        log: PathBuf,
        /// one of: dual_H, primal, infeas, gap
        #[arg(long)]
        field: String,
        /// reference value (e.g. the optimal dual) the gap is measured from
        #[arg(long = "ref", allow_negative_numbers = true)]
        reference: f64,
        /// first record index of the fit window (default: last half)
        #[arg(long)]
        window_start: Option<usize>,
        /// one past the last record index (default: end of log)
        #[arg(long)]
        window_end: Option<usize>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", json!({ "error": err.to_string() }));
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Solve { config, out } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = RunConfig::from_toml(&text)?;
            let base = config.parent().unwrap_or_else(|| std::path::Path::new("."));
            let output = run(&cfg, base)?;
            std::fs::create_dir_all(&out)?;
            let csv_path = out.join("run.csv");
            let json_path = out.join("summary.json");
            output.log.save_csv(&csv_path)?;
            output.summary.save_json(&json_path)?;
            println!(
                "{}",
                json!({
                    "csv": csv_path,
                    "summary": json_path,
                    "iterations": output.summary.iterations,
                    "lmo_calls": output.summary.total_lmo_calls,
                    "final_dual": output.summary.final_dual,
                    "final_primal": output.summary.final_primal,
                })
            );
            Ok(())
        }
        Cmd::Gen { spec, out } => {
            let inst = generate_instance(&spec)?;
            inst.save(&out)?;
            println!("{}", json!({ "instance": out }));
            Ok(())
        }
        Cmd::Fit {
            log,
            field,
            reference,
            window_start,
            window_end,
        } => {
            let runlog = RunLog::load_csv(&log)?;
            let field = FitField::parse(&field)?;
            let default = last_half(&runlog);
            let window = window_start.unwrap_or(default.start)..window_end.unwrap_or(runlog.len());
            let slope = fit_rate(&runlog, field, window.clone(), reference)?;
            println!(
                "{}",
                json!({
                    "slope": slope,
                    "window": [window.start, window.end],
                    "reference": reference,
                })
            );
            Ok(())
        }
    }
}
