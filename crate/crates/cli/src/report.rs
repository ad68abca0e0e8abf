//! JSON and text reports. Every JSON report has a `results` section that is
//! a pure function of data, config and seeds, and a separate `timing`
//! section with wall-clock measurements.

use biesn::dataset::{Dataset, Split};
use biesn::pipeline::{BenchmarkTable, TrainOutcome};
use biesn::readout::format_mean_sd;
use biesn::EvalReport;
use serde_json::{json, Value};

use crate::config::RunConfig;

pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn run_config(cfg: &RunConfig) -> Value {
    json!({
        "pipeline": cfg.pipeline,
        "lambda": cfg.lambda,
        "lambda_grid": cfg.lambda_grid,
    })
}

pub fn train_report(cfg: &RunConfig, ds: &Dataset, outcome: &TrainOutcome) -> Value {
    json!({
        "results": {
            "config": run_config(cfg),
            "classes": ds.classes,
            "n_train": ds.train.len(),
            "n_val": ds.val.len(),
            "skipped": ds.skipped,
            "feature_width": cfg.pipeline.feature_width(),
            "training_epochs": 0,
            "linear_solves": outcome.linear_solves,
            "chosen_lambda": outcome.chosen_lambda,
            "lambda_sweep": outcome.lambda_sweep,
            "val": outcome.val_report,
        },
        "timing": {
            "train_seconds": outcome.train_seconds,
            "feature_seconds": outcome.feature_seconds,
            "fit_seconds": outcome.fit_seconds,
        }
    })
}

pub fn eval_report(split: Split, rep: &EvalReport) -> Value {
    json!({
        "results": {
            "split": split.as_str(),
            "report": rep,
        },
        "timing": {
            "eval_seconds": rep.wall_clock_eval_s,
        }
    })
}

pub fn benchmark_report(cfg: &RunConfig, table: &BenchmarkTable, total_seconds: f64) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            json!({
                "method": r.method,
                "direction": r.direction,
                "units_per_direction": r.units_per_direction,
                "mean_accuracy": r.summary.mean_accuracy,
                "sd_accuracy": r.summary.sd_accuracy,
                "runs": r.summary.runs.iter().map(|run| json!({
                    "seed": run.seed,
                    "chosen_lambda": run.chosen_lambda,
                    "test": run.test,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let timing: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            json!({
                "method": r.method,
                "mean_train_seconds": r.summary.mean_train_seconds(),
                "train_seconds": r.summary.runs.iter().map(|run| run.train_seconds).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut warnings = Vec::new();
    if cfg.seeds == 1 {
        warnings.push("single seed: SD reported as 0");
    }
    json!({
        "results": {
            "config": run_config(cfg),
            "n_seeds": cfg.seeds,
            "rows": rows,
            "warnings": warnings,
        },
        "timing": {
            "rows": timing,
            "total_seconds": total_seconds,
        }
    })
}

pub fn benchmark_text(table: &BenchmarkTable, n_seeds: usize) -> String {
    let mut s = format!(
        "{:<10} {:>8} {:>18} {:>14}\n",
        "method", "units", "accuracy % (SD)", "mean train s"
    );
    for r in &table.rows {
        s.push_str(&format!(
            "{:<10} {:>8} {:>18} {:>14.3}\n",
            r.method,
            r.units_per_direction,
            format_mean_sd(r.summary.mean_accuracy, r.summary.sd_accuracy),
            r.summary.mean_train_seconds()
        ));
    }
    s.push_str(&format!("seeds: {n_seeds}\n"));
    s
}
