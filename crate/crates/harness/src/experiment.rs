//! Runs grids of experiments and writes their artifacts.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.json
//! point-00/config.toml
//! point-00/summary.json
//! point-00/run-000/curve.csv
//! point-00/run-000/report.json
//! ```

use std::path::Path;

use grokbench::grokdetect::{aggregate, detect, GrokkingReport};
use grokbench::nn::{train, MetricCurve, TrainConfig};
use grokbench::sampler::{make_test_set, make_train_set};
use grokbench::seed;
use grokbench::topology::{GroupedDatasetSpec, LabeledDataset};
use rayon::prelude::*;

use crate::config::{sweep_grid, Axis, ExperimentConfig, GridPoint};
use crate::error::{HarnessError, Result};
use crate::fsio::write_atomic;
use crate::manifest::{Manifest, Override, PointEntry, PointSummary, RunEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    /// Worker threads; runs are independent so any value gives the same files.
    pub jobs: usize,
    /// Log one line per finished run to stderr.
    pub progress: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            jobs: default_jobs(),
            progress: false,
        }
    }
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Seeds of the train and test sets of run `run`.
pub fn data_seeds(config: &ExperimentConfig, run: usize) -> (u64, u64) {
    let s = config.run_seed(run);
    (
        seed::derive(s, seed::stream::TRAIN_DATA),
        seed::derive(s, seed::stream::TEST_DATA),
    )
}

/// Train and test sets of run `run`.
pub fn datasets(
    config: &ExperimentConfig,
    spec: &GroupedDatasetSpec,
    run: usize,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let plan = config.plan(spec)?;
    let (train_seed, test_seed) = data_seeds(config, run);
    let train_set = make_train_set(spec, &plan, train_seed)?;
    let test_set = make_test_set(spec, config.dataset.test_total, test_seed)?;
    Ok((train_set, test_set))
}

pub fn train_config(config: &ExperimentConfig, run: usize) -> TrainConfig {
    TrainConfig {
        seed: config.run_seed(run),
        ..config.train.clone()
    }
}

/// Trains and evaluates one run; returns the curve, report and any training error.
pub fn run_once(
    config: &ExperimentConfig,
    spec: &GroupedDatasetSpec,
    run: usize,
) -> Result<(MetricCurve, Option<GrokkingReport>, Option<String>)> {
    let (train_set, test_set) = datasets(config, spec, run)?;
    match train(&train_set, &test_set, &train_config(config, run)) {
        Ok(curve) => {
            let report = detect(&curve, &config.detector)?;
            Ok((curve, Some(report), None))
        }
        Err(e) => {
            let message = e.to_string();
            Ok((*e.partial, None, Some(message)))
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig, out: &Path, opts: Options) -> Result<Manifest> {
    execute(&[GridPoint::new(config, vec![])?], out, "config", opts)
}

/// One experiment per value of `axis`; every point shares the base seed.
pub fn sweep(config: &ExperimentConfig, axis: Axis, values: &[f64], out: &Path, opts: Options) -> Result<Manifest> {
    let grid = sweep_grid(config, axis, values)?;
    execute(&grid, out, &format!("sweep:{axis}"), opts)
}

fn point_dir(index: usize) -> String {
    format!("point-{index:02}")
}

/// Runs every grid point and writes all artifacts plus the manifest.
///
/// All configs are validated before anything is written.
pub fn execute(grid: &[GridPoint], out: &Path, source: &str, opts: Options) -> Result<Manifest> {
    if grid.is_empty() {
        return Err(HarnessError::config("empty grid"));
    }
    if opts.jobs == 0 {
        return Err(HarnessError::config("jobs: must be at least 1"));
    }
    let mut specs = Vec::with_capacity(grid.len());
    for (i, point) in grid.iter().enumerate() {
        point
            .config
            .validate()
            .map_err(|e| HarnessError::config(format!("grid point {i} ({}): {e}", point.label())))?;
        specs.push(point.config.spec()?);
    }

    let mut manifest = Manifest::new(source);
    let tasks: Vec<(usize, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(i, p)| (0..p.config.runs).map(move |r| (i, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| HarnessError::config(format!("jobs: {e}")))?;
    let results: Vec<Result<(RunEntry, Option<GrokkingReport>)>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, run)| {
                let config = &grid[i].config;
                let rel = format!("{}/run-{run:03}", point_dir(i));
                let (curve, report, error) = run_once(config, &specs[i], run)?;
                let mut csv = Vec::new();
                curve.write_csv(&mut csv)?;
                let curve_file = format!("{rel}/curve.csv");
                write_atomic(&out.join(&curve_file), &csv)?;
                let report_file = match &report {
                    Some(r) => {
                        let f = format!("{rel}/report.json");
                        write_atomic(&out.join(&f), r.to_json()?.as_bytes())?;
                        Some(f)
                    }
                    None => None,
                };
                if opts.progress {
                    let status = match (&report, &error) {
                        (Some(r), _) => format!("{} (final test acc {:.4})", r.reason, r.final_test_accuracy),
                        (None, Some(e)) => format!("failed: {e}"),
                        (None, None) => String::new(),
                    };
                    eprintln!("[{}] run {run}: {status}", grid[i].label());
                }
                let (train_data_seed, test_data_seed) = data_seeds(config, run);
                Ok((
                    RunEntry {
                        run,
                        seed: config.run_seed(run),
                        train_data_seed,
                        test_data_seed,
                        curve_file,
                        report_file,
                        error,
                    },
                    report,
                ))
            })
            .collect()
    });

    let mut results = results.into_iter();
    for (i, point) in grid.iter().enumerate() {
        let mut runs = Vec::with_capacity(point.config.runs);
        let mut reports = Vec::new();
        for _ in 0..point.config.runs {
            let (entry, report) = results.next().expect("one result per task")?;
            runs.push(entry);
            reports.extend(report);
        }
        let dir = point_dir(i);
        let config_file = format!("{dir}/config.toml");
        write_atomic(&out.join(&config_file), point.config.to_toml()?.as_bytes())?;
        let summary = PointSummary {
            label: point.label(),
            runs: runs.len(),
            completed: reports.len(),
            failed: runs.len() - reports.len(),
            aggregate: if reports.is_empty() {
                None
            } else {
                Some(aggregate(&reports)?)
            },
        };
        let summary_file = format!("{dir}/summary.json");
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        write_atomic(&out.join(&summary_file), text.as_bytes())?;
        manifest.points.push(PointEntry {
            index: i,
            label: point.label(),
            overrides: point
                .overrides
                .iter()
                .map(|(a, v)| Override {
                    axis: a.name().to_string(),
                    value: *v,
                })
                .collect(),
            config: point.config.clone(),
            config_file,
            summary_file,
            runs,
        });
    }
    manifest.finished_unix = crate::manifest::unix_now();
    manifest.write(out)?;
    Ok(manifest)
}
