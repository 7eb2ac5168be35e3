use std::fs::File;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SourceSpec};
use super::experiment::execute;
use crate::analysis::mean_and_std_error;
use crate::error::{Error, Result};
use crate::grid::Appetite;

/// Environment variable capping the number of concurrent sweep runs.
pub const THREADS_ENV: &str = "STABLE_ALLOC_THREADS";

/// Values to substitute into the base config; an empty axis keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    #[serde(default)]
    pub appetites: Vec<Appetite>,
    /// Poisson intensities; requires a Poisson source.
    #[serde(default)]
    pub intensities: Vec<f64>,
    #[serde(default)]
    pub resolutions: Vec<Vec<usize>>,
}

/// One CSV row: a single run, or (with `kind = "summary"`) the mean and
/// standard error over the successful runs of a parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: String,
    pub point: usize,
    pub appetite: String,
    pub intensity: Option<f64>,
    pub resolution: String,
    pub seed: Option<u64>,
    pub runs: usize,
    pub failures: usize,
    pub unclaimed_fraction: Option<f64>,
    pub unclaimed_fraction_se: Option<f64>,
    pub mean_residual_appetite: Option<f64>,
    pub mean_residual_appetite_se: Option<f64>,
    pub mean_distance: Option<f64>,
    pub mean_distance_se: Option<f64>,
    pub unstable_pairs: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// Run rows sorted by (point, seed position).
    pub runs: Vec<SweepRow>,
    /// One summary per parameter point, in point order.
    pub summaries: Vec<SweepRow>,
}

/// Thread cap from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::invalid(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

fn points(base: &ExperimentConfig, axes: &SweepAxes) -> Result<Vec<ExperimentConfig>> {
    if axes.appetites.is_empty() && axes.intensities.is_empty() && axes.resolutions.is_empty() {
        return Err(Error::invalid("sweep needs at least one parameter value"));
    }
    if !axes.intensities.is_empty() && !matches!(base.source, SourceSpec::Poisson { .. }) {
        return Err(Error::invalid(
            "sweeping intensities requires a Poisson source",
        ));
    }
    let appetites = if axes.appetites.is_empty() {
        vec![base.appetite]
    } else {
        axes.appetites.clone()
    };
    let resolutions = if axes.resolutions.is_empty() {
        vec![base.resolution.clone()]
    } else {
        axes.resolutions.clone()
    };
    let sources: Vec<SourceSpec> = if axes.intensities.is_empty() {
        vec![base.source.clone()]
    } else {
        axes.intensities
            .iter()
            .map(|&intensity| SourceSpec::Poisson { intensity })
            .collect()
    };
    let mut out = Vec::new();
    for &appetite in &appetites {
        for source in &sources {
            for resolution in &resolutions {
                out.push(ExperimentConfig {
                    appetite,
                    source: source.clone(),
                    resolution: resolution.clone(),
                    render: None,
                    ..base.clone()
                });
            }
        }
    }
    Ok(out)
}

fn describe(point: usize, config: &ExperimentConfig) -> SweepRow {
    SweepRow {
        kind: "run".into(),
        point,
        appetite: config.appetite.to_string(),
        intensity: match config.source {
            SourceSpec::Poisson { intensity } => Some(intensity),
            _ => None,
        },
        resolution: config
            .resolution
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("x"),
        seed: Some(config.seed),
        runs: 1,
        failures: 0,
        unclaimed_fraction: None,
        unclaimed_fraction_se: None,
        mean_residual_appetite: None,
        mean_residual_appetite_se: None,
        mean_distance: None,
        mean_distance_se: None,
        unstable_pairs: None,
        error: None,
    }
}

/// Every (parameter point, seed) combination, run concurrently in memory.
///
/// A failing run becomes a row carrying its error; it does not stop the sweep.
pub fn sweep(base: &ExperimentConfig, axes: &SweepAxes, seeds: &[u64]) -> Result<SweepResult> {
    if seeds.is_empty() {
        return Err(Error::invalid("sweep needs at least one seed"));
    }
    let points = points(base, axes)?;
    let jobs: Vec<(usize, ExperimentConfig)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            seeds
                .iter()
                .map(move |&seed| (i, ExperimentConfig { seed, ..p.clone() }))
        })
        .collect();

    let work = || -> Vec<SweepRow> {
        jobs.par_iter()
            .map(|(point, config)| {
                let mut row = describe(*point, config);
                match execute(config) {
                    Ok(stats) => {
                        row.unclaimed_fraction = Some(stats.phase.unclaimed_fraction);
                        row.mean_residual_appetite = stats.phase.mean_residual_appetite;
                        row.mean_distance = stats.mean_distance;
                        row.unstable_pairs = Some(stats.unstable_pairs);
                        if !stats.verified() {
                            row.failures = 1;
                            row.error = Some("verification failed".into());
                        }
                    }
                    Err(e) => {
                        row.failures = 1;
                        row.error = Some(e.to_string());
                    }
                }
                row
            })
            .collect()
    };
    let runs = match thread_cap()? {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?
            .install(work),
    };

    let summaries = points
        .iter()
        .enumerate()
        .map(|(point, config)| {
            let rows: Vec<&SweepRow> = runs.iter().filter(|r| r.point == point).collect();
            let ok: Vec<&&SweepRow> = rows.iter().filter(|r| r.failures == 0).collect();
            let stat = |f: &dyn Fn(&SweepRow) -> Option<f64>| {
                let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                if v.is_empty() {
                    (None, None)
                } else {
                    let (m, se) = mean_and_std_error(&v);
                    (Some(m), Some(se))
                }
            };
            let mut row = describe(point, config);
            row.kind = "summary".into();
            row.seed = None;
            row.runs = rows.len();
            row.failures = rows.len() - ok.len();
            (row.unclaimed_fraction, row.unclaimed_fraction_se) = stat(&|r| r.unclaimed_fraction);
            (row.mean_residual_appetite, row.mean_residual_appetite_se) =
                stat(&|r| r.mean_residual_appetite);
            (row.mean_distance, row.mean_distance_se) = stat(&|r| r.mean_distance);
            row.unstable_pairs = Some(ok.iter().filter_map(|r| r.unstable_pairs).sum());
            row
        })
        .collect();
    Ok(SweepResult { runs, summaries })
}

/// Run rows followed by summary rows.
pub fn write_sweep_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    for row in result.runs.iter().chain(&result.summaries) {
        writer
            .serialize(row)
            .map_err(|e| Error::io(path, e.into()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
