use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SourceSpec};
use super::persist::save_allocation;
use super::render::{render, write_ppm};
use crate::allocator::{allocate, Algorithm, Allocation};
use crate::analysis::{distance_samples, phase_stats, PhaseStats};
use crate::error::{Error, Result};
use crate::sources::{
    load_centers, sample_lattice, sample_poisson, sample_uniform, save_centers, CenterSet,
};
use crate::verifier::{validate, verify_stability, ValidationReport};

/// Contents of `stats.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub algorithm: Algorithm,
    pub seed: u64,
    #[serde(flatten)]
    pub phase: PhaseStats,
    /// Mean allocation distance over claimed cells.
    pub mean_distance: Option<f64>,
    pub unstable_pairs: usize,
    pub validation: ValidationReport,
}

impl RunStats {
    pub fn verified(&self) -> bool {
        self.unstable_pairs == 0 && self.validation.passed
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub stats: RunStats,
    pub artifacts: Vec<PathBuf>,
}

pub fn build_centers(config: &ExperimentConfig) -> Result<CenterSet> {
    let region = &config.region;
    match &config.source {
        SourceSpec::Poisson { intensity } => sample_poisson(*intensity, region, config.seed),
        SourceSpec::Uniform { count } => Ok(sample_uniform(*count, region, config.seed)),
        SourceSpec::Lattice { spacing, jitter } => {
            sample_lattice(region, *spacing, *jitter, config.seed)
        }
        SourceSpec::File { path } => load_centers(path, region),
    }
}

fn stats_for(config: &ExperimentConfig, alloc: &Allocation<'_>) -> Result<RunStats> {
    let samples = distance_samples(alloc);
    let claimed: Vec<f64> = samples
        .distances
        .into_iter()
        .filter(|d| d.is_finite())
        .collect();
    Ok(RunStats {
        algorithm: config.algorithm,
        seed: config.seed,
        phase: phase_stats(alloc),
        mean_distance: (!claimed.is_empty())
            .then(|| claimed.iter().sum::<f64>() / claimed.len() as f64),
        unstable_pairs: verify_stability(alloc)?.len(),
        validation: validate(alloc),
    })
}

/// Allocates and verifies without writing anything.
pub fn execute(config: &ExperimentConfig) -> Result<RunStats> {
    config.validate()?;
    let grid = config.grid()?;
    let centers = build_centers(config)?;
    let alloc = allocate(config.algorithm, &grid, &centers, config.appetite)?;
    stats_for(config, &alloc)
}

/// Runs one experiment and writes `centers.csv`, `allocation.csv` (with its
/// `allocation.json` sidecar), `stats.json` and, if requested, `allocation.ppm`.
///
/// Artifacts are written even when verification fails, so the failure can
/// be inspected; check [`RunStats::verified`].
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let grid = config.grid()?;
    let centers = build_centers(config)?;
    let alloc = allocate(config.algorithm, &grid, &centers, config.appetite)?;
    let stats = stats_for(config, &alloc)?;

    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut artifacts = Vec::new();

    let path = dir.join("centers.csv");
    save_centers(&centers, &path)?;
    artifacts.push(path);

    let path = dir.join("allocation.csv");
    save_allocation(&alloc, Some(config.seed), &path)?;
    artifacts.push(path.clone());
    artifacts.push(super::persist::sidecar_path(&path));

    let path = dir.join("stats.json");
    let mut text = serde_json::to_string_pretty(&stats)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    artifacts.push(path);

    if let Some(spec) = &config.render {
        let path = dir.join("allocation.ppm");
        write_ppm(&render(&alloc, spec)?, &path)?;
        artifacts.push(path);
    }
    Ok(RunOutcome { stats, artifacts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Region, RegionKind};
    use crate::grid::Appetite;
    use crate::io::RenderSpec;

    fn config(dir: &std::path::Path) -> ExperimentConfig {
        ExperimentConfig {
            region: Region::cube(RegionKind::Torus, 2, 4.0).unwrap(),
            resolution: vec![16, 16],
            source: SourceSpec::Poisson { intensity: 1.0 },
            appetite: Appetite::Finite(0.5),
            algorithm: Algorithm::Greedy,
            seed: 3,
            out_dir: dir.to_path_buf(),
            render: Some(RenderSpec::default()),
        }
    }

    #[test]
    fn writes_all_artifacts_deterministically() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run(&config(a.path())).unwrap();
        let rb = run(&config(b.path())).unwrap();
        assert!(ra.stats.verified());
        assert_eq!(ra.stats, rb.stats);
        assert_eq!(ra.artifacts.len(), 5);
        for name in [
            "centers.csv",
            "allocation.csv",
            "allocation.json",
            "stats.json",
            "allocation.ppm",
        ] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn zero_appetite_and_critical_stats() {
        let dir = tempfile::tempdir().unwrap();
        let zero = ExperimentConfig {
            appetite: Appetite::Finite(0.0),
            render: None,
            ..config(dir.path())
        };
        run(&zero).unwrap();
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("stats.json")).unwrap())
                .unwrap();
        assert_eq!(json["unclaimed_fraction"], 1.0);

        // 16 centers, 256 cells, quota 16
        let critical = ExperimentConfig {
            source: SourceSpec::Uniform { count: 16 },
            appetite: Appetite::Finite(1.0),
            render: None,
            ..config(dir.path())
        };
        run(&critical).unwrap();
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("stats.json")).unwrap())
                .unwrap();
        assert_eq!(json["unclaimed_fraction"], 0.0);
        assert_eq!(json["mean_residual_appetite"], 0.0);
        assert_eq!(json["phase"], "critical");
    }

    #[test]
    fn missing_center_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig {
            source: SourceSpec::File {
                path: dir.path().join("nope.csv"),
            },
            ..config(dir.path())
        };
        assert_eq!(run(&c).unwrap_err().exit_code(), 3);
    }
}
