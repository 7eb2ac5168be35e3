use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::render::RenderSpec;
use crate::allocator::Algorithm;
use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::grid::{Appetite, Grid};

/// Where the centers come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceSpec {
    Poisson {
        intensity: f64,
    },
    /// Exactly `count` i.i.d. uniform centers.
    Uniform {
        count: usize,
    },
    Lattice {
        spacing: f64,
        #[serde(default)]
        jitter: f64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub region: Region,
    pub resolution: Vec<usize>,
    pub source: SourceSpec,
    pub appetite: Appetite,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderSpec>,
}

impl ExperimentConfig {
    /// Checks everything that can be checked without touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        match &self.source {
            SourceSpec::Poisson { intensity } if !(intensity.is_finite() && *intensity >= 0.0) => {
                return Err(Error::invalid(format!(
                    "intensity must be finite and >= 0, got {intensity}"
                )))
            }
            SourceSpec::Lattice { spacing, jitter }
                if !spacing.is_finite() || *spacing <= 0.0 || jitter.is_nan() || *jitter < 0.0 =>
            {
                return Err(Error::invalid(
                    "lattice spacing must be positive and jitter non-negative",
                ))
            }
            _ => {}
        }
        if let Appetite::Finite(a) = self.appetite {
            Appetite::finite(a)?;
        }
        if let Some(spec) = &self.render {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.region.clone(), self.resolution.clone())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))?;
    Ok(config)
}

pub fn save_config(config: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(config)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
