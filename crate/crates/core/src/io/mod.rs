//! Experiment configuration, file formats, images and parameter sweeps.

mod config;
mod experiment;
mod persist;
mod render;
mod sweep;

pub use config::{load_config, save_config, ExperimentConfig, SourceSpec};
pub use experiment::{build_centers, execute, run, RunOutcome, RunStats};
pub use persist::{
    load_allocation, save_allocation, sidecar_path, AllocationMeta, AllocationRecord,
};
pub use render::{render, write_ppm, RenderSpec, RenderStyle};
pub use sweep::{
    sweep, thread_cap, write_sweep_csv, SweepAxes, SweepResult, SweepRow, THREADS_ENV,
};
