//! Stable allocations of Lebesgue measure to point-process centers.
//!
//! The region (a flat torus by default) is cut into equal-mass cells. Each
//! center may hold up to a quota of cells, and cells and centers both prefer
//! to be matched as close as possible. The crate computes the stable
//! allocation with three independent procedures, checks stability against
//! the definition, and measures phase statistics and territory geometry.

pub mod allocator;
pub mod analysis;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod sources;
pub mod verifier;

pub use allocator::{
    allocate, allocate_center_optimal, allocate_greedy, allocate_site_optimal, Algorithm,
    Allocation, PairKey,
};
pub use error::{Error, Result};
pub use geometry::{Point, Region, RegionKind};
pub use grid::{Appetite, Grid, Quota};
pub use sources::{
    load_centers, sample_lattice, sample_poisson, sample_uniform, save_centers, CenterSet,
};
