//! Stable allocations of grid cells to centers.
//!
//! Three procedures produce them:
//!
//! * [`allocate_site_optimal`]: stage-wise deferred acceptance where cells
//!   apply to their nearest non-rejecting center;
//! * [`allocate_center_optimal`]: stage-wise deferred acceptance where
//!   unsated centers apply to their nearest non-rejecting cells;
//! * [`allocate_greedy`]: one pass over all (cell, center) pairs in
//!   increasing [`PairKey`] order, i.e. simultaneously growing spheres.
//!
//! All three order pairs by [`PairKey`], which is a single total order on
//! (cell, center) pairs consistent with both sides' preferences. Under such an
//! order the stable matching is unique, so the three outputs coincide exactly,
//! ties included.

mod center_optimal;
mod greedy;
mod site_optimal;
pub(crate) mod stream;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Appetite, Grid};
use crate::sources::CenterSet;

pub use center_optimal::{allocate_center_optimal, center_optimal_with_trace};
pub use greedy::allocate_greedy;
pub use site_optimal::{allocate_site_optimal, site_optimal_with_trace};

/// Tie rule: pairs compare by distance, then center index, then cell index.
#[derive(Clone, Copy, Debug)]
pub struct PairKey {
    pub dist: f64,
    pub center: u32,
    pub cell: u32,
}

impl PairKey {
    pub fn new(dist: f64, center: u32, cell: u32) -> Self {
        PairKey { dist, center, cell }
    }
}

impl PartialEq for PairKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PairKey {}

impl PartialOrd for PairKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PairKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.center.cmp(&other.center))
            .then(self.cell.cmp(&other.cell))
    }
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Site,
    Center,
    #[default]
    Greedy,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Site, Algorithm::Center, Algorithm::Greedy];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Site => "site",
            Algorithm::Center => "center",
            Algorithm::Greedy => "greedy",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "site" => Ok(Algorithm::Site),
            "center" => Ok(Algorithm::Center),
            "greedy" => Ok(Algorithm::Greedy),
            other => Err(Error::invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

pub fn allocate<'a>(
    algorithm: Algorithm,
    grid: &'a Grid,
    centers: &'a CenterSet,
    appetite: Appetite,
) -> Result<Allocation<'a>> {
    match algorithm {
        Algorithm::Site => allocate_site_optimal(grid, centers, appetite),
        Algorithm::Center => allocate_center_optimal(grid, centers, appetite),
        Algorithm::Greedy => allocate_greedy(grid, centers, appetite),
    }
}

/// Per-stage bookkeeping of the two stage-wise procedures.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageTrace {
    pub stages: usize,
    /// Rejections issued in each stage; the last entry is always zero.
    pub rejections: Vec<usize>,
    /// Rejection radii never grew (site-optimal) or application radii never
    /// shrank (center-optimal) from one stage to the next.
    pub radii_monotone: bool,
}

fn check_instance(grid: &Grid, centers: &CenterSet) -> Result<()> {
    if grid.region() != centers.region() {
        return Err(Error::invalid(
            "grid and center set live in different regions",
        ));
    }
    if centers.len() >= u32::MAX as usize {
        return Err(Error::invalid("too many centers"));
    }
    Ok(())
}

fn stage_limit(grid: &Grid, centers: &CenterSet) -> usize {
    grid.cell_count()
        .saturating_mul(centers.len())
        .saturating_add(1)
}

/// A total map from cells to centers (or unclaimed), with per-center loads.
#[derive(Clone, Debug)]
pub struct Allocation<'a> {
    grid: &'a Grid,
    centers: &'a CenterSet,
    appetite: Appetite,
    quota: usize,
    assignment: Vec<Option<u32>>,
    loads: Vec<usize>,
}

impl<'a> Allocation<'a> {
    /// Wraps an arbitrary assignment. Only lengths and index ranges are
    /// checked; quota and stability are the verifier's business.
    pub fn from_assignment(
        grid: &'a Grid,
        centers: &'a CenterSet,
        appetite: Appetite,
        assignment: Vec<Option<u32>>,
    ) -> Result<Self> {
        check_instance(grid, centers)?;
        if assignment.len() != grid.cell_count() {
            return Err(Error::invalid(format!(
                "assignment covers {} cells, grid has {}",
                assignment.len(),
                grid.cell_count()
            )));
        }
        let mut loads = vec![0usize; centers.len()];
        for (cell, a) in assignment.iter().enumerate() {
            if let Some(c) = *a {
                let slot = loads.get_mut(c as usize).ok_or_else(|| {
                    Error::invalid(format!("cell {cell} assigned to unknown center {c}"))
                })?;
                *slot += 1;
            }
        }
        Ok(Allocation {
            grid,
            centers,
            appetite,
            quota: grid.quota_cells(appetite).cells,
            assignment,
            loads,
        })
    }

    pub fn grid(&self) -> &'a Grid {
        self.grid
    }

    pub fn centers(&self) -> &'a CenterSet {
        self.centers
    }

    pub fn appetite(&self) -> Appetite {
        self.appetite
    }

    pub fn quota(&self) -> usize {
        self.quota
    }

    pub fn assignment(&self) -> &[Option<u32>] {
        &self.assignment
    }

    pub fn into_assignment(self) -> Vec<Option<u32>> {
        self.assignment
    }

    pub fn center_of(&self, cell: usize) -> Option<usize> {
        self.assignment[cell].map(|c| c as usize)
    }

    pub fn loads(&self) -> &[usize] {
        &self.loads
    }

    pub fn unclaimed_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_none()).count()
    }

    pub fn claimed_count(&self) -> usize {
        self.grid.cell_count() - self.unclaimed_count()
    }

    /// Distance from a cell's center to its assigned center, `+inf` if unclaimed.
    pub fn distance_of(&self, cell: usize) -> f64 {
        match self.assignment[cell] {
            None => f64::INFINITY,
            Some(c) => {
                let mut x = vec![0.0; self.grid.dim()];
                self.grid.cell_center_into(cell, &mut x);
                self.grid
                    .region()
                    .distance_coords(&x, self.centers.centers()[c as usize].coords())
            }
        }
    }

    /// All per-cell allocation distances, `+inf` for unclaimed cells.
    pub fn distances(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.grid.dim()];
        let region = self.grid.region();
        self.assignment
            .iter()
            .enumerate()
            .map(|(cell, a)| match a {
                None => f64::INFINITY,
                Some(c) => {
                    self.grid.cell_center_into(cell, &mut x);
                    region.distance_coords(&x, self.centers.centers()[*c as usize].coords())
                }
            })
            .collect()
    }

    /// True if both allocations refer to the same grid, centers and appetite.
    pub fn same_instance(&self, other: &Allocation<'_>) -> bool {
        (std::ptr::eq(self.grid, other.grid) || self.grid == other.grid)
            && (std::ptr::eq(self.centers, other.centers) || self.centers == other.centers)
            && self.quota == other.quota
    }
}

impl PartialEq for Allocation<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.same_instance(other) && self.assignment == other.assignment
    }
}
