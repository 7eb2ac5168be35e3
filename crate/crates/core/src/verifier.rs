//! Stability, validity and agreement checks written against the definitions.
//!
//! Nothing here reuses allocator logic: distances are recomputed from cell
//! centers and the desire/covet predicates are evaluated with strict
//! inequalities, so configurations that differ only by an exact tie are
//! never flagged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::Allocation;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sources::CenterSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesireReason {
    /// The center is strictly closer than the cell's current center.
    Closer,
    Unclaimed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovetReason {
    Unsated,
    /// The center holds a cell strictly farther than this one.
    HoldsFartherCell,
}

/// A (cell, center) pair where the cell desires the center and the center covets the cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnstablePair {
    pub cell: usize,
    pub center: usize,
    pub distance: f64,
    /// Distance to the cell's current center; `None` when unclaimed.
    pub current_distance: Option<f64>,
    pub desire: DesireReason,
    pub covet: CovetReason,
}

fn check_consistent(alloc: &Allocation<'_>) -> Result<()> {
    let grid = alloc.grid();
    if grid.region() != alloc.centers().region() {
        return Err(Error::invalid(
            "allocation mixes grid and centers from different regions",
        ));
    }
    if alloc.assignment().len() != grid.cell_count() {
        return Err(Error::invalid(
            "assignment length differs from the grid's cell count",
        ));
    }
    if alloc
        .assignment()
        .iter()
        .flatten()
        .any(|&c| c as usize >= alloc.centers().len())
    {
        return Err(Error::invalid(
            "assignment refers to a center that does not exist",
        ));
    }
    Ok(())
}

fn cell_distances(grid: &Grid, centers: &CenterSet, cell: usize, out: &mut Vec<f64>) {
    let x = grid.cell_center(cell);
    out.clear();
    out.extend(
        centers
            .centers()
            .iter()
            .map(|c| grid.region().distance_coords(x.coords(), c.coords())),
    );
}

/// Every unstable pair, sorted by (cell, center). Empty iff stable.
///
/// A center covets a cell iff it is below quota or the cell is strictly
/// closer than the farthest cell it holds, so one pass per center over its
/// territory suffices before the full cells x centers scan.
pub fn verify_stability(alloc: &Allocation<'_>) -> Result<Vec<UnstablePair>> {
    check_consistent(alloc)?;
    let grid = alloc.grid();
    let centers = alloc.centers();
    let n = centers.len();
    let quota = alloc.quota();

    let mut load = vec![0usize; n];
    let mut farthest = vec![f64::NEG_INFINITY; n];
    let mut current = vec![f64::INFINITY; grid.cell_count()];
    for (cell, a) in alloc.assignment().iter().enumerate() {
        if let Some(c) = *a {
            let c = c as usize;
            let x = grid.cell_center(cell);
            let d = grid
                .region()
                .distance_coords(x.coords(), centers.centers()[c].coords());
            load[c] += 1;
            farthest[c] = farthest[c].max(d);
            current[cell] = d;
        }
    }

    const CHUNK: usize = 1024;
    let mut pairs: Vec<UnstablePair> = (0..grid.cell_count())
        .into_par_iter()
        .chunks(CHUNK)
        .flat_map_iter(|chunk| {
            let mut dists = Vec::with_capacity(n);
            let mut found = Vec::new();
            for cell in chunk {
                cell_distances(grid, centers, cell, &mut dists);
                let own = alloc.assignment()[cell].map(|c| c as usize);
                for (c, &d) in dists.iter().enumerate() {
                    if own == Some(c) {
                        continue;
                    }
                    let desire = match own {
                        None => DesireReason::Unclaimed,
                        Some(_) if d < current[cell] => DesireReason::Closer,
                        Some(_) => continue,
                    };
                    let covet = if load[c] < quota {
                        CovetReason::Unsated
                    } else if d < farthest[c] {
                        CovetReason::HoldsFartherCell
                    } else {
                        continue;
                    };
                    found.push(UnstablePair {
                        cell,
                        center: c,
                        distance: d,
                        current_distance: own.map(|_| current[cell]),
                        desire,
                        covet,
                    });
                }
            }
            found
        })
        .collect();
    pairs.sort_by_key(|p| (p.cell, p.center));
    Ok(pairs)
}

/// The literal definition: a center covets a cell if it is unsated or some
/// cell of its territory is strictly farther. Quadratic in the territory
/// size; meant for cross-checking [`verify_stability`] on small instances.
pub fn verify_stability_naive(alloc: &Allocation<'_>) -> Result<Vec<UnstablePair>> {
    check_consistent(alloc)?;
    let grid = alloc.grid();
    let centers = alloc.centers();
    let region = grid.region();
    let dist = |cell: usize, c: usize| {
        region.distance_coords(
            grid.cell_center(cell).coords(),
            centers.centers()[c].coords(),
        )
    };
    let mut territory: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
    for (cell, a) in alloc.assignment().iter().enumerate() {
        if let Some(c) = *a {
            territory[c as usize].push(cell);
        }
    }
    let mut out = Vec::new();
    for (cell, a) in alloc.assignment().iter().enumerate() {
        for (c, held) in territory.iter().enumerate() {
            if *a == Some(c as u32) {
                continue;
            }
            let d = dist(cell, c);
            let desire = match a {
                None => DesireReason::Unclaimed,
                Some(own) if d < dist(cell, *own as usize) => DesireReason::Closer,
                Some(_) => continue,
            };
            let covet = if held.len() < alloc.quota() {
                CovetReason::Unsated
            } else if held.iter().any(|&y| d < dist(y, c)) {
                CovetReason::HoldsFartherCell
            } else {
                continue;
            };
            out.push(UnstablePair {
                cell,
                center: c,
                distance: d,
                current_distance: a.map(|own| dist(cell, own as usize)),
                desire,
                covet,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OverQuota {
        center: usize,
        load: usize,
        quota: usize,
    },
    AssignmentLength {
        expected: usize,
        actual: usize,
    },
    UnknownCenter {
        cell: usize,
        center: usize,
    },
    /// Unclaimed cells and unsated centers coexist.
    UnclaimedWithUnsated {
        unclaimed_cells: usize,
        unsated_centers: usize,
        example_cell: usize,
        example_center: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

/// Capacity, totality, and the exclusion of unclaimed cells alongside unsated centers.
pub fn validate(alloc: &Allocation<'_>) -> ValidationReport {
    let mut violations = Vec::new();
    let cells = alloc.grid().cell_count();
    let n = alloc.centers().len();
    let assignment = alloc.assignment();
    if assignment.len() != cells {
        violations.push(Violation::AssignmentLength {
            expected: cells,
            actual: assignment.len(),
        });
    }
    let mut load = vec![0usize; n];
    let mut first_unclaimed = None;
    let mut unclaimed = 0;
    for (cell, a) in assignment.iter().enumerate() {
        match *a {
            None => {
                unclaimed += 1;
                first_unclaimed.get_or_insert(cell);
            }
            Some(c) if (c as usize) < n => load[c as usize] += 1,
            Some(c) => violations.push(Violation::UnknownCenter {
                cell,
                center: c as usize,
            }),
        }
    }
    let quota = alloc.quota();
    for (center, &l) in load.iter().enumerate() {
        if l > quota {
            violations.push(Violation::OverQuota {
                center,
                load: l,
                quota,
            });
        }
    }
    let unsated: Vec<usize> = (0..n).filter(|&c| load[c] < quota).collect();
    if let (Some(cell), Some(&center)) = (first_unclaimed, unsated.first()) {
        violations.push(Violation::UnclaimedWithUnsated {
            unclaimed_cells: unclaimed,
            unsated_centers: unsated.len(),
            example_cell: cell,
            example_center: center,
        });
    }
    ValidationReport {
        passed: violations.is_empty(),
        violations,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    /// Cells assigned differently, ascending.
    pub cells: Vec<usize>,
    /// The subset of `cells` involved in an exact distance tie.
    pub tie_cells: Vec<usize>,
}

impl Disagreement {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn confined_to_ties(&self) -> bool {
        self.cells == self.tie_cells
    }
}

/// Cells where two allocations of the same instance differ.
///
/// A differing cell counts as tie-involved if it is equidistant from two
/// centers, or if one of its two candidate centers sees another cell at
/// exactly the same distance.
pub fn compare(a: &Allocation<'_>, b: &Allocation<'_>) -> Result<Disagreement> {
    if !a.same_instance(b) {
        return Err(Error::invalid("allocations belong to different instances"));
    }
    let grid = a.grid();
    let centers = a.centers();
    let cells: Vec<usize> = (0..grid.cell_count())
        .filter(|&cell| a.assignment()[cell] != b.assignment()[cell])
        .collect();
    if cells.is_empty() {
        return Ok(Disagreement::default());
    }
    let region = grid.region();
    let all_cells: Vec<_> = (0..grid.cell_count())
        .map(|c| grid.cell_center(c))
        .collect();
    let mut dists = Vec::new();
    let tie_cells = cells
        .iter()
        .copied()
        .filter(|&cell| {
            cell_distances(grid, centers, cell, &mut dists);
            let mut sorted = dists.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return true;
            }
            [a.assignment()[cell], b.assignment()[cell]]
                .into_iter()
                .flatten()
                .any(|c| {
                    let c = c as usize;
                    let p = centers.centers()[c].coords();
                    all_cells.iter().enumerate().any(|(y, yc)| {
                        y != cell && region.distance_coords(yc.coords(), p) == dists[c]
                    })
                })
        })
        .collect();
    Ok(Disagreement { cells, tie_cells })
}

/// Nearest center of every cell by brute force, ties to the lower index.
pub fn nearest_center_map(grid: &Grid, centers: &CenterSet) -> Vec<Option<u32>> {
    let mut dists = Vec::new();
    (0..grid.cell_count())
        .map(|cell| {
            cell_distances(grid, centers, cell, &mut dists);
            dists
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(&y.0)))
                .map(|(c, _)| c as u32)
        })
        .collect()
}
