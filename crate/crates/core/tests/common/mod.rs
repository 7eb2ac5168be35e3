//! Helpers shared by the property tests and the acceptance runner.
#![allow(dead_code)]

use stable_alloc::oracle::TinyInstance;
use stable_alloc::{Allocation, CenterSet, Grid};

/// Sorted held distances per center.
pub fn held_distances(alloc: &Allocation<'_>) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); alloc.centers().len()];
    for (cell, d) in alloc.distances().into_iter().enumerate() {
        if let Some(c) = alloc.center_of(cell) {
            out[c].push(d);
        }
    }
    for v in &mut out {
        v.sort_by(f64::total_cmp);
    }
    out
}

/// Mass within distance `r` of the center as a step function: count of held
/// distances `<= r` (closed) or `< r` (open).
fn count(held: &[f64], r: f64, closed: bool) -> usize {
    held.partition_point(|&d| if closed { d <= r } else { d < r })
}

/// Radii at which either step function can change, plus the ends.
fn breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = a.iter().chain(b).copied().collect();
    r.push(0.0);
    r.push(f64::INFINITY);
    r
}

/// `within_r(a) >= within_r(b)` for every radius, open or closed balls.
pub fn load_dominates(a: &[f64], b: &[f64]) -> bool {
    breakpoints(a, b).into_iter().all(|r| {
        [true, false]
            .iter()
            .all(|&c| count(a, r, c) >= count(b, r, c))
    })
}

/// `q1 - within_r(h1) <= q2 - within_r(h2)` for every radius.
pub fn slack_ordered(q1: usize, h1: &[f64], q2: usize, h2: &[f64]) -> bool {
    breakpoints(h1, h2).into_iter().all(|r| {
        [true, false]
            .iter()
            .all(|&c| q1 as i64 - count(h1, r, c) as i64 <= q2 as i64 - count(h2, r, c) as i64)
    })
}

/// The same instance as an explicit distance matrix for the oracle.
pub fn tiny_instance(grid: &Grid, centers: &CenterSet, quota: usize) -> TinyInstance {
    let region = grid.region();
    let distances = (0..grid.cell_count())
        .map(|cell| {
            let mut x = vec![0.0; grid.dim()];
            grid.cell_center_into(cell, &mut x);
            centers
                .centers()
                .iter()
                .map(|c| region.distance_coords(&x, c.coords()))
                .collect()
        })
        .collect();
    TinyInstance::with_uniform_quota(distances, quota).expect("tiny instance within limits")
}

pub fn as_tiny(assignment: &[Option<u32>]) -> Vec<Option<usize>> {
    assignment.iter().map(|a| a.map(|c| c as usize)).collect()
}
