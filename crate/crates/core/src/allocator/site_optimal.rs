use std::cmp::Ordering;

use super::{check_instance, stage_limit, Allocation, StageTrace};
use crate::error::{Error, Result};
use crate::grid::{Appetite, Grid};
use crate::sources::CenterSet;

/// Site-optimal deferred acceptance, run in synchronous stages.
pub fn allocate_site_optimal<'a>(
    grid: &'a Grid,
    centers: &'a CenterSet,
    appetite: Appetite,
) -> Result<Allocation<'a>> {
    site_optimal_with_trace(grid, centers, appetite).map(|(a, _)| a)
}

/// In each stage every cell without a shortlist applies to the nearest center
/// that has not yet rejected it; every center merges the new applicants with
/// its shortlist, keeps the `quota` nearest and rejects the rest. The run ends
/// at the first stage without rejections.
pub fn site_optimal_with_trace<'a>(
    grid: &'a Grid,
    centers: &'a CenterSet,
    appetite: Appetite,
) -> Result<(Allocation<'a>, StageTrace)> {
    check_instance(grid, centers)?;
    let quota = grid.quota_cells(appetite).cells;
    let cells = grid.cell_count();
    let mut trace = StageTrace {
        radii_monotone: true,
        ..StageTrace::default()
    };
    if quota == 0 || centers.is_empty() {
        let alloc = Allocation::from_assignment(grid, centers, appetite, vec![None; cells])?;
        return Ok((alloc, trace));
    }

    let region = grid.region();
    let points = centers.centers();
    let limit = stage_limit(grid, centers);
    // cell-side key (distance, center) of the last center each cell applied to
    let mut last: Vec<Option<(f64, u32)>> = vec![None; cells];
    // full preference lists, built on a cell's first rejection
    let mut prefs: Vec<Option<Vec<u32>>> = vec![None; cells];
    let mut cursor = vec![0usize; cells];
    let mut shortlist: Vec<Vec<(f64, u32)>> = vec![Vec::new(); centers.len()];
    let mut radius = vec![f64::INFINITY; centers.len()];
    let mut pending: Vec<usize> = (0..cells).collect();
    let mut x = vec![0.0; grid.dim()];

    loop {
        trace.stages += 1;
        if trace.stages > limit {
            return Err(Error::StageLimit {
                procedure: "site-optimal",
                limit,
            });
        }

        // (center, distance, cell)
        let mut applications: Vec<(u32, f64, u32)> = Vec::with_capacity(pending.len());
        for &cell in &pending {
            grid.cell_center_into(cell, &mut x);
            let next = match last[cell] {
                // first application: a plain scan for the nearest center
                None => points
                    .iter()
                    .enumerate()
                    .map(|(c, p)| (region.distance_coords(&x, p.coords()), c as u32))
                    .min_by(|a, b| cell_order(*a, *b)),
                // once rejected, the cell walks its full preference list
                Some(prev) => {
                    let list = prefs[cell].get_or_insert_with(|| {
                        let mut keys: Vec<(f64, u32)> = points
                            .iter()
                            .enumerate()
                            .map(|(c, p)| (region.distance_coords(&x, p.coords()), c as u32))
                            .collect();
                        keys.sort_by(|a, b| cell_order(*a, *b));
                        cursor[cell] = keys
                            .iter()
                            .position(|k| *k == prev)
                            .map_or(keys.len(), |i| i + 1);
                        keys.into_iter().map(|(_, c)| c).collect()
                    });
                    list.get(cursor[cell]).map(|&c| {
                        cursor[cell] += 1;
                        (region.distance_coords(&x, points[c as usize].coords()), c)
                    })
                }
            };
            // a cell rejected by every center stays unclaimed
            if let Some((d, c)) = next {
                last[cell] = Some((d, c));
                applications.push((c, d, cell as u32));
            }
        }
        applications.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut rejected = Vec::new();
        for group in applications.chunk_by(|a, b| a.0 == b.0) {
            let c = group[0].0 as usize;
            let held = std::mem::take(&mut shortlist[c]);
            let mut merged = Vec::with_capacity(held.len() + group.len());
            let mut incoming = group.iter().map(|&(_, d, cell)| (d, cell)).peekable();
            let mut kept = held.into_iter().peekable();
            loop {
                let take_held = match (kept.peek(), incoming.peek()) {
                    (Some(h), Some(i)) => center_order(*h, *i) == Ordering::Less,
                    (Some(_), None) => true,
                    (None, Some(_)) => false,
                    (None, None) => break,
                };
                merged.push(
                    if take_held {
                        kept.next()
                    } else {
                        incoming.next()
                    }
                    .unwrap(),
                );
            }
            if merged.len() >= quota {
                let r = merged[quota - 1].0;
                if r > radius[c] {
                    trace.radii_monotone = false;
                }
                radius[c] = r;
            }
            rejected.extend(
                merged
                    .drain(quota.min(merged.len())..)
                    .map(|(_, cell)| cell as usize),
            );
            shortlist[c] = merged;
        }

        trace.rejections.push(rejected.len());
        if rejected.is_empty() {
            break;
        }
        rejected.sort_unstable();
        pending = rejected;
    }

    let mut assignment = vec![None; cells];
    for (c, held) in shortlist.iter().enumerate() {
        for &(_, cell) in held {
            assignment[cell as usize] = Some(c as u32);
        }
    }
    let alloc = Allocation::from_assignment(grid, centers, appetite, assignment)?;
    Ok((alloc, trace))
}

/// A cell's preference: nearer center first, lower center index on ties.
fn cell_order(a: (f64, u32), b: (f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// A center's preference: nearer cell first, lower cell index on ties.
fn center_order(a: (f64, u32), b: (f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}
