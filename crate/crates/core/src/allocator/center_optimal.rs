use super::stream::CellStream;
use super::{check_instance, stage_limit, Allocation, PairKey, StageTrace};
use crate::error::{Error, Result};
use crate::grid::{Appetite, Grid};
use crate::sources::CenterSet;

/// Center-optimal deferred acceptance, run in synchronous stages.
pub fn allocate_center_optimal<'a>(
    grid: &'a Grid,
    centers: &'a CenterSet,
    appetite: Appetite,
) -> Result<Allocation<'a>> {
    center_optimal_with_trace(grid, centers, appetite).map(|(a, _)| a)
}

/// In each stage every center holding fewer than `quota` applications
/// extends them to its nearest cells that have not rejected it; every cell
/// keeps the nearest center applying to it and rejects the others. The run
/// ends at the first stage without rejections.
pub fn center_optimal_with_trace<'a>(
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

    let limit = stage_limit(grid, centers);
    // each center walks its cells in (distance, cell) order; a cell that
    // rejected a center is never applied to again, so the walk only advances
    let mut streams: Vec<CellStream<'_>> = centers
        .centers()
        .iter()
        .map(|p| CellStream::new(grid, p.coords()))
        .collect();
    let mut exhausted = vec![false; centers.len()];
    let mut held = vec![0usize; centers.len()];
    let mut application_radius = vec![0.0f64; centers.len()];
    let mut shortlisted: Vec<Option<PairKey>> = vec![None; cells];

    loop {
        trace.stages += 1;
        if trace.stages > limit {
            return Err(Error::StageLimit {
                procedure: "center-optimal",
                limit,
            });
        }

        let mut applications = Vec::new();
        for (c, stream) in streams.iter_mut().enumerate() {
            while held[c] < quota && !exhausted[c] {
                match stream.next_cell() {
                    Some((d, cell)) => {
                        held[c] += 1;
                        if d < application_radius[c] {
                            trace.radii_monotone = false;
                        }
                        application_radius[c] = d;
                        applications.push(PairKey::new(d, c as u32, cell as u32));
                    }
                    None => exhausted[c] = true,
                }
            }
        }

        let mut rejections = 0;
        for app in applications {
            let slot = &mut shortlisted[app.cell as usize];
            match *slot {
                None => *slot = Some(app),
                Some(current) => {
                    let loser = if app < current {
                        *slot = Some(app);
                        current
                    } else {
                        app
                    };
                    held[loser.center as usize] -= 1;
                    rejections += 1;
                }
            }
        }

        trace.rejections.push(rejections);
        if rejections == 0 {
            break;
        }
    }

    let assignment = shortlisted
        .into_iter()
        .map(|s| s.map(|k| k.center))
        .collect();
    let alloc = Allocation::from_assignment(grid, centers, appetite, assignment)?;
    Ok((alloc, trace))
}
