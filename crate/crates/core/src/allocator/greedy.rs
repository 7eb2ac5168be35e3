use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::stream::CellStream;
use super::{check_instance, Allocation};
use crate::error::Result;
use crate::grid::{Appetite, Grid};
use crate::sources::CenterSet;

/// Sphere-growth allocation: pairs are taken in increasing
/// (distance, center, cell) order, and a pair is kept iff the cell is still
/// free and the center still below quota.
///
/// Each center contributes a lazily expanded stream of its free cells; a
/// priority queue merges the heads of all unsated centers' streams.
pub fn allocate_greedy<'a>(
    grid: &'a Grid,
    centers: &'a CenterSet,
    appetite: Appetite,
) -> Result<Allocation<'a>> {
    check_instance(grid, centers)?;
    let quota = grid.quota_cells(appetite).cells;
    let cells = grid.cell_count();
    let mut assignment: Vec<Option<u32>> = vec![None; cells];
    if quota == 0 || centers.is_empty() {
        return Allocation::from_assignment(grid, centers, appetite, assignment);
    }

    let mut streams: Vec<Option<CellStream<'_>>> = centers
        .centers()
        .iter()
        .map(|p| Some(CellStream::new(grid, p.coords())))
        .collect();
    let mut load = vec![0usize; centers.len()];
    let mut free = cells;
    let mut frontier = BinaryHeap::with_capacity(centers.len());
    for (c, stream) in streams.iter_mut().enumerate() {
        if let Some((d, cell)) = stream.as_mut().and_then(CellStream::next_cell) {
            frontier.push(Reverse((d.to_bits(), c as u32, cell as u32)));
        }
    }

    while let Some(Reverse((_, c, cell))) = frontier.pop() {
        let c = c as usize;
        let cell = cell as usize;
        if assignment[cell].is_none() {
            assignment[cell] = Some(c as u32);
            load[c] += 1;
            free -= 1;
            if free == 0 {
                break;
            }
        }
        if load[c] >= quota {
            streams[c] = None;
            continue;
        }
        let stream = streams[c]
            .as_mut()
            .expect("unsated center keeps its stream");
        if let Some((d, next)) = stream.next_where(|cell| assignment[cell].is_some()) {
            frontier.push(Reverse((d.to_bits(), c as u32, next as u32)));
        }
    }

    Allocation::from_assignment(grid, centers, appetite, assignment)
}
