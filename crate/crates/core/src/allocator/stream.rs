//! Lazily generated cells in increasing distance from one center.
//!
//! Cells are expanded in Chebyshev rings of grid offsets around the center's
//! home cell. Every cell in ring `k >= 1` is at least `(k - 1/2) * h_min` from
//! the center, so a buffered candidate closer than that bound can be released
//! before the ring is generated.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::grid::Grid;

/// Relative slack on ring bounds so float rounding can never release a cell
/// ahead of a strictly closer one.
const BOUND_SLACK: f64 = 1e-9;

pub(crate) struct CellStream<'g> {
    grid: &'g Grid,
    center: Vec<f64>,
    home: Vec<isize>,
    lo: Vec<isize>,
    hi: Vec<isize>,
    next_ring: isize,
    max_ring: isize,
    min_width: f64,
    buffer: BinaryHeap<Reverse<(u64, u32)>>,
    // scratch
    offset: Vec<isize>,
    ranges: Vec<(isize, isize)>,
    coords: Vec<f64>,
}

impl<'g> CellStream<'g> {
    pub(crate) fn new(grid: &'g Grid, center: &[f64]) -> Self {
        let dim = grid.dim();
        let torus = grid.region().is_torus();
        let home_cell = grid.cell_containing(center);
        let home: Vec<isize> = grid
            .multi_index(home_cell)
            .into_iter()
            .map(|k| k as isize)
            .collect();
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for (axis, &m) in grid.resolution().iter().enumerate() {
            let m = m as isize;
            if torus {
                // one representative offset per residue, |offset| <= m/2
                lo.push(-(m / 2));
                hi.push(-(m / 2) + m - 1);
            } else {
                lo.push(-home[axis]);
                hi.push(m - 1 - home[axis]);
            }
        }
        let max_ring = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| (-l).max(*h))
            .max()
            .unwrap_or(0);
        let min_width = grid
            .cell_widths()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        CellStream {
            grid,
            center: center.to_vec(),
            home,
            lo,
            hi,
            next_ring: 0,
            max_ring,
            min_width,
            buffer: BinaryHeap::new(),
            offset: vec![0; dim],
            ranges: vec![(0, 0); dim],
            coords: vec![0.0; dim],
        }
    }

    fn ring_bound(&self, ring: isize) -> f64 {
        if ring > self.max_ring {
            f64::INFINITY
        } else if ring == 0 {
            0.0
        } else {
            (ring as f64 - 0.5) * self.min_width * (1.0 - BOUND_SLACK)
        }
    }

    /// Next cell in (distance, cell index) order, skipping cells for which
    /// `skip` returns true. Skipped cells are never returned later.
    pub(crate) fn next_where(&mut self, skip: impl Fn(usize) -> bool) -> Option<(f64, usize)> {
        loop {
            let bound = self.ring_bound(self.next_ring);
            if let Some(&Reverse((bits, cell))) = self.buffer.peek() {
                let dist = f64::from_bits(bits);
                if dist < bound {
                    self.buffer.pop();
                    if skip(cell as usize) {
                        continue;
                    }
                    return Some((dist, cell as usize));
                }
            }
            if self.next_ring > self.max_ring {
                return None;
            }
            let ring = self.next_ring;
            self.next_ring += 1;
            self.expand(ring, &skip);
        }
    }

    pub(crate) fn next_cell(&mut self) -> Option<(f64, usize)> {
        self.next_where(|_| false)
    }

    fn expand(&mut self, k: isize, skip: &impl Fn(usize) -> bool) {
        let dim = self.home.len();
        for j in 0..dim {
            let signs: &[isize] = if k == 0 { &[0] } else { &[-k, k] };
            for &oj in signs {
                if oj < self.lo[j] || oj > self.hi[j] {
                    continue;
                }
                // axes before j stay strictly inside the ring so each offset
                // is produced exactly once
                let mut empty = false;
                for i in 0..dim {
                    let r = match i.cmp(&j) {
                        std::cmp::Ordering::Less => {
                            (self.lo[i].max(-(k - 1)), self.hi[i].min(k - 1))
                        }
                        std::cmp::Ordering::Equal => (oj, oj),
                        std::cmp::Ordering::Greater => (self.lo[i].max(-k), self.hi[i].min(k)),
                    };
                    empty |= r.0 > r.1;
                    self.ranges[i] = r;
                }
                if empty {
                    continue;
                }
                for i in 0..dim {
                    self.offset[i] = self.ranges[i].0;
                }
                'odometer: loop {
                    self.push_offset(skip);
                    let mut axis = dim;
                    while axis > 0 {
                        axis -= 1;
                        if self.offset[axis] < self.ranges[axis].1 {
                            self.offset[axis] += 1;
                            for a in axis + 1..dim {
                                self.offset[a] = self.ranges[a].0;
                            }
                            continue 'odometer;
                        }
                    }
                    break;
                }
            }
        }
    }

    fn push_offset(&mut self, skip: &impl Fn(usize) -> bool) {
        let res = self.grid.resolution();
        let strides = self.grid.strides();
        let mut cell = 0usize;
        for axis in 0..self.home.len() {
            let m = res[axis] as isize;
            let k = (self.home[axis] + self.offset[axis]).rem_euclid(m);
            cell += k as usize * strides[axis];
        }
        if skip(cell) {
            return;
        }
        self.grid.cell_center_into(cell, &mut self.coords);
        let dist = self
            .grid
            .region()
            .distance_coords(&self.coords, &self.center);
        self.buffer.push(Reverse((dist.to_bits(), cell as u32)));
    }
}
