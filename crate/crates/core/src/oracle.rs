//! Brute-force reference for tiny instances.
//!
//! Works on an explicit cells x centers distance matrix and never touches the
//! geometry or allocator code: textbook deferred acceptance with quotas, and an
//! exhaustive search for every assignment that is stable under the strict
//! desire/covet inequalities.

use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_CELLS: usize = 16;
pub const MAX_CENTERS: usize = 5;

/// Which side proposes in deferred acceptance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proposer {
    Sites,
    Centers,
}

/// `assignment[cell]` is the center index, or `None` when unclaimed.
pub type TinyAssignment = Vec<Option<usize>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TinyRepr", into = "TinyRepr")]
pub struct TinyInstance {
    distances: Vec<Vec<f64>>,
    quotas: Vec<usize>,
    cell_prefs: Vec<Vec<usize>>,
    center_prefs: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct TinyRepr {
    distances: Vec<Vec<f64>>,
    quotas: Vec<usize>,
}

impl TryFrom<TinyRepr> for TinyInstance {
    type Error = Error;

    fn try_from(r: TinyRepr) -> Result<Self> {
        TinyInstance::new(r.distances, r.quotas)
    }
}

impl From<TinyInstance> for TinyRepr {
    fn from(t: TinyInstance) -> Self {
        TinyRepr {
            distances: t.distances,
            quotas: t.quotas,
        }
    }
}

impl TinyInstance {
    /// `distances[cell][center]`; `quotas[center]` in whole cells.
    pub fn new(distances: Vec<Vec<f64>>, quotas: Vec<usize>) -> Result<Self> {
        let cells = distances.len();
        let centers = quotas.len();
        if cells > MAX_CELLS || centers > MAX_CENTERS {
            return Err(Error::invalid(format!(
                "tiny instance limited to {MAX_CELLS} cells and {MAX_CENTERS} centers, \
                 got {cells} x {centers}"
            )));
        }
        if distances.iter().any(|row| row.len() != centers) {
            return Err(Error::invalid(
                "distance matrix rows must have one entry per center",
            ));
        }
        if distances
            .iter()
            .flatten()
            .any(|d| !(d.is_finite() && *d >= 0.0))
        {
            return Err(Error::invalid("distances must be finite and nonnegative"));
        }
        // ties broken by the other side's index
        let cell_prefs = distances
            .iter()
            .map(|row| {
                let mut order: Vec<usize> = (0..centers).collect();
                order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
                order
            })
            .collect();
        let center_prefs = (0..centers)
            .map(|c| {
                let mut order: Vec<usize> = (0..cells).collect();
                order.sort_by(|&a, &b| distances[a][c].total_cmp(&distances[b][c]).then(a.cmp(&b)));
                order
            })
            .collect();
        Ok(TinyInstance {
            distances,
            quotas,
            cell_prefs,
            center_prefs,
        })
    }

    pub fn with_uniform_quota(distances: Vec<Vec<f64>>, quota: usize) -> Result<Self> {
        let centers = distances.first().map_or(0, Vec::len);
        TinyInstance::new(distances, vec![quota; centers])
    }

    pub fn cells(&self) -> usize {
        self.distances.len()
    }

    pub fn centers(&self) -> usize {
        self.quotas.len()
    }

    pub fn distance(&self, cell: usize, center: usize) -> f64 {
        self.distances[cell][center]
    }

    pub fn quota(&self, center: usize) -> usize {
        self.quotas[center]
    }

    /// True when all matrix entries are pairwise distinct.
    pub fn is_tie_free(&self) -> bool {
        let mut all: Vec<f64> = self.distances.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all.windows(2).all(|w| w[0] != w[1])
    }

    fn cell_prefers(&self, cell: usize, a: usize, b: usize) -> bool {
        let row = &self.distances[cell];
        row[a].total_cmp(&row[b]).then(a.cmp(&b)) == Ordering::Less
    }

    fn center_prefers(&self, center: usize, a: usize, b: usize) -> bool {
        let (da, db) = (self.distances[a][center], self.distances[b][center]);
        da.total_cmp(&db).then(a.cmp(&b)) == Ordering::Less
    }

    /// Strict-inequality stability predicate over a complete assignment.
    pub fn is_stable(&self, assignment: &[Option<usize>]) -> bool {
        self.unstable_pairs(assignment).is_empty()
    }

    pub fn unstable_pairs(&self, assignment: &[Option<usize>]) -> Vec<(usize, usize)> {
        let mut load = vec![0usize; self.centers()];
        let mut farthest = vec![f64::NEG_INFINITY; self.centers()];
        for (cell, a) in assignment.iter().enumerate() {
            if let Some(c) = *a {
                load[c] += 1;
                farthest[c] = farthest[c].max(self.distances[cell][c]);
            }
        }
        let mut out = Vec::new();
        for (cell, a) in assignment.iter().enumerate() {
            for c in 0..self.centers() {
                if *a == Some(c) {
                    continue;
                }
                let d = self.distances[cell][c];
                let desires = a.is_none_or(|cur| d < self.distances[cell][cur]);
                let covets = load[c] < self.quotas[c] || d < farthest[c];
                if desires && covets {
                    out.push((cell, c));
                }
            }
        }
        out
    }
}

/// Deferred acceptance with quotas under the index-tie-broken preferences.
pub fn oracle_deferred_acceptance(inst: &TinyInstance, proposer: Proposer) -> TinyAssignment {
    match proposer {
        Proposer::Sites => sites_propose(inst),
        Proposer::Centers => centers_propose(inst),
    }
}

fn sites_propose(inst: &TinyInstance) -> TinyAssignment {
    let mut next = vec![0usize; inst.cells()];
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); inst.centers()];
    let mut free: VecDeque<usize> = (0..inst.cells()).collect();
    while let Some(cell) = free.pop_front() {
        if next[cell] == inst.centers() {
            continue;
        }
        let c = inst.cell_prefs[cell][next[cell]];
        next[cell] += 1;
        held[c].push(cell);
        if held[c].len() > inst.quotas[c] {
            let worst = (0..held[c].len())
                .max_by(|&i, &j| {
                    if inst.center_prefers(c, held[c][i], held[c][j]) {
                        Ordering::Less
                    } else {
                        Ordering::Greater
                    }
                })
                .unwrap();
            free.push_back(held[c].swap_remove(worst));
        }
    }
    let mut out = vec![None; inst.cells()];
    for (c, cells) in held.iter().enumerate() {
        for &cell in cells {
            out[cell] = Some(c);
        }
    }
    out
}

fn centers_propose(inst: &TinyInstance) -> TinyAssignment {
    let mut next = vec![0usize; inst.centers()];
    let mut load = vec![0usize; inst.centers()];
    let mut current: Vec<Option<usize>> = vec![None; inst.cells()];
    while let Some(c) =
        (0..inst.centers()).find(|&c| load[c] < inst.quotas[c] && next[c] < inst.cells())
    {
        let cell = inst.center_prefs[c][next[c]];
        next[c] += 1;
        match current[cell] {
            None => {
                current[cell] = Some(c);
                load[c] += 1;
            }
            Some(old) if inst.cell_prefers(cell, c, old) => {
                current[cell] = Some(c);
                load[c] += 1;
                load[old] -= 1;
            }
            Some(_) => {}
        }
    }
    current
}

/// Every assignment respecting the quotas that has no unstable pair, in
/// lexicographic order (with `None` before any center).
pub fn oracle_enumerate(inst: &TinyInstance) -> Vec<TinyAssignment> {
    let capacity: usize = inst.quotas.iter().sum();
    let mut search = Search {
        inst,
        target_claimed: capacity.min(inst.cells()),
        assignment: vec![None; inst.cells()],
        load: vec![0; inst.centers()],
        farthest: vec![f64::NEG_INFINITY; inst.centers()],
        claimed: 0,
        found: Vec::new(),
    };
    search.descend(0);
    search.found
}

struct Search<'a> {
    inst: &'a TinyInstance,
    // a stable assignment never has an unclaimed cell and an unsated center together
    target_claimed: usize,
    assignment: Vec<Option<usize>>,
    load: Vec<usize>,
    farthest: Vec<f64>,
    claimed: usize,
    found: Vec<TinyAssignment>,
}

impl Search<'_> {
    fn desires(&self, cell: usize, c: usize) -> bool {
        match self.assignment[cell] {
            None => true,
            Some(cur) => cur != c && self.inst.distances[cell][c] < self.inst.distances[cell][cur],
        }
    }

    fn descend(&mut self, cell: usize) {
        let inst = self.inst;
        if cell == inst.cells() {
            if self.claimed == self.target_claimed && inst.is_stable(&self.assignment) {
                self.found.push(self.assignment.clone());
            }
            return;
        }
        let remaining = inst.cells() - cell;
        // unclaimed option first
        if self.claimed + remaining > self.target_claimed {
            self.assignment[cell] = None;
            if self.placement_ok(cell) {
                self.descend(cell + 1);
            }
        }
        for c in 0..inst.centers() {
            if self.load[c] >= inst.quotas[c] || self.claimed >= self.target_claimed {
                continue;
            }
            self.assignment[cell] = Some(c);
            if !self.placement_ok(cell) {
                continue;
            }
            let d = inst.distances[cell][c];
            let saved = self.farthest[c];
            self.load[c] += 1;
            self.farthest[c] = saved.max(d);
            self.claimed += 1;
            self.descend(cell + 1);
            self.claimed -= 1;
            self.load[c] -= 1;
            self.farthest[c] = saved;
        }
        self.assignment[cell] = None;
    }

    /// Rejects a partial assignment once it already contains an unstable pair
    /// that no later placement can repair.
    fn placement_ok(&self, cell: usize) -> bool {
        let inst = self.inst;
        // the new cell desiring a center that already holds something farther
        for c in 0..inst.centers() {
            if self.desires(cell, c) && inst.distances[cell][c] < self.farthest[c] {
                return false;
            }
        }
        // an earlier cell desiring the new cell's center, which now holds a farther cell
        if let Some(c) = self.assignment[cell] {
            let d = inst.distances[cell][c];
            for y in 0..cell {
                if self.desires(y, c) && inst.distances[y][c] < d {
                    return false;
                }
            }
        }
        true
    }
}
