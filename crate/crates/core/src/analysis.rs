//! Phase statistics, allocation distances, territory geometry and demand.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::allocator::Allocation;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid::Appetite;

/// Relative change below which a tail-trend sequence counts as stabilized.
pub const DEFAULT_STABILIZATION_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Subcritical => "subcritical",
            Phase::Critical => "critical",
            Phase::Supercritical => "supercritical",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    /// Empirical intensity: centers per unit volume.
    pub intensity: f64,
    pub appetite: Appetite,
    pub quota: usize,
    pub centers: usize,
    pub cells: usize,
    pub unclaimed_fraction: f64,
    /// Mean over centers of `(quota - load) * cell_mass`; `None` without centers.
    pub mean_residual_appetite: Option<f64>,
    /// Decided by whole-cell capacity `centers * quota` against the cell count.
    pub phase: Phase,
    /// `intensity * residual - unclaimed - (intensity * alpha - 1)`, when defined.
    pub identity_residual: Option<f64>,
    /// Bound on `identity_residual` implied by rounding alpha to whole cells.
    pub quantization_tolerance: f64,
}

impl PhaseStats {
    pub fn identity_holds(&self) -> bool {
        match self.identity_residual {
            Some(r) => r.abs() <= self.quantization_tolerance,
            None => true,
        }
    }
}

pub fn phase_stats(alloc: &Allocation<'_>) -> PhaseStats {
    let grid = alloc.grid();
    let n = alloc.centers().len();
    let cells = grid.cell_count();
    let quota = alloc.quota();
    let mass = grid.cell_mass();
    let intensity = alloc.centers().intensity();
    let unclaimed_fraction = alloc.unclaimed_count() as f64 / cells as f64;
    let mean_residual_appetite = (n > 0).then(|| {
        let slack: usize = alloc.loads().iter().map(|&l| quota.saturating_sub(l)).sum();
        slack as f64 * mass / n as f64
    });
    let capacity = n.saturating_mul(quota);
    let phase = match capacity.cmp(&cells) {
        std::cmp::Ordering::Less => Phase::Subcritical,
        std::cmp::Ordering::Equal => Phase::Critical,
        std::cmp::Ordering::Greater => Phase::Supercritical,
    };
    let q = grid.quota_cells(alloc.appetite());
    let identity_residual = match (alloc.appetite(), mean_residual_appetite) {
        (Appetite::Finite(alpha), Some(u)) => {
            Some(intensity * u - unclaimed_fraction - (intensity * alpha - 1.0))
        }
        _ => None,
    };
    // rounding slack for the sums above, relative to the unit-sized terms
    let float_slack = 1e-9 * (1.0 + intensity * q.cells as f64 * mass);
    PhaseStats {
        intensity,
        appetite: alloc.appetite(),
        quota,
        centers: n,
        cells,
        unclaimed_fraction,
        mean_residual_appetite,
        phase,
        identity_residual,
        quantization_tolerance: intensity * q.quantization_error + float_slack,
    }
}

/// Per-cell allocation distances of one run, with the window's side length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSample {
    /// `volume^(1/d)`, the side of the window for a cube.
    pub window: f64,
    /// One entry per cell; `+inf` when unclaimed.
    pub distances: Vec<f64>,
}

impl DistanceSample {
    /// Mean of `X^p` over claimed cells, `None` if nothing is claimed.
    pub fn claimed_moment(&self, p: f64) -> Option<f64> {
        let (sum, count) = self
            .distances
            .iter()
            .filter(|d| d.is_finite())
            .fold((0.0, 0usize), |(s, c), &d| (s + d.powf(p), c + 1));
        (count > 0).then(|| sum / count as f64)
    }
}

pub fn distance_samples(alloc: &Allocation<'_>) -> DistanceSample {
    let region = alloc.grid().region();
    DistanceSample {
        window: region.volume().powf(1.0 / region.dim() as f64),
        distances: alloc.distances(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub window: f64,
    pub seeds: usize,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailTrend {
    pub exponent: f64,
    pub points: Vec<TrendPoint>,
    /// Means strictly increase with the window.
    pub increasing: bool,
    /// `|m_k - m_{k-1}| / m_{k-1}` for the two largest windows.
    pub last_relative_change: f64,
    pub threshold: f64,
    pub stabilized: bool,
}

/// Mean of `X^p` over claimed cells per window, averaged over seeds.
///
/// Samples are grouped by exact window value. Needs at least three windows
/// with at least five samples each, and a claimed cell in every sample.
pub fn tail_trend(samples: &[DistanceSample], exponent: f64, threshold: f64) -> Result<TailTrend> {
    if !exponent.is_finite() || exponent < 0.0 {
        return Err(Error::invalid(format!(
            "exponent must be finite and >= 0, got {exponent}"
        )));
    }
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::invalid(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for s in samples {
        if !(s.window > 0.0 && s.window.is_finite()) {
            return Err(Error::invalid(format!("bad window size {}", s.window)));
        }
        let m = s
            .claimed_moment(exponent)
            .ok_or_else(|| Error::invalid("sample has no claimed cells"))?;
        groups.entry(s.window.to_bits()).or_default().push(m);
    }
    if groups.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 window sizes, got {}",
            groups.len()
        )));
    }
    if let Some((w, v)) = groups.iter().find(|(_, v)| v.len() < 5) {
        return Err(Error::invalid(format!(
            "window {} has {} seeds, need at least 5",
            f64::from_bits(*w),
            v.len()
        )));
    }
    // positive f64 bit patterns sort like the values
    let points: Vec<TrendPoint> = groups
        .into_iter()
        .map(|(w, v)| {
            let (mean, std_error) = mean_and_std_error(&v);
            TrendPoint {
                window: f64::from_bits(w),
                seeds: v.len(),
                mean,
                std_error,
            }
        })
        .collect();
    let increasing = points.windows(2).all(|w| w[1].mean > w[0].mean);
    let k = points.len();
    let last_relative_change =
        (points[k - 1].mean - points[k - 2].mean).abs() / points[k - 2].mean.abs();
    Ok(TailTrend {
        exponent,
        increasing,
        stabilized: last_relative_change < threshold,
        last_relative_change,
        threshold,
        points,
    })
}

/// Sample mean and standard error of the mean (zero for one value).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adjacency {
    /// Cells sharing a face.
    #[default]
    Face,
    /// Cells sharing a face, edge or corner.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerritoryGeometry {
    pub center: usize,
    pub load: usize,
    /// Largest distance to a held cell; `None` for an empty territory.
    pub radius: Option<f64>,
    pub component_count: usize,
}

/// Radius, load and connected components of every territory.
pub fn territory_geometry(alloc: &Allocation<'_>, adjacency: Adjacency) -> Vec<TerritoryGeometry> {
    let n = alloc.centers().len();
    let mut radius: Vec<Option<f64>> = vec![None; n];
    for (cell, d) in alloc.distances().into_iter().enumerate() {
        if let Some(c) = alloc.center_of(cell) {
            let r = &mut radius[c];
            *r = Some(r.map_or(d, |r| r.max(d)));
        }
    }
    let components = component_counts(alloc, adjacency);
    (0..n)
        .map(|center| TerritoryGeometry {
            center,
            load: alloc.loads()[center],
            radius: radius[center],
            component_count: components[center],
        })
        .collect()
}

fn neighbor_offsets(dim: usize, adjacency: Adjacency) -> Vec<Vec<isize>> {
    match adjacency {
        Adjacency::Face => (0..dim)
            .flat_map(|axis| {
                [-1isize, 1].into_iter().map(move |s| {
                    let mut o = vec![0isize; dim];
                    o[axis] = s;
                    o
                })
            })
            .collect(),
        Adjacency::Full => {
            let mut out = vec![vec![]];
            for _ in 0..dim {
                out = out
                    .into_iter()
                    .flat_map(|o: Vec<isize>| {
                        (-1isize..=1).map(move |s| {
                            let mut o = o.clone();
                            o.push(s);
                            o
                        })
                    })
                    .collect();
            }
            out.retain(|o| o.iter().any(|&s| s != 0));
            out
        }
    }
}

fn component_counts(alloc: &Allocation<'_>, adjacency: Adjacency) -> Vec<usize> {
    let grid = alloc.grid();
    let dim = grid.dim();
    let torus = grid.region().is_torus();
    let res = grid.resolution();
    let offsets = neighbor_offsets(dim, adjacency);
    let mut counts = vec![0usize; alloc.centers().len()];
    let mut seen = vec![false; grid.cell_count()];
    let mut queue = VecDeque::new();
    let mut idx = vec![0usize; dim];
    let mut nb = vec![0usize; dim];
    for start in 0..grid.cell_count() {
        let Some(owner) = alloc.assignment()[start] else {
            continue;
        };
        if seen[start] {
            continue;
        }
        counts[owner as usize] += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(cell) = queue.pop_front() {
            grid.multi_index_into(cell, &mut idx);
            'offsets: for o in &offsets {
                for axis in 0..dim {
                    let m = res[axis] as isize;
                    let k = idx[axis] as isize + o[axis];
                    nb[axis] = if (0..m).contains(&k) {
                        k as usize
                    } else if torus {
                        k.rem_euclid(m) as usize
                    } else {
                        continue 'offsets;
                    };
                }
                let next = grid.linear_index(&nb);
                if !seen[next] && alloc.assignment()[next] == Some(owner) {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    counts
}

/// Number of distinct territories owning a cell whose center lies within
/// `radius` of `probe`.
pub fn probe_ball_territories(alloc: &Allocation<'_>, probe: &Point, radius: f64) -> Result<usize> {
    let grid = alloc.grid();
    if probe.dim() != grid.dim() {
        return Err(Error::invalid(format!(
            "probe has dimension {}, grid has {}",
            probe.dim(),
            grid.dim()
        )));
    }
    let mut hit = vec![false; alloc.centers().len()];
    let mut x = vec![0.0; grid.dim()];
    for cell in 0..grid.cell_count() {
        if let Some(c) = alloc.center_of(cell) {
            grid.cell_center_into(cell, &mut x);
            if grid.region().distance_coords(&x, probe.coords()) <= radius {
                hit[c] = true;
            }
        }
    }
    Ok(hit.into_iter().filter(|&h| h).count())
}

/// Cells held by `center` within distance `r` of it (closed ball).
pub fn load_within(alloc: &Allocation<'_>, center: usize, r: f64) -> usize {
    let p = alloc.centers().centers()[center].coords();
    let grid = alloc.grid();
    let mut x = vec![0.0; grid.dim()];
    (0..grid.cell_count())
        .filter(|&cell| {
            alloc.center_of(cell) == Some(center) && {
                grid.cell_center_into(cell, &mut x);
                grid.region().distance_coords(&x, p) <= r
            }
        })
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandReport {
    pub window: f64,
    /// Center nearest the probe; `None` without centers.
    pub center: Option<usize>,
    /// Mass of cells strictly preferring `center` to their own (unclaimed cells count).
    pub desire_volume: Option<f64>,
    /// Cell containing the probe.
    pub cell: usize,
    /// Centers that are unsated or hold a cell strictly farther than `cell` would be.
    pub covet_count: usize,
    pub unclaimed_mass: f64,
    pub unsated_centers: usize,
}

pub fn desire_volume(alloc: &Allocation<'_>, center: usize) -> f64 {
    let grid = alloc.grid();
    let p = alloc.centers().centers()[center].coords();
    let mut x = vec![0.0; grid.dim()];
    let desiring = alloc
        .distances()
        .into_iter()
        .enumerate()
        .filter(|&(cell, own)| {
            grid.cell_center_into(cell, &mut x);
            grid.region().distance_coords(&x, p) < own
        })
        .count();
    desiring as f64 * grid.cell_mass()
}

pub fn covet_count(alloc: &Allocation<'_>, cell: usize) -> usize {
    let grid = alloc.grid();
    let n = alloc.centers().len();
    let mut farthest = vec![f64::NEG_INFINITY; n];
    for (y, d) in alloc.distances().into_iter().enumerate() {
        if let Some(c) = alloc.center_of(y) {
            farthest[c] = farthest[c].max(d);
        }
    }
    let x = grid.cell_center(cell);
    (0..n)
        .filter(|&c| {
            alloc.loads()[c] < alloc.quota()
                || grid
                    .region()
                    .distance_coords(x.coords(), alloc.centers().centers()[c].coords())
                    < farthest[c]
        })
        .count()
}

/// Desire volume of the center nearest `probe` and covet count of the cell containing it.
pub fn demand_diagnostics(alloc: &Allocation<'_>, probe: &Point) -> Result<DemandReport> {
    let grid = alloc.grid();
    let region = grid.region();
    if probe.dim() != grid.dim() {
        return Err(Error::invalid(format!(
            "probe has dimension {}, grid has {}",
            probe.dim(),
            grid.dim()
        )));
    }
    let center = alloc
        .centers()
        .centers()
        .iter()
        .enumerate()
        .map(|(i, c)| (region.distance_coords(probe.coords(), c.coords()), i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, i)| i);
    let cell = grid.cell_containing(probe.coords());
    Ok(DemandReport {
        window: region.volume().powf(1.0 / region.dim() as f64),
        center,
        desire_volume: center.map(|c| desire_volume(alloc, c)),
        cell,
        covet_count: covet_count(alloc, cell),
        unclaimed_mass: alloc.unclaimed_count() as f64 * grid.cell_mass(),
        unsated_centers: alloc.loads().iter().filter(|&&l| l < alloc.quota()).count(),
    })
}
