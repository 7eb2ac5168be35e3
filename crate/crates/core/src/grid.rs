//! Discretization of Lebesgue measure into equal-mass cells.
//!
//! Cells are indexed row-major over the multi-index `(k_0, ..., k_{d-1})`
//! with the last axis varying fastest; cell `k` has its center at
//! `((k_i + 0.5) * L_i / m_i)_i`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{Point, Region};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    region: Region,
    resolution: Vec<usize>,
    cell_widths: Vec<f64>,
    strides: Vec<usize>,
    cell_count: usize,
    cell_mass: f64,
}

impl Grid {
    pub fn new(region: Region, resolution: Vec<usize>) -> Result<Self> {
        if resolution.len() != region.dim() {
            return Err(Error::invalid(format!(
                "resolution has {} entries, region has dimension {}",
                resolution.len(),
                region.dim()
            )));
        }
        if resolution.contains(&0) {
            return Err(Error::invalid("every resolution entry must be at least 1"));
        }
        let cell_count = resolution
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or_else(|| Error::invalid("grid has too many cells"))?;
        let mut strides = vec![1usize; resolution.len()];
        for axis in (0..resolution.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * resolution[axis + 1];
        }
        let cell_widths = region
            .sides()
            .iter()
            .zip(&resolution)
            .map(|(&l, &m)| l / m as f64)
            .collect();
        let cell_mass = region.volume() / cell_count as f64;
        Ok(Grid {
            region,
            resolution,
            cell_widths,
            strides,
            cell_count,
            cell_mass,
        })
    }

    /// A grid with `per_unit` cells per unit length along every axis.
    pub fn per_unit_length(region: Region, per_unit: usize) -> Result<Self> {
        let resolution = region
            .sides()
            .iter()
            .map(|&l| (l * per_unit as f64).round() as usize)
            .collect();
        Grid::new(region, resolution)
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub fn cell_mass(&self) -> f64 {
        self.cell_mass
    }

    pub fn cell_widths(&self) -> &[f64] {
        &self.cell_widths
    }

    pub fn total_mass(&self) -> f64 {
        self.cell_mass * self.cell_count as f64
    }

    #[inline]
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        self.multi_index_into(cell, &mut out);
        out
    }

    #[inline]
    pub fn multi_index_into(&self, cell: usize, out: &mut [usize]) {
        let mut rest = cell;
        for (axis, slot) in out.iter_mut().enumerate() {
            *slot = rest / self.strides[axis];
            rest %= self.strides[axis];
        }
    }

    #[inline]
    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    #[inline]
    pub fn cell_center_into(&self, cell: usize, out: &mut [f64]) {
        let mut rest = cell;
        for ((o, &stride), &width) in out.iter_mut().zip(&self.strides).zip(&self.cell_widths) {
            let k = rest / stride;
            rest %= stride;
            *o = (k as f64 + 0.5) * width;
        }
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        let mut coords = vec![0.0; self.dim()];
        self.cell_center_into(cell, &mut coords);
        Point::from_raw(coords)
    }

    /// Index of the cell containing `coords` (clamped into the grid).
    pub fn cell_containing(&self, coords: &[f64]) -> usize {
        coords
            .iter()
            .enumerate()
            .map(|(axis, &x)| {
                let m = self.resolution[axis];
                let k = (x / self.cell_widths[axis]).floor();
                let k = if k < 0.0 { 0 } else { (k as usize).min(m - 1) };
                k * self.strides[axis]
            })
            .sum()
    }

    /// Number of whole cells a center may hold for appetite `appetite`.
    pub fn quota_cells(&self, appetite: Appetite) -> Quota {
        match appetite {
            Appetite::Infinite => Quota {
                cells: self.cell_count,
                quantization_error: 0.0,
            },
            Appetite::Finite(alpha) => {
                let cells = (alpha / self.cell_mass).round();
                let cells = if cells.is_finite() {
                    (cells as usize).min(self.cell_count)
                } else {
                    self.cell_count
                };
                Quota {
                    cells,
                    quantization_error: (cells as f64 * self.cell_mass - alpha).abs(),
                }
            }
        }
    }

    /// The finite appetite whose quota is exactly `cells`.
    pub fn appetite_for_quota(&self, cells: usize) -> Appetite {
        Appetite::Finite(cells as f64 * self.cell_mass)
    }
}

/// Quantized appetite: whole cells per center.
///
/// Quotas above the cell count are capped, since no center can hold more.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quota {
    pub cells: usize,
    /// `|cells * cell_mass - alpha|`; at most `cell_mass / 2` unless capped.
    pub quantization_error: f64,
}

/// Maximum mass of sites a center may hold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Appetite {
    Finite(f64),
    Infinite,
}

impl Appetite {
    pub fn finite(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha >= 0.0 {
            Ok(Appetite::Finite(alpha))
        } else if alpha == f64::INFINITY {
            Ok(Appetite::Infinite)
        } else {
            Err(Error::invalid(format!(
                "appetite must be nonnegative, got {alpha}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Appetite::Finite(a) => a,
            Appetite::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Appetite::Infinite)
    }
}

impl fmt::Display for Appetite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Appetite::Finite(a) => write!(f, "{a:?}"),
            Appetite::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Appetite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinite") {
            return Ok(Appetite::Infinite);
        }
        let alpha = s
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("`{s}` is not an appetite")))?;
        Appetite::finite(alpha)
    }
}

impl Serialize for Appetite {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Appetite::Finite(a) => serializer.serialize_f64(*a),
            Appetite::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Appetite {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        let parsed = match Repr::deserialize(deserializer)? {
            Repr::Number(a) => Appetite::finite(a),
            Repr::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RegionKind;

    fn grid(sides: &[f64], res: &[usize]) -> Grid {
        Grid::new(Region::torus(sides.to_vec()).unwrap(), res.to_vec()).unwrap()
    }

    #[test]
    fn unit_square_4x4() {
        let g = grid(&[1.0, 1.0], &[4, 4]);
        assert_eq!(g.cell_count(), 16);
        assert_eq!(g.cell_mass(), 1.0 / 16.0);
        assert_eq!(g.cell_center(0).coords(), &[0.125, 0.125]);
        // last axis fastest
        assert_eq!(g.cell_center(1).coords(), &[0.125, 0.375]);
        assert_eq!(g.cell_center(4).coords(), &[0.375, 0.125]);
    }

    #[test]
    fn unit_circle_8_cells() {
        let g = grid(&[1.0], &[8]);
        let centers: Vec<f64> = (0..8).map(|i| g.cell_center(i).coords()[0]).collect();
        let expected: Vec<f64> = (0..8).map(|i| 0.0625 + 0.125 * i as f64).collect();
        assert_eq!(centers, expected);
    }

    #[test]
    fn mass_is_conserved() {
        let g = grid(&[2.0, 2.0], &[4, 4]);
        assert_eq!(g.cell_mass(), 0.25);
        assert!((g.total_mass() - 4.0).abs() <= f64::EPSILON * 4.0);
        let odd = grid(&[3.0, 7.0, 1.5], &[7, 3, 11]);
        assert!((odd.total_mass() - odd.region().volume()).abs() <= 1e-12 * odd.region().volume());
    }

    #[test]
    fn zero_resolution_is_rejected() {
        let r = Region::cube(RegionKind::Box, 2, 1.0).unwrap();
        assert!(Grid::new(r.clone(), vec![4, 0]).is_err());
        assert!(Grid::new(r, vec![4]).is_err());
    }

    #[test]
    fn refinement_quarters_cell_mass() {
        let coarse = grid(&[3.0, 5.0], &[6, 10]);
        let fine = grid(&[3.0, 5.0], &[12, 20]);
        assert_eq!(fine.cell_count(), 4 * coarse.cell_count());
        assert_eq!(fine.cell_mass() * 4.0, coarse.cell_mass());
    }

    #[test]
    fn quotas() {
        let g = grid(&[1.0, 1.0], &[4, 4]);
        assert_eq!(g.quota_cells(Appetite::Finite(0.0)).cells, 0);
        let q = g.quota_cells(Appetite::Finite(0.5));
        assert_eq!(q.cells, 8);
        assert_eq!(q.quantization_error, 0.0);
        assert_eq!(g.quota_cells(Appetite::Infinite).cells, 16);
        let q = g.quota_cells(Appetite::Finite(0.1));
        assert_eq!(q.cells, 2);
        assert!(q.quantization_error <= g.cell_mass() / 2.0);
    }

    #[test]
    fn quota_is_monotone() {
        let g = grid(&[3.0, 2.0], &[9, 7]);
        let mut last = 0;
        for i in 0..400 {
            let q = g.quota_cells(Appetite::Finite(i as f64 * 0.017)).cells;
            assert!(q >= last);
            last = q;
        }
    }

    #[test]
    fn critical_appetite_round_trips() {
        let g = grid(&[32.0, 32.0], &[512, 512]);
        for n in [1usize, 2, 4, 16, 1024, 4096] {
            let q = g.cell_count() / n;
            assert_eq!(g.quota_cells(g.appetite_for_quota(q)).cells, q);
        }
    }

    #[test]
    fn cell_containing_inverts_centers() {
        let g = grid(&[2.0, 3.0, 1.0], &[4, 5, 3]);
        for cell in 0..g.cell_count() {
            assert_eq!(g.cell_containing(g.cell_center(cell).coords()), cell);
            assert_eq!(g.linear_index(&g.multi_index(cell)), cell);
        }
    }

    #[test]
    fn appetite_parsing() {
        assert_eq!("inf".parse::<Appetite>().unwrap(), Appetite::Infinite);
        assert_eq!("0.5".parse::<Appetite>().unwrap(), Appetite::Finite(0.5));
        assert!("-1".parse::<Appetite>().is_err());
        let json = serde_json::to_string(&Appetite::Infinite).unwrap();
        assert_eq!(json, "\"inf\"");
        let back: Appetite = serde_json::from_str("1.2").unwrap();
        assert_eq!(back, Appetite::Finite(1.2));
    }
}
