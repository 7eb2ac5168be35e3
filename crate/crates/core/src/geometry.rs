//! Points, regions and the (optionally periodic) Euclidean metric.
//!
//! A [`Region`] is an axis-aligned box `[0, L_0) x ... x [0, L_{d-1})`, either
//! with free boundary or with periodic wrap (a flat torus). All distances in the
//! crate go through [`Region::distance_coords`], so every procedure sees the
//! exact same floating-point value for a given (site, center) pair.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Torus,
    Box,
}

impl fmt::Display for RegionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionKind::Torus => f.write_str("torus"),
            RegionKind::Box => f.write_str("box"),
        }
    }
}

impl std::str::FromStr for RegionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(RegionKind::Torus),
            "box" => Ok(RegionKind::Box),
            other => Err(Error::invalid(format!("unknown region kind `{other}`"))),
        }
    }
}

/// The ambient space: a torus or a box with the given side lengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionRepr", into = "RegionRepr")]
pub struct Region {
    kind: RegionKind,
    sides: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RegionRepr {
    kind: RegionKind,
    sides: Vec<f64>,
}

impl TryFrom<RegionRepr> for Region {
    type Error = Error;

    fn try_from(repr: RegionRepr) -> Result<Self> {
        Region::new(repr.kind, repr.sides)
    }
}

impl From<Region> for RegionRepr {
    fn from(region: Region) -> Self {
        RegionRepr {
            kind: region.kind,
            sides: region.sides,
        }
    }
}

impl Region {
    pub fn new(kind: RegionKind, sides: Vec<f64>) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::invalid("region needs at least one side length"));
        }
        if let Some(bad) = sides.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::invalid(format!(
                "side lengths must be positive and finite, got {bad}"
            )));
        }
        Ok(Region { kind, sides })
    }

    pub fn torus(sides: Vec<f64>) -> Result<Self> {
        Region::new(RegionKind::Torus, sides)
    }

    pub fn cube(kind: RegionKind, dim: usize, side: f64) -> Result<Self> {
        Region::new(kind, vec![side; dim])
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn is_torus(&self) -> bool {
        self.kind == RegionKind::Torus
    }

    pub fn sides(&self) -> &[f64] {
        &self.sides
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    /// Lebesgue measure of the region, the product of its sides.
    pub fn volume(&self) -> f64 {
        self.sides.iter().product()
    }

    /// Largest possible distance between two points of the region.
    pub fn diameter(&self) -> f64 {
        let norm = self.sides.iter().map(|s| s * s).sum::<f64>().sqrt();
        match self.kind {
            RegionKind::Torus => 0.5 * norm,
            RegionKind::Box => norm,
        }
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dim()
            && coords
                .iter()
                .zip(&self.sides)
                .all(|(&x, &l)| x.is_finite() && (0.0..l).contains(&x))
    }

    /// Builds a point, reducing coordinates modulo the sides on a torus.
    ///
    /// On a box, out-of-range coordinates are rejected.
    pub fn point(&self, coords: Vec<f64>) -> Result<Point> {
        if coords.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, region has dimension {}",
                coords.len(),
                self.dim()
            )));
        }
        let mut coords = coords;
        if self.is_torus() {
            for (x, &l) in coords.iter_mut().zip(&self.sides) {
                if !x.is_finite() {
                    return Err(Error::invalid("non-finite coordinate"));
                }
                *x = wrap(*x, l);
            }
        }
        if !self.contains(&coords) {
            return Err(Error::invalid(format!(
                "point {coords:?} lies outside the region"
            )));
        }
        Ok(Point { coords })
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        if p.dim() != self.dim() || q.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "dimension mismatch: points have {} and {} coordinates, region has {}",
                p.dim(),
                q.dim(),
                self.dim()
            )));
        }
        Ok(self.distance_coords(&p.coords, &q.coords))
    }

    /// Distance between two coordinate slices already known to lie in the region.
    #[inline]
    pub fn distance_coords(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.sides.len());
        debug_assert_eq!(b.len(), self.sides.len());
        let mut sum = 0.0;
        match self.kind {
            RegionKind::Box => {
                for (x, y) in a.iter().zip(b) {
                    let d = x - y;
                    sum += d * d;
                }
            }
            RegionKind::Torus => {
                for ((x, y), &l) in a.iter().zip(b).zip(&self.sides) {
                    let d = min_image(x - y, l);
                    sum += d * d;
                }
            }
        }
        sum.sqrt()
    }
}

/// Reduces a coordinate difference to `[-L/2, L/2]`.
#[inline]
fn min_image(d: f64, l: f64) -> f64 {
    let half = 0.5 * l;
    if d > half {
        d - l
    } else if d < -half {
        d + l
    } else {
        d
    }
}

fn wrap(x: f64, l: f64) -> f64 {
    let r = x.rem_euclid(l);
    // rem_euclid can round up to exactly l for tiny negative inputs
    if r >= l {
        0.0
    } else {
        r
    }
}

/// A point of the region, with coordinates in length units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    /// Wraps raw coordinates without validating them against a region.
    pub fn from_raw(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub(crate) fn bit_key(&self) -> Vec<u64> {
        self.coords.iter().map(|x| x.to_bits()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_torus(d: usize) -> Region {
        Region::cube(RegionKind::Torus, d, 1.0).unwrap()
    }

    #[test]
    fn one_dimensional_wrap() {
        let r = unit_torus(1);
        let p = r.point(vec![0.1]).unwrap();
        let q = r.point(vec![0.9]).unwrap();
        assert!((r.distance(&p, &q).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn maximal_offset_on_square_torus() {
        let r = unit_torus(2);
        let p = r.point(vec![0.0, 0.0]).unwrap();
        let q = r.point(vec![0.5, 0.5]).unwrap();
        let d = r.distance(&p, &q).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((d - r.diameter()).abs() < 1e-12);
    }

    #[test]
    fn identity_is_zero() {
        for kind in [RegionKind::Torus, RegionKind::Box] {
            let r = Region::new(kind, vec![2.0, 3.0, 5.0]).unwrap();
            let p = r.point(vec![1.5, 0.25, 4.75]).unwrap();
            assert_eq!(r.distance(&p, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn volumes() {
        assert_eq!(unit_torus(2).volume(), 1.0);
        assert_eq!(Region::torus(vec![2.0, 3.0]).unwrap().volume(), 6.0);
        assert_eq!(Region::torus(vec![4.0, 4.0, 4.0]).unwrap().volume(), 64.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let r = unit_torus(2);
        let p = Point::from_raw(vec![0.1]);
        let q = r.point(vec![0.2, 0.3]).unwrap();
        assert!(matches!(r.distance(&p, &q), Err(Error::InvalidInput(_))));
        assert!(r.point(vec![0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn torus_points_are_reduced() {
        let r = Region::torus(vec![2.0, 1.0]).unwrap();
        let p = r.point(vec![-0.5, 3.25]).unwrap();
        assert_eq!(p.coords(), &[1.5, 0.25]);
        let tiny = r.point(vec![-1e-300, 0.0]).unwrap();
        assert!(r.contains(tiny.coords()));
    }

    #[test]
    fn box_rejects_outside_points() {
        let r = Region::new(RegionKind::Box, vec![1.0, 1.0]).unwrap();
        assert!(r.point(vec![1.0, 0.5]).is_err());
        assert!(r.point(vec![-0.1, 0.5]).is_err());
    }

    #[test]
    fn invalid_sides() {
        assert!(Region::torus(vec![]).is_err());
        assert!(Region::torus(vec![1.0, 0.0]).is_err());
        assert!(Region::torus(vec![f64::NAN]).is_err());
    }

    fn triple(d: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        let c = proptest::collection::vec(0.0f64..1.0, d);
        (c.clone(), c.clone(), c)
    }

    proptest! {
        #[test]
        fn metric_on_random_triples(
            (a, b, c) in (1usize..4).prop_flat_map(triple),
            scale in 0.5f64..8.0,
        ) {
            let d = a.len();
            let scaled = |v: &[f64]| v.iter().map(|x| x * scale).collect::<Vec<_>>();
            let (a, b, c) = (scaled(&a), scaled(&b), scaled(&c));
            let torus = Region::cube(RegionKind::Torus, d, scale).unwrap();
            let boxed = Region::cube(RegionKind::Box, d, scale).unwrap();
            for r in [&torus, &boxed] {
                let ab = r.distance_coords(&a, &b);
                prop_assert_eq!(ab, r.distance_coords(&b, &a));
                prop_assert!(r.distance_coords(&a, &c) <= ab + r.distance_coords(&b, &c) + 1e-9);
                prop_assert_eq!(ab == 0.0, a == b);
            }
            let t = torus.distance_coords(&a, &b);
            prop_assert!(t <= boxed.distance_coords(&a, &b));
            prop_assert!(t <= torus.diameter() + 1e-12);
        }
    }
}
