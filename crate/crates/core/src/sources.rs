//! Center sets: Poisson, fixed-count uniform, lattice, and CSV files.
//!
//! Every generator is a pure function of its arguments. Randomness comes from
//! `ChaCha8Rng::seed_from_u64(seed)`; Poisson counts use `rand_distr::Poisson`
//! and coordinates are drawn axis by axis as `u * L_i` with `u` uniform in
//! `[0, 1)`, each center's coordinates consumed in axis order.

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Region};

/// An ordered set of distinct centers in a region; a center's label is its index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterSet {
    region: Region,
    centers: Vec<Point>,
}

impl CenterSet {
    pub fn new(region: Region, centers: Vec<Point>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(centers.len());
        for (i, c) in centers.iter().enumerate() {
            if !region.contains(c.coords()) {
                return Err(Error::invalid(format!(
                    "center {i} at {:?} lies outside the region",
                    c.coords()
                )));
            }
            if !seen.insert(c.bit_key()) {
                return Err(Error::invalid(format!(
                    "center {i} at {:?} duplicates an earlier center",
                    c.coords()
                )));
            }
        }
        Ok(CenterSet { region, centers })
    }

    pub fn empty(region: Region) -> Self {
        CenterSet {
            region,
            centers: Vec::new(),
        }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn get(&self, index: usize) -> Option<&Point> {
        self.centers.get(index)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Empirical intensity `n / Vol(region)`.
    pub fn intensity(&self) -> f64 {
        self.centers.len() as f64 / self.region.volume()
    }

    /// A superset keeping the current labels and appending `extra` after them.
    pub fn with_additional(&self, extra: &[Point]) -> Result<CenterSet> {
        let mut centers = self.centers.clone();
        centers.extend_from_slice(extra);
        CenterSet::new(self.region.clone(), centers)
    }

    /// The first `n` centers.
    pub fn prefix(&self, n: usize) -> CenterSet {
        CenterSet {
            region: self.region.clone(),
            centers: self.centers[..n.min(self.len())].to_vec(),
        }
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_coord(rng: &mut impl Rng, side: f64) -> f64 {
    loop {
        let x = rng.random::<f64>() * side;
        if x < side {
            return x;
        }
    }
}

fn draw_distinct(region: &Region, count: usize, rng: &mut impl Rng) -> Vec<Point> {
    let mut seen = HashSet::with_capacity(count);
    let mut centers = Vec::with_capacity(count);
    while centers.len() < count {
        let coords: Vec<f64> = region
            .sides()
            .iter()
            .map(|&l| uniform_coord(rng, l))
            .collect();
        let p = Point::from_raw(coords);
        if seen.insert(p.bit_key()) {
            centers.push(p);
        }
    }
    centers
}

/// Homogeneous Poisson process of the given intensity, sampled by drawing the
/// count first and then independent uniform locations.
pub fn sample_poisson(intensity: f64, region: &Region, seed: u64) -> Result<CenterSet> {
    if !(intensity.is_finite() && intensity >= 0.0) {
        return Err(Error::invalid(format!(
            "intensity must be finite and nonnegative, got {intensity}"
        )));
    }
    let mean = intensity * region.volume();
    let mut rng = rng_for(seed);
    let count = if mean == 0.0 {
        0
    } else {
        let dist =
            Poisson::new(mean).map_err(|e| Error::invalid(format!("poisson mean {mean}: {e}")))?;
        dist.sample(&mut rng) as usize
    };
    let centers = draw_distinct(region, count, &mut rng);
    Ok(CenterSet {
        region: region.clone(),
        centers,
    })
}

/// Exactly `count` independent uniform centers (a Poisson process conditioned
/// on its count). Used for exactly critical experiments.
pub fn sample_uniform(count: usize, region: &Region, seed: u64) -> CenterSet {
    let mut rng = rng_for(seed);
    let centers = draw_distinct(region, count, &mut rng);
    CenterSet {
        region: region.clone(),
        centers,
    }
}

/// One center per lattice cell: the cell corner plus a uniform offset in
/// `[-jitter, jitter]^d`. Offsets wrap on a torus and reflect at the lower
/// wall of a box. With `jitter == 0` the seed is never consulted.
pub fn sample_lattice(region: &Region, spacing: f64, jitter: f64, seed: u64) -> Result<CenterSet> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::invalid(format!(
            "lattice spacing must be positive, got {spacing}"
        )));
    }
    if !(jitter.is_finite() && jitter >= 0.0 && jitter < spacing / 2.0) {
        return Err(Error::invalid(format!(
            "jitter must lie in [0, spacing/2), got {jitter}"
        )));
    }
    let mut counts = Vec::with_capacity(region.dim());
    for &side in region.sides() {
        let k = (side / spacing).round();
        if k < 1.0 || (k * spacing - side).abs() > 1e-9 * side {
            return Err(Error::invalid(format!(
                "side {side} is not an integer multiple of spacing {spacing}"
            )));
        }
        counts.push(k as usize);
    }
    let total: usize = counts.iter().product();
    let mut rng = rng_for(seed);
    let mut seen = HashSet::with_capacity(total);
    let mut centers = Vec::with_capacity(total);
    let mut index = vec![0usize; counts.len()];
    for _ in 0..total {
        loop {
            let coords: Vec<f64> = index
                .iter()
                .zip(region.sides())
                .map(|(&k, &side)| {
                    let corner = k as f64 * spacing;
                    if jitter == 0.0 {
                        return corner;
                    }
                    let x = corner + rng.random_range(-jitter..=jitter);
                    if region.is_torus() {
                        x.rem_euclid(side) % side
                    } else {
                        x.abs().min(side * (1.0 - f64::EPSILON))
                    }
                })
                .collect();
            let p = Point::from_raw(coords);
            if seen.insert(p.bit_key()) {
                centers.push(p);
                break;
            }
        }
        // row-major odometer, last axis fastest
        for axis in (0..counts.len()).rev() {
            index[axis] += 1;
            if index[axis] < counts[axis] {
                break;
            }
            index[axis] = 0;
        }
    }
    CenterSet::new(region.clone(), centers)
}

fn header_for(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("x{i}")).collect()
}

/// Writes `x0,...,x{d-1}` followed by one row per center. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn save_centers(cs: &CenterSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::io(path, e.into());
    writer
        .write_record(header_for(cs.region.dim()))
        .map_err(csv_err)?;
    for c in &cs.centers {
        writer
            .write_record(c.coords().iter().map(|x| format!("{x:?}")))
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_centers(path: impl AsRef<Path>, region: &Region) -> Result<CenterSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let expected = header_for(region.dim());
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut seen = HashSet::new();
    let mut centers = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let coords = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, line, format!("`{field}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if !region.contains(&coords) {
            return Err(Error::parse(
                path,
                line,
                format!("center {coords:?} lies outside the region"),
            ));
        }
        let p = Point::from_raw(coords);
        if !seen.insert(p.bit_key()) {
            return Err(Error::parse(path, line, "duplicate center"));
        }
        centers.push(p);
    }
    Ok(CenterSet {
        region: region.clone(),
        centers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RegionKind;
    use std::io::Write;

    fn square(side: f64) -> Region {
        Region::cube(RegionKind::Torus, 2, side).unwrap()
    }

    #[test]
    fn zero_intensity_is_empty() {
        let cs = sample_poisson(0.0, &square(8.0), 7).unwrap();
        assert!(cs.is_empty());
    }

    #[test]
    fn negative_intensity_is_rejected() {
        assert!(matches!(
            sample_poisson(-1.0, &square(1.0), 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn poisson_is_deterministic() {
        let r = square(8.0);
        let a = sample_poisson(1.0, &r, 42).unwrap();
        let b = sample_poisson(1.0, &r, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_poisson(1.0, &r, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_mean_count() {
        // Poisson(64): sd 8, so the mean of 1000 draws has sd ~0.25.
        let r = square(8.0);
        let total: usize = (0..1000)
            .map(|seed| sample_poisson(1.0, &r, seed).unwrap().len())
            .sum();
        let mean = total as f64 / 1000.0;
        assert!((62.5..=65.5).contains(&mean), "mean count {mean}");
    }

    #[test]
    fn poisson_counts_spread_evenly_over_quadrants() {
        // Pooled over seeds, the four quadrant counts should be multinomial
        // with equal cell probabilities; chi-square with 3 dof, p = 0.001 cutoff.
        let r = square(8.0);
        let mut counts = [0f64; 4];
        for seed in 0..200 {
            for c in sample_poisson(1.0, &r, seed).unwrap().centers() {
                let q = (c.coords()[0] >= 4.0) as usize * 2 + (c.coords()[1] >= 4.0) as usize;
                counts[q] += 1.0;
            }
        }
        let expected = counts.iter().sum::<f64>() / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|c| (c - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn uniform_has_exact_count() {
        let cs = sample_uniform(37, &square(3.0), 1);
        assert_eq!(cs.len(), 37);
        assert!(cs
            .centers()
            .iter()
            .all(|c| cs.region().contains(c.coords())));
    }

    #[test]
    fn exact_lattice() {
        let cs = sample_lattice(&square(1.0), 0.5, 0.0, 9).unwrap();
        let coords: Vec<_> = cs.centers().iter().map(|c| c.coords().to_vec()).collect();
        assert_eq!(
            coords,
            vec![
                vec![0.0, 0.0],
                vec![0.0, 0.5],
                vec![0.5, 0.0],
                vec![0.5, 0.5]
            ]
        );
        let other = sample_lattice(&square(1.0), 0.5, 0.0, 1234).unwrap();
        assert_eq!(cs, other);
    }

    #[test]
    fn lattice_on_a_line() {
        let r = Region::torus(vec![4.0]).unwrap();
        let cs = sample_lattice(&r, 1.0, 0.0, 0).unwrap();
        assert_eq!(cs.len(), 4);
        assert_eq!(cs.intensity(), 1.0);
    }

    #[test]
    fn jittered_lattice_stays_inside() {
        let r = square(4.0);
        let cs = sample_lattice(&r, 1.0, 0.4, 5).unwrap();
        assert_eq!(cs.len(), 16);
        let again = sample_lattice(&r, 1.0, 0.4, 5).unwrap();
        assert_eq!(cs, again);
    }

    #[test]
    fn lattice_spacing_must_divide() {
        assert!(sample_lattice(&square(1.0), 0.3, 0.0, 0).is_err());
        assert!(sample_lattice(&square(1.0), 0.5, 0.25, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("centers.csv");
        let r = square(10.0);
        let cs = sample_poisson(1.0, &r, 3).unwrap();
        save_centers(&cs, &path).unwrap();
        let back = load_centers(&path, &r).unwrap();
        assert_eq!(cs, back);
    }

    #[test]
    fn csv_header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "x0,x1\n").unwrap();
        assert!(load_centers(&path, &square(1.0)).unwrap().is_empty());
    }

    #[test]
    fn csv_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "x0,x1\n0.1,0.2\n0.3,0.4\n1.5,0.2").unwrap();
        drop(f);
        match load_centers(&path, &square(1.0)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }

        std::fs::write(&path, "x0,x1\n0.1,0.2\n0.1,0.2\n").unwrap();
        assert!(matches!(
            load_centers(&path, &square(1.0)),
            Err(Error::Parse { line: 3, .. })
        ));

        std::fs::write(&path, "x0,x1\n0.1,abc\n").unwrap();
        assert!(matches!(
            load_centers(&path, &square(1.0)),
            Err(Error::Parse { line: 2, .. })
        ));

        std::fs::write(&path, "a,b\n").unwrap();
        assert!(matches!(
            load_centers(&path, &square(1.0)),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_centers_are_rejected() {
        let r = square(1.0);
        let p = r.point(vec![0.5, 0.5]).unwrap();
        assert!(CenterSet::new(r, vec![p.clone(), p]).is_err());
    }
}
