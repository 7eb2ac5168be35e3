use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::Allocation;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderStyle {
    #[default]
    Flat,
    /// Alternating rings of two colors around each center.
    Annuli,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSpec {
    pub pixels_per_unit: f64,
    pub palette_seed: u64,
    pub style: RenderStyle,
    /// Ring width in length units, for [`RenderStyle::Annuli`].
    pub annulus_width: f64,
    pub unclaimed_color: [u8; 3],
    /// Side of the square center marker in pixels; 0 disables markers.
    pub marker_size: u32,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            pixels_per_unit: 16.0,
            palette_seed: 0,
            style: RenderStyle::Flat,
            annulus_width: 0.25,
            unclaimed_color: [255, 255, 255],
            marker_size: 3,
        }
    }
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.pixels_per_unit > 0.0 && self.pixels_per_unit.is_finite()) {
            return Err(Error::invalid("pixels per unit must be positive"));
        }
        if self.style == RenderStyle::Annuli
            && !(self.annulus_width > 0.0 && self.annulus_width.is_finite())
        {
            return Err(Error::invalid("annulus width must be positive"));
        }
        Ok(())
    }
}

const MARKER: [u8; 3] = [0, 0, 0];

/// Binary PPM of a planar allocation; the top row is the largest second coordinate.
pub fn render(alloc: &Allocation<'_>, spec: &RenderSpec) -> Result<Vec<u8>> {
    let grid = alloc.grid();
    let region = grid.region();
    if region.dim() != 2 {
        return Err(Error::UnsupportedDimension(region.dim()));
    }
    spec.validate()?;
    let ppu = spec.pixels_per_unit;
    let width = (region.sides()[0] * ppu).round() as usize;
    let height = (region.sides()[1] * ppu).round() as usize;
    if width == 0 || height == 0 {
        return Err(Error::invalid("image would have no pixels"));
    }

    // channels stay away from 0 and 255 so territories never match the
    // marker or the default unclaimed color
    let mut rng = ChaCha8Rng::seed_from_u64(spec.palette_seed);
    let palette: Vec<[[u8; 3]; 2]> = (0..alloc.centers().len())
        .map(|_| {
            let mut color = || [0; 3].map(|_: u8| rng.random_range(40u8..=215));
            [color(), color()]
        })
        .collect();

    let header = format!("P6\n{width} {height}\n255\n");
    let mut out = Vec::with_capacity(header.len() + 3 * width * height);
    out.extend_from_slice(header.as_bytes());
    let mut pixels = vec![spec.unclaimed_color; width * height];
    let (sx, sy) = (
        region.sides()[0] / width as f64,
        region.sides()[1] / height as f64,
    );
    for row in 0..height {
        let y = (height - 1 - row) as f64 * sy + 0.5 * sy;
        for col in 0..width {
            let p = [col as f64 * sx + 0.5 * sx, y];
            let cell = grid.cell_containing(&p);
            let Some(c) = alloc.center_of(cell) else {
                continue;
            };
            let shade = match spec.style {
                RenderStyle::Flat => 0,
                RenderStyle::Annuli => {
                    let d = region.distance_coords(&p, alloc.centers().centers()[c].coords());
                    (d / spec.annulus_width).floor() as usize % 2
                }
            };
            pixels[row * width + col] = palette[c][shade];
        }
    }

    let m = spec.marker_size as isize;
    for center in alloc.centers().centers() {
        let cx = (center.coords()[0] / sx).floor() as isize;
        let cy = (height as isize - 1) - (center.coords()[1] / sy).floor() as isize;
        for dy in -(m / 2)..m - m / 2 {
            for dx in -(m / 2)..m - m / 2 {
                let (mut x, mut y) = (cx + dx, cy + dy);
                if region.is_torus() {
                    x = x.rem_euclid(width as isize);
                    y = y.rem_euclid(height as isize);
                } else if !(0..width as isize).contains(&x) || !(0..height as isize).contains(&y) {
                    continue;
                }
                pixels[y as usize * width + x as usize] = MARKER;
            }
        }
    }
    out.extend(pixels.into_iter().flatten());
    Ok(out)
}

pub fn write_ppm(bytes: &[u8], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::allocator::{allocate, Algorithm};
    use crate::geometry::Region;
    use crate::grid::{Appetite, Grid};
    use crate::sources::{sample_poisson, CenterSet};

    fn body(bytes: &[u8]) -> &[u8] {
        // three newline-terminated header lines
        let mut seen = 0;
        let start = bytes
            .iter()
            .position(|&b| {
                seen += (b == b'\n') as usize;
                seen == 3
            })
            .unwrap();
        &bytes[start + 1..]
    }

    #[test]
    fn header_and_size() {
        let region = Region::torus(vec![1.0, 1.0]).unwrap();
        let grid = Grid::new(region.clone(), vec![4, 4]).unwrap();
        let centers =
            CenterSet::new(region.clone(), vec![region.point(vec![0.3, 0.6]).unwrap()]).unwrap();
        let a = allocate(Algorithm::Greedy, &grid, &centers, Appetite::Infinite).unwrap();
        let spec = RenderSpec {
            pixels_per_unit: 8.0,
            ..RenderSpec::default()
        };
        let img = render(&a, &spec).unwrap();
        assert!(img.starts_with(b"P6\n8 8\n255\n"));
        assert_eq!(img.len(), 11 + 8 * 8 * 3);

        let colors: BTreeSet<&[u8]> = body(&img).chunks(3).collect();
        assert_eq!(colors.len(), 2);
        assert!(colors.contains(&MARKER[..]));
        let markers = body(&img).chunks(3).filter(|c| *c == MARKER).count();
        assert_eq!(markers, 9);
    }

    #[test]
    fn palette_seed_changes_colors_only() {
        let region = Region::torus(vec![4.0, 4.0]).unwrap();
        let grid = Grid::new(region.clone(), vec![16, 16]).unwrap();
        let centers = sample_poisson(1.0, &region, 2).unwrap();
        let a = allocate(Algorithm::Greedy, &grid, &centers, Appetite::Finite(0.7)).unwrap();
        let s0 = RenderSpec {
            style: RenderStyle::Annuli,
            ..RenderSpec::default()
        };
        let s1 = RenderSpec {
            palette_seed: 1,
            ..s0.clone()
        };
        let (i0, i1) = (render(&a, &s0).unwrap(), render(&a, &s1).unwrap());
        assert_eq!(render(&a, &s0).unwrap(), i0);
        assert_ne!(i0, i1);
        // same partition of pixels: equal colors in one image iff equal in the other
        let p0: Vec<&[u8]> = body(&i0).chunks(3).collect();
        let p1: Vec<&[u8]> = body(&i1).chunks(3).collect();
        for i in (0..p0.len()).step_by(7) {
            for j in (0..p0.len()).step_by(13) {
                assert_eq!(p0[i] == p0[j], p1[i] == p1[j]);
            }
        }
    }

    #[test]
    fn other_dimensions_are_unsupported() {
        let region = Region::torus(vec![1.0]).unwrap();
        let grid = Grid::new(region.clone(), vec![4]).unwrap();
        let centers = CenterSet::empty(region);
        let a = allocate(Algorithm::Greedy, &grid, &centers, Appetite::Infinite).unwrap();
        assert!(matches!(
            render(&a, &RenderSpec::default()),
            Err(Error::UnsupportedDimension(1))
        ));
    }
}
