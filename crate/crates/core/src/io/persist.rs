use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocator::Allocation;
use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::grid::{Appetite, Grid};
use crate::sources::CenterSet;

/// Instance description stored next to an allocation CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationMeta {
    pub region: Region,
    pub resolution: Vec<usize>,
    pub appetite: Appetite,
    pub quota: usize,
    pub centers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// An allocation read back from disk, not yet tied to a grid and center set.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationRecord {
    pub meta: AllocationMeta,
    pub assignment: Vec<Option<u32>>,
}

impl AllocationRecord {
    /// Attaches the record to an instance, checking that it matches the sidecar.
    pub fn attach<'a>(self, grid: &'a Grid, centers: &'a CenterSet) -> Result<Allocation<'a>> {
        if grid.region() != &self.meta.region || grid.resolution() != self.meta.resolution {
            return Err(Error::invalid(
                "allocation was computed on a different grid",
            ));
        }
        if centers.len() != self.meta.centers {
            return Err(Error::invalid(format!(
                "allocation refers to {} centers, {} supplied",
                self.meta.centers,
                centers.len()
            )));
        }
        Allocation::from_assignment(grid, centers, self.meta.appetite, self.assignment)
    }
}

/// `allocation.csv` -> `allocation.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Serialize, Deserialize)]
struct Row {
    cell_index: usize,
    center_index: i64,
}

/// Writes `cell_index,center_index` rows (`-1` for unclaimed) and a JSON sidecar.
pub fn save_allocation(
    alloc: &Allocation<'_>,
    seed: Option<u64>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    for (cell, a) in alloc.assignment().iter().enumerate() {
        writer
            .serialize(Row {
                cell_index: cell,
                center_index: a.map_or(-1, i64::from),
            })
            .map_err(|e| Error::io(path, e.into()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;

    let meta = AllocationMeta {
        region: alloc.grid().region().clone(),
        resolution: alloc.grid().resolution().to_vec(),
        appetite: alloc.appetite(),
        quota: alloc.quota(),
        centers: alloc.centers().len(),
        seed,
    };
    let sidecar = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))
}

pub fn load_allocation(path: impl AsRef<Path>) -> Result<AllocationRecord> {
    let path = path.as_ref();
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let meta: AllocationMeta = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&sidecar, e.line() as u64, e.to_string()))?;
    let cells: usize = meta.resolution.iter().product();

    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut assignment = Vec::with_capacity(cells);
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        // header is line 1
        let line = i as u64 + 2;
        let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
        if row.cell_index != i {
            return Err(Error::parse(
                path,
                line,
                format!("expected cell_index {i}, found {}", row.cell_index),
            ));
        }
        let center = match row.center_index {
            -1 => None,
            c if c >= 0 && (c as usize) < meta.centers => Some(c as u32),
            c => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("center_index {c} out of range"),
                ))
            }
        };
        assignment.push(center);
    }
    if assignment.len() != cells {
        return Err(Error::parse(
            path,
            assignment.len() as u64 + 1,
            format!("expected {cells} rows, found {}", assignment.len()),
        ));
    }
    Ok(AllocationRecord { meta, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::{allocate, Algorithm};
    use crate::sources::sample_poisson;

    #[test]
    fn round_trip() {
        let region = Region::torus(vec![4.0, 4.0]).unwrap();
        let grid = Grid::new(region.clone(), vec![16, 16]).unwrap();
        let centers = sample_poisson(1.0, &region, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("allocation.csv");
        for appetite in [Appetite::Finite(0.5), Appetite::Infinite] {
            let a = allocate(Algorithm::Greedy, &grid, &centers, appetite).unwrap();
            save_allocation(&a, Some(5), &path).unwrap();
            let text = fs::read_to_string(&path).unwrap();
            assert!(text.starts_with("cell_index,center_index\n0,"));
            let back = load_allocation(&path).unwrap();
            assert_eq!(back.meta.seed, Some(5));
            assert_eq!(back.attach(&grid, &centers).unwrap(), a);
        }
    }

    #[test]
    fn rejects_mismatches() {
        let region = Region::torus(vec![1.0]).unwrap();
        let grid = Grid::new(region.clone(), vec![4]).unwrap();
        let centers =
            CenterSet::new(region.clone(), vec![region.point(vec![0.5]).unwrap()]).unwrap();
        let a = allocate(Algorithm::Greedy, &grid, &centers, Appetite::Finite(0.5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        save_allocation(&a, None, &path).unwrap();

        let other = Grid::new(region.clone(), vec![8]).unwrap();
        assert!(load_allocation(&path)
            .unwrap()
            .attach(&other, &centers)
            .is_err());

        fs::write(&path, "cell_index,center_index\n0,0\n1,3\n2,-1\n3,-1\n").unwrap();
        match load_allocation(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&path, "cell_index,center_index\n0,0\n").unwrap();
        assert!(load_allocation(&path).is_err());
    }
}
