//! File formats: CSV for grids, datasets, features and trajectories; binary
//! 16-bit PGM (P5) for images.
//!
//! Grid CSV layout: one header line naming the columns, one line of grid
//! metadata, then `rows` lines of `cols` comma-separated values (row iy = 0
//! first, y increasing downwards in the file). Floats print with Rust's
//! shortest round-trip formatting, so identical data produces identical
//! bytes and parsing recovers exact values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::explore::{ActionBranch, TrajectoryStep};
use crate::field::{Field2D, GridSpec, HapticMap, IndentationField, PressureField};
use crate::mapping::{Sample, ScanDataset};
use crate::sensor::{TactileFrame, VoronoiFeatures};

const GRID_HEADER: &str = "origin_x_mm,origin_y_mm,spacing_mm,cols,rows";
const MAP_HEADER: &str = "origin_x_mm,origin_y_mm,spacing_mm,cols,rows,raw_max_mm2";

fn grid_csv_string(grid: &GridSpec, values: &Array2<f64>, raw_max: Option<f64>) -> String {
    let mut out = String::new();
    match raw_max {
        Some(m) => {
            out.push_str(MAP_HEADER);
            out.push('\n');
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                grid.origin[0], grid.origin[1], grid.spacing, grid.nx, grid.ny, m
            );
        }
        None => {
            out.push_str(GRID_HEADER);
            out.push('\n');
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                grid.origin[0], grid.origin[1], grid.spacing, grid.nx, grid.ny
            );
        }
    }
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            if ix > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", values[[iy, ix]]);
        }
        out.push('\n');
    }
    out
}

pub fn write_pressure_csv(path: &Path, field: &PressureField) -> Result<()> {
    fs::write(path, grid_csv_string(&field.grid, &field.values, None))?;
    Ok(())
}

pub fn write_indentation_csv(path: &Path, field: &IndentationField) -> Result<()> {
    fs::write(path, grid_csv_string(&field.grid, &field.values, None))?;
    Ok(())
}

pub fn write_map_csv(path: &Path, map: &HapticMap) -> Result<()> {
    fs::write(path, grid_csv_string(&map.grid, &map.values, Some(map.raw_max)))?;
    Ok(())
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { context: path.display().to_string(), message: message.into() }
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| parse_err(path, format!("bad float '{s}': {e}")))
}

/// Parse a grid CSV; returns the grid, values and raw_max when present.
pub fn read_grid_csv(path: &Path) -> Result<(GridSpec, Array2<f64>, Option<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(path, "empty file"))?;
    let has_raw_max = match header.trim() {
        h if h == MAP_HEADER => true,
        h if h == GRID_HEADER => false,
        other => return Err(parse_err(path, format!("unrecognized header '{other}'"))),
    };
    let meta = lines.next().ok_or_else(|| parse_err(path, "missing metadata line"))?;
    let fields: Vec<&str> = meta.split(',').collect();
    let expect = if has_raw_max { 6 } else { 5 };
    if fields.len() != expect {
        return Err(parse_err(path, format!("expected {expect} metadata fields, got {}", fields.len())));
    }
    let origin = [parse_f64(path, fields[0])?, parse_f64(path, fields[1])?];
    let spacing = parse_f64(path, fields[2])?;
    let nx = parse_f64(path, fields[3])? as usize;
    let ny = parse_f64(path, fields[4])? as usize;
    let raw_max = if has_raw_max { Some(parse_f64(path, fields[5])?) } else { None };
    let grid = GridSpec::new(origin, spacing, nx, ny)
        .map_err(|e| parse_err(path, format!("bad grid: {e}")))?;

    let mut values = Array2::zeros((ny, nx));
    for iy in 0..ny {
        let line = lines.next().ok_or_else(|| parse_err(path, format!("missing data row {iy}")))?;
        let mut ix = 0;
        for cell in line.split(',') {
            if ix >= nx {
                return Err(parse_err(path, format!("row {iy} has more than {nx} columns")));
            }
            values[[iy, ix]] = parse_f64(path, cell)?;
            ix += 1;
        }
        if ix != nx {
            return Err(parse_err(path, format!("row {iy} has {ix} columns, expected {nx}")));
        }
    }
    Ok((grid, values, raw_max))
}

pub fn read_map_csv(path: &Path) -> Result<HapticMap> {
    let (grid, values, raw_max) = read_grid_csv(path)?;
    Ok(HapticMap { grid, values, raw_max: raw_max.unwrap_or(0.0) })
}

pub fn read_pressure_csv(path: &Path) -> Result<PressureField> {
    let (grid, values, _) = read_grid_csv(path)?;
    Ok(PressureField { grid, values })
}

/// Binary 16-bit PGM (P5), values scaled so the field maximum maps to 65535.
/// The image is written top row = maximum y, matching image conventions.
pub fn write_pgm(path: &Path, field: &impl Field2D) -> Result<()> {
    let grid = field.grid();
    let values = field.values();
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    let mut bytes = format!("P5\n{} {}\n65535\n", grid.nx, grid.ny).into_bytes();
    bytes.reserve(grid.nx * grid.ny * 2);
    for iy in (0..grid.ny).rev() {
        for ix in 0..grid.nx {
            let v = (values[[iy, ix]].max(0.0) * scale).round().clamp(0.0, 65535.0) as u16;
            bytes.extend_from_slice(&v.to_be_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

const DATASET_HEADER: &str = "pose_index,pin_index,world_x_mm,world_y_mm,delta_area_mm2";

pub fn write_dataset_csv(path: &Path, data: &ScanDataset) -> Result<()> {
    let mut out = String::from(DATASET_HEADER);
    out.push('\n');
    for s in &data.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.pose_index, s.pin_index, s.position[0], s.position[1], s.delta_area
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<ScanDataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == DATASET_HEADER => {}
        other => return Err(parse_err(path, format!("unrecognized header {other:?}"))),
    }
    let mut samples = Vec::new();
    for (ln, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(parse_err(path, format!("line {}: expected 5 fields", ln + 2)));
        }
        samples.push(Sample {
            pose_index: parse_f64(path, f[0])? as u32,
            pin_index: parse_f64(path, f[1])? as u32,
            position: [parse_f64(path, f[2])?, parse_f64(path, f[3])?],
            delta_area: parse_f64(path, f[4])?,
        });
    }
    Ok(ScanDataset { samples })
}

/// Frame + features CSV: pin index, rest x/y, deformed x/y, delta area.
pub fn write_features_csv(path: &Path, frame: &TactileFrame, features: &VoronoiFeatures) -> Result<()> {
    let mut out = String::from(
        "pin_index,rest_x_mm,rest_y_mm,deformed_x_mm,deformed_y_mm,delta_area_mm2\n",
    );
    for i in 0..frame.rest.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            i,
            frame.rest[i][0],
            frame.rest[i][1],
            frame.deformed[i][0],
            frame.deformed[i][1],
            features.delta_area[i]
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_trajectory_csv(path: &Path, steps: &[TrajectoryStep]) -> Result<()> {
    let mut out = String::from(
        "step,pose_x_mm,pose_y_mm,centroid_x_mm,centroid_y_mm,orientation_deg,move_x_mm,move_y_mm,branch\n",
    );
    for s in steps {
        let branch = match s.branch {
            ActionBranch::Chase => "chase",
            ActionBranch::Continue => "continue",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.step,
            s.pose[0],
            s.pose[1],
            s.centroid[0],
            s.centroid[1],
            s.orientation_deg,
            s.movement[0],
            s.movement[1],
            branch
        );
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn sample_map() -> HapticMap {
        let grid = GridSpec::new([-3.0, 2.0], 0.5, 7, 5).unwrap();
        let mut values = Array2::zeros((5, 7));
        for iy in 0..5 {
            for ix in 0..7 {
                values[[iy, ix]] = (iy * 7 + ix) as f64 * 0.137 + 1.0 / 3.0;
            }
        }
        HapticMap { grid, values, raw_max: 2.345678901234 }
    }

    #[test]
    fn map_csv_round_trips_exactly() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("map.csv");
        let map = sample_map();
        write_map_csv(&path, &map).unwrap();
        let back = read_map_csv(&path).unwrap();
        assert!(back.grid.same_lattice(&map.grid));
        assert_eq!(back.raw_max, map.raw_max);
        assert_eq!(back.values, map.values);
    }

    #[test]
    fn pressure_csv_round_trips() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("p.csv");
        let map = sample_map();
        let field = PressureField { grid: map.grid.clone(), values: map.values.clone() };
        write_pressure_csv(&path, &field).unwrap();
        let back = read_pressure_csv(&path).unwrap();
        assert_eq!(back.values, field.values);
    }

    #[test]
    fn identical_data_writes_identical_bytes() {
        let dir = TempDir::new().unwrap();
        let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        let map = sample_map();
        write_map_csv(&p1, &map).unwrap();
        write_map_csv(&p2, &map).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn pgm_has_p5_header_and_size() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("m.pgm");
        let map = sample_map();
        write_pgm(&path, &map).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"P5\n7 5\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 7 * 5 * 2);
        // Max value maps to 65535 big-endian.
        let mut found = false;
        for px in bytes[header.len()..].chunks(2) {
            if u16::from_be_bytes([px[0], px[1]]) == 65535 {
                found = true;
            }
        }
        assert!(found);
    }

    #[test]
    fn dataset_csv_round_trips() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("d.csv");
        let data = ScanDataset {
            samples: vec![
                Sample { pose_index: 0, pin_index: 1, position: [1.5, -2.25], delta_area: 0.125 },
                Sample { pose_index: 3, pin_index: 126, position: [0.1, 0.2], delta_area: -0.5 },
            ],
        };
        write_dataset_csv(&path, &data).unwrap();
        let back = read_dataset_csv(&path).unwrap();
        assert_eq!(back.samples, data.samples);
    }

    #[test]
    fn bad_header_is_a_parse_error() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "nonsense\n1,2,3\n").unwrap();
        assert!(matches!(read_map_csv(&path), Err(Error::Parse { .. })));
    }
}
