//! Systematic grid scan and fusion of scattered readings into a haptic map.
//!
//! The scan visits a rows x cols pose grid row-major from the top-left,
//! takes one averaged sensor reading per pose, and tags every per-pin value
//! with its world position (pose + rest pin offset). Fusion runs exact GPR
//! over the samples; overlapping poses revisit nearly identical pin
//! positions, so near-duplicates are averaged away (within 1 mm) before the
//! solve, which also serves the noise-reduction role of the overlap.

use ndarray::Array2;
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::{GridSpec, HapticMap};
use crate::gpr::{GprHyper, GprModel};
use crate::sensor::TactileSimulator;
use crate::rng::subseed;

/// Pose grid of a systematic scan. `origin` is the top-left pose; rows step
/// in -y, columns in +x.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing_mm: f64,
    pub origin: [f64; 2],
}

impl ScanSpec {
    pub fn new(rows: usize, cols: usize, spacing_mm: f64, origin: [f64; 2]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("scan needs at least one row and column".into()));
        }
        if !(spacing_mm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scan spacing must be positive, got {spacing_mm}"
            )));
        }
        Ok(Self { rows, cols, spacing_mm, origin })
    }

    /// Scan centered on a point.
    pub fn centered(rows: usize, cols: usize, spacing_mm: f64, center: [f64; 2]) -> Result<Self> {
        let origin = [
            center[0] - (cols - 1) as f64 / 2.0 * spacing_mm,
            center[1] + (rows - 1) as f64 / 2.0 * spacing_mm,
        ];
        Self::new(rows, cols, spacing_mm, origin)
    }

    /// Default 9x9 grid spaced 10 mm, centered on the origin (80 mm square).
    pub fn default_grid() -> Self {
        Self::centered(9, 9, 10.0, [0.0, 0.0]).unwrap()
    }

    /// Poses row-major starting at the top-left.
    pub fn poses(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push([
                    self.origin[0] + c as f64 * self.spacing_mm,
                    self.origin[1] - r as f64 * self.spacing_mm,
                ]);
            }
        }
        out
    }

    /// Bounding box of the poses as (min, max).
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let min = [self.origin[0], self.origin[1] - (self.rows - 1) as f64 * self.spacing_mm];
        let max = [self.origin[0] + (self.cols - 1) as f64 * self.spacing_mm, self.origin[1]];
        (min, max)
    }
}

/// One world-frame sample: a pin's cell-area change at its world position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub pose_index: u32,
    pub pin_index: u32,
    pub position: [f64; 2],
    pub delta_area: f64,
}

/// Accumulated samples of a scan or exploration run.
#[derive(Debug, Clone, Default)]
pub struct ScanDataset {
    pub samples: Vec<Sample>,
}

impl ScanDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push_reading(&mut self, pose_index: u32, pose: [f64; 2], pins: &[[f64; 2]], delta: &[f64]) {
        for (pin_index, (offset, &da)) in pins.iter().zip(delta.iter()).enumerate() {
            self.samples.push(Sample {
                pose_index,
                pin_index: pin_index as u32,
                position: [pose[0] + offset[0], pose[1] + offset[1]],
                delta_area: da,
            });
        }
    }
}

/// Run the systematic scan: one reading per pose, poses in row-major order
/// from the top-left, per-pose seeds derived from `seed`.
pub fn grid_scan(sim: &TactileSimulator, spec: &ScanSpec, seed: u64) -> Result<ScanDataset> {
    let poses = spec.poses();
    let readings: Vec<_> = poses
        .par_iter()
        .enumerate()
        .map(|(i, &pose)| sim.read(pose, subseed(seed, i as u64)))
        .collect();

    let mut data = ScanDataset::default();
    let pins = sim.sensor.pins().positions().to_vec();
    for (i, reading) in readings.into_iter().enumerate() {
        match reading {
            Ok(feats) => data.push_reading(i as u32, poses[i], &pins, &feats.delta_area),
            Err(e) => return Err(Error::PoseOutOfField { index: i, source: Box::new(e) }),
        }
    }
    Ok(data)
}

/// Merge samples whose world positions fall in the same 1 mm bin, averaging
/// positions and values. Returns (positions, targets) in deterministic order.
pub fn thin_dataset(data: &ScanDataset, merge_radius_mm: f64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let r = merge_radius_mm.max(1e-9);
    let mut bins: BTreeMap<(i64, i64), ([f64; 2], f64, f64)> = BTreeMap::new();
    for s in &data.samples {
        let key = ((s.position[0] / r).round() as i64, (s.position[1] / r).round() as i64);
        let e = bins.entry(key).or_insert(([0.0, 0.0], 0.0, 0.0));
        e.0[0] += s.position[0];
        e.0[1] += s.position[1];
        e.1 += s.delta_area;
        e.2 += 1.0;
    }
    let mut positions = Vec::with_capacity(bins.len());
    let mut targets = Vec::with_capacity(bins.len());
    for (_, (psum, vsum, count)) in bins {
        positions.push([psum[0] / count, psum[1] / count]);
        targets.push(vsum / count);
    }
    (positions, targets)
}

/// Near-duplicate world positions are merged within this radius before the
/// exact GPR solve.
pub const THIN_RADIUS_MM: f64 = 1.0;

/// Default GPR hyperparameters for map fusion: length scale half the pose
/// overlap scale; noise matched to the measured reading noise of the default
/// sensor (30-frame average of 0.05 mm jitter).
pub const DEFAULT_LENGTH_SCALE_MM: f64 = 5.0;
pub const DEFAULT_READING_NOISE_MM2: f64 = 0.04;

/// Fit an exact GP to a dataset with explicit hyperparameters.
pub fn fit_gpr(data: &ScanDataset, hyper: &GprHyper) -> Result<GprModel> {
    let positions: Vec<[f64; 2]> = data.samples.iter().map(|s| s.position).collect();
    let targets: Vec<f64> = data.samples.iter().map(|s| s.delta_area).collect();
    GprModel::fit(&positions, &targets, hyper)
}

/// Posterior mean on `grid`, negatives clamped, normalized by the clamped
/// maximum (`raw_max`); an all-zero posterior is flagged with `raw_max = 0`.
pub fn predict_map(model: &GprModel, grid: &GridSpec) -> HapticMap {
    let mean = model.predict_grid(grid);
    normalize_map(grid.clone(), mean)
}

fn normalize_map(grid: GridSpec, mut mean: Array2<f64>) -> HapticMap {
    for v in mean.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let raw_max = mean.iter().cloned().fold(0.0, f64::max);
    if raw_max > 0.0 {
        mean.mapv_inplace(|v| v / raw_max);
    }
    HapticMap { grid, values: mean, raw_max }
}

/// Signal std to use when the caller asks for the data-driven default:
/// the standard deviation of the (thinned) targets.
fn data_std(targets: &[f64]) -> f64 {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

/// Fusion hyperparameters; `sigma_f = None` uses the thinned-data std.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionHyper {
    pub sigma_f: Option<f64>,
    pub length_scale_mm: f64,
    pub noise_sd: f64,
}

impl Default for FusionHyper {
    fn default() -> Self {
        Self {
            sigma_f: None,
            length_scale_mm: DEFAULT_LENGTH_SCALE_MM,
            noise_sd: DEFAULT_READING_NOISE_MM2,
        }
    }
}

/// Thin, fit and predict: the full fusion pipeline from raw samples to a
/// normalized map. All-zero datasets produce a flagged empty map without
/// fitting.
pub fn fuse_map(data: &ScanDataset, hyper: &FusionHyper, grid: &GridSpec) -> Result<(HapticMap, Option<GprModel>)> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let (positions, targets) = thin_dataset(data, THIN_RADIUS_MM);
    let sigma_f = match hyper.sigma_f {
        Some(v) => v,
        None => data_std(&targets),
    };
    if !(sigma_f > 0.0) {
        // Constant-zero data carries no signal; the posterior mean is zero.
        return Ok((normalize_map(grid.clone(), Array2::zeros((grid.ny, grid.nx))), None));
    }
    let gh = GprHyper { sigma_f, length_scale_mm: hyper.length_scale_mm, noise_sd: hyper.noise_sd };
    let model = GprModel::fit(&positions, &targets, &gh)?;
    Ok((predict_map(&model, grid), Some(model)))
}
