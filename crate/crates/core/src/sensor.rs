//! Virtual pin-array tactile sensor.
//!
//! 127 marker-tipped pins sit on a centered hexagonal lattice (6 rings, 3 mm
//! pitch) inside a 40 mm diameter disc. Indentation shears the markers:
//! each marker moves by `u = -beta * grad z` at its world position, so cell
//! areas grow where the skin is pressed in (positive divergence at
//! indentation peaks). The per-pin signal is the change of its bounded
//! Voronoi cell area between rest and deformed states, averaged over a burst
//! of jittered frames.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::field::IndentationField;
use crate::rng::{seeded_rng, subseed};
use crate::voronoi::{bounded_cell_areas, DiscClip};

pub const PIN_COUNT: usize = 127;
pub const DISC_RADIUS_MM: f64 = 20.0;
pub const RING_PITCH_MM: f64 = 3.0;
const RING_COUNT: i32 = 6;

/// Calibrated pin lever gain, mm of marker travel per unit indentation
/// slope. Set end-to-end so the default unmodulated point stimulus yields a
/// fused-map peak of 3.77 mm^2 (see `calibration` test support).
pub const CALIBRATED_LEVER_GAIN_MM: f64 = 145.0;

/// Rest layout of the marker-tipped pins, sensor frame.
#[derive(Debug, Clone)]
pub struct PinArray {
    positions: Vec<[f64; 2]>,
    disc_radius: f64,
}

impl PinArray {
    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn disc_radius(&self) -> f64 {
        self.disc_radius
    }
}

/// Centered hexagonal lattice: a central pin plus 6 rings at 3 mm pitch,
/// 1 + 6 + 12 + ... + 36 = 127 pins, outermost ring at 18 mm.
pub fn pin_lattice() -> PinArray {
    let ax = [RING_PITCH_MM, 0.0];
    let ay = [RING_PITCH_MM / 2.0, RING_PITCH_MM * 3.0_f64.sqrt() / 2.0];
    let mut pins: Vec<(i32, f64, [f64; 2])> = Vec::with_capacity(PIN_COUNT);
    for q in -RING_COUNT..=RING_COUNT {
        for r in -RING_COUNT..=RING_COUNT {
            let ring = q.abs().max(r.abs()).max((q + r).abs());
            if ring > RING_COUNT {
                continue;
            }
            let p = [q as f64 * ax[0] + r as f64 * ay[0], r as f64 * ay[1]];
            let angle = p[1].atan2(p[0]);
            pins.push((ring, angle, p));
        }
    }
    pins.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
    let positions = pins.into_iter().map(|(_, _, p)| p).collect();
    PinArray { positions, disc_radius: DISC_RADIUS_MM }
}

/// Marker transduction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    /// Lever gain beta: marker displacement per unit indentation slope, mm.
    pub lever_gain_mm: f64,
    /// Isotropic marker position jitter per frame, mm.
    pub marker_jitter_mm: f64,
    /// Frames averaged per reading.
    pub frames_per_reading: u32,
}

impl SensorModel {
    pub fn new(lever_gain_mm: f64, marker_jitter_mm: f64, frames_per_reading: u32) -> Result<Self> {
        if !(lever_gain_mm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lever gain must be positive, got {lever_gain_mm}"
            )));
        }
        if !(marker_jitter_mm >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "marker jitter must be non-negative, got {marker_jitter_mm}"
            )));
        }
        if frames_per_reading == 0 {
            return Err(Error::InvalidParameter("frames per reading must be >= 1".into()));
        }
        Ok(Self { lever_gain_mm, marker_jitter_mm, frames_per_reading })
    }
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            lever_gain_mm: CALIBRATED_LEVER_GAIN_MM,
            marker_jitter_mm: 0.05,
            frames_per_reading: 30,
        }
    }
}

/// One captured frame: rest and deformed marker positions in sensor frame.
#[derive(Debug, Clone)]
pub struct TactileFrame {
    pub pose: [f64; 2],
    pub rest: Vec<[f64; 2]>,
    pub deformed: Vec<[f64; 2]>,
}

/// Per-pin Voronoi cell-area changes, mm^2.
#[derive(Debug, Clone)]
pub struct VoronoiFeatures {
    pub pose: [f64; 2],
    pub delta_area: Vec<f64>,
}

/// Pin array plus transduction model with precomputed rest-cell areas.
#[derive(Debug, Clone)]
pub struct TactileSensor {
    pins: PinArray,
    model: SensorModel,
    clip: DiscClip,
    rest_areas: Vec<f64>,
}

impl TactileSensor {
    pub fn new(pins: PinArray, model: SensorModel) -> Self {
        let clip = DiscClip::new(pins.disc_radius());
        let rest_areas = bounded_cell_areas(pins.positions(), &clip);
        Self { pins, model, clip, rest_areas }
    }

    pub fn pins(&self) -> &PinArray {
        &self.pins
    }

    pub fn model(&self) -> &SensorModel {
        &self.model
    }

    pub fn rest_areas(&self) -> &[f64] {
        &self.rest_areas
    }

    /// Check that the sensor disc (plus one interpolation cell) fits in the
    /// field grid at `pose`.
    fn check_inside(&self, z: &IndentationField, pose: [f64; 2]) -> Result<()> {
        let g = &z.grid;
        let r = self.pins.disc_radius();
        let margin = g.spacing;
        let checks = [
            (g.origin[0] + margin - (pose[0] - r), "-x"),
            (pose[0] + r - (g.max_x() - margin), "+x"),
            (g.origin[1] + margin - (pose[1] - r), "-y"),
            (pose[1] + r - (g.max_y() - margin), "+y"),
        ];
        for (overhang, side) in checks {
            if overhang > 0.0 {
                return Err(Error::SensorOutsideField {
                    x: pose[0],
                    y: pose[1],
                    overhang_mm: overhang,
                    side,
                });
            }
        }
        Ok(())
    }

    /// Capture one frame at `pose`: displace markers by `-beta * grad z`,
    /// add per-frame jitter, clamp to the disc.
    pub fn sample_markers(&self, z: &IndentationField, pose: [f64; 2], seed: u64) -> Result<TactileFrame> {
        self.check_inside(z, pose)?;
        let beta = self.model.lever_gain_mm;
        let sigma = self.model.marker_jitter_mm;
        let zv = z.values.view();

        let mut rng = seeded_rng(seed);
        let noise = if sigma > 0.0 { Some(Normal::new(0.0, sigma).unwrap()) } else { None };

        let rest = self.pins.positions().to_vec();
        let mut deformed = Vec::with_capacity(rest.len());
        let clamp_r = self.pins.disc_radius() * (1.0 - 1e-9);
        for p in &rest {
            let world = [pose[0] + p[0], pose[1] + p[1]];
            let grad = z.grid.gradient(&zv, world).ok_or(Error::SensorOutsideField {
                x: pose[0],
                y: pose[1],
                overhang_mm: 0.0,
                side: "interior",
            })?;
            let mut q = [p[0] - beta * grad[0], p[1] - beta * grad[1]];
            if let Some(n) = &noise {
                q[0] += n.sample(&mut rng);
                q[1] += n.sample(&mut rng);
            }
            let r = (q[0] * q[0] + q[1] * q[1]).sqrt();
            if r > clamp_r {
                let s = clamp_r / r;
                q[0] *= s;
                q[1] *= s;
            }
            deformed.push(q);
        }
        Ok(TactileFrame { pose, rest, deformed })
    }

    /// Cell-area changes of one frame against the precomputed rest diagram.
    pub fn voronoi_features(&self, frame: &TactileFrame) -> VoronoiFeatures {
        let areas = bounded_cell_areas(&frame.deformed, &self.clip);
        let delta_area = areas
            .iter()
            .zip(self.rest_areas.iter())
            .map(|(a, r)| a - r)
            .collect();
        VoronoiFeatures { pose: frame.pose, delta_area }
    }

    /// One reading: mean ΔA over `frames_per_reading` independently jittered
    /// frames (a single frame when jitter is zero — the frames would be
    /// identical).
    pub fn read(&self, z: &IndentationField, pose: [f64; 2], seed: u64) -> Result<VoronoiFeatures> {
        let frames = if self.model.marker_jitter_mm == 0.0 {
            1
        } else {
            self.model.frames_per_reading
        };
        let mut mean = vec![0.0; self.pins.positions().len()];
        for f in 0..frames {
            let frame = self.sample_markers(z, pose, subseed(seed, f as u64))?;
            let feats = self.voronoi_features(&frame);
            for (m, d) in mean.iter_mut().zip(feats.delta_area.iter()) {
                *m += d;
            }
        }
        let inv = 1.0 / frames as f64;
        for m in &mut mean {
            *m *= inv;
        }
        Ok(VoronoiFeatures { pose, delta_area: mean })
    }
}

/// A synthesized stimulus field paired with the sensor that probes it.
#[derive(Debug, Clone)]
pub struct TactileSimulator {
    pub field: IndentationField,
    pub sensor: TactileSensor,
}

impl TactileSimulator {
    pub fn new(field: IndentationField, sensor: TactileSensor) -> Self {
        Self { field, sensor }
    }

    pub fn read(&self, pose: [f64; 2], seed: u64) -> Result<VoronoiFeatures> {
        self.sensor.read(&self.field, pose, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use ndarray::Array2;

    fn gaussian_field(center: [f64; 2], peak: f64, sigma: f64, half: f64, h: f64) -> IndentationField {
        let grid = GridSpec::centered_square([0.0, 0.0], half, h).unwrap();
        let mut values = Array2::zeros((grid.ny, grid.nx));
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let dx = grid.x(ix) - center[0];
                let dy = grid.y(iy) - center[1];
                values[[iy, ix]] = peak * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            }
        }
        IndentationField { grid, values }
    }

    fn zero_field(half: f64, h: f64) -> IndentationField {
        let grid = GridSpec::centered_square([0.0, 0.0], half, h).unwrap();
        IndentationField { values: Array2::zeros((grid.ny, grid.nx)), grid }
    }

    fn quiet_sensor(beta: f64) -> TactileSensor {
        TactileSensor::new(pin_lattice(), SensorModel::new(beta, 0.0, 30).unwrap())
    }

    #[test]
    fn lattice_has_127_pins_within_disc() {
        let pins = pin_lattice();
        assert_eq!(pins.positions().len(), PIN_COUNT);
        let max_r = pins
            .positions()
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
            .fold(0.0, f64::max);
        assert!((max_r - 18.0).abs() < 1e-9, "max radius {max_r}");
        assert!(max_r < pins.disc_radius());
    }

    #[test]
    fn lattice_min_spacing_is_pitch() {
        let pins = pin_lattice();
        let ps = pins.positions();
        let mut min = f64::INFINITY;
        for i in 0..ps.len() {
            for j in (i + 1)..ps.len() {
                let d = ((ps[i][0] - ps[j][0]).powi(2) + (ps[i][1] - ps[j][1]).powi(2)).sqrt();
                min = min.min(d);
            }
        }
        assert!((min - RING_PITCH_MM).abs() < 1e-9);
        assert!(min > 1.0);
    }

    #[test]
    fn lattice_is_invariant_under_60_degree_rotation() {
        let pins = pin_lattice();
        let (c, s) = (0.5, 3.0_f64.sqrt() / 2.0);
        let mut rotated: Vec<[f64; 2]> = pins
            .positions()
            .iter()
            .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
            .collect();
        let mut original = pins.positions().to_vec();
        let key = |p: &[f64; 2]| (p[0] * 1e6).round() as i64 * 1_000_000 + (p[1] * 1e6).round() as i64;
        rotated.sort_by_key(key);
        original.sort_by_key(key);
        for (a, b) in rotated.iter().zip(original.iter()) {
            assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_field_markers_stay_at_rest() {
        let sensor = quiet_sensor(100.0);
        let z = zero_field(25.0, 0.5);
        let frame = sensor.sample_markers(&z, [0.0, 0.0], 1).unwrap();
        assert_eq!(frame.rest, frame.deformed);
    }

    #[test]
    fn central_marker_does_not_move_under_centered_gaussian() {
        let sensor = quiet_sensor(100.0);
        let z = gaussian_field([0.0, 0.0], 0.05, 5.0, 25.0, 0.5);
        let frame = sensor.sample_markers(&z, [0.0, 0.0], 1).unwrap();
        let d = frame.deformed[0];
        let r = frame.rest[0];
        assert!((d[0] - r[0]).abs() < 1e-12 && (d[1] - r[1]).abs() < 1e-12);
    }

    #[test]
    fn marker_at_sigma_moves_by_analytic_gradient() {
        // Oracle: |grad z| of a Gaussian at r = sigma is Z e^{-1/2} / sigma.
        let (beta, peak, sigma) = (1.0, 0.1, 6.0);
        let sensor = quiet_sensor(beta);
        let z = gaussian_field([0.0, 0.0], peak, sigma, 21.0, 0.05);
        let frame = sensor.sample_markers(&z, [0.0, 0.0], 1).unwrap();
        let idx = frame
            .rest
            .iter()
            .position(|p| (p[0] - 6.0).abs() < 1e-9 && p[1].abs() < 1e-9)
            .expect("pin at (6, 0)");
        let expect = beta * peak * (-0.5_f64).exp() / sigma;
        let got = frame.deformed[idx][0] - frame.rest[idx][0];
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
        assert!(frame.deformed[idx][1].abs() < 1e-6);
    }

    #[test]
    fn overhang_is_reported() {
        let sensor = quiet_sensor(100.0);
        let z = zero_field(25.0, 0.5);
        let err = sensor.sample_markers(&z, [10.0, 0.0], 1).unwrap_err();
        match err {
            Error::SensorOutsideField { overhang_mm, side, .. } => {
                assert_eq!(side, "+x");
                assert!(overhang_mm > 4.0);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn undeformed_frame_has_zero_delta() {
        let sensor = quiet_sensor(100.0);
        let pins = pin_lattice();
        let frame = TactileFrame {
            pose: [0.0, 0.0],
            rest: pins.positions().to_vec(),
            deformed: pins.positions().to_vec(),
        };
        let feats = sensor.voronoi_features(&frame);
        assert!(feats.delta_area.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn radial_scaling_grows_interior_shrinks_boundary() {
        // Oracle: polygon-area computation on the constructed diagram; the
        // clipped total is conserved, so interior growth must come out of the
        // outermost ring.
        let sensor = quiet_sensor(100.0);
        let pins = pin_lattice();
        let eps = 0.01;
        let deformed: Vec<[f64; 2]> =
            pins.positions().iter().map(|p| [p[0] * (1.0 + eps), p[1] * (1.0 + eps)]).collect();
        let frame = TactileFrame { pose: [0.0, 0.0], rest: pins.positions().to_vec(), deformed };
        let feats = sensor.voronoi_features(&frame);

        let radii: Vec<f64> =
            pins.positions().iter().map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt()).collect();
        let sum: f64 = feats.delta_area.iter().sum();
        assert!(sum.abs() < 1e-6, "sum {sum}");
        for (i, &d) in feats.delta_area.iter().enumerate() {
            if radii[i] < 15.0 {
                assert!(d > 0.0, "interior pin {i} shrank: {d}");
            } else if radii[i] > 17.9 {
                assert!(d < 0.0, "outer pin {i} grew: {d}");
            }
        }
    }

    #[test]
    fn central_gaussian_maximizes_central_cell() {
        // Oracle: divergence of -beta grad z is -beta lap z, maximal at the peak.
        let sensor = quiet_sensor(50.0);
        let z = gaussian_field([0.0, 0.0], 0.05, 5.0, 25.0, 0.25);
        let feats = sensor.read(&z, [0.0, 0.0], 3).unwrap();
        let (argmax, _) = feats
            .delta_area
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert_eq!(argmax, 0, "central pin should carry the peak");
        assert!(feats.delta_area[0] > 0.0);
    }

    #[test]
    fn noiseless_reading_equals_single_frame() {
        let sensor = quiet_sensor(50.0);
        let z = gaussian_field([2.0, -1.0], 0.05, 5.0, 25.0, 0.25);
        let reading = sensor.read(&z, [0.0, 0.0], 9).unwrap();
        let frame = sensor.sample_markers(&z, [0.0, 0.0], subseed(9, 0)).unwrap();
        let single = sensor.voronoi_features(&frame);
        assert_eq!(reading.delta_area, single.delta_area);
    }

    #[test]
    fn fixed_seed_reproduces_bit_identical_readings() {
        let sensor = TactileSensor::new(pin_lattice(), SensorModel::default());
        let z = gaussian_field([0.0, 0.0], 0.05, 5.0, 25.0, 0.5);
        let a = sensor.read(&z, [0.0, 0.0], 1234).unwrap();
        let b = sensor.read(&z, [0.0, 0.0], 1234).unwrap();
        assert_eq!(a.delta_area, b.delta_area);
        let c = sensor.read(&z, [0.0, 0.0], 1235).unwrap();
        assert_ne!(a.delta_area, c.delta_area);
    }

    #[test]
    fn frame_averaging_shrinks_noise_like_sqrt_30() {
        // Oracle: Monte Carlo; the std of a 30-frame mean is the single-frame
        // std over sqrt(30).
        use rayon::prelude::*;
        let z = zero_field(25.0, 0.5);
        let model = SensorModel { lever_gain_mm: 100.0, marker_jitter_mm: 0.05, frames_per_reading: 30 };
        let sensor = TactileSensor::new(pin_lattice(), model);
        let pin = 14;
        let n_seeds = 1000u64;

        let singles: Vec<f64> = (0..n_seeds)
            .into_par_iter()
            .map(|s| {
                let frame = sensor.sample_markers(&z, [0.0, 0.0], subseed(500_000 + s, 0)).unwrap();
                sensor.voronoi_features(&frame).delta_area[pin]
            })
            .collect();
        let means: Vec<f64> = (0..n_seeds)
            .into_par_iter()
            .map(|s| sensor.read(&z, [0.0, 0.0], 900_000 + s).unwrap().delta_area[pin])
            .collect();

        let std = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        };
        let ratio = std(&singles) / std(&means);
        let expect = 30.0_f64.sqrt();
        assert!(
            (ratio - expect).abs() < 0.2 * expect,
            "ratio {ratio} vs sqrt(30) {expect}"
        );
    }

    #[test]
    fn rotation_by_60_degrees_permutes_delta_areas() {
        let (beta, peak, sigma) = (1.0, 0.02, 5.0);
        let sensor = quiet_sensor(beta);
        let center = [4.5, 1.2];
        let z = gaussian_field(center, peak, sigma, 21.0, 0.04);
        let base = sensor.read(&z, [0.0, 0.0], 0).unwrap();

        let (c, s) = (0.5, 3.0_f64.sqrt() / 2.0);
        let rc = [c * center[0] - s * center[1], s * center[0] + c * center[1]];
        let zr = gaussian_field(rc, peak, sigma, 21.0, 0.04);
        let rotated = sensor.read(&zr, [0.0, 0.0], 0).unwrap();

        let pins = pin_lattice();
        let perm: Vec<usize> = pins
            .positions()
            .iter()
            .map(|p| {
                let rp = [c * p[0] - s * p[1], s * p[0] + c * p[1]];
                pins.positions()
                    .iter()
                    .position(|q| (q[0] - rp[0]).abs() < 1e-6 && (q[1] - rp[1]).abs() < 1e-6)
                    .unwrap()
            })
            .collect();
        for i in 0..PIN_COUNT {
            let a = base.delta_area[i];
            let b = rotated.delta_area[perm[i]];
            assert!((a - b).abs() < 1e-6, "pin {i}: {a} vs {b}");
        }
    }

    #[test]
    fn small_signal_delta_area_is_linear_in_gain() {
        let peak = 1e-4;
        let z = gaussian_field([0.0, 0.0], peak, 5.0, 25.0, 0.25);
        let a = quiet_sensor(1.0).read(&z, [0.0, 0.0], 0).unwrap();
        let b = quiet_sensor(2.0).read(&z, [0.0, 0.0], 0).unwrap();
        for i in 0..PIN_COUNT {
            if a.delta_area[i].abs() > 1e-9 {
                let ratio = b.delta_area[i] / a.delta_area[i];
                assert!((ratio - 2.0).abs() < 0.02 * 2.0, "pin {i} ratio {ratio}");
            }
        }
    }

    #[test]
    fn cell_areas_conserved_for_deformed_frames() {
        let sensor = TactileSensor::new(pin_lattice(), SensorModel::default());
        let z = gaussian_field([3.0, -2.0], 0.05, 5.0, 25.0, 0.5);
        let disc_area = std::f64::consts::PI * DISC_RADIUS_MM * DISC_RADIUS_MM;
        for seed in 0..20 {
            let frame = sensor.sample_markers(&z, [0.0, 0.0], seed).unwrap();
            let feats = sensor.voronoi_features(&frame);
            let total: f64 =
                feats.delta_area.iter().zip(sensor.rest_areas().iter()).map(|(d, r)| d + r).sum();
            assert!(
                (total - disc_area).abs() / disc_area < 1e-6,
                "total {total} vs {disc_area}"
            );
            let dsum: f64 = feats.delta_area.iter().sum();
            assert!(dsum.abs() < 1e-6);
        }
    }
}
