//! Stimulus definitions and time-averaged pressure fields on the sensing plane.
//!
//! A stimulus is either an unmodulated (UM) focal point or a spatiotemporally
//! modulated (STM) focal point swept along a path. Each instantaneous focal
//! spot is modelled as an isotropic 2D Gaussian in radiation pressure; the
//! quasi-static field of an STM stimulus is the dwell-weighted average of the
//! spot along the path, with constant speed (arc-length-uniform dwell).

use ndarray::Array2;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::{GridSpec, PressureField};

/// Gaussian model of a single focal spot.
///
/// `sigma_mm` controls the spot footprint: the diameter at 20% of peak is
/// `2 * sigma * sqrt(2 ln 5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalSpotModel {
    pub peak_pressure_kpa: f64,
    pub sigma_mm: f64,
}

impl FocalSpotModel {
    pub fn new(peak_pressure_kpa: f64, sigma_mm: f64) -> Result<Self> {
        if !(peak_pressure_kpa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "peak pressure must be positive, got {peak_pressure_kpa}"
            )));
        }
        if !(sigma_mm > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma_mm}")));
        }
        Ok(Self { peak_pressure_kpa, sigma_mm })
    }

    /// Spot calibrated so a 1.0 kPa unmodulated point has a 13 mm diameter
    /// at 20% of peak: sigma = 6.5 / sqrt(2 ln 5) ~= 3.623 mm.
    pub fn calibrated() -> Self {
        Self { peak_pressure_kpa: 1.0, sigma_mm: 6.5 / (2.0 * 5.0_f64.ln()).sqrt() }
    }
}

impl Default for FocalSpotModel {
    fn default() -> Self {
        Self::calibrated()
    }
}

/// Ordered polyline traversed by the focal point, mm.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricPath {
    vertices: Vec<[f64; 2]>,
    closed: bool,
}

impl ParametricPath {
    pub fn new(vertices: Vec<[f64; 2]>, closed: bool) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidPath("path must have at least one vertex"));
        }
        for w in vertices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidPath("consecutive vertices must be distinct"));
            }
        }
        if closed && vertices.len() >= 2 && vertices[0] == *vertices.last().unwrap() {
            return Err(Error::InvalidPath("closed path must not repeat its first vertex"));
        }
        Ok(Self { vertices, closed })
    }

    pub fn single_point(p: [f64; 2]) -> Self {
        Self { vertices: vec![p], closed: false }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Sum of segment lengths, including the closing segment for closed paths.
    pub fn length(&self) -> f64 {
        if self.vertices.len() < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for w in self.vertices.windows(2) {
            total += dist(w[0], w[1]);
        }
        if self.closed {
            total += dist(*self.vertices.last().unwrap(), self.vertices[0]);
        }
        total
    }

    /// Translate every vertex by `(dx, dy)`.
    pub fn translated(&self, delta: [f64; 2]) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| [v[0] + delta[0], v[1] + delta[1]]).collect(),
            closed: self.closed,
        }
    }

    /// Cyclic rotation of the vertex list (closed paths describe the same curve).
    pub fn rotated_vertex_list(&self, offset: usize) -> Self {
        let n = self.vertices.len();
        let vertices = (0..n).map(|i| self.vertices[(i + offset) % n]).collect();
        Self { vertices, closed: self.closed }
    }

    /// Points spaced uniformly in arc length, at most `max_step` apart,
    /// placed at interval midpoints so open and closed paths weight dwell
    /// identically per unit length.
    pub fn resample(&self, max_step: f64) -> Vec<[f64; 2]> {
        let total = self.length();
        if total == 0.0 || self.vertices.len() < 2 {
            return vec![self.vertices[0]];
        }
        let n = (total / max_step).ceil() as usize;
        let step = total / n as f64;

        let mut segs: Vec<([f64; 2], [f64; 2], f64)> = Vec::with_capacity(self.vertices.len());
        for w in self.vertices.windows(2) {
            segs.push((w[0], w[1], dist(w[0], w[1])));
        }
        if self.closed {
            let a = *self.vertices.last().unwrap();
            segs.push((a, self.vertices[0], dist(a, self.vertices[0])));
        }

        let mut out = Vec::with_capacity(n);
        let mut seg_idx = 0;
        let mut seg_start = 0.0;
        for k in 0..n {
            let s = (k as f64 + 0.5) * step;
            while seg_idx + 1 < segs.len() && s > seg_start + segs[seg_idx].2 {
                seg_start += segs[seg_idx].2;
                seg_idx += 1;
            }
            let (a, b, len) = segs[seg_idx];
            let t = ((s - seg_start) / len).clamp(0.0, 1.0);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
        out
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Modulation mode of the stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StimulusKind {
    UmPoint,
    StmPath,
}

/// A stimulus: focal-point path plus modulation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusSpec {
    pub kind: StimulusKind,
    pub path: ParametricPath,
    /// Spatiotemporal modulation frequency, Hz (metadata; 0 for UM).
    pub stm_frequency_hz: f64,
    /// Height above the array, cm (metadata only; the planar model does not
    /// vary with height).
    pub height_cm: f64,
    /// Drive amplitude in (0, 1]; 0 is allowed and produces a zero field.
    pub amplitude_scale: f64,
}

impl StimulusSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            StimulusKind::UmPoint => {
                if self.path.vertices().len() != 1 {
                    return Err(Error::InvalidPath("UM point must have a single vertex"));
                }
            }
            StimulusKind::StmPath => {
                if self.path.vertices().len() < 2 {
                    return Err(Error::InvalidPath("STM path needs at least 2 distinct vertices"));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.amplitude_scale) {
            return Err(Error::InvalidParameter(format!(
                "amplitude scale must be in [0, 1], got {}",
                self.amplitude_scale
            )));
        }
        Ok(())
    }
}

/// The shape library tested by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeName {
    Point,
    Circle,
    Line,
    Triangle,
    Square,
    SmallCross,
    LargeCross,
    Rose,
}

impl ShapeName {
    pub const ALL: [ShapeName; 8] = [
        ShapeName::Point,
        ShapeName::Circle,
        ShapeName::Line,
        ShapeName::Triangle,
        ShapeName::Square,
        ShapeName::SmallCross,
        ShapeName::LargeCross,
        ShapeName::Rose,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ShapeName::Point => "point",
            ShapeName::Circle => "circle",
            ShapeName::Line => "line",
            ShapeName::Triangle => "triangle",
            ShapeName::Square => "square",
            ShapeName::SmallCross => "small_cross",
            ShapeName::LargeCross => "large_cross",
            ShapeName::Rose => "rose",
        }
    }

    /// Canonical characteristic size, mm: circle diameter 20; line, triangle,
    /// square and small cross sides 40; large cross and rose longest extent 60.
    pub fn canonical_size_mm(&self) -> f64 {
        match self {
            ShapeName::Point => 0.0,
            ShapeName::Circle => 20.0,
            ShapeName::Line | ShapeName::Triangle | ShapeName::Square | ShapeName::SmallCross => 40.0,
            ShapeName::LargeCross | ShapeName::Rose => 60.0,
        }
    }
}

impl fmt::Display for ShapeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeName::ALL
            .iter()
            .find(|n| n.as_str() == s)
            .copied()
            .ok_or_else(|| Error::UnknownShape {
                name: s.to_string(),
                valid: ShapeName::ALL.map(|n| n.as_str()).join(", "),
            })
    }
}

const CIRCLE_VERTICES: usize = 360;
const ROSE_VERTICES: usize = 720;

/// Build the canonical stimulus for a shape.
///
/// `size_mm` overrides the characteristic size (diameter for the circle, side
/// for line/triangle/square/small cross, longest extent for large cross and
/// rose); `None` uses the canonical value. The circle runs at 70 Hz, the six
/// shapes at 100 Hz, the point is unmodulated at the array center.
pub fn make_shape(shape: ShapeName, size_mm: Option<f64>) -> Result<StimulusSpec> {
    if let Some(s) = size_mm {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("shape size must be positive, got {s}")));
        }
        if shape == ShapeName::Point {
            return Err(Error::InvalidParameter("point stimulus takes no size".into()));
        }
    }
    let size = size_mm.unwrap_or_else(|| shape.canonical_size_mm());
    let spec = match shape {
        ShapeName::Point => StimulusSpec {
            kind: StimulusKind::UmPoint,
            path: ParametricPath::single_point([0.0, 0.0]),
            stm_frequency_hz: 0.0,
            height_cm: 20.0,
            amplitude_scale: 1.0,
        },
        ShapeName::Circle => {
            let r = size / 2.0;
            let vertices = (0..CIRCLE_VERTICES)
                .map(|k| {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / CIRCLE_VERTICES as f64;
                    [r * phi.cos(), r * phi.sin()]
                })
                .collect();
            StimulusSpec {
                kind: StimulusKind::StmPath,
                path: ParametricPath::new(vertices, true)?,
                stm_frequency_hz: 70.0,
                height_cm: 20.0,
                amplitude_scale: 1.0,
            }
        }
        ShapeName::Line => {
            stm_shape(ParametricPath::new(vec![[-size / 2.0, 0.0], [size / 2.0, 0.0]], false)?)
        }
        ShapeName::Triangle => {
            // Equilateral, centroid at the origin.
            let rc = size / 3.0_f64.sqrt();
            let vertices = [90.0_f64, 210.0, 330.0]
                .iter()
                .map(|deg| {
                    let a = deg.to_radians();
                    [rc * a.cos(), rc * a.sin()]
                })
                .collect();
            stm_shape(ParametricPath::new(vertices, true)?)
        }
        ShapeName::Square => {
            let h = size / 2.0;
            stm_shape(ParametricPath::new(vec![[-h, -h], [h, -h], [h, h], [-h, h]], true)?)
        }
        ShapeName::SmallCross | ShapeName::LargeCross => {
            // Two perpendicular strokes through the center. A plus sign has no
            // single-stroke traversal, so each half-arm is drawn out and back;
            // dwell stays uniform over the cross (2x everywhere, normalized
            // away) but the traversal length is twice the stroke length.
            let h = size / 2.0;
            let o = [0.0, 0.0];
            let vertices = vec![[-h, 0.0], o, [0.0, h], o, [h, 0.0], o, [0.0, -h], o];
            stm_shape(ParametricPath::new(vertices, true)?)
        }
        ShapeName::Rose => {
            // Four-petal rhodonea r = R |cos 2phi|; longest extent 2R.
            let r_max = size / 2.0;
            let vertices = (0..ROSE_VERTICES)
                .map(|k| {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / ROSE_VERTICES as f64;
                    let r = r_max * (2.0 * phi).cos().abs();
                    [r * phi.cos(), r * phi.sin()]
                })
                .collect();
            stm_shape(ParametricPath::new(vertices, true)?)
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn stm_shape(path: ParametricPath) -> StimulusSpec {
    StimulusSpec {
        kind: StimulusKind::StmPath,
        path,
        stm_frequency_hz: 100.0,
        height_cm: 15.0,
        amplitude_scale: 1.0,
    }
}

/// Total focal-point traversal length of the stimulus path, mm.
pub fn path_length(path: &ParametricPath) -> f64 {
    path.length()
}

/// Paths are discretized to at most this segment length before averaging;
/// well below the grid spacing the discretization error is invisible.
const PATH_SAMPLE_STEP_MM: f64 = 0.5;

/// Synthesize the time-averaged pressure field of a stimulus on `region`.
///
/// A UM point is a single Gaussian spot. An STM path is the arc-length-uniform
/// average of spots along the path, so the field peak never exceeds the spot
/// peak and a closed path's field does not depend on where the vertex list
/// starts.
pub fn time_averaged_field(
    spec: &StimulusSpec,
    model: &FocalSpotModel,
    region: &GridSpec,
) -> Result<PressureField> {
    spec.validate()?;
    let limit = model.sigma_mm / 2.0;
    if region.spacing > limit {
        return Err(Error::ResolutionTooCoarse {
            spacing: region.spacing,
            sigma: model.sigma_mm,
            limit,
        });
    }

    let spots = match spec.kind {
        StimulusKind::UmPoint => vec![spec.path.vertices()[0]],
        StimulusKind::StmPath => spec.path.resample(PATH_SAMPLE_STEP_MM),
    };
    let amp = spec.amplitude_scale * model.peak_pressure_kpa / spots.len() as f64;
    let inv_two_sigma_sq = 1.0 / (2.0 * model.sigma_mm * model.sigma_mm);
    // Spots beyond 7 sigma contribute < 3e-11 of peak; skip the exp.
    let cutoff_sq = (7.0 * model.sigma_mm).powi(2);

    let mut values = Array2::zeros((region.ny, region.nx));
    let origin = region.origin;
    let spacing = region.spacing;
    values
        .outer_iter_mut()
        .into_par_iter()
        .enumerate()
        .for_each(|(iy, mut row)| {
            let y = origin[1] + iy as f64 * spacing;
            for (ix, v) in row.iter_mut().enumerate() {
                let x = origin[0] + ix as f64 * spacing;
                let mut acc = 0.0;
                for s in &spots {
                    let d2 = (x - s[0]).powi(2) + (y - s[1]).powi(2);
                    if d2 < cutoff_sq {
                        acc += (-d2 * inv_two_sigma_sq).exp();
                    }
                }
                *v = amp * acc;
            }
        });

    Ok(PressureField { grid: region.clone(), values })
}
