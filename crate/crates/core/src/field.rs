//! Regular 2D grids of scalar values in world millimetres.
//!
//! All planar quantities in the pipeline (pressure, indentation, fused maps)
//! share the same grid contract: `values[[iy, ix]]` lives at world position
//! `(origin.x + ix * spacing, origin.y + iy * spacing)`, with `origin` the
//! minimum corner. Bilinear interpolation is defined on the cell-center
//! lattice and is `None` outside it.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Geometry of a regular grid: minimum corner, spacing and cell counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// World position of cell (0, 0), mm.
    pub origin: [f64; 2],
    /// Cell spacing, mm (isotropic).
    pub spacing: f64,
    /// Cells along x.
    pub nx: usize,
    /// Cells along y.
    pub ny: usize,
}

impl GridSpec {
    pub fn new(origin: [f64; 2], spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid(format!("grid must be non-empty, got {nx}x{ny}")));
        }
        if !origin[0].is_finite() || !origin[1].is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { origin, spacing, nx, ny })
    }

    /// Grid covering `[min, max]` in both axes with the requested spacing;
    /// the last row/column lands on or just past `max`.
    pub fn covering(min: [f64; 2], max: [f64; 2], spacing: f64) -> Result<Self> {
        if max[0] <= min[0] || max[1] <= min[1] {
            return Err(Error::InvalidGrid("region must have positive extent".into()));
        }
        let nx = ((max[0] - min[0]) / spacing).ceil() as usize + 1;
        let ny = ((max[1] - min[1]) / spacing).ceil() as usize + 1;
        Self::new(min, spacing, nx, ny)
    }

    /// Square grid centered on `center` with half-width `half` mm.
    pub fn centered_square(center: [f64; 2], half: f64, spacing: f64) -> Result<Self> {
        Self::covering(
            [center[0] - half, center[1] - half],
            [center[0] + half, center[1] + half],
            spacing,
        )
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.origin[0] + ix as f64 * self.spacing
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.origin[1] + iy as f64 * self.spacing
    }

    pub fn max_x(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn max_y(&self) -> f64 {
        self.y(self.ny - 1)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.origin[0] && p[0] <= self.max_x() && p[1] >= self.origin[1] && p[1] <= self.max_y()
    }

    pub fn same_lattice(&self, other: &GridSpec) -> bool {
        const TOL: f64 = 1e-9;
        (self.origin[0] - other.origin[0]).abs() < TOL
            && (self.origin[1] - other.origin[1]).abs() < TOL
            && (self.spacing - other.spacing).abs() < TOL
            && self.nx == other.nx
            && self.ny == other.ny
    }

    /// Bilinear interpolation of `values` at world point `p`.
    pub fn sample(&self, values: &ArrayView2<f64>, p: [f64; 2]) -> Option<f64> {
        let fx = (p[0] - self.origin[0]) / self.spacing;
        let fy = (p[1] - self.origin[1]) / self.spacing;
        if fx < 0.0 || fy < 0.0 || fx > (self.nx - 1) as f64 || fy > (self.ny - 1) as f64 {
            return None;
        }
        if self.nx == 1 || self.ny == 1 {
            // Degenerate single-row/column grids: nearest value.
            let ix = (fx.round() as usize).min(self.nx - 1);
            let iy = (fy.round() as usize).min(self.ny - 1);
            return Some(values[[iy, ix]]);
        }
        let ix = (fx.floor() as usize).min(self.nx - 2);
        let iy = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let v00 = values[[iy, ix]];
        let v01 = values[[iy, ix + 1]];
        let v10 = values[[iy + 1, ix]];
        let v11 = values[[iy + 1, ix + 1]];
        Some(v00 * (1.0 - tx) * (1.0 - ty) + v01 * tx * (1.0 - ty) + v10 * (1.0 - tx) * ty + v11 * tx * ty)
    }

    /// Gradient of the field at `p`: central differences on the four
    /// surrounding nodes, blended bilinearly. Needs one cell of margin on
    /// every side; `None` otherwise.
    pub fn gradient(&self, values: &ArrayView2<f64>, p: [f64; 2]) -> Option<[f64; 2]> {
        if self.nx < 3 || self.ny < 3 {
            return None;
        }
        let fx = (p[0] - self.origin[0]) / self.spacing;
        let fy = (p[1] - self.origin[1]) / self.spacing;
        if fx < 1.0 || fy < 1.0 || fx > (self.nx - 2) as f64 || fy > (self.ny - 2) as f64 {
            return None;
        }
        let ix = (fx.floor() as usize).min(self.nx - 3).max(1);
        let iy = (fy.floor() as usize).min(self.ny - 3).max(1);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let inv2h = 1.0 / (2.0 * self.spacing);
        let gx = |iy: usize, ix: usize| (values[[iy, ix + 1]] - values[[iy, ix - 1]]) * inv2h;
        let gy = |iy: usize, ix: usize| (values[[iy + 1, ix]] - values[[iy - 1, ix]]) * inv2h;
        let blend = |f: &dyn Fn(usize, usize) -> f64| {
            f(iy, ix) * (1.0 - tx) * (1.0 - ty)
                + f(iy, ix + 1) * tx * (1.0 - ty)
                + f(iy + 1, ix) * (1.0 - tx) * ty
                + f(iy + 1, ix + 1) * tx * ty
        };
        Some([blend(&gx), blend(&gy)])
    }
}

/// Anything that is a scalar field on a [`GridSpec`] lattice.
pub trait Field2D {
    fn grid(&self) -> &GridSpec;
    fn values(&self) -> ArrayView2<'_, f64>;

    fn max_value(&self) -> f64 {
        self.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Time-averaged acoustic radiation pressure on the sensing plane, kPa.
#[derive(Debug, Clone)]
pub struct PressureField {
    pub grid: GridSpec,
    pub values: Array2<f64>,
}

/// Quasi-static normal skin deflection, mm (positive = indented).
#[derive(Debug, Clone)]
pub struct IndentationField {
    pub grid: GridSpec,
    pub values: Array2<f64>,
}

/// Fused world-frame haptic map, normalized to [0, 1].
///
/// `raw_max` is the maximum (clamped) posterior mean in mm² used for the
/// normalization; a value of 0 flags an identically-zero map.
#[derive(Debug, Clone)]
pub struct HapticMap {
    pub grid: GridSpec,
    pub values: Array2<f64>,
    pub raw_max: f64,
}

impl HapticMap {
    pub fn is_empty(&self) -> bool {
        self.raw_max == 0.0
    }
}

macro_rules! impl_field2d {
    ($t:ty) => {
        impl Field2D for $t {
            fn grid(&self) -> &GridSpec {
                &self.grid
            }
            fn values(&self) -> ArrayView2<'_, f64> {
                self.values.view()
            }
        }
    };
}

impl_field2d!(PressureField);
impl_field2d!(IndentationField);
impl_field2d!(HapticMap);
