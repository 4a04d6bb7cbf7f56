//! Quantitative comparison of maps and fields.
//!
//! "Size" of a stimulus is the diameter of the region above a fraction of
//! the peak (20% by default), measured along the principal axis of that
//! region through its centroid. Ring-shaped maps (centroid below threshold)
//! report the outer diameter: the outermost above-threshold crossings on
//! both sides of the center.

use crate::error::{Error, Result};
use crate::field::Field2D;

/// March step when locating threshold crossings, mm.
const SCAN_STEP_MM: f64 = 0.05;

/// Diameter of the above-`fraction` region of a field, mm.
pub fn extent_at_fraction(map: &impl Field2D, fraction: f64) -> Result<f64> {
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("fraction must be in (0,1), got {fraction}")));
    }
    let grid = map.grid();
    let values = map.values();
    let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::EmptyMap);
    }
    let threshold = fraction * peak;

    // Centroid and second moments of the above-threshold mask.
    let (mut m00, mut m10, mut m01) = (0.0, 0.0, 0.0);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            if values[[iy, ix]] >= threshold {
                m00 += 1.0;
                m10 += grid.x(ix);
                m01 += grid.y(iy);
            }
        }
    }
    let center = [m10 / m00, m01 / m00];
    let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            if values[[iy, ix]] >= threshold {
                let dx = grid.x(ix) - center[0];
                let dy = grid.y(iy) - center[1];
                mu20 += dx * dx;
                mu02 += dy * dy;
                mu11 += dx * dy;
            }
        }
    }

    // Principal axis of the mask; for isotropic masks the direction is
    // arbitrary and any line through the center measures the same extent.
    let theta = 0.5 * (2.0 * mu11).atan2(mu20 - mu02);
    let dir = [theta.cos(), theta.sin()];

    // Farthest above-threshold point along the ray; exit crossings are
    // refined by linear interpolation between samples.
    let outermost = |sign: f64| -> f64 {
        let mut last_inside = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        let mut s = 0.0;
        loop {
            let p = [center[0] + sign * s * dir[0], center[1] + sign * s * dir[1]];
            let Some(v) = grid.sample(&values, p) else { break };
            if v >= threshold {
                last_inside = s;
            } else if let Some((ps, pv)) = prev {
                if pv >= threshold {
                    let t = (pv - threshold) / (pv - v);
                    last_inside = ps + t * (s - ps);
                }
            }
            prev = Some((s, v));
            s += SCAN_STEP_MM;
        }
        last_inside
    };

    Ok(outermost(1.0) + outermost(-1.0))
}

/// Pixel-to-pixel RMSE between two maps, in percent, after scaling each map
/// to [0, 1] by its own maximum. Grids need not match: `b` is resampled onto
/// `a`'s lattice by bilinear interpolation, skipping cells outside `b`.
pub fn rmse_percent(a: &impl Field2D, b: &impl Field2D) -> Result<f64> {
    let ga = a.grid();
    let va = a.values();
    let gb = b.grid();
    let vb = b.values();
    let max_a = va.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let max_b = vb.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let na = if max_a > 0.0 { 1.0 / max_a } else { 1.0 };
    let nb = if max_b > 0.0 { 1.0 / max_b } else { 1.0 };

    let same = ga.same_lattice(gb);
    let mut acc = 0.0;
    let mut count = 0usize;
    for iy in 0..ga.ny {
        for ix in 0..ga.nx {
            let bv = if same {
                Some(vb[[iy, ix]])
            } else {
                gb.sample(&vb, [ga.x(ix), ga.y(iy)])
            };
            if let Some(bv) = bv {
                let d = va[[iy, ix]] * na - bv * nb;
                acc += d * d;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NoOverlap);
    }
    Ok(100.0 * (acc / count as f64).sqrt())
}

/// One stimulus entry to be reported.
#[derive(Debug, Clone)]
pub struct ReportInput<M: Field2D, R: Field2D> {
    pub name: String,
    pub map: Option<M>,
    pub reference: Option<R>,
    pub path_length_mm: Option<f64>,
    /// Raw peak of the fused map, mm^2 (max delta-area scale).
    pub peak_mm2: Option<f64>,
}

/// Per-stimulus metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub peak_mm2: Option<f64>,
    pub extent_mm: Option<f64>,
    pub rmse_percent: Option<f64>,
    pub path_length_mm: Option<f64>,
    pub complete: bool,
}

/// Table of per-stimulus metrics, in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
}

/// Assemble the comparison table. Rows with a missing map are flagged
/// incomplete rather than failing the whole report.
pub fn report<M: Field2D, R: Field2D>(inputs: &[ReportInput<M, R>], fraction: f64) -> ComparisonReport {
    let rows = inputs
        .iter()
        .map(|input| {
            let extent = input.map.as_ref().and_then(|m| extent_at_fraction(m, fraction).ok());
            let rmse = match (&input.map, &input.reference) {
                (Some(m), Some(r)) => rmse_percent(m, r).ok(),
                _ => None,
            };
            let complete = input.map.is_some() && extent.is_some();
            ReportRow {
                name: input.name.clone(),
                peak_mm2: input.peak_mm2,
                extent_mm: extent,
                rmse_percent: rmse,
                path_length_mm: input.path_length_mm,
                complete,
            }
        })
        .collect();
    ComparisonReport { rows }
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(v) => format!("{v:.digits$}"),
        None => "-".to_string(),
    }
}

impl ComparisonReport {
    pub fn to_csv_string(&self) -> String {
        let mut out =
            String::from("stimulus,peak_mm2,extent_mm,rmse_percent,path_length_mm,complete\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.name,
                fmt_opt(r.peak_mm2, 4),
                fmt_opt(r.extent_mm, 2),
                fmt_opt(r.rmse_percent, 2),
                fmt_opt(r.path_length_mm, 1),
                r.complete
            ));
        }
        out
    }

    /// Aligned plain-text table. Path lengths are reported in mm as measured
    /// on the focal-point traversal (cross strokes are drawn out and back, so
    /// their traversal is twice the stroke length).
    pub fn to_text_table(&self) -> String {
        let header = ["stimulus", "peak (mm^2)", "size (mm)", "RMSE (%)", "path (mm)", "status"];
        let mut rows: Vec<[String; 6]> = Vec::new();
        for r in &self.rows {
            rows.push([
                r.name.clone(),
                fmt_opt(r.peak_mm2, 4),
                fmt_opt(r.extent_mm, 1),
                fmt_opt(r.rmse_percent, 1),
                fmt_opt(r.path_length_mm, 1),
                if r.complete { "ok".into() } else { "incomplete".into() },
            ]);
        }
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row.iter()) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = String::new();
        for (w, h) in widths.iter().zip(header.iter()) {
            line.push_str(&format!("{h:<w$}  "));
        }
        out.push_str(line.trim_end());
        out.push('\n');
        for row in &rows {
            let mut line = String::new();
            for (w, cell) in widths.iter().zip(row.iter()) {
                line.push_str(&format!("{cell:<w$}  "));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}
