//! Autonomous haptic exploration: sense, perceive, act.
//!
//! Each cycle reads the sensor, regresses the accumulated nearby samples
//! onto a dense local grid, binarizes the regressed map at a fraction of its
//! local maximum, and computes image moments. The centroid and principal
//! orientation drive a discrete action chooser: chase the centroid while it
//! is far, otherwise continue along the stimulus orientation with minimum
//! turning. The loop stops when it returns near its start or runs out of
//! steps.

use crate::error::{Error, Result};
use crate::field::{GridSpec, HapticMap};
use crate::gpr::{GprHyper, GprModel};
use crate::mapping::{self, FusionHyper, ScanDataset};
use crate::rng::subseed;
use crate::sensor::TactileSimulator;

/// Local percept: centroid and orientation of the thresholded stimulus map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percept {
    pub above_threshold: bool,
    /// Intensity-weighted centroid, world mm (valid when above_threshold).
    pub centroid: [f64; 2],
    /// Principal orientation from second central moments, degrees in [-90, 90).
    pub orientation_deg: f64,
    /// Zeroth moment of the thresholded intensities.
    pub mass: f64,
}

impl Percept {
    fn lost() -> Self {
        Self { above_threshold: false, centroid: [0.0, 0.0], orientation_deg: 0.0, mass: 0.0 }
    }
}

/// Perception parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceiveParams {
    /// Side of the square window centered on the sensor, mm.
    pub window_mm: f64,
    /// Local regression grid spacing, mm.
    pub grid_spacing_mm: f64,
    /// Binarization threshold as a fraction of the local maximum.
    pub threshold_fraction: f64,
    /// Absolute floor on the local maximum for the stimulus to count as
    /// detected, mm^2 (rejects jitter-only readings).
    pub min_signal_mm2: f64,
    /// Local GPR hyperparameters (signal std defaults to the window data std).
    pub gpr: FusionHyper,
}

impl Default for PerceiveParams {
    fn default() -> Self {
        Self {
            window_mm: 30.0,
            grid_spacing_mm: 1.0,
            threshold_fraction: 0.3,
            min_signal_mm2: 0.1,
            gpr: FusionHyper::default(),
        }
    }
}

/// Regress samples near `center` and extract centroid/orientation moments.
///
/// Intensities keep their regressed magnitudes above the threshold (cells
/// below contribute zero). An empty window or a sub-floor maximum yields
/// `above_threshold = false`.
pub fn perceive(samples: &ScanDataset, center: [f64; 2], params: &PerceiveParams) -> Percept {
    let half = params.window_mm / 2.0;
    let mut positions = Vec::new();
    let mut targets = Vec::new();
    for s in &samples.samples {
        if (s.position[0] - center[0]).abs() <= half && (s.position[1] - center[1]).abs() <= half {
            positions.push(s.position);
            targets.push(s.delta_area);
        }
    }
    if positions.is_empty() {
        return Percept::lost();
    }

    let sigma_f = match params.gpr.sigma_f {
        Some(v) => v,
        None => {
            let n = targets.len() as f64;
            let mean = targets.iter().sum::<f64>() / n;
            (targets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
        }
    };
    if !(sigma_f > 0.0) {
        return Percept::lost();
    }
    let hyper = GprHyper {
        sigma_f,
        length_scale_mm: params.gpr.length_scale_mm,
        noise_sd: params.gpr.noise_sd,
    };
    let Ok(model) = GprModel::fit(&positions, &targets, &hyper) else {
        return Percept::lost();
    };

    let grid = match GridSpec::centered_square(center, half, params.grid_spacing_mm) {
        Ok(g) => g,
        Err(_) => return Percept::lost(),
    };
    let local = model.predict_grid(&grid);
    let max = local.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > params.min_signal_mm2) {
        return Percept::lost();
    }
    let threshold = params.threshold_fraction * max;

    let (mut m00, mut m10, mut m01) = (0.0, 0.0, 0.0);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let v = local[[iy, ix]];
            if v >= threshold && v > 0.0 {
                m00 += v;
                m10 += grid.x(ix) * v;
                m01 += grid.y(iy) * v;
            }
        }
    }
    if m00 <= 0.0 {
        return Percept::lost();
    }
    let centroid = [m10 / m00, m01 / m00];
    let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let v = local[[iy, ix]];
            if v >= threshold && v > 0.0 {
                let dx = grid.x(ix) - centroid[0];
                let dy = grid.y(iy) - centroid[1];
                mu20 += dx * dx * v;
                mu02 += dy * dy * v;
                mu11 += dx * dy * v;
            }
        }
    }
    let mut theta = 0.5 * (2.0 * mu11).atan2(mu20 - mu02).to_degrees();
    if theta >= 90.0 {
        theta -= 180.0;
    }
    Percept { above_threshold: true, centroid, orientation_deg: theta, mass: m00 }
}

/// The 8 discrete grid moves.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    pub step_mm: f64,
}

impl ActionSet {
    pub fn new(step_mm: f64) -> Result<Self> {
        if !(step_mm > 0.0) {
            return Err(Error::InvalidParameter(format!("grid step must be positive, got {step_mm}")));
        }
        Ok(Self { step_mm })
    }

    /// Moves in counterclockwise order starting at +x.
    pub fn moves(&self) -> [[f64; 2]; 8] {
        let a = self.step_mm;
        [
            [a, 0.0],
            [a, a],
            [0.0, a],
            [-a, a],
            [-a, 0.0],
            [-a, -a],
            [0.0, -a],
            [a, -a],
        ]
    }
}

impl Default for ActionSet {
    fn default() -> Self {
        Self { step_mm: 10.0 }
    }
}

/// Which branch of the action rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionBranch {
    /// Centroid farther than the chase radius: move towards it.
    Chase,
    /// Centroid nearby: continue along the stimulus orientation.
    Continue,
}

/// A chosen discrete move plus the continuous heading that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDecision {
    pub movement: [f64; 2],
    pub branch: ActionBranch,
    /// Target angle before discretization, degrees: the bearing to the
    /// centroid (chase) or the chosen orientation candidate (continue).
    pub heading_deg: f64,
}

/// Distance to the centroid above which the rule chases it, mm.
pub const CHASE_RADIUS_MM: f64 = 5.0;

fn wrap_deg_180(a: f64) -> f64 {
    let mut x = a.rem_euclid(360.0);
    if x > 180.0 {
        x -= 360.0;
    }
    x
}

/// Absolute angular separation in degrees, in [0, 180].
fn ang_dist(a: f64, b: f64) -> f64 {
    wrap_deg_180(a - b).abs()
}

/// Pick the next discrete move.
///
/// If the centroid is more than 5 mm from the sensor, head for it; otherwise
/// continue along the percept orientation, choosing between theta and
/// theta + 180 by minimum angular change from the last heading (theta when
/// no action has been taken yet). The returned move is the one of the 8 grid
/// moves closest in angle to the target, ties broken counterclockwise.
pub fn select_action(
    percept: &Percept,
    sensor_pos: [f64; 2],
    last_heading_deg: Option<f64>,
    actions: &ActionSet,
) -> Result<ActionDecision> {
    if !percept.above_threshold {
        return Err(Error::StimulusLost);
    }
    let dx = percept.centroid[0] - sensor_pos[0];
    let dy = percept.centroid[1] - sensor_pos[1];
    let dist = (dx * dx + dy * dy).sqrt();

    let (target, branch) = if dist > CHASE_RADIUS_MM {
        (dy.atan2(dx).to_degrees(), ActionBranch::Chase)
    } else {
        let t1 = percept.orientation_deg;
        let t2 = percept.orientation_deg + 180.0;
        let chosen = match last_heading_deg {
            Some(last) => {
                if ang_dist(t1, last) <= ang_dist(t2, last) {
                    t1
                } else {
                    t2
                }
            }
            None => t1,
        };
        (chosen, ActionBranch::Continue)
    };

    let mut best = 0usize;
    let mut best_abs = f64::INFINITY;
    let mut best_signed = 0.0;
    for (i, mv) in actions.moves().iter().enumerate() {
        let ang = mv[1].atan2(mv[0]).to_degrees();
        let signed = wrap_deg_180(ang - target);
        let abs = signed.abs();
        let better = abs + 1e-9 < best_abs
            || ((abs - best_abs).abs() <= 1e-9 && signed > best_signed);
        if better {
            best = i;
            best_abs = abs;
            best_signed = signed;
        }
    }
    Ok(ActionDecision {
        movement: actions.moves()[best],
        branch,
        heading_deg: wrap_deg_180(target),
    })
}

/// One executed exploration step, for the trajectory log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub step: u32,
    pub pose: [f64; 2],
    pub centroid: [f64; 2],
    pub orientation_deg: f64,
    pub movement: [f64; 2],
    pub branch: ActionBranch,
}

/// Why the loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExploreOutcome {
    /// Returned within the stop radius of the start after >= 4 steps.
    ClosedLoop,
    /// Step budget exhausted.
    MaxSteps,
    /// Percept fell below threshold; `at_start` when nothing was ever sensed.
    StimulusLost { at_start: bool },
}

/// Exploration controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ExploreParams {
    pub max_steps: u32,
    pub stop_radius_mm: f64,
    pub actions: ActionSet,
    pub perceive: PerceiveParams,
    /// Grid for the final fused map; `None` derives one from the sample
    /// bounding box at 1 mm spacing.
    pub map_grid: Option<GridSpec>,
}

impl Default for ExploreParams {
    fn default() -> Self {
        Self {
            max_steps: 40,
            stop_radius_mm: 5.0,
            actions: ActionSet::default(),
            perceive: PerceiveParams::default(),
            map_grid: None,
        }
    }
}

/// Exploration result: visited poses, per-step log, accumulated samples,
/// the fused map and the stop reason.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub visited: Vec<[f64; 2]>,
    pub trajectory: Vec<TrajectoryStep>,
    pub samples: ScanDataset,
    pub map: HapticMap,
    pub outcome: ExploreOutcome,
}

impl Exploration {
    pub fn steps(&self) -> usize {
        self.visited.len() - 1
    }
}

/// Run the exploration loop from `start`.
///
/// Readings are taken at every visited pose; the stimulus must be sensed at
/// the start pose or the run terminates immediately with a lost-stimulus
/// outcome and a single visited pose. Field-geometry problems (the sensor
/// leaving the synthesized field) surface as errors.
pub fn explore(
    sim: &TactileSimulator,
    start: [f64; 2],
    params: &ExploreParams,
    seed: u64,
) -> Result<Exploration> {
    if params.max_steps == 0 {
        return Err(Error::InvalidParameter("max_steps must be >= 1".into()));
    }
    let pins = sim.sensor.pins().positions().to_vec();
    let mut pos = start;
    let mut visited = vec![start];
    let mut samples = ScanDataset::default();
    let mut trajectory = Vec::new();
    let mut last_heading: Option<f64> = None;

    let outcome = loop {
        let step = visited.len() as u32 - 1;
        let reading = sim.read(pos, subseed(seed, step as u64))?;
        samples.push_reading(step, pos, &pins, &reading.delta_area);

        let percept = perceive(&samples, pos, &params.perceive);
        if !percept.above_threshold {
            break ExploreOutcome::StimulusLost { at_start: step == 0 };
        }
        let decision = select_action(&percept, pos, last_heading, &params.actions)?;
        trajectory.push(TrajectoryStep {
            step,
            pose: pos,
            centroid: percept.centroid,
            orientation_deg: percept.orientation_deg,
            movement: decision.movement,
            branch: decision.branch,
        });
        pos = [pos[0] + decision.movement[0], pos[1] + decision.movement[1]];
        visited.push(pos);
        last_heading = Some(decision.heading_deg);

        let steps_taken = visited.len() - 1;
        let d_start = ((pos[0] - start[0]).powi(2) + (pos[1] - start[1]).powi(2)).sqrt();
        if steps_taken >= 4 && d_start <= params.stop_radius_mm {
            break ExploreOutcome::ClosedLoop;
        }
        if steps_taken >= params.max_steps as usize {
            break ExploreOutcome::MaxSteps;
        }
    };

    let grid = match &params.map_grid {
        Some(g) => g.clone(),
        None => {
            let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for s in &samples.samples {
                for k in 0..2 {
                    min[k] = min[k].min(s.position[k]);
                    max[k] = max[k].max(s.position[k]);
                }
            }
            GridSpec::covering(min, max, params.perceive.grid_spacing_mm)?
        }
    };
    let (map, _) = mapping::fuse_map(&samples, &params.perceive.gpr, &grid)?;

    Ok(Exploration { visited, trajectory, samples, map, outcome })
}
