//! Hardware-free simulation of a tactile robot probing mid-air ultrasonic
//! haptics.
//!
//! The pipeline runs stimulus synthesis through autonomous exploration:
//!
//! 1. [`acoustics`] — focal-point stimuli (unmodulated point or a
//!    spatiotemporally modulated path) and their time-averaged pressure
//!    fields on the sensing plane.
//! 2. [`skin`] — compliant-skin indentation: compliance scaling plus a
//!    Gaussian point-spread of the elastic surface.
//! 3. [`sensor`] — a 127-pin virtual tactile sensor whose markers shear
//!    under the indentation gradient; bounded Voronoi cell-area changes are
//!    the per-pin signal.
//! 4. [`mapping`] — systematic grid scans fused into normalized world-frame
//!    maps with exact Gaussian process regression ([`gpr`]).
//! 5. [`explore`] — a sense-perceive-act loop that follows stimulus contours
//!    using image moments and a discrete action rule.
//! 6. [`metrics`] — extent/RMSE metrics and comparison reports.
//!
//! Everything is deterministic given a 64-bit seed; [`io`] provides the CSV
//! and PGM formats shared with the command-line driver.

pub mod acoustics;
pub mod error;
pub mod explore;
pub mod field;
pub mod gpr;
pub mod io;
pub mod mapping;
pub mod metrics;
pub mod rng;
pub mod sensor;
pub mod skin;
pub mod voronoi;

pub use acoustics::{
    make_shape, path_length, time_averaged_field, FocalSpotModel, ParametricPath, ShapeName,
    StimulusKind, StimulusSpec,
};
pub use error::{Error, Result};
pub use explore::{
    explore, perceive, select_action, ActionBranch, ActionDecision, ActionSet, ExploreOutcome,
    ExploreParams, Exploration, PerceiveParams, Percept, TrajectoryStep,
};
pub use field::{Field2D, GridSpec, HapticMap, IndentationField, PressureField};
pub use gpr::{GprHyper, GprModel};
pub use mapping::{
    fit_gpr, fuse_map, grid_scan, predict_map, thin_dataset, FusionHyper, Sample, ScanDataset,
    ScanSpec,
};
pub use metrics::{extent_at_fraction, report, rmse_percent, ComparisonReport, ReportInput, ReportRow};
pub use sensor::{
    pin_lattice, PinArray, SensorModel, TactileFrame, TactileSensor, TactileSimulator,
    VoronoiFeatures, DISC_RADIUS_MM, PIN_COUNT,
};
pub use skin::{indent, SkinModel};
