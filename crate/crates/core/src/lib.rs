//! Radial lens distortion calibration from four phase-shifted fringe images.
//!
//! A flat screen shows four sinusoidal fringes shifted by π/2; the lens under
//! test records them. The central row is demodulated with the four-step
//! formula, unwrapped and smoothed. A line through the central samples gives
//! the undistorted carrier, its residual the modulated phase, and
//! `Δr = Δφ / (2π f0)` the radial distortion, which is then inverted to
//! undistort arbitrary images by bilinear resampling.
//!
//! [`simulator`] renders the same captures through a parametric radial lens
//! so the whole chain can be checked against ground truth.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distortion_profile;
pub mod error;
pub mod ifreq;
pub mod io_formats;
pub mod phase_demod;
pub mod pipeline;
pub mod polyfit;
pub mod raster;
pub mod remap;
pub mod simulator;
pub mod template_gen;

pub use distortion_profile::{
    build_profile, DistortionProfile, LinearFit, ModulatedPhase, ProfileOptions,
};
pub use error::{Error, Result};
pub use ifreq::{central_flatness, wavelet_ifreq, FlatnessReport, RidgeResult};
pub use phase_demod::{four_step_phase, smooth_cubic, unwrap_1d, PhaseProfile, PhaseState};
pub use pipeline::{calibrate_fringes, CalibrationOptions, CalibrationReport};
pub use raster::{FringePattern, Raster};
pub use remap::{bilinear_sample, build_remap_grid, calibrate_image, CalibrateOptions, RemapGrid};
pub use simulator::{ModelKind, RadialModel, RenderOptions};
pub use template_gen::{generate_fringe, generate_template_set, FringeParams};
