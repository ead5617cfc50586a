//! End-to-end calibration from four captured fringe images.

use crate::distortion_profile::{
    build_profile_with_stages, DistortionProfile, ProfileBuild, ProfileOptions,
};
use crate::error::{Error, Result};
use crate::ifreq::{
    central_flatness, default_band, wavelet_ifreq, FlatnessReport, RidgeResult, DEFAULT_SCALES,
};
use crate::phase_demod::{central_row, four_step_phase, smooth_cubic, unwrap_1d, PhaseProfile};
use crate::raster::FringePattern;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Row to demodulate; defaults to the central row.
    pub row: Option<usize>,
    pub profile: ProfileOptions,
    /// Wavelet band in cycles/pixel; defaults to a band around the fitted f0.
    pub wavelet_band: Option<(f64, f64)>,
    pub wavelet_scales: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            row: None,
            profile: ProfileOptions::default(),
            wavelet_band: None,
            wavelet_scales: DEFAULT_SCALES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub row: usize,
    pub wrapped: PhaseProfile,
    pub unwrapped: PhaseProfile,
    pub smoothed: PhaseProfile,
    pub build: ProfileBuild,
    /// Instantaneous-frequency check; `Err` holds why it could not run.
    pub ridge: std::result::Result<RidgeResult, String>,
    pub flatness: std::result::Result<FlatnessReport, String>,
}

impl CalibrationReport {
    pub fn profile(&self) -> &DistortionProfile {
        &self.build.profile
    }

    pub fn into_profile(self) -> DistortionProfile {
        self.build.profile
    }
}

/// Demodulates, unwraps and smooths the chosen row, then builds the profile.
/// The central-flatness check is informative only and never fails the run.
pub fn calibrate_fringes(
    patterns: [&FringePattern; 4],
    options: &CalibrationOptions,
) -> Result<CalibrationReport> {
    let dims = patterns[0].dims();
    let row = options.row.unwrap_or_else(|| central_row(dims.1));
    if row >= dims.1 {
        return Err(Error::OutOfBounds(format!(
            "row {row} outside image of height {}",
            dims.1
        )));
    }
    let wrapped = four_step_phase(patterns, row)?;
    let unwrapped = unwrap_1d(&wrapped)?;
    let smoothed = smooth_cubic(&unwrapped)?;
    let build = build_profile_with_stages(&smoothed, dims, options.profile)?;

    let (f_min, f_max) = options
        .wavelet_band
        .unwrap_or_else(|| default_band(build.fit.f0));
    let ridge = wavelet_ifreq(patterns[0].row(row), f_min, f_max, options.wavelet_scales)
        .map_err(|e| e.to_string())
        .and_then(|r| match &r.no_ridge {
            Some(reason) => Err(reason.clone()),
            None => Ok(r),
        });
    let flatness = ridge.as_ref().map_err(Clone::clone).and_then(|r| {
        central_flatness(r, smoothed.center_index, options.profile.n_points)
            .map_err(|e| e.to_string())
    });
    Ok(CalibrationReport {
        row,
        wrapped,
        unwrapped,
        smoothed,
        build,
        ridge,
        flatness,
    })
}
