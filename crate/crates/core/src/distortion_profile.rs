//! Radial distortion profile from the smoothed central-row phase.
//!
//! Pipeline: a line fitted to the central samples stands in for the
//! undistorted phase; its residual is the modulated phase, averaged over the
//! two half-rows by point rotation about the center, extended to the image
//! half-diagonal with a cubic, and converted to pixels by `Δr = Δφ / (2π f0)`.
//!
//! `Δr` is a function of the distorted radius `r'`; the undistorted radius is
//! `r = m(r') = r' + Δr(r')`, which must be strictly increasing.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::phase_demod::{central_row, PhaseProfile, PhaseState};
use crate::polyfit::{self, horner, horner_derivative};

pub const DEFAULT_FIT_POINTS: usize = 9;
pub const DEFAULT_EXTENSION_DEGREE: usize = 3;

/// Linear phase of the undistorted fringe, `φ(x) = k x + φ0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    /// Radians per pixel.
    pub k: f64,
    pub phi0: f64,
    /// Cycles per pixel, `k / 2π`.
    pub f0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Positive,
    Averaged,
}

/// Modulated phase indexed by radial distance `u = 0, 1, ...` from the center.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulatedPhase {
    pub values: Vec<f64>,
    pub source: Branch,
}

/// Least-squares line through the `n_points` samples centered on the profile center.
pub fn fit_undistorted_line(phase: &PhaseProfile, n_points: usize) -> Result<LinearFit> {
    if phase.state == PhaseState::Wrapped {
        return Err(Error::param(
            "line fit needs an unwrapped or smoothed phase",
        ));
    }
    if n_points < 3 || n_points.is_multiple_of(2) {
        return Err(Error::param(format!(
            "fit window must be odd and at least 3, got {n_points}"
        )));
    }
    let half = (n_points - 1) / 2;
    let c = phase.center_index;
    if c < half || c + half >= phase.len() {
        return Err(Error::OutOfBounds(format!(
            "{n_points}-point window around column {c} exceeds profile of length {}",
            phase.len()
        )));
    }
    let xs: Vec<f64> = (c - half..=c + half).map(|x| x as f64).collect();
    let (k, phi0) = polyfit::fit_line(&xs, &phase.values[c - half..=c + half])?;
    if !(k > 0.0) {
        return Err(Error::Orientation { k });
    }
    Ok(LinearFit {
        k,
        phi0,
        f0: k / TAU,
    })
}

/// Signed modulated phase per column: measured phase minus the fitted line.
pub fn modulated_phase(phase: &PhaseProfile, fit: &LinearFit) -> Vec<f64> {
    phase
        .values
        .iter()
        .enumerate()
        .map(|(x, &p)| p - (fit.k * x as f64 + fit.phi0))
        .collect()
}

/// Averages the two half-rows after rotating the negative one by 180° about
/// the center: `avg(u) = (Δφ(c + u) − Δφ(c − u)) / 2`.
pub fn symmetrize(delta: &[f64], center_index: usize) -> Result<ModulatedPhase> {
    let n = delta.len();
    if center_index == 0 || center_index + 1 >= n {
        return Err(Error::OutOfBounds(format!(
            "center {center_index} must be interior to a profile of length {n}"
        )));
    }
    let reach = center_index.min(n - 1 - center_index);
    let values = (0..=reach)
        .map(|u| 0.5 * (delta[center_index + u] - delta[center_index - u]))
        .collect();
    Ok(ModulatedPhase {
        values,
        source: Branch::Averaged,
    })
}

/// Cubic least-squares fit of the averaged modulated phase over its measured
/// range, for extrapolation out to `r_max`. Coefficients highest order first.
pub fn extend_profile(avg: &ModulatedPhase, r_max: f64) -> Result<[f64; 4]> {
    let c = extend_profile_with_degree(avg, r_max, 3)?;
    Ok([c[0], c[1], c[2], c[3]])
}

pub fn extend_profile_with_degree(
    avg: &ModulatedPhase,
    r_max: f64,
    degree: usize,
) -> Result<Vec<f64>> {
    let n = avg.values.len();
    if n < degree + 1 {
        return Err(Error::InsufficientData {
            needed: degree + 1,
            got: n,
        });
    }
    if !(r_max >= (n - 1) as f64) {
        return Err(Error::param(format!(
            "extension radius {r_max} is shorter than the measured range {}",
            n - 1
        )));
    }
    let us: Vec<f64> = (0..n).map(|u| u as f64).collect();
    Ok(polyfit::fit_from_origin(&us, &avg.values, degree)?.monomial_coefficients())
}

/// `Δr = Δφ / (2π f0)` with `Δφ` evaluated from the extension polynomial.
pub fn phase_to_distortion(coefficients: &[f64], f0: f64, r: f64) -> Result<f64> {
    if !(f0 > 0.0) {
        return Err(Error::param(format!("f0 must be positive, got {f0}")));
    }
    Ok(horner(coefficients, r) / (TAU * f0))
}

/// Half-diagonal of a `width × height` frame.
pub fn half_diagonal(width: usize, height: usize) -> f64 {
    (0.5 * width as f64).hypot(0.5 * height as f64)
}

/// Largest radius a profile must cover: the half-diagonal rounded up to whole pixels.
pub fn calibration_radius(width: usize, height: usize) -> f64 {
    half_diagonal(width, height).ceil()
}

/// Measured radial distortion of a lens.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionProfile {
    dims: (usize, usize),
    center: (f64, f64),
    f0: f64,
    coefficients: Vec<f64>,
    r_max: f64,
    /// `Δr` at integer radii `0..=r_max`.
    table: Vec<f64>,
}

impl DistortionProfile {
    /// Validates and tabulates a profile. Rejects non-monotone forward maps.
    pub fn new(
        dims: (usize, usize),
        center: (f64, f64),
        f0: f64,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        let (width, height) = dims;
        if width == 0 || height == 0 {
            return Err(Error::param("profile dimensions must be positive"));
        }
        if !(f0 > 0.0 && f0.is_finite()) {
            return Err(Error::param(format!("f0 must be positive, got {f0}")));
        }
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::param(
                "profile coefficients must be finite and non-empty",
            ));
        }
        if !(center.0.is_finite() && center.1.is_finite()) {
            return Err(Error::param("profile center must be finite"));
        }
        let r_max = calibration_radius(width, height);
        let n = r_max as usize;
        let scale = TAU * f0;
        let table: Vec<f64> = (0..=n)
            .map(|r| horner(&coefficients, r as f64) / scale)
            .collect();
        let profile = Self {
            dims,
            center,
            f0,
            coefficients,
            r_max,
            table,
        };
        profile.check_monotone()?;
        Ok(profile)
    }

    /// Profile with `Δr ≡ 0` centered on the frame.
    pub fn identity(dims: (usize, usize), f0: f64) -> Result<Self> {
        Self::new(dims, default_center(dims), f0, vec![0.0; 4])
    }

    fn check_monotone(&self) -> Result<()> {
        let scale = TAU * self.f0;
        for (i, w) in self.table.windows(2).enumerate() {
            let step = 1.0 + w[1] - w[0];
            if !(step > 0.0) {
                return Err(Error::NonMonotone(format!(
                    "r + Δr(r) decreases between r = {i} and r = {}",
                    i + 1
                )));
            }
        }
        let samples = (self.r_max * 4.0).ceil() as usize;
        for s in 0..=samples {
            let r = s as f64 * 0.25;
            let slope = 1.0 + horner_derivative(&self.coefficients, r) / scale;
            if !(slope > 0.0) {
                return Err(Error::NonMonotone(format!(
                    "d(r + Δr)/dr = {slope} at r = {r}"
                )));
            }
        }
        Ok(())
    }

    /// Same lens applied to a frame of different size, centered on that frame.
    pub fn with_dims(&self, dims: (usize, usize)) -> Result<Self> {
        Self::new(
            dims,
            default_center(dims),
            self.f0,
            self.coefficients.clone(),
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    /// Extension polynomial of `Δφ(r)`, highest order first.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// `Δr` at integer radii `0..=r_max`.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn delta_phi(&self, r: f64) -> f64 {
        horner(&self.coefficients, r)
    }

    pub fn delta_r(&self, r: f64) -> f64 {
        self.delta_phi(r) / (TAU * self.f0)
    }

    fn delta_r_slope(&self, r: f64) -> f64 {
        horner_derivative(&self.coefficients, r) / (TAU * self.f0)
    }

    /// Undistorted radius for distorted radius `r'`: `r' + Δr(r')`.
    pub fn forward(&self, r_distorted: f64) -> f64 {
        r_distorted + self.delta_r(r_distorted)
    }

    /// Distorted radius `r'` with `forward(r') = r`.
    ///
    /// Brackets on the tabulated map, interpolates linearly and polishes with
    /// safeguarded Newton steps. Radii below `forward(0)` clamp to 0; radii
    /// beyond the tabulated range return `None`.
    pub fn invert(&self, r: f64) -> Option<f64> {
        let t = &self.table;
        let last = t.len() - 1;
        let m = |i: usize| i as f64 + t[i];
        if !(r >= 0.0) || r > m(last) {
            return None;
        }
        if r <= m(0) {
            return Some(0.0);
        }
        // first index with m(i) > r
        let mut lo = 0usize;
        let mut hi = last;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if m(mid) > r {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (m_lo, m_hi) = (m(lo), m(hi));
        let mut x = lo as f64 + (r - m_lo) / (m_hi - m_lo);
        let (a, b) = (lo as f64, hi as f64);
        for _ in 0..3 {
            let resid = self.forward(x) - r;
            if resid == 0.0 {
                break;
            }
            let next = x - resid / (1.0 + self.delta_r_slope(x));
            if !(next >= a && next <= b) {
                break;
            }
            x = next;
        }
        Some(x)
    }

    /// `(r, Δr)` pairs at 1-px steps.
    pub fn sampled_table(&self) -> Vec<(f64, f64)> {
        self.table
            .iter()
            .enumerate()
            .map(|(r, &d)| (r as f64, d))
            .collect()
    }
}

/// Distortion center used for a frame of the given size.
pub fn default_center(dims: (usize, usize)) -> (f64, f64) {
    (
        crate::phase_demod::central_column(dims.0) as f64,
        central_row(dims.1) as f64,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileOptions {
    /// Samples used for the undistorted-line fit.
    pub n_points: usize,
    /// Degree of the extension polynomial.
    pub degree: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_FIT_POINTS,
            degree: DEFAULT_EXTENSION_DEGREE,
        }
    }
}

/// A built profile together with its intermediate stages.
#[derive(Debug, Clone)]
pub struct ProfileBuild {
    pub profile: DistortionProfile,
    pub fit: LinearFit,
    /// Signed modulated phase per column.
    pub modulation: Vec<f64>,
    pub averaged: ModulatedPhase,
}

pub fn build_profile(
    phase: &PhaseProfile,
    dims: (usize, usize),
    n_points: usize,
) -> Result<DistortionProfile> {
    Ok(build_profile_with_stages(
        phase,
        dims,
        ProfileOptions {
            n_points,
            ..Default::default()
        },
    )?
    .profile)
}

pub fn build_profile_with_stages(
    phase: &PhaseProfile,
    dims: (usize, usize),
    options: ProfileOptions,
) -> Result<ProfileBuild> {
    if phase.len() != dims.0 {
        return Err(Error::shape(format!(
            "phase profile has {} columns but the capture is {} wide",
            phase.len(),
            dims.0
        )));
    }
    let fit = fit_undistorted_line(phase, options.n_points)?;
    let modulation = modulated_phase(phase, &fit);
    let averaged = symmetrize(&modulation, phase.center_index)?;
    let r_max = calibration_radius(dims.0, dims.1);
    let coefficients = extend_profile_with_degree(&averaged, r_max, options.degree)?;
    let center = (phase.center_index as f64, central_row(dims.1) as f64);
    let profile = DistortionProfile::new(dims, center, fit.f0, coefficients)?;
    Ok(ProfileBuild {
        profile,
        fit,
        modulation,
        averaged,
    })
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn smoothed(values: Vec<f64>, center: usize) -> PhaseProfile {
        PhaseProfile::new(values, PhaseState::Smoothed, center).unwrap()
    }

    #[test]
    fn recovers_exact_line() {
        let p = smoothed((0..64).map(|x| 0.3927 * x as f64 + 1.0).collect(), 32);
        let fit = fit_undistorted_line(&p, 9).unwrap();
        assert!((fit.k - 0.3927).abs() < 1e-12);
        assert!((fit.phi0 - 1.0).abs() < 1e-12);
        assert!((fit.f0 - 0.3927 / TAU).abs() < 1e-15);
        assert!((fit.f0 - 0.0625).abs() < 1e-4);
    }

    #[test]
    fn cubic_perturbation_biases_slope_by_window_moment() {
        let c = 2e-4;
        let x0 = 40.0;
        let p = smoothed(
            (0..81)
                .map(|x| {
                    let u = x as f64 - x0;
                    0.5 * x as f64 + 2.0 + c * u.powi(3)
                })
                .collect(),
            40,
        );
        let fit = fit_undistorted_line(&p, 9).unwrap();
        // closed-form least squares on u = -4..4: slope bias = c Σu⁴ / Σu²
        let (s4, s2) = (-4i32..=4).fold((0.0, 0.0), |(a, b), u| {
            let u = u as f64;
            (a + u.powi(4), b + u * u)
        });
        assert_eq!(s4 / s2, 11.8);
        assert!((fit.k - (0.5 + c * s4 / s2)).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let p = smoothed((0..20).map(|x| x as f64).collect(), 3);
        assert!(matches!(
            fit_undistorted_line(&p, 9),
            Err(Error::OutOfBounds(_))
        ));
        assert!(matches!(
            fit_undistorted_line(&p, 4),
            Err(Error::Parameter(_))
        ));
        let p = smoothed((0..20).map(|x| -(x as f64)).collect(), 10);
        assert!(matches!(
            fit_undistorted_line(&p, 9),
            Err(Error::Orientation { .. })
        ));
    }

    #[test]
    fn linear_phase_has_no_modulation() {
        let p = smoothed((0..64).map(|x| 0.2 * x as f64 - 3.0).collect(), 32);
        let fit = fit_undistorted_line(&p, 9).unwrap();
        assert!(modulated_phase(&p, &fit).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn modulation_of_cubic_perturbation() {
        let x0 = 100usize;
        let cubic = |x: usize| 1e-9 * (x as f64 - x0 as f64).powi(3);
        let p = smoothed(
            (0..201).map(|x| 0.4 * x as f64 + 0.7 + cubic(x)).collect(),
            x0,
        );
        let fit = fit_undistorted_line(&p, 9).unwrap();
        let d = modulated_phase(&p, &fit);
        // the 9-point fit absorbs 11.8·c·u of the cubic into its slope
        for (x, v) in d.iter().enumerate() {
            let u = x as f64 - x0 as f64;
            let expect = 1e-9 * u.powi(3) - 1e-9 * 11.8 * u;
            assert!((v - expect).abs() < 1e-12, "x={x}: {v} vs {expect}");
        }
    }

    #[test]
    fn symmetrize_antisymmetric_and_symmetric() {
        let c = 10;
        let g = |u: f64| 0.01 * u.powi(3) + 0.3 * u;
        let anti: Vec<f64> = (0..21).map(|x| g(x as f64 - c as f64)).collect();
        let avg = symmetrize(&anti, c).unwrap();
        assert_eq!(avg.source, Branch::Averaged);
        assert_eq!(avg.values.len(), 11);
        for (u, v) in avg.values.iter().enumerate() {
            assert_eq!(*v, g(u as f64));
        }
        let sym: Vec<f64> = (0..21).map(|x| ((x as f64) - 10.0).powi(2)).collect();
        assert!(symmetrize(&sym, c)
            .unwrap()
            .values
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn symmetrize_rejects_edge_center() {
        assert!(symmetrize(&[0.0; 5], 0).is_err());
        assert!(symmetrize(&[0.0; 5], 4).is_err());
    }

    #[test]
    fn extension_recovers_cubic() {
        let coeffs = [-5.8123e-9, 8.7184e-9, 7.5508e-8, -3.9207e-8];
        let avg = ModulatedPhase {
            values: (0..256).map(|u| horner(&coeffs, u as f64)).collect(),
            source: Branch::Averaged,
        };
        let got = extend_profile(&avg, 362.0).unwrap();
        for (a, b) in got.iter().zip(coeffs) {
            assert_relative_eq!(*a, b, max_relative = 1e-9);
        }
        assert!(matches!(
            extend_profile(
                &ModulatedPhase {
                    values: vec![0.0; 3],
                    source: Branch::Averaged
                },
                10.0
            ),
            Err(Error::InsufficientData { .. })
        ));
        assert!(extend_profile(&avg, 100.0).is_err());
    }

    #[test]
    fn phase_to_pixels() {
        let f0 = 0.0625;
        assert_eq!(phase_to_distortion(&[0.0, 0.0], f0, 50.0).unwrap(), 0.0);
        assert_eq!(phase_to_distortion(&[TAU * f0], f0, 50.0).unwrap(), 1.0);
        assert!(phase_to_distortion(&[1.0], 0.0, 1.0).is_err());
    }

    #[test]
    fn full_hd_half_diagonal() {
        let p = DistortionProfile::identity((1920, 1080), 0.0625).unwrap();
        assert_eq!(p.r_max(), 1102.0);
        assert!((half_diagonal(1920, 1080) - 1101.4536).abs() < 1e-4);
        assert_eq!(p.table().len(), 1103);
    }

    #[test]
    fn rejects_non_monotone_profile() {
        // Δr = -r²/100 folds back at r = 50
        let f0 = 0.1;
        let a2 = -TAU * f0 / 100.0;
        let err = DistortionProfile::new((200, 200), (100.0, 100.0), f0, vec![a2, 0.0, 0.0]);
        assert!(matches!(err, Err(Error::NonMonotone(_))));
    }

    #[test]
    fn inversion_of_linear_map() {
        let f0 = 0.05;
        // Δr(r') = 0.1 r'
        let p = DistortionProfile::new((400, 300), (200.0, 150.0), f0, vec![0.1 * TAU * f0, 0.0])
            .unwrap();
        for r in [0.0, 0.3, 10.0, 123.456, 250.0] {
            let inv = p.invert(r).unwrap();
            assert!((inv - r / 1.1).abs() < 1e-3);
            assert!((p.forward(inv) - r).abs() < 1e-9);
        }
        // table ends at r' = 250, i.e. r = 275
        assert!(p.invert(274.9).is_some());
        assert!(p.invert(275.1).is_none());
    }

    #[test]
    fn identity_inversion_is_exact() {
        let p = DistortionProfile::identity((64, 48), 0.1).unwrap();
        for i in 0..400 {
            let r = i as f64 * 0.0987;
            assert_eq!(p.invert(r), Some(r));
        }
    }

    #[test]
    fn build_rejects_mismatched_dims() {
        let p = smoothed((0..64).map(|x| 0.3 * x as f64).collect(), 32);
        assert!(matches!(
            build_profile(&p, (65, 10), 9),
            Err(Error::Shape(_))
        ));
        let prof = build_profile(&p, (64, 10), 9).unwrap();
        assert!(prof.table().iter().all(|d| d.abs() < 1e-9));
    }
}
