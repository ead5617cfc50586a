//! Instantaneous frequency of a fringe row from the ridge of a complex Morlet
//! continuous wavelet transform.
//!
//! The transform is evaluated by direct spatial convolution. Each scale `s`
//! uses the L1-normalized kernel `(1/s) ψ(τ/s)` truncated at `|τ| ≤ 4s`, which
//! puts the magnitude peak of a pure tone of frequency `f` exactly at
//! `s = ω0 / (2π f)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Morlet center-frequency parameter ω0.
pub const MORLET_OMEGA0: f64 = 6.0;
/// Kernel truncation, in units of the Gaussian standard deviation.
pub const SUPPORT_SIGMAS: f64 = 4.0;
pub const MIN_SIGNAL_LEN: usize = 64;
pub const DEFAULT_SCALES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeResult {
    /// Ridge frequency per column, cycles/pixel. Empty when `no_ridge` is set.
    pub frequencies: Vec<f64>,
    /// Index into `scale_grid` of each ridge frequency.
    pub ridge_index: Vec<usize>,
    /// Winning wavelet-coefficient magnitude per column.
    pub coefficients_max: Vec<f64>,
    /// False for columns inside the cone of influence of their winning scale.
    pub confident: Vec<bool>,
    /// Analyzed frequencies, geometrically spaced, ascending.
    pub scale_grid: Vec<f64>,
    pub no_ridge: Option<String>,
}

impl RidgeResult {
    fn no_ridge(scale_grid: Vec<f64>, reason: impl Into<String>) -> Self {
        Self {
            frequencies: Vec::new(),
            ridge_index: Vec::new(),
            coefficients_max: Vec::new(),
            confident: Vec::new(),
            scale_grid,
            no_ridge: Some(reason.into()),
        }
    }

    pub fn has_ridge(&self) -> bool {
        self.no_ridge.is_none()
    }
}

/// Geometric frequency grid of `n` points over `[f_min, f_max]`.
pub fn geometric_grid(f_min: f64, f_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![f_min];
    }
    let ratio = f_max / f_min;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                f_max
            } else {
                f_min * ratio.powf(i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Default analysis band around a carrier estimate: `[f0/4, min(4 f0, 0.45)]`.
pub fn default_band(f0: f64) -> (f64, f64) {
    (f0 / 4.0, (4.0 * f0).min(0.45))
}

/// Scale (in pixels) whose Morlet peak response sits at `freq`.
#[inline]
pub fn scale_for_frequency(freq: f64) -> f64 {
    MORLET_OMEGA0 / (TAU * freq)
}

fn morlet_kernel(scale: f64) -> Vec<Complex64> {
    let half = (SUPPORT_SIGMAS * scale).ceil() as i64;
    (-half..=half)
        .map(|tau| {
            let t = tau as f64 / scale;
            // conjugated so the convolution below is a plain multiply-accumulate
            Complex64::from_polar((-0.5 * t * t).exp() / scale, -MORLET_OMEGA0 * t)
        })
        .collect()
}

/// Magnitude of the wavelet coefficients at one scale for every column.
fn magnitudes_at_scale(signal: &[f64], scale: f64) -> Vec<f64> {
    let kernel = morlet_kernel(scale);
    let half = (kernel.len() / 2) as isize;
    let n = signal.len() as isize;
    (0..n)
        .map(|b| {
            let lo = (b - half).max(0);
            let hi = (b + half).min(n - 1);
            let mut acc = Complex64::new(0.0, 0.0);
            for t in lo..=hi {
                acc += kernel[(t - b + half) as usize] * signal[t as usize];
            }
            acc.norm()
        })
        .collect()
}

/// Per-column frequency of the scale maximizing the Morlet coefficient magnitude.
///
/// The signal mean is removed before the transform.
pub fn wavelet_ifreq(
    signal: &[f64],
    f_min: f64,
    f_max: f64,
    n_scales: usize,
) -> Result<RidgeResult> {
    if signal.len() < MIN_SIGNAL_LEN {
        return Err(Error::InsufficientData {
            needed: MIN_SIGNAL_LEN,
            got: signal.len(),
        });
    }
    if !(f_min.is_finite() && f_max.is_finite() && f_min > 0.0 && f_max < 0.5) {
        return Err(Error::param(format!(
            "wavelet band [{f_min}, {f_max}] must lie inside (0, 0.5)"
        )));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("signal contains non-finite samples"));
    }
    if n_scales < 2 || f_min >= f_max {
        let grid = geometric_grid(f_min, f_max.max(f_min), n_scales.max(1));
        return Ok(RidgeResult::no_ridge(
            grid,
            format!("degenerate frequency grid ({n_scales} scales over [{f_min}, {f_max}])"),
        ));
    }
    let grid = geometric_grid(f_min, f_max, n_scales);

    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let centred: Vec<f64> = signal.iter().map(|v| v - mean).collect();
    let peak = centred.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak <= 1e-12 * mean.abs().max(1.0) {
        return Ok(RidgeResult::no_ridge(grid, "signal is constant"));
    }

    let planes: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&f| magnitudes_at_scale(&centred, scale_for_frequency(f)))
        .collect();

    let n = signal.len();
    let mut ridge_index = vec![0usize; n];
    let mut coefficients_max = vec![f64::NEG_INFINITY; n];
    for (k, plane) in planes.iter().enumerate() {
        for (b, &m) in plane.iter().enumerate() {
            if m > coefficients_max[b] {
                coefficients_max[b] = m;
                ridge_index[b] = k;
            }
        }
    }
    let confident = ridge_index
        .iter()
        .enumerate()
        .map(|(b, &k)| {
            let reach = SUPPORT_SIGMAS * scale_for_frequency(grid[k]);
            b as f64 >= reach && ((n - 1 - b) as f64) >= reach
        })
        .collect();
    Ok(RidgeResult {
        frequencies: ridge_index.iter().map(|&k| grid[k]).collect(),
        ridge_index,
        coefficients_max,
        confident,
        scale_grid: grid,
        no_ridge: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessReport {
    pub first_column: usize,
    pub last_column: usize,
    pub median_frequency: f64,
    /// Largest distance from the median ridge position, in grid steps.
    pub max_deviation_steps: f64,
    pub pass: bool,
}

/// Checks that the ridge stays within one grid step of its median over a
/// `window`-column span centered on `center_index`.
pub fn central_flatness(
    ridge: &RidgeResult,
    center_index: usize,
    window: usize,
) -> Result<FlatnessReport> {
    if let Some(reason) = &ridge.no_ridge {
        return Err(Error::param(format!("no ridge to assess: {reason}")));
    }
    if window == 0 {
        return Err(Error::param("flatness window must be non-empty"));
    }
    let n = ridge.ridge_index.len();
    let first = center_index.checked_sub(window / 2);
    let last = first.map(|f| f + window - 1);
    let (first, last) = match (first, last) {
        (Some(f), Some(l)) if l < n => (f, l),
        _ => {
            return Err(Error::OutOfBounds(format!(
                "window of {window} columns around {center_index} exceeds ridge of length {n}"
            )))
        }
    };
    let mut idx: Vec<usize> = ridge.ridge_index[first..=last].to_vec();
    idx.sort_unstable();
    let median = if window % 2 == 1 {
        idx[window / 2] as f64
    } else {
        0.5 * (idx[window / 2 - 1] + idx[window / 2]) as f64
    };
    let max_dev = idx
        .iter()
        .map(|&k| (k as f64 - median).abs())
        .fold(0.0, f64::max);
    let grid = &ridge.scale_grid;
    let median_frequency = {
        let lo = median.floor() as usize;
        let hi = median.ceil() as usize;
        (grid[lo] * grid[hi]).sqrt()
    };
    Ok(FlatnessReport {
        first_column: first,
        last_column: last,
        median_frequency,
        max_deviation_steps: max_dev,
        pass: max_dev <= 1.0,
    })
}
