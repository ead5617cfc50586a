//! Four-step phase demodulation of the central fringe row, 1-D unwrapping
//! and cubic de-noising.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::polyfit;
use crate::raster::FringePattern;

/// Below this magnitude both arctangent arguments count as a contrast dropout.
pub const UNDEFINED_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseState {
    Wrapped,
    Unwrapped,
    Smoothed,
}

/// Phase along one image row, indexed by column.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    pub values: Vec<f64>,
    pub state: PhaseState,
    pub center_index: usize,
    /// Columns whose demodulation was undefined and inherited a neighbour's value.
    pub undefined: Vec<usize>,
}

impl PhaseProfile {
    pub fn new(values: Vec<f64>, state: PhaseState, center_index: usize) -> Result<Self> {
        if center_index >= values.len() {
            return Err(Error::OutOfBounds(format!(
                "center index {center_index} outside profile of length {}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            state,
            center_index,
            undefined: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Wraps an angle into (−π, π].
#[inline]
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi - TAU * (phi / TAU).round();
    if w <= -PI {
        w + TAU
    } else if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Row treated as the central row of an image with `height` rows.
pub fn central_row(height: usize) -> usize {
    height / 2
}

/// Column treated as the image center for a row of `width` samples.
pub fn central_column(width: usize) -> usize {
    width / 2
}

/// Demodulates the wrapped phase of `row` from four fringes shifted by π/2.
///
/// Uses the four-quadrant arctangent of `(I4 − I2, I1 − I3)`, so the result
/// covers the full (−π, π] range.
pub fn four_step_phase(patterns: [&FringePattern; 4], row: usize) -> Result<PhaseProfile> {
    let dims = patterns[0].dims();
    if let Some(p) = patterns.iter().find(|p| p.dims() != dims) {
        return Err(Error::shape(format!(
            "fringe images differ in size: {}x{} vs {}x{}",
            dims.0,
            dims.1,
            p.width(),
            p.height()
        )));
    }
    let (width, height) = dims;
    if row >= height {
        return Err(Error::OutOfBounds(format!(
            "row {row} outside image of height {height}"
        )));
    }
    let [r1, r2, r3, r4] = patterns.map(|p| p.row(row));
    let mut values = Vec::with_capacity(width);
    let mut defined = Vec::with_capacity(width);
    for x in 0..width {
        let num = r4[x] - r2[x];
        let den = r1[x] - r3[x];
        if num.abs() < UNDEFINED_EPSILON && den.abs() < UNDEFINED_EPSILON {
            values.push(f64::NAN);
            defined.push(false);
            continue;
        }
        let phi = num.atan2(den);
        values.push(if phi <= -PI { PI } else { phi });
        defined.push(true);
    }
    let undefined = fill_undefined(&mut values, &defined)?;
    Ok(PhaseProfile {
        values,
        state: PhaseState::Wrapped,
        center_index: central_column(width),
        undefined,
    })
}

/// Replaces undefined samples by their nearest defined neighbour (left wins ties).
fn fill_undefined(values: &mut [f64], defined: &[bool]) -> Result<Vec<usize>> {
    let missing: Vec<usize> = (0..values.len()).filter(|&i| !defined[i]).collect();
    if missing.is_empty() {
        return Ok(missing);
    }
    if missing.len() == values.len() {
        return Err(Error::param(
            "no column has usable fringe contrast; phase is undefined everywhere",
        ));
    }
    for &i in &missing {
        let left = (0..i).rev().find(|&j| defined[j]);
        let right = (i + 1..values.len()).find(|&j| defined[j]);
        let src = match (left, right) {
            (Some(l), Some(r)) => {
                if i - l <= r - i {
                    l
                } else {
                    r
                }
            }
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => unreachable!(),
        };
        values[i] = values[src];
    }
    Ok(missing)
}

/// Itoh unwrapping outward from the profile center in both directions.
///
/// The center sample keeps its wrapped value; every other sample is shifted by
/// an integer number of turns.
pub fn unwrap_1d(wrapped: &PhaseProfile) -> Result<PhaseProfile> {
    if wrapped.state != PhaseState::Wrapped {
        return Err(Error::param("unwrap_1d expects a wrapped phase profile"));
    }
    let v = &wrapped.values;
    let n = v.len();
    let c = wrapped.center_index;
    if c >= n {
        return Err(Error::OutOfBounds(format!(
            "center index {c} outside profile of length {n}"
        )));
    }
    let mut turns = vec![0i64; n];
    for i in c + 1..n {
        turns[i] = turns[i - 1] + jump(v[i] - v[i - 1]);
    }
    for i in (0..c).rev() {
        turns[i] = turns[i + 1] + jump(v[i] - v[i + 1]);
    }
    let values = v
        .iter()
        .zip(&turns)
        .map(|(&p, &t)| p + TAU * t as f64)
        .collect();
    Ok(PhaseProfile {
        values,
        state: PhaseState::Unwrapped,
        center_index: c,
        undefined: wrapped.undefined.clone(),
    })
}

#[inline]
fn jump(delta: f64) -> i64 {
    if delta > PI {
        -1
    } else if delta < -PI {
        1
    } else {
        0
    }
}

/// Replaces the unwrapped phase by its least-squares cubic in the column index.
pub fn smooth_cubic(unwrapped: &PhaseProfile) -> Result<PhaseProfile> {
    if unwrapped.state == PhaseState::Wrapped {
        return Err(Error::param(
            "smooth_cubic expects an unwrapped phase profile",
        ));
    }
    let n = unwrapped.len();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let poly = polyfit::fit(&xs, &unwrapped.values, 3)?;
    Ok(PhaseProfile {
        values: xs.iter().map(|&x| poly.eval(x)).collect(),
        state: PhaseState::Smoothed,
        center_index: unwrapped.center_index,
        undefined: unwrapped.undefined.clone(),
    })
}
