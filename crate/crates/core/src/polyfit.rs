//! Least-squares polynomial fitting.
//!
//! Fits are solved in a centred and scaled abscissa `t = (x - shift) / scale`
//! so the Vandermonde matrix stays well conditioned for pixel-scale inputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Polynomial produced by a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPolynomial {
    /// Coefficients in the normalized variable, lowest order first.
    normalized: Vec<f64>,
    shift: f64,
    scale: f64,
}

impl FittedPolynomial {
    pub fn degree(&self) -> usize {
        self.normalized.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.shift) / self.scale;
        self.normalized
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * t + c)
    }

    /// Coefficients in the raw variable `x`, highest order first.
    pub fn monomial_coefficients(&self) -> Vec<f64> {
        let n = self.normalized.len();
        let mut raw = vec![0.0; n];
        // b_j * ((x - c) / s)^j expanded binomially.
        for (j, &b) in self.normalized.iter().enumerate() {
            let bj = b / self.scale.powi(j as i32);
            let mut binom = 1.0;
            for (i, coeff) in raw.iter_mut().enumerate().take(j + 1) {
                // term: C(j, i) * x^i * (-c)^(j - i)
                *coeff += bj * binom * (-self.shift).powi((j - i) as i32);
                binom = binom * (j - i) as f64 / (i + 1) as f64;
            }
        }
        raw.reverse();
        raw
    }
}

/// Fits a polynomial of `degree` to `(xs, ys)` in the least-squares sense.
pub fn fit(xs: &[f64], ys: &[f64], degree: usize) -> Result<FittedPolynomial> {
    if xs.len() != ys.len() {
        return Err(Error::shape(format!(
            "abscissa has {} samples, ordinate {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < degree + 1 {
        return Err(Error::InsufficientData {
            needed: degree + 1,
            got: n,
        });
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let shift = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let scale = if half > 0.0 { half } else { 1.0 };
    fit_normalized(xs, ys, degree, shift, scale)
}

/// Like [`fit`] but keeps the origin at `x = 0`, so the monomial conversion is
/// a pure rescale.
pub fn fit_from_origin(xs: &[f64], ys: &[f64], degree: usize) -> Result<FittedPolynomial> {
    let hi = xs.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    fit_normalized(xs, ys, degree, 0.0, if hi > 0.0 { hi } else { 1.0 })
}

fn fit_normalized(
    xs: &[f64],
    ys: &[f64],
    degree: usize,
    shift: f64,
    scale: f64,
) -> Result<FittedPolynomial> {
    if xs.len() != ys.len() {
        return Err(Error::shape("abscissa and ordinate lengths differ"));
    }
    let n = xs.len();
    if n < degree + 1 {
        return Err(Error::InsufficientData {
            needed: degree + 1,
            got: n,
        });
    }
    let cols = degree + 1;
    let design = DMatrix::from_fn(n, cols, |r, c| ((xs[r] - shift) / scale).powi(c as i32));
    let rhs = DVector::from_column_slice(ys);
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(min_sv > max_sv * 1e-12) {
        return Err(Error::param(
            "least-squares system is rank deficient (abscissae not distinct enough)",
        ));
    }
    let sol = svd
        .solve(&rhs, max_sv * 1e-14)
        .map_err(|e| Error::param(format!("least-squares solve failed: {e}")))?;
    Ok(FittedPolynomial {
        normalized: sol.iter().copied().collect(),
        shift,
        scale,
    })
}

/// Evaluates a polynomial given highest-order-first coefficients.
#[inline]
pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Derivative of a polynomial given highest-order-first coefficients.
#[inline]
pub fn horner_derivative(coeffs: &[f64], x: f64) -> f64 {
    let n = coeffs.len();
    if n < 2 {
        return 0.0;
    }
    coeffs[..n - 1]
        .iter()
        .enumerate()
        .fold(0.0, |acc, (i, &c)| acc * x + c * (n - 1 - i) as f64)
}

/// Simple linear regression `y = slope * x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::shape("abscissa and ordinate lengths differ"));
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (sxy, sxx) = xs.iter().zip(ys).fold((0.0, 0.0), |(sxy, sxx), (&x, &y)| {
        let dx = x - mx;
        (sxy + dx * (y - my), sxx + dx * dx)
    });
    if sxx == 0.0 {
        return Err(Error::param("all abscissae identical"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
