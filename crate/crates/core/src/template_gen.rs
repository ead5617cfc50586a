//! Phase-shifted sinusoidal fringe templates.
//!
//! Pattern `i` carries `A + B cos(2π f0 x + i π/2)` along x and is constant
//! along y. Templates stay real-valued; quantization happens at export.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};
use crate::raster::{FringePattern, Raster};

/// Default background intensity for 8-bit export.
pub const DEFAULT_BACKGROUND: f64 = 128.0;
/// Default modulation amplitude for 8-bit export.
pub const DEFAULT_AMPLITUDE: f64 = 100.0;
/// Default carrier frequency, cycles per pixel (16 px period).
pub const DEFAULT_F0: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeParams {
    pub width: usize,
    pub height: usize,
    /// Carrier frequency in cycles per pixel along x.
    pub f0: f64,
    /// Background intensity `A`.
    pub background: f64,
    /// Modulation amplitude `B`.
    pub amplitude: f64,
    /// Selects the phase shift `shift_index * π/2`; must be 0..=3.
    pub shift_index: u8,
}

impl FringeParams {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param(format!(
                "template dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::param(format!(
                "f0 must be positive, got {}",
                self.f0
            )));
        }
        if !(self.background > 0.0 && self.background.is_finite()) {
            return Err(Error::param("background intensity must be positive"));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::param("modulation amplitude must be positive"));
        }
        if self.background - self.amplitude < 0.0 {
            return Err(Error::param(format!(
                "background {} minus amplitude {} would go negative",
                self.background, self.amplitude
            )));
        }
        if self.shift_index > 3 {
            return Err(Error::param(format!(
                "shift index must be in 0..=3, got {}",
                self.shift_index
            )));
        }
        Ok(())
    }
}

/// Intensity of the ideal fringe at abscissa `x`.
#[inline]
pub fn fringe_value(x: f64, f0: f64, background: f64, amplitude: f64, shift_index: u8) -> f64 {
    background + amplitude * (TAU * f0 * x + shift_index as f64 * FRAC_PI_2).cos()
}

pub fn generate_fringe(params: &FringeParams) -> Result<FringePattern> {
    params.validate()?;
    let row: Vec<f64> = (0..params.width)
        .map(|x| {
            fringe_value(
                x as f64,
                params.f0,
                params.background,
                params.amplitude,
                params.shift_index,
            )
        })
        .collect();
    let mut data = Vec::with_capacity(params.width * params.height);
    for _ in 0..params.height {
        data.extend_from_slice(&row);
    }
    Ok(Raster::from_parts_unchecked(
        params.width,
        params.height,
        data,
    ))
}

/// The four templates in shift order 0, π/2, π, 3π/2.
pub fn generate_template_set(
    width: usize,
    height: usize,
    f0: f64,
    background: f64,
    amplitude: f64,
) -> Result<[FringePattern; 4]> {
    let make = |shift_index| {
        generate_fringe(&FringeParams {
            width,
            height,
            f0,
            background,
            amplitude,
            shift_index,
        })
    };
    Ok([make(0)?, make(1)?, make(2)?, make(3)?])
}

/// File name used for template `index` (`template_0.png`, ...).
pub fn template_file_name(index: usize, extension: &str) -> String {
    format!("template_{index}.{extension}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(shift_index: u8) -> FringeParams {
        FringeParams {
            width: 32,
            height: 4,
            f0: 1.0 / 16.0,
            background: 128.0,
            amplitude: 100.0,
            shift_index,
        }
    }

    #[test]
    fn known_pixel_values() {
        let p0 = generate_fringe(&params(0)).unwrap();
        let p2 = generate_fringe(&params(2)).unwrap();
        assert_eq!(p0.get(0, 0), 228.0);
        assert!((p2.get(0, 0) - 28.0).abs() < 1e-12);
        assert!((p0.get(4, 0) - 128.0).abs() < 1e-12);
    }

    #[test]
    fn set_values_at_origin() {
        let set = generate_template_set(16, 2, 1.0 / 16.0, 128.0, 100.0).unwrap();
        let expect = [228.0, 128.0, 28.0, 128.0];
        for (p, e) in set.iter().zip(expect) {
            assert!((p.get(0, 1) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_params() {
        for bad in [
            FringeParams {
                f0: 0.0,
                ..params(0)
            },
            FringeParams {
                f0: -0.1,
                ..params(0)
            },
            FringeParams {
                width: 0,
                ..params(0)
            },
            FringeParams {
                amplitude: 200.0,
                ..params(0)
            },
            FringeParams {
                background: 0.0,
                ..params(0)
            },
            FringeParams {
                shift_index: 4,
                ..params(0)
            },
        ] {
            assert!(
                matches!(generate_fringe(&bad), Err(Error::Parameter(_))),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn phase_shift_identity_default_levels() {
        let [i1, i2, i3, i4] = generate_template_set(64, 1, 1.0 / 16.0, 128.0, 100.0).unwrap();
        for x in 0..64 {
            let phi = TAU * x as f64 / 16.0;
            assert!((i4.get(x, 0) - i2.get(x, 0) - 200.0 * phi.sin()).abs() < 1e-12);
            assert!((i1.get(x, 0) - i3.get(x, 0) - 200.0 * phi.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_are_bit_identical() {
        let p = generate_fringe(&params(1)).unwrap();
        let first = p.row(0).to_vec();
        assert!(p.rows().all(|r| r == first.as_slice()));
    }

    #[test]
    fn periodic_with_integer_period() {
        let p = generate_fringe(&params(3)).unwrap();
        for x in 0..16 {
            assert!((p.get(x, 0) - p.get(x + 16, 0)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn phase_shift_identities(
            f0 in 0.002f64..0.45,
            a in 1.0f64..1000.0,
            contrast in 0.01f64..1.0,
        ) {
            let b = a * contrast;
            let [i1, i2, i3, i4] = generate_template_set(64, 2, f0, a, b).unwrap();
            for x in 0..64 {
                let phi = TAU * f0 * x as f64;
                // rounding of the shifted argument scales with |phi| and the intensity level
                let tol = 1e-14 * (a + b) * (4.0 + phi);
                let s = i4.get(x, 0) - i2.get(x, 0);
                let c = i1.get(x, 0) - i3.get(x, 0);
                prop_assert!((s - 2.0 * b * phi.sin()).abs() < tol);
                prop_assert!((c - 2.0 * b * phi.cos()).abs() < tol);
                prop_assert!((i1.get(x, 1) + i3.get(x, 1) - 2.0 * a).abs() < tol);
                prop_assert!((i2.get(x, 1) + i4.get(x, 1) - 2.0 * a).abs() < tol);
            }
        }
    }
}
