//! Undistortion by inverse mapping: every output pixel pulls its value from a
//! fractional source position on the same ray through the distortion center.

use rayon::prelude::*;

use crate::distortion_profile::{default_center, DistortionProfile};
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Per-output-pixel source coordinates in the distorted image.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapGrid {
    pub width: usize,
    pub height: usize,
    /// Dimensions of the distorted image the coordinates index into.
    pub source_dims: (usize, usize),
    pub src_x: Vec<f64>,
    pub src_y: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Builds the pull map for an output canvas of `out_dims`.
///
/// The output canvas center corresponds to the profile center. An output
/// pixel at radius `r` samples the source at radius `r'` with
/// `r' + Δr(r') = r` along the same ray.
pub fn build_remap_grid(
    profile: &DistortionProfile,
    out_dims: (usize, usize),
) -> Result<RemapGrid> {
    let (width, height) = out_dims;
    if width == 0 || height == 0 {
        return Err(Error::param("output canvas must be non-empty"));
    }
    let source_dims = profile.dims();
    let (cx, cy) = profile.center();
    let (ox, oy) = if out_dims == source_dims {
        (cx, cy)
    } else {
        default_center(out_dims)
    };
    let max_x = (source_dims.0 - 1) as f64;
    let max_y = (source_dims.1 - 1) as f64;

    let mut src_x = vec![0.0; width * height];
    let mut src_y = vec![0.0; width * height];
    let mut valid = vec![false; width * height];
    src_x
        .par_chunks_mut(width)
        .zip(src_y.par_chunks_mut(width))
        .zip(valid.par_chunks_mut(width))
        .enumerate()
        .for_each(|(y, ((row_x, row_y), row_v))| {
            let dy = y as f64 - oy;
            for x in 0..width {
                let dx = x as f64 - ox;
                let r = dx.hypot(dy);
                let (sx, sy) = if r == 0.0 {
                    (cx, cy)
                } else {
                    match profile.invert(r) {
                        Some(rd) => {
                            let s = rd / r;
                            (cx + s * dx, cy + s * dy)
                        }
                        None => {
                            row_x[x] = f64::NAN;
                            row_y[x] = f64::NAN;
                            continue;
                        }
                    }
                };
                row_x[x] = sx;
                row_y[x] = sy;
                row_v[x] = (0.0..=max_x).contains(&sx) && (0.0..=max_y).contains(&sy);
            }
        });
    Ok(RemapGrid {
        width,
        height,
        source_dims,
        src_x,
        src_y,
        valid,
    })
}

/// Canvas just large enough to hold the whole undistorted frame.
pub fn expanded_dims(profile: &DistortionProfile) -> (usize, usize) {
    let (w, h) = profile.dims();
    let (cx, cy) = profile.center();
    let mut reach_x: f64 = 0.0;
    let mut reach_y: f64 = 0.0;
    let mut visit = |x: usize, y: usize| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        let r = dx.hypot(dy);
        if r > 0.0 {
            let s = profile.forward(r) / r;
            reach_x = reach_x.max((s * dx).abs());
            reach_y = reach_y.max((s * dy).abs());
        }
    };
    for x in 0..w {
        visit(x, 0);
        visit(x, h - 1);
    }
    for y in 0..h {
        visit(0, y);
        visit(w - 1, y);
    }
    let out_w = (2 * reach_x.ceil() as usize + 1).max(w);
    let out_h = (2 * reach_y.ceil() as usize + 1).max(h);
    (out_w, out_h)
}

/// Bilinear interpolation at a fractional position inside the image.
///
/// At the last row or column the `+1` neighbour is clamped onto the edge.
pub fn bilinear_sample(image: &Raster, x: f64, y: f64) -> Result<f64> {
    let max_x = (image.width() - 1) as f64;
    let max_y = (image.height() - 1) as f64;
    if !((0.0..=max_x).contains(&x) && (0.0..=max_y).contains(&y)) {
        return Err(Error::OutOfBounds(format!(
            "sample point ({x}, {y}) outside {}x{} image",
            image.width(),
            image.height()
        )));
    }
    Ok(sample_inside(image, x, y))
}

#[inline]
fn sample_inside(image: &Raster, x: f64, y: f64) -> f64 {
    let w = image.width();
    let x1 = x.floor();
    let y1 = y.floor();
    let alpha = x - x1;
    let beta = y - y1;
    let xi = x1 as usize;
    let yi = y1 as usize;
    let xn = (xi + 1).min(w - 1);
    let yn = (yi + 1).min(image.height() - 1);
    let data = image.data();
    let d00 = data[yi * w + xi];
    let d10 = data[yi * w + xn];
    let d01 = data[yn * w + xi];
    let d11 = data[yn * w + xn];
    let v = (1.0 - alpha) * (1.0 - beta) * d00
        + alpha * (1.0 - beta) * d10
        + (1.0 - alpha) * beta * d01
        + alpha * beta * d11;
    let lo = d00.min(d10).min(d01.min(d11));
    let hi = d00.max(d10).max(d01.max(d11));
    v.clamp(lo, hi)
}

/// Resamples `image` through `grid`; invalid pixels take `fill`.
pub fn apply_grid(grid: &RemapGrid, image: &Raster, fill: f64) -> Result<Raster> {
    if image.dims() != grid.source_dims {
        return Err(Error::shape(format!(
            "grid expects a {}x{} source, image is {}x{}",
            grid.source_dims.0,
            grid.source_dims.1,
            image.width(),
            image.height()
        )));
    }
    let w = grid.width;
    let mut out = vec![fill; w * grid.height];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let base = y * w;
        for (x, px) in row.iter_mut().enumerate() {
            let i = base + x;
            if grid.valid[i] {
                *px = sample_inside(image, grid.src_x[i], grid.src_y[i]);
            }
        }
    });
    Raster::new(w, grid.height, out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrateOptions {
    /// Value for output pixels whose source lies outside the image.
    pub fill: f64,
    /// Grow the canvas to the bounding box of the undistorted frame.
    pub expand: bool,
    /// Re-center the profile on an image whose size differs from the capture.
    pub allow_rebuild: bool,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        Self {
            fill: 0.0,
            expand: false,
            allow_rebuild: false,
        }
    }
}

/// Profile adapted to `dims`, or a shape error when rebuilding is not allowed.
pub fn profile_for_dims(
    profile: &DistortionProfile,
    dims: (usize, usize),
    allow_rebuild: bool,
) -> Result<DistortionProfile> {
    if profile.dims() == dims {
        return Ok(profile.clone());
    }
    if !allow_rebuild {
        return Err(Error::shape(format!(
            "image is {}x{} but the profile was measured on {}x{}",
            dims.0,
            dims.1,
            profile.dims().0,
            profile.dims().1
        )));
    }
    profile.with_dims(dims)
}

/// Grid for calibrating images of `dims` with the given options.
pub fn grid_for_image(
    profile: &DistortionProfile,
    dims: (usize, usize),
    options: &CalibrateOptions,
) -> Result<RemapGrid> {
    let profile = profile_for_dims(profile, dims, options.allow_rebuild)?;
    let out_dims = if options.expand {
        expanded_dims(&profile)
    } else {
        dims
    };
    build_remap_grid(&profile, out_dims)
}

pub fn calibrate_image(
    image: &Raster,
    profile: &DistortionProfile,
    options: &CalibrateOptions,
) -> Result<Raster> {
    let grid = grid_for_image(profile, image.dims(), options)?;
    apply_grid(&grid, image, options.fill)
}

/// Calibrates every plane of a multi-channel image with one shared grid.
pub fn calibrate_planes(
    planes: &[Raster],
    profile: &DistortionProfile,
    options: &CalibrateOptions,
) -> Result<Vec<Raster>> {
    let first = planes
        .first()
        .ok_or_else(|| Error::param("image has no channels"))?;
    let grid = grid_for_image(profile, first.dims(), options)?;
    planes
        .iter()
        .map(|p| apply_grid(&grid, p, options.fill))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn ramp(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, |x, y| {
            (x * 7 + y * 13 % 11) as f64 + 0.25 * (x * y) as f64
        })
        .unwrap()
    }

    #[test]
    fn integer_points_are_exact() {
        let img = ramp(9, 7);
        for y in 0..7 {
            for x in 0..9 {
                assert_eq!(
                    bilinear_sample(&img, x as f64, y as f64).unwrap(),
                    img.get(x, y)
                );
            }
        }
    }

    #[test]
    fn midpoint_is_mean_of_corners() {
        let img = Raster::new(2, 2, vec![0.0, 2.0, 4.0, 6.0]).unwrap();
        assert_eq!(bilinear_sample(&img, 0.5, 0.5).unwrap(), 3.0);
    }

    #[test]
    fn out_of_bounds_rejected() {
        let img = ramp(4, 4);
        assert!(bilinear_sample(&img, -0.01, 1.0).is_err());
        assert!(bilinear_sample(&img, 1.0, 3.01).is_err());
        assert!(bilinear_sample(&img, f64::NAN, 1.0).is_err());
        // last column and row clamp the +1 neighbour
        assert_eq!(bilinear_sample(&img, 3.0, 3.0).unwrap(), img.get(3, 3));
        assert_eq!(
            bilinear_sample(&img, 3.0, 2.5).unwrap(),
            0.5 * (img.get(3, 2) + img.get(3, 3))
        );
    }

    #[test]
    fn identity_grid_is_exact() {
        let p = DistortionProfile::identity((40, 30), 0.0625).unwrap();
        let g = build_remap_grid(&p, (40, 30)).unwrap();
        for y in 0..30 {
            for x in 0..40 {
                let i = y * 40 + x;
                assert_eq!(g.src_x[i], x as f64);
                assert_eq!(g.src_y[i], y as f64);
                assert!(g.valid[i]);
            }
        }
    }

    #[test]
    fn identity_calibration_is_bit_identical_and_idempotent() {
        let img = ramp(33, 20);
        let p = DistortionProfile::identity((33, 20), 0.1).unwrap();
        let once = calibrate_image(&img, &p, &CalibrateOptions::default()).unwrap();
        assert_eq!(once, img);
        let twice = calibrate_image(&once, &p, &CalibrateOptions::default()).unwrap();
        assert_eq!(twice, once);
    }

    #[test]
    fn linear_profile_grid_shrinks_radius() {
        let f0 = 0.05;
        let p =
            DistortionProfile::new((101, 81), (50.0, 40.0), f0, vec![0.1 * TAU * f0, 0.0]).unwrap();
        let g = build_remap_grid(&p, (101, 81)).unwrap();
        for (x, y) in [(0usize, 0usize), (100, 80), (75, 40), (50, 10), (13, 77)] {
            let i = y * 101 + x;
            let dx = x as f64 - 50.0;
            let dy = y as f64 - 40.0;
            let r = dx.hypot(dy);
            let sr = (g.src_x[i] - 50.0).hypot(g.src_y[i] - 40.0);
            assert!((sr - r / 1.1).abs() < 1e-3);
            // source lies on the same ray
            let cross = dx * (g.src_y[i] - 40.0) - dy * (g.src_x[i] - 50.0);
            assert!(cross.abs() < 1e-6 * r.max(1.0));
        }
    }

    #[test]
    fn mismatched_dims_need_rebuild() {
        let p = DistortionProfile::identity((32, 32), 0.1).unwrap();
        let img = ramp(40, 32);
        assert!(matches!(
            calibrate_image(&img, &p, &CalibrateOptions::default()),
            Err(Error::Shape(_))
        ));
        let opts = CalibrateOptions {
            allow_rebuild: true,
            ..Default::default()
        };
        assert_eq!(calibrate_image(&img, &p, &opts).unwrap(), img);
    }

    #[test]
    fn expand_grows_canvas_for_barrel() {
        let f0 = 0.0625;
        // Δr = 2e-5 r'^3 px
        let p = DistortionProfile::new(
            (64, 48),
            (32.0, 24.0),
            f0,
            vec![2e-5 * TAU * f0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let (w, h) = expanded_dims(&p);
        assert!(w > 64 && h > 48);
        let img = Raster::filled(64, 48, 9.0).unwrap();
        let out = calibrate_image(
            &img,
            &p,
            &CalibrateOptions {
                fill: -1.0,
                expand: true,
                allow_rebuild: false,
            },
        )
        .unwrap();
        assert_eq!(out.dims(), (w, h));
        // center keeps the image, far corner falls outside the source
        assert_eq!(out.get(w / 2, h / 2), 9.0);
        assert_eq!(out.get(0, 0), -1.0);
    }
}
