//! Synthetic wide-angle lens used as a ground-truth oracle.
//!
//! A [`RadialModel`] maps undistorted radius `r_u` to distorted radius `r_d`
//! about a center. Rendering pulls every distorted pixel from the ideal scene
//! at `r_u = inverse(r_d)` along the same ray.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::distortion_profile::half_diagonal;
use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::template_gen::fringe_value;

/// Default vignetting falloff: intensity drops by this fraction at the frame corner.
pub const DEFAULT_VIGNETTING: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `r_d = r_u (1 + k1 r_u² + k2 r_u⁴)`
    Polynomial { k1: f64, k2: f64 },
    /// `r_d = r_u / (1 + λ r_u²)`
    Division { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialModel {
    pub kind: ModelKind,
    pub center: (f64, f64),
    /// Supremum of undistorted radii on which the map is strictly increasing.
    monotone_limit: f64,
}

impl RadialModel {
    pub fn new(kind: ModelKind, center: (f64, f64)) -> Result<Self> {
        let finite = match kind {
            ModelKind::Polynomial { k1, k2 } => k1.is_finite() && k2.is_finite(),
            ModelKind::Division { lambda } => lambda.is_finite(),
        };
        if !finite || !center.0.is_finite() || !center.1.is_finite() {
            return Err(Error::param("radial model parameters must be finite"));
        }
        let monotone_limit = match kind {
            ModelKind::Division { lambda } if lambda != 0.0 => 1.0 / lambda.abs().sqrt(),
            ModelKind::Division { .. } => f64::INFINITY,
            ModelKind::Polynomial { k1, k2 } => {
                // smallest positive root t = r² of 1 + 3 k1 t + 5 k2 t²
                let (a, b, c) = (5.0 * k2, 3.0 * k1, 1.0);
                let roots: Vec<f64> = if a == 0.0 {
                    if b == 0.0 {
                        vec![]
                    } else {
                        vec![-c / b]
                    }
                } else {
                    let disc = b * b - 4.0 * a * c;
                    if disc < 0.0 {
                        vec![]
                    } else {
                        let s = disc.sqrt();
                        vec![(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)]
                    }
                };
                roots
                    .into_iter()
                    .filter(|t| *t > 0.0)
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            }
        };
        Ok(Self {
            kind,
            center,
            monotone_limit,
        })
    }

    pub fn division(lambda: f64, center: (f64, f64)) -> Result<Self> {
        Self::new(ModelKind::Division { lambda }, center)
    }

    pub fn polynomial(k1: f64, k2: f64, center: (f64, f64)) -> Result<Self> {
        Self::new(ModelKind::Polynomial { k1, k2 }, center)
    }

    pub fn identity(center: (f64, f64)) -> Self {
        Self {
            kind: ModelKind::Division { lambda: 0.0 },
            center,
            monotone_limit: f64::INFINITY,
        }
    }

    /// Model centered on a `width × height` frame, checked monotone out to its corners.
    pub fn for_frame(kind: ModelKind, dims: (usize, usize)) -> Result<Self> {
        let model = Self::new(kind, (dims.0 as f64 / 2.0, dims.1 as f64 / 2.0))?;
        model.check_field(half_diagonal(dims.0, dims.1))?;
        Ok(model)
    }

    /// Largest distorted radius reachable on the monotone branch.
    pub fn max_distorted_radius(&self) -> f64 {
        match self.kind {
            _ if self.monotone_limit.is_infinite() => f64::INFINITY,
            // pincushion division lens: r_d grows without bound toward the pole
            ModelKind::Division { lambda } if lambda < 0.0 => f64::INFINITY,
            _ => self.forward(self.monotone_limit),
        }
    }

    /// Rejects models that are not strictly increasing out to distorted radius `r_d_max`.
    pub fn check_field(&self, r_d_max: f64) -> Result<()> {
        if r_d_max < self.max_distorted_radius() {
            Ok(())
        } else {
            Err(Error::NonMonotone(format!(
                "radial model {:?} folds over at r_u = {:.3} (r_d = {:.3}) inside the field radius {r_d_max:.3}",
                self.kind,
                self.monotone_limit,
                self.max_distorted_radius()
            )))
        }
    }

    pub fn forward(&self, r_u: f64) -> f64 {
        match self.kind {
            ModelKind::Polynomial { k1, k2 } => {
                let r2 = r_u * r_u;
                r_u * (1.0 + k1 * r2 + k2 * r2 * r2)
            }
            ModelKind::Division { lambda } => r_u / (1.0 + lambda * r_u * r_u),
        }
    }

    fn slope(&self, r_u: f64) -> f64 {
        match self.kind {
            ModelKind::Polynomial { k1, k2 } => {
                let r2 = r_u * r_u;
                1.0 + 3.0 * k1 * r2 + 5.0 * k2 * r2 * r2
            }
            ModelKind::Division { lambda } => {
                let q = 1.0 + lambda * r_u * r_u;
                (1.0 - lambda * r_u * r_u) / (q * q)
            }
        }
    }

    /// Undistorted radius for distorted radius `r_d`, on the monotone branch.
    pub fn inverse(&self, r_d: f64) -> Result<f64> {
        if !(r_d >= 0.0) {
            return Err(Error::param(format!(
                "radius must be non-negative, got {r_d}"
            )));
        }
        if r_d >= self.max_distorted_radius() {
            return Err(Error::OutOfBounds(format!(
                "distorted radius {r_d} beyond the model's monotone range"
            )));
        }
        if r_d == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi, mut x): (f64, f64, f64) = match self.kind {
            ModelKind::Division { lambda } => {
                let guess = 2.0 * r_d / (1.0 + (1.0 - 4.0 * lambda * r_d * r_d).max(0.0).sqrt());
                (0.0, self.monotone_limit, guess)
            }
            ModelKind::Polynomial { .. } => {
                let mut hi = r_d.max(1.0).min(self.monotone_limit);
                while self.forward(hi) < r_d && hi < self.monotone_limit {
                    hi = (hi * 2.0).min(self.monotone_limit);
                }
                (0.0, hi, r_d.min(hi))
            }
        };
        // safeguarded Newton; falls back to bisection when a step leaves the bracket
        for _ in 0..100 {
            let resid = self.forward(x) - r_d;
            if resid == 0.0 {
                return Ok(x);
            }
            if resid > 0.0 {
                hi = hi.min(x);
            } else {
                lo = lo.max(x);
            }
            let step = resid / self.slope(x);
            let next = x - step;
            let next = if next > lo && next < hi && next.is_finite() {
                next
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 1e-15 * x.max(1.0) {
                return Ok(next);
            }
            x = next;
        }
        Ok(x)
    }

    /// Ground-truth radial distortion `r_u − r_d` at distorted radius `r_d`.
    pub fn delta_r(&self, r_d: f64) -> Result<f64> {
        Ok(self.inverse(r_d)? - r_d)
    }

    /// Undistorted position feeding distorted pixel position `(x, y)`.
    pub fn undistort_point(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let (cx, cy) = self.center;
        let dx = x - cx;
        let dy = y - cy;
        let r_d = dx.hypot(dy);
        if r_d == 0.0 {
            return Ok((cx, cy));
        }
        let s = self.inverse(r_d)? / r_d;
        Ok((cx + s * dx, cy + s * dy))
    }

    /// Distorted position of undistorted point `(x, y)`.
    pub fn distort_point(&self, x: f64, y: f64) -> (f64, f64) {
        let (cx, cy) = self.center;
        let dx = x - cx;
        let dy = y - cy;
        let r_u = dx.hypot(dy);
        if r_u == 0.0 {
            return (cx, cy);
        }
        let s = self.forward(r_u) / r_u;
        (cx + s * dx, cy + s * dy)
    }
}

/// `(r_d, Δr)` at 1-px steps out to `ceil(r_max)`.
pub fn ground_truth_table(model: &RadialModel, r_max: f64) -> Result<Vec<(f64, f64)>> {
    (0..=r_max.ceil() as usize)
        .map(|r| {
            let r = r as f64;
            Ok((r, model.delta_r(r)?))
        })
        .collect()
}

/// Ideal, undistorted scene intensity at a point.
pub trait Scene: Sync {
    fn value(&self, x: f64, y: f64) -> f64;
}

/// Phase-shifted fringe; `freq_scale` stands in for the screen distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeScene {
    pub f0: f64,
    pub background: f64,
    pub amplitude: f64,
    pub shift_index: u8,
    pub freq_scale: f64,
}

impl Scene for FringeScene {
    fn value(&self, x: f64, _y: f64) -> f64 {
        fringe_value(
            x,
            self.f0 * self.freq_scale,
            self.background,
            self.amplitude,
            self.shift_index,
        )
    }
}

/// Checkerboard with a light square at `origin`'s lower-right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckerScene {
    pub square: f64,
    pub origin: (f64, f64),
    pub dark: f64,
    pub light: f64,
    /// Edge blur scale in pixels (tanh profile); 0 gives hard edges.
    pub softness: f64,
}

impl Scene for CheckerScene {
    fn value(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.origin.0;
        let dy = y - self.origin.1;
        if self.softness > 0.0 {
            let gain = self.square / (PI * self.softness);
            let edge = |d: f64| ((PI * d / self.square).sin() * gain).tanh();
            let mid = 0.5 * (self.light + self.dark);
            return mid + 0.5 * (self.light - self.dark) * edge(dx) * edge(dy);
        }
        let i = (dx / self.square).floor() as i64;
        let j = (dy / self.square).floor() as i64;
        if (i + j).rem_euclid(2) == 0 {
            self.light
        } else {
            self.dark
        }
    }
}

/// Dark straight lines of `thickness` px every `spacing` px on a light field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineGridScene {
    pub spacing: f64,
    pub thickness: f64,
    pub origin: (f64, f64),
    pub background: f64,
    pub line: f64,
}

impl Scene for LineGridScene {
    fn value(&self, x: f64, y: f64) -> f64 {
        let near = |v: f64, o: f64| {
            let d = (v - o).rem_euclid(self.spacing);
            d.min(self.spacing - d) <= 0.5 * self.thickness
        };
        if near(x, self.origin.0) || near(y, self.origin.1) {
            self.line
        } else {
            self.background
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Samples per pixel along each axis; 1 samples pixel centers only.
    pub supersample: usize,
    /// Standard deviation of additive Gaussian noise, in gray levels.
    pub noise_sigma: f64,
    /// Fractional intensity loss at the frame corner (quadratic falloff).
    pub vignetting: Option<f64>,
    pub seed: u64,
    /// Round to integers and clamp to `[0, max]`, emulating a quantized capture.
    pub quantize_max: Option<f64>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            supersample: 1,
            noise_sigma: 0.0,
            vignetting: None,
            seed: 0,
            quantize_max: None,
        }
    }
}

/// Renders what the simulated lens records of `scene` on a `dims` sensor.
pub fn render_distorted(
    scene: &dyn Scene,
    model: &RadialModel,
    dims: (usize, usize),
    options: &RenderOptions,
) -> Result<Raster> {
    let (width, height) = dims;
    if width == 0 || height == 0 {
        return Err(Error::param("render dimensions must be positive"));
    }
    if options.supersample == 0 {
        return Err(Error::param("supersample must be at least 1"));
    }
    if !(options.noise_sigma >= 0.0 && options.noise_sigma.is_finite()) {
        return Err(Error::param("noise sigma must be finite and non-negative"));
    }
    let r_max = half_diagonal(width, height);
    let (cx, cy) = model.center;
    let corner = [
        (0.0, 0.0),
        (width as f64 - 1.0, 0.0),
        (0.0, height as f64 - 1.0),
        (width as f64 - 1.0, height as f64 - 1.0),
    ]
    .iter()
    .map(|&(x, y)| (x - cx).hypot(y - cy))
    .fold(r_max, f64::max);
    model.check_field(corner + 1.0)?;

    let n = options.supersample;
    let offsets: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64 - 0.5).collect();
    let mut data = vec![0.0; width * height];
    data.par_chunks_mut(width)
        .enumerate()
        .try_for_each(|(y, row)| -> Result<()> {
            for (x, px) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                if n == 1 {
                    let (ux, uy) = model.undistort_point(x as f64, y as f64)?;
                    acc = scene.value(ux, uy);
                } else {
                    for oy in &offsets {
                        for ox in &offsets {
                            let (ux, uy) = model.undistort_point(x as f64 + ox, y as f64 + oy)?;
                            acc += scene.value(ux, uy);
                        }
                    }
                    acc /= (n * n) as f64;
                }
                if let Some(strength) = options.vignetting {
                    let r = (x as f64 - cx).hypot(y as f64 - cy) / r_max;
                    acc *= 1.0 - strength * r * r;
                }
                *px = acc;
            }
            Ok(())
        })?;

    if options.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, options.noise_sigma)
            .map_err(|e| Error::param(format!("noise distribution: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        for v in &mut data {
            *v += normal.sample(&mut rng);
        }
    }
    if let Some(max) = options.quantize_max {
        for v in &mut data {
            *v = v.round().clamp(0.0, max);
        }
    }
    Raster::new(width, height, data)
}

/// The four distorted fringe captures, shift order 0, π/2, π, 3π/2.
///
/// Noise for capture `i` is seeded with `options.seed + i`.
pub fn simulate_fringe_set(
    model: &RadialModel,
    dims: (usize, usize),
    f0: f64,
    background: f64,
    amplitude: f64,
    freq_scale: f64,
    options: &RenderOptions,
) -> Result<[Raster; 4]> {
    if !(f0 > 0.0 && freq_scale > 0.0) {
        return Err(Error::param("fringe frequency and scale must be positive"));
    }
    let render = |shift_index: u8| {
        let scene = FringeScene {
            f0,
            background,
            amplitude,
            shift_index,
            freq_scale,
        };
        let opts = RenderOptions {
            seed: options.seed.wrapping_add(shift_index as u64),
            ..*options
        };
        render_distorted(&scene, model, dims, &opts)
    };
    Ok([render(0)?, render(1)?, render(2)?, render(3)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template_gen::{generate_fringe, FringeParams};
    use proptest::prelude::*;

    #[test]
    fn forward_examples() {
        let d = RadialModel::division(5e-7, (0.0, 0.0)).unwrap();
        assert_eq!(d.forward(0.0), 0.0);
        // 360 / (1 + 5e-7 * 129600) = 360 / 1.0648
        assert!((d.forward(360.0) - 360.0 / 1.0648).abs() < 1e-12);
        assert!((d.forward(360.0) - 338.09).abs() < 5e-3);
        let p = RadialModel::polynomial(0.0, 0.0, (0.0, 0.0)).unwrap();
        for r in [0.0, 1.5, 100.0, 1e4] {
            assert_eq!(p.forward(r), r);
        }
    }

    #[test]
    fn inverse_examples() {
        let id = RadialModel::identity((0.0, 0.0));
        for r in [0.0, 0.7, 250.0] {
            assert_eq!(id.inverse(r).unwrap(), r);
        }
        let d = RadialModel::division(5e-7, (0.0, 0.0)).unwrap();
        assert!((d.inverse(360.0 / 1.0648).unwrap() - 360.0).abs() < 1e-6);
        assert!(d.inverse(-1.0).is_err());
        assert!(d.inverse(1000.0).is_err());
    }

    #[test]
    fn rejects_folding_model() {
        // barrel polynomial folds at r_u = 1/sqrt(3 * 1e-5) ≈ 182.6
        let m = RadialModel::polynomial(-1e-5, 0.0, (0.0, 0.0)).unwrap();
        assert!(matches!(m.check_field(362.0), Err(Error::NonMonotone(_))));
        assert!(
            RadialModel::for_frame(ModelKind::Polynomial { k1: -1e-5, k2: 0.0 }, (512, 512))
                .is_err()
        );
        assert!(RadialModel::for_frame(ModelKind::Division { lambda: 5e-7 }, (512, 512)).is_ok());
    }

    #[test]
    fn identity_fringe_matches_template() {
        let dims = (64, 16);
        let model = RadialModel::identity((32.0, 8.0));
        for shift in 0..4u8 {
            let scene = FringeScene {
                f0: 0.0625,
                background: 128.0,
                amplitude: 100.0,
                shift_index: shift,
                freq_scale: 1.0,
            };
            let r = render_distorted(&scene, &model, dims, &RenderOptions::default()).unwrap();
            let t = generate_fringe(&FringeParams {
                width: 64,
                height: 16,
                f0: 0.0625,
                background: 128.0,
                amplitude: 100.0,
                shift_index: shift,
            })
            .unwrap();
            assert_eq!(r, t);
        }
    }

    #[test]
    fn ground_truth_is_smooth_and_zero_at_center() {
        let m = RadialModel::for_frame(ModelKind::Division { lambda: 5e-7 }, (512, 512)).unwrap();
        let t = ground_truth_table(&m, 362.0).unwrap();
        assert_eq!(t[0].1, 0.0);
        let d: Vec<f64> = t.windows(2).map(|w| w[1].1 - w[0].1).collect();
        // barrel: Δr grows, and its slope changes slowly
        assert!(d.iter().all(|s| (0.0..1.0).contains(s)));
        assert!(d.windows(2).all(|w| (w[1] - w[0]).abs() < 5e-3));
    }

    #[test]
    fn soft_checker_agrees_with_hard_one() {
        let hard = CheckerScene {
            square: 64.0,
            origin: (3.0, -5.0),
            dark: 30.0,
            light: 225.0,
            softness: 0.0,
        };
        let soft = CheckerScene {
            softness: 1.0,
            ..hard
        };
        for i in -3..3 {
            for j in -3..3 {
                let (x, y) = (
                    3.0 + 64.0 * (i as f64 + 0.5),
                    -5.0 + 64.0 * (j as f64 + 0.5),
                );
                assert!((soft.value(x, y) - hard.value(x, y)).abs() < 1e-3);
                // on an edge the soft board sits exactly at mid-level
                assert!((soft.value(3.0 + 64.0 * i as f64, y) - 127.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let m = RadialModel::identity((8.0, 8.0));
        let scene = CheckerScene {
            square: 4.0,
            origin: (0.0, 0.0),
            dark: 20.0,
            light: 200.0,
            softness: 0.0,
        };
        let opts = RenderOptions {
            noise_sigma: 2.0,
            seed: 7,
            ..Default::default()
        };
        let a = render_distorted(&scene, &m, (16, 16), &opts).unwrap();
        let b = render_distorted(&scene, &m, (16, 16), &opts).unwrap();
        let c = render_distorted(&scene, &m, (16, 16), &RenderOptions { seed: 8, ..opts }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn barrel_bows_straight_lines_toward_center() {
        let dims = (256, 256);
        let m = RadialModel::for_frame(ModelKind::Division { lambda: 2e-6 }, dims).unwrap();
        // vertical lines x_u = const seen through the lens: ends pulled toward the center
        let bow = |x_u: f64| m.distort_point(x_u, 128.0).0 - m.distort_point(x_u, 0.0).0;
        assert!(bow(228.0) > 0.0);
        assert!(bow(228.0) > bow(160.0));
        assert!(bow(160.0) > bow(130.0));
    }

    proptest! {
        #[test]
        fn forward_inverse_round_trip(
            lambda in -1e-6f64..2e-6,
            k1 in -2e-6f64..2e-6,
            k2 in -1e-12f64..1e-12,
            frac in 0.0f64..0.999,
        ) {
            for model in [
                RadialModel::division(lambda, (0.0, 0.0)).unwrap(),
                RadialModel::polynomial(k1, k2, (0.0, 0.0)).unwrap(),
            ] {
                let cap = model.max_distorted_radius().min(2000.0);
                let r_d = frac * cap;
                let r_u = model.inverse(r_d).unwrap();
                prop_assert!((model.forward(r_u) - r_d).abs() < 1e-9);
            }
        }
    }
}
