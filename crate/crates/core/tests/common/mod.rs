#![allow(dead_code)]

use fringecal::simulator::{render_distorted, simulate_fringe_set, CheckerScene, ModelKind};
use fringecal::{
    calibrate_fringes, CalibrationOptions, CalibrationReport, DistortionProfile, RadialModel,
    Raster, RenderOptions,
};

pub const F0: f64 = 0.0625;
pub const BACKGROUND: f64 = 128.0;
pub const AMPLITUDE: f64 = 100.0;
pub const SQUARE: f64 = 32.0;

pub fn division(lambda: f64, dims: (usize, usize)) -> RadialModel {
    RadialModel::for_frame(ModelKind::Division { lambda }, dims).unwrap()
}

pub fn captures(
    model: &RadialModel,
    dims: (usize, usize),
    freq_scale: f64,
    opts: &RenderOptions,
) -> [Raster; 4] {
    simulate_fringe_set(model, dims, F0, BACKGROUND, AMPLITUDE, freq_scale, opts).unwrap()
}

pub fn calibrate(set: &[Raster; 4]) -> CalibrationReport {
    calibrate_fringes(
        [&set[0], &set[1], &set[2], &set[3]],
        &CalibrationOptions::default(),
    )
    .unwrap()
}

/// 8-bit capture with no noise or vignetting.
pub fn clean_capture() -> RenderOptions {
    RenderOptions {
        quantize_max: Some(255.0),
        ..RenderOptions::default()
    }
}

/// RMS and max of `Δr` error against the model on integer radii in `[0, r_hi]`.
pub fn truth_errors(profile: &DistortionProfile, model: &RadialModel, r_hi: f64) -> (f64, f64) {
    let mut sq = 0.0;
    let mut max: f64 = 0.0;
    let n = r_hi.floor() as usize + 1;
    for r in 0..n {
        let r = r as f64;
        let e = profile.delta_r(r) - model.delta_r(r).unwrap();
        sq += e * e;
        max = max.max(e.abs());
    }
    ((sq / n as f64).sqrt(), max)
}

pub fn checkerboard(model: &RadialModel, dims: (usize, usize), supersample: usize) -> Raster {
    let scene = CheckerScene {
        square: SQUARE,
        origin: model.center,
        dark: 30.0,
        light: 225.0,
        softness: 3.0,
    };
    let opts = RenderOptions {
        supersample,
        ..RenderOptions::default()
    };
    render_distorted(&scene, model, dims, &opts).unwrap()
}

/// RMS distance of checkerboard edge points from their best-fit lines.
///
/// Edges are traced row by row (and column by column on the transpose) from
/// the center outwards as mid-level crossings. Rows straddling a corner lack
/// contrast and are skipped. Expects soft edges a few pixels wide. Only points within `radius` of `center` count.
pub fn edge_straightness(img: &Raster, center: (f64, f64), spacing: f64, radius: f64) -> f64 {
    let transposed = Raster::from_fn(img.height(), img.width(), |x, y| img.get(y, x)).unwrap();
    let mut sq = 0.0;
    let mut n = 0usize;
    for (raster, c) in [(img, center), (&transposed, (center.1, center.0))] {
        for line in trace_vertical_edges(raster, c, spacing, radius) {
            if line.len() < 10 {
                continue;
            }
            let ys: Vec<f64> = line.iter().map(|p| p.1).collect();
            let xs: Vec<f64> = line.iter().map(|p| p.0).collect();
            let (slope, intercept) = fringecal::polyfit::fit_line(&ys, &xs).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                sq += (x - (slope * y + intercept)).powi(2);
                n += 1;
            }
        }
    }
    assert!(n > 100, "too few edge points ({n})");
    (sq / n as f64).sqrt()
}

fn trace_vertical_edges(
    img: &Raster,
    center: (f64, f64),
    spacing: f64,
    radius: f64,
) -> Vec<Vec<(f64, f64)>> {
    let (lo, hi) = img.min_max();
    let mid = 0.5 * (lo + hi);
    let min_contrast = 0.5 * (hi - lo);
    let crossing = |row: usize, near: f64, reach: f64| -> Option<f64> {
        let r = img.row(row);
        let from = (near - reach).floor().max(4.0) as usize;
        let to = ((near + reach).ceil() as usize).min(r.len() - 5);
        (from..=to)
            .filter(|&x| {
                (r[x] - mid) * (r[x + 1] - mid) < 0.0 && (r[x + 4] - r[x - 3]).abs() > min_contrast
            })
            .map(|x| x as f64 + (mid - r[x]) / (r[x + 1] - r[x]))
            .min_by(|a, b| (a - near).abs().total_cmp(&(b - near).abs()))
    };
    let (cx, cy) = center;
    let row0 = cy.round() as usize;
    let kmax = (radius / spacing).floor() as i64;
    let mut lines = Vec::new();
    for k in -kmax..=kmax {
        // Row 0 sits on a horizontal edge, so seed one square away from it.
        let seed_row = row0 + (spacing / 2.0) as usize;
        let Some(x0) = crossing(seed_row, cx + k as f64 * spacing, spacing / 3.0) else {
            continue;
        };
        let mut pts = vec![(x0, seed_row as f64)];
        for dir in [-1i64, 1] {
            let mut x = x0;
            let mut y = seed_row as i64 + dir;
            while y >= 0 && (y as usize) < img.height() {
                let yf = y as f64;
                if (x - cx).hypot(yf - cy) > radius {
                    break;
                }
                if let Some(found) = crossing(y as usize, x, 2.0) {
                    x = found;
                    pts.push((x, yf));
                }
                y += dir;
            }
        }
        lines.push(pts);
    }
    lines
}
