//! CSV tables and a minimal SVG line plot for report artifacts.

use std::fmt::Write as _;
use std::path::Path;

use super::write_atomic;
use crate::distortion_profile::DistortionProfile;
use crate::error::{Error, Result};
use crate::ifreq::RidgeResult;

/// `r, delta_phi, delta_r` at 1-px steps out to `ceil(r_max)`.
pub fn curve_csv(profile: &DistortionProfile) -> String {
    let mut s = String::from("r,delta_phi,delta_r\n");
    for (r, dr) in profile.sampled_table() {
        let _ = writeln!(s, "{r},{},{dr}", profile.delta_phi(r));
    }
    s
}

/// `r, delta_r` pairs of a ground-truth table.
pub fn ground_truth_csv(table: &[(f64, f64)]) -> String {
    let mut s = String::from("r,delta_r\n");
    for (r, d) in table {
        let _ = writeln!(s, "{r},{d}");
    }
    s
}

pub fn ridge_csv(ridge: &RidgeResult) -> String {
    let mut s = String::from("column,frequency,magnitude,confident\n");
    for (i, (f, m)) in ridge
        .frequencies
        .iter()
        .zip(&ridge.coefficients_max)
        .enumerate()
    {
        let _ = writeln!(s, "{i},{f},{m},{}", ridge.confident[i]);
    }
    s
}

/// Signed per-column modulated phase with its offset from the center column.
pub fn modulation_csv(modulation: &[f64], center_index: usize, averaged: &[f64]) -> String {
    let mut s = String::from("column,offset,delta_phi,averaged\n");
    for (x, d) in modulation.iter().enumerate() {
        let offset = x as i64 - center_index as i64;
        let avg = usize::try_from(offset)
            .ok()
            .and_then(|u| averaged.get(u))
            .map(|v| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(s, "{x},{offset},{d},{avg}");
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| {
        w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    })
}

#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#17becf",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Line plot with axes, tick labels and a legend.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[PlotSeries]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 55.0;

    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = all.fold(
        (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    // axes
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT},{TOP} V{} H{}" fill="none" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT
    );
    for i in 0..=5 {
        let fx = x0 + (x1 - x0) * i as f64 / 5.0;
        let fy = y0 + (y1 - y0) * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"#,
            px(fx),
            H - BOTTOM,
            H - BOTTOM + 5.0,
            H - BOTTOM + 19.0,
            tick(fx)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"#,
            LEFT - 5.0,
            py(fy),
            LEFT,
            LEFT - 8.0,
            py(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        escape(y_label)
    );
    for (i, serie) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = serie
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="2"/><text x="{3}" y="{4}">{5}</text>"#,
            LEFT + 12.0,
            ly,
            LEFT + 32.0,
            LEFT + 38.0,
            ly + 4.0,
            escape(&serie.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{:.2}", v)
    }
}

/// Δr versus r for one profile.
pub fn curve_svg(profile: &DistortionProfile, title: &str) -> String {
    let series = PlotSeries {
        label: format!("f0 = {:.5} cycles/px", profile.f0()),
        points: profile.sampled_table(),
    };
    svg_plot(
        title,
        "radius r (px)",
        "radial distortion Δr (px)",
        &[series],
    )
}
