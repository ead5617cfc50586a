use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fringecal::distortion_profile::{half_diagonal, ProfileOptions};
use fringecal::io_formats::{
    self, curve_csv, curve_svg, ground_truth_csv, modulation_csv, ridge_csv, write_text, BitDepth,
    Image,
};
use fringecal::pipeline::{calibrate_fringes, CalibrationOptions};
use fringecal::remap::{calibrate_planes, CalibrateOptions};
use fringecal::simulator::{
    ground_truth_table, render_distorted, simulate_fringe_set, CheckerScene, LineGridScene,
    ModelKind, RadialModel, RenderOptions,
};
use fringecal::template_gen::{
    generate_template_set, template_file_name, FringeParams, DEFAULT_AMPLITUDE, DEFAULT_BACKGROUND,
    DEFAULT_F0,
};
use fringecal::Error;

/// Measure wide-angle lens distortion from four phase-shifted fringe images
/// and undistort images with the result.
#[derive(Debug, Parser)]
#[command(name = "fringecal", version, about)]
pub struct Cli {
    /// Print per-step details to stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Resolve relative paths against this directory.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the four phase-shifted fringe templates for display.
    GenTemplates(GenTemplatesArgs),
    /// Measure the distortion profile from four captured fringe images.
    Calibrate(CalibrateArgs),
    /// Undistort an image with a measured profile.
    Apply(ApplyArgs),
    /// Render distorted scenes through a synthetic radial lens.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Depth {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

impl From<Depth> for BitDepth {
    fn from(d: Depth) -> Self {
        match d {
            Depth::Eight => BitDepth::Eight,
            Depth::Sixteen => BitDepth::Sixteen,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FileFormat {
    Png,
    Pgm,
}

impl FileFormat {
    fn extension(self) -> &'static str {
        match self {
            FileFormat::Png => "png",
            FileFormat::Pgm => "pgm",
        }
    }
}

#[derive(Debug, Args)]
struct GenTemplatesArgs {
    #[arg(long, default_value_t = 1920)]
    width: usize,
    #[arg(long, default_value_t = 1080)]
    height: usize,
    /// Carrier frequency in cycles per pixel.
    #[arg(long, default_value_t = DEFAULT_F0)]
    f0: f64,
    /// Background intensity A (default 128, scaled by 257 for 16-bit).
    #[arg(long)]
    background: Option<f64>,
    /// Modulation amplitude B (default 100, scaled by 257 for 16-bit).
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long, value_enum, default_value = "8")]
    depth: Depth,
    #[arg(long, value_enum, default_value = "png")]
    format: FileFormat,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// The four captures in shift order 0, π/2, π, 3π/2.
    #[arg(long, num_args = 4, required = true, value_names = ["I1", "I2", "I3", "I4"])]
    images: Vec<PathBuf>,
    /// Profile JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Row to analyze (default: central row).
    #[arg(long)]
    row: Option<usize>,
    /// Central samples used for the undistorted-line fit (odd).
    #[arg(long, default_value_t = 9)]
    n_points: usize,
    /// Degree of the extension polynomial.
    #[arg(long, default_value_t = 3)]
    degree: usize,
    /// Lower end of the wavelet band, cycles/pixel (default f0/4).
    #[arg(long)]
    f_min: Option<f64>,
    /// Upper end of the wavelet band, cycles/pixel (default min(4 f0, 0.45)).
    #[arg(long)]
    f_max: Option<f64>,
    #[arg(long, default_value_t = 200)]
    n_scales: usize,
    /// Also write ridge, modulated-phase and distortion CSV/SVG next to the profile.
    #[arg(long)]
    report: bool,
}

#[derive(Debug, Args)]
struct ApplyArgs {
    #[arg(long)]
    profile: PathBuf,
    #[arg(long = "in", value_name = "IMAGE")]
    input: PathBuf,
    #[arg(long, value_name = "IMAGE")]
    out: PathBuf,
    /// Gray level for pixels that map outside the capture.
    #[arg(long, default_value_t = 0.0)]
    fill: f64,
    /// Grow the canvas to hold the whole undistorted frame.
    #[arg(long)]
    expand: bool,
    /// Re-center the profile when the image size differs from the calibration capture.
    #[arg(long)]
    force_rebuild: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Division,
    Polynomial,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SceneArg {
    Fringe,
    Checker,
    Grid,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "division")]
    model: ModelArg,
    /// Division-model coefficient λ in r_d = r_u / (1 + λ r_u²).
    #[arg(long, default_value_t = 5e-7, allow_negative_numbers = true)]
    lambda: f64,
    /// Polynomial-model k1 in r_d = r_u (1 + k1 r_u² + k2 r_u⁴).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    k1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    k2: f64,
    /// Sensor size as WIDTH HEIGHT.
    #[arg(long, num_args = 2, value_names = ["WIDTH", "HEIGHT"], default_values_t = [512, 512])]
    dims: Vec<usize>,
    /// Scenes to render (repeatable).
    #[arg(long, value_enum, default_values_t = [SceneArg::Fringe, SceneArg::Checker, SceneArg::Grid])]
    scene: Vec<SceneArg>,
    /// Carrier frequency of the displayed fringe, cycles/pixel.
    #[arg(long, default_value_t = DEFAULT_F0)]
    f0: f64,
    /// Carrier scaling standing in for the screen distance.
    #[arg(long, default_value_t = 1.0)]
    freq_scale: f64,
    /// Checkerboard square and grid spacing, pixels.
    #[arg(long, default_value_t = 32.0)]
    square: f64,
    /// Additive Gaussian noise, gray levels.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Enable vignetting with this corner falloff (0..1).
    #[arg(long, num_args = 0..=1, default_missing_value = "0.6")]
    vignetting: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "8")]
    depth: Depth,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let ctx = Ctx {
        out_dir: cli.out_dir,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::GenTemplates(a) => gen_templates(&ctx, a),
        Command::Calibrate(a) => calibrate(&ctx, a),
        Command::Apply(a) => apply(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
    }
}

/// Exit status: 2 parameter, 3 shape, 4 numeric (non-monotone), 1 anything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Parameter(_) | Error::InsufficientData { .. } | Error::OutOfBounds(_)) => 2,
        Some(Error::Shape(_)) => 3,
        Some(Error::NonMonotone(_) | Error::Orientation { .. }) => 4,
        _ => 1,
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FRINGECAL_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Error::Parameter(format!(
                "FRINGECAL_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

struct Ctx {
    out_dir: Option<PathBuf>,
    verbose: u8,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn dir(&self, p: &Path) -> Result<PathBuf> {
        let dir = self.path(p);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn parent_of(&self, file: &Path) -> Result<()> {
        if let Some(parent) = file.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(())
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn param(msg: impl Into<String>) -> anyhow::Error {
    Error::Parameter(msg.into()).into()
}

fn gen_templates(ctx: &Ctx, a: GenTemplatesArgs) -> Result<()> {
    let depth = BitDepth::from(a.depth);
    let level_scale = depth.max_value() / 255.0;
    let background = a.background.unwrap_or(DEFAULT_BACKGROUND * level_scale);
    let amplitude = a.amplitude.unwrap_or(DEFAULT_AMPLITUDE * level_scale);
    FringeParams {
        width: a.width,
        height: a.height,
        f0: a.f0,
        background,
        amplitude,
        shift_index: 0,
    }
    .validate()?;
    if background + amplitude > depth.max_value() {
        return Err(param(format!(
            "A + B = {} exceeds the {}-level range of the output depth",
            background + amplitude,
            depth.max_value()
        )));
    }
    let dir = ctx.dir(&a.out)?;
    let set = generate_template_set(a.width, a.height, a.f0, background, amplitude)?;
    for (i, pattern) in set.into_iter().enumerate() {
        let path = dir.join(template_file_name(i, a.format.extension()));
        io_formats::save_image(&path, &Image::gray(depth, pattern))?;
        ctx.log(format!("wrote {}", path.display()));
    }
    println!("f0 = {} cycles/pixel (period {:.4} px)", a.f0, 1.0 / a.f0);
    Ok(())
}

fn calibrate(ctx: &Ctx, a: CalibrateArgs) -> Result<()> {
    if a.n_points < 3 || a.n_points.is_multiple_of(2) {
        return Err(param(format!(
            "--n-points must be odd and at least 3, got {}",
            a.n_points
        )));
    }
    if a.degree < 1 {
        return Err(param("--degree must be at least 1"));
    }
    if a.n_scales < 2 {
        return Err(param("--n-scales must be at least 2"));
    }
    let band = match (a.f_min, a.f_max) {
        (None, None) => None,
        (Some(lo), Some(hi)) if lo > 0.0 && lo < hi && hi < 0.5 => Some((lo, hi)),
        (Some(_), Some(_)) => return Err(param("wavelet band needs 0 < --f-min < --f-max < 0.5")),
        _ => return Err(param("--f-min and --f-max must be given together")),
    };

    let mut planes = Vec::with_capacity(4);
    for p in &a.images {
        let path = ctx.path(p);
        let img = io_formats::load_image(&path)?;
        ctx.log(format!(
            "loaded {} ({}x{})",
            path.display(),
            img.dims().0,
            img.dims().1
        ));
        planes.push(img.luma());
    }
    let dims = planes[0].dims();
    if let Some((i, p)) = planes.iter().enumerate().find(|(_, p)| p.dims() != dims) {
        return Err(Error::Shape(format!(
            "{} is {}x{} but {} is {}x{}",
            a.images[i].display(),
            p.width(),
            p.height(),
            a.images[0].display(),
            dims.0,
            dims.1
        ))
        .into());
    }
    let options = CalibrationOptions {
        row: a.row,
        profile: ProfileOptions {
            n_points: a.n_points,
            degree: a.degree,
        },
        wavelet_band: band,
        wavelet_scales: a.n_scales,
    };
    let report = calibrate_fringes([&planes[0], &planes[1], &planes[2], &planes[3]], &options)?;
    let profile = report.profile();
    if !report.wrapped.undefined.is_empty() {
        eprintln!(
            "warning: {} column(s) had no fringe contrast and inherited a neighbour's phase",
            report.wrapped.undefined.len()
        );
    }

    let out = ctx.path(&a.out);
    ctx.parent_of(&out)?;
    let provenance = format!(
        "calibrated from {}; row {}; {}-point fit",
        a.images
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", "),
        report.row,
        a.n_points
    );
    io_formats::save_profile(&out, profile, &provenance)?;

    println!(
        "f0 = {:.8} cycles/pixel (k = {:.8} rad/px)",
        report.build.fit.f0, report.build.fit.k
    );
    println!("r_max = {:.3} px", profile.r_max());
    println!(
        "delta_r(r_max) = {:.4} px",
        profile.delta_r(profile.r_max())
    );
    match &report.flatness {
        Ok(f) if f.pass => println!(
            "central flatness: pass (max deviation {} grid steps over columns {}..={})",
            f.max_deviation_steps, f.first_column, f.last_column
        ),
        Ok(f) => {
            println!(
                "central flatness: FAIL (max deviation {} grid steps)",
                f.max_deviation_steps
            );
            eprintln!(
                "warning: instantaneous frequency is not constant over the central fit window"
            );
        }
        Err(reason) => {
            println!("central flatness: not assessed");
            eprintln!("warning: central flatness check skipped: {reason}");
        }
    }

    if a.report {
        let dir = out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        if let Ok(ridge) = &report.ridge {
            write_text(&dir.join("ridge.csv"), &ridge_csv(ridge))?;
        }
        write_text(
            &dir.join("modulated_phase.csv"),
            &modulation_csv(
                &report.build.modulation,
                report.smoothed.center_index,
                &report.build.averaged.values,
            ),
        )?;
        write_text(&dir.join("distortion.csv"), &curve_csv(profile))?;
        write_text(
            &dir.join("distortion.svg"),
            &curve_svg(profile, "Radial distortion"),
        )?;
        ctx.log(format!("wrote report files to {}", dir.display()));
    }
    println!("profile written to {}", out.display());
    Ok(())
}

fn apply(ctx: &Ctx, a: ApplyArgs) -> Result<()> {
    if !a.fill.is_finite() {
        return Err(param("--fill must be finite"));
    }
    let profile = io_formats::load_profile(&ctx.path(&a.profile))?;
    let input = ctx.path(&a.input);
    let image = io_formats::load_image(&input)?;
    let options = CalibrateOptions {
        fill: a.fill,
        expand: a.expand,
        allow_rebuild: a.force_rebuild,
    };
    let planes = calibrate_planes(&image.planes, &profile, &options)?;
    let out = ctx.path(&a.out);
    ctx.parent_of(&out)?;
    let (w, h) = planes[0].dims();
    io_formats::save_image(
        &out,
        &Image {
            depth: image.depth,
            planes,
        },
    )?;
    println!(
        "calibrated {} -> {} ({w}x{h})",
        input.display(),
        out.display()
    );
    Ok(())
}

fn simulate(ctx: &Ctx, a: SimulateArgs) -> Result<()> {
    let (width, height) = match a.dims[..] {
        [w, h] if w > 0 && h > 0 => (w, h),
        _ => bail!(param("--dims needs two positive integers")),
    };
    if !(a.f0 > 0.0 && a.f0 < 0.5) || !(a.freq_scale > 0.0) || !(a.f0 * a.freq_scale < 0.5) {
        return Err(param("need 0 < f0 and 0 < f0 * freq-scale < 0.5"));
    }
    if !(a.square > 1.0) {
        return Err(param("--square must exceed 1 pixel"));
    }
    if let Some(v) = a.vignetting {
        if !(0.0..1.0).contains(&v) {
            return Err(param("--vignetting must be in [0, 1)"));
        }
    }
    let dims = (width, height);
    let kind = match a.model {
        ModelArg::Division => ModelKind::Division { lambda: a.lambda },
        ModelArg::Polynomial => ModelKind::Polynomial { k1: a.k1, k2: a.k2 },
        ModelArg::Identity => ModelKind::Division { lambda: 0.0 },
    };
    let model = RadialModel::for_frame(kind, dims)?;
    let depth = BitDepth::from(a.depth);
    let level_scale = depth.max_value() / 255.0;
    let dir = ctx.dir(&a.out)?;
    let base = RenderOptions {
        supersample: 1,
        noise_sigma: a.noise_sigma * level_scale,
        vignetting: a.vignetting,
        seed: a.seed,
        quantize_max: None,
    };
    let center = model.center;

    for scene in dedup(&a.scene) {
        match scene {
            SceneArg::Fringe => {
                let set = simulate_fringe_set(
                    &model,
                    dims,
                    a.f0,
                    DEFAULT_BACKGROUND * level_scale,
                    DEFAULT_AMPLITUDE * level_scale,
                    a.freq_scale,
                    &base,
                )?;
                for (i, r) in set.into_iter().enumerate() {
                    let path = dir.join(format!("fringe_{i}.png"));
                    io_formats::save_image(&path, &Image::gray(depth, r))?;
                    ctx.log(format!("wrote {}", path.display()));
                }
            }
            SceneArg::Checker => {
                let scene = CheckerScene {
                    square: a.square,
                    origin: center,
                    dark: 30.0 * level_scale,
                    light: 225.0 * level_scale,
                    softness: 0.0,
                };
                let opts = RenderOptions {
                    supersample: 4,
                    seed: a.seed.wrapping_add(100),
                    ..base
                };
                let r = render_distorted(&scene, &model, dims, &opts)?;
                io_formats::save_image(&dir.join("checker.png"), &Image::gray(depth, r))?;
            }
            SceneArg::Grid => {
                let scene = LineGridScene {
                    spacing: a.square,
                    thickness: 2.0,
                    origin: center,
                    background: 225.0 * level_scale,
                    line: 30.0 * level_scale,
                };
                let opts = RenderOptions {
                    supersample: 4,
                    seed: a.seed.wrapping_add(200),
                    ..base
                };
                let r = render_distorted(&scene, &model, dims, &opts)?;
                io_formats::save_image(&dir.join("grid.png"), &Image::gray(depth, r))?;
            }
        }
    }
    let table = ground_truth_table(&model, half_diagonal(width, height))?;
    write_text(&dir.join("ground_truth.csv"), &ground_truth_csv(&table))?;
    println!(
        "simulated {:?} lens on {width}x{height}; ground-truth delta_r at corner = {:.4} px; outputs in {}",
        model.kind,
        table.last().map(|t| t.1).unwrap_or(0.0),
        dir.display()
    );
    Ok(())
}

fn dedup(scenes: &[SceneArg]) -> Vec<SceneArg> {
    let mut out = Vec::new();
    for s in scenes {
        if !out.contains(s) {
            out.push(*s);
        }
    }
    out
}
