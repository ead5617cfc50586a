use std::io::Write;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{
    DynamicImage, EncodableLayout, ImageBuffer, ImageReader, Luma, Pixel, PixelWithColorType, Rgb,
};

use super::write_atomic;
use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    /// Binary PGM (P5) or PPM (P6), chosen by channel count.
    Pnm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("png") => Ok(ImageFormat::Png),
            Some("pgm" | "ppm" | "pnm") => Ok(ImageFormat::Pnm),
            _ => Err(Error::param(format!(
                "unsupported image extension for {} (use .png, .pgm or .ppm)",
                path.display()
            ))),
        }
    }
}

/// Decoded image: one plane (grayscale) or three (RGB), values in raw counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub depth: BitDepth,
    pub planes: Vec<Raster>,
}

impl Image {
    pub fn gray(depth: BitDepth, plane: Raster) -> Self {
        Self {
            depth,
            planes: vec![plane],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].dims()
    }

    pub fn is_rgb(&self) -> bool {
        self.planes.len() == 3
    }

    /// Luminance plane used for fringe analysis.
    pub fn luma(&self) -> Raster {
        if self.planes.len() == 1 {
            return self.planes[0].clone();
        }
        let (w, h) = self.dims();
        let [r, g, b] = [&self.planes[0], &self.planes[1], &self.planes[2]].map(Raster::data);
        let data = (0..w * h)
            .map(|i| 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i])
            .collect();
        Raster::from_parts_unchecked(w, h, data)
    }
}

/// Rounds and clamps to the integer range of `depth`.
pub fn quantize(raster: &Raster, depth: BitDepth) -> Vec<u16> {
    let max = depth.max_value();
    raster
        .data()
        .iter()
        .map(|v| v.round().clamp(0.0, max) as u16)
        .collect()
}

fn plane_from<T: Copy + Into<f64>>(w: u32, h: u32, samples: impl Iterator<Item = T>) -> Raster {
    let data: Vec<f64> = samples.map(Into::into).collect();
    Raster::from_parts_unchecked(w as usize, h as usize, data)
}

pub fn load_image(path: &Path) -> Result<Image> {
    let img_err = |source| Error::Image {
        path: path.to_path_buf(),
        source,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(img_err)?;
    let (w, h) = (decoded.width(), decoded.height());
    let image = match decoded {
        DynamicImage::ImageLuma8(buf) => Image::gray(
            BitDepth::Eight,
            plane_from(w, h, buf.into_raw().into_iter()),
        ),
        DynamicImage::ImageLuma16(buf) => Image::gray(
            BitDepth::Sixteen,
            plane_from(w, h, buf.into_raw().into_iter()),
        ),
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            let raw = decoded.to_rgb16().into_raw();
            let planes = (0..3)
                .map(|c| plane_from(w, h, raw.iter().skip(c).step_by(3).copied()))
                .collect();
            Image {
                depth: BitDepth::Sixteen,
                planes,
            }
        }
        DynamicImage::ImageLumaA8(_) => {
            let buf = decoded.to_luma8();
            Image::gray(
                BitDepth::Eight,
                plane_from(w, h, buf.into_raw().into_iter()),
            )
        }
        DynamicImage::ImageLumaA16(_) => {
            let buf = decoded.to_luma16();
            Image::gray(
                BitDepth::Sixteen,
                plane_from(w, h, buf.into_raw().into_iter()),
            )
        }
        other => {
            let raw = other.to_rgb8().into_raw();
            let planes = (0..3)
                .map(|c| plane_from(w, h, raw.iter().skip(c).step_by(3).copied()))
                .collect();
            Image {
                depth: BitDepth::Eight,
                planes,
            }
        }
    };
    Ok(image)
}

pub fn save_image(path: &Path, image: &Image) -> Result<()> {
    let format = ImageFormat::from_path(path)?;
    let (w, h) = image.dims();
    if image.planes.iter().any(|p| p.dims() != (w, h)) {
        return Err(Error::shape("image planes differ in size"));
    }
    let (w32, h32) = (w as u32, h as u32);
    let img_err = |source| Error::Image {
        path: path.to_path_buf(),
        source,
    };
    let samples: Vec<u16> = match image.planes.len() {
        1 => quantize(&image.planes[0], image.depth),
        3 => {
            let q: Vec<Vec<u16>> = image
                .planes
                .iter()
                .map(|p| quantize(p, image.depth))
                .collect();
            (0..w * h)
                .flat_map(|i| [q[0][i], q[1][i], q[2][i]])
                .collect()
        }
        n => {
            return Err(Error::param(format!(
                "cannot encode an image with {n} channels"
            )))
        }
    };
    let rgb = image.planes.len() == 3;
    write_atomic(path, |out| match format {
        ImageFormat::Pnm => {
            write_pnm(out, w, h, rgb, image.depth, &samples).map_err(|e| Error::io(path, e))
        }
        ImageFormat::Png => {
            let bytes = || samples.iter().map(|&v| v as u8).collect::<Vec<u8>>();
            let result = match (image.depth, rgb) {
                (BitDepth::Eight, false) => encode_png(
                    out,
                    &ImageBuffer::<Luma<u8>, _>::from_raw(w32, h32, bytes()),
                ),
                (BitDepth::Sixteen, false) => encode_png(
                    out,
                    &ImageBuffer::<Luma<u16>, _>::from_raw(w32, h32, samples.clone()),
                ),
                (BitDepth::Eight, true) => {
                    encode_png(out, &ImageBuffer::<Rgb<u8>, _>::from_raw(w32, h32, bytes()))
                }
                (BitDepth::Sixteen, true) => encode_png(
                    out,
                    &ImageBuffer::<Rgb<u16>, _>::from_raw(w32, h32, samples.clone()),
                ),
            };
            result.map_err(img_err)
        }
    })
}

fn encode_png<P>(
    out: &mut dyn Write,
    buf: &Option<ImageBuffer<P, Vec<P::Subpixel>>>,
) -> image::ImageResult<()>
where
    P: Pixel + PixelWithColorType,
    [P::Subpixel]: EncodableLayout,
{
    buf.as_ref()
        .expect("sized buffer")
        .write_with_encoder(PngEncoder::new(out))
}

/// Binary PGM/PPM; 16-bit samples big-endian with maxval 65535.
fn write_pnm(
    out: &mut dyn Write,
    w: usize,
    h: usize,
    rgb: bool,
    depth: BitDepth,
    samples: &[u16],
) -> std::io::Result<()> {
    let magic = if rgb { "P6" } else { "P5" };
    write!(out, "{magic}\n{w} {h}\n{}\n", depth.max_value() as u32)?;
    let body: Vec<u8> = match depth {
        BitDepth::Eight => samples.iter().map(|&v| v as u8).collect(),
        BitDepth::Sixteen => samples.iter().flat_map(|v| v.to_be_bytes()).collect(),
    };
    out.write_all(&body)
}
