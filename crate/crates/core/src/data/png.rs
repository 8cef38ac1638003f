//! PNG encoding of images, metric depth and disparity.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::geometry::{DisparityMap, ImagePlane};
use crate::{Error, Result};

fn load_error(path: &Path, msg: impl Into<String>) -> Error {
    Error::Load {
        entry: path.display().to_string(),
        msg: msg.into(),
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory_with_format(&bytes, image::ImageFormat::Png).map_err(|e| load_error(path, e.to_string()))
}

/// Reads an 8- or 16-bit PNG with exactly `channels` colour channels,
/// normalised to `[0, 1]`.
pub fn read_image(path: &Path, channels: usize) -> Result<ImagePlane> {
    let img = decode(path)?;
    let found = img.color().channel_count() as usize;
    if found != channels {
        return Err(load_error(
            path,
            format!("expected a {channels}-channel image, found {found} channels"),
        ));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0.0; channels * h * w];
    match channels {
        1 => {
            let buf = img.to_luma16();
            for (x, y, p) in buf.enumerate_pixels() {
                data[y as usize * w + x as usize] = p.0[0] as f64 / 65535.0;
            }
        }
        3 => {
            let buf = img.to_rgb16();
            for (x, y, p) in buf.enumerate_pixels() {
                for c in 0..3 {
                    data[(c * h + y as usize) * w + x as usize] = p.0[c] as f64 / 65535.0;
                }
            }
        }
        _ => return Err(load_error(path, format!("unsupported channel count {channels}"))),
    }
    ImagePlane::new(channels, h, w, data).map_err(|e| load_error(path, e.to_string()))
}

fn quantise8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn save(img: DynamicImage, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| load_error(path, e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes a 1- or 3-channel plane as an 8-bit PNG; values are clipped to `[0, 1]`.
pub fn write_image(plane: &ImagePlane, path: &Path) -> Result<()> {
    let (c, h, w) = plane.dims();
    let img = match c {
        1 => DynamicImage::ImageLuma8(ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            Luma([quantise8(plane.get(0, y as usize, x as usize))])
        })),
        3 => DynamicImage::ImageRgb8(ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            Rgb(std::array::from_fn(|ch| quantise8(plane.get(ch, y as usize, x as usize))))
        })),
        _ => return Err(Error::contract("write_image", format!("cannot store {c} channels as PNG"))),
    };
    save(img, path)
}

fn write_u16(h: usize, w: usize, value: impl Fn(usize, usize) -> u16, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(w as u32, h as u32, |x, y| Luma([value(y as usize, x as usize)]));
    save(DynamicImage::ImageLuma16(buf), path)
}

/// Metric depth as a 16-bit millimetre PNG; `0` means no measurement.
pub fn write_depth_mm(depth_m: &ImagePlane, path: &Path) -> Result<()> {
    if depth_m.channels() != 1 {
        return Err(Error::contract("write_depth_mm", "depth must have 1 channel"));
    }
    write_u16(
        depth_m.height(),
        depth_m.width(),
        |y, x| (depth_m.get(0, y, x) * 1000.0).round().clamp(0.0, 65535.0) as u16,
        path,
    )
}

/// Reads a 16-bit millimetre depth PNG into metres.
pub fn read_depth_mm(path: &Path) -> Result<ImagePlane> {
    let img = decode(path)?;
    if img.color() != image::ColorType::L16 {
        return Err(load_error(path, format!("depth must be 16-bit grey, found {:?}", img.color())));
    }
    let buf = img.to_luma16();
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let data = buf.pixels().map(|p| p.0[0] as f64 / 1000.0).collect();
    ImagePlane::new(1, h, w, data).map_err(|e| load_error(path, e.to_string()))
}

/// Disparity in pixels × 256 as a 16-bit PNG.
pub fn write_disparity_u16(disparity: &DisparityMap, path: &Path) -> Result<()> {
    let w = disparity.width();
    write_u16(
        disparity.height(),
        w,
        |y, x| (disparity.get(y, x) * w as f64 * 256.0).round().clamp(0.0, 65535.0) as u16,
        path,
    )
}

/// Reads a disparity written by [`write_disparity_u16`] back into width fractions.
pub fn read_disparity_u16(path: &Path) -> Result<DisparityMap> {
    let plane = read_depth_mm(path)?;
    let w = plane.width() as f64;
    DisparityMap::new(plane.map(|v| v * 1000.0 / 256.0 / w)?)
}

const PALETTE: [[f64; 3]; 6] = [
    [0.0, 0.0, 0.016],
    [0.259, 0.039, 0.408],
    [0.576, 0.149, 0.404],
    [0.867, 0.318, 0.227],
    [0.988, 0.647, 0.039],
    [0.988, 1.0, 0.643],
];

/// Maps a 1-channel plane to RGB with a perceptual dark-to-bright palette,
/// normalised by its own range.
pub fn colorize(plane: &ImagePlane) -> Result<ImagePlane> {
    if plane.channels() != 1 {
        return Err(Error::contract("colorize", "expected 1 channel"));
    }
    let lo = plane.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = plane.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let segments = (PALETTE.len() - 1) as f64;
    ImagePlane::from_fn(3, plane.height(), plane.width(), |c, y, x| {
        let t = ((plane.get(0, y, x) - lo) / span).clamp(0.0, 1.0) * segments;
        let i = (t.floor() as usize).min(PALETTE.len() - 2);
        let f = t - i as f64;
        PALETTE[i][c] * (1.0 - f) + PALETTE[i + 1][c] * f
    })
}
