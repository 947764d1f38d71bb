//! On-disk image formats: 8-bit RGB PNG, 8-bit label PNG, 16-bit millimetre PGM.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::imageproc::{DepthMap, RgbImage, SemanticMask};

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn rgb_to_bytes(img: &RgbImage) -> Vec<u8> {
    img.data.iter().map(|v| to_u8(*v)).collect()
}

pub fn rgb_from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<RgbImage> {
    RgbImage::new(width, height, bytes.iter().map(|b| *b as f64 / 255.0).collect())
}

fn dims(w: u32, h: u32) -> (usize, usize) {
    (w as usize, h as usize)
}

pub fn write_rgb_png(img: &RgbImage, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_raw(img.width as u32, img.height as u32, rgb_to_bytes(img))
        .ok_or_else(|| Error::Format("rgb buffer size".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn read_rgb_png(path: &Path) -> Result<RgbImage> {
    let img = image::open(path)?.into_rgb8();
    let (w, h) = dims(img.width(), img.height());
    rgb_from_bytes(w, h, img.as_raw())
}

pub fn write_mask_png(mask: &SemanticMask, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(mask.width as u32, mask.height as u32, mask.labels.clone())
        .ok_or_else(|| Error::Format("mask buffer size".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn read_mask_png(path: &Path) -> Result<SemanticMask> {
    match image::open(path)? {
        DynamicImage::ImageLuma8(img) => {
            let (w, h) = dims(img.width(), img.height());
            SemanticMask::new(w, h, img.into_raw())
        }
        other => Err(Error::Format(format!(
            "{}: mask must be 8-bit grayscale, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

/// Depth in metres to millimetre `u16`; holes are written as 0.
pub fn depth_to_mm(d: &DepthMap) -> Vec<u16> {
    (0..d.len())
        .map(|i| if d.is_hole(i) { 0 } else { (d.depth[i] * 1000.0).round().clamp(0.0, 65535.0) as u16 })
        .collect()
}

pub fn depth_from_mm(width: usize, height: usize, mm: &[u16]) -> Result<DepthMap> {
    DepthMap::new(width, height, mm.iter().map(|v| *v as f64 / 1000.0).collect())
}

pub fn write_depth_pgm(d: &DepthMap, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(d.width as u32, d.height as u32, depth_to_mm(d))
        .ok_or_else(|| Error::Format("depth buffer size".into()))?;
    buf.save_with_format(path, image::ImageFormat::Pnm)?;
    Ok(())
}

pub fn read_depth_pgm(path: &Path) -> Result<DepthMap> {
    let img = image::open(path)?;
    let (w, h) = dims(img.width(), img.height());
    match img {
        DynamicImage::ImageLuma16(b) => depth_from_mm(w, h, b.as_raw()),
        DynamicImage::ImageLuma8(b) => {
            let mm: Vec<u16> = b.as_raw().iter().map(|v| *v as u16).collect();
            depth_from_mm(w, h, &mm)
        }
        other => Err(Error::Format(format!("{}: depth must be grayscale, found {:?}", path.display(), other.color()))),
    }
}
