//! Image file I/O: 8-bit PNG/JPEG images mapped to [0, 1] by /255,
//! masks as single-channel PNG with 0 background / 255 foreground.

use std::path::Path;

use image::{GrayImage, ImageReader, RgbImage};

use crate::error::Result;
use crate::mask::BinaryMask;
use crate::raster::{GrayRaster, RgbRaster};

pub fn load_rgb(path: &Path) -> Result<RgbRaster> {
    let img = ImageReader::open(path)?.decode()?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = img
        .pixels()
        .map(|p| {
            [
                p.0[0] as f64 / 255.0,
                p.0[1] as f64 / 255.0,
                p.0[2] as f64 / 255.0,
            ]
        })
        .collect();
    Ok(RgbRaster::from_pixels(w, h, pixels))
}

pub fn save_rgb(path: &Path, raster: &RgbRaster) -> Result<()> {
    let mut img = RgbImage::new(raster.width() as u32, raster.height() as u32);
    for y in 0..raster.height() {
        for x in 0..raster.width() {
            let p = raster.get(x, y);
            img.put_pixel(
                x as u32,
                y as u32,
                image::Rgb([to_byte(p[0]), to_byte(p[1]), to_byte(p[2])]),
            );
        }
    }
    img.save(path)?;
    Ok(())
}

/// Read a mask image; any value at or above mid-gray is foreground.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let img = ImageReader::open(path)?.decode()?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut mask = BinaryMask::new(w, h);
    for (x, y, p) in img.enumerate_pixels() {
        if p.0[0] >= 128 {
            mask.set(x as usize, y as usize, true);
        }
    }
    Ok(mask)
}

pub fn save_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let mut img = GrayImage::new(mask.width() as u32, mask.height() as u32);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            img.put_pixel(
                x as u32,
                y as u32,
                image::Luma([if mask.get(x, y) { 255 } else { 0 }]),
            );
        }
    }
    img.save(path)?;
    Ok(())
}

pub fn save_gray(path: &Path, raster: &GrayRaster) -> Result<()> {
    let mut img = GrayImage::new(raster.width() as u32, raster.height() as u32);
    for y in 0..raster.height() {
        for x in 0..raster.width() {
            img.put_pixel(x as u32, y as u32, image::Luma([to_byte(raster.get(x, y))]));
        }
    }
    img.save(path)?;
    Ok(())
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{disk_mask, Point};

    #[test]
    fn mask_roundtrip_is_exact() {
        let dir = std::env::temp_dir().join("fundus_core_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mask.png");
        let mask = disk_mask(Point::new(20.0, 15.0), 9.0, (48, 32));
        save_mask(&path, &mask).unwrap();
        let back = load_mask(&path).unwrap();
        assert_eq!(back, mask);
    }

    #[test]
    fn rgb_roundtrip_within_quantization() {
        let dir = std::env::temp_dir().join("fundus_core_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("img.png");
        let mut img = RgbRaster::new(10, 7);
        for y in 0..7 {
            for x in 0..10 {
                img.set(x, y, [x as f64 / 10.0, y as f64 / 7.0, 0.45]);
            }
        }
        save_rgb(&path, &img).unwrap();
        let back = load_rgb(&path).unwrap();
        for y in 0..7 {
            for x in 0..10 {
                for c in 0..3 {
                    assert!((back.get(x, y)[c] - img.get(x, y)[c]).abs() <= 0.5 / 255.0 + 1e-9);
                }
            }
        }
    }
}
