//! Pixel rasters and the image transforms used throughout measurement:
//! grayscale conversion, brightness normalization, Sobel gradients,
//! separable Gaussian blur, rotation, flipping, field-of-view detection
//! and square cropping.
//!
//! Coordinates are screen-style: `x` is the column, `y` is the row, the
//! origin is the top-left pixel and `y` grows downward. Grayscale values
//! live in `[0, 1]` unless a raster is flagged unbounded (gradient
//! magnitudes, brightness-shifted images).

use crate::error::{CoreError, Result};
use crate::geometry::Point;
use crate::mask::BinaryMask;

/// RGB image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbRaster {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl RgbRaster {
    pub fn new(width: usize, height: usize) -> Self {
        RgbRaster {
            width,
            height,
            pixels: vec![[0.0; 3]; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Self {
        assert_eq!(pixels.len(), width * height);
        RgbRaster {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    /// Per-channel map, clamping is the caller's business.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> RgbRaster {
        RgbRaster {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|p| [f(p[0]), f(p[1]), f(p[2])])
                .collect(),
        }
    }

    /// Mirror columns: column `i` maps to `width - 1 - i`.
    pub fn hflip(&self) -> RgbRaster {
        let mut out = RgbRaster::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }

    /// Rotate about `center` by `angle_deg` with bilinear sampling.
    /// Out-of-frame samples read as black.
    pub fn rotate_about(&self, center: Point, angle_deg: f64) -> RgbRaster {
        if angle_deg == 0.0 {
            return self.clone();
        }
        let (sin, cos) = inverse_rotation(angle_deg);
        let mut out = RgbRaster::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let (sx, sy) = source_position(x, y, center, sin, cos);
                let mut rgb = [0.0; 3];
                for c in 0..3 {
                    rgb[c] = bilinear(self.width, self.height, sx, sy, |xx, yy| {
                        self.pixels[yy * self.width + xx][c]
                    });
                }
                out.set(x, y, rgb);
            }
        }
        out
    }
}

/// Single-channel raster. `bounded` records whether values are known to
/// stay in `[0, 1]`; derivative rasters (Sobel output, mean-shifted
/// images) are unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayRaster {
    width: usize,
    height: usize,
    bounded: bool,
    pixels: Vec<f64>,
}

impl GrayRaster {
    pub fn new(width: usize, height: usize, fill: f64) -> Self {
        GrayRaster {
            width,
            height,
            bounded: (0.0..=1.0).contains(&fill),
            pixels: vec![fill; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>, bounded: bool) -> Self {
        assert_eq!(pixels.len(), width * height);
        GrayRaster {
            width,
            height,
            bounded,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bounded(&self) -> bool {
        self.bounded
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    /// Mean over all `width x height` pixels, accumulated in f64.
    pub fn mean(&self) -> f64 {
        if self.pixels.is_empty() {
            return 0.0;
        }
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub fn sum(&self) -> f64 {
        self.pixels.iter().sum::<f64>()
    }

    pub fn hflip(&self) -> GrayRaster {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }

    /// Rotate about `center` by `angle_deg` with bilinear sampling;
    /// out-of-frame samples read as 0. `angle_deg == 0` is the exact
    /// identity.
    pub fn rotate_about(&self, center: Point, angle_deg: f64) -> GrayRaster {
        if angle_deg == 0.0 {
            return self.clone();
        }
        let (sin, cos) = inverse_rotation(angle_deg);
        let mut pixels = vec![0.0; self.width * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                let (sx, sy) = source_position(x, y, center, sin, cos);
                pixels[y * self.width + x] =
                    bilinear(self.width, self.height, sx, sy, |xx, yy| {
                        self.pixels[yy * self.width + xx]
                    });
            }
        }
        GrayRaster {
            width: self.width,
            height: self.height,
            bounded: self.bounded,
            pixels,
        }
    }

    /// Crop a rectangular window (clipped to the frame).
    pub fn window(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> GrayRaster {
        let x1 = x1.min(self.width - 1);
        let y1 = y1.min(self.height - 1);
        let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
        let mut pixels = Vec::with_capacity(w * h);
        for y in y0..=y1 {
            pixels.extend_from_slice(&self.pixels[y * self.width + x0..y * self.width + x1 + 1]);
        }
        GrayRaster {
            width: w,
            height: h,
            bounded: self.bounded,
            pixels,
        }
    }
}

/// The forward rotation maps a pixel `p` to `R(angle) (p - c) + c` with
/// `R = [[cos, sin], [-sin, cos]]` in screen coordinates, so a positive
/// angle carries `(c_x + r, c_y)` toward `(c_x, c_y - r)`. Inverse
/// mapping samples the source at `R(-angle)`.
fn inverse_rotation(angle_deg: f64) -> (f64, f64) {
    let rad = -angle_deg.to_radians();
    (rad.sin(), rad.cos())
}

#[inline]
fn source_position(x: usize, y: usize, center: Point, sin: f64, cos: f64) -> (f64, f64) {
    let dx = x as f64 - center.x;
    let dy = y as f64 - center.y;
    (
        center.x + cos * dx + sin * dy,
        center.y - sin * dx + cos * dy,
    )
}

#[inline]
fn bilinear(
    width: usize,
    height: usize,
    sx: f64,
    sy: f64,
    sample: impl Fn(usize, usize) -> f64,
) -> f64 {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let mut acc = 0.0;
    for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let w = wx * wy;
            if w == 0.0 {
                continue;
            }
            let xx = x0 as i64 + dx;
            let yy = y0 as i64 + dy;
            if xx >= 0 && yy >= 0 && (xx as usize) < width && (yy as usize) < height {
                acc += w * sample(xx as usize, yy as usize);
            }
        }
    }
    acc
}

/// Luma conversion with the 0.299 / 0.587 / 0.114 weights.
pub fn to_grayscale(img: &RgbRaster) -> GrayRaster {
    let pixels = img
        .pixels()
        .iter()
        .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
        .collect();
    GrayRaster {
        width: img.width(),
        height: img.height(),
        bounded: true,
        pixels,
    }
}

/// Shift the image so its mean over all pixels becomes 0.5. The result
/// may leave `[0, 1]` and is flagged unbounded.
pub fn normalize_brightness(g: &GrayRaster) -> GrayRaster {
    let shift = 0.5 - g.mean();
    GrayRaster {
        width: g.width,
        height: g.height,
        bounded: false,
        pixels: g.pixels.iter().map(|v| v + shift).collect(),
    }
}

/// Gradient magnitude with the standard 3x3 Sobel kernels and edge
/// replication at the borders.
pub fn sobel_magnitude(g: &GrayRaster) -> Result<GrayRaster> {
    if g.width < 3 || g.height < 3 {
        return Err(CoreError::RasterTooSmall {
            width: g.width,
            height: g.height,
        });
    }
    let (w, h) = (g.width, g.height);
    let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;
    let mut pixels = vec![0.0; w * h];
    for y in 0..h {
        let ym = clamp(y as i64 - 1, h);
        let yp = clamp(y as i64 + 1, h);
        for x in 0..w {
            let xm = clamp(x as i64 - 1, w);
            let xp = clamp(x as i64 + 1, w);
            let tl = g.get(xm, ym);
            let tc = g.get(x, ym);
            let tr = g.get(xp, ym);
            let ml = g.get(xm, y);
            let mr = g.get(xp, y);
            let bl = g.get(xm, yp);
            let bc = g.get(x, yp);
            let br = g.get(xp, yp);
            let gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
            let gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
            pixels[y * w + x] = (gx * gx + gy * gy).sqrt();
        }
    }
    Ok(GrayRaster {
        width: w,
        height: h,
        bounded: false,
        pixels,
    })
}

/// Discrete 1-D Gaussian kernel normalized to sum 1.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size < 3 || size % 2 == 0 || sigma <= 0.0 {
        return Err(CoreError::BadKernel { size, sigma });
    }
    let r = (size / 2) as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    for v in &mut k {
        *v /= total;
    }
    Ok(k)
}

/// Separable Gaussian blur with edge replication at the borders.
pub fn gaussian_blur(g: &GrayRaster, size: usize, sigma: f64) -> Result<GrayRaster> {
    let kernel = gaussian_kernel(size, sigma)?;
    let r = (size / 2) as i64;
    let (w, h) = (g.width, g.height);

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &g.pixels[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                let xx = (x as i64 + i as i64 - r).clamp(0, w as i64 - 1) as usize;
                acc += kv * row[xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut pixels = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                let yy = (y as i64 + i as i64 - r).clamp(0, h as i64 - 1) as usize;
                acc += kv * tmp[yy * w + x];
            }
            pixels[y * w + x] = acc;
        }
    }
    Ok(GrayRaster {
        width: w,
        height: h,
        bounded: g.bounded,
        pixels,
    })
}

/// Detect the circular camera field of view: threshold the grayscale
/// image, keep the largest 4-connected component, fill enclosed holes.
pub fn derive_fov_mask(img: &RgbRaster, threshold: f64) -> Result<BinaryMask> {
    let gray = to_grayscale(img);
    let mut mask = BinaryMask::new(img.width(), img.height());
    let mut any = false;
    for y in 0..gray.height() {
        for x in 0..gray.width() {
            if gray.get(x, y) > threshold {
                mask.set(x, y, true);
                any = true;
            }
        }
    }
    if !any {
        return Err(CoreError::EmptyFov { threshold });
    }
    let mut fov = mask.largest_component_4();
    fov.fill_holes();
    Ok(fov)
}

/// Crop to a square whose side is the larger of the FOV bounding-box
/// dimensions, with the FOV centroid at the square's center. Padding
/// pixels are black / background.
pub fn crop_to_square(img: &RgbRaster, fov: &BinaryMask) -> Result<(RgbRaster, BinaryMask)> {
    let (x0, y0, x1, y1) = fov.bbox().ok_or(CoreError::EmptyMask {
        context: "field-of-view mask",
    })?;
    let side = (x1 - x0 + 1).max(y1 - y0 + 1);
    let c = crate::geometry::centroid(fov)?;
    // Integer translation only: the source window is placed so the FOV
    // centroid lands at the square's center.
    let off_x = (c.x - (side as f64 - 1.0) / 2.0).round() as i64;
    let off_y = (c.y - (side as f64 - 1.0) / 2.0).round() as i64;

    let mut out_img = RgbRaster::new(side, side);
    let mut out_fov = BinaryMask::new(side, side);
    for y in 0..side {
        let sy = y as i64 + off_y;
        if sy < 0 || sy >= img.height() as i64 {
            continue;
        }
        for x in 0..side {
            let sx = x as i64 + off_x;
            if sx < 0 || sx >= img.width() as i64 {
                continue;
            }
            out_img.set(x, y, img.get(sx as usize, sy as usize));
            if fov.get(sx as usize, sy as usize) {
                out_fov.set(x, y, true);
            }
        }
    }
    Ok((out_img, out_fov))
}

/// Contrast/brightness/blur preprocessing applied before vessel
/// segmentation: contrast x1.5 about mid-gray (clamped), brightness
/// x0.6, then a light 3x3 Gaussian blur per channel.
pub fn preprocess_for_segmentation(img: &RgbRaster) -> RgbRaster {
    let adjusted = img.map(|v| (0.5 + 1.5 * (v - 0.5)).clamp(0.0, 1.0) * 0.6);
    let (w, h) = (adjusted.width(), adjusted.height());
    let mut channels = Vec::with_capacity(3);
    for c in 0..3 {
        let plane = GrayRaster::from_pixels(
            w,
            h,
            adjusted.pixels().iter().map(|p| p[c]).collect(),
            true,
        );
        // 3x3 blur is valid for any raster at least 3px wide; smaller
        // images keep the unblurred values.
        let blurred = if w >= 3 && h >= 3 {
            gaussian_blur(&plane, 3, 0.8).expect("kernel parameters are valid")
        } else {
            plane
        };
        channels.push(blurred);
    }
    let pixels = (0..w * h)
        .map(|i| {
            [
                channels[0].pixels()[i],
                channels[1].pixels()[i],
                channels[2].pixels()[i],
            ]
        })
        .collect();
    RgbRaster::from_pixels(w, h, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant_rgb(w: usize, h: usize, v: [f64; 3]) -> RgbRaster {
        RgbRaster::from_pixels(w, h, vec![v; w * h])
    }

    #[test]
    fn grayscale_weights() {
        let white = to_grayscale(&constant_rgb(4, 3, [1.0, 1.0, 1.0]));
        assert_abs_diff_eq!(white.get(2, 1), 1.0, epsilon = 1e-12);

        let red = to_grayscale(&constant_rgb(4, 3, [1.0, 0.0, 0.0]));
        assert_abs_diff_eq!(red.get(0, 0), 0.299, epsilon = 1e-12);

        let mixed = to_grayscale(&constant_rgb(2, 2, [0.5, 0.25, 0.75]));
        assert_abs_diff_eq!(mixed.get(1, 1), 0.38175, epsilon = 1e-12);
    }

    #[test]
    fn normalize_shifts_mean_to_half() {
        let g = GrayRaster::new(8, 8, 0.8);
        let n = normalize_brightness(&g);
        assert_abs_diff_eq!(n.get(3, 3), 0.5, epsilon = 1e-12);
        assert!(!n.bounded());

        // Mean 0.4 shifts by +0.1.
        let two = GrayRaster::from_pixels(2, 1, vec![0.2, 0.6], true);
        let n = normalize_brightness(&two);
        assert_abs_diff_eq!(n.get(0, 0), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(n.get(1, 0), 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(n.mean(), 0.5, epsilon = 1e-12);

        let already = GrayRaster::from_pixels(2, 1, vec![0.4, 0.6], true);
        let n = normalize_brightness(&already);
        assert_abs_diff_eq!(n.get(0, 0), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn sobel_constant_is_zero() {
        let g = GrayRaster::new(5, 5, 0.7);
        let s = sobel_magnitude(&g).unwrap();
        assert!(s.pixels().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn sobel_vertical_step() {
        // Columns 0..=1 are 0, columns 2..=4 are 1.
        let mut g = GrayRaster::new(5, 5, 0.0);
        for y in 0..5 {
            for x in 2..5 {
                g.set(x, y, 1.0);
            }
        }
        let s = sobel_magnitude(&g).unwrap();
        // Interior pixels adjacent to the step see |gx| = 4, gy = 0.
        assert_abs_diff_eq!(s.get(1, 2), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.get(2, 2), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.get(4, 2), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sobel_rejects_tiny_rasters() {
        let g = GrayRaster::new(2, 5, 0.0);
        assert!(matches!(
            sobel_magnitude(&g),
            Err(CoreError::RasterTooSmall { .. })
        ));
    }

    #[test]
    fn sobel_disk_support_is_near_boundary() {
        // Brute-force support check: the gradient of a binary disk is
        // nonzero only within one pixel of its boundary.
        let dims = 41;
        let mask = crate::geometry::disk_mask(Point { x: 20.0, y: 20.0 }, 12.0, (dims, dims));
        let s = sobel_magnitude(&mask.to_gray()).unwrap();
        for y in 0..dims {
            for x in 0..dims {
                if s.get(x, y).abs() < 1e-12 {
                    continue;
                }
                let near_boundary = (-1i64..=1).any(|dy| {
                    (-1i64..=1).any(|dx| {
                        let xx = x as i64 + dx;
                        let yy = y as i64 + dy;
                        xx >= 0
                            && yy >= 0
                            && (xx as usize) < dims
                            && (yy as usize) < dims
                            && mask.get(xx as usize, yy as usize)
                                != mask.get(x, y)
                    })
                });
                assert!(near_boundary, "gradient away from boundary at ({x},{y})");
            }
        }
    }

    #[test]
    fn blur_preserves_constants_and_mass() {
        let g = GrayRaster::new(9, 9, 0.42);
        let b = gaussian_blur(&g, 7, 1.4).unwrap();
        for &v in b.pixels() {
            assert_abs_diff_eq!(v, 0.42, epsilon = 1e-12);
        }

        // Interior impulse: total mass is preserved and the center gets
        // the squared 1-D center weight.
        let mut imp = GrayRaster::new(15, 15, 0.0);
        imp.set(7, 7, 1.0);
        let b = gaussian_blur(&imp, 7, 1.4).unwrap();
        assert_abs_diff_eq!(b.sum(), 1.0, epsilon = 1e-9);
        let k = gaussian_kernel(7, 1.4).unwrap();
        assert_abs_diff_eq!(b.get(7, 7), k[3] * k[3], epsilon = 1e-12);
    }

    #[test]
    fn blur_rejects_bad_kernels() {
        let g = GrayRaster::new(9, 9, 0.0);
        assert!(matches!(
            gaussian_blur(&g, 4, 1.0),
            Err(CoreError::BadKernel { .. })
        ));
        assert!(matches!(
            gaussian_blur(&g, 7, 0.0),
            Err(CoreError::BadKernel { .. })
        ));
    }

    #[test]
    fn rotation_identity_and_quarter_turn() {
        let mut g = GrayRaster::new(31, 31, 0.1);
        g.set(25, 15, 0.9);
        let c = Point { x: 15.0, y: 15.0 };

        let same = g.rotate_about(c, 0.0);
        assert_eq!(same, g);

        // On-pixel at (cx + 10, cy) lands at (cx, cy - 10) after +90.
        let turned = g.rotate_about(c, 90.0);
        assert_abs_diff_eq!(turned.get(15, 5), 0.9, epsilon = 1e-9);

        let full = g.rotate_about(c, 360.0);
        for i in 0..g.pixels().len() {
            assert_abs_diff_eq!(full.pixels()[i], g.pixels()[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn hflip_involution() {
        let mut g = GrayRaster::new(3, 1, 0.0);
        g.set(0, 0, 0.1);
        g.set(1, 0, 0.2);
        g.set(2, 0, 0.3);
        let f = g.hflip();
        assert_eq!(f.pixels(), &[0.3, 0.2, 0.1]);
        assert_eq!(f.hflip(), g);
    }

    #[test]
    fn fov_detection_keeps_largest_component() {
        let mut img = RgbRaster::new(40, 30, );
        let center = Point { x: 19.0, y: 14.0 };
        let disk = crate::geometry::disk_mask(center, 10.0, (40, 30));
        for (x, y) in disk.iter_on() {
            img.set(x, y, [0.5, 0.5, 0.5]);
        }
        // A lone bright speck away from the disk.
        img.set(2, 2, [0.9, 0.9, 0.9]);

        let fov = derive_fov_mask(&img, 0.03).unwrap();
        assert_eq!(fov.count(), disk.count());
        assert!(!fov.get(2, 2));

        let black = RgbRaster::new(8, 8);
        assert!(matches!(
            derive_fov_mask(&black, 0.03),
            Err(CoreError::EmptyFov { .. })
        ));
    }

    #[test]
    fn crop_centers_fov() {
        // Wide 200x100 frame, centered circular FOV of diameter ~100.
        let mut img = RgbRaster::new(200, 100);
        let disk = crate::geometry::disk_mask(Point { x: 99.5, y: 49.5 }, 49.8, (200, 100));
        for (x, y) in disk.iter_on() {
            img.set(x, y, [0.4, 0.4, 0.4]);
        }
        let (sq, fov) = crop_to_square(&img, &disk).unwrap();
        assert_eq!(sq.width(), sq.height());
        assert_eq!(sq.width(), 100);
        let c = crate::geometry::centroid(&fov).unwrap();
        assert!((c.x - 50.0).abs() <= 1.0, "centroid x {}", c.x);
        assert!((c.y - 50.0).abs() <= 1.0, "centroid y {}", c.y);

        // Off-center FOV still ends up centered.
        let mut img = RgbRaster::new(200, 100);
        let disk = crate::geometry::disk_mask(Point { x: 60.0, y: 40.0 }, 30.0, (200, 100));
        for (x, y) in disk.iter_on() {
            img.set(x, y, [0.4, 0.4, 0.4]);
        }
        let (_, fov) = crop_to_square(&img, &disk).unwrap();
        let side = fov.width() as f64;
        let c = crate::geometry::centroid(&fov).unwrap();
        assert!((c.x - side / 2.0).abs() <= 1.0);
        assert!((c.y - side / 2.0).abs() <= 1.0);
    }

    #[test]
    fn segmentation_preprocess_formula() {
        let mid = preprocess_for_segmentation(&constant_rgb(8, 8, [0.5, 0.5, 0.5]));
        assert_abs_diff_eq!(mid.get(4, 4)[0], 0.3, epsilon = 1e-12);

        let bright = preprocess_for_segmentation(&constant_rgb(8, 8, [1.0, 1.0, 1.0]));
        // clamp(1.25) = 1.0, then x0.6; blur keeps constants.
        assert_abs_diff_eq!(bright.get(4, 4)[1], 0.6, epsilon = 1e-12);
    }
}
