//! Binary pixel masks and the small amount of morphology the
//! measurements need: connected components, hole filling, bounding
//! boxes, rotation and flipping.

use crate::geometry::Point;
use crate::raster::GrayRaster;

/// 0/1 pixel grid. Stored as bytes; any nonzero byte is foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = BinaryMask::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.pixels[y * width + x] = 1;
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x] != 0
    }

    #[inline]
    pub fn get_i(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            false
        } else {
            self.pixels[y as usize * self.width + x as usize] != 0
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.pixels[y * self.width + x] = on as u8;
    }

    pub fn bytes(&self) -> &[u8] {
        &self.pixels
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.iter().all(|&v| v == 0)
    }

    pub fn iter_on(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of the foreground, or
    /// `None` for an empty mask.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (x, y) in self.iter_on() {
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bb
    }

    /// Pixels in `self` but not in `other`.
    pub fn subtract(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let pixels = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| (a != 0 && b == 0) as u8)
            .collect();
        BinaryMask {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    pub fn intersect(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let pixels = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| (a != 0 && b != 0) as u8)
            .collect();
        BinaryMask {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// View as a 0.0/1.0 grayscale raster.
    pub fn to_gray(&self) -> GrayRaster {
        GrayRaster::from_pixels(
            self.width,
            self.height,
            self.pixels.iter().map(|&v| (v != 0) as u8 as f64).collect(),
            true,
        )
    }

    pub fn hflip(&self) -> BinaryMask {
        let mut out = BinaryMask::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.set(self.width - 1 - x, y, true);
                }
            }
        }
        out
    }

    /// Rotate about `center` with nearest-neighbor sampling so the mask
    /// stays strictly binary; out-of-frame samples are background.
    /// `angle_deg == 0` is the exact identity.
    pub fn rotate_about(&self, center: Point, angle_deg: f64) -> BinaryMask {
        if angle_deg == 0.0 {
            return self.clone();
        }
        let rad = -angle_deg.to_radians();
        let (sin, cos) = (rad.sin(), rad.cos());
        let mut out = BinaryMask::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let dx = x as f64 - center.x;
                let dy = y as f64 - center.y;
                let sx = (center.x + cos * dx + sin * dy).round() as i64;
                let sy = (center.y - sin * dx + cos * dy).round() as i64;
                if self.get_i(sx, sy) {
                    out.set(x, y, true);
                }
            }
        }
        out
    }

    /// Largest 4-connected foreground component.
    pub fn largest_component_4(&self) -> BinaryMask {
        let mut labels = vec![0u32; self.pixels.len()];
        let mut sizes = vec![0usize]; // label 0 = background
        let mut stack = Vec::new();
        for start in 0..self.pixels.len() {
            if self.pixels[start] == 0 || labels[start] != 0 {
                continue;
            }
            let label = sizes.len() as u32;
            sizes.push(0);
            stack.push(start);
            labels[start] = label;
            while let Some(i) = stack.pop() {
                sizes[label as usize] += 1;
                let (x, y) = (i % self.width, i / self.width);
                let mut visit = |j: usize| {
                    if self.pixels[j] != 0 && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < self.width {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - self.width);
                }
                if y + 1 < self.height {
                    visit(i + self.width);
                }
            }
        }
        let best = (1..sizes.len()).max_by_key(|&l| sizes[l]).unwrap_or(0) as u32;
        let pixels = labels
            .iter()
            .map(|&l| (best != 0 && l == best) as u8)
            .collect();
        BinaryMask {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Fill background regions not reachable from the frame border
    /// (8-connected background flood).
    pub fn fill_holes(&mut self) {
        let (w, h) = (self.width, self.height);
        if w == 0 || h == 0 {
            return;
        }
        let mut outside = vec![false; w * h];
        let mut stack = Vec::new();
        let seed = |i: usize, outside: &mut Vec<bool>, stack: &mut Vec<usize>| {
            if self.pixels[i] == 0 && !outside[i] {
                outside[i] = true;
                stack.push(i);
            }
        };
        for x in 0..w {
            seed(x, &mut outside, &mut stack);
            seed((h - 1) * w + x, &mut outside, &mut stack);
        }
        for y in 0..h {
            seed(y * w, &mut outside, &mut stack);
            seed(y * w + w - 1, &mut outside, &mut stack);
        }
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (xx, yy) = (x + dx, y + dy);
                    if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                        continue;
                    }
                    let j = yy as usize * w + xx as usize;
                    if self.pixels[j] == 0 && !outside[j] {
                        outside[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        for i in 0..self.pixels.len() {
            if self.pixels[i] == 0 && !outside[i] {
                self.pixels[i] = 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::disk_mask;

    #[test]
    fn rotation_keeps_masks_binary_and_counts_stable() {
        let disk = disk_mask(Point { x: 40.0, y: 40.0 }, 22.0, (81, 81));
        let n0 = disk.count() as f64;
        for angle in [13.0, 37.0, 90.0, 181.5, 270.0] {
            let r = disk.rotate_about(Point { x: 40.0, y: 40.0 }, angle);
            let n = r.count() as f64;
            assert!(
                (n - n0).abs() / n0 < 0.02,
                "pixel drift {} at angle {angle}",
                (n - n0).abs() / n0
            );
        }
    }

    #[test]
    fn mask_full_turn_is_exact() {
        let disk = disk_mask(Point { x: 20.0, y: 20.0 }, 9.0, (41, 41));
        let r = disk.rotate_about(Point { x: 20.0, y: 20.0 }, 360.0);
        assert_eq!(r, disk);
    }

    #[test]
    fn fill_holes_closes_interior() {
        // A ring: disk minus smaller disk; filling restores the disk.
        let c = Point { x: 15.0, y: 15.0 };
        let outer = disk_mask(c, 10.0, (31, 31));
        let inner = disk_mask(c, 5.0, (31, 31));
        let mut ring = outer.subtract(&inner);
        ring.fill_holes();
        assert_eq!(ring, outer);
    }

    #[test]
    fn largest_component_picks_biggest() {
        let mut m = BinaryMask::new(20, 10);
        for x in 2..8 {
            m.set(x, 3, true);
        }
        m.set(15, 8, true);
        let big = m.largest_component_4();
        assert_eq!(big.count(), 6);
        assert!(!big.get(15, 8));
    }
}
