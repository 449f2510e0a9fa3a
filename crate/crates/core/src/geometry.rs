//! Fundus geometry: centroids, the optic-disc / fovea frame, disk and
//! ring masks, rotation alignment and laterality-aware quadrants.
//!
//! The quadrant convention follows fundus anatomy: after alignment the
//! optic-disc-to-fovea axis is horizontal with the fovea on the
//! temporal side. For a right eye the temporal side is toward smaller
//! x, for a left eye toward larger x; superior is toward smaller y
//! (screen coordinates).

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::mask::BinaryMask;
use crate::raster::{GrayRaster, RgbRaster};

/// Continuous pixel position (column `x`, row `y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Laterality {
    Left,
    Right,
}

impl Laterality {
    pub fn flipped(self) -> Laterality {
        match self {
            Laterality::Left => Laterality::Right,
            Laterality::Right => Laterality::Left,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Laterality::Left => "L",
            Laterality::Right => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn code(self) -> &'static str {
        match self {
            Sex::Male => "M",
            Sex::Female => "F",
        }
    }
}

/// One eye's image, segmentation masks and metadata: the unit of
/// measurement.
#[derive(Debug, Clone)]
pub struct SegmentationBundle {
    /// Source image. May be empty (0x0) when a caller only carries the
    /// grayscale channel; measurements read `gray_normalized` and the
    /// masks only.
    pub image: RgbRaster,
    /// Brightness-normalized grayscale (mean shifted to 0.5).
    pub gray_normalized: GrayRaster,
    pub od_mask: BinaryMask,
    pub vessel_mask: BinaryMask,
    pub fov_mask: BinaryMask,
    pub fovea: Point,
    pub laterality: Laterality,
    pub subject_id: String,
    pub image_id: String,
    pub sex: Sex,
    pub age: f64,
}

impl SegmentationBundle {
    /// Check the dimensional invariants: all rasters share dimensions
    /// (the image participates when present), the OD mask is nonempty
    /// and the fovea lies inside the field of view.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.gray_normalized.width(), self.gray_normalized.height());
        let dims_ok = self.od_mask.width() == w
            && self.od_mask.height() == h
            && self.vessel_mask.width() == w
            && self.vessel_mask.height() == h
            && self.fov_mask.width() == w
            && self.fov_mask.height() == h
            && (self.image.is_empty() || (self.image.width() == w && self.image.height() == h));
        if !dims_ok {
            return Err(CoreError::DegenerateGeometry {
                context: format!("bundle {}: raster dimensions disagree", self.image_id),
            });
        }
        if self.od_mask.is_empty() {
            return Err(CoreError::EmptyMask {
                context: "optic disc mask",
            });
        }
        let fx = self.fovea.x.round();
        let fy = self.fovea.y.round();
        let inside = fx >= 0.0
            && fy >= 0.0
            && (fx as usize) < w
            && (fy as usize) < h
            && self.fov_mask.get(fx as usize, fy as usize);
        if !inside {
            return Err(CoreError::DegenerateGeometry {
                context: format!("bundle {}: fovea outside the field of view", self.image_id),
            });
        }
        Ok(())
    }

    /// Mirror the bundle left/right and relabel the eye.
    pub fn hflip(&self) -> SegmentationBundle {
        let w = self.gray_normalized.width() as f64;
        SegmentationBundle {
            image: if self.image.is_empty() {
                self.image.clone()
            } else {
                self.image.hflip()
            },
            gray_normalized: self.gray_normalized.hflip(),
            od_mask: self.od_mask.hflip(),
            vessel_mask: self.vessel_mask.hflip(),
            fov_mask: self.fov_mask.hflip(),
            fovea: Point::new(w - 1.0 - self.fovea.x, self.fovea.y),
            laterality: self.laterality.flipped(),
            subject_id: self.subject_id.clone(),
            image_id: self.image_id.clone(),
            sex: self.sex,
            age: self.age,
        }
    }
}

/// Mean position of the foreground pixels.
pub fn centroid(mask: &BinaryMask) -> Result<Point> {
    let mut n = 0u64;
    let (mut sx, mut sy) = (0u64, 0u64);
    for (x, y) in mask.iter_on() {
        n += 1;
        sx += x as u64;
        sy += y as u64;
    }
    if n == 0 {
        return Err(CoreError::EmptyMask { context: "centroid" });
    }
    Ok(Point::new(sx as f64 / n as f64, sy as f64 / n as f64))
}

/// Euclidean distance between the optic disc center and the fovea; the
/// normalizer for all length and area measurements.
pub fn od_fovea_distance(od_center: Point, fovea: Point) -> Result<f64> {
    let d = ((od_center.x - fovea.x).powi(2) + (od_center.y - fovea.y).powi(2)).sqrt();
    if !d.is_finite() || d < 1.0 {
        return Err(CoreError::DegenerateGeometry {
            context: format!("optic-disc-to-fovea distance {d:.3} px"),
        });
    }
    Ok(d)
}

/// Disk of `radius` around `center`: pixel on iff its center is within
/// `radius`. The pixel nearest the center is always included, so a
/// zero-radius disk is exactly that pixel.
pub fn disk_mask(center: Point, radius: f64, dims: (usize, usize)) -> BinaryMask {
    let (w, h) = dims;
    let mut m = BinaryMask::new(w, h);
    if w == 0 || h == 0 {
        return m;
    }
    let r2 = radius * radius;
    let x0 = ((center.x - radius).floor().max(0.0)) as usize;
    let y0 = ((center.y - radius).floor().max(0.0)) as usize;
    let x1 = ((center.x + radius).ceil().min(w as f64 - 1.0)).max(0.0) as usize;
    let y1 = ((center.y + radius).ceil().min(h as f64 - 1.0)).max(0.0) as usize;
    for y in y0..=y1 {
        let dy = y as f64 - center.y;
        for x in x0..=x1 {
            let dx = x as f64 - center.x;
            if dx * dx + dy * dy <= r2 {
                m.set(x, y, true);
            }
        }
    }
    let nx = center.x.round().clamp(0.0, w as f64 - 1.0) as usize;
    let ny = center.y.round().clamp(0.0, h as f64 - 1.0) as usize;
    m.set(nx, ny, true);
    m
}

/// Equivalent radius of a pixel area: the radius of the circle with the
/// same area.
pub fn equivalent_radius(area_px: usize) -> f64 {
    (area_px as f64 / std::f64::consts::PI).sqrt()
}

/// Ring around the optic disc: a disk of 1.4 equivalent radii centered
/// at the OD centroid, minus the OD itself.
pub fn peripapillary_mask(od_mask: &BinaryMask) -> Result<BinaryMask> {
    let area = od_mask.count();
    if area == 0 {
        return Err(CoreError::EmptyMask {
            context: "optic disc mask",
        });
    }
    let c = centroid(od_mask)?;
    let outer = disk_mask(
        c,
        1.4 * equivalent_radius(area),
        (od_mask.width(), od_mask.height()),
    );
    Ok(outer.subtract(od_mask))
}

/// Angle (degrees) that `align_horizontal` would apply: the rotation
/// about the OD centroid that brings the fovea onto the horizontal
/// through the OD center, on the temporal side for the bundle's eye.
pub fn alignment_angle(bundle: &SegmentationBundle) -> Result<f64> {
    let od = centroid(&bundle.od_mask)?;
    od_fovea_distance(od, bundle.fovea)?;
    let v = Point::new(bundle.fovea.x - od.x, bundle.fovea.y - od.y);
    let phi = v.y.atan2(v.x).to_degrees();
    // Target direction of the OD->fovea vector: temporal side.
    let target = match bundle.laterality {
        Laterality::Right => 180.0,
        Laterality::Left => 0.0,
    };
    let mut angle = phi - target;
    if angle > 180.0 {
        angle -= 360.0;
    } else if angle <= -180.0 {
        angle += 360.0;
    }
    Ok(angle)
}

/// Rotate the whole bundle about the OD centroid so the OD-to-fovea
/// axis is horizontal with the fovea temporal. Returns the aligned
/// bundle and the applied angle in degrees. An already-horizontal
/// bundle comes back bit-identical with angle 0.
pub fn align_horizontal(bundle: &SegmentationBundle) -> Result<(SegmentationBundle, f64)> {
    let angle = alignment_angle(bundle)?;
    Ok((rotate_bundle(bundle, angle), angle))
}

fn rotate_bundle(bundle: &SegmentationBundle, angle: f64) -> SegmentationBundle {
    if angle == 0.0 {
        return bundle.clone();
    }
    let od = centroid(&bundle.od_mask).expect("validated above");
    let rad = angle.to_radians();
    let (sin, cos) = (rad.sin(), rad.cos());
    let dx = bundle.fovea.x - od.x;
    let dy = bundle.fovea.y - od.y;
    let fovea = Point::new(od.x + cos * dx + sin * dy, od.y - sin * dx + cos * dy);
    SegmentationBundle {
        image: if bundle.image.is_empty() {
            bundle.image.clone()
        } else {
            bundle.image.rotate_about(od, angle)
        },
        gray_normalized: bundle.gray_normalized.rotate_about(od, angle),
        od_mask: bundle.od_mask.rotate_about(od, angle),
        vessel_mask: bundle.vessel_mask.rotate_about(od, angle),
        fov_mask: bundle.fov_mask.rotate_about(od, angle),
        fovea,
        laterality: bundle.laterality,
        subject_id: bundle.subject_id.clone(),
        image_id: bundle.image_id.clone(),
        sex: bundle.sex,
        age: bundle.age,
    }
}

/// How far a bundle is from horizontal alignment, in pixels of vertical
/// fovea offset. Errors with `NotAligned` when at or beyond 0.5 px.
pub fn require_aligned(bundle: &SegmentationBundle) -> Result<Point> {
    let od = centroid(&bundle.od_mask)?;
    let offset = (bundle.fovea.y - od.y).abs();
    if offset >= 0.5 {
        return Err(CoreError::NotAligned { offset });
    }
    Ok(od)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrant {
    SuperiorTemporal,
    SuperiorNasal,
    InferiorTemporal,
    InferiorNasal,
}

/// Classify a pixel against the quadrant origin, honoring laterality.
/// Pixels exactly on a split line belong to no quadrant.
#[inline]
pub fn classify_quadrant(
    x: f64,
    y: f64,
    origin: Point,
    laterality: Laterality,
) -> Option<Quadrant> {
    let superior = if y < origin.y {
        true
    } else if y > origin.y {
        false
    } else {
        return None;
    };
    let temporal = match laterality {
        Laterality::Right => {
            if x < origin.x {
                true
            } else if x > origin.x {
                false
            } else {
                return None;
            }
        }
        Laterality::Left => {
            if x > origin.x {
                true
            } else if x < origin.x {
                false
            } else {
                return None;
            }
        }
    };
    Some(match (superior, temporal) {
        (true, true) => Quadrant::SuperiorTemporal,
        (true, false) => Quadrant::SuperiorNasal,
        (false, true) => Quadrant::InferiorTemporal,
        (false, false) => Quadrant::InferiorNasal,
    })
}

/// The four half-plane quadrant masks of an aligned bundle, split at
/// the OD centroid.
#[derive(Debug, Clone)]
pub struct QuadrantMasks {
    pub superior_temporal: BinaryMask,
    pub superior_nasal: BinaryMask,
    pub inferior_temporal: BinaryMask,
    pub inferior_nasal: BinaryMask,
}

impl QuadrantMasks {
    pub fn get(&self, q: Quadrant) -> &BinaryMask {
        match q {
            Quadrant::SuperiorTemporal => &self.superior_temporal,
            Quadrant::SuperiorNasal => &self.superior_nasal,
            Quadrant::InferiorTemporal => &self.inferior_temporal,
            Quadrant::InferiorNasal => &self.inferior_nasal,
        }
    }
}

pub fn quadrant_masks(bundle: &SegmentationBundle) -> Result<QuadrantMasks> {
    let origin = require_aligned(bundle)?;
    let (w, h) = (bundle.fov_mask.width(), bundle.fov_mask.height());
    let mut masks = QuadrantMasks {
        superior_temporal: BinaryMask::new(w, h),
        superior_nasal: BinaryMask::new(w, h),
        inferior_temporal: BinaryMask::new(w, h),
        inferior_nasal: BinaryMask::new(w, h),
    };
    for y in 0..h {
        for x in 0..w {
            match classify_quadrant(x as f64, y as f64, origin, bundle.laterality) {
                Some(Quadrant::SuperiorTemporal) => masks.superior_temporal.set(x, y, true),
                Some(Quadrant::SuperiorNasal) => masks.superior_nasal.set(x, y, true),
                Some(Quadrant::InferiorTemporal) => masks.inferior_temporal.set(x, y, true),
                Some(Quadrant::InferiorNasal) => masks.inferior_nasal.set(x, y, true),
                None => {}
            }
        }
    }
    Ok(masks)
}
