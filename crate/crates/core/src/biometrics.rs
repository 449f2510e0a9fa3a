//! The 14 retinal parameters measured per eye: optic-disc area,
//! brightness and edge sharpness, peripapillary brightness, vessel
//! coverage (whole fundus, four quadrants, macula), vessel-graph node
//! and branch counts with total branch length, and the normalized
//! radius of the foveal avascular zone.
//!
//! Lengths and areas are normalized by the optic-disc-to-fovea distance
//! (squared for areas) so measurements are comparable across fields of
//! view. Graph counts and lengths are reported raw, at mask resolution.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{
    alignment_angle, align_horizontal, centroid, classify_quadrant, od_fovea_distance,
    peripapillary_mask, require_aligned, Quadrant, SegmentationBundle,
};
use crate::raster::{gaussian_blur, sobel_magnitude, GrayRaster};
use crate::vesselgraph;

/// Measurement knobs. The blur parameters shape the optic-disc edge
/// mask; spur pruning stabilizes graph counts against mask noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub blur_size: usize,
    pub blur_sigma: f64,
    pub prune_spurs: bool,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            blur_size: 7,
            blur_sigma: 1.4,
            prune_spurs: true,
        }
    }
}

/// One eye's 14 measurements, the row type of all statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVector {
    pub od_area_norm: f64,
    pub od_brightness: f64,
    pub od_edge_sharpness: f64,
    pub peripapillary_brightness: f64,
    pub vc_st: f64,
    pub vc_sn: f64,
    pub vc_it: f64,
    pub vc_in: f64,
    pub vc_entire: f64,
    pub vc_macula: f64,
    pub graph_nodes: usize,
    pub graph_branches: usize,
    pub graph_total_length: f64,
    pub faz_radius_norm: f64,
}

/// Parameter names in report order (the order the published tables
/// list them: disc, peripapillary, coverage, graph, FAZ).
pub const PARAMETER_NAMES: [&str; 14] = [
    "od_area_norm",
    "od_brightness",
    "od_edge_sharpness",
    "peripapillary_brightness",
    "vc_superior_temporal",
    "vc_inferior_temporal",
    "vc_superior_nasal",
    "vc_inferior_nasal",
    "vc_entire",
    "vc_macula",
    "graph_nodes",
    "graph_branches",
    "graph_total_length",
    "faz_radius_norm",
];

impl MeasurementVector {
    /// Value of a parameter by report name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "od_area_norm" => self.od_area_norm,
            "od_brightness" => self.od_brightness,
            "od_edge_sharpness" => self.od_edge_sharpness,
            "peripapillary_brightness" => self.peripapillary_brightness,
            "vc_superior_temporal" => self.vc_st,
            "vc_inferior_temporal" => self.vc_it,
            "vc_superior_nasal" => self.vc_sn,
            "vc_inferior_nasal" => self.vc_in,
            "vc_entire" => self.vc_entire,
            "vc_macula" => self.vc_macula,
            "graph_nodes" => self.graph_nodes as f64,
            "graph_branches" => self.graph_branches as f64,
            "graph_total_length" => self.graph_total_length,
            "faz_radius_norm" => self.faz_radius_norm,
            _ => return None,
        })
    }

    /// All finite, coverages in [0, 1], positive normalized disc area.
    pub fn validate(&self) -> bool {
        let coverages = [
            self.vc_st,
            self.vc_sn,
            self.vc_it,
            self.vc_in,
            self.vc_entire,
            self.vc_macula,
        ];
        PARAMETER_NAMES
            .iter()
            .all(|n| self.get(n).is_some_and(f64::is_finite))
            && coverages.iter().all(|&c| (0.0..=1.0).contains(&c))
            && self.od_area_norm > 0.0
    }
}

/// Six vessel-coverage fractions of an aligned bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselCoverage {
    pub entire: f64,
    pub st: f64,
    pub sn: f64,
    pub it: f64,
    pub inferior_nasal: f64,
    pub macula: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FazFlag {
    Normal,
    /// Even the zero-radius circle touches a vessel; radius reported 0.
    FoveaOnVessel,
    /// No vessel inside the search range; radius capped at the
    /// disc-fovea distance (normalized 1).
    NoVesselCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FazMeasure {
    pub radius_norm: f64,
    pub flag: FazFlag,
}

/// Everything `measure_all` produces for one bundle.
#[derive(Debug, Clone)]
pub struct MeasureOutcome {
    pub vector: MeasurementVector,
    /// Rotation applied by the internal alignment step, degrees.
    pub align_angle: f64,
    pub faz_flag: FazFlag,
}

/// Optic-disc pixel area divided by the squared disc-fovea distance.
pub fn od_normalized_area(bundle: &SegmentationBundle) -> Result<f64> {
    let area = bundle.od_mask.count();
    if area == 0 {
        return Err(CoreError::EmptyMask {
            context: "optic disc mask",
        });
    }
    let od = centroid(&bundle.od_mask)?;
    let d = od_fovea_distance(od, bundle.fovea)?;
    Ok(area as f64 / (d * d))
}

/// Mean normalized brightness over the optic disc.
pub fn od_brightness(bundle: &SegmentationBundle) -> Result<f64> {
    mask_mean(&bundle.gray_normalized, &bundle.od_mask, "optic disc mask")
}

/// Mean normalized brightness over the peripapillary ring.
pub fn peripapillary_brightness(bundle: &SegmentationBundle) -> Result<f64> {
    let ring = peripapillary_mask(&bundle.od_mask)?;
    mask_mean(&bundle.gray_normalized, &ring, "peripapillary ring")
}

fn mask_mean(gray: &GrayRaster, mask: &crate::mask::BinaryMask, what: &'static str) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (x, y) in mask.iter_on() {
        total += gray.get(x, y);
        n += 1;
    }
    if n == 0 {
        return Err(CoreError::EmptyMask { context: what });
    }
    Ok(total / n as f64)
}

/// Edge sharpness of the optic disc: the gradient magnitude of the
/// normalized image averaged under an edge mask, where the edge mask is
/// the blurred gradient of the binary disc mask (largest exactly on the
/// contour, decaying away from it).
pub fn od_edge_sharpness(bundle: &SegmentationBundle, config: &MeasureConfig) -> Result<f64> {
    let (x0, y0, x1, y1) = bundle.od_mask.bbox().ok_or(CoreError::EmptyMask {
        context: "optic disc mask",
    })?;
    let gray = &bundle.gray_normalized;
    if gray.width() < 3 || gray.height() < 3 {
        return Err(CoreError::RasterTooSmall {
            width: gray.width(),
            height: gray.height(),
        });
    }
    // The edge mask vanishes a blur radius past the contour, so the
    // computation can run on a window around the disc: values where the
    // edge mask is nonzero are identical to a full-frame evaluation.
    let margin = config.blur_size / 2 + 3;
    let wx0 = x0.saturating_sub(margin);
    let wy0 = y0.saturating_sub(margin);
    let wx1 = (x1 + margin).min(gray.width() - 1);
    let wy1 = (y1 + margin).min(gray.height() - 1);

    let od_window = window_mask_as_gray(&bundle.od_mask, wx0, wy0, wx1, wy1);
    let gray_window = gray.window(wx0, wy0, wx1, wy1);

    let contour = sobel_magnitude(&od_window)?;
    let edge_mask = gaussian_blur(&contour, config.blur_size, config.blur_sigma)?;
    let gradient = sobel_magnitude(&gray_window)?;

    let mut num = 0.0;
    let mut den = 0.0;
    for (em, s) in edge_mask.pixels().iter().zip(gradient.pixels()) {
        num += em * s;
        den += em;
    }
    if den <= 0.0 {
        return Err(CoreError::EmptyMask {
            context: "optic disc edge mask",
        });
    }
    Ok(num / den)
}

fn window_mask_as_gray(
    mask: &crate::mask::BinaryMask,
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
) -> GrayRaster {
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    let mut g = GrayRaster::new(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            if mask.get(x + x0, y + y0) {
                g.set(x, y, 1.0);
            }
        }
    }
    g
}

/// Vessel coverage fractions: whole field of view, the four quadrants
/// split at the OD centroid (denominators restricted to the FOV inside
/// each half-plane pair) and the macula disk of half the disc-fovea
/// distance around the fovea.
pub fn vessel_coverage(bundle: &SegmentationBundle) -> Result<VesselCoverage> {
    let origin = require_aligned(bundle)?;
    if bundle.fov_mask.is_empty() {
        return Err(CoreError::EmptyMask {
            context: "field-of-view mask",
        });
    }
    let d = od_fovea_distance(origin, bundle.fovea)?;
    let macula_r2 = (0.5 * d) * (0.5 * d);
    let (w, h) = (bundle.fov_mask.width(), bundle.fov_mask.height());

    let mut fov_total = 0u64;
    let mut vessel_total = 0u64;
    let mut quad_fov = [0u64; 4];
    let mut quad_vessel = [0u64; 4];
    let mut macula_total = 0u64;
    let mut macula_vessel = 0u64;

    for y in 0..h {
        let dy = y as f64 - bundle.fovea.y;
        for x in 0..w {
            let in_fov = bundle.fov_mask.get(x, y);
            let in_vessel = bundle.vessel_mask.get(x, y);
            if in_fov {
                fov_total += 1;
                if in_vessel {
                    vessel_total += 1;
                }
                if let Some(q) =
                    classify_quadrant(x as f64, y as f64, origin, bundle.laterality)
                {
                    let qi = match q {
                        Quadrant::SuperiorTemporal => 0,
                        Quadrant::SuperiorNasal => 1,
                        Quadrant::InferiorTemporal => 2,
                        Quadrant::InferiorNasal => 3,
                    };
                    quad_fov[qi] += 1;
                    if in_vessel {
                        quad_vessel[qi] += 1;
                    }
                }
            }
            let dx = x as f64 - bundle.fovea.x;
            if dx * dx + dy * dy <= macula_r2 {
                macula_total += 1;
                if in_vessel {
                    macula_vessel += 1;
                }
            }
        }
    }

    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(VesselCoverage {
        entire: ratio(vessel_total, fov_total),
        st: ratio(quad_vessel[0], quad_fov[0]),
        sn: ratio(quad_vessel[1], quad_fov[1]),
        it: ratio(quad_vessel[2], quad_fov[2]),
        inferior_nasal: ratio(quad_vessel[3], quad_fov[3]),
        macula: ratio(macula_vessel, macula_total),
    })
}

/// Radius of the largest vessel-free circle centered at the fovea,
/// searched over integer radii and normalized by the disc-fovea
/// distance. Rotation-invariant.
pub fn faz_radius(bundle: &SegmentationBundle) -> Result<FazMeasure> {
    let od = centroid(&bundle.od_mask)?;
    let d = od_fovea_distance(od, bundle.fovea)?;
    let (fx, fy) = (bundle.fovea.x, bundle.fovea.y);
    let (w, h) = (bundle.vessel_mask.width(), bundle.vessel_mask.height());

    // The zero-radius circle is the pixel nearest the fovea.
    let nx = fx.round().clamp(0.0, w as f64 - 1.0) as usize;
    let ny = fy.round().clamp(0.0, h as f64 - 1.0) as usize;
    if bundle.vessel_mask.get(nx, ny) {
        return Ok(FazMeasure {
            radius_norm: 0.0,
            flag: FazFlag::FoveaOnVessel,
        });
    }

    let mut min_d2 = f64::INFINITY;
    for (x, y) in bundle.vessel_mask.iter_on() {
        let dx = x as f64 - fx;
        let dy = y as f64 - fy;
        let d2 = dx * dx + dy * dy;
        if d2 < min_d2 {
            min_d2 = d2;
        }
    }
    if min_d2 > d * d {
        return Ok(FazMeasure {
            radius_norm: 1.0,
            flag: FazFlag::NoVesselCap,
        });
    }
    // Largest integer r with r^2 strictly below the nearest squared
    // distance (a vessel pixel exactly at distance r is inside C(r)).
    let mut r = min_d2.sqrt().floor();
    while r * r >= min_d2 {
        r -= 1.0;
    }
    while (r + 1.0) * (r + 1.0) < min_d2 {
        r += 1.0;
    }
    Ok(FazMeasure {
        radius_norm: r.max(0.0) / d,
        flag: FazFlag::Normal,
    })
}

/// Measure all 14 parameters. The bundle is aligned once about the OD
/// centroid; sub-operation failures carry the field name.
pub fn measure_all(bundle: &SegmentationBundle, config: &MeasureConfig) -> Result<MeasureOutcome> {
    bundle.validate()?;
    let angle = alignment_angle(bundle).map_err(|e| e.for_field("alignment"))?;
    let aligned_storage;
    let aligned: &SegmentationBundle = if angle == 0.0 {
        bundle
    } else {
        let (rotated, _) = align_horizontal(bundle).map_err(|e| e.for_field("alignment"))?;
        aligned_storage = rotated;
        &aligned_storage
    };

    let od_area_norm =
        od_normalized_area(aligned).map_err(|e| e.for_field("od_area_norm"))?;
    let od_bright = od_brightness(aligned).map_err(|e| e.for_field("od_brightness"))?;
    let sharpness =
        od_edge_sharpness(aligned, config).map_err(|e| e.for_field("od_edge_sharpness"))?;
    let peri = peripapillary_brightness(aligned)
        .map_err(|e| e.for_field("peripapillary_brightness"))?;
    let coverage = vessel_coverage(aligned).map_err(|e| e.for_field("vessel_coverage"))?;
    let faz = faz_radius(aligned).map_err(|e| e.for_field("faz_radius_norm"))?;
    let graph = vesselgraph::analyze(&aligned.vessel_mask, config.prune_spurs)
        .map_err(|e| e.for_field("vessel_graph"))?;
    let metrics = graph.metrics();

    Ok(MeasureOutcome {
        vector: MeasurementVector {
            od_area_norm,
            od_brightness: od_bright,
            od_edge_sharpness: sharpness,
            peripapillary_brightness: peri,
            vc_st: coverage.st,
            vc_sn: coverage.sn,
            vc_it: coverage.it,
            vc_in: coverage.inferior_nasal,
            vc_entire: coverage.entire,
            vc_macula: coverage.macula,
            graph_nodes: metrics.nodes,
            graph_branches: metrics.branches,
            graph_total_length: metrics.total_length,
            faz_radius_norm: faz.radius_norm,
        },
        align_angle: angle,
        faz_flag: faz.flag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{disk_mask, Laterality, Point, Sex};
    use crate::mask::BinaryMask;
    use crate::raster::{normalize_brightness, RgbRaster};
    use approx::assert_abs_diff_eq;

    /// A hand-built bundle: OD disk at (300, 200), fovea at (100, 200)
    /// (right eye, temporal to the left), full-frame FOV.
    fn fixture(vessels: &[(usize, usize)]) -> SegmentationBundle {
        let dims = (400, 400);
        let od_center = Point::new(300.0, 200.0);
        let od = disk_mask(od_center, 30.0, dims);
        let fov = BinaryMask::from_fn(dims.0, dims.1, |_, _| true);
        let mut vessel = BinaryMask::new(dims.0, dims.1);
        for &(x, y) in vessels {
            vessel.set(x, y, true);
        }
        let mut gray = GrayRaster::new(dims.0, dims.1, 0.4);
        for (x, y) in od.iter_on() {
            gray.set(x, y, 0.7);
        }
        SegmentationBundle {
            image: RgbRaster::new(0, 0),
            gray_normalized: normalize_brightness(&gray),
            od_mask: od,
            vessel_mask: vessel,
            fov_mask: fov,
            fovea: Point::new(100.0, 200.0),
            laterality: Laterality::Right,
            subject_id: "s1".into(),
            image_id: "i1".into(),
            sex: Sex::Female,
            age: 44.0,
        }
    }

    #[test]
    fn od_area_normalization() {
        let b = fixture(&[]);
        let a = od_normalized_area(&b).unwrap();
        let expected = std::f64::consts::PI * 900.0 / 40000.0;
        assert!((a - expected).abs() / expected < 0.03, "area {a}");
    }

    #[test]
    fn brightness_on_constant_image_is_half() {
        let mut b = fixture(&[]);
        b.gray_normalized = normalize_brightness(&GrayRaster::new(400, 400, 0.8));
        assert_abs_diff_eq!(od_brightness(&b).unwrap(), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(
            peripapillary_brightness(&b).unwrap(),
            0.5,
            epsilon = 1e-9
        );
    }

    #[test]
    fn od_brightness_shifted_fixture() {
        // OD pixels sit 0.3 above the image mean by construction.
        let dims = (400usize, 400usize);
        let od = disk_mask(Point::new(300.0, 200.0), 30.0, dims);
        let mut gray = GrayRaster::new(dims.0, dims.1, 0.4);
        let mean_shift = 0.3;
        let n = (dims.0 * dims.1) as f64;
        let a = od.count() as f64;
        // Solve so that od_level - mean = 0.3 exactly.
        let od_level = 0.4 + mean_shift * n / (n - a);
        for (x, y) in od.iter_on() {
            gray.set(x, y, od_level);
        }
        let mut b = fixture(&[]);
        b.od_mask = od;
        b.gray_normalized = normalize_brightness(&gray);
        assert_abs_diff_eq!(od_brightness(&b).unwrap(), 0.8, epsilon = 1e-9);
    }

    #[test]
    fn sharpness_zero_on_flat_image_and_ordering() {
        let mut b = fixture(&[]);
        b.gray_normalized = normalize_brightness(&GrayRaster::new(400, 400, 0.55));
        let s = od_edge_sharpness(&b, &MeasureConfig::default()).unwrap();
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-9);

        // A hard disc edge is sharper than the same disc blurred.
        let hard = fixture(&[]);
        let s_hard = od_edge_sharpness(&hard, &MeasureConfig::default()).unwrap();
        let mut soft = fixture(&[]);
        soft.gray_normalized =
            gaussian_blur(&hard.gray_normalized, 9, 2.5).unwrap();
        let s_soft = od_edge_sharpness(&soft, &MeasureConfig::default()).unwrap();
        assert!(
            s_hard > s_soft,
            "hard {s_hard} should exceed blurred {s_soft}"
        );
    }

    #[test]
    fn sharpness_window_matches_full_frame() {
        let b = fixture(&[]);
        let windowed = od_edge_sharpness(&b, &MeasureConfig::default()).unwrap();

        // Reference path: full-frame rasters, no windowing.
        let contour = sobel_magnitude(&b.od_mask.to_gray()).unwrap();
        let em = gaussian_blur(&contour, 7, 1.4).unwrap();
        let s = sobel_magnitude(&b.gray_normalized).unwrap();
        let num: f64 = em
            .pixels()
            .iter()
            .zip(s.pixels())
            .map(|(a, b)| a * b)
            .sum();
        let den: f64 = em.sum();
        assert_abs_diff_eq!(windowed, num / den, epsilon = 1e-9);
    }

    #[test]
    fn coverage_extremes() {
        // Vessels equal to the FOV: every fraction is 1.
        let mut b = fixture(&[]);
        b.vessel_mask = b.fov_mask.clone();
        let c = vessel_coverage(&b).unwrap();
        for v in [c.entire, c.st, c.sn, c.it, c.inferior_nasal, c.macula] {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }

        // No vessels: every fraction is 0.
        let b = fixture(&[]);
        let c = vessel_coverage(&b).unwrap();
        for v in [c.entire, c.st, c.sn, c.it, c.inferior_nasal, c.macula] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn coverage_superior_half() {
        // Vessels cover exactly the superior half of the FOV.
        let mut b = fixture(&[]);
        b.vessel_mask = BinaryMask::from_fn(400, 400, |_, y| (y as f64) < 200.0);
        let c = vessel_coverage(&b).unwrap();
        assert_abs_diff_eq!(c.st, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.sn, 1.0, epsilon = 1e-9);
        assert_eq!(c.it, 0.0);
        assert_eq!(c.inferior_nasal, 0.0);
        assert!((c.entire - 0.5).abs() < 0.01, "entire {}", c.entire);
    }

    #[test]
    fn coverage_matches_quadrant_mask_route() {
        // The fused counting loop agrees with an explicit mask build.
        let vessels: Vec<(usize, usize)> = (0..4000)
            .map(|i| ((i * 37) % 400, (i * 53) % 400))
            .collect();
        let b = fixture(&vessels);
        let fused = vessel_coverage(&b).unwrap();
        let masks = crate::geometry::quadrant_masks(&b).unwrap();
        let by_masks = |qm: &BinaryMask| {
            let denom = qm.intersect(&b.fov_mask).count() as f64;
            let num = qm
                .intersect(&b.fov_mask)
                .intersect(&b.vessel_mask)
                .count() as f64;
            num / denom
        };
        assert_abs_diff_eq!(fused.st, by_masks(&masks.superior_temporal), epsilon = 1e-12);
        assert_abs_diff_eq!(fused.sn, by_masks(&masks.superior_nasal), epsilon = 1e-12);
        assert_abs_diff_eq!(fused.it, by_masks(&masks.inferior_temporal), epsilon = 1e-12);
        assert_abs_diff_eq!(
            fused.inferior_nasal,
            by_masks(&masks.inferior_nasal),
            epsilon = 1e-12
        );
    }

    #[test]
    fn faz_search_rules() {
        // Nearest vessel pixel at distance 40.5 from the fovea.
        let b = fixture(&[(140, 204)]); // dx=40., dy=4 -> d = 40.199..
        let d = ((40.0f64).powi(2) + 16.0).sqrt();
        assert!(d > 40.0 && d < 41.0);
        let f = faz_radius(&b).unwrap();
        assert_eq!(f.flag, FazFlag::Normal);
        assert_abs_diff_eq!(f.radius_norm, 40.0 / 200.0, epsilon = 1e-12);

        // A vessel pixel exactly at integer distance 10: C(10) touches
        // it, so the radius is 9.
        let b = fixture(&[(110, 200)]);
        let f = faz_radius(&b).unwrap();
        assert_abs_diff_eq!(f.radius_norm, 9.0 / 200.0, epsilon = 1e-12);

        // Vessel on the fovea pixel itself.
        let b = fixture(&[(100, 200)]);
        let f = faz_radius(&b).unwrap();
        assert_eq!(f.flag, FazFlag::FoveaOnVessel);
        assert_eq!(f.radius_norm, 0.0);

        // No vessels at all: capped at the disc-fovea distance.
        let b = fixture(&[]);
        let f = faz_radius(&b).unwrap();
        assert_eq!(f.flag, FazFlag::NoVesselCap);
        assert_eq!(f.radius_norm, 1.0);
    }

    #[test]
    fn faz_monotone_under_added_vessels() {
        let near = fixture(&[(150, 200), (130, 200)]);
        let far = fixture(&[(150, 200)]);
        let n = faz_radius(&near).unwrap().radius_norm;
        let f = faz_radius(&far).unwrap().radius_norm;
        assert!(n <= f);
    }

    #[test]
    fn measure_all_deterministic_and_flip_dual() {
        let vessels: Vec<(usize, usize)> = (0..60)
            .map(|i| (160 + i, 150 + (i % 7)))
            .chain((0..40).map(|i| (180 + i, 260)))
            .collect();
        let b = fixture(&vessels);
        let cfg = MeasureConfig::default();
        let once = measure_all(&b, &cfg).unwrap();
        let twice = measure_all(&b, &cfg).unwrap();
        assert_eq!(once.vector, twice.vector);
        assert!(once.vector.validate());
        assert_eq!(once.align_angle, 0.0);

        // Mirrored bundle with flipped laterality measures identically.
        let flipped = b.hflip();
        let mirror = measure_all(&flipped, &cfg).unwrap();
        for name in PARAMETER_NAMES {
            let v0 = once.vector.get(name).unwrap();
            let v1 = mirror.vector.get(name).unwrap();
            assert!(
                (v0 - v1).abs() < 1e-6,
                "{name}: {v0} vs {v1} after horizontal flip"
            );
        }
    }

    #[test]
    fn measure_all_names_failing_field() {
        let mut b = fixture(&[]);
        b.od_mask = BinaryMask::new(400, 400);
        let err = measure_all(&b, &MeasureConfig::default()).unwrap_err();
        assert!(matches!(err, CoreError::EmptyMask { .. }));
    }
}
