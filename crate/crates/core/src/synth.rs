//! Synthetic fundus bundles with analytically known measurements: the
//! oracle for the measurement pipeline and for end-to-end protocol
//! simulations.
//!
//! A generated eye is a circular field of view holding a uniform
//! background, a brighter optic disc, a darker peripapillary ring and a
//! vessel mask drawn as straight strokes: fork trees rooted near the
//! disc, short free strokes per retinal region (the coverage knobs) and
//! one column tangent to the avascular zone so the measured FAZ radius
//! is pinned exactly. Stroke centerlines keep a guarded separation so
//! the skeleton graph of the rendered mask has exactly the drawn
//! topology, and ground-truth branch lengths use the same
//! axial/diagonal step metric the skeleton analysis reports.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::biometrics::MeasurementVector;
use crate::error::{CoreError, Result};
use crate::geometry::{disk_mask, equivalent_radius, Laterality, Point, SegmentationBundle, Sex};
use crate::mask::BinaryMask;
use crate::raster::{normalize_brightness, GrayRaster, RgbRaster};

/// Sharpness of an ideal hard disc edge per unit step height under the
/// default 7x7/1.4 edge blur, calibrated on lattice discs of radius
/// 20-48 (stable to about half a percent).
pub const EDGE_SHARPNESS_PER_STEP: f64 = 2.007;

const STROKE_SEPARATION: f64 = 4.0;
const JUNCTION_EXEMPT: f64 = 10.0;
const MIN_SEGMENT: f64 = 14.0;
const FAZ_TANGENT_HALF: i64 = 8;
const END_CAP_EXTENSION: f64 = 0.0;

/// Vessel content of one synthetic eye.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VesselSpec {
    /// Target node count of the rooted fork trees (endpoints plus
    /// junctions); the generator composes trees to hit it exactly.
    pub tree_nodes: usize,
    /// Free strokes per quadrant (ST, SN, IT, IN), each contributing
    /// one branch and two endpoints.
    pub quadrant_strokes: [usize; 4],
    /// Free strokes inside the macula annulus.
    pub macula_strokes: usize,
    /// Stroke width in pixels.
    pub width: f64,
    /// Tree segment length range.
    pub segment_len: (f64, f64),
    /// Free stroke length range.
    pub free_len: (f64, f64),
}

impl Default for VesselSpec {
    fn default() -> Self {
        VesselSpec {
            tree_nodes: 26,
            quadrant_strokes: [3, 3, 3, 3],
            macula_strokes: 2,
            width: 3.0,
            segment_len: (45.0, 95.0),
            free_len: (18.0, 34.0),
        }
    }
}

/// Full description of one synthetic eye.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthParams {
    pub side: usize,
    pub od_center: Point,
    pub od_radius: f64,
    pub fovea: Point,
    pub background_level: f64,
    pub od_level: f64,
    /// Added to the background inside the peripapillary ring.
    pub peripapillary_delta: f64,
    pub vessel: VesselSpec,
    /// Integer FAZ radius in pixels; the nearest vessel pixel is
    /// placed at exactly this distance plus one.
    pub faz_radius: f64,
    pub laterality: Laterality,
    pub seed: u64,
}

impl SynthParams {
    /// A right eye on a 512 px frame with mid-range anatomy.
    pub fn baseline(seed: u64) -> Self {
        SynthParams {
            side: 512,
            od_center: Point::new(351.0, 256.0),
            od_radius: 34.0,
            fovea: Point::new(161.0, 256.0),
            background_level: 0.45,
            od_level: 0.72,
            peripapillary_delta: -0.055,
            vessel: VesselSpec::default(),
            faz_radius: 26.0,
            laterality: Laterality::Right,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let err = |context: String| Err(CoreError::InfeasibleParams { context });
        let side = self.side as f64;
        let fov_r = side / 2.0 - 4.0;
        let center = Point::new((side - 1.0) / 2.0, (side - 1.0) / 2.0);
        let dist = |p: Point| ((p.x - center.x).powi(2) + (p.y - center.y).powi(2)).sqrt();
        if self.side < 128 {
            return err(format!("side {} too small", self.side));
        }
        if self.od_radius < 14.0 || self.od_radius > side / 6.0 {
            return err(format!("od radius {} out of range", self.od_radius));
        }
        if dist(self.od_center) + 1.45 * self.od_radius > fov_r - 2.0 {
            return err("optic disc ring leaves the field of view".into());
        }
        let d = ((self.od_center.x - self.fovea.x).powi(2)
            + (self.od_center.y - self.fovea.y).powi(2))
        .sqrt();
        if self.fovea.y != self.od_center.y {
            return err("fovea must sit on the optic-disc horizontal".into());
        }
        let temporal_ok = match self.laterality {
            Laterality::Right => self.fovea.x < self.od_center.x,
            Laterality::Left => self.fovea.x > self.od_center.x,
        };
        if !temporal_ok {
            return err("fovea must lie on the temporal side".into());
        }
        if d < 100.0 {
            return err(format!("disc-fovea distance {d:.0} too small"));
        }
        if self.faz_radius < 4.0 || self.faz_radius + 12.0 > 0.5 * d {
            return err(format!("faz radius {} out of range", self.faz_radius));
        }
        if d - self.od_radius - 3.0 <= self.faz_radius + STROKE_SEPARATION + 2.0 {
            return err("avascular zone touches the disc keep-out".into());
        }
        if dist(self.fovea) + self.faz_radius + 6.0 > fov_r {
            return err("avascular zone leaves the field of view".into());
        }
        if !(0.05..=0.95).contains(&self.background_level)
            || !(0.05..=0.95).contains(&self.od_level)
            || !(0.05..=0.95).contains(&(self.background_level + self.peripapillary_delta))
        {
            return err("gray levels must stay well inside [0, 1]".into());
        }
        Ok(())
    }
}

/// Analytic expectations for every measured field, with per-field
/// tolerance semantics in `check`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub expected: MeasurementVector,
    pub od_fovea_distance: f64,
}

impl GroundTruth {
    /// Compare a measurement against the ground truth. Returns one
    /// description per out-of-tolerance field: areas and coverages 3%
    /// relative (coverages floored at 0.002 absolute), brightness 0.01
    /// absolute, sharpness 5% relative, graph counts exact, total
    /// length 5% relative, FAZ one pixel normalized.
    pub fn check(&self, measured: &MeasurementVector) -> Vec<String> {
        let mut failures = Vec::new();
        let e = &self.expected;
        let mut rel = |name: &str, want: f64, got: f64, tol: f64, floor: f64| {
            let allowed = (want.abs() * tol).max(floor);
            if (got - want).abs() > allowed {
                failures.push(format!("{name}: expected {want:.6}, measured {got:.6}"));
            }
        };
        rel("od_area_norm", e.od_area_norm, measured.od_area_norm, 0.03, 0.0);
        rel("od_brightness", e.od_brightness, measured.od_brightness, 0.0, 0.01);
        rel(
            "od_edge_sharpness",
            e.od_edge_sharpness,
            measured.od_edge_sharpness,
            0.05,
            0.0,
        );
        rel(
            "peripapillary_brightness",
            e.peripapillary_brightness,
            measured.peripapillary_brightness,
            0.0,
            0.01,
        );
        for (name, want, got) in [
            ("vc_st", e.vc_st, measured.vc_st),
            ("vc_sn", e.vc_sn, measured.vc_sn),
            ("vc_it", e.vc_it, measured.vc_it),
            ("vc_in", e.vc_in, measured.vc_in),
            ("vc_entire", e.vc_entire, measured.vc_entire),
            ("vc_macula", e.vc_macula, measured.vc_macula),
        ] {
            rel(name, want, got, 0.03, 0.002);
        }
        rel(
            "graph_total_length",
            e.graph_total_length,
            measured.graph_total_length,
            0.05,
            0.0,
        );
        rel(
            "faz_radius_norm",
            e.faz_radius_norm,
            measured.faz_radius_norm,
            0.0,
            1.0 / self.od_fovea_distance,
        );
        if measured.graph_nodes != e.graph_nodes {
            failures.push(format!(
                "graph_nodes: expected {}, measured {}",
                e.graph_nodes, measured.graph_nodes
            ));
        }
        if measured.graph_branches != e.graph_branches {
            failures.push(format!(
                "graph_branches: expected {}, measured {}",
                e.graph_branches, measured.graph_branches
            ));
        }
        failures
    }
}

/// Chamfer length of a straight segment: unit cost per axial step,
/// sqrt(2) per diagonal step, matching the skeleton length metric.
fn chamfer(dx: f64, dy: f64) -> f64 {
    let (a, b) = (dx.abs().max(dy.abs()), dx.abs().min(dy.abs()));
    a + (std::f64::consts::SQRT_2 - 1.0) * b
}

fn sign(rng: &mut ChaCha12Rng) -> f64 {
    if rng.random_range(0..2) == 0 {
        1.0
    } else {
        -1.0
    }
}

struct Canvas {
    side: usize,
    vessel: BinaryMask,
    /// Dilated stamp of everything drawn, for separation tests.
    guard: Vec<bool>,
    fov_center: Point,
    fov_radius: f64,
    od_center: Point,
    od_keepout: f64,
    fovea: Point,
    faz_keepout: f64,
    width: f64,
}

impl Canvas {
    fn in_bounds(&self, p: Point) -> bool {
        let d = ((p.x - self.fov_center.x).powi(2) + (p.y - self.fov_center.y).powi(2)).sqrt();
        d <= self.fov_radius - 2.0 - self.width / 2.0
    }

    fn in_keepout(&self, p: Point) -> bool {
        let od = ((p.x - self.od_center.x).powi(2) + (p.y - self.od_center.y).powi(2)).sqrt();
        if od <= self.od_keepout {
            return true;
        }
        let faz = ((p.x - self.fovea.x).powi(2) + (p.y - self.fovea.y).powi(2)).sqrt();
        faz <= self.faz_keepout
    }

    fn guarded(&self, p: Point) -> bool {
        let (x, y) = (p.x.round() as i64, p.y.round() as i64);
        if x < 0 || y < 0 || x >= self.side as i64 || y >= self.side as i64 {
            return true;
        }
        self.guard[y as usize * self.side + x as usize]
    }

    fn guarded_in(&self, guard: &[bool], p: Point) -> bool {
        let (x, y) = (p.x.round() as i64, p.y.round() as i64);
        if x < 0 || y < 0 || x >= self.side as i64 || y >= self.side as i64 {
            return true;
        }
        guard[y as usize * self.side + x as usize]
    }

    /// How far a segment can run before violating separation, bounds
    /// or keep-outs. For the first `exempt` pixels the separation test
    /// runs against `foreign` (the guard as it stood before the current
    /// tree) so children may leave their own tree's stamp while still
    /// respecting everything drawn earlier.
    fn free_run(
        &self,
        from: Point,
        dir: (f64, f64),
        len: f64,
        exempt: f64,
        foreign: Option<&[bool]>,
    ) -> f64 {
        let mut t = 0.0;
        while t <= len {
            let p = Point::new(from.x + dir.0 * t, from.y + dir.1 * t);
            if !self.in_bounds(p) || self.in_keepout(p) {
                return t;
            }
            let blocked = if t >= exempt {
                self.guarded(p)
            } else {
                foreign.is_some_and(|g| self.guarded_in(g, p))
            };
            if blocked {
                return t;
            }
            t += 0.5;
        }
        len
    }

    /// Stamp a stroke of the canvas width along the centerline. A
    /// small extension past each free end compensates the cap erosion
    /// of thinning, keeping skeleton length close to the centerline's.
    fn stamp(&mut self, from: Point, dir: (f64, f64), len: f64, extend_start: bool, extend_end: bool) {
        let r = self.width / 2.0;
        let cap = END_CAP_EXTENSION;
        let t0 = if extend_start { -cap } else { 0.0 };
        let t1 = if extend_end { len + cap } else { len };
        let mut t = t0;
        while t <= t1 {
            let cx = from.x + dir.0 * t;
            let cy = from.y + dir.1 * t;
            self.stamp_disk(cx, cy, Some(r), r + STROKE_SEPARATION);
            t += 0.35;
        }
    }

    /// Stamp a guard disk of radius `guard_r`, painting vessel pixels
    /// within `paint_r` when given.
    fn stamp_disk(&mut self, cx: f64, cy: f64, paint_r: Option<f64>, guard_r: f64) {
        let x0 = ((cx - guard_r).floor().max(0.0)) as usize;
        let y0 = ((cy - guard_r).floor().max(0.0)) as usize;
        let x1 = ((cx + guard_r).ceil().min(self.side as f64 - 1.0)).max(0.0) as usize;
        let y1 = ((cy + guard_r).ceil().min(self.side as f64 - 1.0)).max(0.0) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                if let Some(r) = paint_r {
                    if d2 <= r * r {
                        self.vessel.set(x, y, true);
                    }
                }
                if d2 <= guard_r * guard_r {
                    self.guard[y * self.side + x] = true;
                }
            }
        }
    }
}

/// Tally of what was actually drawn.
#[derive(Debug, Default, Clone, Copy)]
struct DrawnStats {
    nodes: usize,
    branches: usize,
    length: f64,
}

/// Build one synthetic eye and its ground truth. Deterministic in the
/// seed. Fails with `InfeasibleParams` when the geometry cannot hold
/// the requested content.
pub fn generate_bundle(params: &SynthParams) -> Result<(SegmentationBundle, GroundTruth)> {
    generate_bundle_with(params, true)
}

/// As `generate_bundle`; with `render_image` unset the bundle's RGB
/// image is left empty (0x0), which large in-memory simulations use to
/// skip the triple-channel fill.
pub fn generate_bundle_with(
    params: &SynthParams,
    render_image: bool,
) -> Result<(SegmentationBundle, GroundTruth)> {
    params.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    let side = params.side;
    let dims = (side, side);
    let fov_center = Point::new((side as f64 - 1.0) / 2.0, (side as f64 - 1.0) / 2.0);
    let fov_radius = side as f64 / 2.0 - 4.0;

    let od_mask = disk_mask(params.od_center, params.od_radius, dims);
    let od_area = od_mask.count();
    let r_eq = equivalent_radius(od_area);
    let ring_outer = disk_mask(params.od_center, 1.4 * r_eq, dims);
    let fov_mask = disk_mask(fov_center, fov_radius, dims);

    // Gray rendering: dark sensor border, uniform retina, bright disc,
    // offset ring. Vessels are mask-only and do not alter the gray
    // channel, which keeps the brightness expectations exact.
    let peri_level = params.background_level + params.peripapillary_delta;
    let mut gray = GrayRaster::new(side, side, 0.02);
    for (x, y) in fov_mask.iter_on() {
        gray.set(x, y, params.background_level);
    }
    for (x, y) in ring_outer.iter_on() {
        if !od_mask.get(x, y) {
            gray.set(x, y, peri_level);
        }
    }
    for (x, y) in od_mask.iter_on() {
        gray.set(x, y, params.od_level);
    }

    let d = (params.od_center.x - params.fovea.x).abs();

    let mut canvas = Canvas {
        side,
        vessel: BinaryMask::new(side, side),
        guard: vec![false; side * side],
        fov_center,
        fov_radius,
        od_center: params.od_center,
        od_keepout: params.od_radius + 3.0,
        fovea: params.fovea,
        faz_keepout: params.faz_radius + STROKE_SEPARATION,
        width: params.vessel.width,
    };

    let mut drawn = DrawnStats::default();
    draw_faz_tangent(&mut canvas, params, &mut drawn);
    draw_trees(&mut canvas, params, &mut rng, &mut drawn)?;
    draw_free_strokes(&mut canvas, params, d, &mut rng, &mut drawn)?;

    let vessel_mask = canvas.vessel;

    // Independent expectation bookkeeping (coverage fractions by direct
    // pixel counting against the generator's own geometry).
    let coverage = count_coverage(
        &vessel_mask,
        &fov_mask,
        params.od_center,
        params.fovea,
        params.laterality,
        d,
    );

    let mean_gray = gray.mean();
    let expected = MeasurementVector {
        od_area_norm: std::f64::consts::PI * params.od_radius * params.od_radius / (d * d),
        od_brightness: params.od_level - mean_gray + 0.5,
        od_edge_sharpness: EDGE_SHARPNESS_PER_STEP * (params.od_level - peri_level),
        peripapillary_brightness: peri_level - mean_gray + 0.5,
        vc_st: coverage[0],
        vc_sn: coverage[1],
        vc_it: coverage[2],
        vc_in: coverage[3],
        vc_entire: coverage[4],
        vc_macula: coverage[5],
        graph_nodes: drawn.nodes,
        graph_branches: drawn.branches,
        graph_total_length: drawn.length,
        faz_radius_norm: params.faz_radius / d,
    };

    let gray_normalized = normalize_brightness(&gray);
    let image = if render_image {
        RgbRaster::from_pixels(
            side,
            side,
            gray.pixels().iter().map(|&v| [v, v, v]).collect(),
        )
    } else {
        RgbRaster::new(0, 0)
    };

    let bundle = SegmentationBundle {
        image,
        gray_normalized,
        od_mask,
        vessel_mask,
        fov_mask,
        fovea: params.fovea,
        laterality: params.laterality,
        subject_id: String::new(),
        image_id: String::new(),
        sex: Sex::Male,
        age: 0.0,
    };
    Ok((
        bundle,
        GroundTruth {
            expected,
            od_fovea_distance: d,
        },
    ))
}

/// Two-pixel-wide column whose nearest pixel to the fovea sits at
/// exactly `faz_radius + 1`, pinning the measured FAZ radius.
fn draw_faz_tangent(canvas: &mut Canvas, params: &SynthParams, drawn: &mut DrawnStats) {
    let outward: f64 = match params.laterality {
        Laterality::Right => -1.0,
        Laterality::Left => 1.0,
    };
    let x0 = (params.fovea.x + outward * (params.faz_radius + 1.0)) as i64;
    let x1 = x0 + outward as i64;
    let yc = params.fovea.y as i64;
    for y in (yc - FAZ_TANGENT_HALF)..=(yc + FAZ_TANGENT_HALF) {
        for x in [x0, x1] {
            if x >= 0 && y >= 0 && (x as usize) < canvas.side && (y as usize) < canvas.side {
                canvas.vessel.set(x as usize, y as usize, true);
            }
        }
    }
    // Guard a halo so nothing else comes nearer to the fovea.
    let mid = Point::new(x0 as f64, yc as f64);
    for dy in -(FAZ_TANGENT_HALF + 4)..=(FAZ_TANGENT_HALF + 4) {
        canvas.stamp_disk(mid.x, mid.y + dy as f64, None, STROKE_SEPARATION + 1.0);
    }
    drawn.nodes += 2;
    drawn.branches += 1;
    drawn.length += 2.0 * FAZ_TANGENT_HALF as f64;
}

/// Rooted fork trees totalling exactly `tree_nodes` nodes. Trees are
/// composed of single strokes (2 nodes), one-fork trees (4 nodes) and
/// one triple fork when an odd remainder calls for it (5 nodes).
fn draw_trees(
    canvas: &mut Canvas,
    params: &SynthParams,
    rng: &mut ChaCha12Rng,
    drawn: &mut DrawnStats,
) -> Result<()> {
    let mut remaining = params.vessel.tree_nodes as i64;
    let mut shapes: Vec<usize> = Vec::new(); // children per fork; 0 = single stroke
    if remaining % 2 == 1 {
        shapes.push(3);
        remaining -= 5;
    }
    while remaining >= 4 {
        if rng.random_range(0..2) == 0 {
            shapes.push(2);
            remaining -= 4;
        } else {
            shapes.push(0);
            remaining -= 2;
        }
    }
    while remaining >= 2 {
        shapes.push(0);
        remaining -= 2;
    }
    if remaining != 0 {
        return Err(CoreError::InfeasibleParams {
            context: format!("cannot compose {} tree nodes", params.vessel.tree_nodes),
        });
    }

    for &forks in &shapes {
        let mut placed = false;
        for _attempt in 0..60 {
            let root_angle = rng.random_range(0.0..std::f64::consts::TAU);
            let root_dist = canvas.od_keepout + 3.0 + rng.random_range(0.0..6.0);
            let root = Point::new(
                params.od_center.x + root_angle.cos() * root_dist,
                params.od_center.y + root_angle.sin() * root_dist,
            );
            if !canvas.in_bounds(root) || canvas.in_keepout(root) || canvas.guarded(root) {
                continue;
            }
            let heading = root_angle + rng.random_range(-0.45..0.45);
            if try_draw_tree(canvas, params, rng, root, heading, forks, drawn) {
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(CoreError::InfeasibleParams {
                context: "could not place a vessel tree without collisions".into(),
            });
        }
    }
    Ok(())
}

/// Draw one tree: a trunk and `forks` children off its end (0 children
/// = a plain stroke, drawn with a mid-point bend for variety). Fully
/// transactional: on any failed segment nothing is committed.
fn try_draw_tree(
    canvas: &mut Canvas,
    params: &SynthParams,
    rng: &mut ChaCha12Rng,
    root: Point,
    heading: f64,
    forks: usize,
    drawn: &mut DrawnStats,
) -> bool {
    let saved_vessel = canvas.vessel.clone();
    let saved_guard = canvas.guard.clone();
    let saved_drawn = *drawn;

    let ok = (|| {
        let foreign = saved_guard.as_slice();
        let (min_l, max_l) = params.vessel.segment_len;
        let trunk_len = rng.random_range(min_l..max_l);
        if forks == 0 {
            // Bent single stroke: two joined segments, one branch.
            let l1 = trunk_len * rng.random_range(0.4..0.6);
            let bend = rng.random_range(0.35..0.7) * sign(rng);
            let Some(mid) =
                draw_segment(canvas, root, heading, l1, 0.0, None, true, false)
            else {
                return false;
            };
            if draw_segment(
                canvas,
                mid,
                heading + bend,
                trunk_len - l1,
                JUNCTION_EXEMPT,
                Some(foreign),
                false,
                true,
            )
            .is_none()
            {
                return false;
            }
            drawn.nodes += 2;
            drawn.branches += 1;
            drawn.length += chamfer_of(heading, l1) + chamfer_of(heading + bend, trunk_len - l1);
            return true;
        }
        let Some(fork_at) =
            draw_segment(canvas, root, heading, trunk_len, 0.0, None, true, false)
        else {
            return false;
        };
        // Fill the junction center so the meeting strokes cannot trap
        // a pinhole that would thin into a stray cycle.
        let pad = params.vessel.width / 2.0 + 0.8;
        canvas.stamp_disk(fork_at.x, fork_at.y, Some(pad), pad + STROKE_SEPARATION);
        // Children leave the fork at exact offsets that thin into a
        // single clean junction cluster: a Y for two children, a plus
        // for three (pairwise separations of at least 90 degrees).
        let q = std::f64::consts::FRAC_PI_4;
        let offsets: Vec<f64> = if forks == 2 {
            vec![-q, q]
        } else {
            vec![-2.0 * q, 0.0, 2.0 * q]
        };
        let mut total = chamfer_of(heading, trunk_len);
        let mut arms = 0;
        for &offset in &offsets {
            let arm_len = rng.random_range(min_l..max_l) * 0.8;
            if draw_segment(
                canvas,
                fork_at,
                heading + offset,
                arm_len,
                JUNCTION_EXEMPT,
                Some(foreign),
                false,
                true,
            )
            .is_none()
            {
                return false;
            }
            total += chamfer_of(heading + offset, arm_len);
            arms += 1;
        }
        // nodes: root endpoint + fork junction + one endpoint per arm.
        drawn.nodes += 2 + arms;
        drawn.branches += 1 + arms;
        drawn.length += total;
        true
    })();

    if !ok {
        canvas.vessel = saved_vessel;
        canvas.guard = saved_guard;
        *drawn = saved_drawn;
    }
    ok
}

fn chamfer_of(angle: f64, len: f64) -> f64 {
    chamfer(angle.cos() * len, angle.sin() * len)
}

/// Draw one straight stroke if its full length is clear; returns the
/// far endpoint.
#[allow(clippy::too_many_arguments)]
fn draw_segment(
    canvas: &mut Canvas,
    from: Point,
    angle: f64,
    len: f64,
    exempt: f64,
    foreign: Option<&[bool]>,
    extend_start: bool,
    extend_end: bool,
) -> Option<Point> {
    if len < MIN_SEGMENT {
        return None;
    }
    let dir = (angle.cos(), angle.sin());
    if canvas.free_run(from, dir, len, exempt, foreign) < len {
        return None;
    }
    canvas.stamp(from, dir, len, extend_start, extend_end);
    Some(Point::new(from.x + dir.0 * len, from.y + dir.1 * len))
}

/// Short free strokes per region: the coverage knobs. A stroke that
/// cannot be placed after many tries is silently skipped (the tally
/// records only what was drawn).
fn draw_free_strokes(
    canvas: &mut Canvas,
    params: &SynthParams,
    d: f64,
    rng: &mut ChaCha12Rng,
    drawn: &mut DrawnStats,
) -> Result<()> {
    let (min_l, max_l) = params.vessel.free_len;
    let place = |canvas: &mut Canvas,
                     rng: &mut ChaCha12Rng,
                     drawn: &mut DrawnStats,
                     accept: &dyn Fn(Point) -> bool|
     -> bool {
        for _ in 0..80 {
            let x = rng.random_range(0.0..canvas.side as f64);
            let y = rng.random_range(0.0..canvas.side as f64);
            let p = Point::new(x, y);
            if !accept(p) || !canvas.in_bounds(p) || canvas.in_keepout(p) || canvas.guarded(p) {
                continue;
            }
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let len = rng.random_range(min_l..max_l);
            if draw_segment(canvas, p, angle, len, 0.0, None, true, true).is_some() {
                drawn.nodes += 2;
                drawn.branches += 1;
                drawn.length += chamfer_of(angle, len);
                return true;
            }
        }
        false
    };

    let od = params.od_center;
    let laterality = params.laterality;
    for (qi, &count) in params.vessel.quadrant_strokes.iter().enumerate() {
        for _ in 0..count {
            let accept = move |p: Point| quadrant_index(p, od, laterality) == Some(qi);
            place(canvas, rng, drawn, &accept);
        }
    }
    let fovea = params.fovea;
    let inner = params.faz_radius + STROKE_SEPARATION + 4.0;
    let outer = 0.45 * d;
    for _ in 0..params.vessel.macula_strokes {
        let accept = move |p: Point| {
            let dist = ((p.x - fovea.x).powi(2) + (p.y - fovea.y).powi(2)).sqrt();
            dist > inner && dist < outer
        };
        place(canvas, rng, drawn, &accept);
    }
    Ok(())
}

/// Quadrant of a point: 0 ST, 1 SN, 2 IT, 3 IN. Written from the
/// half-plane definitions independently of the measurement code.
fn quadrant_index(p: Point, origin: Point, laterality: Laterality) -> Option<usize> {
    if p.x == origin.x || p.y == origin.y {
        return None;
    }
    let superior = p.y < origin.y;
    let temporal = match laterality {
        Laterality::Right => p.x < origin.x,
        Laterality::Left => p.x > origin.x,
    };
    Some(match (superior, temporal) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    })
}

/// Coverage fractions [ST, SN, IT, IN, entire, macula] by direct
/// counting over the rendered masks.
fn count_coverage(
    vessel: &BinaryMask,
    fov: &BinaryMask,
    od_center: Point,
    fovea: Point,
    laterality: Laterality,
    d: f64,
) -> [f64; 6] {
    let mut quad_fov = [0u64; 4];
    let mut quad_vessel = [0u64; 4];
    let (mut fov_n, mut fov_v) = (0u64, 0u64);
    let (mut mac_n, mut mac_v) = (0u64, 0u64);
    let r2 = (0.5 * d) * (0.5 * d);
    for y in 0..fov.height() {
        for x in 0..fov.width() {
            let p = Point::new(x as f64, y as f64);
            let v = vessel.get(x, y);
            if fov.get(x, y) {
                fov_n += 1;
                if v {
                    fov_v += 1;
                }
                if let Some(q) = quadrant_index(p, od_center, laterality) {
                    quad_fov[q] += 1;
                    if v {
                        quad_vessel[q] += 1;
                    }
                }
            }
            let dx = p.x - fovea.x;
            let dy = p.y - fovea.y;
            if dx * dx + dy * dy <= r2 {
                mac_n += 1;
                if v {
                    mac_v += 1;
                }
            }
        }
    }
    let f = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    [
        f(quad_vessel[0], quad_fov[0]),
        f(quad_vessel[1], quad_fov[1]),
        f(quad_vessel[2], quad_fov[2]),
        f(quad_vessel[3], quad_fov[3]),
        f(fov_v, fov_n),
        f(mac_v, mac_n),
    ]
}

/// Which parameters a cohort can shift with faithful standardized
/// effects (exact generator knobs).
pub const EXACT_EFFECT_KNOBS: [&str; 4] = [
    "od_area_norm",
    "peripapillary_brightness",
    "graph_nodes",
    "faz_radius_norm",
];

/// Per-parameter standardized mean shifts applied to the male group.
pub type EffectSpec = BTreeMap<String, f64>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_per_group: usize,
    pub side: usize,
    pub seed: u64,
    pub effects: EffectSpec,
}

impl CohortSpec {
    pub fn null(n_per_group: usize, seed: u64) -> Self {
        CohortSpec {
            n_per_group,
            side: 512,
            seed,
            effects: EffectSpec::new(),
        }
    }

    pub fn with_effect(mut self, parameter: &str, d: f64) -> Self {
        self.effects.insert(parameter.to_string(), d);
        self
    }
}

/// Recorded truth of a generated cohort.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortTruth {
    pub n_per_group: usize,
    pub seed: u64,
    pub side: usize,
    /// Injected standardized effect (male minus female) per parameter.
    pub injected: EffectSpec,
}

/// Streaming generator of cohort members: index 0..n are male eyes,
/// n..2n female. Per-image parameters are sampled on independent RNG
/// streams, so members can be produced in any order or in parallel.
pub struct CohortGenerator {
    spec: CohortSpec,
}

/// Base sampling distributions for the per-image anatomy.
struct Knobs;

impl Knobs {
    const OD_AREA: (f64, f64) = (0.110, 0.012);
    const OD_LEVEL: (f64, f64) = (0.72, 0.045);
    const PERI_DELTA: (f64, f64) = (-0.055, 0.012);
    const TREE_NODES: (f64, f64) = (26.0, 5.0);
    const QUAD_STROKES: (f64, f64) = (3.0, 1.2);
    const MACULA_STROKES: (f64, f64) = (2.0, 0.8);
    const FAZ_RADIUS: (f64, f64) = (26.0, 4.0);
    const DISTANCE: (f64, f64) = (190.0, 6.0);
    const SEGMENT_MID: (f64, f64) = (70.0, 9.0);
}

impl CohortGenerator {
    pub fn new(spec: CohortSpec) -> Result<Self> {
        for name in spec.effects.keys() {
            if !crate::biometrics::PARAMETER_NAMES.contains(&name.as_str()) {
                return Err(CoreError::InfeasibleParams {
                    context: format!("unknown effect parameter {name}"),
                });
            }
            if name == "od_edge_sharpness" {
                return Err(CoreError::InfeasibleParams {
                    context: "od_edge_sharpness has no independent generator knob".into(),
                });
            }
        }
        Ok(CohortGenerator { spec })
    }

    pub fn truth(&self) -> CohortTruth {
        CohortTruth {
            n_per_group: self.spec.n_per_group,
            seed: self.spec.seed,
            side: self.spec.side,
            injected: self.spec.effects.clone(),
        }
    }

    pub fn len(&self) -> usize {
        2 * self.spec.n_per_group
    }

    pub fn is_empty(&self) -> bool {
        self.spec.n_per_group == 0
    }

    fn effect(&self, name: &str, male: bool) -> f64 {
        if male {
            self.spec.effects.get(name).copied().unwrap_or(0.0)
        } else {
            0.0
        }
    }

    /// Synthesis parameters for cohort member `index`.
    pub fn params(&self, index: usize) -> (SynthParams, Sex, f64) {
        let n = self.spec.n_per_group;
        assert!(index < 2 * n, "index {index} out of cohort range");
        let male = index < n;
        let sex = if male { Sex::Male } else { Sex::Female };
        let mut rng = ChaCha12Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(index as u64 + 1);

        let mut draw = |mean: f64, sd: f64| -> f64 {
            Normal::new(mean, sd).expect("valid normal").sample(&mut rng)
        };
        let eff = |name: &str| self.effect(name, male);

        let side = self.spec.side;
        let distance = draw(Knobs::DISTANCE.0, Knobs::DISTANCE.1).round().clamp(
            150.0,
            side as f64 * 0.45,
        );
        let area = draw(
            Knobs::OD_AREA.0 + eff("od_area_norm") * Knobs::OD_AREA.1,
            Knobs::OD_AREA.1,
        )
        .clamp(0.06, 0.18);
        let od_radius = (distance * (area / std::f64::consts::PI).sqrt()).clamp(16.0, 48.0);
        let od_level = draw(
            Knobs::OD_LEVEL.0 + eff("od_brightness") * Knobs::OD_LEVEL.1,
            Knobs::OD_LEVEL.1,
        )
        .clamp(0.58, 0.86);
        let peri_delta = draw(
            Knobs::PERI_DELTA.0 + eff("peripapillary_brightness") * Knobs::PERI_DELTA.1,
            Knobs::PERI_DELTA.1,
        )
        .clamp(-0.10, -0.012);

        let nodes_shift =
            eff("graph_nodes").max(eff("graph_branches")) * Knobs::TREE_NODES.1;
        let tree_nodes = draw(Knobs::TREE_NODES.0 + nodes_shift, Knobs::TREE_NODES.1)
            .round()
            .clamp(8.0, 56.0) as usize;

        let quad_effects = [
            eff("vc_superior_temporal"),
            eff("vc_superior_nasal"),
            eff("vc_inferior_temporal"),
            eff("vc_inferior_nasal"),
        ];
        let entire = eff("vc_entire");
        let mut quadrant_strokes = [0usize; 4];
        for (q, slot) in quadrant_strokes.iter_mut().enumerate() {
            let shift = (quad_effects[q] + entire) * Knobs::QUAD_STROKES.1;
            *slot = draw(Knobs::QUAD_STROKES.0 + shift, Knobs::QUAD_STROKES.1)
                .round()
                .clamp(0.0, 9.0) as usize;
        }
        let macula_strokes = draw(
            Knobs::MACULA_STROKES.0 + eff("vc_macula") * Knobs::MACULA_STROKES.1,
            Knobs::MACULA_STROKES.1,
        )
        .round()
        .clamp(0.0, 6.0) as usize;

        let faz_radius = draw(
            Knobs::FAZ_RADIUS.0 + eff("faz_radius_norm") * Knobs::FAZ_RADIUS.1,
            Knobs::FAZ_RADIUS.1,
        )
        .round()
        .clamp(14.0, 42.0);

        let seg_mid = draw(
            Knobs::SEGMENT_MID.0 + eff("graph_total_length") * Knobs::SEGMENT_MID.1,
            Knobs::SEGMENT_MID.1,
        )
        .clamp(40.0, 100.0);

        let laterality = if index % 2 == 0 {
            Laterality::Right
        } else {
            Laterality::Left
        };
        let age = draw(43.0, 11.5).clamp(18.0, 80.0);

        let center = (side as f64 - 1.0) / 2.0;
        let half = (distance / 2.0).round();
        let (fovea_x, od_x) = match laterality {
            Laterality::Right => (center.floor() - half, center.floor() - half + distance),
            Laterality::Left => (center.ceil() + half, center.ceil() + half - distance),
        };
        let y = center.floor();

        let params = SynthParams {
            side,
            od_center: Point::new(od_x, y),
            od_radius,
            fovea: Point::new(fovea_x, y),
            background_level: 0.45,
            od_level,
            peripapillary_delta: peri_delta,
            vessel: VesselSpec {
                tree_nodes,
                quadrant_strokes,
                macula_strokes,
                width: 3.0,
                segment_len: (seg_mid - 22.0, seg_mid + 22.0),
                free_len: (18.0, 34.0),
            },
            faz_radius,
            laterality,
            seed: self.spec.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1)),
        };
        (params, sex, age)
    }

    /// Generate cohort member `index`.
    pub fn bundle(
        &self,
        index: usize,
        render_image: bool,
    ) -> Result<(SegmentationBundle, GroundTruth)> {
        let (params, sex, age) = self.params(index);
        let (mut bundle, truth) = generate_bundle_with(&params, render_image)?;
        bundle.sex = sex;
        bundle.age = (age * 10.0).round() / 10.0;
        bundle.image_id = format!("synth_{:05}", index);
        bundle.subject_id = format!("subj_{:05}", index);
        Ok((bundle, truth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biometrics::{measure_all, MeasureConfig};

    #[test]
    fn baseline_bundle_matches_ground_truth() {
        let (bundle, truth) = generate_bundle(&SynthParams::baseline(11)).unwrap();
        bundle.validate().unwrap();
        let outcome = measure_all(&bundle, &MeasureConfig::default()).unwrap();
        let failures = truth.check(&outcome.vector);
        assert!(failures.is_empty(), "mismatches: {failures:?}");
        assert_eq!(outcome.align_angle, 0.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let (a, _) = generate_bundle(&SynthParams::baseline(5)).unwrap();
        let (b, _) = generate_bundle(&SynthParams::baseline(5)).unwrap();
        assert_eq!(a.vessel_mask, b.vessel_mask);
        assert_eq!(a.gray_normalized, b.gray_normalized);
    }

    #[test]
    fn ground_truth_formulas() {
        let mut p = SynthParams::baseline(3);
        p.od_radius = 30.0;
        p.faz_radius = 25.0;
        let (_, truth) = generate_bundle(&p).unwrap();
        let d = truth.od_fovea_distance;
        assert_eq!(d, 190.0);
        let want_area = std::f64::consts::PI * 900.0 / (d * d);
        assert!((truth.expected.od_area_norm - want_area).abs() < 1e-12);
        assert!((truth.expected.faz_radius_norm - 25.0 / d).abs() < 1e-12);
    }

    #[test]
    fn left_eye_feasible_and_checked() {
        let mut p = SynthParams::baseline(21);
        p.laterality = Laterality::Left;
        p.od_center = Point::new(161.0, 256.0);
        p.fovea = Point::new(351.0, 256.0);
        let (bundle, truth) = generate_bundle(&p).unwrap();
        let outcome = measure_all(&bundle, &MeasureConfig::default()).unwrap();
        let failures = truth.check(&outcome.vector);
        assert!(failures.is_empty(), "mismatches: {failures:?}");
    }

    #[test]
    fn infeasible_parameters_are_rejected() {
        let mut p = SynthParams::baseline(1);
        p.faz_radius = 100.0; // would overlap the disc keep-out
        assert!(matches!(
            generate_bundle(&p),
            Err(CoreError::InfeasibleParams { .. })
        ));

        let mut p = SynthParams::baseline(1);
        p.fovea = Point::new(161.0, 250.0); // off the horizontal
        assert!(generate_bundle(&p).is_err());
    }

    #[test]
    fn cohort_members_are_deterministic_and_labeled() {
        let gen = CohortGenerator::new(CohortSpec::null(4, 99)).unwrap();
        assert_eq!(gen.len(), 8);
        let (a, _) = gen.bundle(2, false).unwrap();
        let (b, _) = gen.bundle(2, false).unwrap();
        assert_eq!(a.vessel_mask, b.vessel_mask);
        assert_eq!(a.sex, Sex::Male);
        let (f, _) = gen.bundle(6, false).unwrap();
        assert_eq!(f.sex, Sex::Female);
    }

    #[test]
    fn cohort_rejects_unknown_or_unsupported_effects() {
        let bad = CohortSpec::null(2, 1).with_effect("not_a_parameter", 1.0);
        assert!(CohortGenerator::new(bad).is_err());
        let sharp = CohortSpec::null(2, 1).with_effect("od_edge_sharpness", 0.5);
        assert!(CohortGenerator::new(sharp).is_err());
    }

    #[test]
    fn small_cohort_all_members_pass_ground_truth() {
        let gen = CohortGenerator::new(CohortSpec::null(5, 424)).unwrap();
        for i in 0..gen.len() {
            let (bundle, truth) = gen.bundle(i, false).unwrap();
            let outcome = measure_all(&bundle, &MeasureConfig::default()).unwrap();
            let failures = truth.check(&outcome.vector);
            assert!(failures.is_empty(), "member {i}: {failures:?}");
        }
    }
}
