//! From raw RGB-D frames to weighted correspondences.
//!
//! Covers HSV segmentation, pixel back-projection, the endcap depth-window
//! filter, model visibility, nearest-neighbor matching under a shrinking
//! distance gate, dummy-point augmentation and RANSAC ground detection.

use std::collections::{BTreeMap, HashMap};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{correspondence_weight, Correspondence, RigidPose, Rotation, Vec3};
use crate::robot_model::{EndcapModel, HsvRange};

/// Cable length measurements `L_t`, keyed by the cable's endcap pair as
/// listed in the topology.
pub type CableMeasurements = BTreeMap<(usize, usize), f64>;

/// Pinhole intrinsics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    /// 1280×720 with a 600 px focal length.
    pub fn hd720() -> Self {
        Self {
            fx: 600.0,
            fy: 600.0,
            cx: 640.0,
            cy: 360.0,
            width: 1280,
            height: 720,
        }
    }

    /// Same field of view at `1/factor` resolution.
    pub fn downscaled(&self, factor: usize) -> Self {
        let f = factor as f64;
        Self {
            fx: self.fx / f,
            fy: self.fy / f,
            cx: self.cx / f,
            cy: self.cy / f,
            width: self.width / factor,
            height: self.height / factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid intrinsics {self:?}"
            )))
        }
    }

    /// Project a camera-frame point to continuous pixel coordinates.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        (p.z > 0.0).then(|| (self.cx + self.fx * p.x / p.z, self.cy + self.fy * p.y / p.z))
    }

    /// Conservative pixel box covering the projection of an axis-aligned
    /// box; `None` when the box reaches behind the image plane.
    pub fn project_box(&self, lo: &Vec3, hi: &Vec3) -> Option<PixelBox> {
        if lo.z <= 1e-6 {
            return None;
        }
        let mut u = (f64::INFINITY, f64::NEG_INFINITY);
        let mut v = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in &[lo.x, hi.x] {
            for &z in &[lo.z, hi.z] {
                let pu = self.cx + self.fx * x / z;
                u = (u.0.min(pu), u.1.max(pu));
            }
        }
        for &y in &[lo.y, hi.y] {
            for &z in &[lo.z, hi.z] {
                let pv = self.cy + self.fy * y / z;
                v = (v.0.min(pv), v.1.max(pv));
            }
        }
        PixelBox::clamped(u.0.floor(), v.0.floor(), u.1.ceil(), v.1.ceil(), self)
    }
}

/// Inclusive pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub u_min: usize,
    pub v_min: usize,
    pub u_max: usize,
    pub v_max: usize,
}

impl PixelBox {
    fn clamped(u0: f64, v0: f64, u1: f64, v1: f64, intr: &CameraIntrinsics) -> Option<Self> {
        let w = intr.width as f64 - 1.0;
        let h = intr.height as f64 - 1.0;
        if u1 < 0.0 || v1 < 0.0 || u0 > w || v0 > h {
            return Some(Self::empty());
        }
        Some(Self {
            u_min: u0.clamp(0.0, w) as usize,
            v_min: v0.clamp(0.0, h) as usize,
            u_max: u1.clamp(0.0, w) as usize,
            v_max: v1.clamp(0.0, h) as usize,
        })
    }

    /// A box that contains no pixel.
    pub fn empty() -> Self {
        Self {
            u_min: 1,
            v_min: 1,
            u_max: 0,
            v_max: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.u_min > self.u_max || self.v_min > self.v_max
    }

    #[inline]
    pub fn contains(&self, u: usize, v: usize) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }

    pub fn full(intr: &CameraIntrinsics) -> Self {
        Self {
            u_min: 0,
            v_min: 0,
            u_max: intr.width - 1,
            v_max: intr.height - 1,
        }
    }
}

/// Region of interest for one endcap in the first frame.
pub type Roi = PixelBox;

/// Organized RGB-D frame plus the synchronized cable measurements.
///
/// Depth is stored as `f32` meters (0 = invalid) and color as the HSV byte
/// triple, exactly as on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedFrame {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f32>,
    pub hsv: Vec<[u8; 3]>,
    pub cables: CableMeasurements,
    pub timestamp: f64,
}

impl ObservedFrame {
    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![0.0; width * height],
            hsv: vec![[0; 3]; width * height],
            cables: CableMeasurements::new(),
            timestamp: 0.0,
        }
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    pub fn validate(&self, intrinsics: &CameraIntrinsics, cables: &[(usize, usize)]) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.width != intrinsics.width || self.height != intrinsics.height {
            return bad(format!(
                "frame is {}x{}, intrinsics say {}x{}",
                self.width, self.height, intrinsics.width, intrinsics.height
            ));
        }
        let n = self.width * self.height;
        if self.depth.len() != n || self.hsv.len() != n {
            return bad("frame buffers do not match its dimensions".into());
        }
        if let Some(d) = self.depth.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return bad(format!("invalid depth value {d}"));
        }
        for edge in cables {
            match self.cables.get(edge) {
                Some(l) if *l > 0.0 && l.is_finite() => {}
                _ => {
                    return bad(format!(
                        "missing or non-positive cable measurement {edge:?}"
                    ))
                }
            }
        }
        Ok(())
    }
}

/// Camera → ground transform: world `z = 0` is the detected plane and `+z`
/// points toward the camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub rotation: Rotation,
    pub translation: Vec3,
    pub inliers: usize,
}

impl GroundPlane {
    /// Plane normal in the camera frame.
    pub fn normal(&self) -> Vec3 {
        self.rotation.inverse() * Vec3::z()
    }

    /// Signed height of a camera-frame point above the plane.
    #[inline]
    pub fn height(&self, p: &Vec3) -> f64 {
        (self.rotation * p + self.translation).z
    }

    pub fn as_pose(&self) -> RigidPose {
        RigidPose::new(self.rotation, self.translation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub iterations: usize,
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_threshold: 0.01,
            seed: 0,
        }
    }
}

/// Geometric decay of the correspondence distance gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DmaxSchedule {
    pub initial: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for DmaxSchedule {
    fn default() -> Self {
        Self {
            initial: 0.10,
            decay: 0.7,
            floor: 0.01,
        }
    }
}

/// `max(floor, initial · decay^iteration)`.
pub fn dmax_schedule(iteration: usize, schedule: &DmaxSchedule) -> f64 {
    let raw = schedule.initial * schedule.decay.powi(iteration.min(i32::MAX as usize) as i32);
    raw.max(schedule.floor)
}

/// Back-project pixel `(u, v)`; `None` for invalid depth.
pub fn project_to_3d(
    frame: &ObservedFrame,
    intrinsics: &CameraIntrinsics,
    u: usize,
    v: usize,
) -> Result<Option<Vec3>> {
    if u >= frame.width || v >= frame.height {
        return Err(Error::InvalidArgument(format!(
            "pixel ({u}, {v}) outside {}x{} frame",
            frame.width, frame.height
        )));
    }
    Ok(unproject(intrinsics, u, v, frame.depth[frame.index(u, v)]))
}

#[inline]
pub(crate) fn unproject(intr: &CameraIntrinsics, u: usize, v: usize, depth: f32) -> Option<Vec3> {
    if depth <= 0.0 {
        return None;
    }
    let d = depth as f64;
    Some(Vec3::new(
        (u as f64 - intr.cx) * d / intr.fx,
        (v as f64 - intr.cy) * d / intr.fy,
        d,
    ))
}

/// Pixels `(u, v)` whose color falls inside `range`, optionally restricted
/// to a region of interest. Row-major order.
pub fn segment_endcap_pixels(
    frame: &ObservedFrame,
    range: &HsvRange,
    roi: Option<&Roi>,
) -> Vec<(usize, usize)> {
    let full = PixelBox {
        u_min: 0,
        v_min: 0,
        u_max: frame.width.saturating_sub(1),
        v_max: frame.height.saturating_sub(1),
    };
    let area = roi.copied().unwrap_or(full);
    if area.is_empty() || frame.width == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for v in area.v_min..=area.v_max.min(full.v_max) {
        for u in area.u_min..=area.u_max.min(full.u_max) {
            if range.contains_bytes(frame.hsv[frame.index(u, v)]) {
                out.push((u, v));
            }
        }
    }
    out
}

/// Drop points deeper than `min depth + endcap_radius`; survivors keep order.
pub fn filter_endcap_noise(points: &[Vec3], endcap_radius: f64) -> Vec<Vec3> {
    let Some(min_z) = points.iter().map(|p| p.z).reduce(f64::min) else {
        return Vec::new();
    };
    let limit = min_z + endcap_radius;
    points.iter().filter(|p| p.z <= limit).copied().collect()
}

/// Indices of model points on the camera-facing side of the endcap sphere.
pub fn visible_model_indices(
    model: &EndcapModel,
    pose: &RigidPose,
    camera_origin: &Vec3,
) -> Vec<usize> {
    let center = pose.transform_point(&model.center);
    let to_camera = camera_origin - center;
    model
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| (pose.transform_point(p) - center).dot(&to_camera) > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// World-frame model points visible from `camera_origin`.
pub fn visible_model_points(
    model: &EndcapModel,
    pose: &RigidPose,
    camera_origin: &Vec3,
) -> Vec<Vec3> {
    visible_model_indices(model, pose, camera_origin)
        .into_iter()
        .map(|i| pose.transform_point(&model.points[i]))
        .collect()
}

/// For each model point, the nearest observed point within `d_max` as
/// `(observed index, distance)`. Ties go to the lowest observed index.
pub fn match_nearest(model: &[Vec3], observed: &[Vec3], d_max: f64) -> Vec<Option<(usize, f64)>> {
    if observed.len() <= 32 {
        match_nearest_brute_force(model, observed, d_max)
    } else {
        SpatialGrid::new(observed, d_max).match_all(model, d_max)
    }
}

/// Reference implementation of [`match_nearest`] by exhaustive search.
pub fn match_nearest_brute_force(
    model: &[Vec3],
    observed: &[Vec3],
    d_max: f64,
) -> Vec<Option<(usize, f64)>> {
    model
        .iter()
        .map(|m| {
            let mut best = None;
            for (j, o) in observed.iter().enumerate() {
                consider(&mut best, j, (m - o).norm(), d_max);
            }
            best
        })
        .collect()
}

const TIE_EPS: f64 = 1e-12;

#[inline]
fn consider(best: &mut Option<(usize, f64)>, j: usize, d: f64, d_max: f64) {
    if d > d_max {
        return;
    }
    match *best {
        None => *best = Some((j, d)),
        Some((bj, bd)) => {
            if d < bd - TIE_EPS || ((d - bd).abs() <= TIE_EPS && j < bj) {
                *best = Some((j, d));
            }
        }
    }
}

/// Uniform hash grid with cell size equal to the search radius.
struct SpatialGrid<'a> {
    points: &'a [Vec3],
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl<'a> SpatialGrid<'a> {
    fn new(points: &'a [Vec3], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self {
            points,
            cell,
            cells,
        }
    }

    #[inline]
    fn key(p: &Vec3, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    fn match_all(&self, model: &[Vec3], d_max: f64) -> Vec<Option<(usize, f64)>> {
        model
            .iter()
            .map(|m| {
                let (kx, ky, kz) = Self::key(m, self.cell);
                let mut best = None;
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        for dz in -1..=1 {
                            if let Some(ids) = self.cells.get(&(kx + dx, ky + dy, kz + dz)) {
                                for &j in ids {
                                    consider(&mut best, j, (m - self.points[j]).norm(), d_max);
                                }
                            }
                        }
                    }
                }
                best
            })
            .collect()
    }
}

/// Nearest-neighbor correspondences from model to observed points with the
/// distance weight `1 - (d/d_max)^2`.
pub fn find_correspondences(
    visible_model: &[Vec3],
    observed: &[Vec3],
    d_max: f64,
) -> Vec<Correspondence> {
    build_correspondences(
        visible_model,
        observed,
        d_max,
        match_nearest(visible_model, observed, d_max),
    )
}

/// [`find_correspondences`] via exhaustive search.
pub fn find_correspondences_brute_force(
    visible_model: &[Vec3],
    observed: &[Vec3],
    d_max: f64,
) -> Vec<Correspondence> {
    build_correspondences(
        visible_model,
        observed,
        d_max,
        match_nearest_brute_force(visible_model, observed, d_max),
    )
}

fn build_correspondences(
    model: &[Vec3],
    observed: &[Vec3],
    d_max: f64,
    matches: Vec<Option<(usize, f64)>>,
) -> Vec<Correspondence> {
    model
        .iter()
        .zip(matches)
        .filter_map(|(m, hit)| {
            hit.map(|(j, d)| {
                let w = correspondence_weight(d, d_max).unwrap_or(0.0);
                Correspondence::new(*m, observed[j], w)
            })
        })
        .collect()
}

/// Append `count` seeded-random anchor pairs drawn from the previous step.
///
/// Pair `k` is `(previous_model[i], previous_observed[i])` for a random `i`.
/// Each anchor carries half the mean weight of the real correspondences
/// (0.5 when there are none).
pub fn add_dummy_points(
    mut correspondences: Vec<Correspondence>,
    previous_model: &[Vec3],
    previous_observed: &[Vec3],
    count: usize,
    seed: u64,
) -> Vec<Correspondence> {
    let n = previous_model.len().min(previous_observed.len());
    if count == 0 || n == 0 {
        return correspondences;
    }
    let mean = if correspondences.is_empty() {
        0.0
    } else {
        correspondences.iter().map(|c| c.weight).sum::<f64>() / correspondences.len() as f64
    };
    let weight = if mean > 0.0 { 0.5 * mean } else { 0.5 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    correspondences.reserve(count);
    for _ in 0..count {
        let i = rng.random_range(0..n);
        correspondences.push(Correspondence::new(
            previous_model[i],
            previous_observed[i],
            weight,
        ));
    }
    correspondences
}

/// RANSAC plane detection on every valid depth pixel of a frame.
pub fn detect_ground_plane(
    frame: &ObservedFrame,
    intrinsics: &CameraIntrinsics,
    config: &RansacConfig,
) -> Result<GroundPlane> {
    let mut points = Vec::new();
    for v in 0..frame.height {
        for u in 0..frame.width {
            if let Some(p) = unproject(intrinsics, u, v, frame.depth[frame.index(u, v)]) {
                points.push(p);
            }
        }
    }
    fit_ground_plane(&points, config)
}

/// RANSAC plane fit on a camera-frame point set followed by a least-squares
/// refit on the consensus set.
pub fn fit_ground_plane(points: &[Vec3], config: &RansacConfig) -> Result<GroundPlane> {
    if points.len() < 3 {
        return Err(Error::PlaneNotFound(format!(
            "{} valid points, need at least 3",
            points.len()
        )));
    }
    let thr = config.inlier_threshold;
    let count_inliers =
        |n: &Vec3, d: f64| points.iter().filter(|p| (n.dot(p) + d).abs() < thr).count();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(Vec3, f64, usize)> = None;
    for _ in 0..config.iterations.max(1) {
        let i = rng.random_range(0..points.len());
        let j = rng.random_range(0..points.len());
        let k = rng.random_range(0..points.len());
        if i == j || j == k || i == k {
            continue;
        }
        let normal = (points[j] - points[i]).cross(&(points[k] - points[i]));
        let len = normal.norm();
        if len < 1e-12 {
            continue;
        }
        let n = normal / len;
        let d = -n.dot(&points[i]);
        let c = count_inliers(&n, d);
        if best.is_none_or(|(_, _, bc)| c > bc) {
            best = Some((n, d, c));
        }
    }
    let Some((mut n, mut d, mut count)) = best else {
        return Err(Error::PlaneNotFound("all samples were degenerate".into()));
    };

    // Least-squares refit: normal = smallest principal direction of inliers.
    let inliers: Vec<&Vec3> = points
        .iter()
        .filter(|p| (n.dot(p) + d).abs() < thr)
        .collect();
    if inliers.len() >= 3 {
        let mean = inliers.iter().copied().sum::<Vec3>() / inliers.len() as f64;
        let mut cov = Matrix3::zeros();
        for p in &inliers {
            let q = *p - mean;
            cov += q * q.transpose();
        }
        let eig = cov.symmetric_eigen();
        let (idx, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("3 eigenvalues");
        let refined: Vec3 = eig.eigenvectors.column(idx).into_owned();
        let rd = -refined.dot(&mean);
        let rc = count_inliers(&refined, rd);
        if rc >= count {
            n = refined;
            d = rd;
            count = rc;
        }
    }

    if (count as f64) < 0.1 * points.len() as f64 {
        return Err(Error::PlaneNotFound(format!(
            "best plane has {count} of {} points as inliers",
            points.len()
        )));
    }

    // Camera origin must sit on the +z side.
    if d < 0.0 {
        n = -n;
        d = -d;
    }
    let x_ref = if n.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let ex = (x_ref - n * n.dot(&x_ref)).normalize();
    let ey = n.cross(&ex);
    let m = Matrix3::from_rows(&[ex.transpose(), ey.transpose(), n.transpose()]);
    let rotation = Rotation::from_matrix(&m);
    Ok(GroundPlane {
        rotation,
        translation: Vec3::new(0.0, 0.0, d),
        inliers: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot_model::{sample_endcap_model, Hsv, TensegrityTopology};
    use approx::assert_abs_diff_eq;

    fn intr_small() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 25.0,
            width: 100,
            height: 50,
        }
    }

    #[test]
    fn projection_examples() {
        let intr = CameraIntrinsics::hd720();
        let mut frame = ObservedFrame::blank(1280, 720);
        let i = frame.index(640, 360);
        frame.depth[i] = 1.0;
        let p = project_to_3d(&frame, &intr, 640, 360).unwrap().unwrap();
        assert_abs_diff_eq!((p - Vec3::new(0.0, 0.0, 1.0)).norm(), 0.0, epsilon = 1e-12);

        let i = frame.index(1240, 360);
        frame.depth[i] = 0.5;
        let p = project_to_3d(&frame, &intr, 1240, 360).unwrap().unwrap();
        assert_abs_diff_eq!((p - Vec3::new(0.5, 0.0, 0.5)).norm(), 0.0, epsilon = 1e-12);

        assert_eq!(project_to_3d(&frame, &intr, 10, 10).unwrap(), None);
        assert!(project_to_3d(&frame, &intr, 1280, 0).is_err());
    }

    #[test]
    fn segmentation_counts_painted_pixels() {
        let mut frame = ObservedFrame::blank(40, 11);
        let red = HsvRange::new((340.0, 20.0), (0.5, 1.0), (0.3, 1.0));
        let paint = Hsv::new(0.0, 0.9, 0.9).to_bytes();
        let gray = Hsv::new(0.0, 0.05, 0.5).to_bytes();
        for v in 0..11 {
            for u in 0..40 {
                let i = frame.index(u, v);
                frame.hsv[i] = if v == 5 { paint } else { gray };
            }
        }
        let px = segment_endcap_pixels(&frame, &red, None);
        assert_eq!(px.len(), 40);
        assert!(px.iter().all(|&(_, v)| v == 5));

        let roi = PixelBox {
            u_min: 0,
            v_min: 0,
            u_max: 19,
            v_max: 10,
        };
        let px = segment_endcap_pixels(&frame, &red, Some(&roi));
        assert_eq!(px.len(), 20);
        assert!(px.iter().all(|&(u, _)| u < 20));
    }

    #[test]
    fn noise_filter_examples() {
        let pts = |zs: &[f64]| {
            zs.iter()
                .map(|&z| Vec3::new(0.0, 0.0, z))
                .collect::<Vec<_>>()
        };
        let out = filter_endcap_noise(&pts(&[0.50, 0.505, 0.53]), 0.0175);
        assert_eq!(out, pts(&[0.50, 0.505]));
        let all = pts(&[0.5, 0.51, 0.515]);
        assert_eq!(filter_endcap_noise(&all, 0.0175), all);
        assert_eq!(filter_endcap_noise(&pts(&[0.7]), 0.0175), pts(&[0.7]));
        assert!(filter_endcap_noise(&[], 0.0175).is_empty());
    }

    #[test]
    fn visibility_front_hemisphere() {
        let topo = TensegrityTopology::three_bar();
        let models = sample_endcap_model(&topo, 200, 1).unwrap();
        let model = &models[0];
        // Place endcap 0 center at (0, 0, 1).
        let pose = RigidPose::from_translation(Vec3::new(0.0, 0.0, 1.0) - model.center);
        let vis = visible_model_points(model, &pose, &Vec3::zeros());
        assert!(!vis.is_empty());
        assert!(vis.iter().all(|p| p.z < 1.0));

        let cam_at_center = visible_model_points(model, &pose, &Vec3::new(0.0, 0.0, 1.0));
        assert!(cam_at_center.is_empty());
    }

    #[test]
    fn dmax_examples() {
        let s = DmaxSchedule::default();
        assert_abs_diff_eq!(dmax_schedule(0, &s), 0.10, epsilon = 1e-15);
        assert_abs_diff_eq!(dmax_schedule(2, &s), 0.049, epsilon = 1e-12);
        assert_abs_diff_eq!(dmax_schedule(20, &s), 0.01, epsilon = 1e-15);
        for k in 0..30 {
            assert!(dmax_schedule(k + 1, &s) <= dmax_schedule(k, &s));
        }
    }

    #[test]
    fn correspondence_examples() {
        let model: Vec<Vec3> = (0..50)
            .map(|i| Vec3::new(i as f64 * 0.003, (i % 7) as f64 * 0.002, 0.5))
            .collect();
        let c = find_correspondences(&model, &model, 0.05);
        assert_eq!(c.len(), model.len());
        assert!(c.iter().all(|c| c.weight == 1.0));

        let shifted: Vec<Vec3> = model.iter().map(|p| p + Vec3::new(0.0, 0.0, 0.1)).collect();
        assert!(find_correspondences(&model, &shifted, 0.05).is_empty());

        let m = [Vec3::zeros()];
        let obs = [Vec3::new(0.01, 0.0, 0.0), Vec3::new(-0.01, 0.0, 0.0)];
        let c = find_correspondences(&m, &obs, 0.05);
        assert_eq!(c[0].observed_point, obs[0]);
        let obs_rev = [obs[1], obs[0]];
        let c = find_correspondences(&m, &obs_rev, 0.05);
        assert_eq!(c[0].observed_point, obs_rev[0]);
    }

    #[test]
    fn dummy_point_examples() {
        let real: Vec<Correspondence> = (0..10)
            .map(|i| Correspondence::new(Vec3::x() * i as f64, Vec3::x() * i as f64, 1.0))
            .collect();
        let prev: Vec<Vec3> = (0..20).map(|i| Vec3::new(0.0, i as f64, 1.0)).collect();
        assert_eq!(add_dummy_points(real.clone(), &prev, &prev, 0, 3), real);
        let out = add_dummy_points(real.clone(), &prev, &prev, 50, 3);
        assert_eq!(out.len(), 60);
        assert!(out[10..].iter().all(|c| c.weight == 0.5));
        assert_eq!(out, add_dummy_points(real, &prev, &prev, 50, 3));

        let out = add_dummy_points(Vec::new(), &prev, &prev, 50, 3);
        assert_eq!(out.len(), 50);
        assert!(out.iter().all(|c| c.weight == 0.5));
    }

    fn plane_frame() -> (ObservedFrame, CameraIntrinsics) {
        let intr = intr_small();
        let mut frame = ObservedFrame::blank(intr.width, intr.height);
        frame.depth.iter_mut().for_each(|d| *d = 0.8);
        (frame, intr)
    }

    #[test]
    fn ground_plane_exact() {
        let (frame, intr) = plane_frame();
        let g = detect_ground_plane(&frame, &intr, &RansacConfig::default()).unwrap();
        assert_eq!(g.inliers, 5000);
        let n = g.normal();
        assert!(n.dot(&(-Vec3::z())).acos().to_degrees() < 0.5);
        assert_abs_diff_eq!(g.height(&Vec3::new(0.1, 0.2, 0.8)), 0.0, epsilon = 1e-6);
        assert!(g.height(&Vec3::zeros()) > 0.0);
    }

    #[test]
    fn ground_plane_with_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pts: Vec<Vec3> = (0..5000)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    0.8,
                )
            })
            .collect();
        pts.extend((0..1000).map(|_| {
            Vec3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(0.3..1.2),
            )
        }));
        let cfg = RansacConfig {
            iterations: 200,
            inlier_threshold: 0.01,
            seed: 5,
        };
        let g = fit_ground_plane(&pts, &cfg).unwrap();
        assert!(g.normal().dot(&(-Vec3::z())).acos().to_degrees() < 1.0);
        assert!(g.inliers >= 4900, "{} inliers", g.inliers);
        assert_eq!(g, fit_ground_plane(&pts, &cfg).unwrap());
    }

    #[test]
    fn ground_plane_too_few_points() {
        let mut frame = ObservedFrame::blank(10, 10);
        frame.depth[0] = 1.0;
        frame.depth[5] = 1.0;
        let intr = CameraIntrinsics {
            fx: 10.0,
            fy: 10.0,
            cx: 5.0,
            cy: 5.0,
            width: 10,
            height: 10,
        };
        assert!(matches!(
            detect_ground_plane(&frame, &intr, &RansacConfig::default()),
            Err(Error::PlaneNotFound(_))
        ));
    }
}
