use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{RigidPose, Vec3};
use crate::perception::{CameraIntrinsics, ObservedFrame, PixelBox};
use crate::robot_model::{endcap_positions, Hsv, TensegrityTopology};
use crate::seed::derive_seed;

use super::trajectory::GroundTruthFrame;

/// Sensor noise of the synthetic camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimNoise {
    /// Probability that a pixel takes its color from a nearby pixel.
    pub color_misalignment_prob: f64,
    /// Max offset (pixels) of a misaligned color sample.
    pub color_misalignment_px: i64,
    /// Std of additive depth noise (meters).
    pub depth_sigma: f64,
    /// Probability that an endcap pixel has no depth.
    pub dropout: f64,
    /// Std of cable length noise (meters).
    pub cable_sigma: f64,
    /// Probability that a cable reading is biased (slack sensor).
    pub cable_slack_prob: f64,
    pub cable_slack_bias: f64,
    /// Transient occlusions per trajectory: a random endcap is hidden behind
    /// clutter for `occlusion_frames` frames.
    pub occlusion_episodes: usize,
    pub occlusion_frames: usize,
}

impl Default for SimNoise {
    fn default() -> Self {
        Self::noisy()
    }
}

impl SimNoise {
    pub fn noise_free() -> Self {
        Self {
            color_misalignment_prob: 0.0,
            color_misalignment_px: 0,
            depth_sigma: 0.0,
            dropout: 0.0,
            cable_sigma: 0.0,
            cable_slack_prob: 0.0,
            cable_slack_bias: 0.0,
            occlusion_episodes: 0,
            occlusion_frames: 0,
        }
    }

    pub fn noisy() -> Self {
        Self {
            color_misalignment_prob: 0.1,
            color_misalignment_px: 2,
            depth_sigma: 0.005,
            dropout: 0.05,
            cable_sigma: 0.01,
            cable_slack_prob: 0.05,
            cable_slack_bias: 0.02,
            occlusion_episodes: 3,
            occlusion_frames: 10,
        }
    }
}

/// Per-pixel label of what the ray hit first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Nothing,
    Ground,
    Endcap(usize),
    Rod(usize),
    Occluder(usize),
}

impl Label {
    fn code(self) -> u16 {
        match self {
            Label::Nothing => 0,
            Label::Ground => 1,
            Label::Endcap(e) => 100 + e as u16,
            Label::Rod(r) => 1000 + r as u16,
            Label::Occluder(k) => 2000 + k as u16,
        }
    }

    pub fn from_code(c: u16) -> Self {
        match c {
            0 => Label::Nothing,
            1 => Label::Ground,
            100..=999 => Label::Endcap((c - 100) as usize),
            1000..=1999 => Label::Rod((c - 1000) as usize),
            _ => Label::Occluder((c - 2000) as usize),
        }
    }
}

/// Gray sphere in the camera frame that hides whatever lies behind it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub center: Vec3,
    pub radius: f64,
}

/// Scene pieces besides the robot and ground.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneExtras {
    /// Radius of the drawn rod shaft.
    pub shaft_radius: f64,
    pub occluders: Vec<Occluder>,
}

impl Default for SceneExtras {
    fn default() -> Self {
        Self {
            shaft_radius: 0.01,
            occluders: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RenderedFrame {
    pub frame: ObservedFrame,
    /// Row-major label codes; see [`RenderedFrame::label`].
    pub labels: Vec<u16>,
}

impl RenderedFrame {
    pub fn label(&self, u: usize, v: usize) -> Label {
        Label::from_code(self.labels[v * self.frame.width + u])
    }

    /// Bounding box of the pixels carrying `label`.
    pub fn label_box(&self, label: Label) -> Option<PixelBox> {
        let code = label.code();
        let w = self.frame.width;
        let mut b: Option<PixelBox> = None;
        for (i, _) in self.labels.iter().enumerate().filter(|(_, &c)| c == code) {
            let (u, v) = (i % w, i / w);
            let bb = b.get_or_insert(PixelBox {
                u_min: u,
                v_min: v,
                u_max: u,
                v_max: v,
            });
            bb.u_min = bb.u_min.min(u);
            bb.u_max = bb.u_max.max(u);
            bb.v_min = bb.v_min.min(v);
            bb.v_max = bb.v_max.max(v);
        }
        b
    }
}

enum Shape {
    Sphere {
        center: Vec3,
        radius: f64,
    },
    Cylinder {
        a: Vec3,
        axis: Vec3,
        length: f64,
        radius: f64,
    },
}

struct Primitive {
    shape: Shape,
    label: Label,
    color: [u8; 3],
    bounds: PixelBox,
}

impl Primitive {
    /// Ray parameter along `d` (unnormalized, `d.z = 1`) of the first hit;
    /// equals the hit depth.
    fn intersect(&self, d: &Vec3) -> Option<f64> {
        match self.shape {
            Shape::Sphere { center, radius } => {
                let a = d.norm_squared();
                let b = d.dot(&center);
                let c = center.norm_squared() - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let t = (b - disc.sqrt()) / a;
                (t > 0.0).then_some(t)
            }
            Shape::Cylinder {
                a,
                axis,
                length,
                radius,
            } => {
                let m = d - axis * d.dot(&axis);
                let w = -a;
                let n = w - axis * w.dot(&axis);
                let qa = m.norm_squared();
                if qa < 1e-18 {
                    return None;
                }
                let qb = m.dot(&n);
                let qc = n.norm_squared() - radius * radius;
                let disc = qb * qb - qa * qc;
                if disc < 0.0 {
                    return None;
                }
                let root = disc.sqrt();
                [(-qb - root) / qa, (-qb + root) / qa]
                    .into_iter()
                    .find(|&t| {
                        let s = (d * t - a).dot(&axis);
                        t > 0.0 && (0.0..=length).contains(&s)
                    })
            }
        }
    }
}

fn sphere_bounds(intr: &CameraIntrinsics, c: &Vec3, r: f64) -> PixelBox {
    let e = Vec3::repeat(r);
    intr.project_box(&(c - e), &(c + e))
        .unwrap_or_else(|| PixelBox::full(intr))
}

fn gray(v: f64) -> [u8; 3] {
    Hsv::new(0.0, 0.0, v).to_bytes()
}

/// Fixed low-saturation texture of the floor, as HSV bytes.
#[inline]
fn ground_color(u: usize, v: usize) -> [u8; 3] {
    let mut z = ((v as u64) << 32 | u as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 29)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 32;
    let hue = z as u8;
    let sat = ((z >> 8) & 0xff) as u32 * 64 / 256;
    let val = 90 + ((z >> 16) & 0xff) as u32 * 100 / 256;
    [hue, sat as u8, val as u8]
}

/// Ground plane `n · p + offset = 0` in the camera frame from the camera's
/// world pose (world ground is `z = 0`).
fn ground_in_camera(camera_pose: &RigidPose) -> (Vec3, f64) {
    let normal = camera_pose.rotation.inverse() * Vec3::z();
    (normal, camera_pose.translation.z)
}

/// Render depth, HSV color and labels of one camera-frame ground-truth state.
/// Cable readings are left empty.
pub fn render_frame(
    truth: &GroundTruthFrame,
    topology: &TensegrityTopology,
    intrinsics: &CameraIntrinsics,
    camera_pose: &RigidPose,
    noise: &SimNoise,
    extras: &SceneExtras,
    seed: u64,
) -> RenderedFrame {
    let (w, h) = (intrinsics.width, intrinsics.height);
    let mut prims = Vec::new();
    for (e, c) in truth.endcaps.iter().enumerate() {
        prims.push(Primitive {
            shape: Shape::Sphere {
                center: *c,
                radius: topology.endcap_radius,
            },
            label: Label::Endcap(e),
            color: topology.endcap_hsv[e].center().to_bytes(),
            bounds: sphere_bounds(intrinsics, c, topology.endcap_radius),
        });
    }
    for (r, pose) in truth.poses.iter().enumerate() {
        let (top, bottom) = endcap_positions(pose, topology);
        let lo = top.inf(&bottom) - Vec3::repeat(extras.shaft_radius);
        let hi = top.sup(&bottom) + Vec3::repeat(extras.shaft_radius);
        prims.push(Primitive {
            shape: Shape::Cylinder {
                a: bottom,
                axis: (top - bottom).normalize(),
                length: (top - bottom).norm(),
                radius: extras.shaft_radius,
            },
            label: Label::Rod(r),
            color: gray(0.55),
            bounds: intrinsics
                .project_box(&lo, &hi)
                .unwrap_or_else(|| PixelBox::full(intrinsics)),
        });
    }
    for (k, o) in extras.occluders.iter().enumerate() {
        prims.push(Primitive {
            shape: Shape::Sphere {
                center: o.center,
                radius: o.radius,
            },
            label: Label::Occluder(k),
            color: gray(0.3),
            bounds: sphere_bounds(intrinsics, &o.center, o.radius),
        });
    }
    let (normal, offset) = ground_in_camera(camera_pose);

    let mut depth = vec![0f32; w * h];
    let mut hsv = vec![[0u8; 3]; w * h];
    let mut labels = vec![0u16; w * h];
    depth
        .par_chunks_mut(w)
        .zip(hsv.par_chunks_mut(w))
        .zip(labels.par_chunks_mut(w))
        .enumerate()
        .for_each(|(v, ((drow, crow), lrow))| {
            let row: Vec<&Primitive> = prims
                .iter()
                .filter(|p| !p.bounds.is_empty() && p.bounds.v_min <= v && v <= p.bounds.v_max)
                .collect();
            let y = (v as f64 - intrinsics.cy) / intrinsics.fy;
            for u in 0..w {
                let d = Vec3::new((u as f64 - intrinsics.cx) / intrinsics.fx, y, 1.0);
                let mut best = f64::INFINITY;
                let mut hit = (Label::Nothing, [0u8; 3]);
                let denom = normal.dot(&d);
                if denom.abs() > 1e-12 {
                    let t = -offset / denom;
                    if t > 0.0 {
                        best = t;
                        hit = (Label::Ground, ground_color(u, v));
                    }
                }
                for p in row
                    .iter()
                    .filter(|p| p.bounds.u_min <= u && u <= p.bounds.u_max)
                {
                    if let Some(t) = p.intersect(&d) {
                        if t < best {
                            best = t;
                            hit = (p.label, p.color);
                        }
                    }
                }
                if best.is_finite() {
                    drow[u] = best as f32;
                }
                crow[u] = hit.1;
                lrow[u] = hit.0.code();
            }
        });

    apply_noise(
        &mut depth,
        &mut hsv,
        &labels,
        w,
        noise,
        derive_seed(seed, &[truth.frame as u64]),
    );

    RenderedFrame {
        frame: ObservedFrame {
            width: w,
            height: h,
            depth,
            hsv,
            cables: Default::default(),
            timestamp: 0.0,
        },
        labels,
    }
}

fn apply_noise(
    depth: &mut [f32],
    hsv: &mut [[u8; 3]],
    labels: &[u16],
    w: usize,
    noise: &SimNoise,
    seed: u64,
) {
    let h = depth.len() / w;
    let clean = hsv.to_vec();
    let normal = (noise.depth_sigma > 0.0)
        .then(|| Normal::new(0.0, noise.depth_sigma).expect("finite sigma"));
    let px = noise.color_misalignment_px.max(0);
    depth
        .par_chunks_mut(w)
        .zip(hsv.par_chunks_mut(w))
        .enumerate()
        .for_each(|(v, (drow, crow))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[v as u64]));
            for u in 0..w {
                if noise.color_misalignment_prob > 0.0
                    && rng.random_bool(noise.color_misalignment_prob.min(1.0))
                {
                    let du = rng.random_range(-px..=px);
                    let dv = rng.random_range(-px..=px);
                    let su = (u as i64 + du).clamp(0, w as i64 - 1) as usize;
                    let sv = (v as i64 + dv).clamp(0, h as i64 - 1) as usize;
                    crow[u] = clean[sv * w + su];
                }
                if drow[u] > 0.0 {
                    if let Some(n) = &normal {
                        drow[u] = (drow[u] as f64 + n.sample(&mut rng)).max(1e-3) as f32;
                    }
                    let is_endcap = matches!(Label::from_code(labels[v * w + u]), Label::Endcap(_));
                    if is_endcap && noise.dropout > 0.0 && rng.random_bool(noise.dropout.min(1.0)) {
                        drow[u] = 0.0;
                    }
                }
            }
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;
    use crate::perception::unproject;

    fn camera() -> RigidPose {
        RigidPose::new(
            Rotation::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI),
            Vec3::new(0.0, 0.0, 1.2),
        )
    }

    fn one_rod_scene() -> (GroundTruthFrame, TensegrityTopology) {
        let topo = TensegrityTopology::three_bar();
        let poses = vec![
            RigidPose::new(
                Rotation::from_axis_angle(&Vec3::y_axis(), std::f64::consts::FRAC_PI_2),
                Vec3::new(0.0, 0.0, 1.0),
            ),
            RigidPose::new(
                Rotation::from_axis_angle(&Vec3::y_axis(), std::f64::consts::FRAC_PI_2),
                Vec3::new(0.0, 0.15, 1.0),
            ),
            RigidPose::new(
                Rotation::from_axis_angle(&Vec3::y_axis(), std::f64::consts::FRAC_PI_2),
                Vec3::new(0.0, -0.15, 1.0),
            ),
        ];
        (GroundTruthFrame::from_poses(0, poses, &topo), topo)
    }

    #[test]
    fn noise_free_endcap_pixels_lie_on_the_sphere() {
        let (gt, topo) = one_rod_scene();
        let intr = CameraIntrinsics::hd720().downscaled(2);
        let out = render_frame(
            &gt,
            &topo,
            &intr,
            &camera(),
            &SimNoise::noise_free(),
            &SceneExtras::default(),
            1,
        );
        let mut seen = vec![0; 6];
        for v in 0..intr.height {
            for u in 0..intr.width {
                if let Label::Endcap(e) = out.label(u, v) {
                    let p = unproject(&intr, u, v, out.frame.depth[out.frame.index(u, v)]).unwrap();
                    let r = (p - gt.endcaps[e]).norm();
                    assert!((r - topo.endcap_radius).abs() < 1e-5, "endcap {e} at {r}");
                    assert!(topo.endcap_hsv[e].contains_bytes(out.frame.hsv[out.frame.index(u, v)]));
                    seen[e] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&n| n > 20), "{seen:?}");
    }

    #[test]
    fn ground_and_gray_parts_never_match_endcap_colors() {
        let (gt, topo) = one_rod_scene();
        let intr = CameraIntrinsics::hd720().downscaled(4);
        let out = render_frame(
            &gt,
            &topo,
            &intr,
            &camera(),
            &SimNoise::noise_free(),
            &SceneExtras::default(),
            1,
        );
        for (i, c) in out.frame.hsv.iter().enumerate() {
            if !matches!(Label::from_code(out.labels[i]), Label::Endcap(_)) {
                assert!(topo.endcap_hsv.iter().all(|r| !r.contains_bytes(*c)));
            }
        }
        // Ground at 1.2 m straight below the camera.
        let (u, v) = (5, 5);
        assert_eq!(out.label(u, v), Label::Ground);
        let p = unproject(&intr, u, v, out.frame.depth[out.frame.index(u, v)]).unwrap();
        assert!((p.z - 1.2).abs() < 1e-6);
    }

    #[test]
    fn occluder_hides_endcap() {
        let (gt, topo) = one_rod_scene();
        let intr = CameraIntrinsics::hd720().downscaled(2);
        let c = gt.endcaps[0];
        let extras = SceneExtras {
            occluders: vec![Occluder {
                center: c * ((c.norm() - 0.1) / c.norm()),
                radius: 0.03,
            }],
            ..Default::default()
        };
        let out = render_frame(
            &gt,
            &topo,
            &intr,
            &camera(),
            &SimNoise::noise_free(),
            &extras,
            1,
        );
        assert!(out.label_box(Label::Endcap(0)).is_none());
        assert!(out.label_box(Label::Endcap(1)).is_some());
    }

    #[test]
    fn rendering_is_deterministic_and_seed_dependent() {
        let (gt, topo) = one_rod_scene();
        let intr = CameraIntrinsics::hd720().downscaled(4);
        let noise = SimNoise::noisy();
        let a = render_frame(
            &gt,
            &topo,
            &intr,
            &camera(),
            &noise,
            &SceneExtras::default(),
            3,
        );
        let b = render_frame(
            &gt,
            &topo,
            &intr,
            &camera(),
            &noise,
            &SceneExtras::default(),
            3,
        );
        let c = render_frame(
            &gt,
            &topo,
            &intr,
            &camera(),
            &noise,
            &SceneExtras::default(),
            4,
        );
        assert_eq!(a.frame.depth, b.frame.depth);
        assert_eq!(a.frame.hsv, b.frame.hsv);
        assert_ne!(a.frame.depth, c.frame.depth);
    }

    /// Rod 0 lies along x with its first endcap at `first`; the other rods
    /// are given by their first endcaps too.
    fn scene_with_first_endcaps(firsts: [Vec3; 3]) -> (GroundTruthFrame, TensegrityTopology) {
        let topo = TensegrityTopology::three_bar();
        let r = Rotation::from_axis_angle(&Vec3::y_axis(), std::f64::consts::FRAC_PI_2);
        let half = r * Vec3::new(0.0, 0.0, topo.rod_length / 2.0);
        let poses = firsts.iter().map(|c| RigidPose::new(r, c - half)).collect();
        (GroundTruthFrame::from_poses(0, poses, &topo), topo)
    }

    #[test]
    fn endcap_on_the_optical_axis_has_its_front_depth() {
        let (gt, topo) = scene_with_first_endcaps([
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(5.0, 5.0, 1.0),
            Vec3::new(-5.0, 5.0, 1.0),
        ]);
        assert!((gt.endcaps[0] - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        let intr = CameraIntrinsics::hd720();
        let out = render_frame(
            &gt,
            &topo,
            &intr,
            &RigidPose::identity(),
            &SimNoise::noise_free(),
            &SceneExtras::default(),
            0,
        );
        let i = out.frame.index(640, 360);
        assert_eq!(out.label(640, 360), Label::Endcap(0));
        assert!((out.frame.depth[i] as f64 - 0.9825).abs() < 1e-6);
        assert!(topo.endcap_hsv[0].contains_bytes(out.frame.hsv[i]));
    }

    #[test]
    fn endcap_behind_another_body_leaves_no_colored_pixels() {
        let (gt, topo) = scene_with_first_endcaps([
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, 0.5),
            Vec3::new(0.0, 0.3, 1.0),
        ]);
        let intr = CameraIntrinsics::hd720();
        let out = render_frame(
            &gt,
            &topo,
            &intr,
            &RigidPose::identity(),
            &SimNoise::noise_free(),
            &SceneExtras::default(),
            0,
        );
        assert!(out.label_box(Label::Endcap(0)).is_none());
        let painted = out
            .frame
            .hsv
            .iter()
            .filter(|c| topo.endcap_hsv[0].contains_bytes(**c))
            .count();
        assert_eq!(painted, 0);
    }
}
