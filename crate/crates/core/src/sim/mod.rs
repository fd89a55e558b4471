//! Synthetic RGB-D and cable-sensor data with exact ground truth.
//!
//! A 3-bar prism rolls on a textured floor under a fixed overhead camera.
//! Frames are ray cast analytically; noise streams are seeded per frame and
//! per image row so output does not depend on thread scheduling.

mod render;
mod trajectory;

pub use render::{render_frame, Label, Occluder, RenderedFrame, SceneExtras, SimNoise};
pub use trajectory::{
    generate_trajectory, min_rod_distance, Gait, GroundTruthFrame, RodTwist, TrajectorySpec,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{closest_points_between_segments, RigidPose, Rotation, Segment, Vec3};
use crate::perception::{CableMeasurements, CameraIntrinsics, ObservedFrame, PixelBox, Roi};
use crate::robot_model::{endcap_positions, TensegrityTopology};
use crate::seed::derive_seed;

/// Overhead camera placement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraSetup {
    pub intrinsics: CameraIntrinsics,
    /// Height of the optical center above the floor (meters).
    pub height: f64,
    /// Rotation about the camera x axis away from straight down (degrees).
    pub tilt_deg: f64,
}

impl Default for CameraSetup {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::hd720(),
            height: 1.2,
            tilt_deg: 0.0,
        }
    }
}

impl CameraSetup {
    /// Camera-to-world transform.
    pub fn pose(&self) -> RigidPose {
        let down = Rotation::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI);
        let tilt = Rotation::from_axis_angle(&Vec3::x_axis(), self.tilt_deg.to_radians());
        RigidPose::new(down * tilt, Vec3::new(0.0, 0.0, self.height))
    }
}

/// Hide one endcap behind a gray sphere for a frame range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occlusion {
    pub endcap: usize,
    pub start: usize,
    pub frames: usize,
}

impl Occlusion {
    pub fn covers(&self, frame: usize) -> bool {
        frame >= self.start && frame < self.start + self.frames
    }
}

/// Cable readings that describe `rod` pushed through `other`: from `start`
/// the rod is translated, in the cable model only, along the direction to
/// `other` until it sits mirrored on the far side after `ramp` frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CableCrossing {
    pub rod: usize,
    pub other: usize,
    pub start: usize,
    pub ramp: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Base seed. The trajectory seed is derived from it.
    pub seed: u64,
    pub trajectory: TrajectorySpec,
    pub noise: SimNoise,
    pub camera: CameraSetup,
    pub frame_rate: f64,
    /// Radius of the drawn rod shaft (meters).
    pub shaft_radius: f64,
    pub occluder_radius: f64,
    /// Distance from the occluded endcap toward the camera (meters).
    pub occluder_offset: f64,
    pub occlusions: Vec<Occlusion>,
    pub crossing: Option<CableCrossing>,
    /// Probability that a rod's ground-truth pose is missing from a frame.
    pub truth_dropout: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trajectory: TrajectorySpec::default(),
            noise: SimNoise::noisy(),
            camera: CameraSetup::default(),
            frame_rate: 10.0,
            shaft_radius: 0.01,
            occluder_radius: 0.03,
            occluder_offset: 0.1,
            occlusions: Vec::new(),
            crossing: None,
            truth_dropout: 0.0,
        }
    }
}

impl SimConfig {
    /// Rolling gait, 100 frames.
    pub fn rolling(seed: u64, noisy: bool) -> Self {
        Self {
            seed,
            noise: if noisy {
                SimNoise::noisy()
            } else {
                SimNoise::noise_free()
            },
            ..Default::default()
        }
    }

    /// Noisy rolling gait where `endcap` is the only hidden one, for frames
    /// 40..60. See [`Simulation::farthest_moving_endcap`] to pick it.
    pub fn occlusion(seed: u64, endcap: usize) -> Self {
        let mut cfg = Self {
            occlusions: vec![Occlusion {
                endcap,
                start: 40,
                frames: 20,
            }],
            ..Self::rolling(seed, true)
        };
        cfg.noise.occlusion_episodes = 0;
        cfg
    }

    /// Static robot whose red rod is hidden while the cable readings push it
    /// through the green rod.
    pub fn crossing(seed: u64) -> Self {
        Self {
            seed,
            trajectory: TrajectorySpec {
                frames: 40,
                gait: Gait::Static,
                ..Default::default()
            },
            noise: SimNoise::noise_free(),
            occlusions: vec![
                Occlusion {
                    endcap: 0,
                    start: 5,
                    frames: 35,
                },
                Occlusion {
                    endcap: 1,
                    start: 5,
                    frames: 35,
                },
            ],
            crossing: Some(CableCrossing {
                rod: 0,
                other: 1,
                start: 10,
                ramp: 15,
            }),
            ..Default::default()
        }
    }

    pub fn validate(&self, topology: &TensegrityTopology) -> Result<()> {
        let bad = |f: &str, why: &str| Err(Error::InvalidArgument(format!("{f}: {why}")));
        self.camera.intrinsics.validate()?;
        if !(self.camera.height > 0.0) {
            return bad("camera.height", "must be positive");
        }
        if !(self.frame_rate > 0.0) {
            return bad("frame_rate", "must be positive");
        }
        let n = &self.noise;
        for (name, p) in [
            ("noise.color_misalignment_prob", n.color_misalignment_prob),
            ("noise.dropout", n.dropout),
            ("noise.cable_slack_prob", n.cable_slack_prob),
            ("truth_dropout", self.truth_dropout),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(name, "must be a probability");
            }
        }
        if !(n.depth_sigma >= 0.0 && n.cable_sigma >= 0.0 && n.color_misalignment_px >= 0) {
            return bad("noise", "scales must be non-negative");
        }
        if self
            .occlusions
            .iter()
            .any(|o| o.endcap >= topology.n_endcaps())
        {
            return bad("occlusions", "endcap out of range");
        }
        if let Some(c) = self.crossing {
            if c.rod >= topology.n_rods
                || c.other >= topology.n_rods
                || c.rod == c.other
                || c.ramp == 0
            {
                return bad("crossing", "needs two distinct rods and a positive ramp");
            }
        }
        self.trajectory.validate(topology)
    }
}

const START_ATTEMPTS: u64 = 32;
/// Fraction of each endcap's silhouette that no other body may cover in
/// the first frame.
const MIN_START_VISIBILITY: f64 = 0.9;

fn first_frame_visible(
    truth: &GroundTruthFrame,
    topology: &TensegrityTopology,
    config: &SimConfig,
    camera_pose: &RigidPose,
) -> bool {
    let intr = &config.camera.intrinsics;
    let clean = render_frame(
        truth,
        topology,
        intr,
        camera_pose,
        &SimNoise::noise_free(),
        &SceneExtras {
            shaft_radius: config.shaft_radius,
            occluders: Vec::new(),
        },
        0,
    );
    // Fraction of each endcap's silhouette covered by other bodies.
    truth.endcaps.iter().enumerate().all(|(e, c)| {
        let own = Label::Rod(topology.rod_of_endcap(e));
        let rv = Vec3::repeat(topology.endcap_radius);
        let Some(b) = intr.project_box(&(c - rv), &(c + rv)) else {
            return false;
        };
        let (mut inside, mut hidden) = (0usize, 0usize);
        for v in b.v_min..=b.v_max {
            for u in b.u_min..=b.u_max {
                let d = Vec3::new(
                    (u as f64 - intr.cx) / intr.fx,
                    (v as f64 - intr.cy) / intr.fy,
                    1.0,
                );
                if c.cross(&d).norm_squared() / d.norm_squared() > topology.endcap_radius.powi(2) {
                    continue;
                }
                inside += 1;
                let l = clean.label(u, v);
                if l != Label::Endcap(e) && l != own {
                    hidden += 1;
                }
            }
        }
        inside > 0 && (hidden as f64) <= (1.0 - MIN_START_VISIBILITY) * inside as f64
    })
}

/// Noisy cable readings for true endcap distances in topology order.
pub fn simulate_cables(
    true_lengths: &[f64],
    topology: &TensegrityTopology,
    noise: &SimNoise,
    seed: u64,
) -> CableMeasurements {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = (noise.cable_sigma > 0.0)
        .then(|| Normal::new(0.0, noise.cable_sigma).expect("finite sigma"));
    topology
        .cables
        .iter()
        .zip(true_lengths)
        .map(|(&edge, &l)| {
            let slack = noise.cable_slack_prob > 0.0 && rng.random_bool(noise.cable_slack_prob);
            let eps = normal.as_ref().map_or(0.0, |n| n.sample(&mut rng));
            let reading = if slack {
                l + noise.cable_slack_bias
            } else {
                l + eps
            };
            (edge, reading.max(1e-6))
        })
        .collect()
}

/// A generated scene: camera-frame ground truth plus everything needed to
/// render any frame on demand.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub config: SimConfig,
    pub topology: TensegrityTopology,
    /// Camera-to-world.
    pub camera_pose: RigidPose,
    /// Camera frame.
    pub truth: Vec<GroundTruthFrame>,
    /// Scripted occlusions plus the random episodes drawn from the noise
    /// settings.
    pub occlusions: Vec<Occlusion>,
}

impl Simulation {
    pub fn new(config: SimConfig, topology: TensegrityTopology) -> Result<Self> {
        topology.validate()?;
        config.validate(&topology)?;
        let camera_pose = config.camera.pose();
        let to_camera = camera_pose.inverse();
        // Redraw the random start until every endcap is clearly visible in
        // the first frame, which initialization needs.
        let mut truth = Vec::new();
        for attempt in 0..START_ATTEMPTS {
            let spec = TrajectorySpec {
                seed: derive_seed(config.seed, &[0, attempt]),
                ..config.trajectory.clone()
            };
            truth = generate_trajectory(&spec, &topology)?
                .iter()
                .map(|f| f.transformed(&to_camera, &topology))
                .collect::<Vec<_>>();
            if first_frame_visible(&truth[0], &topology, &config, &camera_pose) {
                break;
            }
            if attempt + 1 == START_ATTEMPTS {
                return Err(Error::InfeasibleTrajectory {
                    frame: 0,
                    reason: "no start pose with all endcaps visible".into(),
                });
            }
        }
        let mut occlusions = config.occlusions.clone();
        let n = &config.noise;
        if n.occlusion_episodes > 0
            && n.occlusion_frames > 0
            && truth.len() > n.occlusion_frames + 1
        {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[4]));
            for _ in 0..n.occlusion_episodes {
                occlusions.push(Occlusion {
                    endcap: rng.random_range(0..topology.n_endcaps()),
                    start: rng.random_range(1..truth.len() - n.occlusion_frames),
                    frames: n.occlusion_frames,
                });
            }
        }
        Ok(Self {
            config,
            topology,
            camera_pose,
            truth,
            occlusions,
        })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.config.camera.intrinsics
    }

    pub fn extras(&self, frame: usize) -> SceneExtras {
        let occluders = self
            .occlusions
            .iter()
            .filter(|o| o.covers(frame))
            .map(|o| {
                let c = self.truth[frame].endcaps[o.endcap];
                let dist = c.norm();
                Occluder {
                    center: c * ((dist - self.config.occluder_offset) / dist),
                    radius: self.config.occluder_radius,
                }
            })
            .collect();
        SceneExtras {
            shaft_radius: self.config.shaft_radius,
            occluders,
        }
    }

    /// Endcap distances that the cable sensors see at `frame`.
    pub fn sensed_lengths(&self, frame: usize) -> Vec<f64> {
        let truth = &self.truth[frame];
        let Some(c) = self.config.crossing.filter(|c| frame >= c.start) else {
            return truth.cable_lengths.clone();
        };
        let topo = &self.topology;
        let seg = |r: usize| {
            let (a, b) = endcap_positions(&truth.poses[r], topo);
            Segment { a, b }
        };
        let cp = closest_points_between_segments(&seg(c.rod), &seg(c.other));
        let toward = (cp.on_second - cp.on_first) / cp.distance.max(1e-12);
        let progress = ((frame - c.start + 1) as f64 / c.ramp as f64).min(1.0);
        let shift = toward * (2.0 * cp.distance * progress);
        let (ea, eb) = topo.rod_endcaps[c.rod];
        let mut q = truth.endcaps.clone();
        q[ea] += shift;
        q[eb] += shift;
        topo.cables
            .iter()
            .map(|&(i, j)| (q[i] - q[j]).norm())
            .collect()
    }

    /// Endcap with the longest true path over `frames` frames from `start`.
    pub fn farthest_moving_endcap(&self, start: usize, frames: usize) -> usize {
        let end = (start + frames).min(self.len());
        (0..self.topology.n_endcaps())
            .map(|e| {
                let path: f64 = (start + 1..end)
                    .map(|f| (self.truth[f].endcaps[e] - self.truth[f - 1].endcaps[e]).norm())
                    .sum();
                (e, path)
            })
            .fold(
                (0, f64::NEG_INFINITY),
                |best, x| if x.1 > best.1 { x } else { best },
            )
            .0
    }

    pub fn cables(&self, frame: usize) -> CableMeasurements {
        simulate_cables(
            &self.sensed_lengths(frame),
            &self.topology,
            &self.config.noise,
            derive_seed(self.config.seed, &[2, frame as u64]),
        )
    }

    pub fn render(&self, frame: usize) -> RenderedFrame {
        let mut out = render_frame(
            &self.truth[frame],
            &self.topology,
            self.intrinsics(),
            &self.camera_pose,
            &self.config.noise,
            &self.extras(frame),
            derive_seed(self.config.seed, &[1]),
        );
        out.frame.cables = self.cables(frame);
        out.frame.timestamp = frame as f64 / self.config.frame_rate;
        out
    }

    pub fn observed_frame(&self, frame: usize) -> ObservedFrame {
        self.render(frame).frame
    }

    /// Ground truth as recorded, with rods randomly missing at the
    /// configured dropout rate.
    pub fn recorded_truth(&self, frame: usize) -> Vec<Option<RigidPose>> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &[3, frame as u64]));
        self.truth[frame]
            .poses
            .iter()
            .map(|p| {
                let drop =
                    self.config.truth_dropout > 0.0 && rng.random_bool(self.config.truth_dropout);
                (!drop).then_some(*p)
            })
            .collect()
    }

    /// Per-endcap pixel boxes from an unoccluded, noise-free first frame,
    /// padded by a few pixels.
    pub fn rois(&self) -> Vec<Roi> {
        const PAD: usize = 4;
        let intr = self.intrinsics();
        let clean = render_frame(
            &self.truth[0],
            &self.topology,
            intr,
            &self.camera_pose,
            &SimNoise::noise_free(),
            &SceneExtras {
                shaft_radius: self.config.shaft_radius,
                occluders: Vec::new(),
            },
            0,
        );
        (0..self.topology.n_endcaps())
            .map(|e| {
                let b = clean.label_box(Label::Endcap(e)).unwrap_or_else(|| {
                    let c = self.truth[0].endcaps[e];
                    let r = Vec3::repeat(self.topology.endcap_radius);
                    intr.project_box(&(c - r), &(c + r))
                        .unwrap_or_else(PixelBox::empty)
                });
                if b.is_empty() {
                    return b;
                }
                PixelBox {
                    u_min: b.u_min.saturating_sub(PAD),
                    v_min: b.v_min.saturating_sub(PAD),
                    u_max: (b.u_max + PAD).min(intr.width - 1),
                    v_max: (b.v_max + PAD).min(intr.height - 1),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Stat;

    fn topo() -> TensegrityTopology {
        TensegrityTopology::three_bar()
    }

    #[test]
    fn cable_noise_has_requested_spread() {
        let t = topo();
        let noise = SimNoise {
            cable_sigma: 0.01,
            ..SimNoise::noise_free()
        };
        let truth = vec![0.3; t.cables.len()];
        let mut per_cable = vec![Vec::new(); t.cables.len()];
        for f in 0..1000 {
            let m = simulate_cables(&truth, &t, &noise, derive_seed(5, &[f]));
            for (k, e) in t.cables.iter().enumerate() {
                per_cable[k].push(m[e] - 0.3);
            }
        }
        for samples in per_cable {
            let s = Stat::of(&samples);
            assert!((0.008..=0.012).contains(&s.std), "std {}", s.std);
        }
    }

    #[test]
    fn noise_free_cables_are_exact() {
        let t = topo();
        let truth: Vec<f64> = (0..t.cables.len()).map(|k| 0.2 + 0.01 * k as f64).collect();
        let m = simulate_cables(&truth, &t, &SimNoise::noise_free(), 1);
        for (k, e) in t.cables.iter().enumerate() {
            assert_eq!(m[e], truth[k]);
        }
    }

    #[test]
    fn camera_frame_truth_sits_in_front_of_the_camera() {
        let mut cfg = SimConfig::rolling(3, false);
        cfg.trajectory.frames = 10;
        let sim = Simulation::new(cfg, topo()).unwrap();
        for f in &sim.truth {
            for q in &f.endcaps {
                assert!(q.z > 0.8 && q.z < 1.2, "{q:?}");
                let (u, v) = sim.intrinsics().project(q).unwrap();
                assert!(u > 0.0 && u < 1280.0 && v > 0.0 && v < 720.0);
            }
        }
    }

    #[test]
    fn rois_contain_projected_endcaps() {
        let mut cfg = SimConfig::rolling(4, true);
        cfg.trajectory.frames = 1;
        cfg.camera.intrinsics = CameraIntrinsics::hd720().downscaled(2);
        let sim = Simulation::new(cfg, topo()).unwrap();
        for (e, roi) in sim.rois().iter().enumerate() {
            let (u, v) = sim.intrinsics().project(&sim.truth[0].endcaps[e]).unwrap();
            assert!(
                roi.contains(u.round() as usize, v.round() as usize),
                "endcap {e}"
            );
        }
    }

    #[test]
    fn crossing_readings_mirror_the_rod() {
        let mut cfg = SimConfig::crossing(0);
        cfg.camera.intrinsics = CameraIntrinsics::hd720().downscaled(4);
        let sim = Simulation::new(cfg, topo()).unwrap();
        assert_eq!(sim.sensed_lengths(0), sim.truth[0].cable_lengths);
        let end = sim.sensed_lengths(39);
        assert!(end
            .iter()
            .zip(&sim.truth[39].cable_lengths)
            .any(|(a, b)| (a - b).abs() > 1e-3));
        // Cables between green and blue are untouched.
        let k = topo().cables.iter().position(|&c| c == (2, 4)).unwrap();
        assert_eq!(end[k], sim.truth[39].cable_lengths[k]);
    }

    #[test]
    fn truth_dropout_removes_rods() {
        let mut cfg = SimConfig::rolling(0, false);
        cfg.trajectory.frames = 200;
        cfg.truth_dropout = 0.5;
        cfg.camera.intrinsics = CameraIntrinsics::hd720().downscaled(4);
        let sim = Simulation::new(cfg, topo()).unwrap();
        let missing: usize = (0..200)
            .map(|f| sim.recorded_truth(f).iter().filter(|p| p.is_none()).count())
            .sum();
        assert!((200..400).contains(&missing), "{missing}");
    }
}
