use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{closest_points_between_segments, RigidPose, Rotation, Segment, Vec3};
use crate::robot_model::{endcap_positions, pose_from_endcaps, TensegrityTopology};

/// Per-frame rigid velocity of one rod about its own center (world frame).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RodTwist {
    /// Rotation vector (radians).
    pub angular: [f64; 3],
    /// Meters per frame.
    pub linear: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Gait {
    Static,
    /// Barrel roll about the prism axis while translating `step` meters per
    /// frame; the body spins at half the no-slip rate.
    Roll {
        step: f64,
    },
    /// Explicit per-frame, per-rod twists; frame `k` uses entry `k - 1` and
    /// frames past the end of the script stand still.
    Twists {
        steps: Vec<Vec<RodTwist>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    pub frames: usize,
    pub gait: Gait,
    pub seed: u64,
    /// Max per-endcap displacement between frames (meters).
    pub displacement_cap: f64,
    /// Distance between the two triangles of the prism (meters).
    pub prism_height: f64,
    /// Angular offset between top and bottom triangles (degrees).
    pub prism_twist_deg: f64,
    /// Amplitude of the periodic twist change that deforms the shape.
    pub shape_amplitude_deg: f64,
    pub shape_period_frames: f64,
    /// Max |heading| of the rolling direction from +x (degrees).
    pub max_heading_deg: f64,
    /// Max tilt of the prism axis away from the rolling axis (degrees).
    pub max_tumble_deg: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            frames: 100,
            gait: Gait::Roll { step: 0.01 },
            seed: 0,
            displacement_cap: 0.02,
            prism_height: 0.2,
            prism_twist_deg: 150.0,
            shape_amplitude_deg: 6.0,
            shape_period_frames: 40.0,
            max_heading_deg: 20.0,
            max_tumble_deg: 10.0,
        }
    }
}

impl TrajectorySpec {
    pub fn validate(&self, topology: &TensegrityTopology) -> Result<()> {
        let bad = |f: &str, why: &str| Err(Error::InvalidArgument(format!("{f}: {why}")));
        if self.frames == 0 {
            return bad("frames", "must be at least 1");
        }
        if !(self.displacement_cap > 0.0) {
            return bad("displacement_cap", "must be positive");
        }
        if !(self.prism_height > 0.0 && self.prism_height < topology.rod_length) {
            return bad(
                "prism_height",
                "must lie strictly between 0 and the rod length",
            );
        }
        let lo = self.prism_twist_deg - self.shape_amplitude_deg.abs();
        let hi = self.prism_twist_deg + self.shape_amplitude_deg.abs();
        if !(lo > 0.0 && hi < 180.0) {
            return bad("prism_twist_deg", "twist range must stay inside (0, 180)");
        }
        if !(self.shape_period_frames > 0.0) {
            return bad("shape_period_frames", "must be positive");
        }
        if let Gait::Roll { step } = self.gait {
            if !(step >= 0.0) {
                return bad("gait.step", "must be non-negative");
            }
        }
        Ok(())
    }
}

/// True state of one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub frame: usize,
    pub poses: Vec<RigidPose>,
    /// Indexed by endcap.
    pub endcaps: Vec<Vec3>,
    /// True endcap distance per cable, topology order.
    pub cable_lengths: Vec<f64>,
}

impl GroundTruthFrame {
    pub fn from_poses(frame: usize, poses: Vec<RigidPose>, topology: &TensegrityTopology) -> Self {
        let endcaps = crate::tracker::poses_to_endcaps(&poses, topology);
        let cable_lengths = topology
            .cables
            .iter()
            .map(|&(i, j)| (endcaps[i] - endcaps[j]).norm())
            .collect();
        Self {
            frame,
            poses,
            endcaps,
            cable_lengths,
        }
    }

    /// Re-express in another frame: `transform` maps this frame's
    /// coordinates into the target's.
    pub fn transformed(&self, transform: &RigidPose, topology: &TensegrityTopology) -> Self {
        let poses = self.poses.iter().map(|p| transform.compose(p)).collect();
        Self::from_poses(self.frame, poses, topology)
    }

    /// Smallest axis-to-axis distance over all rod pairs.
    pub fn min_rod_distance(&self, topology: &TensegrityTopology) -> f64 {
        min_rod_distance(&self.poses, topology)
    }
}

pub fn min_rod_distance(poses: &[RigidPose], topology: &TensegrityTopology) -> f64 {
    let segs: Vec<Segment> = poses
        .iter()
        .map(|p| {
            let (a, b) = endcap_positions(p, topology);
            Segment { a, b }
        })
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..segs.len() {
        for j in (i + 1)..segs.len() {
            best = best.min(closest_points_between_segments(&segs[i], &segs[j]).distance);
        }
    }
    best
}

/// Prism endcaps in the body frame: axis along body z, centroid at origin.
/// Rod `k` runs from bottom vertex `k` (second endcap) to top vertex `k`
/// (first endcap).
fn prism_endcaps(topology: &TensegrityTopology, height: f64, twist: f64) -> Vec<Vec3> {
    let l = topology.rod_length;
    let radius = ((l * l - height * height) / (2.0 * (1.0 - twist.cos()))).sqrt();
    let mut q = vec![Vec3::zeros(); topology.n_endcaps()];
    for (k, &(top, bottom)) in topology.rod_endcaps.iter().enumerate() {
        let base = TAU * k as f64 / topology.n_rods as f64;
        q[bottom] = Vec3::new(radius * base.cos(), radius * base.sin(), -height / 2.0);
        q[top] = Vec3::new(
            radius * (base + twist).cos(),
            radius * (base + twist).sin(),
            height / 2.0,
        );
    }
    q
}

fn poses_from(
    q: &[Vec3],
    previous: Option<&[RigidPose]>,
    topology: &TensegrityTopology,
) -> Result<Vec<RigidPose>> {
    topology
        .rod_endcaps
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let prev = previous.map_or(Rotation::identity(), |p| p[k].rotation);
            pose_from_endcaps(&q[a], &q[b], &prev, topology)
        })
        .collect()
}

fn max_displacement(a: &[RigidPose], b: &[RigidPose], topology: &TensegrityTopology) -> f64 {
    let qa = crate::tracker::poses_to_endcaps(a, topology);
    let qb = crate::tracker::poses_to_endcaps(b, topology);
    qa.iter()
        .zip(&qb)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Lowest endcap center height.
fn min_height(poses: &[RigidPose], topology: &TensegrityTopology) -> f64 {
    crate::tracker::poses_to_endcaps(poses, topology)
        .iter()
        .map(|p| p.z)
        .fold(f64::INFINITY, f64::min)
}

struct RollState {
    position: Vec3,
    roll: f64,
    twist: f64,
}

/// Kinematically feasible ground-truth sequence in the world frame (ground
/// is `z = 0`).
pub fn generate_trajectory(
    spec: &TrajectorySpec,
    topology: &TensegrityTopology,
) -> Result<Vec<GroundTruthFrame>> {
    spec.validate(topology)?;
    let clearance = topology.rod_diameter / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let heading = rng.random_range(-1.0..=1.0) * spec.max_heading_deg.to_radians();
    let tumble = rng.random_range(-1.0..=1.0) * spec.max_tumble_deg.to_radians();
    let phase = rng.random_range(0.0..TAU);
    let shape_phase = rng.random_range(0.0..TAU);

    let dir = Vec3::new(heading.cos(), heading.sin(), 0.0);
    let roll_axis = Vec3::new(-heading.sin(), heading.cos(), 0.0);
    // Body z onto the rolling axis, spun by `phase`, tilted by `tumble`.
    let base = Rotation::from_axis_angle(&nalgebra::Unit::new_normalize(Vec3::z()), heading)
        * Rotation::from_axis_angle(&nalgebra::Unit::new_normalize(Vec3::z()), tumble)
        * Rotation::from_axis_angle(
            &nalgebra::Unit::new_normalize(Vec3::x()),
            -std::f64::consts::FRAC_PI_2,
        )
        * Rotation::from_axis_angle(&nalgebra::Unit::new_normalize(Vec3::z()), phase);

    let twist_at = |f: f64| {
        (spec.prism_twist_deg
            + spec.shape_amplitude_deg * (TAU * f / spec.shape_period_frames + shape_phase).sin())
        .to_radians()
    };
    let build = |s: &RollState, previous: Option<&[RigidPose]>| -> Result<Vec<RigidPose>> {
        let body = prism_endcaps(topology, spec.prism_height, s.twist);
        let rot =
            Rotation::from_axis_angle(&nalgebra::Unit::new_normalize(roll_axis), s.roll) * base;
        let q: Vec<Vec3> = body.iter().map(|p| rot * p + s.position).collect();
        let mut poses = poses_from(&q, previous, topology)?;
        // Settle onto the ground.
        let lift = clearance - min_height(&poses, topology);
        for p in &mut poses {
            p.translation.z += lift;
        }
        Ok(poses)
    };

    let travel = match &spec.gait {
        Gait::Roll { step } => step * (spec.frames.saturating_sub(1)) as f64,
        _ => 0.0,
    };
    let mut state = RollState {
        position: -dir * (travel / 2.0),
        roll: 0.0,
        twist: twist_at(0.0),
    };
    let mut poses = build(&state, None)?;
    if min_rod_distance(&poses, topology) < topology.rod_diameter {
        return Err(Error::InfeasibleTrajectory {
            frame: 0,
            reason: "rods of the initial shape intersect".into(),
        });
    }
    let mut frames = vec![GroundTruthFrame::from_poses(0, poses.clone(), topology)];

    let r_max = prism_endcaps(topology, spec.prism_height, twist_at(0.0))
        .iter()
        .map(|p| p.xy().norm())
        .fold(0.0, f64::max);

    for f in 1..spec.frames {
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..100 {
            let candidate = match &spec.gait {
                Gait::Static => poses.clone(),
                Gait::Roll { step } => {
                    let next = RollState {
                        position: state.position + dir * (step * scale),
                        roll: state.roll + 0.5 * step * scale / r_max,
                        twist: state.twist + scale * (twist_at(f as f64) - state.twist),
                    };
                    let p = build(&next, Some(&poses))?;
                    if feasible(&poses, &p, spec, topology) {
                        state = next;
                        accepted = Some(p);
                        break;
                    }
                    scale *= 0.5;
                    continue;
                }
                Gait::Twists { steps } => {
                    let twists = steps.get(f - 1);
                    apply_twists(
                        &poses,
                        twists.map(|t| t.as_slice()),
                        scale,
                        clearance,
                        topology,
                    )
                }
            };
            if feasible(&poses, &candidate, spec, topology) {
                accepted = Some(candidate);
                break;
            }
            scale *= 0.5;
        }
        poses = accepted.ok_or_else(|| Error::InfeasibleTrajectory {
            frame: f,
            reason: "no feasible step after 100 bisections".into(),
        })?;
        frames.push(GroundTruthFrame::from_poses(f, poses.clone(), topology));
    }
    Ok(frames)
}

fn feasible(
    prev: &[RigidPose],
    next: &[RigidPose],
    spec: &TrajectorySpec,
    topology: &TensegrityTopology,
) -> bool {
    max_displacement(prev, next, topology) <= spec.displacement_cap * (1.0 + 1e-9)
        && min_rod_distance(next, topology) >= topology.rod_diameter
        && min_height(next, topology) >= topology.rod_diameter / 2.0 - 1e-12
}

fn apply_twists(
    poses: &[RigidPose],
    twists: Option<&[RodTwist]>,
    scale: f64,
    clearance: f64,
    topology: &TensegrityTopology,
) -> Vec<RigidPose> {
    poses
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let t = twists.and_then(|t| t.get(k)).copied().unwrap_or_default();
            let w = Vec3::from(t.angular) * scale;
            let mut next = RigidPose::new(
                Rotation::from_scaled_axis(w) * p.rotation,
                p.translation + Vec3::from(t.linear) * scale,
            );
            // Lift the rod out of the ground.
            let (a, b) = endcap_positions(&next, topology);
            let low = a.z.min(b.z);
            if low < clearance {
                next.translation.z += clearance - low;
            }
            next
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo() -> TensegrityTopology {
        TensegrityTopology::three_bar()
    }

    #[test]
    fn prism_has_rod_length() {
        let t = topo();
        let q = prism_endcaps(&t, 0.2, 150f64.to_radians());
        for &(a, b) in &t.rod_endcaps {
            assert!(((q[a] - q[b]).norm() - t.rod_length).abs() < 1e-12);
        }
    }

    #[test]
    fn static_frames_are_identical() {
        let spec = TrajectorySpec {
            frames: 50,
            gait: Gait::Static,
            ..Default::default()
        };
        let frames = generate_trajectory(&spec, &topo()).unwrap();
        assert_eq!(frames.len(), 50);
        assert!(frames.iter().all(|f| f.poses == frames[0].poses));
    }

    #[test]
    fn roll_covers_the_scripted_distance() {
        let t = topo();
        let spec = TrajectorySpec::default();
        let frames = generate_trajectory(&spec, &t).unwrap();
        let com = |f: &GroundTruthFrame| f.poses.iter().map(|p| p.translation).sum::<Vec3>() / 3.0;
        let travel = (com(&frames[99]) - com(&frames[0])).xy().norm();
        assert!((travel - 0.99).abs() < 0.1, "travel {travel}");
        for w in frames.windows(2) {
            assert!(max_displacement(&w[0].poses, &w[1].poses, &t) <= 0.02 + 1e-12);
        }
        for f in &frames {
            assert!(f.min_rod_distance(&t) >= t.rod_diameter);
            assert!(min_height(&f.poses, &t) >= t.rod_diameter / 2.0 - 1e-12);
            for &(a, b) in &t.rod_endcaps {
                assert!(((f.endcaps[a] - f.endcaps[b]).norm() - t.rod_length).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ground_projection_engages() {
        let t = topo();
        let down = RodTwist {
            angular: [0.0, 0.0, 0.0],
            linear: [0.0, 0.0, -0.01],
        };
        let spec = TrajectorySpec {
            frames: 30,
            gait: Gait::Twists {
                steps: vec![vec![down, RodTwist::default(), RodTwist::default()]; 29],
            },
            ..Default::default()
        };
        let frames = generate_trajectory(&spec, &t).unwrap();
        for f in &frames {
            assert!(min_height(&f.poses, &t) >= t.rod_diameter / 2.0 - 1e-12);
        }
    }

    #[test]
    fn impossible_shape_is_rejected() {
        let spec = TrajectorySpec {
            prism_twist_deg: 178.0,
            shape_amplitude_deg: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            generate_trajectory(&spec, &topo()),
            Err(Error::InfeasibleTrajectory { frame: 0, .. })
        ));
    }
}
