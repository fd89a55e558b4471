use crate::geometry::{RigidPose, Vec3};
use crate::perception::{filter_endcap_noise, unproject, CameraIntrinsics, ObservedFrame};
use crate::robot_model::{endcap_positions, TensegrityTopology};

/// Color-gated camera-frame points near each endcap's previous position,
/// collected once per frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameCandidates {
    pub points: Vec<Vec<Vec3>>,
}

/// What one registration pass saw of one endcap.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EndcapObservation {
    pub endcap: usize,
    /// Distance- and depth-filtered observed points.
    pub points: Vec<Vec3>,
    /// Model points facing the camera at the current estimate.
    pub visible: usize,
    /// Visible model points that found a correspondence.
    pub matched: usize,
    /// `matched / visible`, clamped to `[0, 1]`.
    pub ratio: f64,
}

/// For every endcap, the pixels matching its color within `radius` of its
/// center under `poses`, back-projected. Only the pixel window covering that
/// ball is scanned.
pub fn gather_candidates(
    frame: &ObservedFrame,
    intrinsics: &CameraIntrinsics,
    topology: &TensegrityTopology,
    poses: &[RigidPose],
    radius: f64,
) -> FrameCandidates {
    let mut points = vec![Vec::new(); topology.n_endcaps()];
    for (rod, pose) in poses.iter().enumerate() {
        let (a, b) = endcap_positions(pose, topology);
        let (ea, eb) = topology.rod_endcaps[rod];
        for (e, c) in [(ea, a), (eb, b)] {
            let r = Vec3::repeat(radius);
            let Some(window) = intrinsics.project_box(&(c - r), &(c + r)) else {
                continue;
            };
            if window.is_empty() {
                continue;
            }
            let range = &topology.endcap_hsv[e];
            let r2 = radius * radius;
            let out = &mut points[e];
            for v in window.v_min..=window.v_max {
                for u in window.u_min..=window.u_max {
                    let i = frame.index(u, v);
                    if !range.contains_bytes(frame.hsv[i]) {
                        continue;
                    }
                    if let Some(p) = unproject(intrinsics, u, v, frame.depth[i]) {
                        if (p - c).norm_squared() <= r2 {
                            out.push(p);
                        }
                    }
                }
            }
        }
    }
    FrameCandidates { points }
}

/// Candidates within `d_max + endcap_radius` of `center`, then the depth
/// window rule.
pub fn observe_endcap(
    candidates: &[Vec3],
    center: &Vec3,
    d_max: f64,
    endcap_radius: f64,
) -> Vec<Vec3> {
    let reach = d_max + endcap_radius;
    let near: Vec<Vec3> = candidates
        .iter()
        .filter(|p| (*p - center).norm_squared() <= reach * reach)
        .copied()
        .collect();
    filter_endcap_noise(&near, endcap_radius)
}
