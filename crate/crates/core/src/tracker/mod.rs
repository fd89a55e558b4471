//! Per-frame tracking loop.
//!
//! Every frame alternates a per-rod registration step (transition) with a
//! joint constrained optimization over all endcap positions (correction).
//! The baselines share the same building blocks and differ only in how they
//! are chained, see [`TrackerMode`] and [`Ablation`].

mod correction;
mod observe;
mod rigid;
mod transition;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    closest_points_between_segments, minimal_rotation_between, RigidPose, Segment, Vec3,
};
use crate::perception::{
    filter_endcap_noise, fit_ground_plane, segment_endcap_pixels, unproject, CameraIntrinsics,
    DmaxSchedule, GroundPlane, ObservedFrame, RansacConfig, Roi,
};
use crate::robot_model::{
    endcap_positions, pose_from_endcaps, sample_endcap_model, EndcapModel, TensegrityTopology,
};
use crate::solver::SolverConfig;

pub use correction::{
    build_constraints, compute_adaptive_weights, correction_problem, correction_step,
    AdaptiveWeights, ConstraintSet, ConstraintViolations, CorrectionOutput, RodPairConstraint,
};
pub use observe::{gather_candidates, observe_endcap, EndcapObservation, FrameCandidates};
pub use rigid::shape_presolve;
pub use transition::{transition_step, TransitionInput, TransitionOutput};

/// How transition and correction steps are chained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackerMode {
    /// Interleaved transition and correction every outer iteration.
    Proposed,
    /// Per-rod registration only.
    NaiveIcp,
    /// Shape from cable lengths, then whole-robot registration.
    RigidBody,
    /// All registration iterations first, one correction at the end.
    PostHocCorrection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Proposed,
    NaiveIcp,
    RigidBody,
    PostHocCorrection,
    NoConstraints,
    NoRodConstraints,
    StaticWeights,
}

impl Ablation {
    pub const ALL: [Ablation; 7] = [
        Ablation::Proposed,
        Ablation::NaiveIcp,
        Ablation::RigidBody,
        Ablation::PostHocCorrection,
        Ablation::NoConstraints,
        Ablation::NoRodConstraints,
        Ablation::StaticWeights,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Proposed => "proposed",
            Ablation::NaiveIcp => "naive_icp",
            Ablation::RigidBody => "rigid_body",
            Ablation::PostHocCorrection => "post_hoc_correction",
            Ablation::NoConstraints => "no_constraints",
            Ablation::NoRodConstraints => "no_rod_constraints",
            Ablation::StaticWeights => "static_weights",
        }
    }

    /// The configuration this variant runs with, derived from `base`.
    pub fn apply(self, base: &TrackerConfig) -> TrackerConfig {
        let mut c = base.clone();
        match self {
            Ablation::Proposed => {}
            Ablation::NaiveIcp => {
                c.mode = TrackerMode::NaiveIcp;
                c.enable_binary_loss = false;
                c.enable_rod_constraints = false;
                c.enable_ground_constraint = false;
            }
            Ablation::RigidBody => c.mode = TrackerMode::RigidBody,
            Ablation::PostHocCorrection => c.mode = TrackerMode::PostHocCorrection,
            Ablation::NoConstraints => {
                c.enable_rod_constraints = false;
                c.enable_ground_constraint = false;
            }
            Ablation::NoRodConstraints => c.enable_rod_constraints = false,
            Ablation::StaticWeights => c.weights.static_binary = Some(0.25),
        }
        c
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Ablation::ALL.iter().map(|a| a.name()).collect();
                Error::InvalidArgument(format!("unknown ablation {s:?}, expected one of {names:?}"))
            })
    }
}

/// Coefficients of the visibility-driven weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightParams {
    pub unary_floor: f64,
    pub binary_scale: f64,
    /// Both ratios above this: cable term off.
    pub high_ratio: f64,
    /// Either ratio below this: cable term at full scale.
    pub low_ratio: f64,
    /// Replace every cable weight by this constant.
    pub static_binary: Option<f64>,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            unary_floor: 0.1,
            binary_scale: 0.25,
            high_ratio: 0.5,
            low_ratio: 0.2,
            static_binary: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub max_outer_iterations: usize,
    /// Stop when the summed endcap displacement of an outer iteration drops
    /// below this (meters).
    pub convergence_tol: f64,
    pub dmax: DmaxSchedule,
    pub dummy_count: usize,
    pub weights: WeightParams,
    pub enable_rod_constraints: bool,
    pub enable_ground_constraint: bool,
    pub enable_binary_loss: bool,
    pub mode: TrackerMode,
    pub model_samples: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub ransac: RansacConfig,
    /// Pixel stride when collecting ground-plane candidates on frame 0.
    pub ground_stride: usize,
    /// Extra search radius around the previous endcap positions when
    /// collecting a frame's candidate points (meters).
    pub window_margin: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            max_outer_iterations: 6,
            convergence_tol: 1e-4,
            dmax: DmaxSchedule::default(),
            dummy_count: 50,
            weights: WeightParams::default(),
            enable_rod_constraints: true,
            enable_ground_constraint: true,
            enable_binary_loss: true,
            mode: TrackerMode::Proposed,
            model_samples: 200,
            seed: 0,
            solver: SolverConfig::default(),
            ransac: RansacConfig::default(),
            ground_stride: 4,
            window_margin: 0.05,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::InvalidArgument(format!("{field}: {why}")));
        if self.max_outer_iterations == 0 {
            return bad("max_outer_iterations", "must be at least 1");
        }
        if !(self.convergence_tol >= 0.0) {
            return bad("convergence_tol", "must be non-negative");
        }
        if !(self.dmax.initial > 0.0 && self.dmax.floor > 0.0) {
            return bad("dmax", "initial and floor must be positive");
        }
        if !(self.dmax.decay > 0.0 && self.dmax.decay <= 1.0) {
            return bad("dmax.decay", "must lie in (0, 1]");
        }
        if self.model_samples < 100 {
            return bad("model_samples", "must be at least 100");
        }
        if self.ground_stride == 0 {
            return bad("ground_stride", "must be at least 1");
        }
        if !(self.window_margin >= 0.0) {
            return bad("window_margin", "must be non-negative");
        }
        let w = &self.weights;
        if !(w.unary_floor > 0.0 && w.binary_scale >= 0.0 && w.low_ratio <= w.high_ratio) {
            return bad(
                "weights",
                "need unary_floor > 0, binary_scale ≥ 0, low_ratio ≤ high_ratio",
            );
        }
        if let Some(s) = w.static_binary {
            if !(s >= 0.0) {
                return bad("weights.static_binary", "must be non-negative");
            }
        }
        Ok(())
    }
}

/// Closest pair between two rod axes, remembered in rod-local coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosestPair {
    pub rods: (usize, usize),
    /// Local z of the closest point on each rod's axis.
    pub local_z: (f64, f64),
    /// Unit vector from the first rod's point to the second's.
    pub direction: Vec3,
    pub distance: f64,
    /// Both closest points are rod endpoints.
    pub at_endpoints: bool,
}

impl ClosestPair {
    /// Whether the linearized separation constraint applies to this pair.
    pub fn constrained(&self) -> bool {
        !self.at_endpoints && self.distance > 1e-9
    }
}

/// Closest axis pairs for every rod pair `i < j`.
pub fn closest_pairs(poses: &[RigidPose], topology: &TensegrityTopology) -> Vec<ClosestPair> {
    let l = topology.rod_length;
    let axes: Vec<(Vec3, Vec3)> = poses
        .iter()
        .map(|p| endcap_positions(p, topology))
        .collect();
    let end = |s: f64| s <= 1e-9 || s >= 1.0 - 1e-9;
    let mut out = Vec::new();
    for i in 0..poses.len() {
        for j in (i + 1)..poses.len() {
            let si = Segment {
                a: axes[i].0,
                b: axes[i].1,
            };
            let sj = Segment {
                a: axes[j].0,
                b: axes[j].1,
            };
            let cp = closest_points_between_segments(&si, &sj);
            let d = cp.on_second - cp.on_first;
            let direction = if cp.distance > 1e-12 {
                d / cp.distance
            } else {
                Vec3::zeros()
            };
            out.push(ClosestPair {
                rods: (i, j),
                local_z: (l / 2.0 - cp.s * l, l / 2.0 - cp.t * l),
                direction,
                distance: cp.distance,
                at_endpoints: end(cp.s) && end(cp.t),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    /// Index of the frame these poses belong to.
    pub frame: usize,
    pub poses: Vec<RigidPose>,
    pub closest_pairs: Vec<ClosestPair>,
    pub ground: Option<GroundPlane>,
}

impl TrackerState {
    pub fn from_poses(frame: usize, poses: Vec<RigidPose>, topology: &TensegrityTopology) -> Self {
        let closest_pairs = closest_pairs(&poses, topology);
        Self {
            frame,
            poses,
            closest_pairs,
            ground: None,
        }
    }

    /// All endcap centers, indexed by endcap.
    pub fn endcaps(&self, topology: &TensegrityTopology) -> Vec<Vec3> {
        poses_to_endcaps(&self.poses, topology)
    }
}

pub fn poses_to_endcaps(poses: &[RigidPose], topology: &TensegrityTopology) -> Vec<Vec3> {
    let mut q = vec![Vec3::zeros(); topology.n_endcaps()];
    for (rod, pose) in poses.iter().enumerate() {
        let (a, b) = endcap_positions(pose, topology);
        let (ea, eb) = topology.rod_endcaps[rod];
        q[ea] = a;
        q[eb] = b;
    }
    q
}

/// Rod poses from endcap centers, twist chosen closest to `previous`.
pub fn endcaps_to_poses(
    q: &[Vec3],
    previous: &[RigidPose],
    topology: &TensegrityTopology,
) -> Result<Vec<RigidPose>> {
    topology
        .rod_endcaps
        .iter()
        .zip(previous)
        .map(|(&(a, b), prev)| pose_from_endcaps(&q[a], &q[b], &prev.rotation, topology))
        .collect()
}

/// Points whose depth is within `band` of the median depth.
fn median_depth_gate(points: Vec<Vec3>, band: f64) -> Vec<Vec3> {
    if points.is_empty() {
        return points;
    }
    let mut z: Vec<f64> = points.iter().map(|p| p.z).collect();
    let mid = z.len() / 2;
    let median = *z.select_nth_unstable_by(mid, f64::total_cmp).1;
    points
        .into_iter()
        .filter(|p| (p.z - median).abs() <= band)
        .collect()
}

/// Centroid of the noise-filtered colored points of one endcap in its RoI.
///
/// Without a previous estimate to gate against, points further than two
/// radii in depth from the median are dropped first so a single stray
/// colored pixel cannot anchor the depth window.
pub fn endcap_centroid(
    frame: &ObservedFrame,
    intrinsics: &CameraIntrinsics,
    topology: &TensegrityTopology,
    endcap: usize,
    roi: &Roi,
) -> Result<Vec3> {
    let points: Vec<Vec3> = segment_endcap_pixels(frame, &topology.endcap_hsv[endcap], Some(roi))
        .into_iter()
        .filter_map(|(u, v)| unproject(intrinsics, u, v, frame.depth[frame.index(u, v)]))
        .collect();
    let points = median_depth_gate(points, 2.0 * topology.endcap_radius);
    let filtered = filter_endcap_noise(&points, topology.endcap_radius);
    if filtered.len() < 5 {
        return Err(Error::InitializationFailure {
            endcap,
            points: filtered.len(),
        });
    }
    Ok(filtered.iter().sum::<Vec3>() / filtered.len() as f64)
}

/// Initial rod poses from the endcap centroids inside the first frame's
/// RoIs. The twist about each axis is the zero-twist rotation from `+z`.
pub fn initialize_from_rois(
    frame: &ObservedFrame,
    rois: &[Roi],
    intrinsics: &CameraIntrinsics,
    topology: &TensegrityTopology,
) -> Result<TrackerState> {
    if rois.len() != topology.n_endcaps() {
        return Err(Error::InvalidArgument(format!(
            "{} RoIs for {} endcaps",
            rois.len(),
            topology.n_endcaps()
        )));
    }
    let centroids = (0..topology.n_endcaps())
        .map(|e| endcap_centroid(frame, intrinsics, topology, e, &rois[e]))
        .collect::<Result<Vec<_>>>()?;
    let poses = topology
        .rod_endcaps
        .iter()
        .map(|&(a, b)| {
            let axis = centroids[a] - centroids[b];
            let rotation = minimal_rotation_between(&Vec3::z(), &axis).map_err(|_| {
                Error::InitializationFailure {
                    endcap: a,
                    points: 0,
                }
            })?;
            Ok(RigidPose::new(
                rotation,
                (centroids[a] + centroids[b]) / 2.0,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrackerState::from_poses(0, poses, topology))
}

/// RANSAC ground plane on a strided subset of the frame's valid depths.
pub fn detect_ground_strided(
    frame: &ObservedFrame,
    intrinsics: &CameraIntrinsics,
    config: &RansacConfig,
    stride: usize,
) -> Result<GroundPlane> {
    let stride = stride.max(1);
    let mut points = Vec::new();
    for v in (0..frame.height).step_by(stride) {
        for u in (0..frame.width).step_by(stride) {
            if let Some(p) = unproject(intrinsics, u, v, frame.depth[frame.index(u, v)]) {
                points.push(p);
            }
        }
    }
    fit_ground_plane(&points, config)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    pub d_max: f64,
    /// Real (non-dummy) correspondences per rod.
    pub correspondences: Vec<usize>,
    pub objective: Option<f64>,
    pub solver_iterations: Option<usize>,
    pub solver_converged: Option<bool>,
    /// Summed endcap displacement over this iteration (meters).
    pub displacement: f64,
}

/// Wall-clock timings; kept out of the serialized diagnostics so that the
/// diagnostic stream is reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameTiming {
    pub transition_ms: Vec<f64>,
    pub correction_ms: Vec<f64>,
    pub total_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub frame: usize,
    pub iterations: Vec<IterationDiagnostics>,
    /// Visibility ratio per endcap from the last registration.
    pub visibility: Vec<f64>,
    pub unary_weights: Vec<f64>,
    pub binary_weights: Vec<f64>,
    /// Violations of the full constraint family at the output poses.
    pub violations: ConstraintViolations,
    #[serde(skip)]
    pub timing: FrameTiming,
}

/// Everything the per-frame loop needs besides the state.
pub struct TrackingContext<'a> {
    pub models: &'a [EndcapModel],
    pub intrinsics: &'a CameraIntrinsics,
    pub topology: &'a TensegrityTopology,
    pub config: &'a TrackerConfig,
}

fn total_displacement(a: &[RigidPose], b: &[RigidPose], topology: &TensegrityTopology) -> f64 {
    poses_to_endcaps(a, topology)
        .iter()
        .zip(poses_to_endcaps(b, topology))
        .map(|(x, y)| (x - y).norm())
        .sum()
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Track one frame starting from the state of the previous one.
pub fn track_frame(
    state: &TrackerState,
    frame: &ObservedFrame,
    frame_index: usize,
    ctx: &TrackingContext,
) -> Result<(TrackerState, FrameDiagnostics)> {
    let start = Instant::now();
    let TrackingContext {
        models,
        intrinsics,
        topology,
        config,
    } = *ctx;
    let search = config.dmax.initial + topology.endcap_radius + config.window_margin;
    let candidates = gather_candidates(frame, intrinsics, topology, &state.poses, search);
    let constraints = build_constraints(state, topology, config);
    let mut diag = FrameDiagnostics {
        frame: frame_index,
        ..Default::default()
    };
    let ctx_err = |k: usize| format!("frame {frame_index}, iteration {k}");

    let mut poses = state.poses.clone();
    let mut last_weights: Option<AdaptiveWeights> = None;

    let input = |poses: &[RigidPose], iteration: usize| TransitionInput {
        current: poses.to_vec(),
        previous: &state.poses,
        candidates: &candidates,
        models,
        topology,
        config,
        iteration,
        frame_index,
    };

    if config.mode == TrackerMode::RigidBody {
        let t = Instant::now();
        let shape = shape_presolve(
            &poses_to_endcaps(&state.poses, topology),
            &frame.cables,
            topology,
            &config.solver,
        )
        .map_err(|e| e.with_context(&format!("frame {frame_index}, shape")))?;
        poses = endcaps_to_poses(&shape, &state.poses, topology)?;
        diag.timing.correction_ms.push(elapsed_ms(t));
        for k in 0..config.max_outer_iterations {
            let t = Instant::now();
            let out = rigid::whole_body_step(&input(&poses, k));
            diag.timing.transition_ms.push(elapsed_ms(t));
            let displacement = total_displacement(&poses, &out.poses, topology);
            diag.iterations.push(IterationDiagnostics {
                iteration: k,
                d_max: out.d_max,
                correspondences: out.correspondences.clone(),
                displacement,
                ..Default::default()
            });
            diag.visibility = out.observations.iter().map(|o| o.ratio).collect();
            poses = out.poses;
            if displacement < config.convergence_tol {
                break;
            }
        }
    } else {
        let correct_each = config.mode == TrackerMode::Proposed;
        for k in 0..config.max_outer_iterations {
            let t = Instant::now();
            let out = transition_step(&input(&poses, k));
            diag.timing.transition_ms.push(elapsed_ms(t));
            let mut it = IterationDiagnostics {
                iteration: k,
                d_max: out.d_max,
                correspondences: out.correspondences.clone(),
                ..Default::default()
            };
            diag.visibility = out.observations.iter().map(|o| o.ratio).collect();

            let next = if correct_each {
                let t = Instant::now();
                let weights = compute_adaptive_weights(&out.observations, topology, config);
                let q_hat = poses_to_endcaps(&out.poses, topology);
                let corr = correction_step(
                    &q_hat,
                    &weights,
                    &frame.cables,
                    &constraints,
                    topology,
                    &config.solver,
                )
                .map_err(|e| e.with_context(&ctx_err(k)))?;
                it.objective = Some(corr.result.objective);
                it.solver_iterations = Some(corr.result.iterations);
                it.solver_converged = Some(corr.result.converged);
                last_weights = Some(weights);
                let next = endcaps_to_poses(&corr.endcaps, &state.poses, topology)?;
                diag.timing.correction_ms.push(elapsed_ms(t));
                next
            } else {
                out.poses
            };
            it.displacement = total_displacement(&poses, &next, topology);
            let done = it.displacement < config.convergence_tol;
            diag.iterations.push(it);
            poses = next;
            if done {
                break;
            }
        }

        if config.mode == TrackerMode::PostHocCorrection {
            let t = Instant::now();
            let observations =
                transition::observe_all(&input(&poses, config.max_outer_iterations - 1));
            let weights = compute_adaptive_weights(&observations, topology, config);
            let q_hat = poses_to_endcaps(&poses, topology);
            let corr = correction_step(
                &q_hat,
                &weights,
                &frame.cables,
                &constraints,
                topology,
                &config.solver,
            )
            .map_err(|e| e.with_context(&ctx_err(config.max_outer_iterations)))?;
            if let Some(last) = diag.iterations.last_mut() {
                last.objective = Some(corr.result.objective);
                last.solver_iterations = Some(corr.result.iterations);
                last.solver_converged = Some(corr.result.converged);
            }
            last_weights = Some(weights);
            poses = endcaps_to_poses(&corr.endcaps, &state.poses, topology)?;
            diag.timing.correction_ms.push(elapsed_ms(t));
        }
    }

    // Resolve the unobservable twist against the previous frame.
    let q = poses_to_endcaps(&poses, topology);
    let poses = endcaps_to_poses(&q, &state.poses, topology)?;

    if let Some(w) = last_weights {
        diag.unary_weights = w.unary;
        diag.binary_weights = w.binary;
    }
    let full = ConstraintSet::full(state, topology);
    diag.violations = full.violations(&poses_to_endcaps(&poses, topology));

    let mut next = TrackerState::from_poses(frame_index, poses, topology);
    next.ground = state.ground;
    diag.timing.total_ms = elapsed_ms(start);
    Ok((next, diag))
}

/// Stateful wrapper: owns the models and the running state.
pub struct Tracker {
    pub config: TrackerConfig,
    pub topology: TensegrityTopology,
    pub intrinsics: CameraIntrinsics,
    pub models: Vec<EndcapModel>,
    state: TrackerState,
    next_frame: usize,
}

impl Tracker {
    /// Initialize from the first frame and its RoIs, then track that frame.
    pub fn new(
        frame0: &ObservedFrame,
        rois: &[Roi],
        intrinsics: CameraIntrinsics,
        topology: TensegrityTopology,
        config: TrackerConfig,
    ) -> Result<(Self, FrameDiagnostics)> {
        config.validate()?;
        topology.validate()?;
        intrinsics.validate()?;
        frame0.validate(&intrinsics, &topology.cables)?;
        let models = sample_endcap_model(&topology, config.model_samples, config.seed)?;
        let mut state = initialize_from_rois(frame0, rois, &intrinsics, &topology)?;
        if config.enable_ground_constraint {
            state.ground = Some(detect_ground_strided(
                frame0,
                &intrinsics,
                &config.ransac,
                config.ground_stride,
            )?);
        }
        let mut tracker = Self {
            config,
            topology,
            intrinsics,
            models,
            state,
            next_frame: 0,
        };
        let diag = tracker.track(frame0)?;
        Ok((tracker, diag))
    }

    pub fn track(&mut self, frame: &ObservedFrame) -> Result<FrameDiagnostics> {
        frame.validate(&self.intrinsics, &self.topology.cables)?;
        let ctx = TrackingContext {
            models: &self.models,
            intrinsics: &self.intrinsics,
            topology: &self.topology,
            config: &self.config,
        };
        let (state, diag) = track_frame(&self.state, frame, self.next_frame, &ctx)?;
        self.state = state;
        self.next_frame += 1;
        Ok(diag)
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    pub fn poses(&self) -> &[RigidPose] {
        &self.state.poses
    }

    pub fn endcaps(&self) -> Vec<Vec3> {
        self.state.endcaps(&self.topology)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;

    #[test]
    fn ablation_names_round_trip() {
        for a in Ablation::ALL {
            assert_eq!(a.name().parse::<Ablation>().unwrap(), a);
        }
        assert!("bogus".parse::<Ablation>().is_err());
    }

    #[test]
    fn ablation_matrix() {
        let base = TrackerConfig::default();
        let naive = Ablation::NaiveIcp.apply(&base);
        assert_eq!(naive.mode, TrackerMode::NaiveIcp);
        assert!(naive.dummy_count > 0);
        let nc = Ablation::NoConstraints.apply(&base);
        assert!(!nc.enable_rod_constraints && !nc.enable_ground_constraint);
        let nr = Ablation::NoRodConstraints.apply(&base);
        assert!(!nr.enable_rod_constraints && nr.enable_ground_constraint);
        assert_eq!(
            Ablation::StaticWeights.apply(&base).weights.static_binary,
            Some(0.25)
        );
        assert_eq!(Ablation::Proposed.apply(&base), base);
    }

    #[test]
    fn stray_near_point_is_gated_out() {
        let mut points: Vec<Vec3> = (0..20)
            .map(|i| Vec3::new(0.001 * i as f64, 0.0, 1.16 + 0.0005 * i as f64))
            .collect();
        points.push(Vec3::new(0.0, 0.0, 0.95));
        let kept = median_depth_gate(points, 0.035);
        assert_eq!(kept.len(), 20);
        assert!(kept.iter().all(|p| p.z > 1.0));
        assert!(median_depth_gate(Vec::new(), 0.035).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(TrackerConfig::default().validate().is_ok());
        let c = TrackerConfig {
            max_outer_iterations: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn closest_pair_cache_is_local() {
        let topo = TensegrityTopology::three_bar();
        let poses = vec![
            RigidPose::new(
                Rotation::from_scaled_axis(Vec3::new(std::f64::consts::FRAC_PI_2, 0.0, 0.0)),
                Vec3::new(0.0, 0.0, 1.0),
            ),
            RigidPose::new(
                Rotation::from_scaled_axis(Vec3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0)),
                Vec3::new(0.0, 0.0, 1.1),
            ),
            RigidPose::from_translation(Vec3::new(1.0, 0.0, 1.0)),
        ];
        let pairs = closest_pairs(&poses, &topo);
        assert_eq!(pairs.len(), 3);
        let p = pairs[0];
        assert!(p.local_z.0.abs() < 1e-9 && p.local_z.1.abs() < 1e-9);
        assert!((p.distance - 0.1).abs() < 1e-9);
        assert!((p.direction - Vec3::z()).norm() < 1e-9);
        assert!(p.constrained());
        for pair in &pairs {
            let h = topo.rod_length / 2.0 + 1e-12;
            assert!(pair.local_z.0.abs() <= h && pair.local_z.1.abs() <= h);
        }
    }
}
