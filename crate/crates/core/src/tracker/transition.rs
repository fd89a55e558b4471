use crate::geometry::{correspondence_weight, kabsch_weighted, Correspondence, RigidPose, Vec3};
use crate::perception::{add_dummy_points, dmax_schedule, match_nearest, visible_model_indices};
use crate::robot_model::{EndcapModel, TensegrityTopology};
use crate::seed::derive_seed;

use super::observe::{observe_endcap, EndcapObservation, FrameCandidates};
use super::TrackerConfig;

/// Inputs of one registration pass.
pub struct TransitionInput<'a> {
    /// Estimate being refined.
    pub current: Vec<RigidPose>,
    /// Output of the previous frame.
    pub previous: &'a [RigidPose],
    pub candidates: &'a FrameCandidates,
    pub models: &'a [EndcapModel],
    pub topology: &'a TensegrityTopology,
    pub config: &'a TrackerConfig,
    pub iteration: usize,
    pub frame_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionOutput {
    pub poses: Vec<RigidPose>,
    /// Indexed by endcap.
    pub observations: Vec<EndcapObservation>,
    /// Real correspondences per rod.
    pub correspondences: Vec<usize>,
    pub d_max: f64,
}

pub(super) struct EndcapMatch {
    pub observation: EndcapObservation,
    pub correspondences: Vec<Correspondence>,
}

/// Visible model points of one endcap at `pose` matched against its
/// filtered observation.
pub(super) fn match_endcap(
    input: &TransitionInput,
    endcap: usize,
    pose: &RigidPose,
    d_max: f64,
) -> EndcapMatch {
    let model = &input.models[endcap];
    let center = pose.transform_point(&model.center);
    let observed = observe_endcap(
        &input.candidates.points[endcap],
        &center,
        d_max,
        input.topology.endcap_radius,
    );
    let visible = visible_model_indices(model, pose, &Vec3::zeros());
    let world: Vec<Vec3> = visible
        .iter()
        .map(|&i| pose.transform_point(&model.points[i]))
        .collect();
    let mut correspondences = Vec::new();
    for (k, hit) in match_nearest(&world, &observed, d_max)
        .into_iter()
        .enumerate()
    {
        if let Some((j, d)) = hit {
            let w = correspondence_weight(d, d_max).unwrap_or(0.0);
            correspondences.push(Correspondence::new(world[k], observed[j], w));
        }
    }
    let matched = correspondences.len();
    let ratio = if visible.is_empty() {
        0.0
    } else {
        (matched as f64 / visible.len() as f64).clamp(0.0, 1.0)
    };
    EndcapMatch {
        observation: EndcapObservation {
            endcap,
            points: observed,
            visible: visible.len(),
            matched,
            ratio,
        },
        correspondences,
    }
}

/// Dummy self-correspondences for one rod, sampled from the model points of
/// both endcaps that are visible at the previous frame's pose. They damp
/// each registration step toward no motion and keep the rotation defined
/// when only one endcap is seen.
pub(super) fn dummies_for_rod(
    input: &TransitionInput,
    rod: usize,
    correspondences: Vec<Correspondence>,
) -> Vec<Correspondence> {
    let config = input.config;
    if config.dummy_count == 0 {
        return correspondences;
    }
    let previous = &input.previous[rod];
    let (ea, eb) = input.topology.rod_endcaps[rod];
    let at_previous: Vec<Vec3> = [ea, eb]
        .iter()
        .flat_map(|&e| {
            let m = &input.models[e];
            visible_model_indices(m, previous, &Vec3::zeros())
                .into_iter()
                .map(move |i| previous.transform_point(&m.points[i]))
        })
        .collect();
    let seed = derive_seed(
        config.seed,
        &[input.frame_index as u64, rod as u64, input.iteration as u64],
    );
    add_dummy_points(
        correspondences,
        &at_previous,
        &at_previous,
        config.dummy_count,
        seed,
    )
}

/// Apply the weighted rigid fit of `correspondences` to `pose`, or keep it
/// when the fit is undefined.
pub(super) fn register(pose: &RigidPose, correspondences: &[Correspondence]) -> RigidPose {
    if correspondences.len() < 3 {
        return *pose;
    }
    match kabsch_weighted(correspondences) {
        Ok(delta) => delta.compose(pose),
        Err(_) => *pose,
    }
}

/// One per-rod registration pass at iteration `input.iteration`.
pub fn transition_step(input: &TransitionInput) -> TransitionOutput {
    let topology = input.topology;
    let d_max = dmax_schedule(input.iteration, &input.config.dmax);
    let mut observations = vec![EndcapObservation::default(); topology.n_endcaps()];
    let mut poses = Vec::with_capacity(topology.n_rods);
    let mut counts = Vec::with_capacity(topology.n_rods);

    for (rod, &(ea, eb)) in topology.rod_endcaps.iter().enumerate() {
        let pose = input.current[rod];
        let mut corr = Vec::new();
        for e in [ea, eb] {
            let m = match_endcap(input, e, &pose, d_max);
            corr.extend(m.correspondences);
            observations[e] = m.observation;
        }
        counts.push(corr.len());
        let all = dummies_for_rod(input, rod, corr);
        poses.push(register(&pose, &all));
    }

    TransitionOutput {
        poses,
        observations,
        correspondences: counts,
        d_max,
    }
}

/// Observations at the current estimate without moving it.
pub(crate) fn observe_all(input: &TransitionInput) -> Vec<EndcapObservation> {
    let d_max = dmax_schedule(input.iteration, &input.config.dmax);
    (0..input.topology.n_endcaps())
        .map(|e| {
            let rod = input.topology.rod_of_endcap(e);
            match_endcap(input, e, &input.current[rod], d_max).observation
        })
        .collect()
}
