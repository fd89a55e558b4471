//! Shared fixture for the benchmarks: one noisy simulated frame pair with
//! the tracker state after the first frame.

use tensegrity_core::sim::{SimConfig, Simulation};
use tensegrity_core::tracker::{
    build_constraints, compute_adaptive_weights, gather_candidates, transition_step,
    AdaptiveWeights, ConstraintSet, FrameCandidates, TransitionInput,
};
use tensegrity_core::{
    EndcapModel, ObservedFrame, TensegrityTopology, Tracker, TrackerConfig, TrackerState, Vec3,
};

pub struct Fixture {
    pub sim: Simulation,
    pub config: TrackerConfig,
    pub models: Vec<EndcapModel>,
    /// State after tracking frame 0.
    pub state: TrackerState,
    /// Frame 1.
    pub frame: ObservedFrame,
    pub candidates: FrameCandidates,
    /// Registration output on frame 1, the correction step's input.
    pub q_hat: Vec<Vec3>,
    pub weights: AdaptiveWeights,
    pub constraints: ConstraintSet,
}

impl Fixture {
    pub fn new() -> Self {
        let topology = TensegrityTopology::three_bar();
        let sim = Simulation::new(SimConfig::rolling(0, true), topology.clone())
            .expect("default simulation");
        let config = TrackerConfig::default();
        let (tracker, _) = Tracker::new(
            &sim.observed_frame(0),
            &sim.rois(),
            *sim.intrinsics(),
            topology.clone(),
            config.clone(),
        )
        .expect("initialization");
        let state = tracker.state().clone();
        let models = tracker.models.clone();
        let frame = sim.observed_frame(1);
        let radius = config.dmax.initial + topology.endcap_radius + config.window_margin;
        let candidates =
            gather_candidates(&frame, sim.intrinsics(), &topology, &state.poses, radius);
        let out = transition_step(&TransitionInput {
            current: state.poses.clone(),
            previous: &state.poses,
            candidates: &candidates,
            models: &models,
            topology: &topology,
            config: &config,
            iteration: 0,
            frame_index: 1,
        });
        let q_hat = tensegrity_core::tracker::poses_to_endcaps(&out.poses, &topology);
        let weights = compute_adaptive_weights(&out.observations, &topology, &config);
        let constraints = build_constraints(&state, &topology, &config);
        Self {
            sim,
            config,
            models,
            state,
            frame,
            candidates,
            q_hat,
            weights,
            constraints,
        }
    }

    pub fn transition_input(&self) -> TransitionInput<'_> {
        TransitionInput {
            current: self.state.poses.clone(),
            previous: &self.state.poses,
            candidates: &self.candidates,
            models: &self.models,
            topology: &self.sim.topology,
            config: &self.config,
            iteration: 0,
            frame_index: 1,
        }
    }
}

impl Default for Fixture {
    fn default() -> Self {
        Self::new()
    }
}
