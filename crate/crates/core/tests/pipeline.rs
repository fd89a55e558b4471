use tensegrity_core::geometry::RigidPose;
use tensegrity_core::perception::visible_model_points;
use tensegrity_core::robot_model::sample_endcap_model;
use tensegrity_core::sim::{
    render_frame, GroundTruthFrame, SceneExtras, SimConfig, SimNoise, Simulation,
};
use tensegrity_core::tracker::{
    gather_candidates, initialize_from_rois, poses_to_endcaps, transition_step, FrameCandidates,
    TransitionInput,
};
use tensegrity_core::{EndcapModel, ObservedFrame, TensegrityTopology, TrackerConfig, Vec3};

fn clean_sim() -> Simulation {
    let mut cfg = SimConfig::rolling(11, false);
    cfg.trajectory.frames = 1;
    Simulation::new(cfg, TensegrityTopology::three_bar()).unwrap()
}

fn models(topo: &TensegrityTopology, config: &TrackerConfig) -> Vec<EndcapModel> {
    sample_endcap_model(topo, config.model_samples, config.seed).unwrap()
}

fn render_at(sim: &Simulation, poses: &[RigidPose]) -> ObservedFrame {
    let truth = GroundTruthFrame::from_poses(0, poses.to_vec(), &sim.topology);
    let extras = SceneExtras {
        shaft_radius: sim.config.shaft_radius,
        occluders: Vec::new(),
    };
    render_frame(
        &truth,
        &sim.topology,
        sim.intrinsics(),
        &sim.camera_pose,
        &SimNoise::noise_free(),
        &extras,
        0,
    )
    .frame
}

fn step(
    candidates: &FrameCandidates,
    topo: &TensegrityTopology,
    models: &[EndcapModel],
    config: &TrackerConfig,
    start: &[RigidPose],
) -> Vec<RigidPose> {
    transition_step(&TransitionInput {
        current: start.to_vec(),
        previous: start,
        candidates,
        models,
        topology: topo,
        config,
        iteration: 0,
        frame_index: 0,
    })
    .poses
}

fn candidates_from_frame(
    sim: &Simulation,
    frame: &ObservedFrame,
    poses: &[RigidPose],
    config: &TrackerConfig,
) -> FrameCandidates {
    let radius = config.dmax.initial + sim.topology.endcap_radius + config.window_margin;
    gather_candidates(frame, sim.intrinsics(), &sim.topology, poses, radius)
}

fn max_endcap_move(a: &[RigidPose], b: &[RigidPose], topo: &TensegrityTopology) -> f64 {
    let qa = poses_to_endcaps(a, topo);
    let qb = poses_to_endcaps(b, topo);
    qa.iter()
        .zip(&qb)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn visible_model_cloud_is_a_fixed_point() {
    let sim = clean_sim();
    let topo = &sim.topology;
    let config = TrackerConfig::default();
    let models = models(topo, &config);
    let truth = &sim.truth[0].poses;
    let points = (0..topo.n_endcaps())
        .map(|e| visible_model_points(&models[e], &truth[topo.rod_of_endcap(e)], &Vec3::zeros()))
        .collect();
    let out = step(&FrameCandidates { points }, topo, &models, &config, truth);
    // The depth window drops the few visible points behind the center plane
    // of off-axis endcaps, and their model partners then match neighbors.
    let moved = max_endcap_move(truth, &out, topo);
    assert!(moved < 3e-4, "{moved}");
    for (a, b) in truth.iter().zip(&out) {
        // Spin about the rod axis leaves spherical endcaps unchanged.
        assert!(a.axis().angle(&b.axis()) < 1e-3);
    }
}

#[test]
fn rendered_truth_stays_within_a_millimeter() {
    // Nearest-neighbor matching of a sparse model against the pixel grid
    // pulls limb points toward the camera by a fraction of a millimeter.
    let sim = clean_sim();
    let config = TrackerConfig::default();
    let models = models(&sim.topology, &config);
    let truth = &sim.truth[0].poses;
    let frame = sim.observed_frame(0);
    let candidates = candidates_from_frame(&sim, &frame, truth, &config);
    let out = step(&candidates, &sim.topology, &models, &config, truth);
    let moved = max_endcap_move(truth, &out, &sim.topology);
    assert!(moved < 1e-3, "{moved}");
}

#[test]
fn one_iteration_recovers_part_of_a_shift() {
    // Nearest points on a displaced sphere move each model point by the
    // normal part of the shift, about a third of it over a hemisphere, and
    // the dummies damp that further.
    let sim = clean_sim();
    let config = TrackerConfig::default();
    let models = models(&sim.topology, &config);
    let truth = &sim.truth[0].poses;
    let shift = Vec3::new(0.01, 0.0, 0.0);
    let moved: Vec<RigidPose> = truth
        .iter()
        .map(|p| RigidPose::new(p.rotation, p.translation + shift))
        .collect();
    let frame = render_at(&sim, &moved);
    let candidates = candidates_from_frame(&sim, &frame, truth, &config);
    let out = step(&candidates, &sim.topology, &models, &config, truth);
    for (a, b) in truth.iter().zip(&out) {
        let dx = b.translation.x - a.translation.x;
        assert!((0.0025..=0.005).contains(&dx), "{dx}");
    }
}

#[test]
fn hidden_rod_keeps_its_pose() {
    let sim = clean_sim();
    let topo = &sim.topology;
    let config = TrackerConfig::default();
    let models = models(topo, &config);
    let truth = &sim.truth[0].poses;
    let candidates = FrameCandidates {
        points: vec![Vec::new(); topo.n_endcaps()],
    };
    let out = step(&candidates, topo, &models, &config, truth);
    assert!(max_endcap_move(truth, &out, topo) < 1e-6);
}

#[test]
fn initial_centroids_lean_toward_the_camera() {
    let sim = clean_sim();
    let topo = &sim.topology;
    let frame = sim.observed_frame(0);
    let state = initialize_from_rois(&frame, &sim.rois(), sim.intrinsics(), topo).unwrap();
    let est = poses_to_endcaps(&state.poses, topo);
    for (e, q) in sim.truth[0].endcaps.iter().enumerate() {
        let d = est[e] - q;
        assert!(
            d.norm() < 0.75 * topo.endcap_radius,
            "endcap {e}: {}",
            d.norm()
        );
        assert!(d.dot(&q.normalize()) < 0.0, "endcap {e} leans away");
    }
}
