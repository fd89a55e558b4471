use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tensegrity_core::dataset::{
    cable_vector, read_trajectory, write_simulation, Dataset, RunManifest, RunStatus,
    TrajectoryRecord, TrajectoryWriter, FORMAT_VERSION,
};
use tensegrity_core::metrics::{evaluate_trajectory, FrameComparison, PoseError, TrajectoryReport};
use tensegrity_core::sim::Simulation;
use tensegrity_core::tracker::{poses_to_endcaps, ConstraintViolations, FrameTiming};
use tensegrity_core::{Ablation, RigidPose, TensegrityTopology, Tracker, TrackerConfig, Vec3};

use crate::config::{load_sim_config, load_tracker_config};
use crate::error::{CliError, CliResult};

pub const TRAJECTORY_FILE: &str = "trajectory.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

#[derive(Clone, Debug, Default)]
pub struct SimulateArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub max_frames: Option<usize>,
    pub quiet: bool,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<Dataset> {
    let topology = TensegrityTopology::three_bar();
    let mut cfg = load_sim_config(args.config.as_deref(), &topology)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.max_frames == Some(0) {
        return Err(CliError::Usage("--max-frames must be at least 1".into()));
    }
    let sim = Simulation::new(cfg, topology)?;
    let frames = args.max_frames.map_or(sim.len(), |m| m.min(sim.len()));
    say(
        args.quiet,
        format!("rendering {frames} frames to {}", args.out.display()),
    );
    let ds = write_simulation(&sim, &args.out, args.max_frames)?;
    say(
        args.quiet,
        format!("wrote dataset with {} frames", ds.len()),
    );
    Ok(ds)
}

#[derive(Clone, Debug, Default)]
pub struct TrackArgs {
    pub dataset: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub ablation: Option<String>,
    pub seed: Option<u64>,
    pub max_frames: Option<usize>,
    pub quiet: bool,
}

/// Paths written by a tracking run.
#[derive(Clone, Debug)]
pub struct TrackOutput {
    pub trajectory: PathBuf,
    pub manifest: PathBuf,
    pub frames: usize,
}

/// The configuration a run uses after the ablation and seed overrides.
pub fn effective_tracker_config(
    config: Option<&Path>,
    ablation: Option<&str>,
    seed: Option<u64>,
) -> CliResult<(TrackerConfig, Option<Ablation>)> {
    let mut cfg = load_tracker_config(config)?;
    let ablation = ablation
        .map(|a| {
            a.parse::<Ablation>()
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .transpose()?;
    if let Some(a) = ablation {
        cfg = a.apply(&cfg);
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok((cfg, ablation))
}

pub fn track(args: &TrackArgs) -> CliResult<TrackOutput> {
    let (cfg, ablation) =
        effective_tracker_config(args.config.as_deref(), args.ablation.as_deref(), args.seed)?;
    if args.max_frames == Some(0) {
        return Err(CliError::Usage("--max-frames must be at least 1".into()));
    }
    let ds = Dataset::open(&args.dataset)?;
    let frames = args.max_frames.map_or(ds.len(), |m| m.min(ds.len()));
    fs::create_dir_all(&args.out).map_err(|e| {
        CliError::Core(tensegrity_core::Error::Io {
            path: args.out.clone(),
            source: e,
        })
    })?;
    let trajectory = args.out.join(TRAJECTORY_FILE);
    let manifest_path = args.out.join(MANIFEST_FILE);
    let mut manifest = RunManifest {
        format_version: FORMAT_VERSION.into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        command: "track".into(),
        dataset: args.dataset.clone(),
        ablation: ablation.map(|a| a.name().to_string()),
        seed: cfg.seed,
        config: serde_json::to_value(&cfg).expect("config serializes"),
        max_frames: args.max_frames,
        outputs: vec![trajectory.clone()],
        status: RunStatus::Running,
        frames_tracked: 0,
        error: None,
        timing: Vec::new(),
    };
    manifest.write(&manifest_path)?;

    let result = run_tracker(&ds, cfg, frames, &trajectory, &mut manifest, args.quiet);
    match result {
        Ok(()) => {
            manifest.status = RunStatus::Complete;
            manifest.write(&manifest_path)?;
            say(
                args.quiet,
                format!("tracked {frames} frames into {}", trajectory.display()),
            );
            Ok(TrackOutput {
                trajectory,
                manifest: manifest_path,
                frames,
            })
        }
        Err(e) => {
            let _ = fs::remove_file(&trajectory);
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            manifest.outputs.clear();
            manifest.write(&manifest_path)?;
            Err(e)
        }
    }
}

fn run_tracker(
    ds: &Dataset,
    cfg: TrackerConfig,
    frames: usize,
    trajectory: &Path,
    manifest: &mut RunManifest,
    quiet: bool,
) -> CliResult<()> {
    let topology = ds.meta.topology.clone();
    let mut writer = TrajectoryWriter::create(trajectory)?;
    let frame0 = ds.read_frame(0)?;
    let (mut tracker, diag) =
        Tracker::new(&frame0, &ds.rois, ds.meta.intrinsics, topology.clone(), cfg)
            .map_err(|e| e.with_context("frame 0"))?;
    let mut push =
        |f: usize, poses: &[RigidPose], mut diag: tensegrity_core::tracker::FrameDiagnostics| {
            manifest.timing.push(std::mem::take(&mut diag.timing));
            manifest.frames_tracked = f + 1;
            writer.push(&TrajectoryRecord::new(f, poses, &topology, Some(diag)))
        };
    push(0, tracker.poses(), diag)?;
    for f in 1..frames {
        let frame = ds.read_frame(f)?;
        let diag = tracker
            .track(&frame)
            .map_err(|e| e.with_context(&format!("frame {f}")))?;
        push(f, tracker.poses(), diag)?;
        if !quiet && (f + 1) % 25 == 0 {
            eprintln!("  frame {}/{frames}", f + 1);
        }
    }
    writer.finish()?;
    Ok(())
}

/// Per-frame inputs to the metrics, loaded from a trajectory and a dataset.
pub struct Comparison {
    pub topology: TensegrityTopology,
    pub estimates: Vec<Vec<RigidPose>>,
    pub estimate_endcaps: Vec<Vec<Vec3>>,
    pub truth: Vec<Vec<Option<RigidPose>>>,
    /// Present only when every rod has ground truth.
    pub truth_endcaps: Vec<Option<Vec<Vec3>>>,
    /// Raw readings in topology cable order.
    pub measured: Vec<Vec<f64>>,
    pub records: Vec<TrajectoryRecord>,
}

impl Comparison {
    pub fn load(trajectory: &Path, dataset: &Path, max_frames: Option<usize>) -> CliResult<Self> {
        let ds = Dataset::open(dataset)?;
        let records = read_trajectory(trajectory)?;
        let expected = max_frames.map_or(ds.len(), |m| m.min(ds.len()));
        if records.len() != expected {
            return Err(CliError::Usage(format!(
                "trajectory has {} frames but {expected} dataset frames are selected",
                records.len()
            )));
        }
        let topology = ds.meta.topology.clone();
        if !ds.has_truth() {
            return Err(tensegrity_core::Error::UndefinedMetric(
                "dataset has no ground truth".into(),
            )
            .into());
        }
        let mut out = Comparison {
            topology: topology.clone(),
            estimates: Vec::new(),
            estimate_endcaps: Vec::new(),
            truth: Vec::new(),
            truth_endcaps: Vec::new(),
            measured: Vec::new(),
            records: Vec::new(),
        };
        for (f, rec) in records.iter().enumerate() {
            let poses = rec
                .poses()
                .map_err(|e| CliError::Usage(format!("trajectory frame {f}: {e}")))?;
            if poses.len() != topology.n_rods {
                return Err(CliError::Usage(format!(
                    "trajectory frame {f} has {} rods",
                    poses.len()
                )));
            }
            let truth = ds
                .read_truth(f)?
                .unwrap_or_else(|| vec![None; topology.n_rods]);
            let complete: Option<Vec<RigidPose>> = truth.iter().copied().collect();
            out.truth_endcaps
                .push(complete.map(|p| poses_to_endcaps(&p, &topology)));
            out.truth.push(truth);
            out.estimate_endcaps
                .push(poses_to_endcaps(&poses, &topology));
            out.estimates.push(poses);
            out.measured
                .push(cable_vector(&ds.read_cables(f)?.1, &topology.cables));
        }
        out.records = records;
        Ok(out)
    }

    pub fn frames(&self) -> Vec<FrameComparison<'_>> {
        (0..self.estimates.len())
            .map(|f| FrameComparison {
                frame: f,
                estimate: &self.estimates[f],
                estimate_endcaps: &self.estimate_endcaps[f],
                truth: &self.truth[f],
                truth_endcaps: self.truth_endcaps[f].as_deref(),
                measured: Some(&self.measured[f]),
            })
            .collect()
    }

    pub fn evaluate(&self) -> CliResult<(TrajectoryReport, Vec<PoseError>)> {
        Ok(evaluate_trajectory(&self.frames(), &self.topology.cables)?)
    }

    /// Worst constraint violation of each family over the run.
    pub fn max_violations(&self) -> ConstraintViolations {
        let mut v = ConstraintViolations::default();
        for d in self.records.iter().filter_map(|r| r.diagnostics.as_ref()) {
            v.rod_length = v.rod_length.max(d.violations.rod_length);
            v.ground = v.ground.max(d.violations.ground);
            v.rod_pair = v.rod_pair.max(d.violations.rod_pair);
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub trajectory: PathBuf,
    pub dataset: PathBuf,
    pub frames: usize,
    pub metrics: TrajectoryReport,
    pub max_violations: ConstraintViolations,
}

#[derive(Clone, Debug, Default)]
pub struct EvaluateArgs {
    pub trajectory: PathBuf,
    pub dataset: PathBuf,
    pub out: Option<PathBuf>,
    pub max_frames: Option<usize>,
    pub quiet: bool,
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<EvaluationReport> {
    let cmp = Comparison::load(&args.trajectory, &args.dataset, args.max_frames)?;
    let (metrics, _) = cmp.evaluate()?;
    let report = EvaluationReport {
        trajectory: args.trajectory.clone(),
        dataset: args.dataset.clone(),
        frames: cmp.estimates.len(),
        metrics,
        max_violations: cmp.max_violations(),
    };
    let out = args.out.clone().unwrap_or_else(|| {
        args.trajectory
            .parent()
            .unwrap_or(Path::new("."))
            .join(REPORT_FILE)
    });
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| {
            CliError::Core(tensegrity_core::Error::Io {
                path: dir.into(),
                source: e,
            })
        })?;
    }
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    fs::write(&out, text).map_err(|e| {
        CliError::Core(tensegrity_core::Error::Io {
            path: out.clone(),
            source: e,
        })
    })?;
    if !args.quiet {
        println!("{}", format_table(&report));
    }
    Ok(report)
}

pub fn format_table(r: &EvaluationReport) -> String {
    let m = &r.metrics;
    let measured = m.measured_shape.map_or("-".to_string(), |s| {
        format!("{:.2} ± {:.2}", s.mean * 100.0, s.std * 100.0)
    });
    let mut s = String::new();
    s += &format!("{:<28}{}\n", "frames evaluated", m.frames_evaluated);
    s += &format!("{:<28}{}\n", "frames with partial truth", m.frames_partial);
    s += &format!(
        "{:<28}{:.2} ± {:.2}\n",
        "translation error (cm)",
        m.translation.mean * 100.0,
        m.translation.std * 100.0
    );
    s += &format!(
        "{:<28}{:.2} ± {:.2}\n",
        "axis error (deg)", m.rotation.mean, m.rotation.std
    );
    s += &format!("{:<28}{:.1}\n", "2cm-5deg (%)", m.within_2cm_5deg);
    s += &format!(
        "{:<28}{:.2} ± {:.2}\n",
        "CoM error (cm)",
        m.com.mean * 100.0,
        m.com.std * 100.0
    );
    s += &format!(
        "{:<28}{:.2} ± {:.2}\n",
        "shape error (cm)",
        m.shape.mean * 100.0,
        m.shape.std * 100.0
    );
    s += &format!("{:<28}{measured}\n", "measured shape error (cm)");
    let v = &r.max_violations;
    s += &format!(
        "{:<28}rod length {:.1e} m, ground {:.1e} m, rod pair {:.1e} m",
        "max constraint violation", v.rod_length, v.ground, v.rod_pair
    );
    s
}

#[derive(Clone, Debug, Default)]
pub struct PlotArgs {
    pub trajectory: PathBuf,
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub max_frames: Option<usize>,
    pub quiet: bool,
}

pub fn plot(args: &PlotArgs) -> CliResult<Vec<PathBuf>> {
    let cmp = Comparison::load(&args.trajectory, &args.dataset, args.max_frames)?;
    let (_, errors) = cmp.evaluate()?;
    let files = crate::plot::write_all(&cmp, &errors, &args.out)?;
    say(
        args.quiet,
        format!("wrote {} files to {}", files.len(), args.out.display()),
    );
    Ok(files)
}

/// Frame timings recorded in a run manifest.
pub fn manifest_timing(path: &Path) -> CliResult<Vec<FrameTiming>> {
    Ok(RunManifest::read(path)?.timing)
}
