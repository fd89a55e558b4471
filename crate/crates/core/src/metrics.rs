//! Trajectory evaluation against ground truth: per-rod translation and main
//! axis errors, the 2cm-5deg hit rate, center-of-mass error and shape error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidPose, Vec3};

pub const TRANSLATION_THRESHOLD: f64 = 0.02;
pub const ROTATION_THRESHOLD_DEG: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub frame: usize,
    pub rod: usize,
    /// Meters.
    pub translation: f64,
    /// Unsigned main-axis angle in degrees, in `[0, 90]`.
    pub rotation: f64,
    pub gt_available: bool,
}

impl PoseError {
    pub fn missing(frame: usize, rod: usize) -> Self {
        Self {
            frame,
            rod,
            translation: f64::NAN,
            rotation: f64::NAN,
            gt_available: false,
        }
    }

    /// Strictly inside both thresholds.
    pub fn within_2cm_5deg(&self) -> bool {
        self.gt_available
            && self.translation < TRANSLATION_THRESHOLD
            && self.rotation < ROTATION_THRESHOLD_DEG
    }
}

pub fn rod_pose_error(estimate: &RigidPose, truth: &RigidPose) -> PoseError {
    let translation = (estimate.translation - truth.translation).norm();
    let dot = estimate.axis().dot(&truth.axis()).abs().min(1.0);
    PoseError {
        frame: 0,
        rod: 0,
        translation,
        rotation: dot.acos().to_degrees(),
        gt_available: true,
    }
}

/// Percentage of evaluable rod poses inside 2 cm and 5°.
pub fn within_2cm_5deg(errors: &[PoseError]) -> Result<f64> {
    let evaluable = errors.iter().filter(|e| e.gt_available).count();
    if evaluable == 0 {
        return Err(Error::UndefinedMetric(
            "no rod pose has ground truth".into(),
        ));
    }
    let hits = errors.iter().filter(|e| e.within_2cm_5deg()).count();
    Ok(100.0 * hits as f64 / evaluable as f64)
}

/// Distance between the mean rod centers of estimate and truth.
pub fn com_error(estimates: &[RigidPose], truths: &[RigidPose]) -> Result<f64> {
    if estimates.is_empty() || estimates.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} estimates vs {} truths",
            estimates.len(),
            truths.len()
        )));
    }
    let n = estimates.len() as f64;
    let a: Vec3 = estimates.iter().map(|p| p.translation).sum::<Vec3>() / n;
    let b: Vec3 = truths.iter().map(|p| p.translation).sum::<Vec3>() / n;
    Ok((a - b).norm())
}

/// Mean absolute discrepancy of endcap distances over the cable set.
pub fn shape_error(estimated: &[Vec3], truth: &[Vec3], edges: &[(usize, usize)]) -> Result<f64> {
    if edges.is_empty() {
        return Err(Error::UndefinedMetric("empty edge set".into()));
    }
    let n = estimated.len().min(truth.len());
    if let Some(&(i, j)) = edges.iter().find(|(i, j)| *i >= n || *j >= n) {
        return Err(Error::InvalidArgument(format!(
            "edge ({i}, {j}) out of range"
        )));
    }
    let total: f64 = edges
        .iter()
        .map(|&(i, j)| ((estimated[i] - estimated[j]).norm() - (truth[i] - truth[j]).norm()).abs())
        .sum();
    Ok(total / edges.len() as f64)
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                count: 0,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            count: values.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    /// Meters.
    pub translation: Stat,
    /// Degrees.
    pub rotation: Stat,
    pub within_2cm_5deg: f64,
    /// Meters.
    pub com: Stat,
    /// Mean absolute cable-distance discrepancy, meters.
    pub shape: Stat,
    /// Same statistic for the raw cable measurements, when available.
    pub measured_shape: Option<Stat>,
    pub frames_evaluated: usize,
    /// Frames where at least one rod had no ground truth.
    pub frames_partial: usize,
    pub rod_poses_evaluated: usize,
}

/// One frame of estimate and (possibly partial) ground truth.
pub struct FrameComparison<'a> {
    pub frame: usize,
    pub estimate: &'a [RigidPose],
    pub estimate_endcaps: &'a [Vec3],
    pub truth: &'a [Option<RigidPose>],
    pub truth_endcaps: Option<&'a [Vec3]>,
    /// Raw cable measurements in the order of `edges`.
    pub measured: Option<&'a [f64]>,
}

/// Aggregate all metrics over a trajectory. Frames with partial ground truth
/// contribute rod errors for the rods that have it, but no CoM or shape error.
pub fn evaluate_trajectory(
    frames: &[FrameComparison],
    edges: &[(usize, usize)],
) -> Result<(TrajectoryReport, Vec<PoseError>)> {
    let mut errors = Vec::new();
    let mut com = Vec::new();
    let mut shape = Vec::new();
    let mut measured = Vec::new();
    let mut frames_partial = 0;
    let mut frames_evaluated = 0;

    for f in frames {
        let mut complete = true;
        let mut any = false;
        for (rod, est) in f.estimate.iter().enumerate() {
            match f.truth.get(rod).copied().flatten() {
                Some(gt) => {
                    any = true;
                    let mut e = rod_pose_error(est, &gt);
                    e.frame = f.frame;
                    e.rod = rod;
                    errors.push(e);
                }
                None => {
                    complete = false;
                    errors.push(PoseError::missing(f.frame, rod));
                }
            }
        }
        if any {
            frames_evaluated += 1;
        }
        if !complete {
            frames_partial += 1;
            continue;
        }
        let truths: Vec<RigidPose> = f.truth.iter().map(|t| t.expect("complete")).collect();
        com.push(com_error(f.estimate, &truths)?);
        if let Some(te) = f.truth_endcaps {
            shape.push(shape_error(f.estimate_endcaps, te, edges)?);
            if let Some(m) = f.measured {
                let total: f64 = edges
                    .iter()
                    .zip(m)
                    .map(|(&(i, j), l)| (l - (te[i] - te[j]).norm()).abs())
                    .sum();
                measured.push(total / edges.len() as f64);
            }
        }
    }

    let hit = within_2cm_5deg(&errors)?;
    let valid: Vec<&PoseError> = errors.iter().filter(|e| e.gt_available).collect();
    let trans: Vec<f64> = valid.iter().map(|e| e.translation).collect();
    let rot: Vec<f64> = valid.iter().map(|e| e.rotation).collect();
    let report = TrajectoryReport {
        translation: Stat::of(&trans),
        rotation: Stat::of(&rot),
        within_2cm_5deg: hit,
        com: Stat::of(&com),
        shape: Stat::of(&shape),
        measured_shape: (!measured.is_empty()).then(|| Stat::of(&measured)),
        frames_evaluated,
        frames_partial,
        rod_poses_evaluated: valid.len(),
    };
    Ok((report, errors))
}
