//! On-disk dataset, trajectory and run-manifest formats.
//!
//! ```text
//! <root>/meta.json
//! <root>/rois.json
//! <root>/frames/%06d.depthhsv   "DHSV", u32 width, u32 height, then per pixel
//!                               f32 depth (meters, LE) and H, S, V bytes
//! <root>/frames/%06d.cables     JSON cable readings and timestamp
//! <root>/gt/%06d.poses          JSON rod poses, null where not recorded
//! ```

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidPose, Rotation, Vec3};
use crate::perception::{CableMeasurements, CameraIntrinsics, ObservedFrame, Roi};
use crate::robot_model::TensegrityTopology;
use crate::sim::{SimConfig, Simulation};
use crate::tracker::{poses_to_endcaps, FrameDiagnostics, FrameTiming};

pub const FORMAT_VERSION: &str = "1.0";
const MAGIC: &[u8; 4] = b"DHSV";
const HEADER_LEN: usize = 12;
const PIXEL_LEN: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: String,
    /// Rod local frame: main axis along +z, first endcap at +z.
    pub rod_frame: String,
    pub topology: TensegrityTopology,
    pub intrinsics: CameraIntrinsics,
    /// Camera-to-world pose; all frame data is in the camera frame.
    pub camera_pose: PoseRecord,
    pub frame_rate: f64,
    pub frames: usize,
    /// Generator settings when the dataset was simulated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimConfig>,
}

impl DatasetMeta {
    pub fn new(
        topology: TensegrityTopology,
        intrinsics: CameraIntrinsics,
        camera_pose: &RigidPose,
        frame_rate: f64,
        frames: usize,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            rod_frame: "z-axis along the rod, first endcap at +z".into(),
            topology,
            intrinsics,
            camera_pose: camera_pose.into(),
            frame_rate,
            frames,
            simulation: None,
        }
    }
}

/// Rotation as a unit quaternion `[w, x, y, z]` plus translation in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
}

impl From<&RigidPose> for PoseRecord {
    fn from(p: &RigidPose) -> Self {
        let q = p.rotation.quaternion();
        Self {
            quaternion: [q.w, q.i, q.j, q.k],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

impl PoseRecord {
    pub fn to_pose(&self) -> Result<RigidPose> {
        let [w, x, y, z] = self.quaternion;
        let q = nalgebra::Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !(n.is_finite() && (n - 1.0).abs() < 1e-6) {
            return Err(Error::InvalidArgument(format!(
                "quaternion norm {n} is not 1"
            )));
        }
        let t = Vec3::from(self.translation);
        if !t.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite translation".into()));
        }
        Ok(RigidPose::new(Rotation::new_unchecked(q), t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiRecord {
    pub endcap: usize,
    #[serde(flatten)]
    pub roi: Roi,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableReading {
    pub endcaps: (usize, usize),
    /// Meters.
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CableFile {
    frame: usize,
    timestamp: f64,
    cables: Vec<CableReading>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TruthFile {
    frame: usize,
    rods: Vec<Option<PoseRecord>>,
}

fn frame_path(root: &Path, frame: usize, ext: &str) -> PathBuf {
    root.join("frames").join(format!("{frame:06}.{ext}"))
}

fn truth_path(root: &Path, frame: usize) -> PathBuf {
    root.join("gt").join(format!("{frame:06}.poses"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Binary depth+HSV payload of a frame.
pub fn encode_depthhsv(frame: &ObservedFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + PIXEL_LEN * frame.depth.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(frame.width as u32).to_le_bytes());
    out.extend_from_slice(&(frame.height as u32).to_le_bytes());
    for (d, c) in frame.depth.iter().zip(&frame.hsv) {
        out.extend_from_slice(&d.to_le_bytes());
        out.extend_from_slice(c);
    }
    out
}

/// Inverse of [`encode_depthhsv`]; cables and timestamp are left empty.
pub fn decode_depthhsv(bytes: &[u8], path: &Path) -> Result<ObservedFrame> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "missing DHSV header"));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap()) as usize;
    let (width, height) = (word(4), word(8));
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(path, "frame dimensions overflow"))?;
    if bytes.len() != HEADER_LEN + PIXEL_LEN * n {
        return Err(Error::format(
            path,
            format!("{} bytes for a {width}x{height} frame", bytes.len()),
        ));
    }
    let mut frame = ObservedFrame::blank(width, height);
    for (i, px) in bytes[HEADER_LEN..].chunks_exact(PIXEL_LEN).enumerate() {
        let d = f32::from_le_bytes(px[..4].try_into().unwrap());
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::format(
                path,
                format!("invalid depth {d} at pixel {i}"),
            ));
        }
        frame.depth[i] = d;
        frame.hsv[i] = [px[4], px[5], px[6]];
    }
    Ok(frame)
}

/// A dataset directory whose metadata and RoIs have been validated.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub meta: DatasetMeta,
    /// Frame-0 RoI per endcap.
    pub rois: Vec<Roi>,
}

impl Dataset {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let meta_path = root.join("meta.json");
        let meta: DatasetMeta = read_json(&meta_path)?;
        let major = meta.format_version.split('.').next().unwrap_or("");
        if major != FORMAT_VERSION.split('.').next().unwrap() {
            return Err(Error::format(
                &meta_path,
                format!("unsupported format version {}", meta.format_version),
            ));
        }
        let invalid = |e: Error| Error::format(&meta_path, e.to_string());
        meta.topology.validate().map_err(invalid)?;
        meta.intrinsics.validate().map_err(invalid)?;
        meta.camera_pose.to_pose().map_err(invalid)?;
        if meta.frames == 0 {
            return Err(Error::format(&meta_path, "dataset has no frames"));
        }

        let rois_path = root.join("rois.json");
        let mut records: Vec<RoiRecord> = read_json(&rois_path)?;
        records.sort_by_key(|r| r.endcap);
        let n = meta.topology.n_endcaps();
        if records.len() != n || records.iter().enumerate().any(|(e, r)| r.endcap != e) {
            return Err(Error::format(
                &rois_path,
                format!("need exactly one RoI for each of {n} endcaps"),
            ));
        }
        let intr = &meta.intrinsics;
        for r in &records {
            let b = &r.roi;
            if b.is_empty() || b.u_max >= intr.width || b.v_max >= intr.height {
                return Err(Error::format(
                    &rois_path,
                    format!("RoI of endcap {} is empty or outside the image", r.endcap),
                ));
            }
        }

        for f in 0..meta.frames {
            for ext in ["depthhsv", "cables"] {
                let p = frame_path(&root, f, ext);
                if !p.is_file() {
                    return Err(Error::format(&p, format!("frame {f} is missing")));
                }
            }
        }
        let rois = records.into_iter().map(|r| r.roi).collect();
        Ok(Self { root, meta, rois })
    }

    pub fn len(&self) -> usize {
        self.meta.frames
    }

    pub fn is_empty(&self) -> bool {
        self.meta.frames == 0
    }

    pub fn camera_pose(&self) -> RigidPose {
        self.meta.camera_pose.to_pose().expect("validated on open")
    }

    pub fn read_frame(&self, frame: usize) -> Result<ObservedFrame> {
        let path = frame_path(&self.root, frame, "depthhsv");
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = decode_depthhsv(&bytes, &path)?;
        let (timestamp, cables) = self.read_cables(frame)?;
        out.timestamp = timestamp;
        out.cables = cables;
        out.validate(&self.meta.intrinsics, &self.meta.topology.cables)
            .map_err(|e| Error::format(&path, format!("frame {frame}: {e}")))?;
        Ok(out)
    }

    /// Timestamp and cable readings of a frame, without the image payload.
    pub fn read_cables(&self, frame: usize) -> Result<(f64, CableMeasurements)> {
        let path = frame_path(&self.root, frame, "cables");
        let file: CableFile = read_json(&path)?;
        if file.frame != frame {
            return Err(Error::format(
                &path,
                format!("records frame {} instead of {frame}", file.frame),
            ));
        }
        let cables: CableMeasurements = file.cables.iter().map(|c| (c.endcaps, c.length)).collect();
        if let Some(e) = self
            .meta
            .topology
            .cables
            .iter()
            .find(|e| !cables.get(e).is_some_and(|l| *l > 0.0))
        {
            return Err(Error::format(
                &path,
                format!("no positive reading for cable {e:?}"),
            ));
        }
        Ok((file.timestamp, cables))
    }

    /// Recorded rod poses, `None` when the frame has no ground-truth file.
    pub fn read_truth(&self, frame: usize) -> Result<Option<Vec<Option<RigidPose>>>> {
        let path = truth_path(&self.root, frame);
        if !path.exists() {
            return Ok(None);
        }
        let file: TruthFile = read_json(&path)?;
        if file.frame != frame || file.rods.len() != self.meta.topology.n_rods {
            return Err(Error::format(
                &path,
                "frame index or rod count does not match the dataset",
            ));
        }
        let rods = file
            .rods
            .iter()
            .map(|r| r.map(|p| p.to_pose()).transpose())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::format(&path, e.to_string()))?;
        Ok(Some(rods))
    }

    pub fn has_truth(&self) -> bool {
        (0..self.len()).any(|f| truth_path(&self.root, f).exists())
    }
}

/// Writes a dataset directory; metadata and RoIs go out on creation.
pub struct DatasetWriter {
    root: PathBuf,
}

impl DatasetWriter {
    pub fn create(root: impl AsRef<Path>, meta: &DatasetMeta, rois: &[Roi]) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        for dir in [root.join("frames"), root.join("gt")] {
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        write_json(&root.join("meta.json"), meta)?;
        let records: Vec<RoiRecord> = rois
            .iter()
            .enumerate()
            .map(|(endcap, &roi)| RoiRecord { endcap, roi })
            .collect();
        write_json(&root.join("rois.json"), &records)?;
        Ok(Self { root })
    }

    pub fn write_frame(&self, index: usize, frame: &ObservedFrame) -> Result<()> {
        let path = frame_path(&self.root, index, "depthhsv");
        fs::write(&path, encode_depthhsv(frame)).map_err(|e| Error::io(&path, e))?;
        let cables = CableFile {
            frame: index,
            timestamp: frame.timestamp,
            cables: frame
                .cables
                .iter()
                .map(|(&endcaps, &length)| CableReading { endcaps, length })
                .collect(),
        };
        write_json(&frame_path(&self.root, index, "cables"), &cables)
    }

    pub fn write_truth(&self, index: usize, rods: &[Option<RigidPose>]) -> Result<()> {
        let file = TruthFile {
            frame: index,
            rods: rods
                .iter()
                .map(|r| r.as_ref().map(PoseRecord::from))
                .collect(),
        };
        write_json(&truth_path(&self.root, index), &file)
    }
}

/// Render and write every frame of `sim` (optionally only the first
/// `max_frames`), with RoIs and recorded ground truth.
pub fn write_simulation(
    sim: &Simulation,
    root: impl AsRef<Path>,
    max_frames: Option<usize>,
) -> Result<Dataset> {
    let frames = max_frames.map_or(sim.len(), |m| m.min(sim.len()));
    let mut meta = DatasetMeta::new(
        sim.topology.clone(),
        *sim.intrinsics(),
        &sim.camera_pose,
        sim.config.frame_rate,
        frames,
    );
    meta.simulation = Some(sim.config.clone());
    let writer = DatasetWriter::create(&root, &meta, &sim.rois())?;
    (0..frames).into_par_iter().try_for_each(|f| {
        writer.write_frame(f, &sim.render(f).frame)?;
        writer.write_truth(f, &sim.recorded_truth(f))
    })?;
    Dataset::open(root)
}

/// One line of a trajectory file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub frame: usize,
    pub rods: Vec<RodRecord>,
    pub diagnostics: Option<FrameDiagnostics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodRecord {
    pub rod: usize,
    #[serde(flatten)]
    pub pose: PoseRecord,
    /// Endcap centers `[+z endcap, −z endcap]`.
    pub endcaps: [[f64; 3]; 2],
}

impl TrajectoryRecord {
    pub fn new(
        frame: usize,
        poses: &[RigidPose],
        topology: &TensegrityTopology,
        diagnostics: Option<FrameDiagnostics>,
    ) -> Self {
        let q = poses_to_endcaps(poses, topology);
        let rods = poses
            .iter()
            .enumerate()
            .map(|(rod, p)| {
                let (a, b) = topology.rod_endcaps[rod];
                RodRecord {
                    rod,
                    pose: p.into(),
                    endcaps: [q[a].into(), q[b].into()],
                }
            })
            .collect();
        Self {
            frame,
            rods,
            diagnostics,
        }
    }

    pub fn poses(&self) -> Result<Vec<RigidPose>> {
        self.rods.iter().map(|r| r.pose.to_pose()).collect()
    }
}

/// Streaming writer for line-delimited trajectory records.
pub struct TrajectoryWriter {
    path: PathBuf,
    out: BufWriter<fs::File>,
}

impl TrajectoryWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            out: BufWriter::new(file),
            path,
        })
    }

    pub fn push(&mut self, record: &TrajectoryRecord) -> Result<()> {
        let line =
            serde_json::to_string(record).map_err(|e| Error::format(&self.path, e.to_string()))?;
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrajectoryRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", k + 1)))?;
        if rec.frame != out.len() {
            return Err(Error::format(
                path,
                format!(
                    "line {} holds frame {}, expected {}",
                    k + 1,
                    rec.frame,
                    out.len()
                ),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

/// Everything needed to reproduce a tracking run, plus its timings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: String,
    pub code_version: String,
    pub command: String,
    pub dataset: PathBuf,
    pub ablation: Option<String>,
    pub seed: u64,
    /// Effective configuration after ablation and seed overrides.
    pub config: serde_json::Value,
    pub max_frames: Option<usize>,
    pub outputs: Vec<PathBuf>,
    pub status: RunStatus,
    pub frames_tracked: usize,
    pub error: Option<String>,
    pub timing: Vec<FrameTiming>,
}

impl RunManifest {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

pub fn cable_vector(cables: &CableMeasurements, edges: &[(usize, usize)]) -> Vec<f64> {
    edges.iter().map(|e| cables[e]).collect()
}
