//! Static description of a tensegrity robot and rod pose ↔ endcap conversions.
//!
//! Rod local frame: the main axis is local +z, the rod center is the origin.
//! For rod `r` with endcaps `(i, j)`, endcap `i` sits at `+l_rod/2` and `j`
//! at `-l_rod/2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{minimal_rotation_between, RigidPose, Rotation, Vec3};

/// Hue/saturation/value acceptance window. Hue is in degrees and may wrap
/// (`hue_min > hue_max` means the window crosses 0°).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsvRange {
    pub hue_min: f64,
    pub hue_max: f64,
    pub sat_min: f64,
    pub sat_max: f64,
    pub val_min: f64,
    pub val_max: f64,
}

/// A color in HSV space, hue in degrees, saturation/value in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl Hsv {
    pub fn new(h: f64, s: f64, v: f64) -> Self {
        Self { h, s, v }
    }

    /// Decode the on-disk byte triple (hue scaled 0–255 over 0–360°).
    #[inline]
    pub fn from_bytes(b: [u8; 3]) -> Self {
        Self {
            h: b[0] as f64 * 360.0 / 255.0,
            s: b[1] as f64 / 255.0,
            v: b[2] as f64 / 255.0,
        }
    }

    #[inline]
    pub fn to_bytes(self) -> [u8; 3] {
        let h = (self.h.rem_euclid(360.0) / 360.0 * 255.0).round() as u32 % 256;
        let s = (self.s.clamp(0.0, 1.0) * 255.0).round() as u8;
        let v = (self.v.clamp(0.0, 1.0) * 255.0).round() as u8;
        [h as u8, s, v]
    }
}

impl HsvRange {
    pub fn new(hue: (f64, f64), sat: (f64, f64), val: (f64, f64)) -> Self {
        Self {
            hue_min: hue.0,
            hue_max: hue.1,
            sat_min: sat.0,
            sat_max: sat.1,
            val_min: val.0,
            val_max: val.1,
        }
    }

    pub fn contains(&self, c: &Hsv) -> bool {
        if c.s < self.sat_min || c.s > self.sat_max || c.v < self.val_min || c.v > self.val_max {
            return false;
        }
        let h = c.h.rem_euclid(360.0);
        let (lo, hi) = (
            self.hue_min.rem_euclid(360.0),
            self.hue_max.rem_euclid(360.0),
        );
        if lo <= hi {
            h >= lo && h <= hi
        } else {
            h >= lo || h <= hi
        }
    }

    #[inline]
    pub fn contains_bytes(&self, b: [u8; 3]) -> bool {
        self.contains(&Hsv::from_bytes(b))
    }

    /// Representative color in the middle of the window.
    pub fn center(&self) -> Hsv {
        let lo = self.hue_min.rem_euclid(360.0);
        let mut hi = self.hue_max.rem_euclid(360.0);
        if hi < lo {
            hi += 360.0;
        }
        Hsv::new(
            ((lo + hi) / 2.0).rem_euclid(360.0),
            (self.sat_min + self.sat_max) / 2.0,
            (self.val_min + self.val_max) / 2.0,
        )
    }

    fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(self.sat_min) && unit(self.sat_max) && unit(self.val_min) && unit(self.val_max)) {
            return Err(Error::InvalidArgument(
                "HSV saturation/value bounds must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Rods, endcaps, cables and their dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensegrityTopology {
    pub n_rods: usize,
    pub rod_length: f64,
    pub rod_diameter: f64,
    pub endcap_radius: f64,
    /// Cable edge set `E` as endcap index pairs.
    pub cables: Vec<(usize, usize)>,
    pub endcap_hsv: Vec<HsvRange>,
    /// Rod index → (endcap at +z, endcap at −z).
    pub rod_endcaps: Vec<(usize, usize)>,
}

impl TensegrityTopology {
    /// The 3-bar robot: 36 cm rods, 1.75 cm endcaps, red/green/blue rods and
    /// nine cables (two triangles plus three connecting cables).
    pub fn three_bar() -> Self {
        let red = HsvRange::new((340.0, 20.0), (0.5, 1.0), (0.3, 1.0));
        let green = HsvRange::new((90.0, 150.0), (0.5, 1.0), (0.3, 1.0));
        let blue = HsvRange::new((200.0, 260.0), (0.5, 1.0), (0.3, 1.0));
        Self {
            n_rods: 3,
            rod_length: 0.36,
            rod_diameter: 0.035,
            endcap_radius: 0.0175,
            cables: vec![
                // top triangle (+z endcaps)
                (0, 2),
                (2, 4),
                (4, 0),
                // bottom triangle (−z endcaps)
                (1, 3),
                (3, 5),
                (5, 1),
                // bottom k ↔ top k−1
                (1, 4),
                (3, 0),
                (5, 2),
            ],
            endcap_hsv: vec![red, red, green, green, blue, blue],
            rod_endcaps: vec![(0, 1), (2, 3), (4, 5)],
        }
    }

    pub fn n_endcaps(&self) -> usize {
        2 * self.n_rods
    }

    pub fn rod_of_endcap(&self, endcap: usize) -> usize {
        self.rod_endcaps
            .iter()
            .position(|&(a, b)| a == endcap || b == endcap)
            .expect("endcap belongs to a rod")
    }

    /// Local +z offset of an endcap center: `+l/2` for the first endcap of
    /// its rod, `-l/2` for the second.
    pub fn endcap_local_offset(&self, endcap: usize) -> Vec3 {
        let rod = self.rod_of_endcap(endcap);
        let half = self.rod_length / 2.0;
        if self.rod_endcaps[rod].0 == endcap {
            Vec3::new(0.0, 0.0, half)
        } else {
            Vec3::new(0.0, 0.0, -half)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_rods == 0 {
            return bad("topology needs at least one rod".into());
        }
        if self.rod_endcaps.len() != self.n_rods || self.endcap_hsv.len() != self.n_endcaps() {
            return bad("rod_endcaps / endcap_hsv sizes do not match n_rods".into());
        }
        if !(self.rod_length > self.rod_diameter && self.rod_diameter > 0.0) {
            return bad("need rod_length > rod_diameter > 0".into());
        }
        if !(self.endcap_radius > 0.0 && self.endcap_radius <= self.rod_diameter) {
            return bad("need 0 < endcap_radius <= rod_diameter".into());
        }
        let mut seen = vec![false; self.n_endcaps()];
        for &(a, b) in &self.rod_endcaps {
            for e in [a, b] {
                if e >= seen.len() || seen[e] {
                    return bad(format!("endcap {e} out of range or shared between rods"));
                }
                seen[e] = true;
            }
        }
        for &(i, j) in &self.cables {
            if i >= self.n_endcaps() || j >= self.n_endcaps() || i == j {
                return bad(format!("cable ({i}, {j}) has invalid endpoints"));
            }
            if self.rod_of_endcap(i) == self.rod_of_endcap(j) {
                return bad(format!("cable ({i}, {j}) connects endcaps of the same rod"));
            }
        }
        for r in &self.endcap_hsv {
            r.validate()?;
        }
        Ok(())
    }
}

/// Sampled surface of one endcap, expressed in its rod's local frame.
#[derive(Clone, Debug, PartialEq)]
pub struct EndcapModel {
    pub endcap: usize,
    pub center: Vec3,
    pub points: Vec<Vec3>,
}

/// Pose of one rod.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RodState {
    pub rod: usize,
    pub pose: RigidPose,
}

/// World positions of the two endcap centers of a rod (+z endcap first).
pub fn endcap_positions(pose: &RigidPose, topology: &TensegrityTopology) -> (Vec3, Vec3) {
    let half = pose.rotation * Vec3::new(0.0, 0.0, topology.rod_length / 2.0);
    (pose.translation + half, pose.translation - half)
}

/// Rod pose from its endcap centers, resolving the twist about the main axis
/// so the rotation stays geodesically closest to `previous`.
pub fn pose_from_endcaps(
    q_i: &Vec3,
    q_j: &Vec3,
    previous: &Rotation,
    _topology: &TensegrityTopology,
) -> Result<RigidPose> {
    let dir = q_i - q_j;
    if !(dir.norm() > 0.0) {
        return Err(Error::DegenerateGeometry {
            context: "coincident endcaps".into(),
            rank: 0,
        });
    }
    let previous_axis = previous * Vec3::z();
    let swing = minimal_rotation_between(&previous_axis, &dir)?;
    Ok(RigidPose::new(swing * previous, (q_i + q_j) / 2.0))
}

/// Quasi-uniform (Fibonacci lattice) sphere samples for every endcap, with a
/// seeded random orientation of the lattice.
pub fn sample_endcap_model(
    topology: &TensegrityTopology,
    samples_per_endcap: usize,
    seed: u64,
) -> Result<Vec<EndcapModel>> {
    if samples_per_endcap < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 samples per endcap, got {samples_per_endcap}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let n = samples_per_endcap;
    let radius = topology.endcap_radius;

    let models = (0..topology.n_endcaps())
        .map(|endcap| {
            let spin = Rotation::from_euler_angles(
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            );
            let center = topology.endcap_local_offset(endcap);
            let points = (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    let dir = spin * Vec3::new(rho * phi.cos(), rho * phi.sin(), z);
                    center + dir * radius
                })
                .collect();
            EndcapModel {
                endcap,
                center,
                points,
            }
        })
        .collect();
    Ok(models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn endcap_position_examples() {
        let topo = TensegrityTopology::three_bar();
        let (a, b) = endcap_positions(&RigidPose::identity(), &topo);
        assert_abs_diff_eq!((a - Vec3::new(0.0, 0.0, 0.18)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            (b - Vec3::new(0.0, 0.0, -0.18)).norm(),
            0.0,
            epsilon = 1e-12
        );

        let (a, b) = endcap_positions(&RigidPose::from_translation(Vec3::x()), &topo);
        assert_abs_diff_eq!((a - Vec3::new(1.0, 0.0, 0.18)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            (b - Vec3::new(1.0, 0.0, -0.18)).norm(),
            0.0,
            epsilon = 1e-12
        );

        let rx = Rotation::from_axis_angle(&Vec3::x_axis(), 90f64.to_radians());
        let (a, b) = endcap_positions(&RigidPose::new(rx, Vec3::zeros()), &topo);
        assert_abs_diff_eq!(
            (a - Vec3::new(0.0, -0.18, 0.0)).norm(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!((b - Vec3::new(0.0, 0.18, 0.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pose_from_endcap_examples() {
        let topo = TensegrityTopology::three_bar();
        let id = Rotation::identity();
        let p = pose_from_endcaps(
            &Vec3::new(0.0, 0.0, 0.18),
            &Vec3::new(0.0, 0.0, -0.18),
            &id,
            &topo,
        )
        .unwrap();
        assert_abs_diff_eq!(p.translation.norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.rotation.angle(), 0.0, epsilon = 1e-12);

        let mid = Vec3::new(0.2, 0.1, 0.5);
        let p = pose_from_endcaps(
            &(mid + Vec3::new(0.0, 0.18, 0.0)),
            &(mid - Vec3::new(0.0, 0.18, 0.0)),
            &id,
            &topo,
        )
        .unwrap();
        assert_abs_diff_eq!((p.translation - mid).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            p.rotation.angle(),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-12
        );
        let axis = p.rotation.axis().unwrap();
        assert_abs_diff_eq!(axis.x.abs(), 1.0, epsilon = 1e-12);

        assert!(pose_from_endcaps(&mid, &mid, &id, &topo).is_err());
    }

    #[test]
    fn endcap_model_sampling() {
        let topo = TensegrityTopology::three_bar();
        let models = sample_endcap_model(&topo, 200, 7).unwrap();
        assert_eq!(models.len(), 6);
        for m in &models {
            assert_eq!(m.points.len(), 200);
            for p in &m.points {
                assert_abs_diff_eq!((p - m.center).norm(), 0.0175, epsilon = 1e-9);
            }
            let mean = m.points.iter().sum::<Vec3>() / m.points.len() as f64;
            assert!((mean - m.center).norm() < 0.002);
        }
        assert_eq!(models, sample_endcap_model(&topo, 200, 7).unwrap());
        assert!(sample_endcap_model(&topo, 50, 7).is_err());
    }

    #[test]
    fn hsv_wraparound() {
        let red = HsvRange::new((350.0, 10.0), (0.0, 1.0), (0.0, 1.0));
        assert!(red.contains(&Hsv::new(5.0, 0.5, 0.5)));
        assert!(red.contains(&Hsv::new(355.0, 0.5, 0.5)));
        assert!(!red.contains(&Hsv::new(180.0, 0.5, 0.5)));
        assert_abs_diff_eq!(red.center().h, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn default_topology_is_valid() {
        let topo = TensegrityTopology::three_bar();
        topo.validate().unwrap();
        assert_eq!(topo.cables.len(), 9);
        let mut broken = topo.clone();
        broken.cables.push((0, 1));
        assert!(broken.validate().is_err());
    }
}
