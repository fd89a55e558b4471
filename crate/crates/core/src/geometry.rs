//! Rigid-body and point-set primitives.
//!
//! Everything here is a pure function over `f64` nalgebra types. Poses map a
//! rod's local frame into the camera frame.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Rotation = UnitQuaternion<f64>;

/// Rotation + translation of one rigid body.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Rotation::identity(), translation)
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse() * (p - self.translation)
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidPose {
        let inv = self.rotation.inverse();
        RigidPose::new(inv, -(inv * self.translation))
    }

    /// The body's main axis (local +z) in the parent frame.
    pub fn axis(&self) -> Vec3 {
        self.rotation * Vec3::z()
    }
}

/// A weighted model→observation point pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    pub model_point: Vec3,
    pub observed_point: Vec3,
    pub weight: f64,
}

impl Correspondence {
    pub fn new(model_point: Vec3, observed_point: Vec3, weight: f64) -> Self {
        Self {
            model_point,
            observed_point,
            weight,
        }
    }
}

/// Line segment between two distinct points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Vec3,
    pub b: Vec3,
}

impl Segment {
    pub fn new(a: Vec3, b: Vec3) -> Result<Self> {
        if (b - a).norm() <= 0.0 {
            return Err(Error::DegenerateGeometry {
                context: "segment endpoints coincide".into(),
                rank: 0,
            });
        }
        Ok(Self { a, b })
    }

    #[inline]
    pub fn point_at(&self, s: f64) -> Vec3 {
        self.a + (self.b - self.a) * s
    }
}

/// Result of a segment–segment closest-point query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestPoints {
    pub on_first: Vec3,
    pub on_second: Vec3,
    /// Parameter of `on_first` along the first segment, in `[0, 1]`.
    pub s: f64,
    /// Parameter of `on_second` along the second segment, in `[0, 1]`.
    pub t: f64,
    pub distance: f64,
}

/// Correspondence weight `1 - (d/d_max)^2`, clipped to zero past `d_max`.
pub fn correspondence_weight(d: f64, d_max: f64) -> Result<f64> {
    if !(d_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "d_max must be positive, got {d_max}"
        )));
    }
    if d > d_max {
        return Ok(0.0);
    }
    let ratio = d / d_max;
    Ok(1.0 - ratio * ratio)
}

/// Weighted least-squares rigid alignment of model points onto observed points.
///
/// Minimizes `Σ wᵢ ‖T(mᵢ) − oᵢ‖²` over proper rigid transforms `T`.
pub fn kabsch_weighted(correspondences: &[Correspondence]) -> Result<RigidPose> {
    if correspondences.len() < 3 {
        return Err(Error::DegenerateGeometry {
            context: format!("{} correspondences, need at least 3", correspondences.len()),
            rank: 0,
        });
    }
    let total: f64 = correspondences.iter().map(|c| c.weight).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateGeometry {
            context: "total correspondence weight is zero".into(),
            rank: 0,
        });
    }

    let mut model_mean = Vec3::zeros();
    let mut observed_mean = Vec3::zeros();
    for c in correspondences {
        model_mean += c.model_point * c.weight;
        observed_mean += c.observed_point * c.weight;
    }
    model_mean /= total;
    observed_mean /= total;

    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for c in correspondences {
        let m = c.model_point - model_mean;
        let o = c.observed_point - observed_mean;
        cross += (m * o.transpose()) * c.weight;
        scatter += (m * m.transpose()) * c.weight;
    }

    let rank = numerical_rank(&scatter);
    if rank < 2 {
        return Err(Error::DegenerateGeometry {
            context: "model points are collinear or coincident".into(),
            rank,
        });
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let v = v_t.transpose();

    // Reflection fix: flip the singular vector paired with the smallest
    // singular value.
    let mut flip = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        let smallest = (0..3)
            .min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
            .unwrap_or(2);
        flip[(smallest, smallest)] = -1.0;
    }
    let r = v * flip * u.transpose();
    let rotation = UnitQuaternion::from_matrix(&r);
    let translation = observed_mean - rotation * model_mean;
    Ok(RigidPose::new(rotation, translation))
}

fn numerical_rank(m: &Matrix3<f64>) -> usize {
    let sv = m.singular_values();
    let max = sv.max();
    if !(max > 1e-24) {
        return 0;
    }
    sv.iter().filter(|&&s| s > max * 1e-9).count()
}

/// Closest pair of points between two segments.
///
/// When the minimizer is not unique (parallel segments with overlap) the
/// pair with lexicographically smallest `(s, t)` is returned.
pub fn closest_points_between_segments(s1: &Segment, s2: &Segment) -> ClosestPoints {
    let d1 = s1.b - s1.a;
    let d2 = s2.b - s2.a;
    let r = s1.a - s2.a;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;

    let make = |s: f64, t: f64| {
        let p = s1.point_at(s);
        let q = s2.point_at(t);
        ClosestPoints {
            on_first: p,
            on_second: q,
            s,
            t,
            distance: (p - q).norm(),
        }
    };

    if denom <= 1e-12 * a * e {
        // Parallel: the minimal-s minimizer is among the endpoint projections.
        let candidates = [
            (0.0, clamp01(f / e)),
            (1.0, clamp01((b + f) / e)),
            (clamp01(-c / a), 0.0),
            (clamp01((b - c) / a), 1.0),
        ];
        let pairs: Vec<ClosestPoints> = candidates.iter().map(|&(s, t)| make(s, t)).collect();
        let best = pairs
            .iter()
            .map(|p| p.distance)
            .fold(f64::INFINITY, f64::min);
        let tol = 1e-12 * (1.0 + best);
        return pairs
            .into_iter()
            .filter(|p| p.distance <= best + tol)
            .min_by(|x, y| x.s.total_cmp(&y.s).then(x.t.total_cmp(&y.t)))
            .expect("four candidates");
    }

    let mut s = clamp01((b * f - c * e) / denom);
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = clamp01(-c / a);
    } else if t > 1.0 {
        t = 1.0;
        s = clamp01((b - c) / a);
    }
    make(s, t)
}

#[inline]
fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Smallest-angle rotation carrying direction `from` onto direction `to`.
pub fn minimal_rotation_between(from: &Vec3, to: &Vec3) -> Result<Rotation> {
    let (nf, nt) = (from.norm(), to.norm());
    if !(nf > 0.0) || !(nt > 0.0) {
        return Err(Error::InvalidArgument(
            "minimal rotation needs nonzero vectors".into(),
        ));
    }
    let u = from / nf;
    let v = to / nt;
    let cross = u.cross(&v);
    let sin = cross.norm();
    let cos = u.dot(&v);
    if sin <= 1e-15 {
        if cos > 0.0 {
            return Ok(Rotation::identity());
        }
        // Antiparallel: cross with the canonical axis least aligned with u.
        let k = (0..3)
            .min_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs()))
            .unwrap_or(0);
        let mut basis = Vec3::zeros();
        basis[k] = 1.0;
        let axis = Unit::new_normalize(u.cross(&basis));
        return Ok(Rotation::from_axis_angle(&axis, std::f64::consts::PI));
    }
    let axis = Unit::new_unchecked(cross / sin);
    Ok(Rotation::from_axis_angle(&axis, sin.atan2(cos)))
}

/// Angle of `r1⁻¹ · r2`, in `[0, π]`.
pub fn geodesic_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    let q = r1.inverse() * r2;
    let w = q.scalar().abs();
    let v = q.vector().norm();
    2.0 * v.atan2(w)
}
