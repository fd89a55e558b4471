use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Vec3;
use crate::perception::{CableMeasurements, GroundPlane};
use crate::robot_model::TensegrityTopology;
use crate::solver::{minimize_constrained, NlpProblem, SolverConfig, SolverResult};

use super::observe::EndcapObservation;
use super::{TrackerConfig, TrackerState, WeightParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveWeights {
    /// Per endcap.
    pub unary: Vec<f64>,
    /// Per cable, in topology order.
    pub binary: Vec<f64>,
}

fn binary_weight(ri: f64, rj: f64, p: &WeightParams) -> f64 {
    if ri > p.high_ratio && rj > p.high_ratio {
        0.0
    } else if ri < p.low_ratio || rj < p.low_ratio {
        p.binary_scale
    } else {
        p.binary_scale * (1.0 - 0.5 * (ri + rj))
    }
}

/// Weights from per-endcap visibility ratios.
pub fn weights_from_ratios(
    ratios: &[f64],
    topology: &TensegrityTopology,
    params: &WeightParams,
    enable_binary: bool,
) -> AdaptiveWeights {
    let unary = ratios.iter().map(|r| r.max(params.unary_floor)).collect();
    let binary = topology
        .cables
        .iter()
        .map(|&(i, j)| match (enable_binary, params.static_binary) {
            (false, _) => 0.0,
            (true, Some(w)) => w,
            (true, None) => binary_weight(ratios[i], ratios[j], params),
        })
        .collect();
    AdaptiveWeights { unary, binary }
}

pub fn compute_adaptive_weights(
    observations: &[EndcapObservation],
    topology: &TensegrityTopology,
    config: &TrackerConfig,
) -> AdaptiveWeights {
    let ratios: Vec<f64> = observations.iter().map(|o| o.ratio).collect();
    weights_from_ratios(
        &ratios,
        topology,
        &config.weights,
        config.enable_binary_loss,
    )
}

/// Linearized separation between two rods: the points cached at the
/// previous frame, written as fixed combinations of the current endcaps,
/// must stay `separation` apart along the previous closest-pair direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodPairConstraint {
    pub rods: (usize, usize),
    pub endcaps_i: (usize, usize),
    pub coeff_i: (f64, f64),
    pub endcaps_j: (usize, usize),
    pub coeff_j: (f64, f64),
    pub direction: Vec3,
}

impl RodPairConstraint {
    pub fn point_i(&self, q: &[Vec3]) -> Vec3 {
        q[self.endcaps_i.0] * self.coeff_i.0 + q[self.endcaps_i.1] * self.coeff_i.1
    }

    pub fn point_j(&self, q: &[Vec3]) -> Vec3 {
        q[self.endcaps_j.0] * self.coeff_j.0 + q[self.endcaps_j.1] * self.coeff_j.1
    }

    /// `(ĉ_j − ĉ_i) · u`, to be kept at or above the rod diameter.
    pub fn projected_distance(&self, q: &[Vec3]) -> f64 {
        (self.point_j(q) - self.point_i(q)).dot(&self.direction)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    /// Endcap pair of every rod.
    pub rods: Vec<(usize, usize)>,
    pub rod_length: f64,
    pub rod_pairs: Vec<RodPairConstraint>,
    pub ground: Option<GroundPlane>,
    /// Minimum projected distance between rod axes.
    pub separation: f64,
    /// Minimum endcap-center height above the ground.
    pub clearance: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolations {
    /// Max `| |q_a − q_b| − l |` (meters).
    pub rod_length: f64,
    /// Max penetration below the ground clearance (meters).
    pub ground: f64,
    /// Max shortfall of the linearized separation (meters).
    pub rod_pair: f64,
}

fn local_coefficients(z: f64, l: f64) -> (f64, f64) {
    ((l / 2.0 + z) / l, (l / 2.0 - z) / l)
}

fn assemble(
    state: &TrackerState,
    topology: &TensegrityTopology,
    rod_pairs: bool,
    ground: bool,
) -> ConstraintSet {
    let l = topology.rod_length;
    let pairs = if rod_pairs {
        state
            .closest_pairs
            .iter()
            .filter(|p| p.constrained())
            .map(|p| RodPairConstraint {
                rods: p.rods,
                endcaps_i: topology.rod_endcaps[p.rods.0],
                coeff_i: local_coefficients(p.local_z.0, l),
                endcaps_j: topology.rod_endcaps[p.rods.1],
                coeff_j: local_coefficients(p.local_z.1, l),
                direction: p.direction,
            })
            .collect()
    } else {
        Vec::new()
    };
    ConstraintSet {
        rods: topology.rod_endcaps.clone(),
        rod_length: l,
        rod_pairs: pairs,
        ground: if ground { state.ground } else { None },
        separation: topology.rod_diameter,
        clearance: topology.rod_diameter / 2.0,
    }
}

/// Constraints for the correction step at the frame following `state`.
pub fn build_constraints(
    state: &TrackerState,
    topology: &TensegrityTopology,
    config: &TrackerConfig,
) -> ConstraintSet {
    assemble(
        state,
        topology,
        config.enable_rod_constraints,
        config.enable_ground_constraint,
    )
}

impl ConstraintSet {
    /// Every constraint the state supports, independent of configuration.
    pub fn full(state: &TrackerState, topology: &TensegrityTopology) -> Self {
        assemble(state, topology, true, true)
    }

    pub fn ground_value(&self, q: &Vec3) -> Option<f64> {
        self.ground.map(|g| g.height(q) - self.clearance)
    }

    pub fn violations(&self, q: &[Vec3]) -> ConstraintViolations {
        let rod_length = self
            .rods
            .iter()
            .map(|&(a, b)| ((q[a] - q[b]).norm() - self.rod_length).abs())
            .fold(0.0, f64::max);
        let ground = q
            .iter()
            .filter_map(|p| self.ground_value(p))
            .map(|v| (-v).max(0.0))
            .fold(0.0, f64::max);
        let rod_pair = self
            .rod_pairs
            .iter()
            .map(|c| (self.separation - c.projected_distance(q)).max(0.0))
            .fold(0.0, f64::max);
        ConstraintViolations {
            rod_length,
            ground,
            rod_pair,
        }
    }
}

#[inline]
fn endcap(x: &DVector<f64>, e: usize) -> Vec3 {
    Vec3::new(x[3 * e], x[3 * e + 1], x[3 * e + 2])
}

#[inline]
fn add_to(g: &mut DVector<f64>, e: usize, v: &Vec3) {
    g[3 * e] += v.x;
    g[3 * e + 1] += v.y;
    g[3 * e + 2] += v.z;
}

fn cable_length(cables: &CableMeasurements, i: usize, j: usize) -> Option<f64> {
    cables.get(&(i, j)).or_else(|| cables.get(&(j, i))).copied()
}

/// The endcap-level problem: anchors to the registration output plus cable
/// residuals, subject to `constraints`. Variables are the stacked endcaps.
pub fn correction_problem<'a>(
    q_hat: &'a [Vec3],
    weights: &'a AdaptiveWeights,
    cables: &CableMeasurements,
    constraints: &'a ConstraintSet,
    topology: &TensegrityTopology,
) -> NlpProblem<'a> {
    let n = q_hat.len();
    let terms: Vec<(usize, usize, f64, f64)> = topology
        .cables
        .iter()
        .zip(&weights.binary)
        .filter(|(_, &w)| w > 0.0)
        .filter_map(|(&(i, j), &w)| cable_length(cables, i, j).map(|l| (i, j, w, l)))
        .collect();

    let objective = Box::new(move |x: &DVector<f64>| {
        let mut f = 0.0;
        let mut g = DVector::zeros(3 * n);
        for (e, (anchor, w)) in q_hat.iter().zip(&weights.unary).enumerate() {
            let r = endcap(x, e) - anchor;
            f += w * r.norm_squared();
            add_to(&mut g, e, &(r * (2.0 * w)));
        }
        for &(i, j, w, l) in &terms {
            let d = endcap(x, i) - endcap(x, j);
            let dist = d.norm();
            let res = dist - l;
            f += w * res * res;
            if dist > 1e-12 {
                let grad = d * (2.0 * w * res / dist);
                add_to(&mut g, i, &grad);
                add_to(&mut g, j, &(-grad));
            }
        }
        (f, g)
    });

    let mut equalities: Vec<crate::solver::SmoothFn<'a>> = Vec::new();
    for &(a, b) in &constraints.rods {
        let l = constraints.rod_length;
        equalities.push(Box::new(move |x: &DVector<f64>| {
            let d = endcap(x, a) - endcap(x, b);
            let dist = d.norm();
            let mut g = DVector::zeros(3 * n);
            if dist > 1e-12 {
                let u = d / dist;
                add_to(&mut g, a, &u);
                add_to(&mut g, b, &(-u));
            }
            (dist - l, g)
        }));
    }

    let mut inequalities: Vec<crate::solver::SmoothFn<'a>> = Vec::new();
    for c in &constraints.rod_pairs {
        let sep = constraints.separation;
        let c = *c;
        inequalities.push(Box::new(move |x: &DVector<f64>| {
            let q = |e| endcap(x, e);
            let pi = q(c.endcaps_i.0) * c.coeff_i.0 + q(c.endcaps_i.1) * c.coeff_i.1;
            let pj = q(c.endcaps_j.0) * c.coeff_j.0 + q(c.endcaps_j.1) * c.coeff_j.1;
            let mut g = DVector::zeros(3 * n);
            let u = c.direction;
            add_to(&mut g, c.endcaps_i.0, &(-u * c.coeff_i.0));
            add_to(&mut g, c.endcaps_i.1, &(-u * c.coeff_i.1));
            add_to(&mut g, c.endcaps_j.0, &(u * c.coeff_j.0));
            add_to(&mut g, c.endcaps_j.1, &(u * c.coeff_j.1));
            ((pj - pi).dot(&u) - sep, g)
        }));
    }
    if let Some(ground) = constraints.ground {
        let normal = ground.normal();
        let clearance = constraints.clearance;
        for e in 0..n {
            inequalities.push(Box::new(move |x: &DVector<f64>| {
                let mut g = DVector::zeros(3 * n);
                add_to(&mut g, e, &normal);
                (ground.height(&endcap(x, e)) - clearance, g)
            }));
        }
    }

    let mut initial = DVector::zeros(3 * n);
    for (e, p) in q_hat.iter().enumerate() {
        initial.fixed_rows_mut::<3>(3 * e).copy_from(p);
    }
    NlpProblem {
        dimension: 3 * n,
        objective,
        equalities,
        inequalities,
        initial_point: initial,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionOutput {
    pub endcaps: Vec<Vec3>,
    pub result: SolverResult,
}

/// Jointly re-estimate all endcaps, warm-started at `q_hat`. The solver's
/// answer is returned even when it did not converge; `result` says so.
pub fn correction_step(
    q_hat: &[Vec3],
    weights: &AdaptiveWeights,
    cables: &CableMeasurements,
    constraints: &ConstraintSet,
    topology: &TensegrityTopology,
    solver: &SolverConfig,
) -> Result<CorrectionOutput> {
    let problem = correction_problem(q_hat, weights, cables, constraints, topology);
    let result = minimize_constrained(&problem, solver)?;
    let endcaps = (0..q_hat.len())
        .map(|e| endcap(&result.solution, e))
        .collect();
    Ok(CorrectionOutput { endcaps, result })
}
