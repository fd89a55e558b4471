use nalgebra::DVector;

use crate::error::Result;
use crate::geometry::{RigidPose, Vec3};
use crate::perception::{dmax_schedule, CableMeasurements};
use crate::robot_model::TensegrityTopology;
use crate::solver::{minimize_constrained, NlpProblem, SmoothFn, SolverConfig};

use super::observe::EndcapObservation;
use super::transition::{
    dummies_for_rod, match_endcap, register, TransitionInput, TransitionOutput,
};

/// Weight of the pull toward the previous shape. It only removes the rigid
/// motion gauge of the cable objective.
const GAUGE_WEIGHT: f64 = 1e-4;

/// Endcap layout that best explains the cable measurements under the rod
/// length constraints, warm-started from `previous`.
pub fn shape_presolve(
    previous: &[Vec3],
    cables: &CableMeasurements,
    topology: &TensegrityTopology,
    solver: &SolverConfig,
) -> Result<Vec<Vec3>> {
    let n = previous.len();
    let get = |i: usize| move |x: &DVector<f64>| Vec3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
    let terms: Vec<(usize, usize, f64)> = topology
        .cables
        .iter()
        .filter_map(|&(i, j)| {
            cables
                .get(&(i, j))
                .or_else(|| cables.get(&(j, i)))
                .map(|&l| (i, j, l))
        })
        .collect();
    let scale = 1.0 / terms.len().max(1) as f64;
    let prev = previous.to_vec();

    let objective: SmoothFn = Box::new(move |x: &DVector<f64>| {
        let mut f = 0.0;
        let mut g = DVector::zeros(3 * n);
        for &(i, j, l) in &terms {
            let d = get(i)(x) - get(j)(x);
            let dist = d.norm();
            let res = dist - l;
            f += scale * res * res;
            if dist > 1e-12 {
                let grad = d * (2.0 * scale * res / dist);
                for k in 0..3 {
                    g[3 * i + k] += grad[k];
                    g[3 * j + k] -= grad[k];
                }
            }
        }
        for (e, p) in prev.iter().enumerate() {
            let r = get(e)(x) - p;
            f += GAUGE_WEIGHT * r.norm_squared();
            for k in 0..3 {
                g[3 * e + k] += 2.0 * GAUGE_WEIGHT * r[k];
            }
        }
        (f, g)
    });
    let equalities = topology
        .rod_endcaps
        .iter()
        .map(|&(a, b)| {
            let l = topology.rod_length;
            Box::new(move |x: &DVector<f64>| {
                let d = get(a)(x) - get(b)(x);
                let dist = d.norm();
                let mut g = DVector::zeros(3 * n);
                if dist > 1e-12 {
                    let u = d / dist;
                    for k in 0..3 {
                        g[3 * a + k] = u[k];
                        g[3 * b + k] = -u[k];
                    }
                }
                (dist - l, g)
            }) as SmoothFn
        })
        .collect();
    let mut initial = DVector::zeros(3 * n);
    for (e, p) in previous.iter().enumerate() {
        initial.fixed_rows_mut::<3>(3 * e).copy_from(p);
    }
    let problem = NlpProblem {
        dimension: 3 * n,
        objective,
        equalities,
        inequalities: Vec::new(),
        initial_point: initial,
    };
    let result = minimize_constrained(&problem, solver)?;
    Ok((0..n).map(|e| get(e)(&result.solution)).collect())
}

/// One registration pass that moves every rod by the same rigid transform.
pub(super) fn whole_body_step(input: &TransitionInput) -> TransitionOutput {
    let topology = input.topology;
    let d_max = dmax_schedule(input.iteration, &input.config.dmax);
    let mut observations = vec![EndcapObservation::default(); topology.n_endcaps()];
    let mut counts = Vec::with_capacity(topology.n_rods);
    let mut all = Vec::new();

    for (rod, &(ea, eb)) in topology.rod_endcaps.iter().enumerate() {
        let pose = input.current[rod];
        let mut corr = Vec::new();
        for e in [ea, eb] {
            let m = match_endcap(input, e, &pose, d_max);
            corr.extend(m.correspondences);
            observations[e] = m.observation;
        }
        counts.push(corr.len());
        all.extend(dummies_for_rod(input, rod, corr));
    }

    let delta = register(&RigidPose::identity(), &all);
    TransitionOutput {
        poses: input.current.iter().map(|p| delta.compose(p)).collect(),
        observations,
        correspondences: counts,
        d_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_presolve_recovers_consistent_cables() {
        let topo = TensegrityTopology::three_bar();
        // A valid 3-prism: bottom/top triangles twisted by 150°.
        let h = 0.2;
        let ang = 150f64.to_radians();
        let r = ((topo.rod_length.powi(2) - h * h) / (2.0 * (1.0 - ang.cos()))).sqrt();
        let mut truth = [Vec3::zeros(); 6];
        for k in 0..3 {
            let b = 120f64.to_radians() * k as f64;
            truth[2 * k + 1] = Vec3::new(r * b.cos(), r * b.sin(), 1.0);
            truth[2 * k] = Vec3::new(r * (b + ang).cos(), r * (b + ang).sin(), 1.0 + h);
        }
        let cables: CableMeasurements = topo
            .cables
            .iter()
            .map(|&(i, j)| ((i, j), (truth[i] - truth[j]).norm()))
            .collect();
        let start: Vec<Vec3> = truth
            .iter()
            .enumerate()
            .map(|(k, p)| p + Vec3::new(0.004 * k as f64, -0.003, 0.002 * (k % 2) as f64))
            .collect();
        let out = shape_presolve(&start, &cables, &topo, &SolverConfig::default()).unwrap();
        for &(i, j) in &topo.cables {
            assert!(((out[i] - out[j]).norm() - cables[&(i, j)]).abs() < 1e-3);
        }
        for &(a, b) in &topo.rod_endcaps {
            assert!(((out[a] - out[b]).norm() - topo.rod_length).abs() < 1e-6);
        }
    }
}
