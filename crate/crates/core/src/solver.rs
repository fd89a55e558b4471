//! Small dense constrained nonlinear minimization.
//!
//! Sequential quadratic programming with a damped-BFGS Lagrangian Hessian,
//! an ℓ1 exact-penalty line search with a second-order correction, and a
//! strictly convex QP subproblem solved through its bound-constrained dual.
//! When the linearized constraints are inconsistent the QP is relaxed the
//! same way SLSQP does, by scaling the constraint residuals with `1 − ξ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x ↦ (value, gradient)`.
pub type SmoothFn<'a> = Box<dyn Fn(&DVector<f64>) -> (f64, DVector<f64>) + Send + Sync + 'a>;

/// `min f(x)` s.t. `h(x) = 0` for every equality and `g(x) ≥ 0` for every
/// inequality.
pub struct NlpProblem<'a> {
    pub dimension: usize,
    pub objective: SmoothFn<'a>,
    pub equalities: Vec<SmoothFn<'a>>,
    pub inequalities: Vec<SmoothFn<'a>>,
    pub initial_point: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub eq_tol: f64,
    pub ineq_tol: f64,
    pub kkt_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            eq_tol: 1e-6,
            ineq_tol: 1e-6,
            kkt_tol: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult {
    pub solution: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// `max(max |h|, max(−g, 0))` at the solution.
    pub max_violation: f64,
    pub max_equality_violation: f64,
    /// Smallest inequality value at the solution (`+∞` without inequalities).
    pub min_inequality: f64,
    /// ‖∇f − Σλ∇c‖∞ with the final multiplier estimate.
    pub stationarity: f64,
    pub equality_multipliers: Vec<f64>,
    pub inequality_multipliers: Vec<f64>,
    pub converged: bool,
}

struct Evaluation {
    f: f64,
    grad: DVector<f64>,
    c_eq: DVector<f64>,
    a_eq: DMatrix<f64>,
    c_in: DVector<f64>,
    a_in: DMatrix<f64>,
}

impl Evaluation {
    fn eq_violation(&self) -> f64 {
        self.c_eq.amax()
    }

    fn min_ineq(&self) -> f64 {
        self.c_in.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn violation(&self) -> f64 {
        self.eq_violation().max((-self.min_ineq()).max(0.0))
    }
}

impl NlpProblem<'_> {
    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        let n = self.dimension;
        let (f, grad) = (self.objective)(x);
        check_finite("objective", f, &grad, x)?;

        let mut c_eq = DVector::zeros(self.equalities.len());
        let mut a_eq = DMatrix::zeros(self.equalities.len(), n);
        for (k, h) in self.equalities.iter().enumerate() {
            let (v, g) = h(x);
            check_finite(&format!("equality {k}"), v, &g, x)?;
            c_eq[k] = v;
            a_eq.row_mut(k).copy_from(&g.transpose());
        }
        let mut c_in = DVector::zeros(self.inequalities.len());
        let mut a_in = DMatrix::zeros(self.inequalities.len(), n);
        for (k, g_fn) in self.inequalities.iter().enumerate() {
            let (v, g) = g_fn(x);
            check_finite(&format!("inequality {k}"), v, &g, x)?;
            c_in[k] = v;
            a_in.row_mut(k).copy_from(&g.transpose());
        }
        Ok(Evaluation {
            f,
            grad,
            c_eq,
            a_eq,
            c_in,
            a_in,
        })
    }

    fn merit(&self, e: &Evaluation, mu_eq: &[f64], mu_in: &[f64]) -> f64 {
        let mut phi = e.f;
        for (c, m) in e.c_eq.iter().zip(mu_eq) {
            phi += m * c.abs();
        }
        for (c, m) in e.c_in.iter().zip(mu_in) {
            phi += m * (-c).max(0.0);
        }
        phi
    }
}

fn check_finite(what: &str, v: f64, g: &DVector<f64>, x: &DVector<f64>) -> Result<()> {
    if v.is_finite() && g.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalFailure {
            context: format!("{what} is not finite"),
            point: x.iter().copied().collect(),
        })
    }
}

/// Solve the constrained problem from its initial point.
pub fn minimize_constrained(problem: &NlpProblem, config: &SolverConfig) -> Result<SolverResult> {
    let n = problem.dimension;
    if problem.initial_point.len() != n {
        return Err(Error::InvalidArgument(format!(
            "initial point has {} entries, dimension is {n}",
            problem.initial_point.len()
        )));
    }
    let m_eq = problem.equalities.len();
    let m_in = problem.inequalities.len();

    let mut x = problem.initial_point.clone();
    let mut eval = problem.evaluate(&x)?;
    let mut hess = DMatrix::<f64>::identity(n, n);
    let mut mu_eq = vec![0.0; m_eq];
    let mut mu_in = vec![0.0; m_in];
    let mut lambda_eq = vec![0.0; m_eq];
    let mut lambda_in = vec![0.0; m_in];
    let mut stationarity = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iters {
        let qp = solve_qp_with_relaxation(&hess, &eval)?;
        lambda_eq = qp.lambda_eq.clone();
        lambda_in = qp.lambda_in.clone();

        stationarity = lagrangian_gradient(&eval, &lambda_eq, &lambda_in).amax();
        let complementarity = eval
            .c_in
            .iter()
            .zip(&lambda_in)
            .map(|(c, l)| (c * l).abs())
            .fold(0.0, f64::max);
        if eval.eq_violation() <= config.eq_tol
            && eval.min_ineq() >= -config.ineq_tol
            && stationarity <= config.kkt_tol
            && complementarity <= config.kkt_tol
        {
            converged = true;
            break;
        }
        iterations += 1;

        // Penalty update (Powell): keep μ ≥ |λ| with some memory.
        for (m, l) in mu_eq.iter_mut().zip(&lambda_eq) {
            *m = l.abs().max(0.5 * (*m + l.abs())) + 1e-8;
        }
        for (m, l) in mu_in.iter_mut().zip(&lambda_in) {
            *m = l.abs().max(0.5 * (*m + l.abs())) + 1e-8;
        }

        let d = &qp.step;
        let phi0 = problem.merit(&eval, &mu_eq, &mu_in);
        let penalty_term: f64 = eval
            .c_eq
            .iter()
            .zip(&mu_eq)
            .map(|(c, m)| m * c.abs())
            .chain(eval.c_in.iter().zip(&mu_in).map(|(c, m)| m * (-c).max(0.0)))
            .sum();
        let slope = eval.grad.dot(d) - (1.0 - qp.relaxation) * penalty_term;

        let mut accepted: Option<(DVector<f64>, Evaluation)> = None;
        let trial = &x + d;
        let trial_eval = problem.evaluate(&trial)?;
        let armijo = |phi: f64, alpha: f64| phi <= phi0 + 1e-4 * alpha * slope.min(0.0);
        if armijo(problem.merit(&trial_eval, &mu_eq, &mu_in), 1.0) {
            accepted = Some((trial, trial_eval));
        } else {
            // Second-order correction: re-solve with constraint values taken
            // at the trial point to absorb constraint curvature.
            let soc_eval = Evaluation {
                f: eval.f,
                grad: eval.grad.clone(),
                c_eq: &trial_eval.c_eq - &eval.a_eq * d,
                a_eq: eval.a_eq.clone(),
                c_in: &trial_eval.c_in - &eval.a_in * d,
                a_in: eval.a_in.clone(),
            };
            if let Ok(soc) = solve_qp(&hess, &soc_eval) {
                let soc_x = &x + &soc.step;
                let soc_trial = problem.evaluate(&soc_x)?;
                if armijo(problem.merit(&soc_trial, &mu_eq, &mu_in), 1.0) {
                    accepted = Some((soc_x, soc_trial));
                }
            }
            let mut alpha = 0.5;
            while accepted.is_none() && alpha > 1e-10 {
                let tx = &x + d * alpha;
                let te = problem.evaluate(&tx)?;
                if armijo(problem.merit(&te, &mu_eq, &mu_in), alpha) {
                    accepted = Some((tx, te));
                }
                alpha *= 0.5;
            }
        }

        let (new_x, new_eval) = match accepted {
            Some(a) => a,
            None => {
                // Line search stalled: restart curvature model and retry.
                hess = DMatrix::identity(n, n);
                let tx = &x + d * 1e-3;
                let te = problem.evaluate(&tx)?;
                (tx, te)
            }
        };

        // Damped BFGS on the Lagrangian gradient difference.
        let s = &new_x - &x;
        let y = lagrangian_gradient(&new_eval, &lambda_eq, &lambda_in)
            - lagrangian_gradient(&eval, &lambda_eq, &lambda_in);
        bfgs_update(&mut hess, &s, &y);

        x = new_x;
        eval = new_eval;
    }

    if !converged {
        // Refresh the multiplier estimate at the final point for reporting.
        if let Ok(qp) = solve_qp_with_relaxation(&hess, &eval) {
            lambda_eq = qp.lambda_eq;
            lambda_in = qp.lambda_in;
            stationarity = lagrangian_gradient(&eval, &lambda_eq, &lambda_in).amax();
        }
    }

    Ok(SolverResult {
        objective: eval.f,
        max_violation: eval.violation(),
        max_equality_violation: eval.eq_violation(),
        min_inequality: eval.min_ineq(),
        stationarity,
        equality_multipliers: lambda_eq,
        inequality_multipliers: lambda_in,
        iterations,
        converged,
        solution: x,
    })
}

fn lagrangian_gradient(e: &Evaluation, lambda_eq: &[f64], lambda_in: &[f64]) -> DVector<f64> {
    let mut g = e.grad.clone();
    for (k, l) in lambda_eq.iter().enumerate() {
        g -= e.a_eq.row(k).transpose() * *l;
    }
    for (k, l) in lambda_in.iter().enumerate() {
        g -= e.a_in.row(k).transpose() * *l;
    }
    g
}

fn bfgs_update(hess: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*hess * s;
    let sbs = s.dot(&bs);
    if !(sbs > 1e-300) {
        return;
    }
    let sy = s.dot(y);
    let y = if sy >= 0.2 * sbs {
        y.clone()
    } else {
        let theta = 0.8 * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    };
    let sy = s.dot(&y);
    if !(sy > 1e-300) {
        return;
    }
    *hess += &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
}

struct QpSolution {
    step: DVector<f64>,
    lambda_eq: Vec<f64>,
    lambda_in: Vec<f64>,
    /// `ξ ∈ [0, 1]`; zero unless the linearization was inconsistent.
    relaxation: f64,
}

fn solve_qp_with_relaxation(hess: &DMatrix<f64>, e: &Evaluation) -> Result<QpSolution> {
    match solve_qp(hess, e) {
        Ok(qp) => Ok(qp),
        Err(_) => solve_relaxed_qp(hess, e),
    }
}

#[derive(Debug)]
struct QpInfeasible;

/// `min ½dᵀBd + gᵀd` s.t. `A_eq d + c_eq = 0`, `A_in d + c_in ≥ 0`.
fn solve_qp(hess: &DMatrix<f64>, e: &Evaluation) -> std::result::Result<QpSolution, QpInfeasible> {
    let m_eq = e.c_eq.len();
    let a = stack_rows(&e.a_eq, &e.a_in);
    let c = stack_vec(&e.c_eq, &e.c_in);
    let (d, lambda) = dual_active_set(hess, &e.grad, &a, &c, m_eq)?;
    Ok(QpSolution {
        step: d,
        lambda_eq: lambda.rows(0, m_eq).iter().copied().collect(),
        lambda_in: lambda.rows(m_eq, e.c_in.len()).iter().copied().collect(),
        relaxation: 0.0,
    })
}

/// Always-feasible relaxation: residuals of equalities and of currently
/// violated inequalities are scaled by `1 − ξ`, with `ξ` heavily penalized.
fn solve_relaxed_qp(hess: &DMatrix<f64>, e: &Evaluation) -> Result<QpSolution> {
    let n = hess.nrows();
    let m_eq = e.c_eq.len();
    let m_in = e.c_in.len();
    let rho = 1e6 * (1.0 + hess.diagonal().amax());

    let mut b = DMatrix::zeros(n + 1, n + 1);
    b.view_mut((0, 0), (n, n)).copy_from(hess);
    b[(n, n)] = rho;
    let mut g = DVector::zeros(n + 1);
    g.rows_mut(0, n).copy_from(&e.grad);

    let rows = m_eq + m_in + 2;
    let mut a = DMatrix::zeros(rows, n + 1);
    let mut c = DVector::zeros(rows);
    for k in 0..m_eq {
        a.view_mut((k, 0), (1, n)).copy_from(&e.a_eq.row(k));
        a[(k, n)] = -e.c_eq[k];
        c[k] = e.c_eq[k];
    }
    for k in 0..m_in {
        let r = m_eq + k;
        a.view_mut((r, 0), (1, n)).copy_from(&e.a_in.row(k));
        if e.c_in[k] < 0.0 {
            a[(r, n)] = -e.c_in[k];
        }
        c[r] = e.c_in[k];
    }
    // 0 ≤ ξ ≤ 1
    a[(m_eq + m_in, n)] = 1.0;
    a[(m_eq + m_in + 1, n)] = -1.0;
    c[m_eq + m_in + 1] = 1.0;

    let (z, lambda) =
        dual_active_set(&b, &g, &a, &c, m_eq).map_err(|_| Error::NumericalFailure {
            context: "relaxed QP subproblem failed".into(),
            point: vec![],
        })?;
    Ok(QpSolution {
        step: z.rows(0, n).into_owned(),
        lambda_eq: lambda.rows(0, m_eq).iter().copied().collect(),
        lambda_in: lambda.rows(m_eq, m_in).iter().copied().collect(),
        relaxation: z[n].clamp(0.0, 1.0),
    })
}

fn stack_rows(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let n = top.ncols().max(bottom.ncols());
    let mut m = DMatrix::zeros(top.nrows() + bottom.nrows(), n);
    if top.nrows() > 0 {
        m.view_mut((0, 0), (top.nrows(), n)).copy_from(top);
    }
    if bottom.nrows() > 0 {
        m.view_mut((top.nrows(), 0), (bottom.nrows(), n))
            .copy_from(bottom);
    }
    m
}

fn stack_vec(top: &DVector<f64>, bottom: &DVector<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(top.len() + bottom.len());
    v.rows_mut(0, top.len()).copy_from(top);
    v.rows_mut(top.len(), bottom.len()).copy_from(bottom);
    v
}

/// Strictly convex QP via its dual. With `d(λ) = B⁻¹(Aᵀλ − g)` the dual is
/// `min ½λᵀMλ + λᵀ(c − AB⁻¹g)` with `M = AB⁻¹Aᵀ`, free equality multipliers
/// and nonnegative inequality multipliers; its gradient is the primal
/// constraint residual `A d + c`. Solved by a primal active-set method on
/// the sign bounds starting from `λ_in = 0`. Primal infeasibility shows up
/// as an unbounded dual.
fn dual_active_set(
    hess: &DMatrix<f64>,
    grad: &DVector<f64>,
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    m_eq: usize,
) -> std::result::Result<(DVector<f64>, DVector<f64>), QpInfeasible> {
    let m = a.nrows();
    let chol = hess.clone().cholesky().ok_or(QpInfeasible)?;
    let h = chol.solve(grad);
    if m == 0 {
        return Ok((-h, DVector::zeros(0)));
    }
    let w = chol.solve(&a.transpose()); // B⁻¹Aᵀ, n×m
    let big_m = a * &w;
    let q = c - a * &h;
    let reg = 1e-13 * (1.0 + big_m.diagonal().amax());

    let mut lambda = DVector::<f64>::zeros(m);
    // Inequalities start pinned at zero; equalities are always free.
    let mut free: Vec<bool> = (0..m).map(|k| k < m_eq).collect();
    let viol_tol = 1e-13 * (1.0 + c.amax());
    let bound = 1e9 * (1.0 + grad.amax() + big_m.diagonal().amax());

    for _ in 0..(10 * m + 50) {
        let idx: Vec<usize> = (0..m).filter(|&k| free[k]).collect();
        let mut candidate = DVector::<f64>::zeros(m);
        if !idx.is_empty() {
            let k = idx.len();
            let mut sub = DMatrix::zeros(k, k);
            let mut rhs = DVector::zeros(k);
            for (r, &i) in idx.iter().enumerate() {
                for (s, &j) in idx.iter().enumerate() {
                    sub[(r, s)] = big_m[(i, j)];
                }
                sub[(r, r)] += reg;
                rhs[r] = -q[i];
            }
            let sol = sub.lu().solve(&rhs).ok_or(QpInfeasible)?;
            for (r, &i) in idx.iter().enumerate() {
                candidate[i] = sol[r];
            }
        }
        if candidate.amax() > bound || candidate.iter().any(|v| !v.is_finite()) {
            return Err(QpInfeasible);
        }

        // Step toward the candidate, stopping at the first inequality
        // multiplier that would turn negative.
        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &idx {
            if i >= m_eq && candidate[i] < 0.0 {
                let ratio = lambda[i] / (lambda[i] - candidate[i]);
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        if let Some(i) = blocking {
            lambda += (&candidate - &lambda) * alpha;
            lambda[i] = 0.0;
            free[i] = false;
            continue;
        }
        lambda = candidate;

        // Dual gradient = primal residual; release the most violated
        // pinned inequality.
        let residual = &big_m * &lambda + &q;
        let entering = (m_eq..m)
            .filter(|&k| !free[k] && residual[k] < -viol_tol)
            .min_by(|&i, &j| residual[i].total_cmp(&residual[j]));
        match entering {
            Some(k) => free[k] = true,
            None => {
                let d = &w * &lambda - h;
                return Ok((d, lambda));
            }
        }
    }
    Err(QpInfeasible)
}

/// Worst relative mismatch between analytic gradients and central finite
/// differences, over the objective and every constraint.
pub fn check_gradient(problem: &NlpProblem, point: &DVector<f64>, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {h}"
        )));
    }
    let mut worst: f64 = 0.0;
    let functions = std::iter::once(&problem.objective)
        .chain(problem.equalities.iter())
        .chain(problem.inequalities.iter());
    for f in functions {
        let (_, analytic) = f(point);
        let mut numeric = DVector::zeros(point.len());
        for k in 0..point.len() {
            let mut xp = point.clone();
            let mut xm = point.clone();
            xp[k] += h;
            xm[k] -= h;
            numeric[k] = (f(&xp).0 - f(&xm).0) / (2.0 * h);
        }
        let scale = analytic.amax().max(numeric.amax()).max(1e-8);
        worst = worst.max((&analytic - &numeric).amax() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad_to(target: Vec<f64>) -> SmoothFn<'static> {
        Box::new(move |x: &DVector<f64>| {
            let t = DVector::from_vec(target.clone());
            let r = x - t;
            (r.norm_squared(), r * 2.0)
        })
    }

    #[test]
    fn projection_onto_line() {
        let problem = NlpProblem {
            dimension: 2,
            objective: quad_to(vec![1.0, 1.0]),
            equalities: vec![Box::new(|x: &DVector<f64>| {
                (x[0] + x[1] - 1.0, DVector::from_vec(vec![1.0, 1.0]))
            })],
            inequalities: vec![],
            initial_point: DVector::from_vec(vec![3.0, -2.0]),
        };
        let r = minimize_constrained(&problem, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.solution[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(r.solution[1], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(r.objective, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn active_inequality() {
        let problem = NlpProblem {
            dimension: 1,
            objective: quad_to(vec![0.0]),
            equalities: vec![],
            inequalities: vec![Box::new(|x: &DVector<f64>| {
                (x[0] - 1.0, DVector::from_vec(vec![1.0]))
            })],
            initial_point: DVector::from_vec(vec![5.0]),
        };
        let r = minimize_constrained(&problem, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.solution[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.inequality_multipliers[0], 2.0, epsilon = 1e-5);
    }

    #[test]
    fn symmetric_stretch_to_rod_length() {
        let problem = NlpProblem {
            dimension: 6,
            objective: quad_to(vec![0.0, 0.0, 0.0, 0.30, 0.0, 0.0]),
            equalities: vec![Box::new(|x: &DVector<f64>| {
                let d = x.fixed_rows::<3>(0) - x.fixed_rows::<3>(3);
                let n = d.norm();
                let u = d / n;
                let mut g = DVector::zeros(6);
                g.fixed_rows_mut::<3>(0).copy_from(&u);
                g.fixed_rows_mut::<3>(3).copy_from(&-u);
                (n - 0.36, g)
            })],
            inequalities: vec![],
            initial_point: DVector::from_vec(vec![0.0, 0.0, 0.0, 0.30, 0.0, 0.0]),
        };
        let r = minimize_constrained(&problem, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        let expected = [-0.03, 0.0, 0.0, 0.33, 0.0, 0.0];
        for (a, b) in r.solution.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn infeasible_start_recovers() {
        // Start violating the inequality; linearization stays consistent.
        let problem = NlpProblem {
            dimension: 2,
            objective: quad_to(vec![0.0, 0.0]),
            equalities: vec![],
            inequalities: vec![
                Box::new(|x: &DVector<f64>| (x[0] - 1.0, DVector::from_vec(vec![1.0, 0.0]))),
                Box::new(|x: &DVector<f64>| (x[1] - 2.0, DVector::from_vec(vec![0.0, 1.0]))),
            ],
            initial_point: DVector::from_vec(vec![-4.0, -4.0]),
        };
        let r = minimize_constrained(&problem, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.solution[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.solution[1], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn inconsistent_linearization_uses_relaxation() {
        // x² = 1 linearized at x = 0 has zero gradient: the QP is
        // inconsistent on the first iteration.
        let problem = NlpProblem {
            dimension: 1,
            objective: quad_to(vec![3.0]),
            equalities: vec![Box::new(|x: &DVector<f64>| {
                (x[0] * x[0] - 1.0, DVector::from_vec(vec![2.0 * x[0]]))
            })],
            inequalities: vec![],
            initial_point: DVector::from_vec(vec![0.0]),
        };
        let r = minimize_constrained(&problem, &SolverConfig::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert_abs_diff_eq!(r.solution[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn nan_objective_is_reported() {
        let problem = NlpProblem {
            dimension: 1,
            objective: Box::new(|x: &DVector<f64>| (f64::NAN, x.clone())),
            equalities: vec![],
            inequalities: vec![],
            initial_point: DVector::from_vec(vec![1.0]),
        };
        match minimize_constrained(&problem, &SolverConfig::default()) {
            Err(Error::NumericalFailure { point, .. }) => assert_eq!(point, vec![1.0]),
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }

    #[test]
    fn gradient_checks() {
        let good = NlpProblem {
            dimension: 3,
            objective: quad_to(vec![0.3, -0.2, 0.9]),
            equalities: vec![],
            inequalities: vec![],
            initial_point: DVector::zeros(3),
        };
        let p = DVector::from_vec(vec![0.1, 0.4, -0.7]);
        assert!(check_gradient(&good, &p, 1e-5).unwrap() < 1e-6);

        let bad = NlpProblem {
            dimension: 3,
            objective: Box::new(|x: &DVector<f64>| {
                let mut g = x * 2.0;
                g[1] += 1.0;
                (x.norm_squared(), g)
            }),
            equalities: vec![],
            inequalities: vec![],
            initial_point: DVector::zeros(3),
        };
        assert!(check_gradient(&bad, &p, 1e-5).unwrap() > 0.1);
        assert!(check_gradient(&good, &p, 0.0).is_err());
    }
}
