//! Dense strictly convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//!     minimize     1/2 x' P x + q' x
//!     subject to   A_eq x  = b_eq
//!                  A_in x <= b_in
//!                  lb <= x <= ub
//! ```
//!
//! and are solved with the Goldfarb-Idnani dual active-set method. The
//! unconstrained minimum is the starting point; violated inequalities are
//! added one at a time while dual feasibility is kept, so the solver needs
//! no feasible starting point and reports infeasibility when the dual step
//! becomes unbounded.
//!
//! The factorization state follows the usual formulation: `J = L⁻ᵀ` is
//! updated by Givens rotations so that its first `iq` columns span the
//! active normals, and `R` holds the upper-triangular factor of the active
//! set in that basis.

use nalgebra::{DMatrix, DVector};

use crate::error::QpError;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct QuadProgProblem {
    pub cost: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QuadProgProblem {
    /// Unconstrained problem; add constraints with the `with_*` builders.
    pub fn new(cost: DMatrix<f64>, linear: DVector<f64>) -> Self {
        let n = linear.len();
        Self {
            cost,
            linear,
            eq_matrix: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
            ineq_matrix: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.eq_matrix = a;
        self.eq_rhs = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.ineq_matrix = a;
        self.ineq_rhs = b;
        self
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    /// Number of constraint rows, counting each finite bound once.
    pub fn constraint_count(&self) -> usize {
        let bounds = self
            .lower
            .iter()
            .chain(self.upper.iter())
            .filter(|b| b.is_finite())
            .count();
        self.eq_rhs.len() + self.ineq_rhs.len() + bounds
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.cost * x)) + self.linear.dot(x)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.dim();
        let dim_err = |what: &str| Err(QpError::Dimension(what.to_string()));
        if self.cost.nrows() != n || self.cost.ncols() != n {
            return dim_err("cost matrix must be n x n");
        }
        if self.eq_matrix.ncols() != n || self.eq_matrix.nrows() != self.eq_rhs.len() {
            return dim_err("equality block shape");
        }
        if self.ineq_matrix.ncols() != n || self.ineq_matrix.nrows() != self.ineq_rhs.len() {
            return dim_err("inequality block shape");
        }
        if self.lower.len() != n || self.upper.len() != n {
            return dim_err("bound vector length");
        }
        let scale = self.cost.amax().max(1.0);
        if (&self.cost - self.cost.transpose()).amax() > 1e-10 * scale {
            return dim_err("cost matrix is not symmetric");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub status: QpStatus,
    /// ‖Px + q + Aᵀλ‖∞ relative to the cost data scale.
    pub stationarity: f64,
    /// Largest constraint violation relative to the right-hand side scale.
    pub primal_residual: f64,
    /// Largest |multiplier × slack| over inequality rows.
    pub complementarity: f64,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tolerance: f64,
    /// Defaults to `10 · (n + constraint count)` when `None`.
    pub max_iterations: Option<usize>,
    /// Accepted for interface compatibility; the dual method always starts
    /// from the unconstrained minimum.
    pub warm_start: Option<DVector<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
            warm_start: None,
        }
    }
}

pub fn solve(problem: &QuadProgProblem, tolerance: f64, max_iterations: usize) -> Result<QpSolution, QpError> {
    solve_with(
        problem,
        &SolveOptions {
            tolerance,
            max_iterations: Some(max_iterations),
            warm_start: None,
        },
    )
}

pub fn solve_default(problem: &QuadProgProblem) -> Result<QpSolution, QpError> {
    solve_with(problem, &SolveOptions::default())
}

pub fn solve_with(problem: &QuadProgProblem, options: &SolveOptions) -> Result<QpSolution, QpError> {
    problem.validate()?;
    let n = problem.dim();
    let max_iterations = options
        .max_iterations
        .unwrap_or(10 * (n + problem.constraint_count()));

    // Translate to n·x + c ≥ 0 / = 0 columns.
    let mut eq_cols: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..problem.eq_rhs.len() {
        eq_cols.push((problem.eq_matrix.row(i).transpose(), -problem.eq_rhs[i]));
    }
    let mut in_cols: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..problem.ineq_rhs.len() {
        in_cols.push((-problem.ineq_matrix.row(i).transpose(), problem.ineq_rhs[i]));
    }
    for i in 0..n {
        let (lb, ub) = (problem.lower[i], problem.upper[i]);
        if lb > ub {
            return Ok(infeasible_solution(n));
        }
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        if lb == ub {
            eq_cols.push((e, -lb));
            continue;
        }
        if lb.is_finite() {
            in_cols.push((e.clone(), -lb));
        }
        if ub.is_finite() {
            in_cols.push((-e, ub));
        }
    }

    let ce = columns(n, &eq_cols);
    let ce0 = DVector::from_iterator(eq_cols.len(), eq_cols.iter().map(|c| c.1));
    let ci = columns(n, &in_cols);
    let ci0 = DVector::from_iterator(in_cols.len(), in_cols.iter().map(|c| c.1));

    let outcome = dual_active_set(
        &problem.cost,
        &problem.linear,
        &ce,
        &ce0,
        &ci,
        &ci0,
        max_iterations,
        options.tolerance,
    )?;

    let mut x = outcome.x;
    for i in 0..n {
        x[i] = x[i].clamp(problem.lower[i], problem.upper[i]);
    }

    // KKT residuals on the translated system.
    let mut grad = &problem.cost * &x + &problem.linear;
    let mut complementarity: f64 = 0.0;
    for (k, &id) in outcome.active.iter().enumerate() {
        let mu = outcome.multipliers[k];
        match id {
            ConstraintId::Eq(i) => grad -= ce.column(i) * mu,
            ConstraintId::In(i) => {
                grad -= ci.column(i) * mu;
                let slack = ci.column(i).dot(&x) + ci0[i];
                complementarity = complementarity.max((mu * slack).abs());
            }
        }
    }
    let data_scale = problem
        .linear
        .amax()
        .max((&problem.cost * &x).amax())
        .max(1.0);
    let stationarity = grad.amax() / data_scale;

    let mut violation: f64 = 0.0;
    for i in 0..ce.ncols() {
        violation = violation.max((ce.column(i).dot(&x) + ce0[i]).abs());
    }
    for i in 0..ci.ncols() {
        violation = violation.max(-(ci.column(i).dot(&x) + ci0[i]));
    }
    let rhs_scale = ce0.amax().max(ci0.amax()).max(1.0);
    let primal_residual = violation / rhs_scale;

    let status = match outcome.status {
        QpStatus::Optimal if primal_residual > options.tolerance => QpStatus::Infeasible,
        s => s,
    };

    Ok(QpSolution {
        x,
        status,
        stationarity,
        primal_residual,
        complementarity,
        iterations: outcome.iterations,
    })
}

fn infeasible_solution(n: usize) -> QpSolution {
    QpSolution {
        x: DVector::zeros(n),
        status: QpStatus::Infeasible,
        stationarity: f64::INFINITY,
        primal_residual: f64::INFINITY,
        complementarity: f64::INFINITY,
        iterations: 0,
    }
}

fn columns(n: usize, cols: &[(DVector<f64>, f64)]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, (c, _)) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ConstraintId {
    Eq(usize),
    In(usize),
}

struct Outcome {
    x: DVector<f64>,
    status: QpStatus,
    active: Vec<ConstraintId>,
    multipliers: Vec<f64>,
    iterations: usize,
}

/// Orthogonal factorization state of the active set.
struct Factors {
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    r_norm: f64,
    iq: usize,
}

impl Factors {
    /// d = Jᵀ n
    fn compute_d(&self, d: &mut DVector<f64>, normal: nalgebra::DVectorView<f64>) {
        d.gemv_tr(1.0, &self.j, &normal, 0.0);
    }

    /// z = J₂ d₂ (primal step direction in the null space of the active set)
    fn update_z(&self, z: &mut DVector<f64>, d: &DVector<f64>) {
        let n = d.len();
        z.fill(0.0);
        for k in self.iq..n {
            z.axpy(d[k], &self.j.column(k), 1.0);
        }
    }

    /// r = R⁻¹ d₁ (negative dual step direction)
    fn update_r(&self, r: &mut DVector<f64>, d: &DVector<f64>) {
        for i in (0..self.iq).rev() {
            let mut sum = 0.0;
            for k in i + 1..self.iq {
                sum += self.r[(i, k)] * r[k];
            }
            r[i] = (d[i] - sum) / self.r[(i, i)];
        }
    }

    /// Rotates `d` so that only its first `iq + 1` entries are nonzero and
    /// appends it to `R`. Returns false, leaving `iq` unchanged, if the new
    /// normal is numerically dependent on the active ones.
    fn add_constraint(&mut self, d: &mut DVector<f64>) -> bool {
        let n = d.len();
        let iq = self.iq;
        for jj in (iq + 1..n).rev() {
            let mut cc = d[jj - 1];
            let mut ss = d[jj];
            let h = cc.hypot(ss);
            if h == 0.0 {
                continue;
            }
            d[jj] = 0.0;
            ss /= h;
            cc /= h;
            if cc < 0.0 {
                cc = -cc;
                ss = -ss;
                d[jj - 1] = -h;
            } else {
                d[jj - 1] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in 0..n {
                let t1 = self.j[(k, jj - 1)];
                let t2 = self.j[(k, jj)];
                let a = t1 * cc + t2 * ss;
                self.j[(k, jj - 1)] = a;
                self.j[(k, jj)] = xny * (t1 + a) - t2;
            }
        }
        if iq >= n || d[iq].abs() <= f64::EPSILON * self.r_norm {
            return false;
        }
        for i in 0..=iq {
            self.r[(i, iq)] = d[i];
        }
        self.r_norm = self.r_norm.max(d[iq].abs());
        self.iq += 1;
        true
    }

    /// Removes active entry `qq` (index into the active list), restoring the
    /// triangular shape of `R` with Givens rotations that are mirrored on `J`.
    fn delete_at(&mut self, qq: usize, active: &mut Vec<ConstraintId>, u: &mut Vec<f64>) {
        let n = self.j.nrows();
        let iq = self.iq;
        active.remove(qq);
        u.remove(qq);
        for i in qq..iq - 1 {
            for k in 0..n {
                self.r[(k, i)] = self.r[(k, i + 1)];
            }
        }
        for k in 0..n {
            self.r[(k, iq - 1)] = 0.0;
        }
        self.iq -= 1;
        let iq = self.iq;
        if iq == 0 {
            return;
        }
        for jj in qq..iq {
            let mut cc = self.r[(jj, jj)];
            let mut ss = self.r[(jj + 1, jj)];
            let h = cc.hypot(ss);
            if h == 0.0 {
                continue;
            }
            cc /= h;
            ss /= h;
            self.r[(jj + 1, jj)] = 0.0;
            if cc < 0.0 {
                self.r[(jj, jj)] = -h;
                cc = -cc;
                ss = -ss;
            } else {
                self.r[(jj, jj)] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in jj + 1..iq {
                let t1 = self.r[(jj, k)];
                let t2 = self.r[(jj + 1, k)];
                let a = t1 * cc + t2 * ss;
                self.r[(jj, k)] = a;
                self.r[(jj + 1, k)] = xny * (t1 + a) - t2;
            }
            for k in 0..n {
                let t1 = self.j[(k, jj)];
                let t2 = self.j[(k, jj + 1)];
                let a = t1 * cc + t2 * ss;
                self.j[(k, jj)] = a;
                self.j[(k, jj + 1)] = xny * (a + t1) - t2;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dual_active_set(
    g: &DMatrix<f64>,
    g0: &DVector<f64>,
    ce: &DMatrix<f64>,
    ce0: &DVector<f64>,
    ci: &DMatrix<f64>,
    ci0: &DVector<f64>,
    max_iterations: usize,
    tolerance: f64,
) -> Result<Outcome, QpError> {
    let n = g.nrows();
    let p = ce.ncols();
    let m = ci.ncols();

    let chol = g.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let j = chol
        .l()
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or(QpError::NotPositiveDefinite)?;
    let mut f = Factors {
        j,
        r: DMatrix::zeros(n, n),
        r_norm: 1.0,
        iq: 0,
    };

    let mut x = -chol.solve(g0);
    let mut d = DVector::zeros(n);
    let mut z = DVector::zeros(n);
    let mut r = DVector::zeros(n);
    let mut active: Vec<ConstraintId> = Vec::with_capacity(n);
    let mut u: Vec<f64> = Vec::with_capacity(n);

    let infeasible = |x: DVector<f64>, iterations| Outcome {
        x,
        status: QpStatus::Infeasible,
        active: Vec::new(),
        multipliers: Vec::new(),
        iterations,
    };

    for i in 0..p {
        let np = ce.column(i);
        f.compute_d(&mut d, np);
        f.update_z(&mut z, &d);
        f.update_r(&mut r, &d);
        let zn = z.dot(&np);
        let t2 = if z.norm_squared() > f64::EPSILON { -(np.dot(&x) + ce0[i]) / zn } else { 0.0 };
        if f.add_constraint(&mut d) {
            x.axpy(t2, &z, 1.0);
            for k in 0..active.len() {
                u[k] -= t2 * r[k];
            }
            active.push(ConstraintId::Eq(i));
            u.push(t2);
        } else if (np.dot(&x) + ce0[i]).abs() > tolerance * ce0[i].abs().max(1.0) {
            // dependent and inconsistent with the earlier equalities
            return Ok(infeasible(x, 0));
        }
    }
    let me = active.len();

    let feas_tol = |i: usize| 1e-3 * tolerance * ci0[i].abs().max(1.0);
    let mut excluded = vec![false; m];
    let mut s = DVector::zeros(m);
    let mut iterations = 0usize;

    loop {
        // choose the most violated inactive inequality
        let mut in_active = vec![false; m];
        for id in &active[me..] {
            if let ConstraintId::In(i) = id {
                in_active[*i] = true;
            }
        }
        let mut ip = None;
        let mut worst = 0.0;
        for i in 0..m {
            s[i] = ci.column(i).dot(&x) + ci0[i];
            if !in_active[i] && !excluded[i] && s[i] < -feas_tol(i) && s[i] < worst {
                worst = s[i];
                ip = Some(i);
            }
        }
        let Some(ip) = ip else {
            return Ok(Outcome {
                x,
                status: QpStatus::Optimal,
                active,
                multipliers: u,
                iterations,
            });
        };
        let np = ci.column(ip);
        let mut u_new = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iterations {
                return Ok(Outcome {
                    x,
                    status: QpStatus::MaxIterations,
                    active,
                    multipliers: u,
                    iterations,
                });
            }
            f.compute_d(&mut d, np);
            f.update_z(&mut z, &d);
            f.update_r(&mut r, &d);

            // partial step length, limited by dual feasibility
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for k in me..f.iq {
                if r[k] > 0.0 && u[k] / r[k] < t1 {
                    t1 = u[k] / r[k];
                    drop = Some(k);
                }
            }
            // full step length, making constraint ip active
            let t2 = if z.norm_squared() > f64::EPSILON {
                -s[ip] / z.dot(&np)
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if t == f64::INFINITY {
                return Ok(infeasible(x, iterations));
            }

            if t2 == f64::INFINITY {
                // step in dual space only
                for k in 0..f.iq {
                    u[k] -= t * r[k];
                }
                u_new += t;
                f.delete_at(drop.unwrap(), &mut active, &mut u);
                continue;
            }

            x.axpy(t, &z, 1.0);
            for k in 0..f.iq {
                u[k] -= t * r[k];
            }
            u_new += t;

            if t == t2 {
                if f.add_constraint(&mut d) {
                    active.push(ConstraintId::In(ip));
                    u.push(u_new);
                } else {
                    excluded[ip] = true;
                }
                break;
            }

            f.delete_at(drop.unwrap(), &mut active, &mut u);
            s[ip] = np.dot(&x) + ci0[ip];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn projection_onto_halfspace() {
        let prob = QuadProgProblem::new(DMatrix::identity(2, 2) * 2.0, dvector![0.0, 0.0])
            .with_inequalities(dmatrix![-1.0, 0.0], dvector![-1.0]);
        let sol = solve_default(&prob).unwrap();
        assert!(sol.is_optimal());
        assert_relative_eq!(sol.x, dvector![1.0, 0.0], epsilon = 1e-12);
    }

    #[test]
    fn equality_matches_kkt() {
        // KKT: [I 1; 1ᵀ 0][x; λ] = [1; 1; 1] → x = (0.5, 0.5)
        let prob = QuadProgProblem::new(DMatrix::identity(2, 2), dvector![-1.0, -1.0])
            .with_equalities(dmatrix![1.0, 1.0], dvector![1.0]);
        let sol = solve_default(&prob).unwrap();
        assert!(sol.is_optimal());
        assert_relative_eq!(sol.x, dvector![0.5, 0.5], epsilon = 1e-12);
    }

    #[test]
    fn pinned_bounds() {
        let c = dvector![0.3, -2.0, 5.0];
        let prob = QuadProgProblem::new(DMatrix::identity(3, 3), dvector![10.0, -4.0, 1.0])
            .with_bounds(c.clone(), c.clone());
        let sol = solve_default(&prob).unwrap();
        assert!(sol.is_optimal());
        assert_eq!(sol.x, c);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let prob = QuadProgProblem::new(DMatrix::identity(1, 1), dvector![0.0])
            .with_inequalities(dmatrix![1.0; -1.0], dvector![0.0, -1.0]);
        let sol = solve_default(&prob).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);

        let prob = QuadProgProblem::new(DMatrix::identity(1, 1), dvector![0.0])
            .with_bounds(dvector![1.0], dvector![0.0]);
        assert_eq!(solve_default(&prob).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let prob = QuadProgProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0, 0.0]);
        assert!(matches!(solve_default(&prob), Err(QpError::Dimension(_))));
        let prob = QuadProgProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0])
            .with_equalities(dmatrix![1.0, 1.0, 1.0], dvector![1.0]);
        assert!(matches!(solve_default(&prob), Err(QpError::Dimension(_))));
    }

    #[test]
    fn indefinite_cost_rejected() {
        let prob = QuadProgProblem::new(dmatrix![1.0, 0.0; 0.0, -1.0], dvector![0.0, 0.0]);
        assert!(matches!(solve_default(&prob), Err(QpError::NotPositiveDefinite)));
    }

    #[test]
    fn dependent_consistent_equalities_are_tolerated() {
        let prob = QuadProgProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0])
            .with_equalities(dmatrix![1.0, 1.0; 2.0, 2.0], dvector![1.0, 2.0]);
        let sol = solve_default(&prob).unwrap();
        assert!(sol.is_optimal());
        assert_relative_eq!(sol.x, dvector![0.5, 0.5], epsilon = 1e-12);

        let prob = QuadProgProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0])
            .with_equalities(dmatrix![1.0, 1.0; 2.0, 2.0], dvector![1.0, 3.0]);
        assert_eq!(solve_default(&prob).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn iteration_cap_reported() {
        let n = 6;
        let prob = QuadProgProblem::new(DMatrix::identity(n, n), DVector::zeros(n))
            .with_bounds(DVector::from_element(n, 1.0), DVector::from_element(n, 2.0));
        let sol = solve(&prob, 1e-9, 2).unwrap();
        assert_eq!(sol.status, QpStatus::MaxIterations);
        let sol = solve(&prob, 1e-9, 100).unwrap();
        assert!(sol.is_optimal());
        assert_relative_eq!(sol.x, DVector::from_element(n, 1.0), epsilon = 1e-12);
    }
}
