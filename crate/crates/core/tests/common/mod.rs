#![allow(dead_code)]

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, DVector};
use strider_core::qp::QuadProgProblem;

fn csc(m: &DMatrix<f64>, upper_only: bool) -> CscMatrix<f64> {
    let (mut i, mut j, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if upper_only && r > c {
                continue;
            }
            let x = m[(r, c)];
            if x != 0.0 {
                i.push(r);
                j.push(c);
                v.push(x);
            }
        }
    }
    CscMatrix::new_from_triplets(m.nrows(), m.ncols(), i, j, v)
}

/// Solves `problem` with the interior-point solver from the clarabel crate.
pub fn interior_point_solve(problem: &QuadProgProblem) -> Option<DVector<f64>> {
    let n = problem.dim();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for r in 0..problem.eq_rhs.len() {
        rows.push(problem.eq_matrix.row(r).transpose());
        rhs.push(problem.eq_rhs[r]);
    }
    let n_eq = rows.len();
    for r in 0..problem.ineq_rhs.len() {
        rows.push(problem.ineq_matrix.row(r).transpose());
        rhs.push(problem.ineq_rhs[r]);
    }
    for k in 0..n {
        if problem.upper[k].is_finite() {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            rows.push(e);
            rhs.push(problem.upper[k]);
        }
        if problem.lower[k].is_finite() {
            let mut e = DVector::zeros(n);
            e[k] = -1.0;
            rows.push(e);
            rhs.push(-problem.lower[k]);
        }
    }
    let a = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
    let cones = [
        SupportedConeT::ZeroConeT(n_eq),
        SupportedConeT::NonnegativeConeT(rows.len() - n_eq),
    ];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-12)
        .tol_gap_rel(1e-12)
        .tol_feas(1e-12)
        .max_iter(500)
        .build()
        .ok()?;
    let q: Vec<f64> = problem.linear.iter().copied().collect();
    let mut solver = DefaultSolver::new(&csc(&problem.cost, true), &q, &csc(&a, false), &rhs, &cones, settings).ok()?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Some(DVector::from_vec(solver.solution.x.clone())),
        _ => None,
    }
}
