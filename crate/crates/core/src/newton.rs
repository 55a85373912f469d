//! Damped Newton iteration for `residual(t1; α) = 0` at fixed parameters.
//!
//! The translation mode `t1'` is odd, so the problem is posed on even traces:
//! the unknowns are `t1[0..=N/2]` and the equations are the residual at the
//! same collocation points.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harmonic;
use crate::linalg::{gmres, lu_solve};
use crate::model::{Grid, Params, SurfaceTrace, WaveSolution};
use crate::system::{self, linear_multiplier, Linearization, SystemError};

/// Largest grid on which [`LinearSolver::Auto`] assembles the dense Jacobian.
pub const DENSE_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    Dense,
    Krylov,
    Auto,
}

impl LinearSolver {
    pub fn uses_dense(self, n_points: usize) -> bool {
        match self {
            LinearSolver::Dense => true,
            LinearSolver::Krylov => false,
            LinearSolver::Auto => n_points <= DENSE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    /// Sup-norm residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub backtrack: f64,
    pub min_step: f64,
    pub linear_solver: LinearSolver,
    /// Relative tolerance of the Krylov solve.
    pub krylov_rtol: f64,
    pub krylov_restart: usize,
    pub krylov_max_iter: usize,
    /// Tail level above which the result is flagged as under-resolved in `x`.
    pub tail_tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 40,
            backtrack: 0.5,
            min_step: 1.0 / 1024.0,
            linear_solver: LinearSolver::Auto,
            krylov_rtol: 1e-12,
            krylov_restart: 80,
            krylov_max_iter: 2000,
            tail_tol: 1e-9,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), NewtonError> {
        let bad = |m: &str| Err(NewtonError::InvalidConfig(m.to_string()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return bad("min_step must lie in (0, 1]");
        }
        if !(self.krylov_rtol > 0.0) || self.krylov_restart < 1 {
            return bad("invalid Krylov settings");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonFlag {
    /// `α ≥ α_cr`: no nontrivial solitary waves are expected.
    AboveCriticalAlpha,
    /// A nontrivial initializer converged to the trivial state.
    CollapsedToTrivial,
    /// The converged trace does not decay to `tail_tol` inside the box.
    TailExceedsTolerance,
}

#[derive(Debug, Error, Clone)]
pub enum NewtonError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("invalid Newton configuration: {0}")]
    InvalidConfig(String),
    #[error("no convergence after {} residual evaluations, best residual {:.3e}", .history.len(), .best.residual_norm())]
    NoConvergence {
        best: Box<WaveSolution>,
        history: Vec<f64>,
    },
    #[error("iterate left the admissible set (lambda = {lambda:.3e}) at iteration {iteration}")]
    LeftAdmissibleSet { lambda: f64, iteration: usize },
    #[error("linear solve failed at iteration {iteration}: {detail}")]
    SingularLinearSolve { iteration: usize, detail: String },
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub solution: WaveSolution,
    /// Residual sup-norm of every accepted iterate, the initializer first.
    pub history: Vec<f64>,
    pub flags: Vec<NewtonFlag>,
    pub dense: bool,
}

impl NewtonOutcome {
    /// Number of residual evaluations at accepted iterates.
    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

/// The linearization restricted to even traces, acting on half vectors.
pub struct EvenOperator {
    lin: Linearization,
    grid: Grid,
    params: Params,
}

impl EvenOperator {
    pub fn new(t1: &SurfaceTrace, p: &Params, g: &Grid) -> Result<Self, SystemError> {
        Ok(Self {
            lin: Linearization::new(t1, p, g)?,
            grid: g.clone(),
            params: *p,
        })
    }

    pub fn apply(&self, half: &[f64]) -> Result<Vec<f64>, SystemError> {
        let full = SurfaceTrace::from_even_half(half, self.grid.n_points());
        Ok(self.lin.apply(&full)?.even_half().to_vec())
    }

    /// Inverse of the trivial-state symbol, with `|m|` floored at
    /// `1e-3 (1 + ε₁)`.
    pub fn precondition(&self, half: &[f64]) -> Result<Vec<f64>, SystemError> {
        let floor = 1e-3 * (1.0 + self.params.eps1());
        let p = self.params;
        let full = SurfaceTrace::from_even_half(half, self.grid.n_points());
        let out = harmonic::real_multiplier(&full, &self.grid, |k| {
            let m = linear_multiplier(k, &p);
            let sign = if m < 0.0 { -1.0 } else { 1.0 };
            sign / m.abs().max(floor)
        })?;
        Ok(out.even_half().to_vec())
    }

    /// Dense matrix of [`Self::apply`], one column per even basis trace.
    pub fn matrix(&self) -> Result<DMatrix<f64>, SystemError> {
        let m = self.grid.half_size();
        let mut a = DMatrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for col in 0..m {
            e[col] = 1.0;
            let c = self.apply(&e)?;
            a.set_column(col, &nalgebra::DVector::from_vec(c));
            e[col] = 0.0;
        }
        Ok(a)
    }
}

/// Solves `J dx = rhs` on even half vectors.
pub(crate) fn solve_even(
    op: &EvenOperator,
    rhs: &[f64],
    cfg: &NewtonConfig,
    dense: bool,
    iteration: usize,
) -> Result<Vec<f64>, NewtonError> {
    if dense {
        lu_solve(op.matrix()?, rhs).ok_or_else(|| NewtonError::SingularLinearSolve {
            iteration,
            detail: "dense LU factorization has a vanishing pivot".into(),
        })
    } else {
        let out = gmres(
            |v| op.apply(v),
            |v| op.precondition(v),
            rhs,
            cfg.krylov_rtol,
            cfg.krylov_restart,
            cfg.krylov_max_iter,
        )?;
        if out.x.iter().any(|v| !v.is_finite()) || out.relative_residual > 1e-6 {
            return Err(NewtonError::SingularLinearSolve {
                iteration,
                detail: format!(
                    "GMRES stalled at relative residual {:.3e} after {} iterations",
                    out.relative_residual, out.iterations
                ),
            });
        }
        Ok(out.x)
    }
}

/// Damped Newton from `t1_init`. Every iterate is re-symmetrized, steps that
/// would raise the residual sup-norm or leave the admissible set `λ > 0` are
/// halved down to `min_step`.
pub fn newton_solve(
    t1_init: &SurfaceTrace,
    p: &Params,
    g: &Grid,
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome, NewtonError> {
    cfg.validate()?;
    g.check(t1_init).map_err(SystemError::from)?;
    t1_init.check_finite().map_err(SystemError::from)?;
    let dense = cfg.linear_solver.uses_dense(g.n_points());
    let mut t = t1_init.clone().symmetrized();
    let lam = system::lambda_min(&t, p, g)?;
    if !(lam > 0.0) {
        return Err(NewtonError::LeftAdmissibleSet {
            lambda: lam,
            iteration: 0,
        });
    }
    let init_size = t.sup_norm();
    let mut r = system::residual(&t, p, g)?;
    let mut norm = r.sup_norm();
    let mut history = vec![norm];
    let mut iteration = 0;
    while norm > cfg.tol {
        if iteration + 1 >= cfg.max_iter {
            return Err(no_convergence(t, norm, history, p, g));
        }
        iteration += 1;
        let op = EvenOperator::new(&t, p, g)?;
        let rhs: Vec<f64> = r.even_half().iter().map(|v| -v).collect();
        let dx = solve_even(&op, &rhs, cfg, dense, iteration)?;
        let dt = SurfaceTrace::from_even_half(&dx, g.n_points());

        let mut step = 1.0;
        let mut accepted = None;
        let mut last_lambda = lam;
        while step >= cfg.min_step {
            let trial = t.axpy(step, &dt).symmetrized();
            let trial_ok = trial.check_finite().is_ok();
            if trial_ok {
                let lam = system::lambda_min(&trial, p, g)?;
                last_lambda = lam;
                if lam > 0.0 {
                    if let Ok(rt) = system::residual(&trial, p, g) {
                        let nt = rt.sup_norm();
                        if nt < norm {
                            accepted = Some((trial, rt, nt));
                            break;
                        }
                    }
                }
            }
            step *= cfg.backtrack;
        }
        match accepted {
            Some((trial, rt, nt)) => {
                t = trial;
                r = rt;
                norm = nt;
                history.push(norm);
            }
            None if !(last_lambda > 0.0) => {
                return Err(NewtonError::LeftAdmissibleSet {
                    lambda: last_lambda,
                    iteration,
                })
            }
            None => return Err(no_convergence(t, norm, history, p, g)),
        }
    }

    let solution = WaveSolution::from_parts(*p, g.clone(), t, norm);
    let mut flags = Vec::new();
    if p.alpha() >= p.alpha_cr() {
        flags.push(NewtonFlag::AboveCriticalAlpha);
    }
    if init_size > 0.0 && solution.t1().sup_norm() <= 1e-6 * init_size {
        flags.push(NewtonFlag::CollapsedToTrivial);
    }
    if solution.tail() > cfg.tail_tol {
        flags.push(NewtonFlag::TailExceedsTolerance);
    }
    Ok(NewtonOutcome {
        solution,
        history,
        flags,
        dense,
    })
}

fn no_convergence(t: SurfaceTrace, norm: f64, history: Vec<f64>, p: &Params, g: &Grid) -> NewtonError {
    NewtonError::NoConvergence {
        best: Box::new(WaveSolution::from_parts(*p, g.clone(), t, norm)),
        history,
    }
}
