//! The branch of solitary waves bifurcating from the trivial flow at
//! `α = α_cr`: small-amplitude start, stepping in `ε = α_cr − α`,
//! pseudo-arclength continuation in `(t1, α)`, and the limiting-behaviour
//! monitors that end the branch.
//!
//! The box adapts as the wave grows: `L` and `N` double when the tail exceeds
//! `tail_tol`, halve when the outer half of the box is negligible, and `N`
//! doubles when the spectrum is not resolved.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{flux_identity_check, nodal_check};
use crate::harmonic::{self, spectral_tail};
use crate::linalg::{gmres, lu_solve};
use crate::model::{BaseParams, BranchPoint, Grid, ModelError, Params, SurfaceTrace, WaveSolution};
use crate::newton::{newton_solve, EvenOperator, NewtonConfig, NewtonError, NewtonFlag};
use crate::system::{self, SystemError};

/// Largest `ε` accepted by [`init_small`].
pub const EPS_SMALL_MAX: f64 = 0.1;
/// Largest relative change of a monitor over one step; larger changes shrink
/// the next step proportionally.
pub const MONITOR_STEP: f64 = 0.05;
/// Level of `sech²` at the box edge required by [`init_small`].
pub const EDGE_LEVEL: f64 = 1e-10;

#[derive(Debug, Error, Clone)]
pub enum ContinuationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("eps = {0} outside (0, {EPS_SMALL_MAX}]")]
    EpsOutOfRange(f64),
    #[error("grid too narrow: half-length {half_length} but the initializer needs L > {required:.3}")]
    GridTooNarrow { half_length: f64, required: f64 },
    #[error("invalid continuation configuration: {0}")]
    InvalidConfig(String),
    #[error("the first branch point did not converge: {0}")]
    StartFailed(NewtonError),
}

/// `3ε / (3 − 3γ + γ² + ε₁)`, the crest height of the initializer.
pub fn small_amplitude(eps: f64, base: &BaseParams) -> f64 {
    let g = base.gamma;
    3.0 * eps / (3.0 - 3.0 * g + g * g + base.eps1)
}

/// Smallest half-length on which the initializer at `eps` falls below
/// [`EDGE_LEVEL`] (relative to its crest) at the box edge.
pub fn required_half_length(eps: f64) -> f64 {
    // sech²(z) < δ  ⇔  cosh(z) > δ^{-1/2}
    2.0 * (1.0 / EDGE_LEVEL.sqrt()).acosh() / (3.0 * eps).sqrt()
}

/// Small-amplitude solitary wave `(3ε/(3 − 3γ + γ² + ε₁)) sech²(√(3ε) x / 2)`
/// with `α = α_cr − ε`.
pub fn init_small(
    eps: f64,
    base: &BaseParams,
    g: &Grid,
) -> Result<(SurfaceTrace, Params), ContinuationError> {
    if !(eps > 0.0 && eps <= EPS_SMALL_MAX) {
        return Err(ContinuationError::EpsOutOfRange(eps));
    }
    let required = required_half_length(eps);
    if g.half_length() <= required {
        return Err(ContinuationError::GridTooNarrow {
            half_length: g.half_length(),
            required,
        });
    }
    let p = base.with_alpha(base.alpha_cr() - eps)?;
    Ok((sech2_profile(eps, base, g), p))
}

/// The initializer profile at any `ε > 0`, without the range and box checks
/// of [`init_small`].
pub fn sech2_profile(eps: f64, base: &BaseParams, g: &Grid) -> SurfaceTrace {
    let a = small_amplitude(eps, base);
    let w = 0.5 * (3.0 * eps).sqrt();
    g.sample(|x| {
        let c = (w * x).cosh();
        a / (c * c)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationConfig {
    pub eps_start: f64,
    /// Ratio between successive `ε` in the stepping phase.
    pub eps_growth: f64,
    /// Largest Newton history length still counted as fast convergence.
    pub fast_iters: usize,
    pub m1_tol: Option<f64>,
    pub m2_tol: f64,
    pub m3_cap: f64,
    pub f_cap: f64,
    pub tail_tol: f64,
    pub budget: usize,
    pub ds_min: f64,
    pub ds_max: f64,
    pub corrector_max_iter: usize,
    /// Store every `store_every`-th solution (the last is always kept).
    pub store_every: usize,
    /// Relative spectral tail above which `N` is doubled.
    pub spectral_tol: f64,
    /// Largest `N` the branch may use.
    pub n_max: usize,
    /// Smallest `N` a shrinking box may reach.
    pub n_min: usize,
    pub newton: NewtonConfig,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            eps_start: 1e-3,
            eps_growth: 1.2,
            fast_iters: 5,
            m1_tol: None,
            m2_tol: 1e-2,
            m3_cap: 1e2,
            f_cap: 1e2,
            tail_tol: 1e-9,
            budget: 500,
            ds_min: 1e-8,
            ds_max: 0.05,
            corrector_max_iter: 8,
            store_every: 10,
            spectral_tol: 1e-10,
            n_max: 8192,
            n_min: 64,
            newton: NewtonConfig::default(),
        }
    }
}

impl ContinuationConfig {
    /// `m1_tol`, defaulting to `1e-2 (1 + ε₁)`.
    pub fn m1_threshold(&self, base: &BaseParams) -> f64 {
        self.m1_tol.unwrap_or(1e-2 * (1.0 + base.eps1))
    }

    pub fn validate(&self) -> Result<(), ContinuationError> {
        let bad = |m: &str| Err(ContinuationError::InvalidConfig(m.to_string()));
        if !(self.eps_start > 0.0 && self.eps_start <= EPS_SMALL_MAX) {
            return bad("eps_start must lie in (0, 0.1]");
        }
        if !(self.eps_growth > 1.0) {
            return bad("eps_growth must exceed 1");
        }
        if self.budget < 1 || self.store_every < 1 || self.corrector_max_iter < 1 {
            return bad("budget, store_every and corrector_max_iter must be positive");
        }
        if !(self.ds_min > 0.0 && self.ds_max > self.ds_min) {
            return bad("need 0 < ds_min < ds_max");
        }
        if !(self.tail_tol > 0.0 && self.spectral_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.n_min < 16 || self.n_max < self.n_min {
            return bad("need 16 <= n_min <= n_max");
        }
        self.newton
            .validate()
            .map_err(|e| ContinuationError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    M1Vanishing,
    M2Vanishing,
    M3Blowup,
    FroudeBlowup,
    StepFailure,
    Budget,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::M1Vanishing => "M1_VANISHING",
            StopReason::M2Vanishing => "M2_VANISHING",
            StopReason::M3Blowup => "M3_BLOWUP",
            StopReason::FroudeBlowup => "FROUDE_BLOWUP",
            StopReason::StepFailure => "STEP_FAILURE",
            StopReason::Budget => "BUDGET",
        }
    }

    /// Whether the reason is a monitor crossing its threshold.
    pub fn is_monitor(self) -> bool {
        !matches!(self, StopReason::StepFailure | StopReason::Budget)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridChange {
    Widen,
    Shrink,
    Refine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridEvent {
    /// Index of the point accepted on the new grid.
    pub point: usize,
    pub change: GridChange,
    pub half_length: f64,
    pub n_points: usize,
}

/// Identities evaluated at each accepted point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointChecks {
    pub flux_gap: f64,
    pub flux_tolerance: f64,
    pub w1_w1y_integral: f64,
    pub nodal: bool,
    /// `sup |Δt1|` to the previous point.
    pub step_sup: f64,
    /// Arclength increment to the previous point.
    pub step_ds: f64,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub base: BaseParams,
    pub points: Vec<BranchPoint>,
    pub checks: Vec<PointChecks>,
    /// One entry per point; `Some` every `store_every`-th and at the end.
    pub solutions: Vec<Option<WaveSolution>>,
    pub stop_reason: StopReason,
    pub diagnostic: String,
    pub grid_events: Vec<GridEvent>,
    /// Number of points accepted before the switch to arclength stepping.
    pub eps_phase_points: usize,
}

impl Branch {
    pub fn last_solution(&self) -> Option<&WaveSolution> {
        self.solutions.iter().rev().flatten().next()
    }
}

/// Monitors of one wave, `(M1, M2, M3)`.
pub fn monitors(t1: &SurfaceTrace, p: &Params, g: &Grid) -> Result<(f64, f64, f64), SystemError> {
    let b = system::assemble_traces(t1, p, g)?;
    let grad = b.grad_eta_sq();
    Ok((
        b.stagnation_factor(p).min(),
        grad.min().sqrt(),
        grad.max().sqrt(),
    ))
}

/// The trace on a grid with twice the half-length and twice the points,
/// extended by zero.
fn widen(t: &SurfaceTrace, g: &Grid) -> Result<(SurfaceTrace, Grid), ModelError> {
    let n = g.n_points();
    let wide = Grid::new(2.0 * g.half_length(), 2 * n)?;
    let mut v = vec![0.0; 2 * n];
    v[n / 2..n / 2 + n].copy_from_slice(t.values());
    Ok((SurfaceTrace::new(v), wide))
}

/// The central half of the box at the same spacing.
fn shrink(t: &SurfaceTrace, g: &Grid) -> Result<(SurfaceTrace, Grid), ModelError> {
    let n = g.n_points();
    let narrow = Grid::new(0.5 * g.half_length(), n / 2)?;
    Ok((
        SurfaceTrace::new(t.values()[n / 4..n / 4 + n / 2].to_vec()),
        narrow,
    ))
}

fn refine(t: &SurfaceTrace, g: &Grid) -> Result<(SurfaceTrace, Grid), ModelError> {
    let fine = Grid::new(g.half_length(), 2 * g.n_points())?;
    Ok((harmonic::interpolate(t, g, &fine)?, fine))
}

fn apply_change(
    change: GridChange,
    t: &SurfaceTrace,
    g: &Grid,
) -> Result<(SurfaceTrace, Grid), ModelError> {
    match change {
        GridChange::Widen => widen(t, g),
        GridChange::Shrink => shrink(t, g),
        GridChange::Refine => refine(t, g),
    }
}

/// `max |t1|` over `|x| >= L/2 - h`, the part dropped by [`shrink`].
fn outer_half(t: &SurfaceTrace, g: &Grid) -> f64 {
    let n = g.n_points();
    t.values()
        .iter()
        .enumerate()
        .filter(|(j, _)| *j < n / 4 || *j >= n / 4 + n / 2)
        .fold(0.0_f64, |m, (_, v)| m.max(v.abs()))
}

/// Weights of the arclength inner product on even half vectors: the trapezoid
/// rule of the full trace folded onto `0..=N/2`.
fn half_weights(g: &Grid) -> Vec<f64> {
    let m = g.half_size();
    let h = g.spacing();
    (0..m)
        .map(|j| if j == 0 || j == m - 1 { h } else { 2.0 * h })
        .collect()
}

/// A point of the branch on the current grid.
#[derive(Debug, Clone)]
struct State {
    t1: SurfaceTrace,
    alpha: f64,
}

fn distance(a: &State, b: &State, w: &[f64]) -> f64 {
    let du: f64 = a
        .t1
        .even_half()
        .iter()
        .zip(b.t1.even_half())
        .zip(w)
        .map(|((x, y), wj)| wj * (x - y) * (x - y))
        .sum();
    (du + (a.alpha - b.alpha).powi(2)).sqrt()
}

enum Adapted {
    Ready {
        sol: WaveSolution,
        grid: Grid,
        cur: State,
        prev: Option<State>,
        events: Vec<(GridChange, f64, usize)>,
    },
    Reject(String),
    Terminal(String),
}

struct Run<'a> {
    base: BaseParams,
    cfg: &'a ContinuationConfig,
    grid: Grid,
    cur: Option<State>,
    prev: Option<State>,
    s: f64,
    branch: Branch,
    observer: &'a mut dyn FnMut(&BranchPoint),
}

impl Run<'_> {
    /// Factor by which the last step must shrink to keep the monitor change
    /// at [`MONITOR_STEP`]; at most 1.
    fn monitor_factor(&self) -> f64 {
        let pts = &self.branch.points;
        let [.., a, b] = pts.as_slice() else {
            return 1.0;
        };
        let rel = |x: f64, y: f64| (x - y).abs() / x.abs().min(y.abs());
        let change = rel(a.monitor_m1, b.monitor_m1)
            .max(rel(a.monitor_m2, b.monitor_m2))
            .max(rel(a.monitor_m3, b.monitor_m3));
        if change > MONITOR_STEP {
            MONITOR_STEP / change
        } else {
            1.0
        }
    }

    fn params(&self, alpha: f64) -> Result<Params, ModelError> {
        self.base.with_alpha(alpha)
    }

    /// Grid adaptation around a converged candidate; every change is followed
    /// by a Newton re-solve at the same `α`.
    fn adapt(&self, sol: WaveSolution) -> Result<Adapted, ContinuationError> {
        let cfg = self.cfg;
        let mut sol = sol;
        let mut grid = self.grid.clone();
        let mut cur = self.cur.clone();
        let mut events = Vec::new();
        for _ in 0..16 {
            let n = grid.n_points();
            let change = if sol.tail() > cfg.tail_tol {
                if 2 * n > cfg.n_max {
                    return Ok(Adapted::Terminal(format!(
                        "resolution limit: tail {:.3e} exceeds tail_tol with N = {n} at the cap",
                        sol.tail()
                    )));
                }
                GridChange::Widen
            } else if spectral_tail(sol.t1(), &grid)? > cfg.spectral_tol {
                if 2 * n > cfg.n_max {
                    return Ok(Adapted::Terminal(format!(
                        "resolution limit: spectral tail {:.3e} with N = {n} at the cap",
                        spectral_tail(sol.t1(), &grid)?
                    )));
                }
                GridChange::Refine
            } else if n / 2 >= cfg.n_min && outer_half(sol.t1(), &grid) < 1e-2 * cfg.tail_tol {
                GridChange::Shrink
            } else {
                break;
            };
            let (t, g2) = apply_change(change, sol.t1(), &grid)?;
            let p = *sol.params();
            let out = match newton_solve(&t, &p, &g2, &cfg.newton) {
                Ok(out) => out,
                Err(e) => {
                    return Ok(Adapted::Reject(format!(
                        "re-solve after {change:?} to N = {} failed: {e}",
                        g2.n_points()
                    )))
                }
            };
            let map = |s: Option<State>| -> Result<Option<State>, ModelError> {
                s.map(|s| {
                    let (t1, _) = apply_change(change, &s.t1, &grid)?;
                    Ok(State { t1, alpha: s.alpha })
                })
                .transpose()
            };
            cur = map(cur)?;
            events.push((change, g2.half_length(), g2.n_points()));
            grid = g2;
            sol = out.solution;
        }
        // The old current point becomes the previous one once the candidate
        // is accepted.
        let next = State {
            t1: sol.t1().clone(),
            alpha: sol.params().alpha(),
        };
        Ok(Adapted::Ready {
            sol,
            grid,
            cur: next,
            prev: cur,
            events,
        })
    }

    /// Validates and records a converged candidate. Returns `Ok(None)` when
    /// the point was accepted and the branch continues.
    fn try_accept(&mut self, sol: WaveSolution) -> Result<Acceptance, ContinuationError> {
        let cfg = self.cfg;
        let (sol, grid, cur, last, events) = match self.adapt(sol)? {
            Adapted::Ready {
                sol,
                grid,
                cur,
                prev,
                events,
            } => (sol, grid, cur, prev, events),
            Adapted::Reject(why) => return Ok(Acceptance::Rejected(why)),
            Adapted::Terminal(why) => return Ok(Acceptance::Stop(StopReason::StepFailure, why)),
        };
        let p = *sol.params();
        if !(p.alpha() < p.alpha_cr()) {
            return Ok(Acceptance::Rejected(format!(
                "alpha = {} is not below alpha_cr = {}",
                p.alpha(),
                p.alpha_cr()
            )));
        }
        let lambda = system::lambda_min(sol.t1(), &p, &grid)?;
        if !(lambda > 0.0) {
            return Ok(Acceptance::Rejected(format!("lambda = {lambda:.3e}")));
        }
        let nodal = nodal_check(&sol, 10.0 * cfg.tail_tol).map_err(diag_err)?;
        if !nodal.passes {
            return Ok(Acceptance::Rejected(format!(
                "nodal property fails at {} places",
                nodal.violations.len()
            )));
        }
        let w = half_weights(&grid);
        let (step_ds, step_sup) = match &last {
            Some(l) => (
                distance(&cur, l, &w),
                cur.t1.zip_map(&l.t1, |a, b| a - b).sup_norm(),
            ),
            None => {
                let trivial = State {
                    t1: grid.zeros(),
                    alpha: p.alpha_cr(),
                };
                (distance(&cur, &trivial, &w), cur.t1.sup_norm())
            }
        };
        if last.is_some() && step_sup > 5.0 * step_ds {
            return Ok(Acceptance::Rejected(format!(
                "discontinuous step: sup |dt1| = {step_sup:.3e} against ds = {step_ds:.3e}"
            )));
        }
        let flux = flux_identity_check(&sol).map_err(diag_err)?;
        let (m1, m2, m3) = monitors(sol.t1(), &p, &grid)?;

        // Commit.
        let index = self.branch.points.len();
        for (change, half_length, n_points) in events {
            self.branch.grid_events.push(GridEvent {
                point: index,
                change,
                half_length,
                n_points,
            });
        }
        self.s += step_ds;
        let point = BranchPoint {
            s: self.s,
            alpha: p.alpha(),
            amplitude: sol.amplitude(),
            monitor_m1: m1,
            monitor_m2: m2,
            monitor_m3: m3,
            froude: p.froude(),
            lambda_min: lambda,
            residual_norm: sol.residual_norm(),
            tail: sol.tail(),
            half_length: grid.half_length(),
            n_points: grid.n_points(),
        };
        (self.observer)(&point);
        self.branch.points.push(point);
        self.branch.checks.push(PointChecks {
            flux_gap: flux.relative_gap,
            flux_tolerance: flux.tolerance,
            w1_w1y_integral: flux.w1_w1y_integral,
            nodal: nodal.passes,
            step_sup,
            step_ds,
        });
        self.branch
            .solutions
            .push(index.is_multiple_of(cfg.store_every).then(|| sol.clone()));
        self.grid = grid;
        self.prev = last;
        self.cur = Some(cur);

        let stop = if m1 < cfg.m1_threshold(&self.base) {
            Some((StopReason::M1Vanishing, format!("M1 = {m1:.4e}")))
        } else if m2 < cfg.m2_tol {
            Some((StopReason::M2Vanishing, format!("M2 = {m2:.4e}")))
        } else if m3 > cfg.m3_cap {
            Some((StopReason::M3Blowup, format!("M3 = {m3:.4e}")))
        } else if p.froude() > cfg.f_cap {
            Some((StopReason::FroudeBlowup, format!("F = {:.4e}", p.froude())))
        } else if self.branch.points.len() >= cfg.budget {
            Some((StopReason::Budget, format!("{} points", cfg.budget)))
        } else {
            None
        };
        // Keep the final solution whatever its index.
        if stop.is_some() {
            if let Some(last) = self.branch.solutions.last_mut() {
                if last.is_none() {
                    *last = Some(sol);
                }
            }
        }
        Ok(match stop {
            Some((r, why)) => Acceptance::Stop(r, why),
            None => Acceptance::Accepted,
        })
    }

    fn finish(mut self, reason: StopReason, diagnostic: String) -> Branch {
        if let (Some(cur), Some(last)) = (&self.cur, self.branch.solutions.last_mut()) {
            if last.is_none() {
                if let Ok(p) = self.base.with_alpha(cur.alpha) {
                    *last = WaveSolution::new(p, self.grid.clone(), cur.t1.clone()).ok();
                }
            }
        }
        self.branch.stop_reason = reason;
        self.branch.diagnostic = diagnostic;
        self.branch
    }

    /// One bordered Newton solve on the hyperplane through `pred` orthogonal
    /// to `tau`. Returns the corrected wave and the number of residual
    /// evaluations.
    fn correct(
        &self,
        pred: &State,
        tau: &State,
    ) -> Result<Result<(WaveSolution, usize), String>, ContinuationError> {
        let g = &self.grid;
        let cfg = self.cfg;
        let w = half_weights(g);
        let m = g.half_size();
        let dense = cfg.newton.linear_solver.uses_dense(g.n_points());
        let tu: Vec<f64> = tau.t1.even_half().iter().zip(&w).map(|(t, wj)| t * wj).collect();
        let mut u = pred.t1.even_half().to_vec();
        let mut a = pred.alpha;
        let mut first = None;
        for it in 1..=cfg.corrector_max_iter + 1 {
            if !(a > 0.0) {
                return Ok(Err(format!("corrector reached alpha = {a}")));
            }
            let p = self.params(a)?;
            let t = SurfaceTrace::from_even_half(&u, g.n_points());
            if t.check_finite().is_err() {
                return Ok(Err("corrector diverged".into()));
            }
            let lam = system::lambda_min(&t, &p, g)?;
            if !(lam > 0.0) {
                return Ok(Err(format!("corrector left the admissible set, lambda = {lam:.3e}")));
            }
            let r = system::residual(&t, &p, g)?;
            let rn = r.sup_norm();
            let r0 = *first.get_or_insert(rn);
            if rn <= cfg.newton.tol {
                return Ok(Ok((WaveSolution::from_parts(p, g.clone(), t, rn), it)));
            }
            if it > cfg.corrector_max_iter || !rn.is_finite() || rn > 1e3 * r0.max(1e-8) {
                return Ok(Err(format!("corrector stalled at residual {rn:.3e}")));
            }
            let ra = system::residual_alpha_derivative(&t, &p, g)?;
            let ra = ra.even_half();
            let arc: f64 = tu
                .iter()
                .zip(&u)
                .zip(pred.t1.even_half())
                .map(|((t, x), x0)| t * (x - x0))
                .sum::<f64>()
                + tau.alpha * (a - pred.alpha);
            let mut rhs: Vec<f64> = r.even_half().iter().map(|v| -v).collect();
            rhs.push(-arc);
            let op = EvenOperator::new(&t, &p, g)?;
            let step = if dense {
                let j = op.matrix()?;
                let mut big = DMatrix::zeros(m + 1, m + 1);
                big.view_mut((0, 0), (m, m)).copy_from(&j);
                big.view_mut((0, m), (m, 1))
                    .copy_from(&DVector::from_column_slice(ra));
                for (k, v) in tu.iter().enumerate() {
                    big[(m, k)] = *v;
                }
                big[(m, m)] = tau.alpha;
                match lu_solve(big, &rhs) {
                    Some(x) => x,
                    None => return Ok(Err("singular bordered Jacobian".into())),
                }
            } else {
                let apply = |v: &[f64]| -> Result<Vec<f64>, SystemError> {
                    let mut out = op.apply(&v[..m])?;
                    for (o, r) in out.iter_mut().zip(ra) {
                        *o += r * v[m];
                    }
                    let last: f64 = tu.iter().zip(&v[..m]).map(|(a, b)| a * b).sum();
                    out.push(last + tau.alpha * v[m]);
                    Ok(out)
                };
                let pre = |v: &[f64]| -> Result<Vec<f64>, SystemError> {
                    let mut out = op.precondition(&v[..m])?;
                    out.push(v[m]);
                    Ok(out)
                };
                let out = gmres(
                    apply,
                    pre,
                    &rhs,
                    cfg.newton.krylov_rtol,
                    cfg.newton.krylov_restart,
                    cfg.newton.krylov_max_iter,
                )?;
                if out.relative_residual > 1e-6 {
                    return Ok(Err(format!(
                        "bordered GMRES stalled at {:.3e}",
                        out.relative_residual
                    )));
                }
                out.x
            };
            for (x, d) in u.iter_mut().zip(&step) {
                *x += d;
            }
            a += step[m];
        }
        Ok(Err("corrector budget exhausted".into()))
    }
}

enum Acceptance {
    Accepted,
    Rejected(String),
    Stop(StopReason, String),
}

fn diag_err(e: crate::diagnostics::DiagnosticsError) -> ContinuationError {
    match e {
        crate::diagnostics::DiagnosticsError::System(s) => ContinuationError::System(s),
        other => ContinuationError::InvalidConfig(other.to_string()),
    }
}

pub fn continue_branch(
    base: &BaseParams,
    g: &Grid,
    cfg: &ContinuationConfig,
) -> Result<Branch, ContinuationError> {
    continue_branch_with(base, g, cfg, &mut |_| {})
}

/// [`continue_branch`] reporting every accepted point to `observer`.
pub fn continue_branch_with(
    base: &BaseParams,
    g: &Grid,
    cfg: &ContinuationConfig,
    observer: &mut dyn FnMut(&BranchPoint),
) -> Result<Branch, ContinuationError> {
    cfg.validate()?;
    let (init, p) = init_small(cfg.eps_start, base, g)?;
    let mut run = Run {
        base: *base,
        cfg,
        grid: g.clone(),
        cur: None,
        prev: None,
        s: 0.0,
        branch: Branch {
            base: *base,
            points: Vec::new(),
            checks: Vec::new(),
            solutions: Vec::new(),
            stop_reason: StopReason::StepFailure,
            diagnostic: String::new(),
            grid_events: Vec::new(),
            eps_phase_points: 0,
        },
        observer,
    };
    let first = newton_solve(&init, &p, g, &cfg.newton).map_err(ContinuationError::StartFailed)?;
    if first.flags.contains(&NewtonFlag::CollapsedToTrivial) {
        return Err(ContinuationError::StartFailed(NewtonError::InvalidConfig(
            "initializer collapsed to the trivial flow".into(),
        )));
    }
    match run.try_accept(first.solution)? {
        Acceptance::Accepted => {}
        Acceptance::Rejected(why) => return Ok(run.finish(StopReason::StepFailure, why)),
        Acceptance::Stop(r, why) => return Ok(run.finish(r, why)),
    }

    // Stepping in ε with the previous point(s) as predictor.
    let alpha_cr = base.alpha_cr();
    loop {
        let cur = run.cur.clone().expect("a point was accepted");
        let eps_cur = alpha_cr - cur.alpha;
        // Growth by `eps_growth`, capped so the step in the arclength norm
        // stays near `ds_max`.
        let mut d_eps = eps_cur * (cfg.eps_growth - 1.0);
        if let (Some(prev), Some(last)) = (&run.prev, run.branch.checks.last()) {
            let d_last = prev.alpha - cur.alpha;
            d_eps = d_eps.min(d_last * cfg.ds_max / last.step_ds);
            let f = run.monitor_factor();
            if f < 1.0 {
                d_eps = d_eps.min(d_last * f);
            }
        }
        let eps_next = eps_cur + d_eps;
        let alpha_next = alpha_cr - eps_next;
        if !(alpha_next > 0.0) {
            break;
        }
        let predictor = match &run.prev {
            Some(prev) => {
                let r = (alpha_next - cur.alpha) / (cur.alpha - prev.alpha);
                cur.t1.zip_map(&prev.t1, |c, p| c + r * (c - p))
            }
            None => {
                let d = sech2_profile(eps_next, base, &run.grid)
                    .zip_map(&sech2_profile(eps_cur, base, &run.grid), |a, b| a - b);
                cur.t1.axpy(1.0, &d)
            }
        };
        let p = base.with_alpha(alpha_next)?;
        let out = match newton_solve(&predictor, &p, &run.grid, &cfg.newton) {
            Ok(out) if !out.flags.contains(&NewtonFlag::CollapsedToTrivial) => out,
            _ => break,
        };
        let fast = out.iterations() <= cfg.fast_iters;
        match run.try_accept(out.solution)? {
            Acceptance::Accepted => {}
            Acceptance::Rejected(_) => break,
            Acceptance::Stop(r, why) => {
                run.branch.eps_phase_points = run.branch.points.len();
                return Ok(run.finish(r, why));
            }
        }
        if !fast {
            break;
        }
    }
    run.branch.eps_phase_points = run.branch.points.len();

    // Pseudo-arclength with a secant predictor.
    if run.prev.is_none() {
        run.prev = Some(State {
            t1: run.grid.zeros(),
            alpha: alpha_cr,
        });
    }
    let mut ds = {
        let w = half_weights(&run.grid);
        distance(
            run.cur.as_ref().expect("current point"),
            run.prev.as_ref().expect("previous point"),
            &w,
        )
        .clamp(cfg.ds_min, cfg.ds_max)
    };
    let mut last_failure = String::new();
    loop {
        if ds < cfg.ds_min {
            let why = format!("step size fell below {:e}: {last_failure}", cfg.ds_min);
            return Ok(run.finish(StopReason::StepFailure, why));
        }
        let cur = run.cur.clone().expect("current point");
        let prev = run.prev.clone().expect("previous point");
        let w = half_weights(&run.grid);
        let norm = distance(&cur, &prev, &w);
        let tau = State {
            t1: cur.t1.zip_map(&prev.t1, |a, b| (a - b) / norm),
            alpha: (cur.alpha - prev.alpha) / norm,
        };
        let pred = State {
            t1: cur.t1.axpy(ds, &tau.t1),
            alpha: cur.alpha + ds * tau.alpha,
        };
        match run.correct(&pred, &tau)? {
            Ok((sol, iters)) => match run.try_accept(sol)? {
                Acceptance::Accepted => {
                    if iters <= 3 {
                        ds = (ds * 1.5).min(cfg.ds_max);
                    } else if iters >= 6 {
                        ds *= 0.7;
                    }
                    ds *= run.monitor_factor();
                }
                Acceptance::Rejected(why) => {
                    last_failure = why;
                    ds *= 0.5;
                }
                Acceptance::Stop(r, why) => return Ok(run.finish(r, why)),
            },
            Err(why) => {
                last_failure = why;
                ds *= 0.5;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopReport {
    pub trigger: StopReason,
    /// Monitors the limiting behaviour allows for this sign of `γ`.
    pub admissible: Vec<StopReason>,
    /// The trigger is a monitor outside the admissible set.
    pub discrepancy: bool,
    pub interpretation: String,
}

/// Monitors that may end the branch for the given vorticity.
pub fn admissible_monitors(gamma: f64) -> Vec<StopReason> {
    use StopReason::*;
    if gamma == 0.0 {
        vec![M1Vanishing, FroudeBlowup]
    } else if gamma > 0.0 {
        vec![M2Vanishing, M3Blowup, FroudeBlowup]
    } else {
        vec![M1Vanishing, M2Vanishing, FroudeBlowup]
    }
}

pub fn classify_stop(b: &Branch, p: &Params) -> StopReport {
    let trigger = b.stop_reason;
    let admissible = admissible_monitors(p.gamma());
    let discrepancy = trigger.is_monitor() && !admissible.contains(&trigger);
    let what = match trigger {
        StopReason::M1Vanishing => {
            "stagnation/extreme-wave indicator (u² + ε₁e₂² → 0 at crest)".to_string()
        }
        StopReason::M2Vanishing => {
            "inf |∇η| → 0: the conformal map degenerates (vertical or overturning surface)"
                .to_string()
        }
        StopReason::M3Blowup => "surface gradient blow-up / conformal map degeneration".to_string(),
        StopReason::FroudeBlowup => "Froude number blow-up (α → 0)".to_string(),
        StopReason::StepFailure => format!("continuation step failure: {}", b.diagnostic),
        StopReason::Budget => "point budget exhausted before any limiting behaviour".to_string(),
    };
    let interpretation = if discrepancy {
        format!("{what}; DISCREPANCY: not an admissible limit for gamma = {}", p.gamma())
    } else {
        what
    };
    StopReport {
        trigger,
        admissible,
        discrepancy,
        interpretation,
    }
}
