//! The surface equation in the single unknown `t1 = w1|_Γ`.
//!
//! With `η = y + w1`, `ζ = (1 - γ) y + w2` and `ϑ = y + w3`, the kinematic
//! condition fixes `w2|_Γ = -γ t1 - (γ/2) t1²` and the electric boundary
//! condition fixes `w3 ≡ 0`. What remains is the Bernoulli condition
//!
//! ```text
//! R = (γ(t1 + w1y + t1 w1y) + w2y + 1)² + ε₁ − (1 + ε₁ − 2α t1)(w1x² + (1 + w1y)²)
//! ```
//!
//! where `w1y`, `w2y` are Dirichlet-to-Neumann images of the traces.

pub mod full;

use thiserror::Error;

use crate::harmonic::{self, dtn_symbol, HarmonicError};
use crate::model::{Grid, ModelError, Params, SurfaceTrace};

/// Interior heights sampled in addition to Γ when taking infima over the strip.
pub const INTERIOR_LEVELS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
    #[error("non-finite value in `{trace}` at index {index}; aborting")]
    Overflow { trace: &'static str, index: usize },
}

fn finite(t: SurfaceTrace, name: &'static str) -> Result<SurfaceTrace, SystemError> {
    match t.values().iter().position(|v| !v.is_finite()) {
        Some(index) => Err(SystemError::Overflow { trace: name, index }),
        None => Ok(t),
    }
}

/// All surface traces derived from `t1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBundle {
    pub t1: SurfaceTrace,
    pub w1x: SurfaceTrace,
    pub w1y: SurfaceTrace,
    pub t2: SurfaceTrace,
    pub w2y: SurfaceTrace,
    pub w3: SurfaceTrace,
    pub w3y: SurfaceTrace,
}

impl TraceBundle {
    /// `ζ_y + γ η η_y` on Γ, the velocity factor of the Bernoulli condition.
    pub fn velocity_factor(&self, p: &Params) -> SurfaceTrace {
        let g = p.gamma();
        SurfaceTrace::new(
            (0..self.t1.len())
                .map(|j| {
                    let t = self.t1.values()[j];
                    let wy = self.w1y.values()[j];
                    g * (t + wy + t * wy) + self.w2y.values()[j] + 1.0
                })
                .collect(),
        )
    }

    /// `|∇η|²` on Γ.
    pub fn grad_eta_sq(&self) -> SurfaceTrace {
        self.w1x.zip_map(&self.w1y, |x, y| x * x + (1.0 + y) * (1.0 + y))
    }

    /// `1 + ε₁ − 2α t1` on Γ.
    pub fn stagnation_factor(&self, p: &Params) -> SurfaceTrace {
        let c = 1.0 + p.eps1();
        let a = p.alpha();
        self.t1.map(|t| c - 2.0 * a * t)
    }
}

pub fn assemble_traces(
    t1: &SurfaceTrace,
    p: &Params,
    g: &Grid,
) -> Result<TraceBundle, SystemError> {
    g.check(t1)?;
    let gamma = p.gamma();
    let t1 = finite(t1.clone(), "t1")?;
    let w1x = finite(harmonic::ddx(&t1, g)?, "w1x")?;
    let w1y = finite(harmonic::dtn(&t1, g)?, "w1y")?;
    let t2 = t1.map(|t| -gamma * t - 0.5 * gamma * t * t);
    let w2y = finite(harmonic::dtn(&t2, g)?, "w2y")?;
    Ok(TraceBundle {
        t1,
        w1x,
        w1y,
        t2,
        w2y,
        w3: g.zeros(),
        w3y: g.zeros(),
    })
}

fn bernoulli(b: &TraceBundle, p: &Params) -> SurfaceTrace {
    let inner = b.velocity_factor(p);
    let grad = b.grad_eta_sq();
    let stag = b.stagnation_factor(p);
    let e1 = p.eps1();
    SurfaceTrace::new(
        (0..inner.len())
            .map(|j| {
                let q = inner.values()[j];
                let th = 1.0 + b.w3y.values()[j];
                q * q + e1 * th * th - stag.values()[j] * grad.values()[j]
            })
            .collect(),
    )
}

/// Pointwise Bernoulli residual on Γ.
pub fn residual(t1: &SurfaceTrace, p: &Params, g: &Grid) -> Result<SurfaceTrace, SystemError> {
    let b = assemble_traces(t1, p, g)?;
    finite(bernoulli(&b, p), "residual")
}

/// `∂R/∂α` at fixed `t1`: `2 t1 |∇η|²`.
pub fn residual_alpha_derivative(
    t1: &SurfaceTrace,
    p: &Params,
    g: &Grid,
) -> Result<SurfaceTrace, SystemError> {
    let b = assemble_traces(t1, p, g)?;
    Ok(b.t1.zip_map(&b.grad_eta_sq(), |t, q| 2.0 * t * q))
}

/// Symbol of the linearization at `t1 = 0`: `m(k) = 2((γ + α) − (1 + ε₁) k coth k)`.
pub fn linear_multiplier(k: f64, p: &Params) -> f64 {
    2.0 * ((p.gamma() + p.alpha()) - (1.0 + p.eps1()) * dtn_symbol(k))
}

/// Variable coefficients of the linearized residual at a fixed `t1`:
///
/// `J dt = a dt + b G(dt) + c D(dt) + e G((1 + t1) dt)`
///
/// with `G` the Dirichlet-to-Neumann map and `D = d/dx`.
#[derive(Debug, Clone)]
pub struct Linearization {
    grid: Grid,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    e: Vec<f64>,
    one_plus_t: Vec<f64>,
}

impl Linearization {
    pub fn new(t1: &SurfaceTrace, p: &Params, g: &Grid) -> Result<Self, SystemError> {
        let tb = assemble_traces(t1, p, g)?;
        let inner = tb.velocity_factor(p);
        let grad = tb.grad_eta_sq();
        let stag = tb.stagnation_factor(p);
        let (gamma, alpha) = (p.gamma(), p.alpha());
        let n = t1.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            let q = inner.values()[j];
            let t = tb.t1.values()[j];
            let wy = tb.w1y.values()[j];
            let wx = tb.w1x.values()[j];
            let s = stag.values()[j];
            a[j] = 2.0 * q * gamma * (1.0 + wy) + 2.0 * alpha * grad.values()[j];
            b[j] = 2.0 * q * gamma * (1.0 + t) - 2.0 * s * (1.0 + wy);
            c[j] = -2.0 * s * wx;
            e[j] = -2.0 * gamma * q;
        }
        Ok(Self {
            grid: g.clone(),
            a,
            b,
            c,
            e,
            one_plus_t: tb.t1.values().iter().map(|t| 1.0 + t).collect(),
        })
    }

    pub fn apply(&self, dt: &SurfaceTrace) -> Result<SurfaceTrace, SystemError> {
        let g = &self.grid;
        let g_dt = harmonic::dtn(dt, g)?;
        let d_dt = harmonic::ddx(dt, g)?;
        let weighted = SurfaceTrace::new(
            dt.values()
                .iter()
                .zip(&self.one_plus_t)
                .map(|(d, w)| d * w)
                .collect(),
        );
        let g_w = harmonic::dtn(&weighted, g)?;
        let out = (0..dt.len())
            .map(|j| {
                self.a[j] * dt.values()[j]
                    + self.b[j] * g_dt.values()[j]
                    + self.c[j] * d_dt.values()[j]
                    + self.e[j] * g_w.values()[j]
            })
            .collect();
        finite(SurfaceTrace::new(out), "jacobian")
    }
}

/// Directional derivative of [`residual`] at `t1` in the direction `dt`.
pub fn jacobian_apply(
    t1: &SurfaceTrace,
    dt: &SurfaceTrace,
    p: &Params,
    g: &Grid,
) -> Result<SurfaceTrace, SystemError> {
    g.check(dt)?;
    Linearization::new(t1, p, g)?.apply(dt)
}

/// `λ(w, α) = inf 4(1 + ε₁ − 2α w1)²(w1x² + (1 + w1y)²)`, the infimum taken over
/// Γ and the interior levels [`INTERIOR_LEVELS`].
pub fn lambda_min(t1: &SurfaceTrace, p: &Params, g: &Grid) -> Result<f64, SystemError> {
    g.check(t1)?;
    let w1x_top = harmonic::ddx(t1, g)?;
    let c = 1.0 + p.eps1();
    let a = p.alpha();
    let level = |w1: &SurfaceTrace, w1x: &SurfaceTrace, w1y: &SurfaceTrace| {
        (0..w1.len()).fold(f64::INFINITY, |m, j| {
            let s = c - 2.0 * a * w1.values()[j];
            let q = w1x.values()[j].powi(2) + (1.0 + w1y.values()[j]).powi(2);
            m.min(4.0 * s * s * q)
        })
    };
    let mut lam = level(t1, &w1x_top, &harmonic::dtn(t1, g)?);
    for &y in &INTERIOR_LEVELS {
        let w1 = harmonic::eval_interior(t1, g, y)?;
        let w1x = harmonic::eval_interior(&w1x_top, g, y)?;
        let w1y = harmonic::eval_interior_dy(t1, g, y)?;
        lam = lam.min(level(&w1, &w1x, &w1y));
    }
    if lam.is_nan() {
        return Err(SystemError::Overflow {
            trace: "lambda",
            index: 0,
        });
    }
    Ok(lam)
}

/// Real roots of the dispersion relation `m(k) = 0`, `k >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DispersionRoot {
    /// `α < α_cr`: `m(k) < 0` for every `k`, the trivial state has a trivial kernel.
    None,
    /// `α = α_cr`: the only root is `k = 0`.
    Boundary,
    /// `α > α_cr`: the unique positive root.
    Root(f64),
}

/// Tolerance under which `α` is treated as equal to `α_cr`.
pub const CRITICAL_TOL: f64 = 1e-12;

pub fn dispersion_root(p: &Params) -> DispersionRoot {
    let gap = p.alpha() - p.alpha_cr();
    if gap.abs() <= CRITICAL_TOL {
        return DispersionRoot::Boundary;
    }
    if gap < 0.0 {
        return DispersionRoot::None;
    }
    // k coth k = target > 1 has one root; k coth k < k + 1 gives a bracket.
    let target = (p.gamma() + p.alpha()) / (1.0 + p.eps1());
    let (mut lo, mut hi) = (0.0_f64, target);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dtn_symbol(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    DispersionRoot::Root(0.5 * (lo + hi))
}

/// Exponential decay rate `κ` of a linear solitary tail, `κ cot κ = (γ+α)/(1+ε₁)`,
/// available for `α < α_cr`.
pub fn decay_rate(p: &Params) -> Option<f64> {
    let r = (p.gamma() + p.alpha()) / (1.0 + p.eps1());
    if !(r < 1.0) {
        return None;
    }
    let f = |k: f64| if k == 0.0 { 1.0 } else { k / k.tan() };
    // κ cot κ decreases from 1 to −∞ on (0, π).
    let (mut lo, mut hi) = (0.0_f64, std::f64::consts::PI - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
