//! Physical fields and the identities a computed wave must satisfy.
//!
//! With `η = y + w1`, `ζ = (1 − γ) y + w2` and `ϑ = y`, the fields on Γ are
//!
//! ```text
//! u  = (η_x ζ_x + η_y ζ_y)/|∇η|² + γ η      v  = (η_x ζ_y − η_y ζ_x)/|∇η|²
//! e1 = −η_x/|∇η|²                           e2 = η_y/|∇η|²
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harmonic::{self, interior_dy_symbol, interior_symbol, SpectralCoeffs};
use crate::model::{Grid, Params, SurfaceTrace, WaveSolution, TAIL_FRACTION};
use crate::quadrature::GaussLegendre;
use crate::system::{self, SystemError, TraceBundle, INTERIOR_LEVELS};

/// Default number of Gauss–Legendre nodes in `y`.
pub const FLOW_FORCE_NODES: usize = 32;
/// Largest change under node doubling accepted as converged.
pub const QUADRATURE_TOL: f64 = 1e-8;
pub const KINEMATIC_TOL: f64 = 1e-9;
pub const BERNOULLI_TOL: f64 = 1e-8;
pub const FLOW_FORCE_TOL: f64 = 1e-6;
pub const BOUND_TOL: f64 = 1e-9;
/// Floor of `|∇η|²` below which the fields are undefined.
pub const GRAD_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("|grad eta|^2 = {value:.3e} at index {index}: conformal map degenerates")]
    DegenerateJacobian { index: usize, value: f64 },
    #[error("flow-force quadrature at x = {x} changed by {change:.3e} when doubling {nodes} nodes")]
    QuadratureNonConvergence { x: f64, nodes: usize, change: f64 },
    #[error("station x = {0} lies outside the grid")]
    StationOutsideGrid(f64),
}

impl From<crate::model::ModelError> for DiagnosticsError {
    fn from(e: crate::model::ModelError) -> Self {
        DiagnosticsError::System(e.into())
    }
}

impl From<harmonic::HarmonicError> for DiagnosticsError {
    fn from(e: harmonic::HarmonicError) -> Self {
        DiagnosticsError::System(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub e1: f64,
    pub e2: f64,
}

/// Derivatives of `η` and `ζ` on Γ.
struct SurfaceGeometry {
    bundle: TraceBundle,
    zeta_x: SurfaceTrace,
    grad: SurfaceTrace,
}

impl SurfaceGeometry {
    fn new(sol: &WaveSolution) -> Result<Self, DiagnosticsError> {
        let bundle = system::assemble_traces(sol.t1(), sol.params(), sol.grid())?;
        let zeta_x = harmonic::ddx(&bundle.t2, sol.grid())?;
        let grad = bundle.grad_eta_sq();
        if let Some((index, &value)) = grad
            .values()
            .iter()
            .enumerate()
            .find(|(_, g)| !(**g >= GRAD_FLOOR))
        {
            return Err(DiagnosticsError::DegenerateJacobian { index, value });
        }
        Ok(Self {
            bundle,
            zeta_x,
            grad,
        })
    }

    fn field(&self, j: usize, p: &Params, x: f64) -> FieldSample {
        let b = &self.bundle;
        let eta = 1.0 + b.t1.values()[j];
        let ex = b.w1x.values()[j];
        let ey = 1.0 + b.w1y.values()[j];
        let zx = self.zeta_x.values()[j];
        let zy = 1.0 - p.gamma() + b.w2y.values()[j];
        let g2 = self.grad.values()[j];
        FieldSample {
            x,
            y: 1.0,
            u: (ex * zx + ey * zy) / g2 + p.gamma() * eta,
            v: (ex * zy - ey * zx) / g2,
            e1: -ex / g2,
            e2: ey / g2,
        }
    }
}

/// Velocity and electric field at every collocation point of Γ.
pub fn fields_on_gamma(sol: &WaveSolution) -> Result<Vec<FieldSample>, DiagnosticsError> {
    let geo = SurfaceGeometry::new(sol)?;
    Ok(sol
        .grid()
        .x()
        .iter()
        .enumerate()
        .map(|(j, &x)| geo.field(j, sol.params(), x))
        .collect())
}

/// `max |u η_x − v η_y|` and `max |e1 η_y + e2 η_x|` on Γ.
pub fn kinematic_check(sol: &WaveSolution) -> Result<(f64, f64), DiagnosticsError> {
    let geo = SurfaceGeometry::new(sol)?;
    let (mut flow, mut field) = (0.0_f64, 0.0_f64);
    for (j, &x) in sol.grid().x().iter().enumerate() {
        let f = geo.field(j, sol.params(), x);
        let ex = geo.bundle.w1x.values()[j];
        let ey = 1.0 + geo.bundle.w1y.values()[j];
        flow = flow.max((f.u * ex - f.v * ey).abs());
        field = field.max((f.e1 * ey + f.e2 * ex).abs());
    }
    Ok((flow, field))
}

/// `max |u² + v² + ε₁(e1² + e2²) + 2α(η − 1) − (1 + ε₁)|` on Γ.
pub fn bernoulli_check(sol: &WaveSolution) -> Result<f64, DiagnosticsError> {
    let p = sol.params();
    let fields = fields_on_gamma(sol)?;
    Ok(fields
        .iter()
        .zip(sol.t1().values())
        .map(|(f, &t)| {
            (f.u * f.u + f.v * f.v + p.eps1() * (f.e1 * f.e1 + f.e2 * f.e2) + 2.0 * p.alpha() * t
                - 1.0
                - p.eps1())
            .abs()
        })
        .fold(0.0, f64::max))
}

/// Flow force of the trivial flow, `γ²/3 − γ + α/2 + 1 + ε₁`.
pub fn flow_force_trivial(p: &Params) -> f64 {
    let g = p.gamma();
    g * g / 3.0 - g + p.alpha() / 2.0 + 1.0 + p.eps1()
}

/// Spectral data needed to evaluate `S` at an arbitrary station.
pub struct FlowForceEvaluator {
    params: Params,
    grid: Grid,
    c1: SpectralCoeffs,
    c2: SpectralCoeffs,
}

impl FlowForceEvaluator {
    pub fn new(sol: &WaveSolution) -> Result<Self, DiagnosticsError> {
        let b = system::assemble_traces(sol.t1(), sol.params(), sol.grid())?;
        Ok(Self {
            params: *sol.params(),
            grid: sol.grid().clone(),
            c1: harmonic::to_spectral(&b.t1, sol.grid())?,
            c2: harmonic::to_spectral(&b.t2, sol.grid())?,
        })
    }

    fn integrand(&self, x: f64, y: f64) -> (f64, f64) {
        let g = &self.grid;
        let dx = |c: &SpectralCoeffs| {
            c.evaluate_with(g, x, |k| Complex64::new(0.0, k * interior_symbol(k, y)))
        };
        let dy = |c: &SpectralCoeffs| {
            c.evaluate_with(g, x, |k| Complex64::new(interior_dy_symbol(k, y), 0.0))
        };
        let ex = dx(&self.c1);
        let ey = 1.0 + dy(&self.c1);
        let zx = dx(&self.c2);
        let zy = 1.0 - self.params.gamma() + dy(&self.c2);
        let g2 = ex * ex + ey * ey;
        (
            (ey * (zy * zy - zx * zx) + 2.0 * ex * zx * zy) / g2,
            ey / g2,
        )
    }

    fn with_nodes(&self, x: f64, rule: &GaussLegendre) -> f64 {
        let p = &self.params;
        let (mut flow, mut field) = (0.0, 0.0);
        for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
            let (a, b) = self.integrand(x, y);
            flow += w * a;
            field += w * b;
        }
        let eta = 1.0 + self.c1.evaluate(&self.grid, x);
        let g = p.gamma();
        let a = p.alpha();
        0.5 * flow + 0.5 * p.eps1() * field
            - (g * g * eta.powi(3) / 6.0 + a * eta * eta / 2.0
                - (2.0 * a + 1.0 + p.eps1()) * eta / 2.0)
    }

    /// `S(x)` with `nodes` Gauss–Legendre points, checked against `2 nodes`.
    pub fn evaluate(&self, x: f64, nodes: usize) -> Result<f64, DiagnosticsError> {
        if !(x.abs() <= self.grid.half_length()) {
            return Err(DiagnosticsError::StationOutsideGrid(x));
        }
        let coarse = self.with_nodes(x, &GaussLegendre::new(nodes));
        let fine = self.with_nodes(x, &GaussLegendre::new(2 * nodes));
        let change = (fine - coarse).abs();
        if change > QUADRATURE_TOL {
            return Err(DiagnosticsError::QuadratureNonConvergence { x, nodes, change });
        }
        Ok(coarse)
    }
}

pub fn flow_force(sol: &WaveSolution, x: f64) -> Result<f64, DiagnosticsError> {
    FlowForceEvaluator::new(sol)?.evaluate(x, FLOW_FORCE_NODES)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowForceReport {
    pub stations: Vec<f64>,
    pub values: Vec<f64>,
    /// `max |S(x) − S(0)| / |S(0)|`.
    pub relative_spread: f64,
}

/// `S` at nine stations `x = −0.8L, −0.6L, …, 0.8L`.
pub fn flow_force_stations(sol: &WaveSolution) -> Result<FlowForceReport, DiagnosticsError> {
    let ev = FlowForceEvaluator::new(sol)?;
    let l = sol.grid().half_length();
    let stations: Vec<f64> = (0..9).map(|i| (-0.8 + 0.2 * i as f64) * l).collect();
    let values = stations
        .iter()
        .map(|&x| ev.evaluate(x, FLOW_FORCE_NODES))
        .collect::<Result<Vec<_>, _>>()?;
    let s0 = values[4];
    let relative_spread = values
        .iter()
        .map(|s| (s - s0).abs() / s0.abs())
        .fold(0.0, f64::max);
    Ok(FlowForceReport {
        stations,
        values,
        relative_spread,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `(1 − γ + ε₁ − α) ∫ w1`
    pub lhs: f64,
    /// `α ∫ w1 w1y + ((α + γ²)/2) ∫ w1² + (γ²/6) ∫ w1³`
    pub rhs: f64,
    pub relative_gap: f64,
    pub tail: f64,
    /// `max(1e-4, 10 tail)`
    pub tolerance: f64,
    pub w1_w1y_integral: f64,
    pub passes: bool,
}

/// Integrated flux balance of a solitary wave.
pub fn flux_identity_check(sol: &WaveSolution) -> Result<IdentityReport, DiagnosticsError> {
    let p = sol.params();
    let g = sol.grid();
    let t = sol.t1().values();
    let w1y = harmonic::dtn(sol.t1(), g)?;
    let int = |f: &dyn Fn(usize) -> f64| g.integrate(&(0..t.len()).map(f).collect::<Vec<_>>());
    let i1 = int(&|j| t[j]);
    let i_wy = int(&|j| t[j] * w1y.values()[j]);
    let i2 = int(&|j| t[j] * t[j]);
    let i3 = int(&|j| t[j].powi(3));
    let gm = p.gamma();
    let a = p.alpha();
    let lhs = (p.alpha_cr() - a) * i1;
    let rhs = a * i_wy + (a + gm * gm) / 2.0 * i2 + gm * gm / 6.0 * i3;
    let scale = lhs.abs().max(rhs.abs());
    let relative_gap = if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    };
    let tolerance = 1e-4_f64.max(10.0 * sol.tail());
    let trivial = sol.t1().sup_norm() == 0.0;
    Ok(IdentityReport {
        lhs,
        rhs,
        relative_gap,
        tail: sol.tail(),
        tolerance,
        w1_w1y_integral: i_wy,
        passes: relative_gap < tolerance && (trivial || i_wy > 0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalViolation {
    pub y: f64,
    pub x: f64,
    /// Increment `t1(x_{j+1}) − t1(x_j)` on Γ, `w1x(x, y)` inside.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalReport {
    pub x_tail: f64,
    pub violations: Vec<NodalViolation>,
    pub passes: bool,
}

/// Strict decrease of `w1` for `0 < x < x_tail` on Γ and at the interior
/// levels, where `x_tail` is the last abscissa with `|t1| > threshold`.
pub fn nodal_check(sol: &WaveSolution, threshold: f64) -> Result<NodalReport, DiagnosticsError> {
    let g = sol.grid();
    let t = sol.t1().values();
    let x = g.x();
    let c = g.crest_index();
    let mut last = c;
    for j in c..t.len() {
        if t[j].abs() > threshold {
            last = j;
        }
    }
    let mut violations = Vec::new();
    for j in c..last {
        let d = t[j + 1] - t[j];
        if !(d < 0.0) {
            violations.push(NodalViolation {
                y: 1.0,
                x: x[j],
                value: d,
            });
        }
    }
    let w1x = harmonic::ddx(sol.t1(), g)?;
    for &y in &INTERIOR_LEVELS {
        let inner = harmonic::eval_interior(&w1x, g, y)?;
        for j in c + 1..=last {
            let v = inner.values()[j];
            if !(v < 0.0) {
                violations.push(NodalViolation { y, x: x[j], value: v });
            }
        }
    }
    Ok(NodalReport {
        x_tail: x[last],
        passes: violations.is_empty(),
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub x: f64,
    /// Physical abscissa `ξ(x, 1)`.
    pub big_x: f64,
    /// Physical height `η(x, 1) = 1 + t1`.
    pub big_y: f64,
    pub xi_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub points: Vec<ProfilePoint>,
    pub min_xi_prime: f64,
    pub overhang: bool,
    /// Index pairs of non-adjacent segments of the polyline that cross.
    pub self_intersections: Vec<(usize, usize)>,
    /// Mean of `η_y − 1` over the box, integrated as a linear term.
    pub mean_slope: f64,
    pub truncation_warning: bool,
}

/// Free surface in physical coordinates: `ξ_x = η_y` on Γ, so
/// `X = (1 + m) x + P(w1y − m)` with `m` the mean of `w1y` and `P` the
/// periodic primitive, and `Y = 1 + t1`.
pub fn physical_profile(sol: &WaveSolution) -> Result<ProfileReport, DiagnosticsError> {
    physical_profile_of(sol.t1(), sol.grid())
}

/// [`physical_profile`] for an arbitrary trace.
pub fn physical_profile_of(t1: &SurfaceTrace, g: &Grid) -> Result<ProfileReport, DiagnosticsError> {
    let w1y = harmonic::dtn(t1, g)?;
    let prim = harmonic::conjugate_primitive(&w1y, g, 1e-8)?;
    let m = prim.dropped_mean;
    let points: Vec<ProfilePoint> = g
        .x()
        .iter()
        .enumerate()
        .map(|(j, &x)| ProfilePoint {
            x,
            big_x: (1.0 + m) * x + prim.trace.values()[j],
            big_y: 1.0 + t1.values()[j],
            xi_prime: 1.0 + w1y.values()[j],
        })
        .collect();
    let min_xi_prime = points.iter().map(|p| p.xi_prime).fold(f64::INFINITY, f64::min);
    let overhang = min_xi_prime < 0.0;
    let self_intersections = if overhang {
        crossings(&points)
    } else {
        Vec::new()
    };
    Ok(ProfileReport {
        points,
        min_xi_prime,
        overhang,
        self_intersections,
        mean_slope: m,
        truncation_warning: prim.truncation_warning,
    })
}

fn crossings(pts: &[ProfilePoint]) -> Vec<(usize, usize)> {
    let seg = |i: usize| {
        (
            (pts[i].big_x, pts[i].big_y),
            (pts[i + 1].big_x, pts[i + 1].big_y),
        )
    };
    let orient = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    };
    let mut out = Vec::new();
    let n = pts.len();
    for i in 0..n.saturating_sub(1) {
        let (a, b) = seg(i);
        for j in i + 2..n - 1 {
            let (c, d) = seg(j);
            let d1 = orient(a, b, c);
            let d2 = orient(a, b, d);
            let d3 = orient(c, d, a);
            let d4 = orient(c, d, b);
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                out.push((i, j));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Holds,
    /// The strict inequality is attained with equality, as it must be for
    /// this configuration.
    DegenerateEquality,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundOutcome {
    pub status: BoundStatus,
    /// Smallest margin over Γ; positive when the strict bound holds.
    pub min_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    /// `max |θ_y − 1|` on Γ.
    pub theta_deviation: f64,
    pub theta: BoundOutcome,
    /// `Ψ_y < 1 − γ/2`, applicable for `γ ≤ 0`.
    pub psi_upper: Option<BoundOutcome>,
    /// `Ψ_y > min{2 − γ + 2ε₁, γ inf|∇η|²}`, applicable for `γ ≥ 0`.
    pub psi_lower: Option<BoundOutcome>,
}

impl BoundsReport {
    pub fn violated(&self) -> bool {
        [Some(self.theta), self.psi_upper, self.psi_lower]
            .iter()
            .flatten()
            .any(|b| b.status == BoundStatus::Violated)
    }
}

fn classify(min_margin: f64) -> BoundOutcome {
    let status = if min_margin > BOUND_TOL {
        BoundStatus::Holds
    } else if min_margin >= -BOUND_TOL {
        BoundStatus::DegenerateEquality
    } else {
        BoundStatus::Violated
    };
    BoundOutcome { status, min_margin }
}

/// Bounds on `θ_y` and `Ψ_y = ζ_y + γ η η_y` on Γ.
pub fn potential_bounds_check(sol: &WaveSolution) -> Result<BoundsReport, DiagnosticsError> {
    let p = sol.params();
    let b = system::assemble_traces(sol.t1(), p, sol.grid())?;
    let psi = b.velocity_factor(p);
    let theta_deviation = b.w3y.sup_norm();
    // θ_y ≡ 1 in conformal variables: the margin of `θ_y < 1` is −|θ_y − 1|.
    let theta = classify(-theta_deviation);
    let gm = p.gamma();
    let psi_upper = (gm <= 0.0).then(|| classify(psi.map(|s| 1.0 - gm / 2.0 - s).min()));
    let psi_lower = (gm >= 0.0).then(|| {
        let inf_grad = b.grad_eta_sq().min();
        let bound = (2.0 - gm + 2.0 * p.eps1()).min(gm * inf_grad);
        classify(psi.map(|s| s - bound).min())
    });
    Ok(BoundsReport {
        theta_deviation,
        theta,
        psi_upper,
        psi_lower,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    /// `max |u − 1| + |v| + |e1| + |e2 − 1|` over `|x| ≥ 0.9L` on Γ.
    pub max_deviation: f64,
    /// `10 tail`
    pub bound: f64,
    pub passes: bool,
}

pub fn asymptotic_fields(sol: &WaveSolution) -> Result<AsymptoticReport, DiagnosticsError> {
    let l = sol.grid().half_length();
    let max_deviation = fields_on_gamma(sol)?
        .iter()
        .filter(|f| f.x.abs() >= TAIL_FRACTION * l)
        .map(|f| (f.u - 1.0).abs() + f.v.abs() + f.e1.abs() + (f.e2 - 1.0).abs())
        .fold(0.0, f64::max);
    let bound = 10.0 * sol.tail();
    Ok(AsymptoticReport {
        max_deviation,
        bound,
        passes: max_deviation <= bound,
    })
}

/// All diagnostics of one wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub residual_norm: f64,
    pub lambda_min: f64,
    pub amplitude: f64,
    pub tail: f64,
    pub froude_bound_holds: bool,
    pub kinematic_flow: f64,
    pub kinematic_field: f64,
    pub bernoulli: f64,
    pub flow_force: FlowForceReport,
    pub flux: IdentityReport,
    pub nodal: NodalReport,
    pub bounds: BoundsReport,
    pub asymptotic: AsymptoticReport,
    pub overhang: bool,
    pub min_xi_prime: f64,
    pub self_intersections: usize,
}

impl DiagnosticsSummary {
    /// Names of the hard invariants this wave violates.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let nontrivial = self.amplitude != 0.0;
        if !(self.lambda_min > 0.0) {
            v.push(format!("admissible set: lambda = {:.3e}", self.lambda_min));
        }
        if nontrivial && !self.froude_bound_holds {
            v.push("Froude bound: alpha >= alpha_cr for a nontrivial wave".into());
        }
        if !(self.bernoulli < BERNOULLI_TOL) {
            v.push(format!("Bernoulli residual {:.3e}", self.bernoulli));
        }
        if !(self.kinematic_flow < KINEMATIC_TOL && self.kinematic_field < KINEMATIC_TOL) {
            v.push(format!(
                "kinematic orthogonality {:.3e} / {:.3e}",
                self.kinematic_flow, self.kinematic_field
            ));
        }
        if !(self.flow_force.relative_spread < FLOW_FORCE_TOL) {
            v.push(format!(
                "flow-force spread {:.3e}",
                self.flow_force.relative_spread
            ));
        }
        if !self.flux.passes {
            v.push(format!("flux identity gap {:.3e}", self.flux.relative_gap));
        }
        if !self.nodal.passes {
            v.push(format!(
                "nodal property: {} violations",
                self.nodal.violations.len()
            ));
        }
        if self.bounds.violated() {
            v.push("bounds on the stream and electric potentials".into());
        }
        if !self.asymptotic.passes {
            v.push(format!(
                "asymptotic fields deviate by {:.3e}",
                self.asymptotic.max_deviation
            ));
        }
        v
    }
}

/// Runs every check. `nodal_threshold` is the level below which the tail is
/// excluded from the monotonicity test.
pub fn summarize(
    sol: &WaveSolution,
    nodal_threshold: f64,
) -> Result<DiagnosticsSummary, DiagnosticsError> {
    let p = sol.params();
    let (kinematic_flow, kinematic_field) = kinematic_check(sol)?;
    let profile = physical_profile(sol)?;
    Ok(DiagnosticsSummary {
        residual_norm: sol.residual_norm(),
        lambda_min: system::lambda_min(sol.t1(), p, sol.grid())?,
        amplitude: sol.amplitude(),
        tail: sol.tail(),
        froude_bound_holds: p.alpha() < p.alpha_cr(),
        kinematic_flow,
        kinematic_field,
        bernoulli: bernoulli_check(sol)?,
        flow_force: flow_force_stations(sol)?,
        flux: flux_identity_check(sol)?,
        nodal: nodal_check(sol, nodal_threshold)?,
        bounds: potential_bounds_check(sol)?,
        asymptotic: asymptotic_fields(sol)?,
        overhang: profile.overhang,
        min_xi_prime: profile.min_xi_prime,
        self_intersections: profile.self_intersections.len(),
    })
}
