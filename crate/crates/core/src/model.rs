//! Value types shared by every module: parameters, the periodic collocation
//! grid, surface traces and solution records.
//!
//! Everything here is immutable after construction. The depth is fixed to one,
//! so every quantity is dimensionless.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::system;

/// Fraction of the half-length at which the tail region starts.
pub const TAIL_FRACTION: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}` = {value}: {reason}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("trace has {got} samples but the grid has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value in trace at index {index}")]
    NonFinite { index: usize },
}

/// Vorticity and permittivity, i.e. a parameter set before the wave speed is
/// chosen. Continuation runs along `alpha` with these held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseParams {
    pub gamma: f64,
    pub eps1: f64,
}

impl BaseParams {
    pub fn new(gamma: f64, eps1: f64) -> Result<Self, ModelError> {
        if !gamma.is_finite() {
            return Err(ModelError::InvalidParameter {
                field: "gamma",
                value: gamma,
                reason: "must be finite",
            });
        }
        if !(eps1 >= 0.0) || !eps1.is_finite() {
            return Err(ModelError::InvalidParameter {
                field: "eps1",
                value: eps1,
                reason: "relative permittivity must be finite and >= 0",
            });
        }
        Ok(Self { gamma, eps1 })
    }

    /// Critical value `1 - gamma + eps1` at which solitary waves bifurcate.
    pub fn alpha_cr(&self) -> f64 {
        1.0 - self.gamma + self.eps1
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Params, ModelError> {
        Params::new(self.gamma, self.eps1, alpha)
    }
}

/// Dimensionless parameter set. `alpha = 1/F^2` is the inverse square Froude
/// number; `alpha_cr` and `froude` are always recomputed from the stored triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct Params {
    gamma: f64,
    eps1: f64,
    alpha: f64,
}

#[derive(Deserialize)]
struct RawParams {
    gamma: f64,
    eps1: f64,
    alpha: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = ModelError;
    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        Params::new(raw.gamma, raw.eps1, raw.alpha)
    }
}

impl Params {
    pub fn new(gamma: f64, eps1: f64, alpha: f64) -> Result<Self, ModelError> {
        let base = BaseParams::new(gamma, eps1)?;
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(ModelError::InvalidParameter {
                field: "alpha",
                value: alpha,
                reason: "inverse square Froude number must be finite and > 0",
            });
        }
        Ok(Self {
            gamma: base.gamma,
            eps1: base.eps1,
            alpha,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_cr(&self) -> f64 {
        1.0 - self.gamma + self.eps1
    }

    pub fn froude(&self) -> f64 {
        1.0 / self.alpha.sqrt()
    }

    /// Distance below the bifurcation point, `alpha_cr - alpha`.
    pub fn eps(&self) -> f64 {
        self.alpha_cr() - self.alpha
    }

    pub fn base(&self) -> BaseParams {
        BaseParams {
            gamma: self.gamma,
            eps1: self.eps1,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Params, ModelError> {
        Params::new(self.gamma, self.eps1, alpha)
    }
}

/// Periodic collocation of the strip's top boundary on `[-L, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    half_length: f64,
    x: Vec<f64>,
    wavenumbers: Vec<f64>,
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(half_length: f64, n_points: usize) -> Result<Self, ModelError> {
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(ModelError::InvalidGrid(format!(
                "half-length must be finite and positive, got {half_length}"
            )));
        }
        if !n_points.is_multiple_of(2) {
            return Err(ModelError::InvalidGrid(format!(
                "number of points must be even, got {n_points}"
            )));
        }
        if n_points < Self::MIN_POINTS {
            return Err(ModelError::InvalidGrid(format!(
                "number of points must be at least {}, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        let h = 2.0 * half_length / n_points as f64;
        let x = (0..n_points).map(|j| -half_length + h * j as f64).collect();
        let wavenumbers = (0..=n_points / 2)
            .map(|n| std::f64::consts::PI * n as f64 / half_length)
            .collect();
        Ok(Self {
            half_length,
            x,
            wavenumbers,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n_points(&self) -> usize {
        self.x.len()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n_points() as f64
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `k_n = pi n / L` for `n = 0..=N/2`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Index of the abscissa `x = 0` (the crest of an even wave).
    pub fn crest_index(&self) -> usize {
        self.n_points() / 2
    }

    /// Number of independent samples of an even trace (`N/2 + 1`).
    pub fn half_size(&self) -> usize {
        self.n_points() / 2 + 1
    }

    /// Samples the trace `f(x)` on the grid.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> SurfaceTrace {
        SurfaceTrace::new(self.x.iter().map(|&x| f(x)).collect())
    }

    pub fn zeros(&self) -> SurfaceTrace {
        SurfaceTrace::new(vec![0.0; self.n_points()])
    }

    pub fn check(&self, t: &SurfaceTrace) -> Result<(), ModelError> {
        if t.len() != self.n_points() {
            return Err(ModelError::LengthMismatch {
                expected: self.n_points(),
                got: t.len(),
            });
        }
        Ok(())
    }

    /// Trapezoidal (equivalently rectangle, by periodicity) quadrature over the box.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.spacing()
    }
}

/// One real function sampled on `Grid::x`, a trace on the surface `y = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTrace(Vec<f64>);

impl SurfaceTrace {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest violation of `v[j] = v[(N - j) mod N]`, relative to the sup-norm.
    pub fn even_defect(&self) -> f64 {
        let n = self.len();
        let scale = self.sup_norm();
        if scale == 0.0 {
            return 0.0;
        }
        let worst = (0..n).fold(0.0_f64, |m, j| {
            m.max((self.0[j] - self.0[(n - j) % n]).abs())
        });
        worst / scale
    }

    pub fn is_even(&self, tol: f64) -> bool {
        self.even_defect() <= tol
    }

    /// Projects onto even traces, `v[j] <- (v[j] + v[N - j]) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.len();
        for j in 1..n / 2 {
            let avg = 0.5 * (self.0[j] + self.0[n - j]);
            self.0[j] = avg;
            self.0[n - j] = avg;
        }
    }

    pub fn symmetrized(mut self) -> Self {
        self.symmetrize();
        self
    }

    pub fn check_finite(&self) -> Result<(), ModelError> {
        match self.0.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(ModelError::NonFinite { index }),
            None => Ok(()),
        }
    }

    /// Samples `0..=N/2`, which determine an even trace.
    pub fn even_half(&self) -> &[f64] {
        &self.0[..self.len() / 2 + 1]
    }

    /// Rebuilds the even trace whose samples `0..=N/2` are `half`.
    pub fn from_even_half(half: &[f64], n_points: usize) -> Self {
        debug_assert_eq!(half.len(), n_points / 2 + 1);
        let mut v = vec![0.0; n_points];
        v[..half.len()].copy_from_slice(half);
        for j in 1..n_points / 2 {
            v[n_points - j] = half[j];
        }
        Self(v)
    }

    pub fn zip_map(&self, other: &SurfaceTrace, f: impl Fn(f64, f64) -> f64) -> SurfaceTrace {
        SurfaceTrace(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SurfaceTrace {
        SurfaceTrace(self.0.iter().map(|&a| f(a)).collect())
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &SurfaceTrace) -> SurfaceTrace {
        self.zip_map(other, |a, b| a + s * b)
    }
}

/// Max `|t|` over the outer tenth of the box, `|x| >= 0.9 L`.
pub fn tail_of(t: &SurfaceTrace, grid: &Grid) -> f64 {
    let cut = TAIL_FRACTION * grid.half_length();
    grid.x()
        .iter()
        .zip(t.values())
        .filter(|(x, _)| x.abs() >= cut)
        .fold(0.0_f64, |m, (_, v)| m.max(v.abs()))
}

/// A surface trace solving the discrete Bernoulli condition, with its residual
/// and the measured domain adequacy.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSolution {
    params: Params,
    grid: Grid,
    t1: SurfaceTrace,
    residual_norm: f64,
    amplitude: f64,
    tail: f64,
}

impl WaveSolution {
    /// Evaluates the residual and the derived fields for `t1`.
    pub fn new(params: Params, grid: Grid, t1: SurfaceTrace) -> Result<Self, system::SystemError> {
        grid.check(&t1)?;
        t1.check_finite()?;
        let residual_norm = system::residual(&t1, &params, &grid)?.sup_norm();
        Ok(Self::from_parts(params, grid, t1, residual_norm))
    }

    /// Assembles a record whose residual norm is already known.
    pub(crate) fn from_parts(
        params: Params,
        grid: Grid,
        t1: SurfaceTrace,
        residual_norm: f64,
    ) -> Self {
        let amplitude = t1.values()[grid.crest_index()];
        let tail = tail_of(&t1, &grid);
        Self {
            params,
            grid,
            t1,
            residual_norm,
            amplitude,
            tail,
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn t1(&self) -> &SurfaceTrace {
        &self.t1
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    /// Crest height `eta(0, 1) - 1`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn into_trace(self) -> SurfaceTrace {
        self.t1
    }
}

/// One accepted point of a continuation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub s: f64,
    pub alpha: f64,
    pub amplitude: f64,
    /// `inf_Γ (1 + eps1 - 2 alpha w1)`
    pub monitor_m1: f64,
    /// `inf_Γ |∇η|`
    pub monitor_m2: f64,
    /// `sup_Γ |∇η|`
    pub monitor_m3: f64,
    pub froude: f64,
    pub lambda_min: f64,
    pub residual_norm: f64,
    pub tail: f64,
    pub half_length: f64,
    pub n_points: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_derived_fields() {
        let p = Params::new(0.0, 0.5, 1.0).unwrap();
        assert_eq!(p.alpha_cr(), 1.5);
        assert_eq!(p.froude(), 1.0);
        let p = Params::new(0.2, 0.3, 1.0).unwrap();
        assert!((p.alpha_cr() - 1.1).abs() < 1e-15);
    }

    #[test]
    fn params_reject_bad_fields() {
        match Params::new(0.0, -0.1, 1.0) {
            Err(ModelError::InvalidParameter { field, .. }) => assert_eq!(field, "eps1"),
            other => panic!("expected eps1 error, got {other:?}"),
        }
        match Params::new(0.0, 0.1, 0.0) {
            Err(ModelError::InvalidParameter { field, .. }) => assert_eq!(field, "alpha"),
            other => panic!("expected alpha error, got {other:?}"),
        }
        assert!(Params::new(f64::NAN, 0.1, 1.0).is_err());
    }

    #[test]
    fn froude_alpha_product() {
        for &alpha in &[0.1, 0.37, 1.0, 1.5, 7.3] {
            let p = Params::new(0.1, 0.2, alpha).unwrap();
            assert!((p.froude().powi(2) * alpha - 1.0).abs() < 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn grid_wavenumbers_on_2pi_box() {
        let g = Grid::new(std::f64::consts::PI, 16).unwrap();
        for (n, k) in g.wavenumbers().iter().enumerate() {
            assert!((k - n as f64).abs() < 1e-14);
        }
        assert_eq!(g.wavenumbers().len(), 9);
        assert_eq!(g.x()[0], -std::f64::consts::PI);
    }

    #[test]
    fn grid_spacing_and_order() {
        let g = Grid::new(40.0, 512).unwrap();
        assert_eq!(g.spacing(), 0.15625);
        assert!(g.x().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.x()[g.crest_index()], 0.0);
        assert_eq!(g.wavenumbers()[0], 0.0);
    }

    #[test]
    fn grid_rejects_odd_or_tiny() {
        assert!(matches!(Grid::new(10.0, 15), Err(ModelError::InvalidGrid(_))));
        assert!(matches!(Grid::new(10.0, 8), Err(ModelError::InvalidGrid(_))));
        assert!(matches!(Grid::new(-1.0, 64), Err(ModelError::InvalidGrid(_))));
    }

    #[test]
    fn symmetrize_makes_even() {
        let g = Grid::new(5.0, 32).unwrap();
        let mut t = g.sample(|x| (x + 0.3).exp().sin());
        assert!(!t.is_even(1e-12));
        t.symmetrize();
        assert!(t.is_even(1e-15));
        let half = t.even_half().to_vec();
        assert_eq!(SurfaceTrace::from_even_half(&half, 32), t);
    }

    #[test]
    fn solution_fields() {
        let g = Grid::new(20.0, 64).unwrap();
        let p = Params::new(0.0, 0.5, 1.2).unwrap();
        let t = g.sample(|x| 0.01 / (0.3 * x).cosh().powi(2));
        let sol = WaveSolution::new(p, g.clone(), t.clone()).unwrap();
        assert_eq!(sol.amplitude(), t.values()[32]);
        assert!((sol.amplitude() - 0.01).abs() < 1e-15);
        let expected_tail = g
            .x()
            .iter()
            .zip(t.values())
            .filter(|(x, _)| x.abs() >= 18.0)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        assert_eq!(sol.tail(), expected_tail);
    }
}
