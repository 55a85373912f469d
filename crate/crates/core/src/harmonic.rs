//! Harmonic extension into the strip `0 < y < 1` with zero bottom data.
//!
//! A trace `t` on the top boundary extends to `u(x, y) = sum c_n e^{i k_n x}
//! sinh(k_n y) / sinh(k_n)`, with the zero mode extended linearly as `c_0 y`.
//! Every operator here is a Fourier multiplier on the periodic box.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::model::{Grid, ModelError, SurfaceTrace};

/// Above this wavenumber the hyperbolic ratios switch to `exp(-2k)` forms.
pub const HYPERBOLIC_SWITCH: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarmonicError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("interior height {0} outside [0, 1]")]
    HeightOutOfRange(f64),
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_forward(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

fn fft_inverse(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// Coefficients `c_n`, `n = 0..=N/2`, of a real trace in the basis
/// `e^{i k_n (x + L)}`, normalized so that `t_j = sum_n c_n e^{...}` over all
/// `n` with `c_{-n} = conj(c_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    modes: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    /// Evaluates `sum_n m(k_n) c_n e^{i k_n (x + L)}` at an arbitrary abscissa,
    /// where `m` is the per-mode factor for the non-negative wavenumber and is
    /// conjugated for the mirrored mode (as for a real operator).
    pub fn evaluate_with(&self, grid: &Grid, x: f64, m: impl Fn(f64) -> Complex64) -> f64 {
        let k = grid.wavenumbers();
        let last = self.modes.len() - 1;
        let shift = x + grid.half_length();
        let mut sum = (m(0.0) * self.modes[0]).re;
        for n in 1..last {
            let phase = Complex64::from_polar(1.0, k[n] * shift);
            sum += 2.0 * (m(k[n]) * self.modes[n] * phase).re;
        }
        // Nyquist: real cosine interpolant, derivative zeroed like `ddx`.
        let nyq = m(k[last]);
        if nyq.im == 0.0 {
            sum += nyq.re * self.modes[last].re * (k[last] * shift).cos();
        }
        sum
    }

    /// Evaluates the trace itself at `x` (trigonometric interpolation).
    pub fn evaluate(&self, grid: &Grid, x: f64) -> f64 {
        self.evaluate_with(grid, x, |_| Complex64::new(1.0, 0.0))
    }
}

pub fn to_spectral(t: &SurfaceTrace, g: &Grid) -> Result<SpectralCoeffs, ModelError> {
    g.check(t)?;
    let n = t.len();
    let mut buf: Vec<Complex64> = t.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    let scale = 1.0 / n as f64;
    let mut modes: Vec<Complex64> = buf[..=n / 2].iter().map(|c| c * scale).collect();
    modes[0].im = 0.0;
    modes[n / 2].im = 0.0;
    Ok(SpectralCoeffs { modes })
}

pub fn from_spectral(c: &SpectralCoeffs, g: &Grid) -> Result<SurfaceTrace, ModelError> {
    let n = g.n_points();
    if c.modes.len() != n / 2 + 1 {
        return Err(ModelError::LengthMismatch {
            expected: n / 2 + 1,
            got: c.modes.len(),
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..=n / 2].copy_from_slice(&c.modes);
    for j in 1..n / 2 {
        buf[n - j] = c.modes[j].conj();
    }
    fft_inverse(&mut buf);
    Ok(SurfaceTrace::new(buf.iter().map(|c| c.re).collect()))
}

/// Applies a real-operator multiplier: mode `n >= 0` is scaled by `m(n, k_n)`,
/// the mirrored negative mode by its conjugate.
fn apply_multiplier(
    t: &SurfaceTrace,
    g: &Grid,
    m: impl Fn(usize, f64) -> Complex64,
) -> Result<SurfaceTrace, ModelError> {
    g.check(t)?;
    let n = t.len();
    let k = g.wavenumbers();
    let mut buf: Vec<Complex64> = t.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    buf[0] *= m(0, 0.0);
    for j in 1..n / 2 {
        let f = m(j, k[j]);
        buf[j] *= f;
        buf[n - j] *= f.conj();
    }
    buf[n / 2] *= m(n / 2, k[n / 2]);
    fft_inverse(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(SurfaceTrace::new(buf.iter().map(|c| c.re * scale).collect()))
}

/// Trigonometric interpolation of `t` onto `fine`, a grid with the same
/// half-length and an integer multiple of the points. The Nyquist mode of the
/// coarse grid is split evenly between `±k_{N/2}`.
pub fn interpolate(t: &SurfaceTrace, g: &Grid, fine: &Grid) -> Result<SurfaceTrace, ModelError> {
    let n = g.n_points();
    let nf = fine.n_points();
    if fine.half_length() != g.half_length() || nf < n || !nf.is_multiple_of(n) {
        return Err(ModelError::InvalidGrid(format!(
            "cannot interpolate from (L = {}, N = {n}) to (L = {}, N = {nf})",
            g.half_length(),
            fine.half_length()
        )));
    }
    let c = to_spectral(t, g)?;
    let mut modes = vec![Complex64::new(0.0, 0.0); nf / 2 + 1];
    modes[..n / 2].copy_from_slice(&c.modes[..n / 2]);
    if nf > n {
        modes[n / 2] = 0.5 * c.modes[n / 2];
    } else {
        modes[n / 2] = c.modes[n / 2];
    }
    from_spectral(&SpectralCoeffs { modes }, fine)
}

/// Applies a real even symbol `m(k)` as a Fourier multiplier.
pub fn real_multiplier(
    t: &SurfaceTrace,
    g: &Grid,
    m: impl Fn(f64) -> f64,
) -> Result<SurfaceTrace, ModelError> {
    apply_multiplier(t, g, |_, k| Complex64::new(m(k), 0.0))
}

/// Symbol of the Dirichlet-to-Neumann map, `k coth k`, with the limit value 1 at 0.
pub fn dtn_symbol(k: f64) -> f64 {
    if k == 0.0 {
        1.0
    } else if k > HYPERBOLIC_SWITCH {
        let e = (-2.0 * k).exp();
        k * (1.0 + e) / (1.0 - e)
    } else {
        k / k.tanh()
    }
}

/// `sinh(k y) / sinh(k)`, mode 0 mapped to `y`.
pub fn interior_symbol(k: f64, y: f64) -> f64 {
    if k == 0.0 {
        y
    } else if k > HYPERBOLIC_SWITCH {
        (k * (y - 1.0)).exp() * (-(-2.0 * k * y).exp_m1()) / (-(-2.0 * k).exp_m1())
    } else {
        (k * y).sinh() / k.sinh()
    }
}

/// `k cosh(k y) / sinh(k)`, mode 0 mapped to 1.
pub fn interior_dy_symbol(k: f64, y: f64) -> f64 {
    if k == 0.0 {
        1.0
    } else if k > HYPERBOLIC_SWITCH {
        k * (k * (y - 1.0)).exp() * (1.0 + (-2.0 * k * y).exp()) / (-(-2.0 * k).exp_m1())
    } else {
        k * (k * y).cosh() / k.sinh()
    }
}

/// Spectral x-derivative; the Nyquist mode's derivative is set to zero.
pub fn ddx(t: &SurfaceTrace, g: &Grid) -> Result<SurfaceTrace, ModelError> {
    let nyq = g.n_points() / 2;
    apply_multiplier(t, g, |n, k| {
        if n == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k)
        }
    })
}

/// Dirichlet-to-Neumann map: `∂_y u` at `y = 1` for the harmonic extension `u`
/// of `t` with `u = 0` at the bottom.
pub fn dtn(t: &SurfaceTrace, g: &Grid) -> Result<SurfaceTrace, ModelError> {
    apply_multiplier(t, g, |_, k| Complex64::new(dtn_symbol(k), 0.0))
}

fn check_height(y: f64) -> Result<(), HarmonicError> {
    if (0.0..=1.0).contains(&y) {
        Ok(())
    } else {
        Err(HarmonicError::HeightOutOfRange(y))
    }
}

/// Harmonic extension of `t` sampled at height `y`.
pub fn eval_interior(t: &SurfaceTrace, g: &Grid, y: f64) -> Result<SurfaceTrace, HarmonicError> {
    check_height(y)?;
    Ok(apply_multiplier(t, g, |_, k| Complex64::new(interior_symbol(k, y), 0.0))?)
}

/// `∂_y` of the harmonic extension of `t`, sampled at height `y`.
pub fn eval_interior_dy(
    t: &SurfaceTrace,
    g: &Grid,
    y: f64,
) -> Result<SurfaceTrace, HarmonicError> {
    check_height(y)?;
    Ok(apply_multiplier(t, g, |_, k| Complex64::new(interior_dy_symbol(k, y), 0.0))?)
}

/// Zero-mean periodic antiderivative of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub trace: SurfaceTrace,
    /// Mean of the input, which a periodic antiderivative cannot represent.
    pub dropped_mean: f64,
    /// Set when `|dropped_mean|` exceeds the tolerance handed to
    /// [`conjugate_primitive`]; the periodic box is then too short for the
    /// mean to be negligible.
    pub truncation_warning: bool,
}

/// Spectral antiderivative `c_n -> c_n / (i k_n)` for `n >= 1`; the mean and the
/// Nyquist mode are dropped. Used to rebuild `ξ(x, 1) - x` from `η_y - 1`
/// through the Cauchy-Riemann relation `ξ_x = η_y`.
pub fn conjugate_primitive(
    t: &SurfaceTrace,
    g: &Grid,
    mean_tol: f64,
) -> Result<Primitive, ModelError> {
    g.check(t)?;
    let dropped_mean = t.values().iter().sum::<f64>() / t.len() as f64;
    let nyq = g.n_points() / 2;
    let trace = apply_multiplier(t, g, |n, k| {
        if n == 0 || n == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -1.0 / k)
        }
    })?;
    Ok(Primitive {
        trace,
        dropped_mean,
        truncation_warning: dropped_mean.abs() > mean_tol,
    })
}

/// Largest coefficient magnitude among the top fifth of the resolved modes,
/// relative to the largest coefficient overall. Measures spectral resolution.
pub fn spectral_tail(t: &SurfaceTrace, g: &Grid) -> Result<f64, ModelError> {
    let c = to_spectral(t, g)?;
    let modes = c.modes();
    let peak = modes.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
    if peak == 0.0 {
        return Ok(0.0);
    }
    let start = (modes.len() * 4) / 5;
    let top = modes[start..].iter().fold(0.0_f64, |m, c| m.max(c.norm()));
    Ok(top / peak)
}
