//! Laminar flows of depth `d` and the conjugate-flow conditions.
//!
//! ```text
//! Q̂(d) = (1/d²)((2−γ)/2 + γd²/2)² + ε₁/d² + 2α(d − 1)
//! Ŝ(d) = (2−γ)²/(8d) − γ²d³/24 − (2−γ)γd/4 − (α/2)d² + ((2α+1+ε₁)/2)d + ε₁/(2d)
//! ```
//!
//! `Q̂` is the Bernoulli constant and `Ŝ` the flow force of the laminar flow of
//! depth `d` sharing the mass flux and vorticity of the unit-depth flow.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Params;

/// Largest depth searched for the conjugate depth.
pub const DSTAR_CAP: f64 = 1e3;
/// `|Ŝ(d*) − Ŝ(1)|` above which the two flows have distinct flow forces.
pub const BORE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConjugateError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("root bracket not found: {0}")]
    BracketFailure(String),
}

fn check_depth(d: f64) -> Result<(), ConjugateError> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(ConjugateError::NonPositiveDepth(d))
    }
}

fn a_of(d: f64, p: &Params) -> f64 {
    let g = p.gamma();
    (2.0 - g) / 2.0 + g * d * d / 2.0
}

pub fn qhat(d: f64, p: &Params) -> Result<f64, ConjugateError> {
    check_depth(d)?;
    let a = a_of(d, p);
    Ok((a * a + p.eps1()) / (d * d) + 2.0 * p.alpha() * (d - 1.0))
}

pub fn qhat_prime(d: f64, p: &Params) -> Result<f64, ConjugateError> {
    check_depth(d)?;
    let a = a_of(d, p);
    let d3 = d * d * d;
    Ok(2.0 * a * p.gamma() / d - 2.0 * (a * a + p.eps1()) / d3 + 2.0 * p.alpha())
}

/// Closed form of the second derivative, positive for every `d > 0`.
pub fn qhat_second(d: f64, p: &Params) -> Result<f64, ConjugateError> {
    check_depth(d)?;
    let g = p.gamma();
    let d4 = d.powi(4);
    Ok(3.0 * (2.0 - g).powi(2) / (2.0 * d4) + g * g / 2.0 + 6.0 * p.eps1() / d4)
}

pub fn shat(d: f64, p: &Params) -> Result<f64, ConjugateError> {
    check_depth(d)?;
    let (g, e1, al) = (p.gamma(), p.eps1(), p.alpha());
    Ok((2.0 - g).powi(2) / (8.0 * d) - g * g * d.powi(3) / 24.0 - (2.0 - g) * g * d / 4.0
        - al / 2.0 * d * d
        + (2.0 * al + 1.0 + e1) / 2.0 * d
        + e1 / (2.0 * d))
}

/// `Ŝ′(d) = ½(Q̂(1) − Q̂(d))`.
pub fn shat_prime(d: f64, p: &Params) -> Result<f64, ConjugateError> {
    Ok(0.5 * (qhat(1.0, p)? - qhat(d, p)?))
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimizer of `Q̂`, the root of `Q̂′`. Newton steps are kept inside a
/// shrinking sign-change bracket and replaced by bisection when they leave it.
pub fn find_dcr(p: &Params) -> Result<f64, ConjugateError> {
    let qp = |d: f64| qhat_prime(d, p).expect("bracket stays positive");
    let (mut lo, mut hi) = (1.0, 1.0);
    let mut tries = 0;
    while qp(lo) >= 0.0 {
        lo *= 0.5;
        tries += 1;
        if tries > 60 {
            return Err(ConjugateError::BracketFailure(
                "Q̂′ does not change sign near 0".into(),
            ));
        }
    }
    tries = 0;
    while qp(hi) <= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(ConjugateError::BracketFailure(
                "Q̂′ does not change sign at large depth".into(),
            ));
        }
    }
    let mut d = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = qp(d);
        if f == 0.0 {
            return Ok(d);
        }
        if f < 0.0 {
            lo = d;
        } else {
            hi = d;
        }
        let step = f / qhat_second(d, p).expect("d > 0");
        let next = d - step;
        if step.abs() <= 4.0 * f64::EPSILON * d {
            return Ok(next.clamp(lo, hi));
        }
        d = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * d {
            break;
        }
    }
    Ok(d)
}

/// The depth `d* ≠ 1` with `Q̂(d*) = Q̂(1)`, or `None` at `α = α_cr`.
pub fn find_dstar(p: &Params) -> Result<Option<f64>, ConjugateError> {
    if (p.alpha() - p.alpha_cr()).abs() <= 1e-12 {
        return Ok(None);
    }
    let dcr = find_dcr(p)?;
    let q1 = qhat(1.0, p)?;
    let f = |d: f64| qhat(d, p).expect("search stays at positive depth") - q1;
    if p.alpha() < p.alpha_cr() {
        let mut hi = 2.0 * dcr;
        while f(hi) <= 0.0 {
            hi *= 2.0;
            if hi > DSTAR_CAP {
                return Err(ConjugateError::BracketFailure(format!(
                    "Q̂ stays below Q̂(1) up to depth {DSTAR_CAP}"
                )));
            }
        }
        Ok(Some(bisect(f, dcr, hi)))
    } else {
        let mut lo = 0.5 * dcr;
        while f(lo) <= 0.0 {
            lo *= 0.5;
            if lo < 1.0 / DSTAR_CAP {
                return Err(ConjugateError::BracketFailure(format!(
                    "Q̂ stays below Q̂(1) down to depth {}",
                    1.0 / DSTAR_CAP
                )));
            }
        }
        Ok(Some(bisect(f, lo, dcr)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateFlowReport {
    pub d_cr: f64,
    pub d_star: Option<f64>,
    pub qhat_at_1: f64,
    pub shat_at_1: f64,
    pub shat_at_star: Option<f64>,
    pub bore_excluded: bool,
    /// `sign(Ŝ(d*) − Ŝ(1)) = sign(α_cr − α)`; vacuous without `d*`.
    pub sign_consistent: bool,
    pub reason: String,
}

pub fn bore_verdict(p: &Params) -> Result<ConjugateFlowReport, ConjugateError> {
    let d_cr = find_dcr(p)?;
    let d_star = find_dstar(p)?;
    let qhat_at_1 = qhat(1.0, p)?;
    let shat_at_1 = shat(1.0, p)?;
    let Some(ds) = d_star else {
        return Ok(ConjugateFlowReport {
            d_cr,
            d_star,
            qhat_at_1,
            shat_at_1,
            shat_at_star: None,
            bore_excluded: true,
            sign_consistent: true,
            reason: "unique depth: no conjugate flow exists".into(),
        });
    };
    let s_star = shat(ds, p)?;
    let gap = s_star - shat_at_1;
    let expected = (p.alpha_cr() - p.alpha()).signum();
    let sign_consistent = gap != 0.0 && gap.signum() == expected;
    let bore_excluded = gap.abs() > BORE_TOL;
    let reason = if bore_excluded {
        format!("flow forces differ: Ŝ(d*) − Ŝ(1) = {gap:.6e}")
    } else {
        format!("flow forces agree to {BORE_TOL:e}: a bore is not excluded")
    };
    Ok(ConjugateFlowReport {
        d_cr,
        d_star,
        qhat_at_1,
        shat_at_1,
        shat_at_star: Some(s_star),
        bore_excluded,
        sign_consistent,
        reason,
    })
}
