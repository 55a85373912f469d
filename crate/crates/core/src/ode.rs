//! The planar reduced equation `q'' = f(q, q', ε)` of the small-amplitude
//! theory, truncated at second order, and its scaled form at `ε = 0`:
//!
//! ```text
//! Q' = P,   P' = 3Q − c2 Q²,   c2 = (3/2)(3 − 3γ + γ² + ε₁)
//! ```
//!
//! with first integral `E = P²/2 − (3/2)Q² + (c2/3)Q³` and homoclinic orbit
//! `Q(X) = q0 sech²(√3 X / 2)`, `q0 = 3 / (3 − 3γ + γ² + ε₁)`.

use serde::{Deserialize, Serialize};

use crate::model::ModelError;

/// Order of the truncated nonlinearity; the remainder is not represented.
pub const TRUNCATION_ORDER: u32 = 2;

/// Energy drift above which an integration is flagged as under-resolved.
pub const DRIFT_LIMIT: f64 = 1e-6;

/// Orbits are stopped once `|Q|` exceeds this multiple of `q0`.
pub const ESCAPE_FACTOR: f64 = 10.0;

/// Launch heights of the phase portrait.
pub const PORTRAIT_Q0: [f64; 8] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeParams {
    gamma: f64,
    eps1: f64,
    eps: f64,
}

impl OdeParams {
    pub fn new(gamma: f64, eps1: f64, eps: f64) -> Result<Self, ModelError> {
        let bad = |field: &'static str, value: f64, reason: &'static str| -> Result<Self, ModelError> {
            Err(ModelError::InvalidParameter {
                field,
                value,
                reason,
            })
        };
        if !gamma.is_finite() {
            return bad("gamma", gamma, "must be finite");
        }
        if !(eps1 >= 0.0) || !eps1.is_finite() {
            return bad("eps1", eps1, "must be finite and non-negative");
        }
        if !(eps >= 0.0) || !eps.is_finite() {
            return bad("eps", eps, "must be finite and non-negative");
        }
        Ok(Self { gamma, eps1, eps })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `3 − 3γ + γ² + ε₁`, positive for every `γ` since `ε₁ ≥ 0`.
    pub fn denominator(&self) -> f64 {
        3.0 - 3.0 * self.gamma + self.gamma * self.gamma + self.eps1
    }

    pub fn c2(&self) -> f64 {
        1.5 * self.denominator()
    }

    pub fn q0(&self) -> f64 {
        3.0 / self.denominator()
    }

    /// First integral of the scaled system.
    pub fn energy(&self, q: f64, p: f64) -> f64 {
        0.5 * p * p - 1.5 * q * q + self.c2() / 3.0 * q * q * q
    }
}

/// Truncated right-hand side `3εA − c2 A²`; independent of `b` at this order.
pub fn f_reduced(a: f64, _b: f64, eps: f64, p: &OdeParams) -> f64 {
    3.0 * eps * a - p.c2() * a * a
}

/// `q0 sech²(√3 x / 2)`.
pub fn homoclinic_exact(x: f64, p: &OdeParams) -> f64 {
    let s = 1.0 / (0.5 * 3.0_f64.sqrt() * x).cosh();
    p.q0() * s * s
}

/// `d/dx` of [`homoclinic_exact`]: `−√3 q0 sech² tanh`.
pub fn homoclinic_slope(x: f64, p: &OdeParams) -> f64 {
    let z = 0.5 * 3.0_f64.sqrt() * x;
    let s = 1.0 / z.cosh();
    -3.0_f64.sqrt() * p.q0() * s * s * z.tanh()
}

/// Second derivative of [`homoclinic_exact`] from the closed form.
pub fn homoclinic_curvature(x: f64, p: &OdeParams) -> f64 {
    let z = 0.5 * 3.0_f64.sqrt() * x;
    let s2 = 1.0 / z.cosh().powi(2);
    let t = z.tanh();
    1.5 * p.q0() * s2 * (2.0 * t * t - s2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub dt: f64,
    /// `max |E − E₀|` along the orbit.
    pub energy_drift: f64,
    pub step_too_large: bool,
    pub escaped: bool,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

fn rhs(q: f64, p: f64, c2: f64) -> (f64, f64) {
    (p, 3.0 * q - c2 * q * q)
}

/// Classical RK4 for the scaled system; samples include the initial point.
pub fn integrate_orbit(
    q_init: f64,
    p_init: f64,
    params: &OdeParams,
    dt: f64,
    n_steps: usize,
) -> Result<Orbit, ModelError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ModelError::InvalidParameter {
            field: "dt",
            value: dt,
            reason: "must be positive",
        });
    }
    let c2 = params.c2();
    let limit = ESCAPE_FACTOR * params.q0();
    let e0 = params.energy(q_init, p_init);
    let (mut q, mut p) = (q_init, p_init);
    let mut qs = Vec::with_capacity(n_steps + 1);
    let mut ps = Vec::with_capacity(n_steps + 1);
    qs.push(q);
    ps.push(p);
    let mut drift: f64 = 0.0;
    let mut escaped = false;
    for _ in 0..n_steps {
        let (k1q, k1p) = rhs(q, p, c2);
        let (k2q, k2p) = rhs(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p, c2);
        let (k3q, k3p) = rhs(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p, c2);
        let (k4q, k4p) = rhs(q + dt * k3q, p + dt * k3p, c2);
        q += dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        qs.push(q);
        ps.push(p);
        if !q.is_finite() || q.abs() > limit {
            escaped = true;
            break;
        }
        drift = drift.max((params.energy(q, p) - e0).abs());
    }
    Ok(Orbit {
        q: qs,
        p: ps,
        dt,
        energy_drift: drift,
        step_too_large: drift > DRIFT_LIMIT,
        escaped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitKind {
    /// Closed orbit around the centre `(2 q0 / 3, 0)`, returning to its start.
    Periodic,
    /// The separatrix through `(q0, 0)`, asymptotic to the origin.
    Homoclinic,
    Escaped,
    /// Neither closed nor escaped within the integration window.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitOrbit {
    pub q_start: f64,
    pub kind: OrbitKind,
    /// Periodic: distance of the return point to the start. Homoclinic:
    /// distance of the endpoint to the closed-form orbit at the same time.
    pub closure_error: f64,
    pub period: Option<f64>,
    pub orbit: Orbit,
}

/// Integration step of the phase portrait.
pub const PORTRAIT_DT: f64 = 1e-3;
/// Length of the time window of the phase portrait.
pub const PORTRAIT_SPAN: f64 = 20.0;
/// Window of the separatrix: the saddle amplifies rounding like `e^{√3 X}`, so
/// the orbit is followed only while it stays resolvable.
pub const SEPARATRIX_SPAN: f64 = 10.0;

/// Launches orbits from `(Q₀, 0)` for every entry of `q0_list`.
pub fn phase_portrait(params: &OdeParams, q0_list: &[f64]) -> Vec<PortraitOrbit> {
    q0_list
        .iter()
        .map(|&q_start| portrait_orbit(params, q_start))
        .collect()
}

fn portrait_orbit(params: &OdeParams, q_start: f64) -> PortraitOrbit {
    let q0 = params.q0();
    let on_separatrix = (q_start - q0).abs() <= 1e-12 * q0.max(1.0);
    let span = if on_separatrix { SEPARATRIX_SPAN } else { PORTRAIT_SPAN };
    let n = (span / PORTRAIT_DT).round() as usize;
    let orbit = integrate_orbit(q_start, 0.0, params, PORTRAIT_DT, n)
        .expect("portrait step is positive");
    if orbit.escaped {
        return PortraitOrbit {
            q_start,
            kind: OrbitKind::Escaped,
            closure_error: f64::NAN,
            period: None,
            orbit,
        };
    }
    if on_separatrix {
        // Launched at the crest: compare against the closed form at X = t.
        let closure_error = orbit
            .q
            .iter()
            .zip(&orbit.p)
            .enumerate()
            .map(|(i, (&q, &p))| {
                let x = i as f64 * PORTRAIT_DT;
                (q - homoclinic_exact(x, params)).hypot(p - homoclinic_slope(x, params))
            })
            .fold(0.0_f64, f64::max);
        return PortraitOrbit {
            q_start,
            kind: OrbitKind::Homoclinic,
            closure_error,
            period: None,
            orbit,
        };
    }
    // First return to P = 0 from below after leaving the start gives half a
    // period; the second, from above, closes the orbit.
    let mut crossings = 0;
    for i in 1..orbit.len() {
        let (p0, p1) = (orbit.p[i - 1], orbit.p[i]);
        if p0 != 0.0 && p0.signum() != p1.signum() || (p1 == 0.0 && p0 != 0.0) {
            crossings += 1;
            if crossings == 2 {
                // Linear interpolation of the crossing time.
                let frac = p0 / (p0 - p1);
                let q = orbit.q[i - 1] + frac * (orbit.q[i] - orbit.q[i - 1]);
                let period = (i as f64 - 1.0 + frac) * PORTRAIT_DT;
                return PortraitOrbit {
                    q_start,
                    kind: OrbitKind::Periodic,
                    closure_error: (q - q_start).abs(),
                    period: Some(period),
                    orbit,
                };
            }
        }
    }
    PortraitOrbit {
        q_start,
        kind: OrbitKind::Unresolved,
        closure_error: f64::NAN,
        period: None,
        orbit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants() {
        let p = OdeParams::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(p.q0(), 1.0);
        assert_eq!(p.c2(), 4.5);
        assert_eq!(homoclinic_exact(0.0, &p), 1.0);
        let p = OdeParams::new(0.5, 0.5, 0.0).unwrap();
        assert!((homoclinic_exact(0.0, &p) - 4.0 / 3.0).abs() < 1e-15);
        assert!(OdeParams::new(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn f_values() {
        let p = OdeParams::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(f_reduced(0.0, 7.0, 0.1, &p), 0.0);
        assert_eq!(f_reduced(1.0, 0.0, 0.0, &p), -4.5);
        assert_eq!(f_reduced(0.3, 1.0, 0.2, &p), f_reduced(0.3, -2.0, 0.2, &p));
    }

    #[test]
    fn origin_is_fixed() {
        let p = OdeParams::new(0.2, 0.1, 0.0).unwrap();
        let o = integrate_orbit(0.0, 0.0, &p, 1e-2, 100).unwrap();
        assert!(o.q.iter().chain(&o.p).all(|v| *v == 0.0));
        assert!(integrate_orbit(0.0, 0.0, &p, 0.0, 1).is_err());
    }

    #[test]
    fn curvature_closed_form_matches_differences() {
        let p = OdeParams::new(-0.3, 0.5, 0.0).unwrap();
        for i in 0..20 {
            let x = -3.0 + 0.31 * i as f64;
            let h = 1e-4;
            let fd = (homoclinic_slope(x + h, &p) - homoclinic_slope(x - h, &p)) / (2.0 * h);
            assert!((fd - homoclinic_curvature(x, &p)).abs() < 1e-7);
            let fd = (homoclinic_exact(x + h, &p) - homoclinic_exact(x - h, &p)) / (2.0 * h);
            assert!((fd - homoclinic_slope(x, &p)).abs() < 1e-7);
        }
    }

    #[test]
    fn portrait_topology_irrotational() {
        let p = OdeParams::new(0.0, 0.0, 0.0).unwrap();
        let orbits = phase_portrait(&p, &PORTRAIT_Q0);
        assert_eq!(orbits[0].kind, OrbitKind::Periodic);
        assert!(orbits[0].closure_error < 1e-5);
        assert_eq!(orbits[1].kind, OrbitKind::Homoclinic);
        assert!(orbits[1].closure_error < 1e-5, "{}", orbits[1].closure_error);
        for o in &orbits[2..] {
            assert_eq!(o.kind, OrbitKind::Escaped, "q0 = {}", o.q_start);
        }
    }
}
