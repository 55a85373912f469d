//! The uneliminated three-component surface system, kept as an oracle for the
//! single-unknown reduction.
//!
//! Unknowns are the traces `(t1, t2, t3)` of `(w1, w2, w3)` on Γ, with
//!
//! ```text
//! F1 = t2 + γ t1 + (γ/2) t1²
//! F2 = (γ(t1 + w1y + t1 w1y) + w2y + 1)² + ε₁(1 + w3y)² − (1 + ε₁ − 2α t1)(w1x² + (1 + w1y)²)
//! F3 = t3
//! ```
//!
//! Newton uses a centered-difference Jacobian so nothing is shared with the
//! analytic linearization of the reduced equation.

use nalgebra::DMatrix;

use super::SystemError;
use crate::harmonic;
use crate::linalg::lu_solve;
use crate::model::{Grid, Params, SurfaceTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct FullSolution {
    pub t1: SurfaceTrace,
    pub t2: SurfaceTrace,
    pub t3: SurfaceTrace,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// `(F1, F2, F3)` on Γ.
pub fn full_residual(
    t1: &SurfaceTrace,
    t2: &SurfaceTrace,
    t3: &SurfaceTrace,
    p: &Params,
    g: &Grid,
) -> Result<[SurfaceTrace; 3], SystemError> {
    let (gamma, e1, alpha) = (p.gamma(), p.eps1(), p.alpha());
    let w1x = harmonic::ddx(t1, g)?;
    let w1y = harmonic::dtn(t1, g)?;
    let w2y = harmonic::dtn(t2, g)?;
    let w3y = harmonic::dtn(t3, g)?;
    let n = t1.len();
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    for j in 0..n {
        let a = t1.values()[j];
        let wy = w1y.values()[j];
        let wx = w1x.values()[j];
        f1[j] = t2.values()[j] + gamma * a + 0.5 * gamma * a * a;
        let q = gamma * (a + wy + a * wy) + w2y.values()[j] + 1.0;
        let th = 1.0 + w3y.values()[j];
        f2[j] = q * q + e1 * th * th - (1.0 + e1 - 2.0 * alpha * a) * (wx * wx + (1.0 + wy).powi(2));
    }
    Ok([SurfaceTrace::new(f1), SurfaceTrace::new(f2), t3.clone()])
}

fn stacked_residual(
    x: &[f64],
    m: usize,
    p: &Params,
    g: &Grid,
) -> Result<Vec<f64>, SystemError> {
    let n = g.n_points();
    let t = |i: usize| SurfaceTrace::from_even_half(&x[i * m..(i + 1) * m], n);
    let f = full_residual(&t(0), &t(1), &t(2), p, g)?;
    Ok(f.iter().flat_map(|fi| fi.even_half().to_vec()).collect())
}

/// Solves the three-component system by Newton from `(t1_init, 0, 0)`.
pub fn solve_full(
    t1_init: &SurfaceTrace,
    p: &Params,
    g: &Grid,
    tol: f64,
    max_iter: usize,
) -> Result<FullSolution, SystemError> {
    g.check(t1_init)?;
    let m = g.half_size();
    let mut x = vec![0.0; 3 * m];
    x[..m].copy_from_slice(t1_init.clone().symmetrized().even_half());
    let mut r = stacked_residual(&x, m, p, g)?;
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let mut iterations = 0;
    while sup(&r) > tol && iterations < max_iter {
        let mut jac = DMatrix::zeros(3 * m, 3 * m);
        for col in 0..3 * m {
            let h = 1e-6 * (1.0 + x[col].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[col] += h;
            xm[col] -= h;
            let rp = stacked_residual(&xp, m, p, g)?;
            let rm = stacked_residual(&xm, m, p, g)?;
            for row in 0..3 * m {
                jac[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let Some(dx) = lu_solve(jac, &rhs) else {
            break;
        };
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        r = stacked_residual(&x, m, p, g)?;
        iterations += 1;
    }
    let n = g.n_points();
    let t = |i: usize| SurfaceTrace::from_even_half(&x[i * m..(i + 1) * m], n);
    Ok(FullSolution {
        t1: t(0),
        t2: t(1),
        t3: t(2),
        residual_norm: sup(&r),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_state_solves_full_system() {
        let g = Grid::new(10.0, 32).unwrap();
        let p = Params::new(0.3, 0.5, 1.0).unwrap();
        let z = g.zeros();
        let f = full_residual(&z, &z, &z, &p, &g).unwrap();
        assert!(f.iter().all(|fi| fi.sup_norm() == 0.0));
    }

    #[test]
    fn reduced_residual_is_full_residual_on_the_constraint_set() {
        let g = Grid::new(10.0, 64).unwrap();
        let p = Params::new(0.4, 0.5, 1.0).unwrap();
        let t1 = g.sample(|x| 0.05 / (0.5 * x).cosh().powi(2));
        let t2 = t1.map(|t| -0.4 * t - 0.2 * t * t);
        let f = full_residual(&t1, &t2, &g.zeros(), &p, &g).unwrap();
        assert!(f[0].sup_norm() < 1e-16);
        let r = super::super::residual(&t1, &p, &g).unwrap();
        let gap = r.zip_map(&f[1], |a, b| a - b).sup_norm();
        assert!(gap < 1e-15);
    }
}
