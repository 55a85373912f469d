//! Property tests of the structural invariants.

use proptest::prelude::*;

use ehdwave::conjugate::{qhat, qhat_second, shat, shat_prime};
use ehdwave::continuation::{init_small, monitors, required_half_length};
use ehdwave::diagnostics::{bernoulli_check, flow_force_trivial, kinematic_check, BERNOULLI_TOL, KINEMATIC_TOL};
use ehdwave::harmonic::{dtn, eval_interior};
use ehdwave::io::{read_solution, write_solution, RunConfig, SolutionDocument};
use ehdwave::newton::{newton_solve, LinearSolver, NewtonConfig};
use ehdwave::ode::{f_reduced, integrate_orbit, OdeParams};
use ehdwave::system::{jacobian_apply, residual};
use ehdwave::{BaseParams, Grid, Params, SurfaceTrace, WaveSolution};

const L: f64 = 6.0;
const N: usize = 64;

fn grid() -> Grid {
    Grid::new(L, N).unwrap()
}

/// Smooth periodic trace built from a few Fourier modes.
fn smooth_trace(amp: &[f64], phase: &[f64], even: bool) -> SurfaceTrace {
    let k0 = std::f64::consts::PI / L;
    grid().sample(|x| {
        amp.iter()
            .zip(phase)
            .enumerate()
            .map(|(m, (&a, &ph))| {
                let k = k0 * (m + 1) as f64;
                if even { a * (k * x).cos() } else { a * (k * x + ph).cos() }
            })
            .sum()
    })
}

fn params() -> impl Strategy<Value = Params> {
    (-0.5..0.5f64, 0.0..1.5f64, 0.2..0.95f64).prop_map(|(g, e, f)| {
        let base = BaseParams::new(g, e).unwrap();
        base.with_alpha(f * base.alpha_cr()).unwrap()
    })
}

fn modes() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-0.05..0.05f64, 4),
        prop::collection::vec(0.0..std::f64::consts::TAU, 4),
    )
}

fn dot(g: &Grid, a: &SurfaceTrace, b: &SurfaceTrace) -> f64 {
    let v: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x * y).collect();
    g.integrate(&v)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn jacobian_is_linear(p in params(), (a, ph) in modes(), (b, pb) in modes(), s in -3.0..3.0f64) {
        let g = grid();
        let base = smooth_trace(&a, &ph, true);
        let u = smooth_trace(&b, &pb, false);
        let v = smooth_trace(&a, &pb, false);
        let lhs = jacobian_apply(&base, &u.axpy(s, &v), &p, &g).unwrap();
        let ju = jacobian_apply(&base, &u, &p, &g).unwrap();
        let jv = jacobian_apply(&base, &v, &p, &g).unwrap();
        let rhs = ju.axpy(s, &jv);
        let gap = lhs.zip_map(&rhs, |x, y| x - y).sup_norm();
        prop_assert!(gap <= 1e-12 * (1.0 + rhs.sup_norm()));
    }

    #[test]
    fn residual_preserves_evenness(p in params(), (a, ph) in modes()) {
        let g = grid();
        let t = smooth_trace(&a, &ph, true);
        prop_assert!(t.is_even(1e-15));
        let r = residual(&t, &p, &g).unwrap();
        prop_assert!(r.even_defect() <= 1e-13);
    }

    #[test]
    fn dtn_is_symmetric_and_positive((a, ph) in modes(), (b, pb) in modes()) {
        let g = grid();
        let u = smooth_trace(&a, &ph, false);
        let v = smooth_trace(&b, &pb, false);
        let (du, dv) = (dtn(&u, &g).unwrap(), dtn(&v, &g).unwrap());
        let (uv, vu) = (dot(&g, &du, &v), dot(&g, &u, &dv));
        prop_assert!((uv - vu).abs() <= 1e-13);
        prop_assert!(dot(&g, &du, &u) >= 0.0);
    }

    #[test]
    fn dtn_of_constant_and_monotone_symbol(c in -2.0..2.0f64, k1 in 0.01..10.0f64, dk in 0.01..10.0f64) {
        let g = grid();
        let d = dtn(&g.sample(|_| c), &g).unwrap();
        prop_assert!((d.values()[0] - c).abs() <= 1e-13 * (1.0 + c.abs()));
        let sym = ehdwave::harmonic::dtn_symbol;
        prop_assert!(sym(k1 + dk) > sym(k1));
    }

    #[test]
    fn interior_extension_matches_boundary_values((a, ph) in modes()) {
        let g = grid();
        let t = smooth_trace(&a, &ph, false);
        let top = eval_interior(&t, &g, 1.0).unwrap();
        let bottom = eval_interior(&t, &g, 0.0).unwrap();
        prop_assert!(top.zip_map(&t, |x, y| x - y).sup_norm() <= 1e-14);
        prop_assert!(bottom.sup_norm() <= 1e-16);
    }

    #[test]
    fn solution_files_round_trip(p in params(), (a, ph) in modes(), scale in prop::sample::select(vec![1.0, 1e-7, 3.3e5])) {
        let g = grid();
        let t = smooth_trace(&a, &ph, true).map(|x| x * scale * 1e-3);
        let sol = WaveSolution::new(p, g, t).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        write_solution(&path, &SolutionDocument::new(&sol, &RunConfig::default(), None)).unwrap();
        let doc = read_solution(&path).unwrap();
        let back = doc.to_solution().unwrap();
        prop_assert_eq!(back.t1().values(), sol.t1().values());
        prop_assert_eq!(back.params().alpha().to_bits(), p.alpha().to_bits());
        prop_assert!((back.residual_norm() - sol.residual_norm()).abs() <= 1e-14 * (1.0 + sol.residual_norm()));
        prop_assert!((doc.params.froude - 1.0 / p.alpha().sqrt()).abs() <= 1e-14 * doc.params.froude);
        prop_assert!((doc.amplitude - sol.amplitude()).abs() <= 1e-14);
    }

    #[test]
    fn conjugate_identities(p in params(), d in 0.2..5.0f64) {
        let want = 0.5 * (qhat(1.0, &p).unwrap() - qhat(d, &p).unwrap());
        prop_assert!((shat_prime(d, &p).unwrap() - want).abs() <= 1e-12 * (1.0 + want.abs()));
        prop_assert!(qhat_second(d, &p).unwrap() > 0.0);
        prop_assert!((shat(1.0, &p).unwrap() - flow_force_trivial(&p)).abs() <= 1e-13);
        prop_assert!((qhat(1.0, &p).unwrap() - 1.0 - p.eps1()).abs() <= 1e-13);
    }

    #[test]
    fn reduced_rhs_ignores_slope(g in -0.5..0.5f64, e1 in 0.0..2.0f64, eps in 0.0..0.1f64, a in -1.0..1.0f64, b1 in -5.0..5.0f64, b2 in -5.0..5.0f64) {
        let p = OdeParams::new(g, e1, eps).unwrap();
        prop_assert_eq!(f_reduced(a, b1, eps, &p).to_bits(), f_reduced(a, b2, eps, &p).to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rk4_energy_drift_is_fourth_order(g in -0.5..0.5f64, e1 in 0.0..2.0f64, q in 0.3..0.7f64) {
        let p = OdeParams::new(g, e1, 0.0).unwrap();
        let q = q * p.q0();
        let coarse = integrate_orbit(q, 0.0, &p, 0.04, 250).unwrap();
        let fine = integrate_orbit(q, 0.0, &p, 0.02, 500).unwrap();
        let order = (coarse.energy_drift / fine.energy_drift).log2();
        prop_assert!(order > 3.6, "order {}", order);
    }

    #[test]
    fn newton_on_small_waves(g in -0.4..0.4f64, e1 in 0.0..1.0f64, eps in 0.03..0.1f64) {
        let base = BaseParams::new(g, e1).unwrap();
        let grid = Grid::new(required_half_length(eps) * 1.1, 256).unwrap();
        let (init, p) = init_small(eps, &base, &grid).unwrap();
        let cfg = NewtonConfig { linear_solver: LinearSolver::Dense, ..NewtonConfig::default() };
        let out = newton_solve(&init, &p, &grid, &cfg).unwrap();
        prop_assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(out.solution.residual_norm() <= cfg.tol);
        prop_assert!(out.solution.t1().even_defect() <= 1e-14);

        let again = newton_solve(&init, &p, &grid, &cfg).unwrap();
        prop_assert_eq!(again.solution.t1().values(), out.solution.t1().values());
        prop_assert_eq!(&again.history, &out.history);

        let (flow, field) = kinematic_check(&out.solution).unwrap();
        prop_assert!(flow < KINEMATIC_TOL && field < KINEMATIC_TOL);
        prop_assert!(bernoulli_check(&out.solution).unwrap() < BERNOULLI_TOL);

        let (m1, m2, m3) = monitors(out.solution.t1(), &p, &grid).unwrap();
        prop_assert!(m1 > 0.0 && m2 <= m3);
    }
}
