//! Property tests over randomized inputs.

use kspulse::model::{b_of_v, build_model, h, RestStates};
use kspulse::numerics::quadratic::monic_roots;
use kspulse::numerics::tridiag;
use kspulse::pde::{step, Boundary, Grid1D, PdeState};
use kspulse::resolvent::{resolvent_apply, ResolventProblem};
use kspulse::spectrum::{asymptotic_matrices, Side};
use kspulse::speed_window::{pick_trap_constants, speed_bounds};
use kspulse::trap::lobatto_nodes;
use kspulse::{Branch, ModelSpec, WaveParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn canonical() -> ModelSpec {
    build_model("tanh-quadratic", &[]).unwrap()
}

fn speed_in_window(m: &ModelSpec, frac: f64) -> f64 {
    let w = speed_bounds(m, &RestStates::resolve(m, 1.25).unwrap(), Branch::Above).unwrap();
    w.s_lower + frac * w.width()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn manifold_identity_holds(frac in 0.02f64..0.98, v in 0.0f64..2.0) {
        let m = canonical();
        let p = WaveParams::new(&m, 1.25, speed_in_window(&m, frac), 0.0).unwrap();
        let w = m.phi_inverse(b_of_v(&m, &p, v)).unwrap();
        prop_assert!((h(&m, &p, w).unwrap() - m.g(v)).abs() < 1e-10);
    }

    #[test]
    fn trap_constants_respect_inequalities(frac in 0.02f64..0.98, margin in 0.05f64..0.95) {
        let m = canonical();
        let p = WaveParams::new(&m, 1.25, speed_in_window(&m, frac), 0.0).unwrap();
        let c = pick_trap_constants(&m, &p, margin).unwrap();
        prop_assert!(0.0 < c.v_star_low && c.v_star_low < p.v_plus);
        prop_assert!(m.beta < c.v_star_high && c.v_star_high < p.v_minus);
        prop_assert!(c.w_low < 0.0 && c.w_high > 0.0);
        // w* stays below the pole of h.
        prop_assert!(m.chi * m.phi(c.w_high) < p.s);
    }

    #[test]
    fn monic_roots_satisfy_polynomial(ar in -1e3f64..1e3, ai in -1e3f64..1e3, br in -1e4f64..1e4, bi in -1e4f64..1e4) {
        let (a, b) = (Complex64::new(ar, ai), Complex64::new(br, bi));
        let (r1, r2) = monic_roots(a, b);
        let scale = 1.0 + a.norm() * a.norm() + b.norm();
        prop_assert!((r1 + r2 + a).norm() <= 1e-12 * (1.0 + a.norm() + r1.norm() + r2.norm()));
        prop_assert!((r1 * r1 + a * r1 + b).norm() <= 1e-10 * scale);
        prop_assert!((r2 * r2 + a * r2 + b).norm() <= 1e-10 * scale);
    }

    #[test]
    fn conjugate_symmetry_in_tau(tau in -3.0f64..3.0, rho in 0.0f64..5.0) {
        let m = canonical();
        let p = WaveParams::new(&m, 1.25, speed_in_window(&m, 0.5), 1e-2).unwrap();
        let mats = asymptotic_matrices(&m, &p, Side::Plus, rho);
        let (a1, b1) = mats.coefficients(tau);
        let (a2, b2) = mats.coefficients(-tau);
        prop_assert!((a1 - a2.conj()).norm() <= 1e-12 * (1.0 + a1.norm()));
        prop_assert!((b1 - b2.conj()).norm() <= 1e-12 * (1.0 + b1.norm()));
    }

    #[test]
    fn tridiagonal_solution_has_small_residual(seed in 0u64..1000, n in 2usize..60) {
        let mut x = seed as f64 + 0.5;
        let mut next = || { x = (x * 1.618_033_988_7 + 0.31).fract(); x - 0.5 };
        let lower: Vec<f64> = (0..n).map(|_| next()).collect();
        let upper: Vec<f64> = (0..n).map(|_| next()).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.5 + next() + lower[i].abs() + upper[i].abs()).collect();
        let rhs: Vec<f64> = (0..n).map(|_| next()).collect();
        let sol = tridiag::solve(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..n {
            let mut r = diag[i] * sol[i] - rhs[i];
            if i > 0 { r += lower[i] * sol[i - 1]; }
            if i + 1 < n { r += upper[i] * sol[i + 1]; }
            prop_assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn lobatto_refinement_is_nested(n in 2usize..200) {
        let coarse = lobatto_nodes(n);
        let fine = lobatto_nodes(2 * n - 1);
        for (j, t) in coarse.iter().enumerate() {
            prop_assert!((fine[2 * j] - t).abs() < 1e-15);
        }
    }

    #[test]
    fn balanced_states_are_fixed_points(v0 in 0.0f64..2.0) {
        let m = canonical();
        let p = WaveParams::new(&m, 1.25, 1.19, 1e-2).unwrap();
        let g = Grid1D::new(-5.0, 5.0, 64, Boundary::Neumann).unwrap();
        let s0 = PdeState::constant(&g, m.g(v0), v0);
        let s1 = step(&m, &p, &g, &s0, 1e-3).unwrap();
        for (a, b) in s1.u.iter().zip(&s0.u).chain(s1.v.iter().zip(&s0.v)) {
            prop_assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn resolvent_is_homogeneous(scale in -20.0f64..20.0, re in 1.0f64..100.0, theta in 0.0f64..1.5) {
        let prob = ResolventProblem::constant(1e-2, 1.25, -30.0, 1e-2, 6001);
        let lambda = Complex64::from_polar(re / theta.cos().max(0.1), theta.min(1.53));
        let f1: Vec<Complex64> = (0..prob.len()).map(|i| Complex64::new((-(prob.xi(i) / 2.0).powi(2)).exp(), 0.0)).collect();
        let f2: Vec<Complex64> = (0..prob.len()).map(|i| Complex64::new(0.0, (-(prob.xi(i) - 1.0).powi(2)).exp())).collect();
        let a = resolvent_apply(&prob, lambda, &f1, &f2).unwrap();
        let g1: Vec<Complex64> = f1.iter().map(|x| x * scale).collect();
        let g2: Vec<Complex64> = f2.iter().map(|x| x * scale).collect();
        let b = resolvent_apply(&prob, lambda, &g1, &g2).unwrap();
        for (x, y) in a.p.iter().zip(&b.p).chain(a.q.iter().zip(&b.q)) {
            prop_assert!((x * scale - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
    }
}
