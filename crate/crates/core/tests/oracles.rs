//! Independent oracles: closed-form dispersion coefficients and dense
//! linear algebra from nalgebra.

use kspulse::model::{build_model, RestStates};
use kspulse::orbit::{slow_saddle_jacobian, slow_unstable_eigenpair};
use kspulse::phase_plane::{equilibrium_at, jacobian_at};
use kspulse::spectrum::{asymptotic_matrices, dispersion_roots, Side};
use kspulse::speed_window::speed_bounds;
use kspulse::{Branch, ModelSpec, WaveParams};
use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

fn setup(eps: f64) -> (ModelSpec, WaveParams) {
    let m = build_model("tanh-quadratic", &[]).unwrap();
    let r = RestStates::resolve(&m, 1.25).unwrap();
    let w = speed_bounds(&m, &r, Branch::Above).unwrap();
    let p = WaveParams::new(&m, 1.25, w.midpoint(), eps).unwrap();
    (m, p)
}

fn i() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

/// Weighted coefficients written out term by term.
fn weighted_closed_form(m: &ModelSpec, p: &WaveParams, tau: f64, rho: f64) -> (Complex64, Complex64) {
    let (eps, s, chi) = (p.epsilon, p.s, m.chi);
    let phi0 = m.phi(0.0);
    let gp = m.g_prime(p.v_plus);
    let kp = chi * p.u_minus * m.phi_prime(0.0);
    let e2 = eps + 1.0 / eps;
    let a = e2 * (tau * tau - rho * rho) + rho * (2.0 * s - chi * phi0) + gp / eps
        - i() * tau * (2.0 * s - chi * phi0 - 2.0 * rho * e2);
    let r1 = tau * tau * eps - i() * tau * (s - chi * phi0 - 2.0 * rho * eps) - rho * rho * eps + rho * (s - chi * phi0);
    let r2 = tau * tau / eps - i() * tau * (s - 2.0 * rho / eps) - rho * rho / eps + s * rho + gp / eps;
    let r3 = -((tau * tau - rho * rho) * kp + 2.0 * i() * tau * rho * kp) / eps;
    (a, r1 * r2 + r3)
}

fn unweighted_closed_form(m: &ModelSpec, p: &WaveParams, tau: f64) -> (Complex64, Complex64) {
    let (eps, s, chi) = (p.epsilon, p.s, m.chi);
    let phi0 = m.phi(0.0);
    let gp = m.g_prime(p.v_plus);
    let a = (eps + 1.0 / eps) * tau * tau - i() * (2.0 * s - chi * phi0) * tau + gp / eps;
    let b = (tau * tau * eps - i() * tau * (s - chi * phi0)) * (tau * tau / eps - i() * tau * s + gp / eps)
        - chi / eps * tau * tau * p.u_minus * m.phi_prime(0.0);
    (a, b)
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

#[test]
fn unweighted_coefficients_match_closed_form() {
    for eps in [1e-1, 1e-2, 1e-3] {
        let (m, p) = setup(eps);
        let mats = asymptotic_matrices(&m, &p, Side::Plus, 0.0);
        for tau in [-1.7, -0.3, 0.0, 0.05, 0.9, 2.0] {
            let (a, b) = mats.coefficients(tau);
            let (ea, eb) = unweighted_closed_form(&m, &p, tau);
            assert!(close(a, ea, 1e-13) && close(b, eb, 1e-13), "eps {eps} tau {tau}: {a} {ea} {b} {eb}");
        }
    }
}

#[test]
fn weighted_coefficients_match_closed_form() {
    for eps in [1e-1, 1e-2] {
        let (m, p) = setup(eps);
        for rho in [0.0, 0.01, 0.5, 3.0] {
            let mats = asymptotic_matrices(&m, &p, Side::Plus, rho);
            for tau in [-1.1, 0.0, 0.4, 1.9] {
                let (a, b) = mats.coefficients(tau);
                let (ea, eb) = weighted_closed_form(&m, &p, tau, rho);
                assert!(close(a, ea, 1e-13) && close(b, eb, 1e-13), "rho {rho} tau {tau}: {a} {ea} {b} {eb}");
            }
        }
    }
}

#[test]
fn characteristic_polynomial_matches_dense_determinant() {
    let (m, p) = setup(1e-2);
    let pairs = [(0.3, Complex64::new(1.0, 2.0)), (-1.2, Complex64::new(-5.0, 0.5)), (0.0, Complex64::new(100.0, 0.0)), (1.7, Complex64::new(0.1, -3.0)), (0.05, Complex64::new(-0.7, 9.0))];
    for rho in [0.0, 0.7] {
        let mats = asymptotic_matrices(&m, &p, Side::Plus, rho);
        for (tau, lambda) in pairs {
            let s = mats.symbol(tau);
            let dense = Matrix2::new(s[0][0] - lambda, s[0][1], s[1][0], s[1][1] - lambda).determinant();
            let (a, b) = mats.coefficients(tau);
            let poly = lambda * lambda + a * lambda + b;
            assert!((dense - poly).norm() <= 1e-12 * (1.0 + dense.norm()), "{dense} {poly}");
            let roots = dispersion_roots(&mats, tau);
            for r in [roots.lambda_plus, roots.lambda_minus] {
                let d = Matrix2::new(s[0][0] - r, s[0][1], s[1][0], s[1][1] - r).determinant();
                assert!(d.norm() <= 1e-9 * (1.0 + r.norm_sqr()), "root {r} residual {d}");
            }
        }
    }
}

#[test]
fn small_weight_continuity() {
    let (m, p) = setup(1e-2);
    for tau in [0.0, 0.2, 1.0] {
        let a = dispersion_roots(&asymptotic_matrices(&m, &p, Side::Plus, 0.0), tau);
        let b = dispersion_roots(&asymptotic_matrices(&m, &p, Side::Plus, 1e-8), tau);
        assert!((a.lambda_plus - b.lambda_plus).norm() < 1e-6 * (1.0 + a.lambda_plus.norm()));
        assert!((a.lambda_minus - b.lambda_minus).norm() < 1e-6 * (1.0 + a.lambda_minus.norm()), "tau {tau}: {} {}", a.lambda_minus, b.lambda_minus);
    }
}

#[test]
fn slow_saddle_eigenpair_matches_dense_solver() {
    for eps in [1e-1, 1e-2, 1e-3] {
        let (m, p) = setup(eps);
        let j = slow_saddle_jacobian(&m, &p);
        let dense = Matrix3::from_fn(|r, c| j[r][c]);
        let eigs = dense.complex_eigenvalues();
        let positive: Vec<f64> = eigs.iter().filter(|z| z.re > 0.0 && z.im.abs() < 1e-9).map(|z| z.re).collect();
        assert_eq!(positive.len(), 1, "{eigs:?}");
        let guess = equilibrium_at(&m, &p.with_epsilon(0.0), p.v_minus).unwrap().eigenvalues[0].re;
        let (lambda, vec) = slow_unstable_eigenpair(&m, &p, guess).unwrap();
        assert!((lambda - positive[0]).abs() < 1e-9 * (1.0 + lambda), "{lambda} {}", positive[0]);
        let v = Vector3::new(vec[0], vec[1], vec[2]);
        assert!((dense * v - v * lambda).norm() < 1e-10 * (1.0 + lambda));
        assert!((v.norm() - 1.0).abs() < 1e-14 && vec[1] < 0.0);
    }
}

#[test]
fn reduced_equilibria_match_dense_solver() {
    let (m, p) = setup(0.0);
    for v in [p.v_minus, p.v_plus] {
        let a = jacobian_at(&m, &p, v).unwrap();
        let dense = Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1]);
        let mut expect: Vec<Complex64> = dense.complex_eigenvalues().iter().copied().collect();
        let info = equilibrium_at(&m, &p, v).unwrap();
        let mut got = info.eigenvalues.to_vec();
        let key = |z: &Complex64| (z.re, z.im);
        expect.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        got.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).norm() < 1e-12, "{g} {e}");
        }
    }
}
