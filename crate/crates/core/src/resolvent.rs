//! Resolvent of the principal part L₀ = D(ξ)∂ξξ along a computed pulse:
//! solves (L₀ − λ)(p, q) = f through the explicit exponential-kernel
//! convolutions and checks the bound ‖(p, q)‖ ≤ (C₁/|λ|)‖f‖.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, WaveParams};
use crate::numerics::interp::CubicSpline;
use crate::orbit::Orbit;

/// Uniform grid with the profile-dependent coefficient k(ξ) = χU(ξ)φ'(V'(ξ)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventProblem {
    pub epsilon: f64,
    pub x0: f64,
    pub h: f64,
    pub k: Vec<f64>,
    /// Value of k outside the grid: χu₋φ'(0).
    pub k_inf: f64,
}

impl ResolventProblem {
    /// Samples k from a pulse orbit on `[-half_width, half_width]` with spacing
    /// `h`, with ξ = 0 placed at the extremum of U − u₋. Outside the orbit's ξ
    /// range k is extended by its asymptotic value.
    pub fn from_orbit(model: &ModelSpec, p: &WaveParams, orbit: &Orbit, half_width: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && half_width > 4.0 * h) {
            return Err(Error::InvalidArgument(format!("bad resolvent grid: half width {half_width}, h {h}")));
        }
        let k_inf = model.chi * p.u_minus * model.phi_prime(0.0);
        let center = pulse_center(orbit, p.u_minus);
        let xs: Vec<f64> = orbit.xi.iter().map(|x| x - center).collect();
        let ks: Vec<f64> = orbit
            .u
            .iter()
            .zip(&orbit.w)
            .map(|(&u, &w)| model.chi * u * model.phi_prime(w))
            .collect();
        let (xs, ks) = dedup_increasing(xs, ks);
        let spline = CubicSpline::new(xs, ks)?;
        let (lo, hi) = spline.domain();
        let n = (2.0 * half_width / h).round() as usize + 1;
        let x0 = -half_width;
        let k = (0..n)
            .map(|i| {
                let x = x0 + i as f64 * h;
                if x < lo || x > hi {
                    k_inf
                } else {
                    spline.eval(x)
                }
            })
            .collect();
        Ok(Self { epsilon: p.epsilon, x0, h, k, k_inf })
    }

    /// Constant coefficient k ≡ k₀ on a grid of `n` nodes.
    pub fn constant(epsilon: f64, k0: f64, x0: f64, h: f64, n: usize) -> Self {
        Self { epsilon, x0, h, k: vec![k0; n], k_inf: k0 }
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn xi(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn span(&self) -> f64 {
        self.h * (self.len() - 1) as f64
    }

    pub fn k_norm(&self) -> f64 {
        self.k.iter().fold(self.k_inf.abs(), |m, v| m.max(v.abs()))
    }

    /// C₁ = 2‖[[1, 3ε‖k‖], [0, 1]]‖∞.
    pub fn c1(&self) -> f64 {
        2.0 * (1.0 + 3.0 * self.epsilon * self.k_norm())
    }
}

/// ξ at which |U − u₋| is largest.
pub fn pulse_center(orbit: &Orbit, u_minus: f64) -> f64 {
    let mut best = (0.0, f64::NEG_INFINITY);
    for (x, u) in orbit.xi.iter().zip(&orbit.u) {
        let d = (u - u_minus).abs();
        if d > best.1 {
            best = (*x, d);
        }
    }
    best.0
}

fn dedup_increasing(xs: Vec<f64>, ys: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut ox = Vec::with_capacity(xs.len());
    let mut oy = Vec::with_capacity(ys.len());
    for (x, y) in xs.into_iter().zip(ys) {
        if ox.last().is_none_or(|&l| x > l) {
            ox.push(x);
            oy.push(y);
        }
    }
    (ox, oy)
}

/// Cell weights for ∫₀^h e^{−κs}(f_far + (f_near − f_far)(1 − s/h))…; returns
/// (I0, I1) with I0 = ∫₀^h e^{−κs} ds and I1 = (1/h)∫₀^h s e^{−κs} ds.
fn cell_weights(kappa: Complex64, h: f64) -> (Complex64, Complex64) {
    let z = kappa * h;
    if z.norm() < 0.5 {
        let mut i0 = Complex64::new(0.0, 0.0);
        let mut i1 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for n in 0..25 {
            i0 += term / (n as f64 + 1.0);
            i1 += term / (n as f64 + 2.0);
            term *= -z / (n as f64 + 1.0);
        }
        (i0 * h, i1 * h)
    } else {
        let e = (-z).exp();
        ((1.0 - e) / kappa, (1.0 - e * (1.0 + z)) / (kappa * kappa * h))
    }
}

/// ∫ e^{−κ|ξᵢ − y|} r(y) dy at every node for piecewise-linear `r`, with the
/// contributions from beyond the grid supplied as `left_tail`, `right_tail`
/// (the values of the one-sided integrals at the end nodes).
fn exp_convolution(r: &[Complex64], kappa: Complex64, h: f64, left_tail: Complex64, right_tail: Complex64) -> Vec<Complex64> {
    let n = r.len();
    let (i0, i1) = cell_weights(kappa, h);
    let e = (-kappa * h).exp();
    let mut left = vec![Complex64::new(0.0, 0.0); n];
    left[0] = left_tail;
    for i in 0..n - 1 {
        left[i + 1] = e * left[i] + r[i + 1] * i0 + (r[i] - r[i + 1]) * i1;
    }
    let mut right = vec![Complex64::new(0.0, 0.0); n];
    right[n - 1] = right_tail;
    for i in (0..n - 1).rev() {
        right[i] = e * right[i + 1] + r[i] * i0 + (r[i + 1] - r[i]) * i1;
    }
    left.iter().zip(&right).map(|(a, b)| a + b).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSolution {
    pub p: Vec<Complex64>,
    pub q: Vec<Complex64>,
}

/// Kernel decay lengths 1/Re√(ελ) (q) and 1/Re√(λ/ε) (p); the larger governs truncation.
pub fn kernel_length(epsilon: f64, lambda: Complex64) -> f64 {
    let kq = (epsilon * lambda).sqrt().re;
    let kp = (lambda / epsilon).sqrt().re;
    (1.0 / kq).max(1.0 / kp)
}

/// Solves (L₀ − λ)(p, q) = (f₁, f₂). Sources are extended by their end values
/// outside the grid and the tails are integrated in closed form.
pub fn resolvent_apply(prob: &ResolventProblem, lambda: Complex64, f1: &[Complex64], f2: &[Complex64]) -> Result<ResolventSolution> {
    let n = prob.len();
    if f1.len() != n || f2.len() != n || n < 3 {
        return Err(Error::InvalidArgument("source length must match the resolvent grid".into()));
    }
    if !(lambda.re > 0.0) {
        return Err(Error::InvalidArgument(format!("resolvent needs Re lambda > 0, got {lambda}")));
    }
    let kl = kernel_length(prob.epsilon, lambda);
    if kl > 0.25 * prob.span() {
        return Err(Error::DomainTooShort { kernel_length: kl, span: prob.span() });
    }
    let eps = prob.epsilon;
    let kq = (eps * lambda).sqrt();
    let kp = (lambda / eps).sqrt();
    let h = prob.h;

    let q_conv = exp_convolution(f2, kq, h, f2[0] / kq, f2[n - 1] / kq);
    let q_scale = -eps.sqrt() / (2.0 * lambda.sqrt());
    let q: Vec<Complex64> = q_conv.iter().map(|c| q_scale * c).collect();

    let r: Vec<Complex64> = (0..n).map(|i| eps * prob.k[i] * (lambda * q[i] + f2[i]) + f1[i]).collect();
    // Beyond the grid q = −c/λ + (q_edge + c/λ) e^{−κ_q d}, so r = εk∞λ A e^{−κ_q d} + f₁,edge.
    let tail = |q_edge: Complex64, c: Complex64, f1_edge: Complex64| {
        let amp = eps * prob.k_inf * lambda * (q_edge + c / lambda);
        amp / (kp + kq) + f1_edge / kp
    };
    let lt = tail(q[0], f2[0], f1[0]);
    let rt = tail(q[n - 1], f2[n - 1], f1[n - 1]);
    let p_conv = exp_convolution(&r, kp, h, lt, rt);
    let p_scale = -1.0 / (2.0 * (eps * lambda).sqrt());
    let p = p_conv.iter().map(|c| p_scale * c).collect();
    Ok(ResolventSolution { p, q })
}

/// (L₀ − λ)(p, q) − f at interior nodes with second-order central differences;
/// returns the sup norm over both components.
pub fn discrete_residual(prob: &ResolventProblem, lambda: Complex64, sol: &ResolventSolution, f1: &[Complex64], f2: &[Complex64]) -> f64 {
    let n = prob.len();
    let h2 = prob.h * prob.h;
    let eps = prob.epsilon;
    (1..n - 1)
        .map(|i| {
            let pxx = (sol.p[i + 1] - 2.0 * sol.p[i] + sol.p[i - 1]) / h2;
            let qxx = (sol.q[i + 1] - 2.0 * sol.q[i] + sol.q[i - 1]) / h2;
            let r1 = eps * pxx - prob.k[i] * qxx - lambda * sol.p[i] - f1[i];
            let r2 = qxx / eps - lambda * sol.q[i] - f2[i];
            r1.norm().max(r2.norm())
        })
        .fold(0.0, f64::max)
}

fn sup(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventSample {
    pub lambda: Complex64,
    /// ‖(p, q)‖∞ / ‖f‖∞.
    pub ratio: f64,
    /// C₁/|λ|.
    pub bound: f64,
    /// Discrete residual relative to ‖f‖∞.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventReport {
    pub c1: f64,
    pub k_norm: f64,
    pub samples: Vec<ResolventSample>,
    /// max over samples of ratio·|λ|/C₁ (≤ 1 when the bound holds).
    pub max_scaled_ratio: f64,
    pub max_residual: f64,
    pub bound_holds: bool,
}

/// A source pair on the resolvent grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub f1: Vec<Complex64>,
    pub f2: Vec<Complex64>,
}

impl Source {
    pub fn norm(&self) -> f64 {
        sup(&self.f1).max(sup(&self.f2))
    }
}

pub fn resolvent_bound_check(prob: &ResolventProblem, cases: &[(Complex64, Source)]) -> Result<ResolventReport> {
    let c1 = prob.c1();
    let samples: Vec<ResolventSample> = cases
        .par_iter()
        .map(|(lambda, f)| {
            let sol = resolvent_apply(prob, *lambda, &f.f1, &f.f2)?;
            let fnorm = f.norm();
            let ratio = sup(&sol.p).max(sup(&sol.q)) / fnorm;
            let residual = discrete_residual(prob, *lambda, &sol, &f.f1, &f.f2) / fnorm;
            Ok(ResolventSample { lambda: *lambda, ratio, bound: c1 / lambda.norm(), residual })
        })
        .collect::<Result<_>>()?;
    let max_scaled_ratio = samples.iter().map(|s| s.ratio / s.bound).fold(0.0, f64::max);
    let max_residual = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    Ok(ResolventReport {
        c1,
        k_norm: prob.k_norm(),
        bound_holds: samples.iter().all(|s| s.ratio <= s.bound),
        samples,
        max_scaled_ratio,
        max_residual,
    })
}

/// Random smooth sources and spectral parameters: λ with Re λ log-uniform in
/// `re_range` and argument uniform in [0, 0.49π]; f₁, f₂ sums of three
/// Gaussians of width 1–3 centred in the middle half of the grid.
pub fn random_cases(prob: &ResolventProblem, count: usize, re_range: (f64, f64), seed: u64) -> Vec<(Complex64, Source)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let n = prob.len();
    let half = 0.25 * prob.span();
    let mid = prob.x0 + 0.5 * prob.span();
    let gaussian_sum = |rng: &mut rand::rngs::StdRng| -> Vec<Complex64> {
        let bumps: Vec<(f64, f64, Complex64)> = (0..3)
            .map(|_| {
                let c = mid + rng.random_range(-half..half);
                let w = rng.random_range(1.0..3.0);
                let a = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                (c, w, a)
            })
            .collect();
        (0..n)
            .map(|i| {
                let x = prob.xi(i);
                bumps.iter().map(|(c, w, a)| a * (-((x - c) / w).powi(2)).exp()).sum()
            })
            .collect()
    };
    (0..count)
        .map(|_| {
            let re = (re_range.0.ln() + rng.random_range(0.0..1.0) * (re_range.1.ln() - re_range.0.ln())).exp();
            let theta = rng.random_range(0.0..0.49 * std::f64::consts::PI);
            let lambda = Complex64::new(re, re * theta.tan());
            let f1 = gaussian_sum(&mut rng);
            let f2 = gaussian_sum(&mut rng);
            (lambda, Source { f1, f2 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn zero_source_gives_zero() {
        let prob = ResolventProblem::constant(1e-2, 1.25, -50.0, 1e-2, 10001);
        let z = vec![c(0.0); prob.len()];
        let s = resolvent_apply(&prob, c(2.0), &z, &z).unwrap();
        assert!(sup(&s.p) == 0.0 && sup(&s.q) == 0.0);
    }

    #[test]
    fn constant_source_exact() {
        let prob = ResolventProblem::constant(1e-2, 1.25, -50.0, 1e-2, 10001);
        let n = prob.len();
        let lambda = Complex64::new(3.0, 2.0);
        let f2 = vec![c(0.7); n];
        let f1 = vec![c(0.0); n];
        let s = resolvent_apply(&prob, lambda, &f1, &f2).unwrap();
        let q_exact = -0.7 / lambda;
        for qi in &s.q {
            assert!((qi - q_exact).norm() < 1e-12);
        }
        // p solves εp'' − λp = εk(λq + f₂) = 0.
        assert!(sup(&s.p) < 1e-12);
    }

    #[test]
    fn linearity() {
        let prob = ResolventProblem::constant(1e-2, 1.25, -40.0, 1e-2, 8001);
        let cases = random_cases(&prob, 1, (1.0, 10.0), 7);
        let (lambda, f) = &cases[0];
        let s1 = resolvent_apply(&prob, *lambda, &f.f1, &f.f2).unwrap();
        let f1: Vec<_> = f.f1.iter().map(|x| x * 10.0).collect();
        let f2: Vec<_> = f.f2.iter().map(|x| x * 10.0).collect();
        let s2 = resolvent_apply(&prob, *lambda, &f1, &f2).unwrap();
        for (a, b) in s1.p.iter().zip(&s2.p) {
            assert!((a * 10.0 - b).norm() < 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn short_domain_rejected() {
        let prob = ResolventProblem::constant(1e-2, 1.25, -5.0, 1e-2, 1001);
        let z = vec![c(1.0); prob.len()];
        assert!(matches!(resolvent_apply(&prob, c(1.0), &z, &z), Err(Error::DomainTooShort { .. })));
    }

    #[test]
    fn residual_and_bound_on_constant_k() {
        let prob = ResolventProblem::constant(1e-2, 1.25, -60.0, 1e-2, 12001);
        let cases = random_cases(&prob, 4, (1.0, 1e3), 11);
        let rep = resolvent_bound_check(&prob, &cases).unwrap();
        assert!(rep.bound_holds, "{rep:?}");
        assert!(rep.max_residual < 1e-4, "{rep:?}");
    }
}
