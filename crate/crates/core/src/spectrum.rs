//! Essential-spectrum dispersion relations of the linearisation about the pulse,
//! in the unweighted space and with exponential weight e^{ρξ}.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ModelSpec, WaveParams};
use crate::numerics::quadratic::monic_roots;
use crate::numerics::roots::golden_min;

pub type Mat2 = [[f64; 2]; 2];
pub type CMat2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// ξ → +∞, rest state (u₋, v₊).
    Plus,
    /// ξ → −∞, rest state (u₋, v₋).
    Minus,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }
}

/// Constant-coefficient limits D, M, N of the linearised operator and the
/// weighted M_w = M − 2ρD, N_w = ρ²D − ρM + N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticMatrices {
    pub side: Side,
    pub rho: f64,
    pub epsilon: f64,
    pub d: Mat2,
    pub m: Mat2,
    pub n: Mat2,
    pub m_w: Mat2,
    pub n_w: Mat2,
}

pub fn asymptotic_matrices(model: &ModelSpec, p: &WaveParams, side: Side, rho: f64) -> AsymptoticMatrices {
    let eps = p.epsilon;
    let v = match side {
        Side::Plus => p.v_plus,
        Side::Minus => p.v_minus,
    };
    let phi0 = model.phi(0.0);
    let d = [[eps, -model.chi * p.u_minus * model.phi_prime(0.0)], [0.0, 1.0 / eps]];
    let m = [[p.s - model.chi * phi0, 0.0], [0.0, p.s]];
    let n = [[0.0, 0.0], [1.0 / eps, -model.g_prime(v) / eps]];
    let mut m_w = m;
    let mut n_w = n;
    for i in 0..2 {
        for j in 0..2 {
            m_w[i][j] = m[i][j] - 2.0 * rho * d[i][j];
            n_w[i][j] = rho * rho * d[i][j] - rho * m[i][j] + n[i][j];
        }
    }
    AsymptoticMatrices { side, rho, epsilon: eps, d, m, n, m_w, n_w }
}

impl AsymptoticMatrices {
    /// −τ²D + iτM_w + N_w.
    pub fn symbol(&self, tau: f64) -> CMat2 {
        let mut a = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                a[i][j] = Complex64::new(-tau * tau * self.d[i][j] + self.n_w[i][j], tau * self.m_w[i][j]);
            }
        }
        a
    }

    /// (a, b) in λ² + aλ + b = det(symbol − λI).
    pub fn coefficients(&self, tau: f64) -> (Complex64, Complex64) {
        let a = self.symbol(tau);
        (-(a[0][0] + a[1][1]), a[0][0] * a[1][1] - a[0][1] * a[1][0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub tau: f64,
    pub rho: f64,
    /// Root with the larger real part.
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
}

pub fn dispersion_roots(mats: &AsymptoticMatrices, tau: f64) -> DispersionPoint {
    let (a, b) = mats.coefficients(tau);
    let (r1, r2) = monic_roots(a, b);
    let (lambda_plus, lambda_minus) = if r1.re >= r2.re { (r1, r2) } else { (r2, r1) };
    DispersionPoint { tau, rho: mats.rho, lambda_plus, lambda_minus }
}

/// |det(symbol(τ) − λI)|.
pub fn determinant_residual(mats: &AsymptoticMatrices, tau: f64, lambda: Complex64) -> f64 {
    let a = mats.symbol(tau);
    ((a[0][0] - lambda) * (a[1][1] - lambda) - a[0][1] * a[1][0]).norm()
}

/// Symmetric τ-grid on [−range, range] with `n` nodes (odd n includes τ = 0),
/// clustered quadratically toward the origin.
pub fn default_tau_grid(range: f64, n: usize) -> Vec<f64> {
    let n = n.max(3);
    (0..n)
        .map(|j| {
            let x = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
            range * x * x.abs()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub side: Side,
    pub rho: f64,
    pub tau: f64,
    pub lambda: Complex64,
    pub positive: bool,
}

/// Maximises Re λ₊ over `tau_grid`, then refines by golden section on the
/// cells adjacent to the best node.
pub fn max_growth(mats: &AsymptoticMatrices, tau_grid: &[f64]) -> Growth {
    let re = |t: f64| dispersion_roots(mats, t).lambda_plus.re;
    let values: Vec<f64> = tau_grid.par_iter().map(|&t| re(t)).collect();
    let (best, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let lo = tau_grid[best.saturating_sub(1)];
    let hi = tau_grid[(best + 1).min(tau_grid.len() - 1)];
    let mut tau = tau_grid[best];
    if hi > lo {
        let (t, neg) = golden_min(|t| -re(t), lo, hi, 1e-10 * (1.0 + hi.abs()));
        if -neg > values[best] {
            tau = t;
        }
    }
    let lambda = dispersion_roots(mats, tau).lambda_plus;
    Growth { side: mats.side, rho: mats.rho, tau, lambda, positive: lambda.re > 0.0 }
}

/// Dispersion curve rows `(τ, Re λ₊, Im λ₊, Re λ₋, Im λ₋)`.
pub fn dispersion_curve(mats: &AsymptoticMatrices, tau_grid: &[f64]) -> Vec<DispersionPoint> {
    tau_grid.par_iter().map(|&t| dispersion_roots(mats, t)).collect()
}

pub fn write_dispersion_csv(points: &[DispersionPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["tau", "re_lambda_plus", "im_lambda_plus", "re_lambda_minus", "im_lambda_minus"])?;
    for pt in points {
        w.write_record([
            format!("{:.16e}", pt.tau),
            format!("{:.16e}", pt.lambda_plus.re),
            format!("{:.16e}", pt.lambda_plus.im),
            format!("{:.16e}", pt.lambda_minus.re),
            format!("{:.16e}", pt.lambda_minus.im),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    /// (ρ, P(ρ)) with P(ρ) = (ε + 1/ε)ρ² − (2s − χφ(0))ρ − g'(v₊)/ε.
    pub values: Vec<(f64, f64)>,
    pub disc: f64,
    pub disc_negative: bool,
    pub min_p: f64,
    pub min_p_positive: bool,
    /// disc(P) < 0: the small-ε regime in which P > 0 for every ρ.
    pub small_epsilon_ok: bool,
}

pub fn weight_polynomial(model: &ModelSpec, p: &WaveParams, rho: f64) -> f64 {
    let eps = p.epsilon;
    let lin = 2.0 * p.s - model.chi * model.phi(0.0);
    (eps + 1.0 / eps) * rho * rho - lin * rho - model.g_prime(p.v_plus) / eps
}

pub fn weight_polynomial_check(model: &ModelSpec, p: &WaveParams, rho_grid: &[f64]) -> WeightReport {
    let eps = p.epsilon;
    let lin = 2.0 * p.s - model.chi * model.phi(0.0);
    let disc = lin * lin + 4.0 / eps * (eps + 1.0 / eps) * model.g_prime(p.v_plus);
    let values: Vec<(f64, f64)> = rho_grid.iter().map(|&r| (r, weight_polynomial(model, p, r))).collect();
    let min_p = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    WeightReport {
        values,
        disc,
        disc_negative: disc < 0.0,
        min_p,
        min_p_positive: min_p > 0.0,
        small_epsilon_ok: disc < 0.0,
    }
}

/// Logarithmic grid of `n` points on [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
