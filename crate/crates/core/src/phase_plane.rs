//! Equilibria and vector-field structure of the reduced system
//! V' = W, W' = −h(W) + g(V) on the critical manifold.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{h, h_prime, ModelSpec, WaveParams};
use crate::numerics::quadratic::monic_roots;

/// |g'(v)| below this is treated as a non-hyperbolic equilibrium.
pub const HYPERBOLICITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub v: f64,
    pub w: f64,
}

impl From<[f64; 2]> for ReducedState {
    fn from(a: [f64; 2]) -> Self {
        Self { v: a[0], w: a[1] }
    }
}

impl From<ReducedState> for [f64; 2] {
    fn from(s: ReducedState) -> Self {
        [s.v, s.w]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Saddle,
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    NonHyperbolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumInfo {
    pub v: f64,
    /// λ₁ has the larger real part (the unstable one at a saddle).
    pub eigenvalues: [Complex64; 2],
    /// (1, λᵢ)ᵀ, unnormalised, in (V, W) order.
    pub eigenvectors: [[Complex64; 2]; 2],
    pub classification: Classification,
    pub g_prime: f64,
    pub h_prime_zero: f64,
}

impl EquilibriumInfo {
    pub fn is_stable(&self) -> bool {
        matches!(self.classification, Classification::StableNode | Classification::StableFocus)
    }

    /// Decay rate of the slowest mode: |Re| of the eigenvalue closest to the axis.
    pub fn slowest_rate(&self) -> f64 {
        self.eigenvalues[0].re.abs().min(self.eigenvalues[1].re.abs())
    }
}

/// F(V, W) = (W, −h(W) + g(V)).
pub fn reduced_vector_field(model: &ModelSpec, p: &WaveParams, state: ReducedState) -> Result<(f64, f64)> {
    Ok((state.w, -h(model, p, state.w)? + model.g(state.v)))
}

/// Linearisation A(E) = [[0, 1], [g'(v), −h'(0)]] at an equilibrium (v, 0).
pub fn jacobian_at(model: &ModelSpec, p: &WaveParams, v: f64) -> Result<[[f64; 2]; 2]> {
    Ok([[0.0, 1.0], [model.g_prime(v), -h_prime(model, p, 0.0)?]])
}

/// Eigen-decomposition and type of the equilibrium (v, 0).
pub fn equilibrium_at(model: &ModelSpec, p: &WaveParams, v: f64) -> Result<EquilibriumInfo> {
    let gp = model.g_prime(v);
    if gp.abs() < HYPERBOLICITY_TOL {
        return Err(Error::DegenerateEquilibrium { v, g_prime: gp.abs() });
    }
    let hp = h_prime(model, p, 0.0)?;
    let (r1, r2) = monic_roots(Complex64::new(hp, 0.0), Complex64::new(-gp, 0.0));
    let disc = hp * hp + 4.0 * gp;
    let (mut l1, mut l2) = if r1.re > r2.re || (r1.re == r2.re && r1.im >= r2.im) { (r1, r2) } else { (r2, r1) };
    if disc < 0.0 {
        // Exact conjugate pair.
        let re = -0.5 * hp;
        let im = 0.5 * (-disc).sqrt();
        l1 = Complex64::new(re, im);
        l2 = Complex64::new(re, -im);
    } else {
        l1.im = 0.0;
        l2.im = 0.0;
    }
    let classification = if gp > 0.0 {
        Classification::Saddle
    } else if hp > 0.0 {
        if disc >= 0.0 {
            Classification::StableNode
        } else {
            Classification::StableFocus
        }
    } else if disc >= 0.0 {
        Classification::UnstableNode
    } else {
        Classification::UnstableFocus
    };
    let one = Complex64::new(1.0, 0.0);
    Ok(EquilibriumInfo {
        v,
        eigenvalues: [l1, l2],
        eigenvectors: [[one, l1], [one, l2]],
        classification,
        g_prime: gp,
        h_prime_zero: hp,
    })
}

/// Returns `[E₊, E₋]`.
pub fn classify_equilibria(model: &ModelSpec, p: &WaveParams) -> Result<[EquilibriumInfo; 2]> {
    Ok([equilibrium_at(model, p, p.v_plus)?, equilibrium_at(model, p, p.v_minus)?])
}

/// Fast-fibre eigenvalue (u₋/U)(χφ(0) − s).
pub fn transversal_eigenvalue(model: &ModelSpec, p: &WaveParams, u: f64) -> f64 {
    (p.u_minus / u) * (model.chi * model.phi(0.0) - p.s)
}

/// ∇·F = −h'(W).
pub fn divergence(model: &ModelSpec, p: &WaveParams, state: ReducedState) -> Result<f64> {
    Ok(-h_prime(model, p, state.w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;

    fn setup(s: f64) -> (ModelSpec, WaveParams) {
        let m = build_model("tanh-quadratic", &[]).unwrap();
        let p = WaveParams::new(&m, 1.25, s, 0.0).unwrap();
        (m, p)
    }

    #[test]
    fn vector_field_values() {
        let (m, p) = setup(2.0);
        assert_eq!(reduced_vector_field(&m, &p, ReducedState { v: 0.5, w: 0.0 }).unwrap(), (0.0, 0.0));
        assert_eq!(reduced_vector_field(&m, &p, ReducedState { v: 1.5, w: 0.0 }).unwrap(), (0.0, 0.0));
        assert_eq!(reduced_vector_field(&m, &p, ReducedState { v: 1.0, w: 0.0 }).unwrap(), (0.0, -0.25));
    }

    #[test]
    fn canonical_classification() {
        let (m, p) = setup(2.0);
        let [ep, em] = classify_equilibria(&m, &p).unwrap();
        assert_eq!(em.classification, Classification::Saddle);
        assert!((em.eigenvalues[0] * em.eigenvalues[1]).re < 0.0);
        assert_eq!(ep.classification, Classification::StableFocus);
        assert!((ep.eigenvalues[0].re + 0.625).abs() < 1e-15);
        for e in [ep, em] {
            for l in e.eigenvalues {
                let r = l * l + e.h_prime_zero * l - e.g_prime;
                assert!(r.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn shallow_well_gives_node() {
        let m = build_model("tanh-quadratic", &[("d", 0.1)]).unwrap();
        let p = WaveParams::new(&m, 1.01, 2.0, 0.0).unwrap();
        let e = equilibrium_at(&m, &p, p.v_plus).unwrap();
        assert!(e.h_prime_zero.powi(2) + 4.0 * e.g_prime > 0.0);
        assert_eq!(e.classification, Classification::StableNode);
    }

    #[test]
    fn degenerate_at_beta() {
        let (m, p) = setup(2.0);
        assert!(matches!(equilibrium_at(&m, &p, 1.0), Err(Error::DegenerateEquilibrium { .. })));
    }

    #[test]
    fn transversal_and_divergence() {
        let (m, p) = setup(2.0);
        assert_eq!(transversal_eigenvalue(&m, &p, 1.25), -1.0);
        assert_eq!(transversal_eigenvalue(&m, &p, 2.5), -0.5);
        assert_eq!(divergence(&m, &p, ReducedState { v: 1.0, w: 0.0 }).unwrap(), -1.25);
    }
}
