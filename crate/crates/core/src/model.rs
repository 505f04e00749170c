//! Model functions φ and g, wave parameters, and the critical-manifold algebra.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::roots;

/// Guard on `|χφ(W) − s|` below which the critical manifold is treated as singular.
pub const SINGULARITY_GUARD: f64 = 1e-8;
/// Absolute tolerance of the φ⁻¹ Newton solve.
pub const PHI_INVERSE_TOL: f64 = 1e-12;

/// A pair (φ, g) with analytic derivatives.
///
/// φ must be strictly increasing with φ(0) > 0; g must decrease on (0, β) and
/// increase on (β, ∞). Implement this trait to plug a custom family into
/// [`ModelSpec::from_family`].
pub trait ModelFamily: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;
    fn phi(&self, w: f64) -> f64;
    fn phi_prime(&self, w: f64) -> f64;
    fn g(&self, v: f64) -> f64;
    fn g_prime(&self, v: f64) -> f64;
    fn beta(&self) -> f64;
    /// `lim g(V)` as V → ∞; `f64::INFINITY` when unbounded.
    fn g_infinity(&self) -> f64;
    /// Named parameters, for echoing in reports.
    fn parameters(&self) -> Vec<(String, f64)>;
}

/// φ = a + tanh(b w), g = c + d (v − β)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TanhQuadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub beta: f64,
}

impl Default for TanhQuadratic {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, c: 1.0, d: 1.0, beta: 1.0 }
    }
}

impl ModelFamily for TanhQuadratic {
    fn id(&self) -> &str {
        "tanh-quadratic"
    }
    fn phi(&self, w: f64) -> f64 {
        self.a + (self.b * w).tanh()
    }
    fn phi_prime(&self, w: f64) -> f64 {
        let c = (self.b * w).cosh();
        self.b / (c * c)
    }
    fn g(&self, v: f64) -> f64 {
        self.c + self.d * (v - self.beta).powi(2)
    }
    fn g_prime(&self, v: f64) -> f64 {
        2.0 * self.d * (v - self.beta)
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn g_infinity(&self) -> f64 {
        f64::INFINITY
    }
    fn parameters(&self) -> Vec<(String, f64)> {
        [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d), ("beta", self.beta)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect()
    }
}

/// φ = l / (1 + e^{−w}) + m, g = c + d (v − β)² / (1 + v²), so g∞ = c + d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticRational {
    pub l: f64,
    pub m: f64,
    pub c: f64,
    pub d: f64,
    pub beta: f64,
}

impl Default for LogisticRational {
    fn default() -> Self {
        Self { l: 2.0, m: 0.0, c: 1.0, d: 1.0, beta: 1.0 }
    }
}

impl ModelFamily for LogisticRational {
    fn id(&self) -> &str {
        "logistic-rational"
    }
    fn phi(&self, w: f64) -> f64 {
        self.l / (1.0 + (-w).exp()) + self.m
    }
    fn phi_prime(&self, w: f64) -> f64 {
        let e = (-w.abs()).exp();
        self.l * e / ((1.0 + e) * (1.0 + e))
    }
    fn g(&self, v: f64) -> f64 {
        self.c + self.d * (v - self.beta).powi(2) / (1.0 + v * v)
    }
    fn g_prime(&self, v: f64) -> f64 {
        let q = 1.0 + v * v;
        2.0 * self.d * (v - self.beta) * (1.0 + self.beta * v) / (q * q)
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn g_infinity(&self) -> f64 {
        self.c + self.d
    }
    fn parameters(&self) -> Vec<(String, f64)> {
        [("l", self.l), ("m", self.m), ("c", self.c), ("d", self.d), ("beta", self.beta)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect()
    }
}

/// φ = a + b w, g = c + d (v − β)². Mostly useful for probing validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearQuadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub beta: f64,
}

impl Default for LinearQuadratic {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, c: 1.0, d: 1.0, beta: 1.0 }
    }
}

impl ModelFamily for LinearQuadratic {
    fn id(&self) -> &str {
        "linear-quadratic"
    }
    fn phi(&self, w: f64) -> f64 {
        self.a + self.b * w
    }
    fn phi_prime(&self, _w: f64) -> f64 {
        self.b
    }
    fn g(&self, v: f64) -> f64 {
        self.c + self.d * (v - self.beta).powi(2)
    }
    fn g_prime(&self, v: f64) -> f64 {
        2.0 * self.d * (v - self.beta)
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn g_infinity(&self) -> f64 {
        f64::INFINITY
    }
    fn parameters(&self) -> Vec<(String, f64)> {
        [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d), ("beta", self.beta)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect()
    }
}

pub const FAMILY_IDS: [&str; 3] = ["tanh-quadratic", "logistic-rational", "linear-quadratic"];

/// A validated model: family plus the chemotactic coefficient χ and cached values.
#[derive(Clone)]
pub struct ModelSpec {
    family: Arc<dyn ModelFamily>,
    pub chi: f64,
    pub beta: f64,
    pub g_at_zero: f64,
    pub g_infinity: f64,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("family", &self.family)
            .field("chi", &self.chi)
            .field("beta", &self.beta)
            .field("g_at_zero", &self.g_at_zero)
            .field("g_infinity", &self.g_infinity)
            .finish()
    }
}

fn take(params: &[(&str, f64)], allowed: &[&str]) -> Result<Vec<Option<f64>>> {
    for (k, _) in params {
        if *k != "chi" && !allowed.contains(k) {
            return Err(Error::Validation(format!("unknown parameter '{k}'")));
        }
    }
    Ok(allowed
        .iter()
        .map(|name| params.iter().rev().find(|(k, _)| k == name).map(|(_, v)| *v))
        .collect())
}

/// Instantiates a built-in family from its id and named parameters.
/// Missing parameters take the family defaults; `chi` defaults to 1.
pub fn build_model(family_id: &str, params: &[(&str, f64)]) -> Result<ModelSpec> {
    let chi = params.iter().rev().find(|(k, _)| *k == "chi").map(|(_, v)| *v).unwrap_or(1.0);
    let family: Arc<dyn ModelFamily> = match family_id {
        "tanh-quadratic" | "linear-quadratic" => {
            let p = take(params, &["a", "b", "c", "d", "beta"])?;
            let dft = TanhQuadratic::default();
            let vals = [dft.a, dft.b, dft.c, dft.d, dft.beta];
            let v: Vec<f64> = p.iter().zip(vals).map(|(o, d)| o.unwrap_or(d)).collect();
            if family_id == "tanh-quadratic" {
                Arc::new(TanhQuadratic { a: v[0], b: v[1], c: v[2], d: v[3], beta: v[4] })
            } else {
                Arc::new(LinearQuadratic { a: v[0], b: v[1], c: v[2], d: v[3], beta: v[4] })
            }
        }
        "logistic-rational" => {
            let p = take(params, &["l", "m", "c", "d", "beta"])?;
            let dft = LogisticRational::default();
            let vals = [dft.l, dft.m, dft.c, dft.d, dft.beta];
            let v: Vec<f64> = p.iter().zip(vals).map(|(o, d)| o.unwrap_or(d)).collect();
            Arc::new(LogisticRational { l: v[0], m: v[1], c: v[2], d: v[3], beta: v[4] })
        }
        other => {
            return Err(Error::Validation(format!(
                "unknown model family '{other}' (expected one of {})",
                FAMILY_IDS.join(", ")
            )))
        }
    };
    ModelSpec::from_family(family, chi)
}

impl ModelSpec {
    /// Validates a family on probe grids: w ∈ [−5, 5] for φ and v ∈ [0, 4β] for g.
    pub fn from_family(family: Arc<dyn ModelFamily>, chi: f64) -> Result<Self> {
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(Error::Validation(format!("chi must be positive, got {chi}")));
        }
        let beta = family.beta();
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Validation(format!("beta must be positive, got {beta}")));
        }
        let phi0 = family.phi(0.0);
        if !(phi0 > 0.0) {
            return Err(Error::Validation(format!("phi(0) = {phi0} must be positive")));
        }
        for i in 0..=200 {
            let w = -5.0 + 0.05 * i as f64;
            let dp = family.phi_prime(w);
            if !(dp > 0.0 && dp.is_finite()) {
                return Err(Error::Validation(format!("phi'({w}) = {dp} is not positive")));
            }
            let step = 1e-5;
            let fd = (family.phi(w + step) - family.phi(w - step)) / (2.0 * step);
            if (fd - dp).abs() > 1e-6 * (1.0 + dp.abs()) {
                return Err(Error::Validation(format!(
                    "phi' disagrees with finite differences at w = {w}: {dp} vs {fd}"
                )));
            }
        }
        let vmax = 4.0 * beta;
        let mut below = false;
        let mut above = false;
        for i in 0..=400 {
            let v = vmax * i as f64 / 400.0;
            let gv = family.g(v);
            let dg = family.g_prime(v);
            if !(gv > 0.0 && gv.is_finite()) {
                return Err(Error::Validation(format!("g({v}) = {gv} is not positive")));
            }
            let step = 1e-6 * (1.0 + v);
            let fd = (family.g(v + step) - family.g((v - step).max(0.0))) / (v + step - (v - step).max(0.0));
            if v > 2.0 * step && (fd - dg).abs() > 1e-5 * (1.0 + dg.abs()) {
                return Err(Error::Validation(format!(
                    "g' disagrees with finite differences at v = {v}: {dg} vs {fd}"
                )));
            }
            if (v - beta).abs() < 1e-12 {
                continue;
            }
            if v < beta {
                if dg >= 0.0 {
                    return Err(Error::Validation(format!("g'({v}) = {dg} must be negative below beta")));
                }
                below = true;
            } else {
                if dg <= 0.0 {
                    return Err(Error::Validation(format!("g'({v}) = {dg} must be positive above beta")));
                }
                above = true;
            }
        }
        if !(below && above) {
            return Err(Error::Validation("g' has no sign change on the probe grid".into()));
        }
        let spec = Self {
            g_at_zero: family.g(0.0),
            g_infinity: family.g_infinity(),
            family,
            chi,
            beta,
        };
        for i in 0..=40 {
            let w = -5.0 + 0.25 * i as f64;
            let back = spec.phi_inverse(spec.phi(w))?;
            if (back - w).abs() > 1e-8 {
                return Err(Error::Validation(format!("phi^-1(phi({w})) = {back}")));
            }
        }
        Ok(spec)
    }

    pub fn family_id(&self) -> &str {
        self.family.id()
    }

    pub fn family_parameters(&self) -> Vec<(String, f64)> {
        self.family.parameters()
    }

    pub fn phi(&self, w: f64) -> f64 {
        self.family.phi(w)
    }
    pub fn phi_prime(&self, w: f64) -> f64 {
        self.family.phi_prime(w)
    }
    pub fn g(&self, v: f64) -> f64 {
        self.family.g(v)
    }
    pub fn g_prime(&self, v: f64) -> f64 {
        self.family.g_prime(v)
    }

    /// g* = min{g(0), g∞}.
    pub fn g_star(&self) -> f64 {
        self.g_at_zero.min(self.g_infinity)
    }

    /// φ⁻¹(y) by safeguarded Newton on a bracket grown geometrically from 0.
    pub fn phi_inverse(&self, y: f64) -> Result<f64> {
        let p0 = self.phi(0.0);
        if y == p0 {
            return Ok(0.0);
        }
        let dir = if y > p0 { 1.0 } else { -1.0 };
        let mut near = 0.0;
        let mut far = dir;
        let mut grown = 0;
        while (self.phi(far) - y) * dir < 0.0 {
            near = far;
            far *= 2.0;
            grown += 1;
            if grown > 60 || !self.phi(far).is_finite() {
                return Err(Error::OutOfRange { value: y });
            }
        }
        let (lo, hi) = if dir > 0.0 { (near, far) } else { (far, near) };
        roots::safeguarded_newton(|w| self.phi(w) - y, |w| self.phi_prime(w), lo, hi, PHI_INVERSE_TOL)
            .ok_or(Error::OutOfRange { value: y })
    }
}

/// Branch of the speed relative to χφ(0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    #[default]
    Above,
    Below,
}

/// Speed, left state, singular parameter, and the resolved rest states v±.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub s: f64,
    pub u_minus: f64,
    pub epsilon: f64,
    pub v_minus: f64,
    pub v_plus: f64,
}

impl WaveParams {
    pub fn new(model: &ModelSpec, u_minus: f64, s: f64, epsilon: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Validation(format!("speed must be positive, got {s}")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Validation(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        let crit = model.chi * model.phi(0.0);
        if (s - crit).abs() < SINGULARITY_GUARD {
            return Err(Error::Validation(format!("speed {s} coincides with chi*phi(0) = {crit}")));
        }
        let (v_minus, v_plus) = resolve_states(model, u_minus)?;
        Ok(Self { s, u_minus, epsilon, v_minus, v_plus })
    }

    pub fn with_speed(&self, model: &ModelSpec, s: f64) -> Result<Self> {
        Self::new(model, self.u_minus, s, self.epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..*self }
    }

    pub fn rest(&self) -> RestStates {
        RestStates { u_minus: self.u_minus, v_minus: self.v_minus, v_plus: self.v_plus }
    }

    pub fn branch(&self, model: &ModelSpec) -> Branch {
        if self.s > model.chi * model.phi(0.0) {
            Branch::Above
        } else {
            Branch::Below
        }
    }
}

/// Rest states of a pulse: u₊ = u₋ and g(v±) = u₋.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestStates {
    pub u_minus: f64,
    pub v_minus: f64,
    pub v_plus: f64,
}

impl RestStates {
    pub fn resolve(model: &ModelSpec, u_minus: f64) -> Result<Self> {
        let (v_minus, v_plus) = resolve_states(model, u_minus)?;
        Ok(Self { u_minus, v_minus, v_plus })
    }
}

/// The two roots v₊ < β < v₋ of g(v) = u₋ (returned as `(v_minus, v_plus)`).
pub fn resolve_states(model: &ModelSpec, u_minus: f64) -> Result<(f64, f64)> {
    let lower = model.g(model.beta);
    let upper = model.g_star();
    if !(u_minus > lower && u_minus < upper) {
        return Err(Error::NoPulseRegime { u_minus, lower, upper });
    }
    let f = |v: f64| model.g(v) - u_minus;
    let v_plus = roots::bisect(f, 0.0, model.beta).ok_or(Error::BracketFailure { target: u_minus })?;
    let mut hi = 2.0 * model.beta;
    let mut grown = 0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        grown += 1;
        if grown > 60 || !hi.is_finite() {
            return Err(Error::BracketFailure { target: u_minus });
        }
    }
    let v_minus = roots::bisect(f, model.beta, hi).ok_or(Error::BracketFailure { target: u_minus })?;
    Ok((v_minus, v_plus))
}

fn manifold_gap(model: &ModelSpec, p: &WaveParams, w: f64) -> Result<f64> {
    let den = model.chi * model.phi(w) - p.s;
    if !(den.abs() >= SINGULARITY_GUARD) {
        return Err(Error::ManifoldSingularity { w, gap: den.abs() });
    }
    Ok(den)
}

/// Critical manifold U = h(W) = u₋(χφ(0) − s)/(χφ(W) − s).
pub fn h(model: &ModelSpec, p: &WaveParams, w: f64) -> Result<f64> {
    let den = manifold_gap(model, p, w)?;
    Ok(p.u_minus * (model.chi * model.phi(0.0) - p.s) / den)
}

/// h'(W) = −u₋χφ'(W)(χφ(0) − s)/(χφ(W) − s)².
pub fn h_prime(model: &ModelSpec, p: &WaveParams, w: f64) -> Result<f64> {
    let den = manifold_gap(model, p, w)?;
    Ok(-p.u_minus * model.chi * model.phi_prime(w) * (model.chi * model.phi(0.0) - p.s) / (den * den))
}

/// B(V) = s/χ + (u₋/g(V))(φ(0) − s/χ), so that h(φ⁻¹(B(V))) = g(V).
pub fn b_of_v(model: &ModelSpec, p: &WaveParams, v: f64) -> f64 {
    let r = p.s / model.chi;
    r + (p.u_minus / model.g(v)) * (model.phi(0.0) - r)
}

/// The W'-nullcline W = φ⁻¹(B(V)).
pub fn nullcline_w(model: &ModelSpec, p: &WaveParams, v: f64) -> Result<f64> {
    model.phi_inverse(b_of_v(model, p, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> ModelSpec {
        build_model("tanh-quadratic", &[]).unwrap()
    }

    #[test]
    fn canonical_cached_values() {
        let m = canonical();
        assert_eq!(m.beta, 1.0);
        assert_eq!(m.g_at_zero, 2.0);
        assert!(m.g_infinity.is_infinite());
        assert_eq!(m.g_star(), 2.0);
    }

    #[test]
    fn decreasing_phi_rejected() {
        let e = build_model("linear-quadratic", &[("b", -1.0)]).unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
        let e = build_model("tanh-quadratic", &[("a", -1.0)]).unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
        assert!(build_model("nope", &[]).is_err());
        assert!(build_model("tanh-quadratic", &[("zz", 1.0)]).is_err());
    }

    #[test]
    fn probe_minimum_of_phi_prime() {
        let m = canonical();
        let min = (0..=200).map(|i| m.phi_prime(-5.0 + 0.05 * i as f64)).fold(f64::INFINITY, f64::min);
        let sech = 1.0 / 5f64.cosh();
        assert!((min - sech * sech).abs() < 1e-15);
        assert!(min > 0.0);
    }

    #[test]
    fn canonical_states_and_regime_edges() {
        let m = canonical();
        let (vm, vp) = resolve_states(&m, 1.25).unwrap();
        assert!((vm - 1.5).abs() < 1e-10 && (vp - 0.5).abs() < 1e-10);
        assert!(matches!(resolve_states(&m, 1.0), Err(Error::NoPulseRegime { .. })));
        assert!(matches!(resolve_states(&m, 2.0), Err(Error::NoPulseRegime { .. })));
    }

    #[test]
    fn bounded_family_uses_finite_g_infinity() {
        let m = build_model("logistic-rational", &[("c", 1.0), ("d", 0.5), ("beta", 2.0)]).unwrap();
        assert_eq!(m.g_infinity, 1.5);
        assert_eq!(m.g_star(), 1.5);
        let (vm, vp) = resolve_states(&m, 1.3).unwrap();
        assert!(vp < 2.0 && vm > 2.0);
        assert!((m.g(vm) - 1.3).abs() < 1e-12 && (m.g(vp) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn h_values() {
        let m = canonical();
        let p = WaveParams::new(&m, 1.25, 2.0, 0.0).unwrap();
        assert_eq!(h(&m, &p, 0.0).unwrap(), 1.25);
        let expected = 1.25 * (1.0 - 2.0) / ((1.0 + (-0.5f64).tanh()) - 2.0);
        assert!((h(&m, &p, -0.5).unwrap() - expected).abs() < 1e-15);
        // 30-digit reference value.
        assert!((h(&m, &p, -0.5).unwrap() - 0.854_924_650_732_151_5).abs() < 1e-15);
        assert!((h_prime(&m, &p, 0.0).unwrap() - 1.25).abs() < 1e-15);
        assert!(matches!(h(&m, &p, 40.0), Err(Error::ManifoldSingularity { .. })));
        assert!((b_of_v(&m, &p, 1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn phi_inverse_out_of_range() {
        let m = canonical();
        assert!(matches!(m.phi_inverse(2.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(m.phi_inverse(-0.1), Err(Error::OutOfRange { .. })));
        assert!((m.phi_inverse(1.5).unwrap() - 0.5f64.atanh()).abs() < 1e-12);
    }

    #[test]
    fn speed_on_critical_value_rejected() {
        let m = canonical();
        assert!(WaveParams::new(&m, 1.25, 1.0, 0.0).is_err());
    }
}
