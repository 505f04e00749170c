//! Admissible speed window and the free constants of the trapping region.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{b_of_v, h_prime, Branch, ModelSpec, RestStates, WaveParams};
use crate::numerics::quad::simpson;
use crate::numerics::roots::{golden_min, scan_max};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedWindow {
    pub s_lower: f64,
    pub s_upper: f64,
    pub s1: f64,
    pub s2: f64,
    pub j_mean: f64,
    pub q_mean: f64,
    pub branch: Branch,
}

impl SpeedWindow {
    pub fn is_empty(&self) -> bool {
        self.s_upper <= self.s_lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.s_lower + self.s_upper)
    }

    pub fn width(&self) -> f64 {
        self.s_upper - self.s_lower
    }

    /// `n` equally spaced speeds strictly inside the window.
    pub fn interior_grid(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|i| self.s_lower + self.width() * i as f64 / (n + 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConstants {
    pub v_star_low: f64,
    pub v_star_high: f64,
    pub w_low: f64,
    pub w_high: f64,
}

/// J(V) = V (g(V) − u₋).
pub fn j_value(model: &ModelSpec, rest: &RestStates, v: f64) -> f64 {
    v * (model.g(v) - rest.u_minus)
}

/// inf of g' over (V, v₋], by golden-section search plus both endpoints.
pub fn inf_g_prime(model: &ModelSpec, v: f64, v_minus: f64) -> f64 {
    if v >= v_minus {
        return model.g_prime(v_minus);
    }
    let (_, m) = golden_min(|z| model.g_prime(z), v, v_minus, 1e-12 * (1.0 + v_minus));
    m
}

/// Q(V) = (v₋ − V)² inf_{(V, v₋]} g'.
pub fn q_value(model: &ModelSpec, rest: &RestStates, v: f64) -> Result<f64> {
    let inf = inf_g_prime(model, v, rest.v_minus);
    if inf < -1e-12 {
        return Err(Error::ModelViolation(format!(
            "inf g' over ({v}, {}] is {inf} < 0",
            rest.v_minus
        )));
    }
    Ok((rest.v_minus - v).powi(2) * inf.max(0.0))
}

/// (1/v₊) ∫₀^{v₊} J dV.
pub fn integral_j_mean(model: &ModelSpec, rest: &RestStates) -> Result<f64> {
    Ok(simpson(|v| j_value(model, rest, v), 0.0, rest.v_plus)? / rest.v_plus)
}

/// (1/(v₋ − β)) ∫_β^{v₋} Q dV.
pub fn integral_q_mean(model: &ModelSpec, rest: &RestStates) -> Result<f64> {
    // Validate the sign once on a coarse grid, so the quadrature closure can be infallible.
    for i in 0..=64 {
        let v = model.beta + (rest.v_minus - model.beta) * i as f64 / 64.0;
        q_value(model, rest, v)?;
    }
    let span = rest.v_minus - model.beta;
    Ok(simpson(|v| q_value(model, rest, v).unwrap_or(f64::NAN), model.beta, rest.v_minus)? / span)
}

/// Speed bounds s₁, s₂ and the resulting window for the requested branch.
pub fn speed_bounds(model: &ModelSpec, rest: &RestStates, branch: Branch) -> Result<SpeedWindow> {
    let j_mean = integral_j_mean(model, rest)?;
    let q_mean = integral_q_mean(model, rest)?;
    let phi0 = model.phi(0.0);
    let g_beta = model.g(model.beta);
    let g0 = model.g_at_zero;
    let u = rest.u_minus;
    let sign = match branch {
        Branch::Above => 1.0,
        Branch::Below => -1.0,
    };
    let s1 = model.chi / (1.0 - u / g_beta) * (model.phi(-sign * j_mean.sqrt()) - u * phi0 / g_beta);
    let s2 = model.chi / (1.0 - u / g0) * (model.phi(sign * q_mean.sqrt()) - u * phi0 / g0);
    let crit = model.chi * phi0;
    let (s_lower, s_upper) = match branch {
        Branch::Above => (crit, s1.min(s2)),
        Branch::Below => (s1.max(s2), crit),
    };
    let window = SpeedWindow { s_lower, s_upper, s1, s2, j_mean, q_mean, branch };
    if window.is_empty() {
        return Err(Error::EmptyWindow { lower: s_lower, upper: s_upper });
    }
    Ok(window)
}

/// Maximisers of J on (0, v₊) and Q on (β, v₋).
pub fn trap_abscissae(model: &ModelSpec, rest: &RestStates) -> Result<(f64, f64)> {
    let (v_low, _) = scan_max(|v| j_value(model, rest, v), 0.0, rest.v_plus, 2048);
    let (v_high, _) = scan_max(
        |v| q_value(model, rest, v).unwrap_or(f64::NEG_INFINITY),
        model.beta,
        rest.v_minus,
        2048,
    );
    q_value(model, rest, v_high)?;
    Ok((v_low, v_high))
}

/// Chooses v⁎, v* at the maximisers of J, Q and places w⁎, w* a fraction
/// `margin` of the way from the nullcline values toward the radical bounds
/// (for w*, toward the smaller of √Q(v*) and the pole of h).
pub fn pick_trap_constants(model: &ModelSpec, p: &WaveParams, margin: f64) -> Result<TrapConstants> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidArgument(format!("margin must lie in (0, 1), got {margin}")));
    }
    if p.branch(model) != Branch::Above {
        return Err(Error::UnsupportedBranch("trap construction requires s > chi*phi(0)".into()));
    }
    let rest = p.rest();
    let (v_star_low, v_star_high) = trap_abscissae(model, &rest)?;
    let j_root = j_value(model, &rest, v_star_low).sqrt();
    let q_root = q_value(model, &rest, v_star_high)?.sqrt();
    let wb = model.phi_inverse(b_of_v(model, p, model.beta))?;
    let w0 = model.phi_inverse(b_of_v(model, p, 0.0))?;
    let w_low = (1.0 - margin) * wb + margin * (-j_root);
    // h has a pole where χφ(W) = s; keep w* below it so h stays increasing on [0, w*].
    let w_pole = match model.phi_inverse(p.s / model.chi) {
        Ok(w) => w,
        Err(Error::OutOfRange { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let w_high = (1.0 - margin) * w0 + margin * q_root.min(w_pole);
    if !(-j_root < w_low && w_low < wb && wb < 0.0) {
        return Err(Error::ConstantsInfeasible(format!(
            "need -sqrt(J(v*)) < w_low < phi^-1(B(beta)) < 0, got {} < {w_low} < {wb}",
            -j_root
        )));
    }
    if !(0.0 < w0 && w0 < w_high && w_high < q_root) {
        return Err(Error::ConstantsInfeasible(format!(
            "need 0 < phi^-1(B(0)) < w_high < sqrt(Q(v*)), got {w0} < {w_high} < {q_root}"
        )));
    }
    Ok(TrapConstants { v_star_low, v_star_high, w_low, w_high })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleRate {
    pub lambda2: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Stable eigenvalue λ₂(E₋) against the slope bound −w*/(v₋ − v*).
pub fn saddle_rate_bound(model: &ModelSpec, p: &WaveParams, c: &TrapConstants) -> Result<SaddleRate> {
    let hp = h_prime(model, p, 0.0)?;
    let gp = model.g_prime(p.v_minus);
    let lambda2 = -0.5 * (hp + (hp * hp + 4.0 * gp).sqrt());
    let bound = -c.w_high / (p.v_minus - c.v_star_high);
    Ok(SaddleRate { lambda2, bound, ok: lambda2 < bound && bound < 0.0 })
}

/// Trap constants for each speed in `speeds`, computed in parallel.
pub fn constants_over_speeds(
    model: &ModelSpec,
    base: &WaveParams,
    speeds: &[f64],
    margin: f64,
) -> Vec<Result<(WaveParams, TrapConstants)>> {
    speeds
        .par_iter()
        .map(|&s| {
            let p = base.with_speed(model, s)?;
            Ok((p, pick_trap_constants(model, &p, margin)?))
        })
        .collect()
}
