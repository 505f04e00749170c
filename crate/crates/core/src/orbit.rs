//! Reduced-flow shooting for the singular orbit Λ₀ and ε-continuation of the
//! slow system
//!
//! ```text
//! εU' = −sU + χUφ(W) + su₋ − χu₋φ(0)
//!  W' = −εsW − U + g(V)
//!  V' = W
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{h, h_prime, ModelSpec, WaveParams};
use crate::numerics::geometry::{self, Point};
use crate::numerics::rk::{self, Dopri5, Etdrk4, Flow, StepControl, Stop};
use crate::numerics::roots;
use crate::phase_plane::{equilibrium_at, reduced_vector_field, ReducedState};
use crate::trap::TrapRegion;

pub const HAUSDORFF_NODES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_length: f64,
    pub event_tol: f64,
    pub offset: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.05,
            max_length: 1e4,
            event_tol: 1e-6,
            offset: 1e-7,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.rtol, self.atol, self.max_step, self.max_length, self.event_tol, self.offset]
            .iter()
            .all(|x| *x > 0.0 && x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("integrator tolerances and lengths must be positive".into()))
        }
    }

    fn control(&self) -> StepControl {
        StepControl {
            rtol: self.rtol,
            atol: self.atol,
            h_init: 1e-3_f64.min(self.max_step),
            h_max: self.max_step,
            h_min: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Captured,
    LeftBox,
    Length,
}

/// A sampled trajectory. For reduced orbits `u` holds h(W).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub epsilon: f64,
    pub xi: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub terminal_residual: f64,
    pub stayed_in_trap: bool,
    pub termination: Termination,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.xi.last().copied().unwrap_or(0.0) - self.xi.first().copied().unwrap_or(0.0)
    }

    /// (V, W) projection.
    pub fn vw(&self) -> Vec<Point> {
        self.v.iter().zip(&self.w).map(|(&v, &w)| [v, w]).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wr = csv::Writer::from_path(path)?;
        wr.write_record(["xi", "U", "W", "V"])?;
        for i in 0..self.len() {
            wr.write_record([
                format!("{:.16e}", self.xi[i]),
                format!("{:.16e}", self.u[i]),
                format!("{:.16e}", self.w[i]),
                format!("{:.16e}", self.v[i]),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Hausdorff distance between the (V, W) projections of two orbits.
pub fn orbit_distance(a: &Orbit, b: &Orbit) -> f64 {
    geometry::hausdorff(&a.vw(), &b.vw(), HAUSDORFF_NODES)
}

/// Axis-aligned box `[v_min, v_max] × [w_min, w_max]` for reduced integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub v_min: f64,
    pub v_max: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl BoundingBox {
    fn contains(&self, v: f64, w: f64) -> bool {
        v >= self.v_min && v <= self.v_max && w >= self.w_min && w <= self.w_max
    }
}

fn reduced_rhs<'a>(model: &'a ModelSpec, p: &'a WaveParams) -> impl FnMut(f64, &[f64; 2]) -> Result<[f64; 2]> + 'a {
    move |_, y| {
        let (dv, dw) = reduced_vector_field(model, p, ReducedState { v: y[0], w: y[1] })?;
        Ok([dv, dw])
    }
}

fn reduced_orbit(model: &ModelSpec, p: &WaveParams, xi: Vec<f64>, pts: Vec<[f64; 2]>) -> Result<Orbit> {
    let u = pts.iter().map(|y| h(model, p, y[1])).collect::<Result<Vec<_>>>()?;
    let last = *pts.last().expect("orbit has a start point");
    Ok(Orbit {
        epsilon: 0.0,
        xi,
        u,
        w: pts.iter().map(|y| y[1]).collect(),
        v: pts.iter().map(|y| y[0]).collect(),
        terminal_residual: (last[0] - p.v_plus).hypot(last[1]),
        stayed_in_trap: false,
        termination: Termination::Length,
    })
}

/// Integrates the reduced system from `start` until capture at E₊, exit from
/// `bbox` (if given), or `cfg.max_length`.
pub fn integrate_reduced(
    model: &ModelSpec,
    p: &WaveParams,
    start: ReducedState,
    bbox: Option<BoundingBox>,
    cfg: &IntegratorConfig,
) -> Result<Orbit> {
    cfg.validate()?;
    let y0 = [start.v, start.w];
    let dist = |y: &[f64; 2]| (y[0] - p.v_plus).hypot(y[1]);
    let mut xi = vec![0.0];
    let mut pts = vec![y0];
    if dist(&y0) < cfg.event_tol {
        let mut o = reduced_orbit(model, p, xi, pts)?;
        o.termination = Termination::Captured;
        return Ok(o);
    }
    let mut left = false;
    let (_, _, stop) = rk::integrate(
        &mut Dopri5,
        reduced_rhs(model, p),
        0.0,
        y0,
        cfg.max_length,
        &cfg.control(),
        |t, y| {
            xi.push(t);
            pts.push(*y);
            if let Some(b) = bbox {
                if !b.contains(y[0], y[1]) {
                    left = true;
                    return Ok(Flow::Stop);
                }
            }
            Ok(if dist(y) < cfg.event_tol { Flow::Stop } else { Flow::Continue })
        },
    )?;
    let mut o = reduced_orbit(model, p, xi, pts)?;
    o.termination = match stop {
        Stop::Length => Termination::Length,
        Stop::Observer if left => Termination::LeftBox,
        Stop::Observer => Termination::Captured,
    };
    Ok(o)
}

/// Which side of the unstable manifold of E₋ to launch along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Launch {
    /// W-component negative: into the trapping region.
    #[default]
    IntoRegion,
    OutOfRegion,
}

/// Unit unstable direction of E₋ in (V, W), signed by `launch`.
pub fn unstable_direction(model: &ModelSpec, p: &WaveParams, launch: Launch) -> Result<[f64; 2]> {
    let e = equilibrium_at(model, p, p.v_minus)?;
    let l1 = e.eigenvalues[0].re;
    let n = 1f64.hypot(l1);
    let sign = match launch {
        Launch::IntoRegion => -1.0,
        Launch::OutOfRegion => 1.0,
    };
    Ok([sign / n, sign * l1 / n])
}

/// Shoots from E₋ along its unstable direction and integrates to capture at E₊,
/// checking membership in Ω after every accepted step.
pub fn shoot_heteroclinic(
    model: &ModelSpec,
    p: &WaveParams,
    trap: &TrapRegion,
    launch: Launch,
    cfg: &IntegratorConfig,
) -> Result<Orbit> {
    cfg.validate()?;
    let dir = unstable_direction(model, p, launch)?;
    let y0 = [p.v_minus + cfg.offset * dir[0], cfg.offset * dir[1]];
    if !trap.contains(y0) {
        return Err(Error::Escape { xi: 0.0, v: y0[0], w: y0[1] });
    }
    let mut xi = vec![0.0];
    let mut pts = vec![y0];
    let mut escape = None;
    let (_, _, stop) = rk::integrate(
        &mut Dopri5,
        reduced_rhs(model, p),
        0.0,
        y0,
        cfg.max_length,
        &cfg.control(),
        |t, y| {
            xi.push(t);
            pts.push(*y);
            if !trap.contains(*y) {
                escape = Some(Error::Escape { xi: t, v: y[0], w: y[1] });
                return Ok(Flow::Stop);
            }
            Ok(if (y[0] - p.v_plus).hypot(y[1]) < cfg.event_tol { Flow::Stop } else { Flow::Continue })
        },
    )?;
    if let Some(e) = escape {
        return Err(e);
    }
    if stop == Stop::Length {
        return Err(Error::NoCapture { length: cfg.max_length });
    }
    let mut o = reduced_orbit(model, p, xi, pts)?;
    o.termination = Termination::Captured;
    o.stayed_in_trap = true;
    Ok(o)
}

fn slow_rhs<'a>(model: &'a ModelSpec, p: &'a WaveParams) -> impl FnMut(f64, &[f64; 3]) -> Result<[f64; 3]> + 'a {
    let eps = p.epsilon;
    let c0 = p.s * p.u_minus - model.chi * p.u_minus * model.phi(0.0);
    move |_, y| {
        let [u, w, v] = *y;
        let du = (-p.s * u + model.chi * u * model.phi(w) + c0) / eps;
        let out = [du, -eps * p.s * w - u + model.g(v), w];
        if out.iter().all(|x| x.is_finite()) {
            Ok(out)
        } else {
            Err(Error::ModelViolation(format!("non-finite slow vector field at ({u}, {w}, {v})")))
        }
    }
}

/// Integrates the slow system with an exponential integrator in U (the fast
/// fibre) and step-doubling error control.
pub fn integrate_slow(model: &ModelSpec, p: &WaveParams, start: [f64; 3], cfg: &IntegratorConfig) -> Result<Orbit> {
    cfg.validate()?;
    if !(p.epsilon > 0.0) {
        return Err(Error::InvalidArgument("slow system integration needs epsilon > 0".into()));
    }
    let target = [p.u_minus, 0.0, p.v_plus];
    let dist = |y: &[f64; 3]| {
        ((y[0] - target[0]).powi(2) + (y[1] - target[1]).powi(2) + (y[2] - target[2]).powi(2)).sqrt()
    };
    let mut xi = vec![0.0];
    let mut pts = vec![start];
    let mut escape = None;
    let mut termination = Termination::Captured;
    if dist(&start) >= cfg.event_tol {
        let eps = p.epsilon;
        let mut stepper = Etdrk4::new(move |y: &[f64; 3]| [(model.chi * model.phi(y[1]) - p.s) / eps, 0.0, 0.0]);
        let vspan = p.v_minus + 1.0;
        let (_, _, stop) = rk::integrate(
            &mut stepper,
            slow_rhs(model, p),
            0.0,
            start,
            cfg.max_length,
            &cfg.control(),
            |t, y| {
                xi.push(t);
                pts.push(*y);
                if y[2] < -1.0 || y[2] > vspan || y[1].abs() > 10.0 {
                    escape = Some(Error::Escape { xi: t, v: y[2], w: y[1] });
                    return Ok(Flow::Stop);
                }
                Ok(if dist(y) < cfg.event_tol { Flow::Stop } else { Flow::Continue })
            },
        )?;
        if let Some(e) = escape {
            return Err(e);
        }
        if stop == Stop::Length {
            termination = Termination::Length;
        }
    }
    let last = *pts.last().expect("non-empty");
    Ok(Orbit {
        epsilon: p.epsilon,
        xi,
        u: pts.iter().map(|y| y[0]).collect(),
        w: pts.iter().map(|y| y[1]).collect(),
        v: pts.iter().map(|y| y[2]).collect(),
        terminal_residual: dist(&last),
        stayed_in_trap: false,
        termination,
    })
}

/// Jacobian of the slow system at the saddle (u₋, 0, v₋).
pub fn slow_saddle_jacobian(model: &ModelSpec, p: &WaveParams) -> [[f64; 3]; 3] {
    let eps = p.epsilon;
    let a = (model.chi * model.phi(0.0) - p.s) / eps;
    let b = model.chi * p.u_minus * model.phi_prime(0.0) / eps;
    [[a, b, 0.0], [-1.0, -eps * p.s, model.g_prime(p.v_minus)], [0.0, 1.0, 0.0]]
}

/// Positive eigenvalue of the slow saddle and its unit eigenvector with
/// negative W-component. Newton starts from a bracket seeded by `guess`.
pub fn slow_unstable_eigenpair(model: &ModelSpec, p: &WaveParams, guess: f64) -> Result<(f64, [f64; 3])> {
    let j = slow_saddle_jacobian(model, p);
    let (a, b, e, gp) = (j[0][0], j[0][1], j[1][1], j[1][2]);
    // det(J − λI) = (a − λ)(λ² − eλ − gp) − bλ; one positive root for a saddle.
    let poly = |l: f64| (a - l) * (l * l - e * l - gp) - b * l;
    let dpoly = |l: f64| -(l * l - e * l - gp) + (a - l) * (2.0 * l - e) - b;
    let mut hi = (2.0 * guess).max(1e-3);
    let mut grown = 0;
    while poly(hi) > 0.0 {
        hi *= 2.0;
        grown += 1;
        if grown > 80 {
            return Err(Error::ModelViolation("slow saddle has no positive eigenvalue".into()));
        }
    }
    let lambda = roots::safeguarded_newton(poly, dpoly, 0.0, hi, 1e-15 * (1.0 + hi))
        .ok_or_else(|| Error::ModelViolation("slow saddle eigenvalue not bracketed".into()))?;
    let mut vec = [b * lambda / (lambda - a), lambda, 1.0];
    let n = (vec[0] * vec[0] + vec[1] * vec[1] + vec[2] * vec[2]).sqrt();
    for x in vec.iter_mut() {
        *x /= -n;
    }
    Ok((lambda, vec))
}

/// Pulse of the slow system at `p.epsilon`: launches along the unstable
/// eigenvector of the saddle and integrates to capture at E₊. Returns the
/// saddle eigenvalue with the orbit.
pub fn shoot_slow(model: &ModelSpec, p: &WaveParams, guess: f64, cfg: &IntegratorConfig) -> Result<(f64, Orbit)> {
    let (lambda, dir) = slow_unstable_eigenpair(model, p, guess)?;
    let start = [p.u_minus + cfg.offset * dir[0], cfg.offset * dir[1], p.v_minus + cfg.offset * dir[2]];
    let orbit = integrate_slow(model, p, start, cfg)?;
    if orbit.termination != Termination::Captured {
        return Err(Error::NoCapture { length: cfg.max_length });
    }
    Ok((lambda, orbit))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub epsilon: f64,
    pub lambda: Option<f64>,
    pub orbit: Option<Orbit>,
    pub distance_to_singular: Option<f64>,
    pub error: Option<String>,
}

/// Continues the pulse down an ε-ladder, warm-starting each saddle eigenvalue
/// solve from the previous rung. A zero rung reuses the singular orbit.
pub fn continue_in_epsilon(
    model: &ModelSpec,
    p: &WaveParams,
    singular: &Orbit,
    ladder: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<Rung>> {
    cfg.validate()?;
    let mut guess = equilibrium_at(model, p, p.v_minus)?.eigenvalues[0].re;
    let mut out = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        if eps == 0.0 {
            out.push(Rung {
                epsilon: 0.0,
                lambda: Some(guess),
                orbit: Some(singular.clone()),
                distance_to_singular: Some(0.0),
                error: None,
            });
            continue;
        }
        let pe = p.with_epsilon(eps);
        let attempt = shoot_slow(model, &pe, guess, cfg);
        match attempt {
            Ok((lambda, orbit)) => {
                guess = lambda;
                let d = orbit_distance(&orbit, singular);
                log::info!("epsilon {eps:e}: length {:.3}, distance {d:.3e}", orbit.length());
                out.push(Rung {
                    epsilon: eps,
                    lambda: Some(lambda),
                    orbit: Some(orbit),
                    distance_to_singular: Some(d),
                    error: None,
                });
            }
            Err(e) => {
                log::warn!("epsilon {eps:e} rung failed: {e}");
                out.push(Rung { epsilon: eps, lambda: None, orbit: None, distance_to_singular: None, error: Some(e.to_string()) });
            }
        }
    }
    Ok(out)
}

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// (slope, intercept) of an ordinary least-squares line.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// max |U − h(W)| over samples with ξ > `xi_min`.
pub fn slow_manifold_defect(model: &ModelSpec, p: &WaveParams, orbit: &Orbit, xi_min: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..orbit.len() {
        if orbit.xi[i] > xi_min {
            worst = worst.max((orbit.u[i] - h(model, p, orbit.w[i])?).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectFit {
    /// Least-squares C in defect ≈ C ε.
    pub c: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// max/min of defect/ε across the ladder is at most 2.
    pub stable: bool,
}

pub fn fit_defect_constant(eps: &[f64], defects: &[f64]) -> DefectFit {
    let c = eps.iter().zip(defects).map(|(e, d)| e * d).sum::<f64>() / eps.iter().map(|e| e * e).sum::<f64>();
    let ratios: Vec<f64> = eps.iter().zip(defects).map(|(e, d)| d / e).collect();
    let ratio_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    DefectFit { c, ratio_min, ratio_max, stable: ratio_min > 0.0 && ratio_max / ratio_min <= 2.0 }
}

/// Exponential decay rate of the distance to E₊ along the tail of a reduced
/// orbit, fitted where the distance lies between `event_tol` and `upper`.
pub fn capture_rate(p: &WaveParams, orbit: &Orbit, upper: f64) -> Option<f64> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..orbit.len() {
        let d = (orbit.v[i] - p.v_plus).hypot(orbit.w[i]);
        if d < upper && d > 0.0 {
            x.push(orbit.xi[i]);
            y.push(d.ln());
        }
    }
    if x.len() < 10 {
        return None;
    }
    Some(-linear_fit(&x, &y).0)
}

/// −h'(W) at every sample; negative values confirm Bendixson's criterion along the orbit.
pub fn divergence_along(model: &ModelSpec, p: &WaveParams, orbit: &Orbit) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for &w in &orbit.w {
        worst = worst.max(-h_prime(model, p, w)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, RestStates};
    use crate::speed_window::{pick_trap_constants, speed_bounds};
    use crate::trap::build_trap;
    use crate::Branch;

    fn setup() -> (ModelSpec, WaveParams, TrapRegion) {
        let m = build_model("tanh-quadratic", &[]).unwrap();
        let r = RestStates::resolve(&m, 1.25).unwrap();
        let w = speed_bounds(&m, &r, Branch::Above).unwrap();
        let p = WaveParams::new(&m, 1.25, w.midpoint(), 0.0).unwrap();
        let c = pick_trap_constants(&m, &p, 0.5).unwrap();
        let t = build_trap(&m, &p, &c).unwrap();
        (m, p, t)
    }

    #[test]
    fn fixed_point_start() {
        let (m, p, _) = setup();
        let o = integrate_reduced(&m, &p, ReducedState { v: p.v_plus, w: 0.0 }, None, &Default::default()).unwrap();
        assert_eq!(o.len(), 1);
        assert_eq!(o.terminal_residual, 0.0);
        assert_eq!(o.termination, Termination::Captured);
    }

    #[test]
    fn slow_equilibrium_start() {
        let (m, p, _) = setup();
        let pe = p.with_epsilon(1e-2);
        let o = integrate_slow(&m, &pe, [p.u_minus, 0.0, p.v_plus], &Default::default()).unwrap();
        assert_eq!(o.len(), 1);
        assert_eq!(o.terminal_residual, 0.0);
    }

    #[test]
    fn wrong_branch_escapes() {
        let (m, p, t) = setup();
        let e = shoot_heteroclinic(&m, &p, &t, Launch::OutOfRegion, &Default::default()).unwrap_err();
        assert!(matches!(e, Error::Escape { .. }));
    }

    #[test]
    fn singular_orbit_captured() {
        let (m, p, t) = setup();
        let o = shoot_heteroclinic(&m, &p, &t, Launch::IntoRegion, &Default::default()).unwrap();
        assert!(o.terminal_residual < 1e-6);
        assert!(o.stayed_in_trap);
        assert!(divergence_along(&m, &p, &o).unwrap() < 0.0);
        assert!(o.xi.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn eigenpair_solves_jacobian() {
        let (m, p, _) = setup();
        let pe = p.with_epsilon(1e-2);
        let (l, v) = slow_unstable_eigenpair(&m, &pe, 0.3).unwrap();
        let j = slow_saddle_jacobian(&m, &pe);
        for i in 0..3 {
            let r: f64 = (0..3).map(|k| j[i][k] * v[k]).sum::<f64>() - l * v[i];
            assert!(r.abs() < 1e-10, "row {i}: {r}");
        }
        assert!(l > 0.0 && v[1] < 0.0);
    }

    #[test]
    fn defect_fit_flags_instability() {
        let f = fit_defect_constant(&[0.1, 0.01], &[0.0075, 0.00079]);
        assert!(f.stable);
        let f = fit_defect_constant(&[0.1, 0.01], &[0.0075, 0.0079]);
        assert!(!f.stable);
    }
}
