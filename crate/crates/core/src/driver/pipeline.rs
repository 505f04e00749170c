//! Runs the enabled stages in dependency order. A stage runs only if every
//! enabled stage it depends on passed; disabled upstream stages are computed
//! on demand without being reported.

use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Branch, ModelSpec, RestStates, WaveParams};
use crate::orbit::{
    capture_rate, continue_in_epsilon, fit_defect_constant, loglog_slope, orbit_distance, shoot_heteroclinic,
    shoot_slow, slow_manifold_defect, DefectFit, IntegratorConfig, Launch, Orbit,
};
use crate::pde::{growth_probe, run_pulse, seed_pulse, Boundary, Grid1D, Perturbation};
use crate::phase_plane::{classify_equilibria, equilibrium_at, Classification, EquilibriumInfo};
use crate::resolvent::{random_cases, resolvent_bound_check, ResolventProblem};
use crate::spectrum::{
    asymptotic_matrices, default_tau_grid, dispersion_curve, dispersion_roots, log_grid, max_growth,
    write_dispersion_csv, Side, WeightReport,
};
use crate::speed_window::{
    pick_trap_constants, saddle_rate_bound, speed_bounds, SaddleRate, SpeedWindow, TrapConstants,
};
use crate::trap::{build_trap, certify_flux, corner_exclusion_check, TrapRegion};

use super::config::{RunConfig, SpeedSetting};
use super::report::{Report, Stage, StageStatus, Stages, Timings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriaSummary {
    pub v_minus: f64,
    pub v_plus: f64,
    /// Classification at the resolved speed, when one is available.
    pub e_minus: Option<EquilibriumInfo>,
    pub e_plus: Option<EquilibriumInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window: SpeedWindow,
    pub speed: f64,
    pub speed_inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapAtSpeed {
    pub s: f64,
    pub constants: Option<TrapConstants>,
    pub samples_per_curve: usize,
    /// Largest certified bound on n·F over all curves (must be ≤ 0).
    pub worst_bound: Option<f64>,
    pub worst_curve: Option<String>,
    pub flux_pass: bool,
    pub saddle: Option<SaddleRate>,
    pub corner_excluded: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapSummary {
    pub flux_tolerance: f64,
    pub speeds: Vec<TrapAtSpeed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootSummary {
    pub length: f64,
    pub samples: usize,
    pub terminal_residual: f64,
    pub residual_tolerance: f64,
    pub stayed_in_trap: bool,
    pub offset: f64,
    /// Hausdorff distance to the orbit launched at half the offset.
    pub offset_sensitivity: f64,
    pub sensitivity_tolerance: f64,
    pub capture_rate: Option<f64>,
    pub predicted_capture_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungSummary {
    pub epsilon: f64,
    pub lambda: Option<f64>,
    pub distance: Option<f64>,
    pub defect: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSummary {
    pub rungs: Vec<RungSummary>,
    pub strictly_decreasing: bool,
    pub slope: Option<f64>,
    pub slope_range: (f64, f64),
    pub defect_fit: Option<DefectFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSummary {
    pub epsilon: f64,
    pub rho: f64,
    pub tau: f64,
    pub lambda: Complex64,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    /// Roots at τ = 0, ρ = 0 on side + against {0, −g'(v₊)/ε}.
    pub anchor_error: f64,
    pub anchor_tolerance: f64,
    pub growth: Vec<GrowthSummary>,
    pub all_positive: bool,
    pub weight: WeightReport,
    /// max Re λ at ρ = 0, side +, at the configured ε.
    pub max_growth_rate: f64,
    pub side_minus_max_growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventSummary {
    pub epsilon: f64,
    pub c1: f64,
    pub k_norm: f64,
    pub samples: usize,
    pub max_scaled_ratio: f64,
    pub max_residual: f64,
    pub residual_tolerance: f64,
    pub bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSummary {
    pub nodes: usize,
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
    pub pulse_width: f64,
    pub measured_speed: f64,
    pub speed_error: f64,
    pub speed_tolerance: f64,
    pub drift_per_1000_steps: f64,
    pub drift_tolerance: f64,
    pub min_u: f64,
    pub growth_rate: Option<f64>,
    pub growth_window: Option<(f64, f64)>,
    pub predicted_rate: f64,
    /// Growth must be positive and within this factor of the prediction.
    pub growth_factor: f64,
    pub growth_error: Option<String>,
}

const NO_SPEED: &str = "speed could not be resolved";

pub const RESIDUAL_TOL: f64 = 1e-6;
pub const SENSITIVITY_FACTOR: f64 = 10.0;
pub const SLOPE_RANGE: (f64, f64) = (0.7, 1.3);
pub const ANCHOR_TOL: f64 = 1e-10;
pub const RESOLVENT_RESIDUAL_TOL: f64 = 1e-4;
pub const SPEED_TOL: f64 = 0.05;
pub const DRIFT_TOL: f64 = 1e-8;
pub const GROWTH_FACTOR: f64 = 2.0;
/// ξ beyond which the layer has decayed when measuring the slow-manifold defect.
pub const DEFECT_XI_MIN: f64 = 0.1;

pub struct PipelineOutcome {
    pub report: Report,
    pub timings: Timings,
}

impl PipelineOutcome {
    /// Writes report.json and timings.json into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.report.write(&dir.join("report.json"))?;
        self.timings.write(&dir.join("timings.json"))
    }

    pub fn exit_code(&self) -> i32 {
        if self.report.any_failed() { 1 } else { 0 }
    }
}

fn gate<T>(upstream: &[(&str, StageStatus)]) -> Option<Stage<T>> {
    upstream
        .iter()
        .find(|(_, s)| matches!(s, StageStatus::Fail | StageStatus::Error | StageStatus::Skipped))
        .map(|(name, _)| Stage::skipped(format!("{name} did not pass")))
}

fn timed<T>(timings: &mut Timings, name: &str, enabled: bool, f: impl FnOnce() -> Stage<T>) -> Stage<T> {
    if !enabled {
        return Stage::disabled();
    }
    let t0 = Instant::now();
    let out = f();
    timings.record(name, t0.elapsed().as_secs_f64());
    out
}

fn checked<T>(r: Result<(T, bool)>) -> Stage<T> {
    match r {
        Ok((v, pass)) => Stage::checked(v, pass),
        Err(e) => Stage::error(e),
    }
}

/// Pulse of the full slow system at `p.epsilon`.
pub fn pulse_orbit(model: &ModelSpec, p: &WaveParams, cfg: &IntegratorConfig) -> Result<Orbit> {
    let guess = equilibrium_at(model, &p.with_epsilon(0.0), p.v_minus)?.eigenvalues[0].re;
    Ok(shoot_slow(model, p, guess, cfg)?.1)
}

pub fn equilibria_stage(model: &ModelSpec, rest: &RestStates, p: Option<&WaveParams>) -> Result<(EquilibriaSummary, bool)> {
    let (e_minus, e_plus, pass) = match p {
        Some(p) => {
            let [ep, em] = classify_equilibria(model, p)?;
            let ok = em.classification == Classification::Saddle && ep.is_stable();
            (Some(em), Some(ep), ok)
        }
        None => (None, None, true),
    };
    Ok((EquilibriaSummary { v_minus: rest.v_minus, v_plus: rest.v_plus, e_minus, e_plus }, pass))
}

pub fn trap_stage(model: &ModelSpec, base: &WaveParams, speeds: &[f64], samples: usize, margin: f64) -> (TrapSummary, bool) {
    let at = |s: f64| -> TrapAtSpeed {
        let mut out = TrapAtSpeed {
            s,
            constants: None,
            samples_per_curve: samples,
            worst_bound: None,
            worst_curve: None,
            flux_pass: false,
            saddle: None,
            corner_excluded: false,
            error: None,
        };
        let run = |out: &mut TrapAtSpeed| -> Result<()> {
            let p = base.with_speed(model, s)?;
            let c = pick_trap_constants(model, &p, margin)?;
            out.constants = Some(c);
            let trap = build_trap(model, &p, &c)?;
            let flux = certify_flux(model, &p, &trap, samples)?;
            let worst = flux.curves.iter().max_by(|a, b| a.inflated_bound.total_cmp(&b.inflated_bound));
            out.worst_bound = worst.map(|c| c.inflated_bound);
            out.worst_curve = worst.map(|c| c.curve.as_str().to_string());
            out.flux_pass = flux.pass;
            out.saddle = Some(saddle_rate_bound(model, &p, &c)?);
            out.corner_excluded = corner_exclusion_check(model, &p, &trap)?;
            Ok(())
        };
        if let Err(e) = run(&mut out) {
            out.error = Some(e.to_string());
        }
        out
    };
    let speeds: Vec<TrapAtSpeed> = speeds.iter().map(|&s| at(s)).collect();
    let pass = speeds
        .iter()
        .all(|t| t.error.is_none() && t.flux_pass && t.corner_excluded && t.saddle.is_some_and(|r| r.ok));
    (TrapSummary { flux_tolerance: 0.0, speeds }, pass)
}

pub fn trap_at(model: &ModelSpec, p: &WaveParams, margin: f64) -> Result<TrapRegion> {
    build_trap(model, p, &pick_trap_constants(model, p, margin)?)
}

pub fn shoot_stage(model: &ModelSpec, p: &WaveParams, trap: &TrapRegion, cfg: &IntegratorConfig) -> Result<(ShootSummary, Orbit, bool)> {
    let orbit = shoot_heteroclinic(model, p, trap, Launch::IntoRegion, cfg)?;
    let half = IntegratorConfig { offset: 0.5 * cfg.offset, ..*cfg };
    let orbit_half = shoot_heteroclinic(model, p, trap, Launch::IntoRegion, &half)?;
    let sensitivity = orbit_distance(&orbit, &orbit_half);
    let e_plus = equilibrium_at(model, p, p.v_plus)?;
    let summary = ShootSummary {
        length: orbit.length(),
        samples: orbit.len(),
        terminal_residual: orbit.terminal_residual,
        residual_tolerance: RESIDUAL_TOL,
        stayed_in_trap: orbit.stayed_in_trap,
        offset: cfg.offset,
        offset_sensitivity: sensitivity,
        sensitivity_tolerance: SENSITIVITY_FACTOR * cfg.offset,
        capture_rate: capture_rate(p, &orbit, 1e-3),
        predicted_capture_rate: e_plus.slowest_rate(),
    };
    let pass = summary.terminal_residual < RESIDUAL_TOL
        && summary.stayed_in_trap
        && sensitivity < SENSITIVITY_FACTOR * cfg.offset;
    Ok((summary, orbit, pass))
}

pub fn continuation_stage(
    model: &ModelSpec,
    p: &WaveParams,
    singular: &Orbit,
    ladder: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(ContinuationSummary, bool)> {
    let rungs = continue_in_epsilon(model, p, singular, ladder, cfg)?;
    let mut out = Vec::with_capacity(rungs.len());
    for r in &rungs {
        let defect = match (&r.orbit, r.epsilon > 0.0) {
            (Some(o), true) => Some(slow_manifold_defect(model, &p.with_epsilon(r.epsilon), o, DEFECT_XI_MIN)?),
            _ => None,
        };
        out.push(RungSummary {
            epsilon: r.epsilon,
            lambda: r.lambda,
            distance: r.distance_to_singular,
            defect,
            error: r.error.clone(),
        });
    }
    let positive: Vec<&RungSummary> = out.iter().filter(|r| r.epsilon > 0.0).collect();
    let complete = positive.iter().all(|r| r.distance.is_some() && r.defect.is_some());
    let (eps, dist): (Vec<f64>, Vec<f64>) = positive.iter().filter_map(|r| Some((r.epsilon, r.distance?))).unzip();
    // Ladder order is arbitrary; sort by decreasing ε before checking monotonicity.
    let mut pairs: Vec<(f64, f64)> = eps.iter().copied().zip(dist.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let strictly_decreasing = pairs.windows(2).all(|w| w[1].1 < w[0].1);
    let slope = (eps.len() >= 2).then(|| loglog_slope(&eps, &dist));
    let (de, dd): (Vec<f64>, Vec<f64>) = positive.iter().filter_map(|r| Some((r.epsilon, r.defect?))).unzip();
    let defect_fit = (de.len() >= 2).then(|| fit_defect_constant(&de, &dd));
    let pass = complete
        && pairs.len() >= 2
        && strictly_decreasing
        && slope.is_some_and(|s| (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&s))
        && defect_fit.as_ref().is_some_and(|f| f.stable);
    Ok((ContinuationSummary { rungs: out, strictly_decreasing, slope, slope_range: SLOPE_RANGE, defect_fit }, pass))
}

pub fn spectrum_stage(
    model: &ModelSpec,
    p: &WaveParams,
    cfg: &super::config::SpectrumSection,
    out: Option<&Path>,
) -> Result<(SpectrumSummary, bool)> {
    let grid = default_tau_grid(cfg.tau_range, cfg.tau_points);
    let anchor = dispersion_roots(&asymptotic_matrices(model, p, Side::Plus, 0.0), 0.0);
    let expected = [Complex64::new(0.0, 0.0), Complex64::new(-model.g_prime(p.v_plus) / p.epsilon, 0.0)];
    let roots = [anchor.lambda_plus, anchor.lambda_minus];
    let direct = (roots[0] - expected[1]).norm().max((roots[1] - expected[0]).norm());
    let swapped = (roots[0] - expected[0]).norm().max((roots[1] - expected[1]).norm());
    let scale = 1.0 + expected[1].norm();
    let anchor_error = direct.min(swapped) / scale;

    let mut rhos = vec![0.0];
    rhos.extend(log_grid(1e-2, 10.0, cfg.rho_log_points));
    let mut growth = Vec::new();
    for &eps in &cfg.epsilons {
        let pe = p.with_epsilon(eps);
        for &rho in &rhos {
            let g = max_growth(&asymptotic_matrices(model, &pe, Side::Plus, rho), &grid);
            growth.push(GrowthSummary { epsilon: eps, rho, tau: g.tau, lambda: g.lambda, positive: g.positive });
        }
    }
    let all_positive = growth.iter().all(|g| g.positive);
    let weight = crate::spectrum::weight_polynomial_check(model, p, &rhos);
    let max_growth_rate = max_growth(&asymptotic_matrices(model, p, Side::Plus, 0.0), &grid).lambda.re;
    let side_minus_max_growth = max_growth(&asymptotic_matrices(model, p, Side::Minus, 0.0), &grid).lambda.re;
    if let Some(dir) = out {
        for &rho in &cfg.rho {
            let pts = dispersion_curve(&asymptotic_matrices(model, p, Side::Plus, rho), &grid);
            write_dispersion_csv(&pts, &dir.join(format!("dispersion_rho_{rho}.csv")))?;
        }
    }
    let pass = anchor_error < ANCHOR_TOL && all_positive && weight.disc_negative && weight.min_p_positive;
    Ok((
        SpectrumSummary {
            anchor_error,
            anchor_tolerance: ANCHOR_TOL,
            growth,
            all_positive,
            weight,
            max_growth_rate,
            side_minus_max_growth,
        },
        pass,
    ))
}

pub fn resolvent_stage(
    model: &ModelSpec,
    p: &WaveParams,
    orbit: &Orbit,
    cfg: &super::config::ResolventSection,
) -> Result<(ResolventSummary, bool)> {
    let prob = ResolventProblem::from_orbit(model, p, orbit, cfg.half_width, cfg.h)?;
    let cases = random_cases(&prob, cfg.samples, (cfg.re_min, cfg.re_max), cfg.seed);
    let rep = resolvent_bound_check(&prob, &cases)?;
    let pass = rep.bound_holds && rep.max_residual < RESOLVENT_RESIDUAL_TOL;
    Ok((
        ResolventSummary {
            epsilon: p.epsilon,
            c1: rep.c1,
            k_norm: rep.k_norm,
            samples: rep.samples.len(),
            max_scaled_ratio: rep.max_scaled_ratio,
            max_residual: rep.max_residual,
            residual_tolerance: RESOLVENT_RESIDUAL_TOL,
            bound_holds: rep.bound_holds,
        },
        pass,
    ))
}

pub fn pde_stage(
    model: &ModelSpec,
    p: &WaveParams,
    orbit: &Orbit,
    cfg: &super::config::PdeSection,
    predicted_rate: f64,
    out: Option<&Path>,
) -> Result<(PdeSummary, bool)> {
    let half = 0.5 * cfg.length;
    let grid = Grid1D::new(-half, half, cfg.nodes, Boundary::Neumann)?;
    let (init, seed) = seed_pulse(p, orbit, &grid)?;
    let run = run_pulse(model, p, &grid, &init, cfg.dt, cfg.steps)?;
    let measured = run.speed.as_ref().map(|s| s.speed).unwrap_or(f64::NAN);
    let pert = Perturbation {
        amplitude: cfg.perturbation_amplitude,
        width: cfg.perturbation_width,
        offset: cfg.perturbation_offset,
    };
    let growth = growth_probe(model, p, &grid, &init, pert, cfg.dt, cfg.growth_horizon);
    if let Some(dir) = out.filter(|_| cfg.write_frames) {
        init.write_csv(&grid, &dir.join("pde_initial.csv"))?;
        let (last, _) = crate::pde::simulate(model, p, &grid, &init, cfg.dt, cfg.steps, 1)?;
        last.write_csv(&grid, &dir.join("pde_final.csv"))?;
    }
    let speed_error = (measured - p.s).abs() / p.s.abs();
    let summary = PdeSummary {
        nodes: grid.n,
        dx: grid.dx,
        dt: cfg.dt,
        steps: cfg.steps,
        pulse_width: seed.width,
        measured_speed: measured,
        speed_error,
        speed_tolerance: SPEED_TOL,
        drift_per_1000_steps: run.drift_per_1000_steps,
        drift_tolerance: DRIFT_TOL,
        min_u: run.min_u,
        growth_rate: growth.as_ref().ok().map(|g| g.rate),
        growth_window: growth.as_ref().ok().map(|g| g.window),
        predicted_rate,
        growth_factor: GROWTH_FACTOR,
        growth_error: growth.as_ref().err().map(|e| e.to_string()),
    };
    let growth_ok = summary
        .growth_rate
        .is_some_and(|r| r > 0.0 && r <= GROWTH_FACTOR * predicted_rate && r >= predicted_rate / GROWTH_FACTOR);
    let pass = speed_error < SPEED_TOL && run.drift_per_1000_steps < DRIFT_TOL && growth_ok;
    Ok((summary, pass))
}

/// Runs every enabled stage. CSV side outputs go to `out` when given.
pub fn run_pipeline(cfg: &RunConfig, out: Option<&Path>) -> Result<PipelineOutcome> {
    cfg.validate()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let model = cfg.model()?;
    let st = &cfg.stages;
    let mut timings = Timings::default();
    let t_total = Instant::now();

    let rest = RestStates::resolve(&model, cfg.wave.u_minus);
    let window = rest.as_ref().ok().map(|r| speed_bounds(&model, r, cfg.wave.branch));
    let speed = match cfg.wave.s {
        SpeedSetting::Fixed(s) => rest.as_ref().ok().map(|_| s),
        SpeedSetting::Auto => window.as_ref().and_then(|w| w.as_ref().ok()).map(|w| w.midpoint()),
    };
    let base = match speed {
        Some(s) => Some(WaveParams::new(&model, cfg.wave.u_minus, s, 0.0)),
        None => None,
    };
    let base = match base {
        Some(Ok(p)) => Some(p),
        _ => None,
    };

    let equilibria = timed(&mut timings, "equilibria", st.equilibria, || match &rest {
        Err(e) => Stage::error(e),
        Ok(r) => checked(equilibria_stage(&model, r, base.as_ref())),
    });
    let eq_status = match (&rest, st.equilibria) {
        (Err(_), false) => StageStatus::Error,
        _ => equilibria.status,
    };

    let speed_window = timed(&mut timings, "speed_window", st.speed_window, || {
        if let Some(s) = gate(&[("equilibria", eq_status)]) {
            return s;
        }
        match window.clone().expect("rest states resolved") {
            Err(e) => Stage::error(e),
            Ok(w) => {
                let s = speed.unwrap_or(f64::NAN);
                let inside = s > w.s_lower && s < w.s_upper;
                Stage::checked(WindowSummary { window: w, speed: s, speed_inside: inside }, inside)
            }
        }
    });
    let upstream = [("equilibria", eq_status), ("speed_window", speed_window.status)];

    let trap = timed(&mut timings, "trap", st.trap, || {
        if let Some(s) = gate(&upstream) {
            return s;
        }
        let (Some(p), Some(Ok(w))) = (base.as_ref(), window.as_ref()) else { return Stage::skipped(NO_SPEED) };
        if cfg.wave.branch != Branch::Above {
            return Stage::error(Error::UnsupportedBranch("trap certification needs the above branch".into()));
        }
        let mut speeds = vec![p.s];
        speeds.extend(w.interior_grid(cfg.trap.speeds));
        let (summary, pass) = trap_stage(&model, p, &speeds, cfg.trap.samples, cfg.trap.margin);
        Stage::checked(summary, pass)
    });

    let mut singular = None;
    let shoot = timed(&mut timings, "shoot", st.shoot, || {
        if let Some(s) = gate(&[upstream[0], upstream[1], ("trap", trap.status)]) {
            return s;
        }
        let Some(p) = base.as_ref() else { return Stage::skipped(NO_SPEED) };
        let r = trap_at(&model, p, cfg.trap.margin).and_then(|t| shoot_stage(&model, p, &t, &cfg.orbit));
        match r {
            Ok((summary, orbit, pass)) => {
                if let Some(dir) = out {
                    if let Err(e) = orbit.write_csv(&dir.join("orbit.csv")) {
                        return Stage::error(e);
                    }
                }
                singular = Some(orbit);
                Stage::checked(summary, pass)
            }
            Err(e) => Stage::error(e),
        }
    });

    let continuation = timed(&mut timings, "continuation", st.continuation, || {
        if let Some(s) = gate(&[upstream[0], upstream[1], ("trap", trap.status), ("shoot", shoot.status)]) {
            return s;
        }
        let Some(p) = base.as_ref() else { return Stage::skipped(NO_SPEED) };
        let singular = match singular.take() {
            Some(o) => Ok(o),
            None => trap_at(&model, p, cfg.trap.margin)
                .and_then(|t| shoot_heteroclinic(&model, p, &t, Launch::IntoRegion, &cfg.orbit)),
        };
        checked(singular.and_then(|o| continuation_stage(&model, p, &o, &cfg.continuation.ladder, &cfg.orbit)))
    });

    let pe = base.as_ref().map(|p| p.with_epsilon(cfg.wave.epsilon));
    let spectrum = timed(&mut timings, "spectrum", st.spectrum, || {
        if let Some(s) = gate(&upstream) {
            return s;
        }
        let Some(p) = pe.as_ref() else { return Stage::skipped(NO_SPEED) };
        checked(spectrum_stage(&model, p, &cfg.spectrum, out))
    });

    let mut pulse: Option<Result<Orbit>> = None;
    let mut get_pulse = |p: &WaveParams| -> Result<Orbit> {
        pulse.get_or_insert_with(|| pulse_orbit(&model, p, &cfg.orbit)).clone()
    };
    let resolvent = timed(&mut timings, "resolvent", st.resolvent, || {
        if let Some(s) = gate(&upstream) {
            return s;
        }
        let Some(p) = pe.as_ref() else { return Stage::skipped(NO_SPEED) };
        checked(get_pulse(p).and_then(|o| resolvent_stage(&model, p, &o, &cfg.resolvent)))
    });

    let pde = timed(&mut timings, "pde", st.pde, || {
        if let Some(s) = gate(&upstream) {
            return s;
        }
        let Some(p) = pe.as_ref() else { return Stage::skipped(NO_SPEED) };
        let grid = default_tau_grid(cfg.spectrum.tau_range, cfg.spectrum.tau_points);
        let predicted = spectrum
            .result
            .as_ref()
            .map(|s| s.max_growth_rate)
            .unwrap_or_else(|| max_growth(&asymptotic_matrices(&model, p, Side::Plus, 0.0), &grid).lambda.re);
        checked(get_pulse(p).and_then(|o| pde_stage(&model, p, &o, &cfg.pde, predicted, out)))
    });

    timings.record("total", t_total.elapsed().as_secs_f64());
    let report = Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        speed,
        stages: Stages { equilibria, speed_window, trap, shoot, continuation, spectrum, resolvent, pde },
    };
    Ok(PipelineOutcome { report, timings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.trap.samples = 200;
        cfg.trap.speeds = 2;
        cfg.continuation.ladder = vec![1e-1, 1e-2];
        cfg.spectrum.rho_log_points = 3;
        cfg.spectrum.tau_points = 51;
        cfg.resolvent.samples = 2;
        cfg.stages.pde = false;
        cfg
    }

    #[test]
    fn no_pulse_regime_gates_everything() {
        let mut cfg = quick_config();
        cfg.wave.u_minus = 1.0;
        let out = run_pipeline(&cfg, None).unwrap();
        let st = &out.report.stages;
        assert_eq!(st.equilibria.status, StageStatus::Error);
        assert!(st.equilibria.message.as_deref().unwrap().contains("no pulse regime"));
        assert_eq!(st.spectrum.status, StageStatus::Skipped);
        assert_eq!(st.pde.status, StageStatus::Disabled);
        assert_eq!(out.exit_code(), 1);
    }

    #[test]
    fn auto_speed_is_window_midpoint() {
        let mut cfg = quick_config();
        cfg.stages = super::super::config::StageToggles {
            equilibria: true,
            speed_window: true,
            trap: false,
            shoot: false,
            continuation: false,
            spectrum: false,
            resolvent: false,
            pde: false,
        };
        let out = run_pipeline(&cfg, None).unwrap();
        let w = out.report.stages.speed_window.result.as_ref().unwrap();
        assert_eq!(out.report.speed, Some(w.window.midpoint()));
        assert_eq!(out.exit_code(), 0);
    }
}
