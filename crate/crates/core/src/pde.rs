//! Direct simulation of the full system on a truncated line: implicit
//! diffusion and reaction, explicit upwind MUSCL advection with a minmod
//! limiter.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, WaveParams};
use crate::numerics::interp::CubicSpline;
use crate::numerics::tridiag;
use crate::orbit::Orbit;
use crate::resolvent::pulse_center;

pub const MIN_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Zero gradient at both ends for u and v.
    #[default]
    Neumann,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub dx: f64,
    pub boundary: Boundary,
}

impl Grid1D {
    /// Neumann grids put nodes on both ends; periodic grids identify x_max with x_min.
    pub fn new(x_min: f64, x_max: f64, n: usize, boundary: Boundary) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::InvalidArgument(format!("grid needs at least {MIN_NODES} nodes, got {n}")));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidArgument(format!("bad grid interval [{x_min}, {x_max}]")));
        }
        let dx = match boundary {
            Boundary::Neumann => (x_max - x_min) / (n - 1) as f64,
            Boundary::Periodic => (x_max - x_min) / n as f64,
        };
        Ok(Self { x_min, x_max, n, dx, boundary })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Control-volume widths: dx inside, dx/2 at Neumann ends.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.dx; self.n];
        if self.boundary == Boundary::Neumann {
            w[0] = 0.5 * self.dx;
            w[self.n - 1] = 0.5 * self.dx;
        }
        w
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights().iter().zip(f).map(|(w, f)| w * f).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl PdeState {
    pub fn constant(grid: &Grid1D, u: f64, v: f64) -> Self {
        Self { u: vec![u; grid.n], v: vec![v; grid.n], t: 0.0 }
    }

    pub fn mass(&self, grid: &Grid1D) -> f64 {
        grid.integrate(&self.u)
    }

    pub fn write_csv(&self, grid: &Grid1D, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "u", "v"])?;
        for i in 0..grid.n {
            w.write_record([grid.x(i).to_string(), self.u[i].to_string(), self.v[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b > 0.0 {
        a.signum() * a.abs().min(b.abs())
    } else {
        0.0
    }
}

/// Largest stable explicit advection step: 0.5·dx / max|χφ(v_x)|.
pub fn cfl_limit(model: &ModelSpec, grid: &Grid1D, v: &[f64]) -> f64 {
    let n = grid.n;
    let faces = if grid.boundary == Boundary::Periodic { n } else { n - 1 };
    let vmax = (0..faces)
        .map(|i| (model.chi * model.phi((v[(i + 1) % n] - v[i]) / grid.dx)).abs())
        .fold(0.0, f64::max);
    if vmax > 0.0 { 0.5 * grid.dx / vmax } else { f64::INFINITY }
}

/// Optional manufactured forcing (S_u, S_v) added to the u- and v-equations.
pub type Forcing<'a> = &'a dyn Fn(f64, f64) -> (f64, f64);

/// One IMEX Euler step of size `dt`.
pub fn step(model: &ModelSpec, p: &WaveParams, grid: &Grid1D, state: &PdeState, dt: f64) -> Result<PdeState> {
    step_forced(model, p, grid, state, dt, None)
}

pub fn step_forced(
    model: &ModelSpec,
    p: &WaveParams,
    grid: &Grid1D,
    state: &PdeState,
    dt: f64,
    forcing: Option<Forcing<'_>>,
) -> Result<PdeState> {
    let n = grid.n;
    if state.u.len() != n || state.v.len() != n {
        return Err(Error::InvalidArgument("state length does not match the grid".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let eps = p.epsilon;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("simulation needs epsilon > 0".into()));
    }
    let cfl = cfl_limit(model, grid, &state.v);
    if dt > cfl {
        log::warn!("dt = {dt:e} exceeds the advective CFL limit {cfl:e}");
    }
    let periodic = grid.boundary == Boundary::Periodic;
    let (u, v, dx) = (&state.u, &state.v, grid.dx);
    let w = grid.weights();
    let at = |i: isize| -> usize { i.rem_euclid(n as isize) as usize };

    // Limited slopes; Neumann end nodes are first order.
    let slope: Vec<f64> = (0..n)
        .map(|i| {
            if !periodic && (i == 0 || i == n - 1) {
                0.0
            } else {
                let ii = i as isize;
                minmod(u[i] - u[at(ii - 1)], u[at(ii + 1)] - u[i])
            }
        })
        .collect();
    // flux[i] sits on the face between node i and i+1 (cyclic when periodic).
    let faces = if periodic { n } else { n - 1 };
    let flux: Vec<f64> = (0..faces)
        .map(|i| {
            let j = (i + 1) % n;
            let a = model.chi * model.phi((v[j] - v[i]) / dx);
            if a >= 0.0 { a * (u[i] + 0.5 * slope[i]) } else { a * (u[j] - 0.5 * slope[j]) }
        })
        .collect();
    let edge = model.chi * model.phi(0.0);
    let t1 = state.t + dt;
    let mut rhs: Vec<f64> = (0..n)
        .map(|i| {
            let right = if i < faces { flux[i] } else { edge * u[n - 1] };
            let left = if i > 0 { flux[i - 1] } else if periodic { flux[n - 1] } else { edge * u[0] };
            u[i] - dt * (right - left) / w[i]
        })
        .collect();
    if let Some(f) = forcing {
        for (i, r) in rhs.iter_mut().enumerate() {
            *r += dt * f(grid.x(i), t1).0;
        }
    }

    let solve = |diag_extra: &dyn Fn(usize) -> f64, coef: f64, rhs: &[f64]| -> Result<Vec<f64>> {
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let c = coef / (dx * w[i]);
            let has_left = periodic || i > 0;
            let has_right = periodic || i + 1 < n;
            diag[i] = diag_extra(i);
            if has_left {
                lower[i] = -c;
                diag[i] += c;
            }
            if has_right {
                upper[i] = -c;
                diag[i] += c;
            }
        }
        if periodic { tridiag::solve_cyclic(&lower, &diag, &upper, rhs) } else { tridiag::solve(&lower, &diag, &upper, rhs) }
    };

    let u_new = solve(&|_| 1.0, eps * dt, &rhs)?;
    let gp: Vec<f64> = v.iter().map(|&x| model.g_prime(x)).collect();
    let mut rhs_v: Vec<f64> = (0..n).map(|i| v[i] + dt / eps * (u_new[i] - model.g(v[i]) + gp[i] * v[i])).collect();
    if let Some(f) = forcing {
        for (i, r) in rhs_v.iter_mut().enumerate() {
            *r += dt / eps * f(grid.x(i), t1).1;
        }
    }
    let v_new = solve(&|i| 1.0 + dt / eps * gp[i], dt / eps, &rhs_v)?;
    Ok(PdeState { u: u_new, v: v_new, t: t1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    /// Full width at half maximum of |U − u₋| along the orbit.
    pub width: f64,
    /// Orbit ξ mapped to the domain midpoint.
    pub center: f64,
}

/// Full width at half maximum of |U − u₋|.
pub fn pulse_width(orbit: &Orbit, u_minus: f64) -> f64 {
    let d: Vec<f64> = orbit.u.iter().map(|u| (u - u_minus).abs()).collect();
    let peak = d.iter().cloned().fold(0.0, f64::max);
    let above: Vec<f64> = orbit.xi.iter().zip(&d).filter(|(_, d)| **d >= 0.5 * peak).map(|(x, _)| *x).collect();
    match (above.first(), above.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    }
}

/// Places the orbit on the grid with its extremum of |U − u₋| at the domain
/// midpoint. Beyond the orbit the state is (u₋, v₋) on the left and (u₋, v₊)
/// on the right.
pub fn seed_pulse(p: &WaveParams, orbit: &Orbit, grid: &Grid1D) -> Result<(PdeState, SeedInfo)> {
    if orbit.len() < 4 {
        return Err(Error::SeedRejected("orbit has too few samples".into()));
    }
    let width = pulse_width(orbit, p.u_minus);
    if !(width > 0.0) || grid.length() < 4.0 * width {
        return Err(Error::SeedRejected(format!("domain length {} is shorter than 4 pulse widths ({width})", grid.length())));
    }
    let center = pulse_center(orbit, p.u_minus);
    let mut xs = Vec::with_capacity(orbit.len());
    let mut us = Vec::with_capacity(orbit.len());
    let mut vs = Vec::with_capacity(orbit.len());
    for i in 0..orbit.len() {
        if xs.last().is_none_or(|&l| orbit.xi[i] > l) {
            xs.push(orbit.xi[i] - center);
            us.push(orbit.u[i]);
            vs.push(orbit.v[i]);
        }
    }
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let su = CubicSpline::new(xs.clone(), us)?;
    let sv = CubicSpline::new(xs, vs)?;
    let mid = 0.5 * (grid.x_min + grid.x_max);
    let mut state = PdeState::constant(grid, p.u_minus, p.v_minus);
    for i in 0..grid.n {
        let xi = grid.x(i) - mid;
        if xi < lo {
            state.v[i] = p.v_minus;
        } else if xi > hi {
            state.v[i] = p.v_plus;
        } else {
            state.u[i] = su.eval(xi);
            state.v[i] = sv.eval(xi);
        }
    }
    Ok((state, SeedInfo { width, center }))
}

/// Sub-grid location of the extremum of |u − background|: least-squares
/// quadratic over ±`half` nodes around the discrete maximum.
pub fn peak_position(grid: &Grid1D, u: &[f64], background: f64, half: usize) -> Result<f64> {
    let n = grid.n;
    let d: Vec<f64> = u.iter().map(|x| (x - background).abs()).collect();
    let (imax, dmax) = d.iter().enumerate().fold((0, 0.0), |b, (i, &x)| if x > b.1 { (i, x) } else { b });
    if dmax < 0.1 * background.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::PeakLost { t: f64::NAN });
    }
    let periodic = grid.boundary == Boundary::Periodic;
    // Normal equations for d ≈ c0 + c1 s + c2 s² with s in node units.
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for k in -(half as isize)..=(half as isize) {
        let j = imax as isize + k;
        let idx = if periodic {
            j.rem_euclid(n as isize) as usize
        } else if j < 0 || j >= n as isize {
            continue;
        } else {
            j as usize
        };
        let s = k as f64;
        let basis = [1.0, s, s * s];
        for a in 0..3 {
            r[a] += basis[a] * d[idx];
            for b in 0..3 {
                m[a][b] += basis[a] * basis[b];
            }
        }
    }
    let c = solve3(m, r).ok_or_else(|| Error::PeakLost { t: f64::NAN })?;
    let shift = if c[2] < 0.0 { (-c[1] / (2.0 * c[2])).clamp(-1.0, 1.0) } else { 0.0 };
    Ok(grid.x(imax) + shift * grid.dx)
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut a = m;
        for row in 0..3 {
            a[row][k] = r[row];
        }
        *o = det(a) / d;
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedFit {
    pub speed: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

pub const PEAK_HALF_WINDOW: usize = 10;

/// Least-squares speed of the pulse extremum over recorded frames.
pub fn track_speed(grid: &Grid1D, frames: &[PdeState], background: f64) -> Result<SpeedFit> {
    if frames.len() < 10 {
        return Err(Error::InvalidArgument(format!("speed tracking needs at least 10 frames, got {}", frames.len())));
    }
    let mut times = Vec::with_capacity(frames.len());
    let mut positions = Vec::with_capacity(frames.len());
    for f in frames {
        let x = peak_position(grid, &f.u, background, PEAK_HALF_WINDOW).map_err(|_| Error::PeakLost { t: f.t })?;
        times.push(f.t);
        positions.push(x);
    }
    let (speed, _) = crate::orbit::linear_fit(&times, &positions);
    Ok(SpeedFit { speed, times, positions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
    /// |Δmass|/mass scaled to 10³ steps.
    pub drift_per_1000_steps: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub speed: Option<SpeedFit>,
}

/// Advances `steps` steps, keeping `frames` evenly spaced snapshots
/// (including the initial and final states).
pub fn simulate(
    model: &ModelSpec,
    p: &WaveParams,
    grid: &Grid1D,
    init: &PdeState,
    dt: f64,
    steps: usize,
    frames: usize,
) -> Result<(PdeState, Vec<PdeState>)> {
    let stride = (steps / frames.max(1)).max(1);
    let mut out = vec![init.clone()];
    let mut state = init.clone();
    let mut min_u = f64::INFINITY;
    for k in 1..=steps {
        state = step(model, p, grid, &state, dt)?;
        min_u = min_u.min(state.u.iter().cloned().fold(f64::INFINITY, f64::min));
        if k % stride == 0 || k == steps {
            out.push(state.clone());
        }
    }
    if min_u < -1e-12 {
        log::warn!("u dipped to {min_u:e}");
    }
    Ok((state, out))
}

/// Runs the seeded pulse for `steps` steps and tracks its speed and mass.
pub fn run_pulse(model: &ModelSpec, p: &WaveParams, grid: &Grid1D, init: &PdeState, dt: f64, steps: usize) -> Result<SimulationReport> {
    let (last, frames) = simulate(model, p, grid, init, dt, steps, 20)?;
    let m0 = init.mass(grid);
    let m1 = last.mass(grid);
    let fold_min = |f: &dyn Fn(&PdeState) -> f64| frames.iter().map(f).fold(f64::INFINITY, f64::min);
    let min_u = fold_min(&|s| s.u.iter().cloned().fold(f64::INFINITY, f64::min));
    let min_v = fold_min(&|s| s.v.iter().cloned().fold(f64::INFINITY, f64::min));
    let speed = track_speed(grid, &frames, p.u_minus)?;
    Ok(SimulationReport {
        steps,
        dt,
        t_end: last.t,
        mass_initial: m0,
        mass_final: m1,
        drift_per_1000_steps: (m1 - m0).abs() / m0.abs() * 1000.0 / steps.max(1) as f64,
        min_u,
        min_v,
        speed: Some(speed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub width: f64,
    /// Offset of the Gaussian centre from the domain midpoint.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub rate: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Twin runs with and without a Gaussian bump in v; fits the exponential
/// growth of the sup-norm difference over the window where it has grown
/// between 2× and 20× its initial size.
pub fn growth_probe(
    model: &ModelSpec,
    p: &WaveParams,
    grid: &Grid1D,
    init: &PdeState,
    pert: Perturbation,
    dt: f64,
    horizon: f64,
) -> Result<GrowthFit> {
    let mid = 0.5 * (grid.x_min + grid.x_max);
    let mut pert_state = init.clone();
    for i in 0..grid.n {
        let z = (grid.x(i) - mid - pert.offset) / pert.width;
        pert_state.v[i] += pert.amplitude * (-z * z).exp();
    }
    let diff = |a: &PdeState, b: &PdeState| {
        a.u.iter().zip(&b.u).chain(a.v.iter().zip(&b.v)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let d0 = diff(init, &pert_state);
    if !(d0 > 0.0) {
        return Err(Error::NoLinearWindow("perturbation is zero".into()));
    }
    let mut base = init.clone();
    let mut times = vec![0.0];
    let mut norms = vec![d0];
    let steps = (horizon / dt).round() as usize;
    for _ in 0..steps {
        base = step(model, p, grid, &base, dt)?;
        pert_state = step(model, p, grid, &pert_state, dt)?;
        let d = diff(&base, &pert_state);
        times.push(base.t - init.t);
        norms.push(d);
        if d > 20.0 * d0 {
            break;
        }
    }
    let idx: Vec<usize> = (0..norms.len()).filter(|&i| norms[i] >= 2.0 * d0 && norms[i] <= 20.0 * d0).collect();
    // The window must be one contiguous stretch reached before the horizon.
    let contiguous = idx.windows(2).all(|w| w[1] == w[0] + 1);
    if idx.len() < 3 || !contiguous || *norms.last().expect("non-empty") < 20.0 * d0 {
        return Err(Error::NoLinearWindow(format!(
            "perturbation grew to {:.3}x of its initial size in {horizon}",
            norms.last().copied().unwrap_or(0.0) / d0
        )));
    }
    let t: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let ln: Vec<f64> = idx.iter().map(|&i| norms[i].ln()).collect();
    let (rate, _) = crate::orbit::linear_fit(&t, &ln);
    Ok(GrowthFit { rate, window: (t[0], t[t.len() - 1]), points: idx.len(), times, norms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;

    fn setup() -> (ModelSpec, WaveParams) {
        let m = build_model("tanh-quadratic", &[]).unwrap();
        let p = WaveParams::new(&m, 1.25, 1.19, 1e-2).unwrap();
        (m, p)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(0.0, 1.0, 63, Boundary::Neumann).is_err());
        let g = Grid1D::new(0.0, 1.0, 65, Boundary::Neumann).unwrap();
        assert!((g.dx - 1.0 / 64.0).abs() < 1e-15);
        assert!((g.integrate(&[1.0; 65]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn balanced_constant_state_is_fixed() {
        let (m, p) = setup();
        let g = Grid1D::new(-10.0, 10.0, 128, Boundary::Neumann).unwrap();
        let s0 = PdeState::constant(&g, 1.25, p.v_plus);
        let mut s = s0.clone();
        for _ in 0..50 {
            s = step(&m, &p, &g, &s, 1e-3).unwrap();
        }
        for (a, b) in s.u.iter().zip(&s0.u).chain(s.v.iter().zip(&s0.v)) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_density_stays_zero() {
        let (m, p) = setup();
        let g = Grid1D::new(-10.0, 10.0, 128, Boundary::Periodic).unwrap();
        let mut s = PdeState::constant(&g, 0.0, 1.0);
        for i in 0..g.n {
            s.v[i] += 0.1 * (g.x(i) * std::f64::consts::PI / 10.0).sin();
        }
        for _ in 0..20 {
            s = step(&m, &p, &g, &s, 1e-3).unwrap();
        }
        assert!(s.u.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn periodic_mass_conserved() {
        let (m, p) = setup();
        let g = Grid1D::new(-10.0, 10.0, 256, Boundary::Periodic).unwrap();
        let mut s = PdeState::constant(&g, 1.0, 1.0);
        for i in 0..g.n {
            let x = g.x(i) * std::f64::consts::PI / 10.0;
            s.u[i] += 0.5 * x.cos();
            s.v[i] += 0.3 * (2.0 * x).sin();
        }
        let m0 = s.mass(&g);
        for _ in 0..1000 {
            s = step(&m, &p, &g, &s, 1e-4).unwrap();
        }
        assert!((s.mass(&g) - m0).abs() / m0 < 1e-12);
        assert!(s.u.iter().all(|&u| u >= -1e-12));
    }

    #[test]
    fn peak_of_parabola_is_subgrid_exact() {
        let g = Grid1D::new(-10.0, 10.0, 201, Boundary::Neumann).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|x| 1.0 - 0.3 * (1.0 - 0.5 * (x - 0.0371).powi(2)).max(0.0)).collect();
        let x = peak_position(&g, &u, 1.0, 10).unwrap();
        assert!((x - 0.0371).abs() < 1e-10, "{x}");
        assert!(matches!(peak_position(&g, &[1.0; 201], 1.0, 10), Err(Error::PeakLost { .. })));
    }

    fn manufactured_error(n: usize) -> f64 {
        let (m, p) = setup();
        let p = p.with_epsilon(0.2);
        let eps = p.epsilon;
        let two_pi = 2.0 * std::f64::consts::PI;
        let g = Grid1D::new(0.0, two_pi, n, Boundary::Periodic).unwrap();
        let u = |x: f64, t: f64| 1.0 + 0.5 * (x - t).sin();
        let v = |x: f64, t: f64| 1.0 + 0.3 * (x + t).cos();
        let forcing = |x: f64, t: f64| {
            let (ux, uxx, ut) = (0.5 * (x - t).cos(), -0.5 * (x - t).sin(), -0.5 * (x - t).cos());
            let (vx, vxx, vt) = (-0.3 * (x + t).sin(), -0.3 * (x + t).cos(), -0.3 * (x + t).sin());
            let adv = m.chi * (ux * m.phi(vx) + u(x, t) * m.phi_prime(vx) * vxx);
            (ut - eps * uxx + adv, eps * vt - vxx - u(x, t) + m.g(v(x, t)))
        };
        let mut s = PdeState { u: g.nodes().iter().map(|&x| u(x, 0.0)).collect(), v: g.nodes().iter().map(|&x| v(x, 0.0)).collect(), t: 0.0 };
        let dt = 0.2 * g.dx * g.dx;
        let steps = (0.5 / dt).round() as usize;
        for _ in 0..steps {
            s = step_forced(&m, &p, &g, &s, dt, Some(&forcing)).unwrap();
        }
        (0..n).map(|i| (s.u[i] - u(g.x(i), s.t)).abs().max((s.v[i] - v(g.x(i), s.t)).abs())).fold(0.0, f64::max)
    }

    #[test]
    fn manufactured_solution_second_order() {
        let e1 = manufactured_error(64);
        let e2 = manufactured_error(128);
        assert!(e1 / e2 >= 3.5, "{e1:e} {e2:e} ratio {}", e1 / e2);
    }
}
