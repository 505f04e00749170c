//! Trapping region Ω for the reduced flow and sampled inward-flux certification.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{h, h_prime, ModelSpec, WaveParams};
use crate::numerics::geometry::{self, Point};
use crate::phase_plane::{reduced_vector_field, ReducedState};
use crate::speed_window::TrapConstants;

pub const CLOSURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveId {
    Gamma1,
    Gamma2,
    Gamma3,
    Gamma4,
    Connector,
    Gamma5,
    Gamma6,
}

impl CurveId {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveId::Gamma1 => "gamma1",
            CurveId::Gamma2 => "gamma2",
            CurveId::Gamma3 => "gamma3",
            CurveId::Gamma4 => "gamma4",
            CurveId::Connector => "connector",
            CurveId::Gamma5 => "gamma5",
            CurveId::Gamma6 => "gamma6",
        }
    }
}

/// A straight boundary piece `start + t (end − start)`, t ∈ [0, 1], traversed
/// counter-clockwise around Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub id: CurveId,
    pub start: Point,
    pub end: Point,
    /// Outward normal in (V, W) components, as written for each piece.
    pub normal: Point,
    pub include_start: bool,
    pub include_end: bool,
    /// Corner at which nᵢ·F vanishes; flux is certified divided by the distance to it.
    pub degenerate_corner: Option<Point>,
}

impl Curve {
    pub fn point(&self, t: f64) -> Point {
        [
            self.start[0] + t * (self.end[0] - self.start[0]),
            self.start[1] + t * (self.end[1] - self.start[1]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapRegion {
    pub constants: TrapConstants,
    pub v_minus: f64,
    pub v_plus: f64,
    pub beta: f64,
    pub curves: Vec<Curve>,
}

/// Builds Γ₁…Γ₆ plus the horizontal connector W = w*, β ≤ V ≤ v*.
pub fn build_trap(model: &ModelSpec, p: &WaveParams, c: &TrapConstants) -> Result<TrapRegion> {
    let (vl, vh, wl, wh) = (c.v_star_low, c.v_star_high, c.w_low, c.w_high);
    let (vm, vp, beta) = (p.v_minus, p.v_plus, model.beta);
    if !(0.0 < vl && vl < vp && vp < beta && beta < vh && vh < vm && wl < 0.0 && wh > 0.0) {
        return Err(Error::GeometryMismatch(format!(
            "constants out of order: v*={vl}, v+={vp}, beta={beta}, v^*={vh}, v-={vm}, w*={wl}, w^*={wh}"
        )));
    }
    let slope1 = wl / vl;
    let k = wh / (vm - vh);
    let g1 = |v: f64| slope1 * v;
    let g4 = |v: f64| -k * (v - vm);
    let e_minus = [vm, 0.0];
    let curves = vec![
        Curve {
            id: CurveId::Gamma1,
            start: [0.0, g1(0.0)],
            end: [vl, g1(vl)],
            normal: [slope1, -1.0],
            include_start: true,
            include_end: true,
            degenerate_corner: None,
        },
        Curve {
            id: CurveId::Gamma2,
            start: [vl, wl],
            end: [vm, wl],
            normal: [0.0, -1.0],
            include_start: true,
            include_end: true,
            degenerate_corner: None,
        },
        Curve {
            id: CurveId::Gamma3,
            start: [vm, wl],
            end: e_minus,
            normal: [1.0, 0.0],
            include_start: true,
            include_end: false,
            degenerate_corner: Some(e_minus),
        },
        Curve {
            id: CurveId::Gamma4,
            start: [vm, g4(vm)],
            end: [vh, g4(vh)],
            normal: [k, 1.0],
            include_start: false,
            include_end: true,
            degenerate_corner: Some(e_minus),
        },
        Curve {
            id: CurveId::Connector,
            start: [vh, wh],
            end: [beta, wh],
            normal: [0.0, 1.0],
            include_start: true,
            include_end: true,
            degenerate_corner: None,
        },
        Curve {
            id: CurveId::Gamma5,
            start: [beta, wh],
            end: [0.0, wh],
            normal: [0.0, 1.0],
            include_start: true,
            include_end: true,
            degenerate_corner: None,
        },
        Curve {
            id: CurveId::Gamma6,
            start: [0.0, wh],
            end: [0.0, 0.0],
            normal: [-1.0, 0.0],
            include_start: false,
            include_end: false,
            degenerate_corner: Some([0.0, 0.0]),
        },
    ];
    for i in 0..curves.len() {
        let a = curves[i].end;
        let b = curves[(i + 1) % curves.len()].start;
        let gap = (a[0] - b[0]).hypot(a[1] - b[1]);
        if gap > CLOSURE_TOL {
            return Err(Error::GeometryMismatch(format!(
                "{} does not meet {} (gap {gap:e})",
                curves[i].id.as_str(),
                curves[(i + 1) % curves.len()].id.as_str()
            )));
        }
        let cv = &curves[i];
        let d = [cv.end[0] - cv.start[0], cv.end[1] - cv.start[1]];
        let outward = [d[1], -d[0]];
        let cross = outward[0] * cv.normal[1] - outward[1] * cv.normal[0];
        let dot = outward[0] * cv.normal[0] + outward[1] * cv.normal[1];
        let scale = (outward[0].hypot(outward[1])) * (cv.normal[0].hypot(cv.normal[1]));
        if !(dot > 0.0 && cross.abs() <= 1e-12 * scale) {
            return Err(Error::GeometryMismatch(format!("{} normal is not outward", cv.id.as_str())));
        }
    }
    let trap = TrapRegion { constants: *c, v_minus: vm, v_plus: vp, beta, curves };
    if geometry::signed_area2(&trap.polygon()) <= 0.0 {
        return Err(Error::GeometryMismatch("boundary is not counter-clockwise".into()));
    }
    Ok(trap)
}

impl TrapRegion {
    pub fn polygon(&self) -> Vec<Point> {
        self.curves.iter().map(|c| c.start).collect()
    }

    /// Closed-region membership with a small boundary tolerance.
    pub fn contains(&self, p: Point) -> bool {
        geometry::contains(&self.polygon(), p, CLOSURE_TOL)
    }

    /// Strict interior: inside and off the boundary.
    pub fn strictly_contains(&self, p: Point) -> bool {
        let poly = self.polygon();
        let n = poly.len();
        let on_edge = (0..n).any(|i| geometry::point_segment_distance(p, poly[i], poly[(i + 1) % n]) == 0.0);
        !on_edge && geometry::contains(&poly, p, 0.0)
    }

    pub fn curve(&self, id: CurveId) -> &Curve {
        self.curves.iter().find(|c| c.id == id).expect("all curve ids are present")
    }
}

/// nᵢ·F at a point of a curve.
pub fn normal_flux(model: &ModelSpec, p: &WaveParams, curve: &Curve, pt: Point) -> Result<f64> {
    let (dv, dw) = reduced_vector_field(model, p, ReducedState { v: pt[0], w: pt[1] })?;
    Ok(curve.normal[0] * dv + curve.normal[1] * dw)
}

/// Limit of nᵢ·F / distance at the degenerate corner of a curve.
fn corner_limit(model: &ModelSpec, p: &WaveParams, curve: &Curve) -> Result<f64> {
    match curve.id {
        CurveId::Gamma3 | CurveId::Gamma6 => Ok(-1.0),
        CurveId::Gamma4 => {
            let k = curve.normal[0];
            let hp = h_prime(model, p, 0.0)?;
            let gp = model.g_prime(p.v_minus);
            Ok((k * k - hp * k - gp) / (1.0 + k * k).sqrt())
        }
        _ => Err(Error::GeometryMismatch(format!("{} has no degenerate corner", curve.id.as_str()))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFlux {
    pub curve: CurveId,
    pub samples: usize,
    pub max_flux: f64,
    pub argmax: Point,
    /// Sampled maximum plus the Lipschitz pad over sample gaps; scaled by the
    /// distance to the degenerate corner when there is one.
    pub inflated_bound: f64,
    pub lipschitz: f64,
    pub scaled: bool,
    pub pass: bool,
    #[serde(skip)]
    pub trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub curves: Vec<CurveFlux>,
    pub pass: bool,
    pub tolerance: f64,
}

impl FluxReport {
    pub fn curve(&self, id: CurveId) -> Option<&CurveFlux> {
        self.curves.iter().find(|c| c.curve == id)
    }

    /// Writes `(curve, t, flux)` rows for every sample.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["curve", "t", "flux"])?;
        for c in &self.curves {
            for (t, f) in &c.trace {
                w.write_record([c.curve.as_str().to_string(), format!("{t:.16e}"), format!("{f:.16e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_table(&self, out: &mut impl Write) -> std::io::Result<()> {
        for c in &self.curves {
            writeln!(
                out,
                "{:<10} n={:<7} max={:+.6e} at ({:.6}, {:.6}) bound={:+.6e} {}",
                c.curve.as_str(),
                c.samples,
                c.max_flux,
                c.argmax[0],
                c.argmax[1],
                c.inflated_bound,
                if c.pass { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Chebyshev–Lobatto parameters on [0, 1]. Going from `n` to `2n − 1` nodes keeps
/// every previous node, so sampled maxima are monotone under that refinement.
pub fn lobatto_nodes(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|j| 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos()))
        .collect()
}

fn certify_curve(model: &ModelSpec, p: &WaveParams, curve: &Curve, n: usize) -> Result<CurveFlux> {
    let nodes = lobatto_nodes(n);
    let mut raw = Vec::with_capacity(n);
    let mut cert = Vec::with_capacity(n);
    let len = (curve.end[0] - curve.start[0]).hypot(curve.end[1] - curve.start[1]);
    for (j, &t) in nodes.iter().enumerate() {
        let endpoint_excluded = (j == 0 && !curve.include_start) || (j == n - 1 && !curve.include_end);
        let pt = curve.point(t);
        let at_corner = curve.degenerate_corner.is_some_and(|c| c == pt);
        if endpoint_excluded && !at_corner {
            continue;
        }
        if at_corner {
            cert.push((t, corner_limit(model, p, curve)?));
            continue;
        }
        let f = normal_flux(model, p, curve, pt)?;
        raw.push((t, f, pt));
        let scaled = match curve.degenerate_corner {
            Some(c) => f / (pt[0] - c[0]).hypot(pt[1] - c[1]),
            None => f,
        };
        cert.push((t, scaled));
    }
    let (max_flux, argmax) = raw
        .iter()
        .fold((f64::NEG_INFINITY, [f64::NAN; 2]), |acc, &(_, f, pt)| if f > acc.0 { (f, pt) } else { acc });
    // Lipschitz estimate in arclength, doubled for safety.
    let mut lip: f64 = 0.0;
    for w in cert.windows(2) {
        let ds = (w[1].0 - w[0].0) * len;
        if ds > 0.0 {
            lip = lip.max((w[1].1 - w[0].1).abs() / ds);
        }
    }
    lip *= 2.0;
    let mut bound = cert.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    for w in cert.windows(2) {
        let ds = (w[1].0 - w[0].0) * len;
        bound = bound.max(0.5 * (w[0].1 + w[1].1) + 0.5 * lip * ds);
    }
    Ok(CurveFlux {
        curve: curve.id,
        samples: raw.len(),
        max_flux,
        argmax,
        inflated_bound: bound,
        lipschitz: lip,
        scaled: curve.degenerate_corner.is_some(),
        pass: max_flux <= 0.0 && bound <= 0.0,
        trace: raw.iter().map(|&(t, f, _)| (t, f)).collect(),
    })
}

/// Samples nᵢ·F on every curve at `samples_per_curve` Chebyshev–Lobatto nodes.
pub fn certify_flux(model: &ModelSpec, p: &WaveParams, trap: &TrapRegion, samples_per_curve: usize) -> Result<FluxReport> {
    let curves: Vec<CurveFlux> = trap
        .curves
        .par_iter()
        .map(|c| certify_curve(model, p, c, samples_per_curve))
        .collect::<Result<_>>()?;
    let pass = curves.iter().all(|c| c.pass);
    Ok(FluxReport { curves, pass, tolerance: 0.0 })
}

/// True iff the stable direction of E₋ is steeper than Γ₄, i.e. λ₂(E₋) < −w*/(v₋ − v*).
pub fn corner_exclusion_check(model: &ModelSpec, p: &WaveParams, trap: &TrapRegion) -> Result<bool> {
    let c = &trap.constants;
    let hp = h_prime(model, p, 0.0)?;
    let lambda2 = -0.5 * (hp + (hp * hp + 4.0 * model.g_prime(p.v_minus)).sqrt());
    Ok(lambda2 < -c.w_high / (p.v_minus - c.v_star_high))
}

/// Largest |χφ(W) − s| margin check along the W-extent of the trap: h must stay finite.
pub fn manifold_regular_on(model: &ModelSpec, p: &WaveParams, trap: &TrapRegion) -> Result<()> {
    let c = &trap.constants;
    for i in 0..=256 {
        let w = c.w_low + (c.w_high - c.w_low) * i as f64 / 256.0;
        h(model, p, w)?;
    }
    Ok(())
}
