//! Adaptive one-step integrators over fixed-size state arrays.
//!
//! Two steppers share one driver: the Dormand–Prince 5(4) pair, and an
//! exponential fourth-order Runge–Kutta scheme (Cox–Matthews ETDRK4) with a
//! per-step diagonal linear part, whose error is estimated by step doubling.

use crate::error::{Error, Result};

pub type State<const N: usize> = [f64; N];

/// Step-size control parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-4,
            h_max: 0.05,
            h_min: 1e-14,
        }
    }
}

/// Observer verdict after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// One attempted step: proposed state and a scaled error norm (accept if <= 1).
pub trait Stepper<const N: usize> {
    /// Order used in the step-size update exponent `1/(order+1)`.
    fn order(&self) -> u32;

    fn attempt<F>(&mut self, f: &mut F, t: f64, y: &State<N>, h: f64) -> Result<(State<N>, State<N>)>
    where
        F: FnMut(f64, &State<N>) -> Result<State<N>>;
}

fn axpy<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for (c, k) in terms {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

fn error_norm<const N: usize>(err: &State<N>, y0: &State<N>, y1: &State<N>, ctl: &StepControl) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = ctl.atol + ctl.rtol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / N as f64).sqrt()
}

/// Dormand–Prince 5(4).
#[derive(Debug, Default, Clone, Copy)]
pub struct Dopri5;

impl Dopri5 {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const B: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
}

impl<const N: usize> Stepper<N> for Dopri5 {
    fn order(&self) -> u32 {
        4
    }

    fn attempt<F>(&mut self, f: &mut F, t: f64, y: &State<N>, h: f64) -> Result<(State<N>, State<N>)>
    where
        F: FnMut(f64, &State<N>) -> Result<State<N>>,
    {
        let c = Self::C;
        let k1 = f(t, y)?;
        let k2 = f(t + c[1] * h, &axpy(y, h, &[(0.2, &k1)]))?;
        let k3 = f(t + c[2] * h, &axpy(y, h, &[(3.0 / 40.0, &k1), (9.0 / 40.0, &k2)]))?;
        let k4 = f(
            t + c[3] * h,
            &axpy(y, h, &[(44.0 / 45.0, &k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)]),
        )?;
        let k5 = f(
            t + c[4] * h,
            &axpy(
                y,
                h,
                &[
                    (19372.0 / 6561.0, &k1),
                    (-25360.0 / 2187.0, &k2),
                    (64448.0 / 6561.0, &k3),
                    (-212.0 / 729.0, &k4),
                ],
            ),
        )?;
        let k6 = f(
            t + h,
            &axpy(
                y,
                h,
                &[
                    (9017.0 / 3168.0, &k1),
                    (-355.0 / 33.0, &k2),
                    (46732.0 / 5247.0, &k3),
                    (49.0 / 176.0, &k4),
                    (-5103.0 / 18656.0, &k5),
                ],
            ),
        )?;
        let b = Self::B;
        let y1 = axpy(y, h, &[(b[0], &k1), (b[2], &k3), (b[3], &k4), (b[4], &k5), (b[5], &k6)]);
        let k7 = f(t + h, &y1)?;
        let e = Self::E;
        let err = axpy(
            &[0.0; N],
            h,
            &[(e[0], &k1), (e[2], &k3), (e[3], &k4), (e[4], &k5), (e[5], &k6), (e[6], &k7)],
        );
        Ok((y1, err))
    }
}

/// Values `e^z, φ1(z/2) e^{z/2}` and the ETDRK4 weights for scalar `z`.
#[derive(Debug, Clone, Copy)]
struct EtdCoefficients {
    ez: f64,
    ez2: f64,
    phi1_half: f64,
    f1: f64,
    f2: f64,
    f3: f64,
}

/// `(φ1, φ2, φ3)` with a Taylor series near zero.
pub fn phi_functions(z: f64) -> (f64, f64, f64) {
    if z.abs() < 1.0 {
        // φk(z) = Σ z^j / (j+k)!
        let mut p = [0.0; 3];
        for (k, slot) in p.iter_mut().enumerate() {
            let mut term = 1.0;
            for m in 1..=(k + 1) {
                term /= m as f64;
            }
            let mut sum = term;
            for j in 1..30 {
                term *= z / (j + k + 1) as f64;
                sum += term;
            }
            *slot = sum;
        }
        (p[0], p[1], p[2])
    } else {
        let p1 = z.exp_m1() / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        (p1, p2, p3)
    }
}

impl EtdCoefficients {
    fn new(z: f64) -> Self {
        let (p1, p2, p3) = phi_functions(z);
        let (half, _, _) = phi_functions(0.5 * z);
        Self {
            ez: z.exp(),
            ez2: (0.5 * z).exp(),
            phi1_half: half,
            f1: p1 - 3.0 * p2 + 4.0 * p3,
            f2: p2 - 2.0 * p3,
            f3: -p2 + 4.0 * p3,
        }
    }
}

/// ETDRK4 with a diagonal linear part frozen at the start of each step.
/// `linear(y)` returns the diagonal `L`; the remainder `f(t,y) - L y` is treated
/// explicitly. Components with `L = 0` reduce to classical RK4.
pub struct Etdrk4<G> {
    pub linear: G,
}

impl<G> Etdrk4<G> {
    pub fn new(linear: G) -> Self {
        Self { linear }
    }
}

impl<G> Etdrk4<G> {
    pub fn single<F, const N: usize>(&mut self, f: &mut F, t: f64, y: &State<N>, h: f64) -> Result<State<N>>
    where
        G: FnMut(&State<N>) -> State<N>,
        F: FnMut(f64, &State<N>) -> Result<State<N>>,
    {
        let l = (self.linear)(y);
        let co: Vec<EtdCoefficients> = l.iter().map(|li| EtdCoefficients::new(li * h)).collect();
        let nl = |f: &mut F, t: f64, x: &State<N>| -> Result<State<N>> {
            let mut r = f(t, x)?;
            for i in 0..N {
                r[i] -= l[i] * x[i];
            }
            Ok(r)
        };
        let n0 = nl(f, t, y)?;
        let mut a = [0.0; N];
        for i in 0..N {
            a[i] = co[i].ez2 * y[i] + 0.5 * h * co[i].phi1_half * n0[i];
        }
        let na = nl(f, t + 0.5 * h, &a)?;
        let mut b = [0.0; N];
        for i in 0..N {
            b[i] = co[i].ez2 * y[i] + 0.5 * h * co[i].phi1_half * na[i];
        }
        let nb = nl(f, t + 0.5 * h, &b)?;
        let mut c = [0.0; N];
        for i in 0..N {
            c[i] = co[i].ez2 * a[i] + 0.5 * h * co[i].phi1_half * (2.0 * nb[i] - n0[i]);
        }
        let nc = nl(f, t + h, &c)?;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = co[i].ez * y[i] + h * (co[i].f1 * n0[i] + 2.0 * co[i].f2 * (na[i] + nb[i]) + co[i].f3 * nc[i]);
        }
        Ok(out)
    }
}

impl<G, const N: usize> Stepper<N> for Etdrk4<G>
where
    G: FnMut(&State<N>) -> State<N>,
{
    fn order(&self) -> u32 {
        4
    }

    fn attempt<F>(&mut self, f: &mut F, t: f64, y: &State<N>, h: f64) -> Result<(State<N>, State<N>)>
    where
        F: FnMut(f64, &State<N>) -> Result<State<N>>,
    {
        let full = self.single(f, t, y, h)?;
        let mid = self.single(f, t, y, 0.5 * h)?;
        let two = self.single(f, t + 0.5 * h, &mid, 0.5 * h)?;
        let mut err = [0.0; N];
        for i in 0..N {
            err[i] = (two[i] - full[i]) / 15.0;
        }
        Ok((two, err))
    }
}

/// Why an adaptive integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    Observer,
    Length,
}

/// Adaptive integration from `t0` until the observer stops it or `t_end` is reached.
///
/// A right-hand-side error during a trial step is treated as a rejected step
/// (the step is halved); it propagates only once `h` falls below `h_min`.
pub fn integrate<const N: usize, S, F, O>(
    stepper: &mut S,
    mut f: F,
    t0: f64,
    y0: State<N>,
    t_end: f64,
    ctl: &StepControl,
    mut observe: O,
) -> Result<(f64, State<N>, Stop)>
where
    S: Stepper<N>,
    F: FnMut(f64, &State<N>) -> Result<State<N>>,
    O: FnMut(f64, &State<N>) -> Result<Flow>,
{
    let mut t = t0;
    let mut y = y0;
    let mut h = ctl.h_init.min(ctl.h_max);
    let expo = 1.0 / (stepper.order() as f64 + 1.0);
    while t < t_end {
        h = h.min(t_end - t);
        match stepper.attempt(&mut f, t, &y, h) {
            Ok((y1, err)) => {
                let en = error_norm(&err, &y, &y1, ctl);
                if en.is_finite() && en <= 1.0 {
                    t += h;
                    y = y1;
                    if observe(t, &y)? == Flow::Stop {
                        return Ok((t, y, Stop::Observer));
                    }
                    let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-expo)).clamp(0.2, 5.0) };
                    h = (h * fac).min(ctl.h_max);
                } else {
                    let fac = if en.is_finite() { (0.9 * en.powf(-expo)).clamp(0.1, 0.9) } else { 0.25 };
                    h *= fac;
                }
            }
            Err(e) => {
                if h * 0.5 < ctl.h_min {
                    return Err(e);
                }
                h *= 0.5;
            }
        }
        if h < ctl.h_min {
            return Err(Error::StepUnderflow { xi: t });
        }
    }
    Ok((t, y, Stop::Length))
}

/// Fixed-step Dormand–Prince propagation (fifth-order solution), used for order checks.
pub fn fixed_dopri5<const N: usize, F>(mut f: F, t0: f64, y0: State<N>, t_end: f64, steps: usize) -> Result<State<N>>
where
    F: FnMut(f64, &State<N>) -> Result<State<N>>,
{
    let h = (t_end - t0) / steps as f64;
    let mut y = y0;
    let mut st = Dopri5;
    for i in 0..steps {
        let (y1, _) = Stepper::<N>::attempt(&mut st, &mut f, t0 + i as f64 * h, &y, h)?;
        y = y1;
    }
    Ok(y)
}
