use crate::error::{Error, Result};

/// Adaptive Simpson quadrature.
///
/// Recursion stops on an interval when the Richardson difference between the
/// one-panel and two-panel estimates falls below `15 * tol`, where the global
/// tolerance is `max(rel_tol * |I|, abs_floor)` and is halved on each split.
#[derive(Debug, Clone, Copy)]
pub struct Simpson {
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub max_depth: usize,
    pub min_depth: usize,
}

impl Default for Simpson {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_floor: 1e-14,
            max_depth: 48,
            min_depth: 4,
        }
    }
}

impl Simpson {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let (fa, fb) = (f(a), f(b));
        let m = 0.5 * (a + b);
        let fm = f(m);
        let whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0;

        // A coarse 16-panel composite estimate sets the scale for the relative tolerance.
        let n = 16;
        let h = (b - a) / n as f64;
        let mut coarse = fa + fb;
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            coarse += w * f(a + i as f64 * h);
        }
        coarse *= h / 3.0;
        let tol = (self.rel_tol * coarse.abs()).max(self.abs_floor);

        self.recurse(&f, a, b, fa, fm, fb, whole, tol, 0)
            .ok_or(Error::QuadratureNonConvergence { a, b })
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Option<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) * (fa + 4.0 * flm + fm) / 6.0;
        let right = (b - m) * (fm + 4.0 * frm + fb) / 6.0;
        let delta = left + right - whole;
        if !delta.is_finite() {
            return None;
        }
        if depth >= self.min_depth && delta.abs() <= 15.0 * tol {
            return Some(left + right + delta / 15.0);
        }
        if depth >= self.max_depth {
            return None;
        }
        let l = self.recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
        let r = self.recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
        Some(l + r)
    }
}

pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    Simpson::default().integrate(f, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_transcendental() {
        let v = simpson(|x: f64| x.sin(), 0.0, std::f64::consts::PI).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
        let v = simpson(|x: f64| (-x * x).exp(), -6.0, 6.0).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = simpson(|x| 1.0 / x, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }
}
