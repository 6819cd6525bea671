//! Adaptive Dormand–Prince 5(4) stepper with cubic Hermite dense output.
//!
//! The stepper is driven one accepted step at a time so that callers can run
//! event checks (escape surfaces, collisions, energy monitoring) between steps
//! and interpolate inside the step that triggered them.

use crate::error::{Error, Result};

pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], dy: &mut [f64; N]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for StepperOptions {
    fn default() -> Self {
        StepperOptions { rtol: 1e-10, atol: 1e-12, initial_step: 1e-3, max_step: f64::INFINITY, min_step: 1e-14 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus embedded fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One accepted step, kept for interpolation.
#[derive(Debug, Clone, Copy)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    pub f0: [f64; N],
    pub f1: [f64; N],
}

impl<const N: usize> Segment<N> {
    /// Cubic Hermite interpolant through both end states and slopes.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        if h == 0.0 {
            return self.y1;
        }
        let s = (t - self.t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i];
        }
        y
    }

    /// Locate `g(y(t)) = 0` inside the segment by bisection on the interpolant,
    /// assuming `g` changes sign between the ends.
    pub fn find_root<G: Fn(&[f64; N]) -> f64>(&self, g: G) -> f64 {
        let mut lo = self.t0;
        let mut hi = self.t1;
        let g_lo = g(&self.y0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if (g(&self.eval(mid)) > 0.0) == (g_lo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

pub struct Stepper<'a, S: OdeSystem<N>, const N: usize> {
    system: &'a S,
    opts: StepperOptions,
    t: f64,
    y: [f64; N],
    f: [f64; N],
    h: f64,
    accepted: usize,
    rejected: usize,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let ch = c * h;
        for i in 0..N {
            out[i] += ch * k[i];
        }
    }
    out
}

impl<'a, S: OdeSystem<N>, const N: usize> Stepper<'a, S, N> {
    pub fn new(system: &'a S, t0: f64, y0: [f64; N], opts: StepperOptions) -> Self {
        let mut f = [0.0; N];
        system.rhs(t0, &y0, &mut f);
        Stepper { system, opts, t: t0, y: y0, f, h: opts.initial_step, accepted: 0, rejected: 0 }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64; N] {
        &self.y
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// Take one accepted step, never passing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<Segment<N>> {
        let sys = self.system;
        loop {
            let remaining = t_limit - self.t;
            if remaining <= 0.0 {
                return Err(Error::Domain("stepper asked to advance past its limit".into()));
            }
            let mut h = self.h.min(self.opts.max_step);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let t = self.t;
            let y = &self.y;
            let k1 = self.f;
            let mut k2 = [0.0; N];
            let mut k3 = [0.0; N];
            let mut k4 = [0.0; N];
            let mut k5 = [0.0; N];
            let mut k6 = [0.0; N];
            let mut k7 = [0.0; N];
            sys.rhs(t + C2 * h, &axpy(y, h, &[(A21, &k1)]), &mut k2);
            sys.rhs(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]), &mut k3);
            sys.rhs(t + C4 * h, &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]), &mut k4);
            sys.rhs(t + C5 * h, &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]), &mut k5);
            sys.rhs(
                t + h,
                &axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
                &mut k6,
            );
            let y_new = axpy(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let t_new = if last { t_limit } else { t + h };
            sys.rhs(t_new, &y_new, &mut k7);

            let mut err_sq = 0.0;
            let mut finite = true;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
                err_sq += (e / sc) * (e / sc);
                finite &= y_new[i].is_finite();
            }
            let err = if finite { (err_sq / N as f64).sqrt() } else { f64::INFINITY };

            if err <= 1.0 {
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let seg = Segment { t0: t, t1: t_new, y0: *y, y1: y_new, f0: k1, f1: k7 };
                self.t = t_new;
                self.y = y_new;
                self.f = k7;
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
                self.accepted += 1;
                return Ok(seg);
            }
            self.rejected += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            self.h = h * factor;
            if self.h < self.opts.min_step {
                return Err(Error::Domain(format!("step size underflow at t = {t}")));
            }
        }
    }

    /// Integrate to exactly `t_end`.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            self.step(t_end)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;
    impl OdeSystem<2> for Oscillator {
        fn rhs(&self, _t: f64, y: &[f64; 2], dy: &mut [f64; 2]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    struct Decay;
    impl OdeSystem<1> for Decay {
        fn rhs(&self, t: f64, y: &[f64; 1], dy: &mut [f64; 1]) {
            dy[0] = -2.0 * t * y[0];
        }
    }

    #[test]
    fn oscillator_period() {
        let mut s = Stepper::new(&Oscillator, 0.0, [1.0, 0.0], StepperOptions::default());
        let period = 2.0 * std::f64::consts::PI;
        s.advance_to(10.0 * period).unwrap();
        assert_eq!(s.time(), 10.0 * period);
        assert!((s.state()[0] - 1.0).abs() < 1e-8);
        assert!(s.state()[1].abs() < 1e-8);
    }

    #[test]
    fn non_autonomous_gaussian() {
        let mut s = Stepper::new(&Decay, 0.0, [1.0], StepperOptions::default());
        s.advance_to(2.0).unwrap();
        assert!((s.state()[0] - (-4.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_and_root() {
        let opts = StepperOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let mut s = Stepper::new(&Oscillator, 0.0, [1.0, 0.0], opts);
        let target = 1.0;
        loop {
            let seg = s.step(10.0).unwrap();
            if seg.t0 <= target && target <= seg.t1 {
                let y = seg.eval(target);
                // cubic Hermite on a high-order step: third order interpolation error
                assert!((y[0] - target.cos()).abs() < 1e-6);
            }
            if seg.y0[0] > 0.0 && seg.y1[0] <= 0.0 {
                let root = seg.find_root(|y| y[0]);
                assert!((root - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
                break;
            }
        }
    }
}
