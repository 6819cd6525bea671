use serde::{Deserialize, Serialize};

use crate::dynamics::{FullSystem, IntegratorControls};
use crate::error::{Error, Result};
use crate::integrator::{Stepper, StepperOptions};
use crate::model::{self, PhaseState, SystemParams};

use super::frame::{from_unstable_pair, NormalCoords, NormalModeFrame};

/// Initial condition on the launch surface `x = x0 < 0` at excess energy `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxSample {
    pub epsilon: f64,
    pub x0: f64,
    pub p_x0: f64,
    /// `mu |x0| + epsilon / (mu |x0|)`.
    pub p_x0_approx: f64,
    pub y_prime: f64,
    pub p_y_prime: f64,
    pub u: [f64; 3],
    pub p_u: [f64; 3],
    #[serde(skip)]
    pub state: PhaseState,
    pub weight: f64,
}

fn check_inputs(epsilon: f64, x0: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("excess energy must be > 0, got {epsilon}")));
    }
    if !(x0 < 0.0 && x0.is_finite()) {
        return Err(Error::Domain(format!("launch surface must sit at x0 < 0, got {x0}")));
    }
    Ok(())
}

/// Flux sample built in the harmonic approximation: `p_x0` solves the
/// quadratic energy exactly and the point is mapped through the linear frame.
/// Its full-Hamiltonian energy differs from `V_s + epsilon` at cubic order.
pub fn make_flux_sample(
    frame: &NormalModeFrame,
    epsilon: f64,
    x0: f64,
    y_prime: f64,
    p_y_prime: f64,
    u: [f64; 3],
    p_u: [f64; 3],
) -> Result<FluxSample> {
    check_inputs(epsilon, x0)?;
    let (mu, nu) = (frame.mu, frame.nu);
    let (y, p_y) = from_unstable_pair(y_prime, p_y_prime, nu);
    let mut radicand = 2.0 * epsilon + mu * mu * x0 * x0 - (p_y * p_y - nu * nu * y * y);
    for i in 0..3 {
        radicand -= p_u[i] * p_u[i] + frame.omega[i] * frame.omega[i] * u[i] * u[i];
    }
    if !(radicand >= 0.0) {
        return Err(Error::InfeasibleSample(radicand));
    }
    let p_x0 = radicand.sqrt();
    let coords = NormalCoords { x: x0, p_x: p_x0, y, p_y, u, p_u };
    Ok(FluxSample {
        epsilon,
        x0,
        p_x0,
        p_x0_approx: mu * x0.abs() + epsilon / (mu * x0.abs()),
        y_prime,
        p_y_prime,
        u,
        p_u,
        state: frame.to_full(&coords),
        weight: 1.0,
    })
}

/// Launch surface anchored on the stable manifold of the saddle. The anchor is
/// the point of the in-subspace stable manifold whose reaction projection is
/// `x0`; launches displace it along `y` and the stable modes and then fix the
/// reaction momentum so the full Hamiltonian equals `V_s + epsilon` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LaunchSurface {
    pub frame: NormalModeFrame,
    pub params: SystemParams,
    pub x0: f64,
    pub anchor: PhaseState,
}

impl LaunchSurface {
    pub fn new(params: &SystemParams, x0: f64) -> Result<Self> {
        let frame = NormalModeFrame::new(params)?;
        Self::with_frame(params, frame, x0)
    }

    pub fn with_frame(params: &SystemParams, frame: NormalModeFrame, x0: f64) -> Result<Self> {
        if !(x0 < 0.0 && x0.is_finite()) {
            return Err(Error::Domain(format!("launch surface must sit at x0 < 0, got {x0}")));
        }
        let anchor = stable_manifold_point(params, &frame, x0)?;
        Ok(LaunchSurface { frame, params: *params, x0, anchor })
    }

    pub fn sample(
        &self,
        epsilon: f64,
        y_prime: f64,
        p_y_prime: f64,
        u: [f64; 3],
        p_u: [f64; 3],
    ) -> Result<FluxSample> {
        check_inputs(epsilon, self.x0)?;
        let f = &self.frame;
        let (y, p_y) = from_unstable_pair(y_prime, p_y_prime, f.nu);
        let q = self.anchor.q + f.displacement(0.0, y, &u);
        let mut p = self.anchor.p + f.displacement(0.0, p_y, &p_u);
        let ex = f.reaction();
        let p_perp = p - ex * p.dot(ex);
        let v = model::potential_full(&q, &self.params)?;
        let radicand = 2.0 * (f.v_s + epsilon - v) - p_perp.norm_squared();
        if !(radicand >= 0.0) {
            return Err(Error::InfeasibleSample(radicand));
        }
        p = p_perp + ex * radicand.sqrt();
        let x0 = self.x0;
        Ok(FluxSample {
            epsilon,
            x0,
            p_x0: p.dot(ex),
            p_x0_approx: f.mu * x0.abs() + epsilon / (f.mu * x0.abs()),
            y_prime,
            p_y_prime,
            u,
            p_u,
            state: PhaseState::new(q, p),
            weight: 1.0,
        })
    }
}

/// Follow the unstable branch leaving the saddle toward `x < 0` until its
/// reaction projection reaches `x0`, then reverse the momenta.
fn stable_manifold_point(params: &SystemParams, frame: &NormalModeFrame, x0: f64) -> Result<PhaseState> {
    let scale = params.length_scale();
    let delta = 1e-8 * scale;
    let ex = *frame.reaction();
    let start = PhaseState::new(frame.origin - ex * delta, -ex * (frame.mu * delta));
    let system = FullSystem { params };
    let opts = StepperOptions { rtol: 1e-13, atol: 1e-15 * scale, ..StepperOptions::default() };
    let mut stepper = Stepper::new(&system, 0.0, start.to_array(), opts);
    let x_of = |y: &[f64; 12]| (nalgebra::Vector6::from_column_slice(&y[..6]) - frame.origin).dot(&ex);
    let t_max = 100.0 / frame.mu;
    let guard = IntegratorControls::default().min_separation;
    while stepper.time() < t_max {
        let seg = stepper.step(t_max)?;
        if PhaseState::from_slice(&seg.y1).min_separation() < guard {
            break;
        }
        if x_of(&seg.y1) <= x0 {
            let t = seg.find_root(|y| x_of(y) - x0);
            let s = PhaseState::from_slice(&seg.eval(t));
            return Ok(PhaseState::new(s.q, -s.p));
        }
    }
    Err(Error::Domain(format!("stable manifold does not reach x0 = {x0}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SystemParams, NormalModeFrame) {
        let p = SystemParams::new(2.0, 1.0).unwrap();
        (p, NormalModeFrame::new(&p).unwrap())
    }

    #[test]
    fn threshold_momentum_limit() {
        let (_, f) = setup();
        let s = make_flux_sample(&f, 1e-14, -0.1, 0.0, 0.0, [0.0; 3], [0.0; 3]).unwrap();
        assert!((s.p_x0 - f.mu * 0.1).abs() < 1e-12);
        assert!(s.p_x0 > 0.0 && s.x0 < 0.0);
    }

    #[test]
    fn exact_and_approximate_momenta_agree_to_second_order() {
        let (_, f) = setup();
        let eps = 1e-3;
        let s = make_flux_sample(&f, eps, -0.1, 0.0, 0.0, [0.0; 3], [0.0; 3]).unwrap();
        let rel = (s.p_x0 - s.p_x0_approx).abs() / s.p_x0;
        // next term of the series: -eps^2 / (2 mu^3 |x0|^3)
        let k = eps / (f.mu * f.mu * 0.01);
        assert!(rel < k * k, "{rel} vs {}", k * k);
        assert!(rel > 0.1 * k * k);
    }

    #[test]
    fn harmonic_sample_sits_on_the_quadratic_shell() {
        let (p, f) = setup();
        let eps = 1e-3;
        let s = make_flux_sample(&f, eps, -0.1, 2e-3, 1e-3, [1e-3, -2e-3, 5e-4], [0.0, 1e-3, 0.0]).unwrap();
        let c = f.from_full(&s.state);
        assert!((f.harmonic_energy(&c) - (f.v_s + eps)).abs() < 1e-12);
        let full = model::hamiltonian_full(&s.state, &p).unwrap();
        // cubic residual of a displacement ~0.1
        assert!((full - f.v_s - eps).abs() < 1e-3);
    }

    #[test]
    fn cubic_energy_residual_scales_with_displacement() {
        let (p, f) = setup();
        let resid = |x0: f64| {
            let s = make_flux_sample(&f, 1e-6, x0, 0.0, 0.0, [0.0; 3], [0.0; 3]).unwrap();
            (model::hamiltonian_full(&s.state, &p).unwrap() - f.v_s - 1e-6).abs()
        };
        let ratio = resid(-0.04) / resid(-0.02);
        assert!((ratio - 8.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn infeasible_sample_is_rejected() {
        let (_, f) = setup();
        let r = make_flux_sample(&f, 1e-4, -0.01, 0.0, 0.0, [0.0; 3], [1.0, 0.0, 0.0]);
        assert!(matches!(r, Err(Error::InfeasibleSample(_))));
        assert!(make_flux_sample(&f, 0.0, -0.1, 0.0, 0.0, [0.0; 3], [0.0; 3]).is_err());
        assert!(make_flux_sample(&f, 1e-3, 0.1, 0.0, 0.0, [0.0; 3], [0.0; 3]).is_err());
    }

    #[test]
    fn anchored_launch_has_exact_energy() {
        let (p, f) = setup();
        let x0 = -0.5 * p.length_scale();
        let surface = LaunchSurface::with_frame(&p, f.clone(), x0).unwrap();
        let anchor_e = model::hamiltonian_full(&surface.anchor, &p).unwrap();
        assert!((anchor_e - f.v_s).abs() < 1e-9);
        let c = f.from_full(&surface.anchor);
        assert!((c.x - x0).abs() < 1e-12 && c.p_x > 0.0);
        assert!(c.y.abs() < 1e-14);
        for eps in [1e-5, 1e-3] {
            let s = surface.sample(eps, 1e-4, 0.0, [1e-3, 0.0, 0.0], [0.0; 3]).unwrap();
            let e = model::hamiltonian_full(&s.state, &p).unwrap();
            assert!((e - f.v_s - eps).abs() < 1e-12);
            assert!(s.p_x0 > 0.0);
        }
    }
}
