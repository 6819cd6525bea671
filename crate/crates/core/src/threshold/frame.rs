use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{PhaseState, SystemParams};
use crate::saddle::{self, SpectrumSource, StabilitySpectrum};

/// Normal-mode phase-space coordinates around the saddle. The neutral
/// rotation mode is not represented (zero axial angular momentum).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalCoords {
    pub x: f64,
    pub p_x: f64,
    pub y: f64,
    pub p_y: f64,
    pub u: [f64; 3],
    pub p_u: [f64; 3],
}

/// Canonical pair that decouples the unstable `y` motion:
/// `y' = y + p_y/nu`, `p_y' = p_y/2 - nu y/2`. Under the harmonic flow
/// `y'(t) = y'_0 e^{nu t}` and `p_y'(t) = p_y'_0 e^{-nu t}`.
pub fn to_unstable_pair(y: f64, p_y: f64, nu: f64) -> (f64, f64) {
    (y + p_y / nu, 0.5 * p_y - 0.5 * nu * y)
}

pub fn from_unstable_pair(y_prime: f64, p_y_prime: f64, nu: f64) -> (f64, f64) {
    (0.5 * y_prime - p_y_prime / nu, p_y_prime + 0.5 * nu * y_prime)
}

/// Orthonormal eigenvector frame of the saddle Hessian (unit masses, so the
/// same frame maps positions and momenta).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalModeFrame {
    pub origin: Vector6<f64>,
    pub v_s: f64,
    pub mu: f64,
    pub nu: f64,
    pub omega: [f64; 3],
    /// `x`, `y`, `u1`, `u2`, `u3`.
    pub axes: [Vector6<f64>; 5],
    pub neutral: Vector6<f64>,
}

impl NormalModeFrame {
    pub fn new(params: &SystemParams) -> Result<Self> {
        let spectrum = saddle::stability_spectrum(params, SpectrumSource::NumericHessian)?;
        Ok(Self::from_spectrum(params, &spectrum))
    }

    pub fn from_spectrum(params: &SystemParams, spectrum: &StabilitySpectrum) -> Self {
        let saddle = saddle::saddle_analytic(params);
        let m = &spectrum.modes;
        NormalModeFrame {
            origin: saddle.config(),
            v_s: saddle.v_s,
            mu: spectrum.mu,
            nu: spectrum.nu,
            omega: spectrum.omega,
            axes: [m[0], m[1], m[2], m[3], m[4]],
            neutral: m[5],
        }
    }

    pub fn reaction(&self) -> &Vector6<f64> {
        &self.axes[0]
    }

    pub fn desymmetrization(&self) -> &Vector6<f64> {
        &self.axes[1]
    }

    pub fn displacement(&self, x: f64, y: f64, u: &[f64; 3]) -> Vector6<f64> {
        self.axes[0] * x + self.axes[1] * y + self.axes[2] * u[0] + self.axes[3] * u[1] + self.axes[4] * u[2]
    }

    pub fn to_full(&self, c: &NormalCoords) -> PhaseState {
        PhaseState::new(self.origin + self.displacement(c.x, c.y, &c.u), self.displacement(c.p_x, c.p_y, &c.p_u))
    }

    /// Projection onto the frame; any component along the neutral mode is dropped.
    pub fn from_full(&self, s: &PhaseState) -> NormalCoords {
        let dq = s.q - self.origin;
        let a = &self.axes;
        NormalCoords {
            x: dq.dot(&a[0]),
            p_x: s.p.dot(&a[0]),
            y: dq.dot(&a[1]),
            p_y: s.p.dot(&a[1]),
            u: [dq.dot(&a[2]), dq.dot(&a[3]), dq.dot(&a[4])],
            p_u: [s.p.dot(&a[2]), s.p.dot(&a[3]), s.p.dot(&a[4])],
        }
    }

    /// Quadratic Hamiltonian around the saddle.
    pub fn harmonic_energy(&self, c: &NormalCoords) -> f64 {
        let mut e = self.v_s + 0.5 * (c.p_x * c.p_x - self.mu * self.mu * c.x * c.x)
            + 0.5 * (c.p_y * c.p_y - self.nu * self.nu * c.y * c.y);
        for i in 0..3 {
            e += 0.5 * (c.p_u[i] * c.p_u[i] + self.omega[i] * self.omega[i] * c.u[i] * c.u[i]);
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> NormalModeFrame {
        NormalModeFrame::new(&SystemParams::new(2.0, 1.0).unwrap()).unwrap()
    }

    fn is_mirror_symmetric(d: &Vector6<f64>) -> bool {
        (d[0] + d[3]).abs() < 1e-12 && (d[1] + d[4]).abs() < 1e-12 && (d[2] - d[5]).abs() < 1e-12
    }

    #[test]
    fn reaction_displacement_stays_symmetric() {
        let f = frame();
        let s = f.to_full(&NormalCoords { x: -0.3, p_x: 0.2, ..Default::default() });
        assert!(is_mirror_symmetric(&(s.q - f.origin)));
        assert!(is_mirror_symmetric(&s.p));
    }

    #[test]
    fn desymmetrization_moves_electrons_apart() {
        let f = frame();
        let s = f.to_full(&NormalCoords { y: 0.01, ..Default::default() });
        let rho1 = s.q[0].hypot(s.q[1]);
        let rho2 = s.q[3].hypot(s.q[4]);
        assert!(rho1 > f.origin[0] && s.q[2] > f.origin[2]);
        assert!(rho2 < -f.origin[3] && s.q[5] < f.origin[5]);
    }

    #[test]
    fn frame_round_trip() {
        let f = frame();
        let c = NormalCoords {
            x: -0.12,
            p_x: 0.3,
            y: 1e-3,
            p_y: -2e-3,
            u: [0.01, -0.02, 0.005],
            p_u: [-0.01, 0.0, 0.03],
        };
        let back = f.from_full(&f.to_full(&c));
        let diff = [
            back.x - c.x,
            back.p_x - c.p_x,
            back.y - c.y,
            back.p_y - c.p_y,
            back.u[0] - c.u[0],
            back.u[1] - c.u[1],
            back.u[2] - c.u[2],
            back.p_u[0] - c.p_u[0],
            back.p_u[1] - c.p_u[1],
            back.p_u[2] - c.p_u[2],
        ];
        assert!(diff.iter().all(|d| d.abs() < 1e-12), "{diff:?}");
    }

    #[test]
    fn unstable_pair_is_invertible_and_canonical() {
        let nu = 1.3;
        let (yp, pyp) = to_unstable_pair(0.2, -0.7, nu);
        let (y, py) = from_unstable_pair(yp, pyp, nu);
        assert!((y - 0.2).abs() < 1e-15 && (py + 0.7).abs() < 1e-15);
        // Poisson bracket {y', p_y'} = 1/2 + (1/nu)(nu/2)
        let jac = 1.0 * 0.5 - (1.0 / nu) * (-0.5 * nu);
        assert!((jac - 1.0).abs() < 1e-15);
    }
}
