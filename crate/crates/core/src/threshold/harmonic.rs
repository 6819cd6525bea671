use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::saddle;

/// Exact solution of the quadratic saddle Hamiltonian in the `x` and `y`
/// degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicOrbit {
    pub mu: f64,
    pub nu: f64,
    pub x0: f64,
    pub p_x0: f64,
    pub y_prime0: f64,
    pub p_y_prime0: f64,
}

impl HarmonicOrbit {
    fn growth_amplitude(&self) -> f64 {
        0.5 * (self.x0 + self.p_x0 / self.mu)
    }

    pub fn x(&self, t: f64) -> f64 {
        let a = self.growth_amplitude();
        let b = 0.5 * (self.x0 - self.p_x0 / self.mu);
        a * (self.mu * t).exp() + b * (-self.mu * t).exp()
    }

    pub fn y_prime(&self, t: f64) -> f64 {
        self.y_prime0 * (self.nu * t).exp()
    }

    pub fn p_y_prime(&self, t: f64) -> f64 {
        self.p_y_prime0 * (-self.nu * t).exp()
    }

    pub fn y(&self, t: f64) -> f64 {
        0.5 * self.y_prime(t) - self.p_y_prime(t) / self.nu
    }

    pub fn p_y(&self, t: f64) -> f64 {
        self.p_y_prime(t) + 0.5 * self.nu * self.y_prime(t)
    }

    /// Large-time form `y ~ (y'_0/2) (2x(t)/(x0 + p_x0/mu))^{nu/mu}`. Before
    /// the reaction coordinate turns positive the bare growth term
    /// `(y'_0/2) e^{nu t}` is returned.
    pub fn y_large_time(&self, t: f64) -> f64 {
        let ratio = self.x(t) / self.growth_amplitude();
        if ratio > 0.0 {
            0.5 * self.y_prime0 * ratio.powf(self.nu / self.mu)
        } else {
            0.5 * self.y_prime(t)
        }
    }
}

/// Large-time linearized `y(t)` for the given launch.
pub fn linearized_y(t: f64, y_prime0: f64, p_y_prime0: f64, x0: f64, p_x0: f64, params: &SystemParams) -> f64 {
    let orbit = HarmonicOrbit {
        mu: saddle::mu_squared(params).sqrt(),
        nu: saddle::nu_squared(params).sqrt(),
        x0,
        p_x0,
        y_prime0,
        p_y_prime0,
    };
    orbit.y_large_time(t)
}

/// Closed-form bound on `|y'_0|` keeping `|y| < x_exit` when the linearized
/// orbit reaches `x = x_exit`, using the small-epsilon momentum
/// `p_x0 = mu |x0| + epsilon/(mu |x0|)`:
/// `W = 2 x_exit (epsilon / (2 mu^2 |x0| x_exit))^{nu/mu}`.
pub fn critical_width_harmonic(params: &SystemParams, epsilon: f64, x0: f64, x_exit: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("excess energy must be > 0, got {epsilon}")));
    }
    if !(x0 < 0.0) || !(x_exit > 0.0) {
        return Err(Error::Domain(format!("need x0 < 0 < x_exit, got {x0}, {x_exit}")));
    }
    let mu2 = saddle::mu_squared(params);
    let alpha = saddle::threshold_exponent(params);
    Ok(2.0 * x_exit * (epsilon / (2.0 * mu2 * x0.abs() * x_exit)).powf(alpha))
}
