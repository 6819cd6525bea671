use serde::{Deserialize, Serialize};

use crate::dynamics::{self, IntegratorControls, OutcomeLabel, ProjectorCheck, Trajectory};
use crate::error::{Error, Result};
use crate::model::SystemParams;

use super::flux::LaunchSurface;
use super::harmonic::critical_width_harmonic;

/// What counts as a double escape when measuring widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoubleCriterion {
    /// Both electrons beyond the escape surface.
    Escape,
    /// Escape and `|y| < x_exit` at the first crossing of `x = x_exit`.
    Projector,
}

/// Launch coordinates other than `y'_0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Transverse {
    pub p_y_prime: f64,
    pub u: [f64; 3],
    pub p_u: [f64; 3],
}

impl Transverse {
    pub const DIM: usize = 7;

    pub fn is_zero(&self) -> bool {
        (0..Self::DIM).all(|k| self.get(k) == 0.0)
    }

    /// Components in the order `p_y'`, `u1..u3`, `p_u1..p_u3`.
    pub fn get(&self, k: usize) -> f64 {
        match k {
            0 => self.p_y_prime,
            1..=3 => self.u[k - 1],
            _ => self.p_u[k - 4],
        }
    }

    pub fn set(&mut self, k: usize, v: f64) {
        match k {
            0 => self.p_y_prime = v,
            1..=3 => self.u[k - 1] = v,
            _ => self.p_u[k - 4] = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WidthSettings {
    /// Launch surface `x0` in units of the saddle length scale (negative).
    pub x0_scale: f64,
    /// Projector distance as a multiple of `|x0|`.
    pub x_exit_ratio: f64,
    pub criterion: DoubleCriterion,
    /// Bisection stops when the bracket is below this fraction of the width.
    pub bisection_rel_tol: f64,
    /// Fixed launch coordinates besides `y'_0`.
    pub transverse: Transverse,
    pub controls: IntegratorControls,
}

impl Default for WidthSettings {
    fn default() -> Self {
        WidthSettings {
            x0_scale: -1.0,
            x_exit_ratio: 5.0,
            criterion: DoubleCriterion::Escape,
            bisection_rel_tol: 1e-5,
            transverse: Transverse::default(),
            controls: IntegratorControls::default(),
        }
    }
}

impl WidthSettings {
    pub fn validate(&self) -> Result<()> {
        self.controls.validate()?;
        if !(self.x0_scale < 0.0 && self.x0_scale.is_finite()) {
            return Err(Error::Config(format!("x0_scale must be negative, got {}", self.x0_scale)));
        }
        if !(self.x_exit_ratio > 0.0 && self.x_exit_ratio.is_finite()) {
            return Err(Error::Config(format!("x_exit_ratio must be positive, got {}", self.x_exit_ratio)));
        }
        if !(self.bisection_rel_tol > 0.0 && self.bisection_rel_tol < 0.5) {
            return Err(Error::Config(format!("bisection_rel_tol out of range: {}", self.bisection_rel_tol)));
        }
        if !(0..Transverse::DIM).all(|k| self.transverse.get(k).is_finite()) {
            return Err(Error::Config("transverse launch coordinates must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthMeasurement {
    pub epsilon: f64,
    /// Half-length of the double-escape interval in `y'_0`.
    pub width: f64,
    pub stderr: f64,
    /// Midpoint of the interval; zero for symmetric launches.
    pub center: f64,
    pub trajectories: usize,
}

/// Launch surface, projector and controls for repeated width measurements.
#[derive(Debug, Clone)]
pub struct WidthProbe {
    pub surface: LaunchSurface,
    pub projector: ProjectorCheck,
    pub settings: WidthSettings,
}

impl WidthProbe {
    pub fn new(params: &SystemParams, settings: &WidthSettings) -> Result<Self> {
        settings.validate()?;
        let x0 = settings.x0_scale * params.length_scale();
        let surface = LaunchSurface::new(params, x0)?;
        let projector = ProjectorCheck {
            origin: surface.frame.origin,
            reaction: *surface.frame.reaction(),
            desymmetrization: *surface.frame.desymmetrization(),
            x_exit: settings.x_exit_ratio * x0.abs(),
        };
        Ok(WidthProbe { surface, projector, settings: settings.clone() })
    }

    pub fn x_exit(&self) -> f64 {
        self.projector.x_exit
    }

    /// Harmonic width for this launch geometry.
    pub fn harmonic_width(&self, epsilon: f64) -> Result<f64> {
        critical_width_harmonic(&self.surface.params, epsilon, self.surface.x0, self.x_exit())
    }

    pub fn run(&self, epsilon: f64, y_prime: f64, tr: &Transverse) -> Result<Trajectory> {
        let sample = self.surface.sample(epsilon, y_prime, tr.p_y_prime, tr.u, tr.p_u)?;
        dynamics::integrate_monitored(
            &sample.state,
            &self.surface.params,
            &self.settings.controls,
            Some(&self.projector),
        )
    }

    pub fn is_double(&self, traj: &Trajectory) -> bool {
        let escaped = traj.outcome.label == OutcomeLabel::DoubleEscape;
        match self.settings.criterion {
            DoubleCriterion::Escape => escaped,
            DoubleCriterion::Projector => escaped && traj.projector.is_some_and(|c| c.satisfied),
        }
    }

    fn double_at(&self, epsilon: f64, y_prime: f64, tr: &Transverse, count: &mut usize) -> Result<bool> {
        *count += 1;
        match self.run(epsilon, y_prime, tr) {
            Ok(t) => Ok(self.is_double(&t)),
            Err(Error::InfeasibleSample(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Which electron wins: sign of the desymmetrization projection when the
    /// orbit leaves the saddle region.
    fn lean(&self, epsilon: f64, y_prime: f64, tr: &Transverse, count: &mut usize) -> Result<f64> {
        *count += 1;
        let t = self.run(epsilon, y_prime, tr)?;
        Ok(match t.projector {
            Some(c) => c.y,
            None => (t.final_state.q - self.projector.origin).dot(&self.projector.desymmetrization),
        })
    }

    /// Bisect for the edge of the double-escape interval starting from the
    /// double point `inside` and moving in direction `dir`.
    fn edge(
        &self,
        epsilon: f64,
        inside: f64,
        dir: f64,
        tr: &Transverse,
        count: &mut usize,
    ) -> Result<(f64, f64)> {
        let mut lo = 0.0;
        let mut hi = 0.1 * self.harmonic_width(epsilon)?;
        let mut expansions = 0;
        while self.double_at(epsilon, inside + dir * hi, tr, count)? {
            lo = hi;
            hi *= 4.0;
            expansions += 1;
            if expansions > 40 {
                return Err(Error::NoConvergence { iterations: expansions, residual: hi });
            }
        }
        while hi - lo > self.settings.bisection_rel_tol * hi {
            let mid = 0.5 * (lo + hi);
            if self.double_at(epsilon, inside + dir * mid, tr, count)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi), 0.5 * (hi - lo)))
    }

    /// Point of the `y'_0` line where neither electron leads, located by
    /// bisection on the sign of `y` at the projector crossing.
    pub fn center(&self, epsilon: f64, tr: &Transverse) -> Result<f64> {
        self.center_counted(epsilon, tr, &mut 0)
    }

    fn center_counted(&self, epsilon: f64, tr: &Transverse, count: &mut usize) -> Result<f64> {
        if tr.is_zero() {
            return Ok(0.0);
        }
        let resolution = 1e-3 * self.harmonic_width(epsilon)?;
        let mut half = resolution;
        let mut expansions = 0;
        while !(self.lean(epsilon, -half, tr, count)? < 0.0 && self.lean(epsilon, half, tr, count)? > 0.0) {
            half *= 4.0;
            expansions += 1;
            if expansions > 40 {
                return Err(Error::NoSymmetricEscape(epsilon));
            }
        }
        let (mut lo, mut hi) = (-half, half);
        while hi - lo > resolution {
            let mid = 0.5 * (lo + hi);
            if self.lean(epsilon, mid, tr, count)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Double-escape interval along `y'_0` for fixed transverse coordinates.
    pub fn width_at(&self, epsilon: f64, tr: &Transverse) -> Result<WidthMeasurement> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("excess energy must be > 0, got {epsilon}")));
        }
        let mut count = 0;
        let c = self.center_counted(epsilon, tr, &mut count)?;
        if !self.double_at(epsilon, c, tr, &mut count)? {
            return Err(Error::NoSymmetricEscape(epsilon));
        }
        let (up, e_up) = self.edge(epsilon, c, 1.0, tr, &mut count)?;
        if tr.is_zero() {
            return Ok(WidthMeasurement { epsilon, width: up, stderr: e_up, center: 0.0, trajectories: count });
        }
        let (down, e_down) = self.edge(epsilon, c, -1.0, tr, &mut count)?;
        Ok(WidthMeasurement {
            epsilon,
            width: 0.5 * (up + down),
            stderr: 0.5 * e_up.hypot(e_down),
            center: c + 0.5 * (up - down),
            trajectories: count,
        })
    }

    /// Critical width at the configured transverse coordinates. With all of
    /// them zero the launch line is mirror symmetric and only the upper edge
    /// is bisected.
    pub fn critical_width(&self, epsilon: f64) -> Result<WidthMeasurement> {
        self.width_at(epsilon, &self.settings.transverse)
    }
}

/// One-shot width measurement; builds the launch surface each call.
pub fn critical_width_numeric(
    params: &SystemParams,
    epsilon: f64,
    settings: &WidthSettings,
) -> Result<WidthMeasurement> {
    WidthProbe::new(params, settings)?.critical_width(epsilon)
}
