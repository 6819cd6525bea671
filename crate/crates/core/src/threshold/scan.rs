use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::saddle;

use super::fit::{fit_exponent, Measurement};
use super::monte_carlo::{flux_monte_carlo, SamplerSettings};
use super::width::{WidthProbe, WidthSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMethod {
    HarmonicOracle,
    Bisection,
    MonteCarlo,
}

impl FromStr for ScanMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" | "harmonic_oracle" | "harmonic-oracle" => Ok(ScanMethod::HarmonicOracle),
            "bisection" => Ok(ScanMethod::Bisection),
            "monte_carlo" | "monte-carlo" | "mc" => Ok(ScanMethod::MonteCarlo),
            other => Err(Error::Config(format!(
                "unknown scan method '{other}' (expected harmonic, bisection or monte-carlo)"
            ))),
        }
    }
}

impl fmt::Display for ScanMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScanMethod::HarmonicOracle => "harmonic_oracle",
            ScanMethod::Bisection => "bisection",
            ScanMethod::MonteCarlo => "monte_carlo",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSettings {
    /// Grid bounds as fractions of `|V_s|`.
    pub eps_min: f64,
    pub eps_max: f64,
    pub points_per_decade: u32,
    pub method: ScanMethod,
    pub samples: usize,
    pub seed: u64,
    pub width: WidthSettings,
    pub sampler: SamplerSettings,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            eps_min: 1e-4,
            eps_max: 1e-2,
            points_per_decade: 8,
            method: ScanMethod::Bisection,
            samples: 2000,
            seed: 0,
            width: WidthSettings::default(),
            sampler: SamplerSettings::default(),
        }
    }
}

impl ScanSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_min > 0.0 && self.eps_max > self.eps_min && self.eps_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < eps_min < eps_max, got {} and {}",
                self.eps_min, self.eps_max
            )));
        }
        if self.points_per_decade == 0 {
            return Err(Error::Config("points_per_decade must be at least 1".into()));
        }
        if self.method == ScanMethod::MonteCarlo && self.samples < 100 {
            return Err(Error::Config(format!("need at least 100 samples, got {}", self.samples)));
        }
        self.width.validate()?;
        self.sampler.validate()
    }
}

/// Logarithmic grid of excess energies (hartree) between `eps_min |V_s|` and
/// `eps_max |V_s|`, both ends included.
pub fn epsilon_grid(v_s: f64, eps_min: f64, eps_max: f64, points_per_decade: u32) -> Result<Vec<f64>> {
    if !(eps_min > 0.0 && eps_max > eps_min) || points_per_decade == 0 {
        return Err(Error::Config(format!("invalid grid [{eps_min}, {eps_max}] x {points_per_decade}")));
    }
    let decades = (eps_max / eps_min).log10();
    let intervals = ((decades * points_per_decade as f64).round() as usize).max(1);
    let lo = v_s.abs() * eps_min;
    let ratio = eps_max / eps_min;
    Ok((0..=intervals).map(|i| lo * ratio.powf(i as f64 / intervals as f64)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGap {
    pub epsilon: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub charge: f64,
    pub field: f64,
    pub v_s: f64,
    pub method: ScanMethod,
    pub epsilon_grid: Vec<f64>,
    /// Width (harmonic, bisection) or double-escape fraction (Monte Carlo).
    pub measurements: Vec<Measurement>,
    pub gaps: Vec<ScanGap>,
    /// `None` when too few points survived; see `fit_error`.
    pub alpha_fit: Option<f64>,
    pub alpha_stderr: Option<f64>,
    pub fit_window: (f64, f64),
    pub fit_error: Option<String>,
    /// `nu / mu` from the closed-form stability rates.
    pub alpha_theory: f64,
    pub x0: f64,
    pub x_exit: f64,
    pub seed: u64,
    pub trajectories: usize,
}

pub fn run_scan(params: &SystemParams, settings: &ScanSettings) -> Result<ThresholdScan> {
    settings.validate()?;
    let v_s = saddle::saddle_analytic(params).v_s;
    let grid = epsilon_grid(v_s, settings.eps_min, settings.eps_max, settings.points_per_decade)?;
    let probe = WidthProbe::new(params, &settings.width)?;

    let mut trajectories = 0;
    let results: Vec<Result<Measurement>> = match settings.method {
        ScanMethod::HarmonicOracle => grid
            .iter()
            .map(|&e| Ok(Measurement { epsilon: e, value: probe.harmonic_width(e)?, stderr: 0.0 }))
            .collect(),
        ScanMethod::Bisection => {
            let widths: Vec<_> = grid.par_iter().map(|&e| probe.critical_width(e)).collect();
            widths
                .into_iter()
                .map(|r| {
                    r.map(|m| {
                        trajectories += m.trajectories;
                        Measurement { epsilon: m.epsilon, value: m.width, stderr: m.stderr }
                    })
                })
                .collect()
        }
        ScanMethod::MonteCarlo => grid
            .iter()
            .map(|&e| {
                flux_monte_carlo(&probe, e, settings.samples, settings.seed, &settings.sampler).map(|f| {
                    trajectories += f.samples;
                    Measurement { epsilon: e, value: f.fraction, stderr: f.stderr }
                })
            })
            .collect(),
    };

    let mut measurements = Vec::new();
    let mut gaps = Vec::new();
    for (r, &e) in results.into_iter().zip(&grid) {
        match r {
            Ok(m) => measurements.push(m),
            Err(err) => gaps.push(ScanGap { epsilon: e, reason: err.to_string() }),
        }
    }
    let window = (grid[0], grid[grid.len() - 1]);
    let fit = fit_exponent(&measurements, window);
    Ok(ThresholdScan {
        charge: params.charge(),
        field: params.field(),
        v_s,
        method: settings.method,
        epsilon_grid: grid,
        measurements,
        gaps,
        alpha_fit: fit.as_ref().ok().map(|f| f.alpha),
        alpha_stderr: fit.as_ref().ok().map(|f| f.alpha_stderr),
        fit_window: window,
        fit_error: fit.err().map(|e| e.to_string()),
        alpha_theory: saddle::threshold_exponent(params),
        x0: probe.surface.x0,
        x_exit: probe.x_exit(),
        seed: settings.seed,
        trajectories,
    })
}
