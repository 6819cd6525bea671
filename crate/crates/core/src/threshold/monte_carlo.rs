use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::width::{Transverse, WidthProbe};

/// Sampling box for flux estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSettings {
    /// Half-width of the `y'_0` box in units of the saddle length scale.
    pub y_box: f64,
    /// Half-width of the `p_y'_0` box in units of `mu` times the length scale.
    pub p_y_box: f64,
    /// Each stable mode carries at most this fraction of `epsilon`.
    pub stable_energy_fraction: f64,
    /// Which stable modes are excited.
    pub stable_modes: [bool; 3],
    /// Narrow the `y'_0` window to this multiple of the harmonic width (which
    /// scales as `epsilon^{nu/mu}`) and reweight by the window ratio. The
    /// window follows the double-escape interval, whose midpoint shifts
    /// linearly with the transverse coordinates.
    pub importance: Option<f64>,
    /// Pin `y'_0 = p_y'_0 = 0`.
    pub freeze_y: bool,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            y_box: 0.05,
            p_y_box: 0.01,
            stable_energy_fraction: 0.1,
            stable_modes: [true; 3],
            importance: Some(4.0),
            freeze_y: false,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !(self.y_box > 0.0 && self.y_box.is_finite()) || !ok(self.p_y_box) {
            return Err(Error::Config("sampling box half-widths must be finite, y_box > 0".into()));
        }
        if !ok(self.stable_energy_fraction) {
            return Err(Error::Config(format!(
                "stable_energy_fraction must be >= 0, got {}",
                self.stable_energy_fraction
            )));
        }
        if let Some(k) = self.importance {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Config(format!("importance factor must be > 0, got {k}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxEstimate {
    pub epsilon: f64,
    /// Double-escape fraction of the full box.
    pub fraction: f64,
    pub stderr: f64,
    pub samples: usize,
    pub hits: usize,
    /// Draws outside the energy shell that were rejected and redrawn.
    pub resampled: usize,
    /// Sampled fraction of the full `y'_0` box.
    pub weight: f64,
    /// Linear model of the interval midpoint in the transverse coordinates
    /// (`p_y'`, `u1..u3`, `p_u1..p_u3`); zero without importance sampling.
    pub center_gradient: [f64; 7],
}

const MAX_REDRAWS: usize = 1000;

/// Half-widths of the transverse sampling region.
struct Extent {
    p_y: f64,
    stable_radius: [f64; 3],
}

fn draw_transverse(rng: &mut ChaCha8Rng, ext: &Extent, omega: &[f64; 3]) -> Transverse {
    let mut tr = Transverse { p_y_prime: rng.random_range(-1.0..=1.0) * ext.p_y, ..Default::default() };
    for i in 0..3 {
        // uniform over the disk p^2 + omega^2 u^2 <= 2 E_max
        let r = ext.stable_radius[i] * rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        tr.p_u[i] = r * theta.cos();
        tr.u[i] = r * theta.sin() / omega[i];
    }
    tr
}

/// Secant slopes of the interval midpoint over half the sampling extent.
fn center_gradient(probe: &WidthProbe, epsilon: f64, ext: &Extent) -> Result<[f64; 7]> {
    let omega = probe.surface.frame.omega;
    let steps: Vec<f64> = (0..Transverse::DIM)
        .map(|k| match k {
            0 => 0.5 * ext.p_y,
            1..=3 => 0.5 * ext.stable_radius[k - 1] / omega[k - 1],
            _ => 0.5 * ext.stable_radius[k - 4],
        })
        .collect();
    let slopes = (0..Transverse::DIM)
        .into_par_iter()
        .map(|k| {
            let h = steps[k];
            if h == 0.0 {
                return Ok(0.0);
            }
            let mut plus = Transverse::default();
            plus.set(k, h);
            let mut minus = Transverse::default();
            minus.set(k, -h);
            Ok((probe.center(epsilon, &plus)? - probe.center(epsilon, &minus)?) / (2.0 * h))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut g = [0.0; 7];
    g.copy_from_slice(&slopes);
    Ok(g)
}

/// Fraction of the sampling box at excess energy `epsilon` that leads to
/// double escape. Sample `i` draws from its own ChaCha8 stream `i` under
/// `seed`, so the result does not depend on thread count or scheduling.
pub fn flux_monte_carlo(
    probe: &WidthProbe,
    epsilon: f64,
    n_samples: usize,
    seed: u64,
    sampler: &SamplerSettings,
) -> Result<FluxEstimate> {
    sampler.validate()?;
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("excess energy must be > 0, got {epsilon}")));
    }
    if n_samples < 100 {
        return Err(Error::Config(format!("need at least 100 samples, got {n_samples}")));
    }
    let surface = &probe.surface;
    let frame = &surface.frame;
    let scale = surface.params.length_scale();
    let full_y = sampler.y_box * scale;
    let radius = (2.0 * sampler.stable_energy_fraction * epsilon).sqrt();
    let mut ext = Extent { p_y: 0.0, stable_radius: [0.0; 3] };
    for i in 0..3 {
        if sampler.stable_modes[i] {
            ext.stable_radius[i] = radius;
        }
    }
    let (y_half, gradient) = if sampler.freeze_y {
        (0.0, [0.0; 7])
    } else {
        ext.p_y = sampler.p_y_box * frame.mu * scale;
        match sampler.importance {
            Some(k) => ((k * probe.harmonic_width(epsilon)?).min(full_y), center_gradient(probe, epsilon, &ext)?),
            None => (full_y, [0.0; 7]),
        }
    };
    let weight = if sampler.freeze_y { 1.0 } else { y_half / full_y };
    let controls = &probe.settings.controls;

    let outcomes: Vec<(bool, usize)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            for redraw in 0..MAX_REDRAWS {
                let tr = draw_transverse(&mut rng, &ext, &frame.omega);
                let offset = rng.random_range(-1.0..=1.0) * y_half;
                let center: f64 = (0..Transverse::DIM).map(|k| gradient[k] * tr.get(k)).sum();
                let sample = match surface.sample(epsilon, center + offset, tr.p_y_prime, tr.u, tr.p_u) {
                    Ok(s) => s,
                    Err(Error::InfeasibleSample(_)) => continue,
                    Err(_) => return (false, redraw),
                };
                let hit = crate::dynamics::integrate_monitored(
                    &sample.state,
                    &surface.params,
                    controls,
                    Some(&probe.projector),
                )
                .map(|t| probe.is_double(&t))
                .unwrap_or(false);
                return (hit, redraw);
            }
            (false, MAX_REDRAWS)
        })
        .collect();
    let hits = outcomes.iter().filter(|o| o.0).count();
    let resampled = outcomes.iter().map(|o| o.1).sum();
    let p = hits as f64 / n_samples as f64;
    Ok(FluxEstimate {
        epsilon,
        fraction: weight * p,
        stderr: weight * (p * (1.0 - p) / n_samples as f64).sqrt(),
        samples: n_samples,
        hits,
        resampled,
        weight,
        center_gradient: gradient,
    })
}
