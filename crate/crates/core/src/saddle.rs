//! Location, energy and stability of the field-induced saddle, and the
//! threshold exponents derived from it.

use nalgebra::{DMatrix, DVector, Matrix6, SymmetricEigen, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, SystemParams};

/// `a = (2 Z^2)^{1/3}`.
pub fn shape_parameter(charge: f64) -> Result<f64> {
    if !(charge > 0.0) {
        return Err(Error::Domain(format!("shape parameter needs Z > 0, got {charge}")));
    }
    Ok((2.0 * charge * charge).cbrt())
}

fn shape(params: &SystemParams) -> f64 {
    shape_parameter(params.charge()).expect("validated at construction")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleInfo {
    pub r_s: f64,
    pub z_s: f64,
    pub v_s: f64,
    pub a: f64,
    /// Electron 1 at `(r_s, 0, z_s)`, electron 2 at `(-r_s, 0, z_s)`.
    pub embedded_config: [f64; 6],
    /// `r_s / z_s = (2a - 1)^{-1/2}`, independent of the field.
    pub locus_ratio: f64,
}

impl SaddleInfo {
    fn from_geometry(r_s: f64, z_s: f64, v_s: f64, a: f64) -> Self {
        SaddleInfo {
            r_s,
            z_s,
            v_s,
            a,
            embedded_config: [r_s, 0.0, z_s, -r_s, 0.0, z_s],
            locus_ratio: r_s / z_s,
        }
    }

    pub fn config(&self) -> Vector6<f64> {
        Vector6::from_row_slice(&self.embedded_config)
    }

    /// Angle between the saddle locus and the field axis, in degrees.
    pub fn locus_angle_deg(&self) -> f64 {
        self.locus_ratio.atan().to_degrees()
    }
}

pub fn saddle_analytic(params: &SystemParams) -> SaddleInfo {
    let a = shape(params);
    let b = 2.0 * a - 1.0;
    let sf = params.field().sqrt();
    let r_s = b.powf(0.25) / (2.0 * sf);
    let z_s = b.powf(0.75) / (2.0 * sf);
    let v_s = -2.0 * b.powf(0.75) * sf;
    let mut info = SaddleInfo::from_geometry(r_s, z_s, v_s, a);
    info.locus_ratio = 1.0 / b.sqrt();
    info
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Gradient-norm threshold in units of the field strength.
    pub gradient_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iterations: 50, gradient_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericSaddle {
    pub info: SaddleInfo,
    /// Number of gradient evaluations, including the final converged one.
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Unit generator of rigid rotation about the field axis at `q`.
fn rotation_generator(q: &Vector6<f64>) -> Vector6<f64> {
    let t = Vector6::new(-q[1], q[0], 0.0, -q[4], q[3], 0.0);
    let n = t.norm();
    if n > 0.0 {
        t / n
    } else {
        t
    }
}

/// Newton iteration on `grad V = 0` with the rotation direction removed by a
/// bordered linear system.
pub fn saddle_numeric(
    params: &SystemParams,
    guess: &Vector6<f64>,
    opts: NewtonOptions,
) -> Result<NumericSaddle> {
    let tol = opts.gradient_tol * params.field();
    let mut q = *guess;
    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iterations {
        let g = match model::grad_potential_full(&q, params) {
            Ok(g) => g,
            Err(_) => return Err(Error::NoConvergence { iterations: iteration, residual }),
        };
        residual = g.norm();
        if !residual.is_finite() {
            return Err(Error::NoConvergence { iterations: iteration, residual });
        }
        if residual < tol {
            return finish(params, q, iteration, residual);
        }
        let h = model::hessian_potential_full(&q, params)?;
        let t = rotation_generator(&q);
        let mut m = DMatrix::<f64>::zeros(7, 7);
        m.view_mut((0, 0), (6, 6)).copy_from(&h);
        for i in 0..6 {
            m[(i, 6)] = t[i];
            m[(6, i)] = t[i];
        }
        let mut rhs = DVector::<f64>::zeros(7);
        for i in 0..6 {
            rhs[i] = -g[i];
        }
        let sol = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SingularJacobian(format!("bordered Hessian singular at iteration {iteration}")))?;
        for i in 0..6 {
            q[i] += sol[i];
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, residual })
}

fn finish(params: &SystemParams, q: Vector6<f64>, iterations: usize, residual: f64) -> Result<NumericSaddle> {
    let expected = saddle_analytic(params);
    let rho1 = q[0].hypot(q[1]);
    let rho2 = q[3].hypot(q[4]);
    let scale = expected.r_s.hypot(expected.z_s);
    let mirror = (rho1 - rho2).abs() + (q[2] - q[5]).abs() + (q[0] + q[3]).abs() + (q[1] + q[4]).abs();
    let off = (rho1 - expected.r_s).abs() + (q[2] - expected.z_s).abs();
    if mirror > 1e-6 * scale || off > 1e-6 * scale {
        return Err(Error::Classification(format!(
            "Newton converged to a stationary point other than the field saddle: {:?}",
            q.as_slice()
        )));
    }
    let r_s = 0.5 * (rho1 + rho2);
    let z_s = 0.5 * (q[2] + q[5]);
    let v_s = model::potential_full(&q, params)?;
    let mut info = SaddleInfo::from_geometry(r_s, z_s, v_s, shape(params));
    info.embedded_config.copy_from_slice(q.as_slice());
    Ok(NumericSaddle { info, iterations, gradient_norm: residual })
}

fn stability_prefactor(params: &SystemParams) -> f64 {
    let b = 2.0 * shape(params) - 1.0;
    params.field().powf(1.5) / b.powf(1.25)
}

/// Squared instability rate along the reaction coordinate.
pub fn mu_squared(params: &SystemParams) -> f64 {
    let a = shape(params);
    ((50.0 * a - 49.0 + 12.0 / a).sqrt() - (2.0 * a - 1.0).sqrt()) * stability_prefactor(params)
}

/// Squared instability rate away from the symmetric subspace.
pub fn nu_squared(params: &SystemParams) -> f64 {
    let a = shape(params);
    ((32.0 * a - 28.0 + 6.0 / a).sqrt() + 2.0 * (2.0 * a - 1.0).sqrt()) * stability_prefactor(params)
}

/// Threshold exponent `alpha = nu / mu`. Computed from `a` alone, so it is
/// bit-identical for every field strength.
pub fn threshold_exponent(params: &SystemParams) -> f64 {
    exponent_from_shape(shape(params))
}

fn exponent_from_shape(a: f64) -> f64 {
    let num = (32.0 * a - 28.0 + 6.0 / a).sqrt() + 2.0 * (2.0 * a - 1.0).sqrt();
    let den = (50.0 * a - 49.0 + 12.0 / a).sqrt() - (2.0 * a - 1.0).sqrt();
    (num / den).sqrt()
}

/// Zero-field Wannier exponent `(sqrt((100Z - 9)/(4Z - 1)) - 1) / 4`.
pub fn wannier_exponent(charge: f64) -> Result<f64> {
    if !(charge > 0.25) {
        return Err(Error::Domain(format!("Wannier exponent needs Z > 1/4, got {charge}")));
    }
    Ok(0.25 * (((100.0 * charge - 9.0) / (4.0 * charge - 1.0)).sqrt() - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentRecord {
    #[serde(rename = "Z")]
    pub charge: f64,
    pub alpha: f64,
    pub wannier_alpha: f64,
}

pub fn exponent_table(charges: &[f64]) -> Result<Vec<ExponentRecord>> {
    charges
        .iter()
        .map(|&z| {
            if !(z >= 1.0) {
                return Err(Error::Domain(format!("exponent table needs Z >= 1, got {z}")));
            }
            Ok(ExponentRecord {
                charge: z,
                alpha: exponent_from_shape(shape_parameter(z)?),
                wannier_alpha: wannier_exponent(z)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    ClosedForm,
    NumericHessian,
}

/// Classified eigendecomposition of the saddle Hessian.
///
/// `modes` holds unit eigenvectors in the order reaction coordinate `x`,
/// desymmetrization `y`, stable modes `u1..u3` (ascending frequency) and the
/// neutral rotation last. `x` points toward the field (increasing `z1 + z2`);
/// `y` moves electron 1 outward in `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySpectrum {
    pub mu: f64,
    pub nu: f64,
    pub omega: [f64; 3],
    pub neutral_count: usize,
    pub eigenvalues: [f64; 6],
    pub modes: [Vector6<f64>; 6],
    pub source: SpectrumSource,
}

impl StabilitySpectrum {
    pub fn reaction_mode(&self) -> &Vector6<f64> {
        &self.modes[0]
    }

    pub fn desymmetrization_mode(&self) -> &Vector6<f64> {
        &self.modes[1]
    }

    pub fn stable_modes(&self) -> &[Vector6<f64>] {
        &self.modes[2..5]
    }

    pub fn neutral_mode(&self) -> &Vector6<f64> {
        &self.modes[5]
    }
}

/// Normalized zero-mode threshold (eigenvalues divided by `F^{3/2}`).
pub const ZERO_MODE_TOL: f64 = 1e-8;

pub fn stability_spectrum(params: &SystemParams, source: SpectrumSource) -> Result<StabilitySpectrum> {
    let saddle = saddle_analytic(params);
    let hessian = model::hessian_potential_full(&saddle.config(), params)?;
    classify_hessian(params, &hessian, source)
}

pub(crate) fn classify_hessian(
    params: &SystemParams,
    hessian: &Matrix6<f64>,
    source: SpectrumSource,
) -> Result<StabilitySpectrum> {
    let norm = params.field().powf(1.5);
    let eig = SymmetricEigen::new(*hessian);
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let scaled = |i: usize| eig.eigenvalues[i] / norm;
    let negative: Vec<usize> = order.iter().copied().filter(|&i| scaled(i) < -ZERO_MODE_TOL).collect();
    let zero: Vec<usize> = order.iter().copied().filter(|&i| scaled(i).abs() <= ZERO_MODE_TOL).collect();
    let positive: Vec<usize> = order.iter().copied().filter(|&i| scaled(i) > ZERO_MODE_TOL).collect();
    if negative.len() != 2 || zero.len() != 1 || positive.len() != 3 {
        return Err(Error::Classification(format!(
            "expected signature (2 negative, 1 zero, 3 positive), got ({}, {}, {}); normalized eigenvalues {:?}",
            negative.len(),
            zero.len(),
            positive.len(),
            order.iter().map(|&i| scaled(i)).collect::<Vec<_>>()
        )));
    }
    let column = |i: usize| -> Vector6<f64> { eig.eigenvectors.column(i).into_owned() };

    let mut x = column(negative[1]);
    if x[2] + x[5] < 0.0 {
        x = -x;
    }
    let mut y = column(negative[0]);
    if y[0] < 0.0 {
        y = -y;
    }
    let modes = [x, y, column(positive[0]), column(positive[1]), column(positive[2]), column(zero[0])];
    let mut eigenvalues = [0.0; 6];
    for (k, &i) in [negative[1], negative[0], positive[0], positive[1], positive[2], zero[0]].iter().enumerate() {
        eigenvalues[k] = eig.eigenvalues[i];
    }
    let omega = [eigenvalues[2].sqrt(), eigenvalues[3].sqrt(), eigenvalues[4].sqrt()];
    let (mu, nu) = match source {
        SpectrumSource::ClosedForm => (mu_squared(params).sqrt(), nu_squared(params).sqrt()),
        SpectrumSource::NumericHessian => ((-eigenvalues[0]).sqrt(), (-eigenvalues[1]).sqrt()),
    };
    if !(nu > mu) {
        return Err(Error::Classification(format!("expected nu > mu, got mu = {mu}, nu = {nu}")));
    }
    Ok(StabilitySpectrum { mu, nu, omega, neutral_count: 1, eigenvalues, modes, source })
}
