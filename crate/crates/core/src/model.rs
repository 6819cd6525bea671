//! The physical system: two electrons, an ion of charge `Z` at the origin and
//! a static field of strength `F` along +z. Atomic units throughout.
//!
//! Two descriptions are provided. The full configuration space holds both
//! electrons in Cartesian coordinates `(x1, y1, z1, x2, y2, z2)` with the
//! potential
//!
//! ```text
//! V = -Z/|r1| - Z/|r2| + 1/|r1 - r2| - F (z1 + z2)
//! ```
//!
//! The symmetric subspace places the electrons at azimuths `phi` and
//! `phi + pi` with equal `(rho, z) = (r, z)`; its Hamiltonian is
//! `(p_r^2 + p_z^2)/4 - 2Z/sqrt(r^2 + z^2) + 1/(2r) - 2 F z`.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hartree energy in electron volts.
pub const HARTREE_EV: f64 = 27.211386;
/// Atomic unit of electric field in V/cm.
pub const AU_FIELD_V_PER_CM: f64 = 5.142207e9;

pub fn field_from_kv_per_cm(kv_cm: f64) -> f64 {
    kv_cm * 1.0e3 / AU_FIELD_V_PER_CM
}

pub fn field_to_kv_per_cm(field: f64) -> f64 {
    field * AU_FIELD_V_PER_CM / 1.0e3
}

pub fn hartree_to_ev(e: f64) -> f64 {
    e * HARTREE_EV
}

/// Ion charge and field strength. Construction enforces `Z >= 1`, `F > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    z: f64,
    f: f64,
}

impl SystemParams {
    pub fn new(charge: f64, field: f64) -> Result<Self> {
        if !charge.is_finite() || charge < 1.0 {
            return Err(Error::Domain(format!("ion charge Z must be >= 1, got {charge}")));
        }
        if !field.is_finite() || field <= 0.0 {
            return Err(Error::Domain(format!("field strength F must be > 0, got {field}")));
        }
        Ok(SystemParams { z: charge, f: field })
    }

    /// Ion charge `Z`.
    pub fn charge(&self) -> f64 {
        self.z
    }

    /// Field strength `F` in atomic units.
    pub fn field(&self) -> f64 {
        self.f
    }

    /// Length scale `(2a - 1)^{1/4} / sqrt(F)` of the saddle region.
    pub fn length_scale(&self) -> f64 {
        let a = crate::saddle::shape_parameter(self.z).expect("Z >= 1 checked at construction");
        (2.0 * a - 1.0).powf(0.25) / self.f.sqrt()
    }
}

/// Reduced state in the symmetric subspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricState {
    pub r: f64,
    pub z: f64,
    pub p_r: f64,
    pub p_z: f64,
}

impl SymmetricState {
    pub fn new(r: f64, z: f64, p_r: f64, p_z: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("symmetric state needs r > 0, got {r}")));
        }
        Ok(SymmetricState { r, z, p_r, p_z })
    }

    /// Full-space phase point with electron 1 at azimuth `phi` and electron 2
    /// at `phi + pi`. Each electron carries half of `(p_r, p_z)`.
    pub fn embed(&self, phi: f64) -> PhaseState {
        let (s, c) = phi.sin_cos();
        let q = Vector6::new(self.r * c, self.r * s, self.z, -self.r * c, -self.r * s, self.z);
        let hr = 0.5 * self.p_r;
        let hz = 0.5 * self.p_z;
        let p = Vector6::new(hr * c, hr * s, hz, -hr * c, -hr * s, hz);
        PhaseState { q, p }
    }
}

/// Full two-electron phase point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseState {
    pub q: Vector6<f64>,
    pub p: Vector6<f64>,
}

impl PhaseState {
    pub fn new(q: Vector6<f64>, p: Vector6<f64>) -> Self {
        PhaseState { q, p }
    }

    pub fn from_slice(y: &[f64]) -> Self {
        PhaseState {
            q: Vector6::from_column_slice(&y[..6]),
            p: Vector6::from_column_slice(&y[6..12]),
        }
    }

    pub fn to_array(&self) -> [f64; 12] {
        let mut y = [0.0; 12];
        y[..6].copy_from_slice(self.q.as_slice());
        y[6..].copy_from_slice(self.p.as_slice());
        y
    }

    pub fn electron_position(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.q[3 * i], self.q[3 * i + 1], self.q[3 * i + 2])
    }

    pub fn electron_momentum(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.p[3 * i], self.p[3 * i + 1], self.p[3 * i + 2])
    }

    /// Smallest of `|r1|`, `|r2|`, `|r1 - r2|`.
    pub fn min_separation(&self) -> f64 {
        min_separation(&self.q)
    }

    /// z-component of the total angular momentum.
    pub fn angular_momentum_z(&self) -> f64 {
        let q = &self.q;
        let p = &self.p;
        q[0] * p[1] - q[1] * p[0] + q[3] * p[4] - q[4] * p[3]
    }
}

fn min_separation(q: &Vector6<f64>) -> f64 {
    let r1 = Vector3::new(q[0], q[1], q[2]);
    let r2 = Vector3::new(q[3], q[4], q[5]);
    r1.norm().min(r2.norm()).min((r1 - r2).norm())
}

fn check_collision_free(q: &Vector6<f64>) -> Result<()> {
    if !q.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("non-finite coordinates".into()));
    }
    if min_separation(q) <= 0.0 {
        return Err(Error::Domain("coincident particles (zero separation)".into()));
    }
    Ok(())
}

pub fn potential_symmetric(r: f64, z: f64, params: &SystemParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("r must be > 0, got {r}")));
    }
    let rho = (r * r + z * z).sqrt();
    Ok(-2.0 * params.z / rho + 0.5 / r - 2.0 * params.f * z)
}

pub fn hamiltonian_symmetric(state: &SymmetricState, params: &SystemParams) -> Result<f64> {
    let kinetic = 0.25 * (state.p_r * state.p_r + state.p_z * state.p_z);
    Ok(kinetic + potential_symmetric(state.r, state.z, params)?)
}

/// `(dV/dr, dV/dz)` in the symmetric subspace.
pub fn grad_potential_symmetric(r: f64, z: f64, params: &SystemParams) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("r must be > 0, got {r}")));
    }
    let rho2 = r * r + z * z;
    let rho3 = rho2 * rho2.sqrt();
    let dr = 2.0 * params.z * r / rho3 - 0.5 / (r * r);
    let dz = 2.0 * params.z * z / rho3 - 2.0 * params.f;
    Ok((dr, dz))
}

pub fn potential_full(q: &Vector6<f64>, params: &SystemParams) -> Result<f64> {
    check_collision_free(q)?;
    Ok(potential_full_unchecked(q, params))
}

pub(crate) fn potential_full_unchecked(q: &Vector6<f64>, params: &SystemParams) -> f64 {
    let r1 = Vector3::new(q[0], q[1], q[2]);
    let r2 = Vector3::new(q[3], q[4], q[5]);
    -params.z / r1.norm() - params.z / r2.norm() + 1.0 / (r1 - r2).norm() - params.f * (q[2] + q[5])
}

pub fn hamiltonian_full(state: &PhaseState, params: &SystemParams) -> Result<f64> {
    Ok(0.5 * state.p.norm_squared() + potential_full(&state.q, params)?)
}

pub(crate) fn hamiltonian_full_unchecked(state: &PhaseState, params: &SystemParams) -> f64 {
    0.5 * state.p.norm_squared() + potential_full_unchecked(&state.q, params)
}

pub fn grad_potential_full(q: &Vector6<f64>, params: &SystemParams) -> Result<Vector6<f64>> {
    check_collision_free(q)?;
    Ok(grad_potential_full_unchecked(q, params))
}

pub(crate) fn grad_potential_full_unchecked(q: &Vector6<f64>, params: &SystemParams) -> Vector6<f64> {
    let r1 = Vector3::new(q[0], q[1], q[2]);
    let r2 = Vector3::new(q[3], q[4], q[5]);
    let d = r1 - r2;
    let n1 = r1.norm();
    let n2 = r2.norm();
    let n12 = d.norm();
    let mut g1 = r1 * (params.z / (n1 * n1 * n1)) - d / (n12 * n12 * n12);
    let mut g2 = r2 * (params.z / (n2 * n2 * n2)) + d / (n12 * n12 * n12);
    g1[2] -= params.f;
    g2[2] -= params.f;
    Vector6::new(g1[0], g1[1], g1[2], g2[0], g2[1], g2[2])
}

/// `I/|r|^3 - 3 r r^T / |r|^5`, the Hessian of `-1/|r|`.
fn coulomb_block(r: &Vector3<f64>) -> Matrix3<f64> {
    let n = r.norm();
    let n3 = n * n * n;
    Matrix3::identity() / n3 - (r * r.transpose()) * (3.0 / (n3 * n * n))
}

/// Analytic Hessian of [`potential_full`].
pub fn hessian_potential_full(q: &Vector6<f64>, params: &SystemParams) -> Result<Matrix6<f64>> {
    check_collision_free(q)?;
    let r1 = Vector3::new(q[0], q[1], q[2]);
    let r2 = Vector3::new(q[3], q[4], q[5]);
    let a1 = coulomb_block(&r1) * params.z;
    let a2 = coulomb_block(&r2) * params.z;
    // +1/|d| has Hessian -coulomb_block(d) in d
    let b = -coulomb_block(&(r1 - r2));
    let mut h = Matrix6::zeros();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&(a1 + b));
    h.fixed_view_mut::<3, 3>(3, 3).copy_from(&(a2 + b));
    h.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-b));
    h.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-b));
    Ok(h)
}

/// Hamilton's equations in the full space: `(dq/dt, dp/dt) = (p, -grad V)`.
pub fn equations_of_motion_full(state: &PhaseState, params: &SystemParams) -> Result<PhaseState> {
    let g = grad_potential_full(&state.q, params)?;
    Ok(PhaseState { q: state.p, p: -g })
}

/// Hamilton's equations in the symmetric subspace; the `p^2/4` kinetic term
/// gives `dr/dt = p_r/2`, `dz/dt = p_z/2`.
pub fn equations_of_motion_symmetric(
    state: &SymmetricState,
    params: &SystemParams,
) -> Result<SymmetricState> {
    let (dr, dz) = grad_potential_symmetric(state.r, state.z, params)?;
    Ok(SymmetricState { r: 0.5 * state.p_r, z: 0.5 * state.p_z, p_r: -dr, p_z: -dz })
}

/// Potential on a regular `(r, z)` grid, row per z, column per r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub r_axis: Vec<f64>,
    pub z_axis: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ContourGrid {
    /// Minimax pass of the grid: for every z row take the minimum over r (the
    /// valley floor), then the highest interior point along that floor.
    pub fn discrete_saddle(&self) -> Option<(f64, f64)> {
        let nz = self.z_axis.len();
        let floor: Vec<(usize, f64)> = self
            .values
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc })
            })
            .collect();
        (1..nz.saturating_sub(1))
            .filter(|&iz| floor[iz].1 >= floor[iz - 1].1 && floor[iz].1 >= floor[iz + 1].1)
            .max_by(|&a, &b| floor[a].1.total_cmp(&floor[b].1))
            .map(|iz| (self.r_axis[floor[iz].0], self.z_axis[iz]))
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn contour_grid(
    params: &SystemParams,
    r_range: (f64, f64),
    z_range: (f64, f64),
    n_r: usize,
    n_z: usize,
) -> Result<ContourGrid> {
    if n_r < 2 || n_z < 2 {
        return Err(Error::Domain(format!("grid needs at least 2x2 nodes, got {n_r}x{n_z}")));
    }
    if !(r_range.0 > 0.0) || !(r_range.1 > r_range.0) {
        return Err(Error::Domain(format!("r range must satisfy 0 < r_min < r_max, got {r_range:?}")));
    }
    if !(z_range.1 > z_range.0) {
        return Err(Error::Domain(format!("z range must be increasing, got {z_range:?}")));
    }
    let r_axis = linspace(r_range.0, r_range.1, n_r);
    let z_axis = linspace(z_range.0, z_range.1, n_z);
    let values = z_axis
        .iter()
        .map(|&z| r_axis.iter().map(|&r| potential_symmetric(r, z, params)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(ContourGrid { r_axis, z_axis, values })
}
