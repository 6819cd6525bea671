//! Trajectory integration and outcome classification.
//!
//! An electron has escaped once it is beyond the surface `z = z_cut` (a
//! multiple of the saddle height `z_s`) and still moving outward. A "return to
//! the nucleus" is a local minimum of an electron's distance to the origin that
//! falls below `z_s`.

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{OdeSystem, Segment, Stepper, StepperOptions};
use crate::model::{self, PhaseState, SymmetricState, SystemParams};
use crate::saddle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    None,
    EveryStep,
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `None` means `200 / mu` for the parameters at hand.
    pub max_time: Option<f64>,
    pub min_separation: f64,
    pub energy_drift_limit: f64,
    /// Escape surface in units of `z_s`.
    pub z_cut_factor: f64,
    pub sampling: Sampling,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        IntegratorControls {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_time: None,
            min_separation: 1e-3,
            energy_drift_limit: 1e-8,
            z_cut_factor: 10.0,
            sampling: Sampling::None,
        }
    }
}

impl IntegratorControls {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("min_separation", self.min_separation),
            ("energy_drift_limit", self.energy_drift_limit),
            ("z_cut_factor", self.z_cut_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if let Some(t) = self.max_time {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("max_time must be positive and finite, got {t}")));
            }
        }
        if let Sampling::Uniform(dt) = self.sampling {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("sample interval must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    pub fn resolved_max_time(&self, params: &SystemParams) -> f64 {
        self.max_time.unwrap_or_else(|| 200.0 / saddle::mu_squared(params).sqrt())
    }

    pub fn z_cut(&self, params: &SystemParams) -> f64 {
        self.z_cut_factor * saddle::saddle_analytic(params).z_s
    }

    pub(crate) fn stepper_options(&self) -> StepperOptions {
        StepperOptions { rtol: self.rel_tol, atol: self.abs_tol, ..StepperOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeLabel {
    DoubleEscape,
    SingleEscape,
    SequentialEscape,
    Bound,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectronExit {
    pub time: f64,
    pub position: [f64; 3],
    pub momentum: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub label: OutcomeLabel,
    pub exit_time: f64,
    /// Escape-surface crossing per electron, if it happened.
    pub exits: [Option<ElectronExit>; 2],
    pub energy_drift: f64,
    pub failure_reason: Option<String>,
}

/// First crossing of `x = x_exit` by the reaction-coordinate projection,
/// evaluated on the full trajectory in the saddle's linear normal-mode frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorCheck {
    pub origin: Vector6<f64>,
    pub reaction: Vector6<f64>,
    pub desymmetrization: Vector6<f64>,
    pub x_exit: f64,
}

impl ProjectorCheck {
    fn x(&self, q: &Vector6<f64>) -> f64 {
        (q - self.origin).dot(&self.reaction)
    }

    fn y(&self, q: &Vector6<f64>) -> f64 {
        (q - self.origin).dot(&self.desymmetrization)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectorCrossing {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    /// `|y| < |x|` at the crossing.
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EscapeRecord {
    /// First time each electron crossed the escape surface moving outward.
    pub first_exit: [Option<ElectronExit>; 2],
    /// Whether the electron is beyond the surface at the end of integration.
    pub beyond: [bool; 2],
    /// Time of the last local minimum of `|r_i|` below `z_s`.
    pub last_return: [Option<f64>; 2],
    pub end_time: f64,
    pub max_energy_drift: f64,
    pub failure: Option<String>,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial: PhaseState,
    pub initial_energy: f64,
    pub samples: Vec<(f64, PhaseState, f64)>,
    pub final_state: PhaseState,
    pub record: EscapeRecord,
    pub projector: Option<ProjectorCrossing>,
    pub outcome: TrajectoryOutcome,
}

pub(crate) struct FullSystem<'a> {
    pub(crate) params: &'a SystemParams,
}

impl OdeSystem<12> for FullSystem<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 12], dy: &mut [f64; 12]) {
        let q = Vector6::from_column_slice(&y[..6]);
        let g = model::grad_potential_full_unchecked(&q, self.params);
        dy[..6].copy_from_slice(&y[6..]);
        for i in 0..6 {
            dy[6 + i] = -g[i];
        }
    }
}

struct SymmetricSystem<'a> {
    params: &'a SystemParams,
}

impl OdeSystem<4> for SymmetricSystem<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 4], dy: &mut [f64; 4]) {
        let (dr, dz) = model::grad_potential_symmetric(y[0], y[1], self.params).unwrap_or((f64::NAN, f64::NAN));
        dy[0] = 0.5 * y[2];
        dy[1] = 0.5 * y[3];
        dy[2] = -dr;
        dy[3] = -dz;
    }
}

fn validate_start(state: &PhaseState, params: &SystemParams, controls: &IntegratorControls) -> Result<f64> {
    controls.validate()?;
    if !state.p.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("non-finite initial momenta".into()));
    }
    let energy = model::hamiltonian_full(state, params)?;
    if state.min_separation() < controls.min_separation {
        return Err(Error::Domain(format!(
            "initial state violates the minimum separation {}",
            controls.min_separation
        )));
    }
    Ok(energy)
}

fn relative_drift(e: f64, e0: f64) -> f64 {
    (e - e0).abs() / e0.abs().max(f64::MIN_POSITIVE)
}

/// Integrate until both electrons escape or `max_time`, then classify.
pub fn integrate(state0: &PhaseState, params: &SystemParams, controls: &IntegratorControls) -> Result<Trajectory> {
    integrate_monitored(state0, params, controls, None)
}

/// As [`integrate`], additionally recording the first crossing of the
/// projector surface.
pub fn integrate_monitored(
    state0: &PhaseState,
    params: &SystemParams,
    controls: &IntegratorControls,
    projector: Option<&ProjectorCheck>,
) -> Result<Trajectory> {
    let e0 = validate_start(state0, params, controls)?;
    let t_max = controls.resolved_max_time(params);
    let z_cut = controls.z_cut(params);
    let z_s = saddle::saddle_analytic(params).z_s;
    let system = FullSystem { params };
    let mut stepper = Stepper::new(&system, 0.0, state0.to_array(), controls.stepper_options());

    let mut samples = Vec::new();
    let mut next_sample = 0.0;
    if controls.sampling != Sampling::None {
        samples.push((0.0, *state0, e0));
        if let Sampling::Uniform(dt) = controls.sampling {
            next_sample = dt;
        }
    }

    let mut record = EscapeRecord::default();
    let mut crossing: Option<ProjectorCrossing> = None;
    let mut radial_velocity = [0.0; 2];
    for (i, rv) in radial_velocity.iter_mut().enumerate() {
        *rv = state0.electron_position(i).dot(&state0.electron_momentum(i));
        record.beyond[i] = state0.q[3 * i + 2] > z_cut && state0.p[3 * i + 2] > 0.0;
    }

    loop {
        let seg = match stepper.step(t_max) {
            Ok(seg) => seg,
            Err(e) => {
                record.failure = Some(format!("integrator: {e}"));
                break;
            }
        };
        record.steps += 1;
        let state = PhaseState::from_slice(&seg.y1);
        record.end_time = seg.t1;

        if state.min_separation() < controls.min_separation {
            record.failure = Some(format!("near collision at t = {:.6}", seg.t1));
            break;
        }
        let energy = model::hamiltonian_full_unchecked(&state, params);
        let drift = relative_drift(energy, e0);
        record.max_energy_drift = record.max_energy_drift.max(drift);
        if !(drift <= controls.energy_drift_limit) {
            record.failure = Some(format!("energy drift {drift:.3e} exceeds limit at t = {:.6}", seg.t1));
            break;
        }

        match controls.sampling {
            Sampling::None => {}
            Sampling::EveryStep => samples.push((seg.t1, state, energy)),
            Sampling::Uniform(dt) => {
                while next_sample <= seg.t1 {
                    let s = PhaseState::from_slice(&seg.eval(next_sample));
                    let e = model::hamiltonian_full_unchecked(&s, params);
                    samples.push((next_sample, s, e));
                    next_sample += dt;
                }
            }
        }

        if let (Some(check), None) = (projector, crossing) {
            let q0 = Vector6::from_column_slice(&seg.y0[..6]);
            let q1 = Vector6::from_column_slice(&seg.y1[..6]);
            if check.x(&q0) < check.x_exit && check.x(&q1) >= check.x_exit {
                let t = seg.find_root(|y| check.x(&Vector6::from_column_slice(&y[..6])) - check.x_exit);
                let q = Vector6::from_column_slice(&seg.eval(t)[..6]);
                let y = check.y(&q);
                crossing = Some(ProjectorCrossing { time: t, x: check.x_exit, y, satisfied: y.abs() < check.x_exit.abs() });
            }
        }

        for i in 0..2 {
            update_escape(&seg, &state, i, z_cut, z_s, &mut radial_velocity[i], &mut record);
        }
        if record.beyond[0] && record.beyond[1] {
            break;
        }
        if seg.t1 >= t_max {
            break;
        }
    }

    let final_state = PhaseState::from_slice(stepper.state());
    if samples.last().map(|s| s.0) != Some(record.end_time) {
        let e = model::hamiltonian_full_unchecked(&final_state, params);
        samples.push((record.end_time, final_state, e));
    }
    let outcome = classify_record(&record, &final_state, params, controls);
    Ok(Trajectory {
        initial: *state0,
        initial_energy: e0,
        samples,
        final_state,
        record,
        projector: crossing,
        outcome,
    })
}

fn update_escape(
    seg: &Segment<12>,
    state: &PhaseState,
    i: usize,
    z_cut: f64,
    z_s: f64,
    radial_velocity: &mut f64,
    record: &mut EscapeRecord,
) {
    let zi = 3 * i + 2;
    let now_beyond = state.q[zi] > z_cut && state.p[zi] > 0.0;
    if now_beyond && !record.beyond[i] && record.first_exit[i].is_none() {
        let t = if seg.y0[zi] <= z_cut { seg.find_root(|y| y[zi] - z_cut) } else { seg.t1 };
        let y = seg.eval(t);
        record.first_exit[i] = Some(ElectronExit {
            time: t,
            position: [y[3 * i], y[3 * i + 1], y[3 * i + 2]],
            momentum: [y[6 + 3 * i], y[6 + 3 * i + 1], y[6 + 3 * i + 2]],
        });
    }
    record.beyond[i] = now_beyond;

    let rv = state.electron_position(i).dot(&state.electron_momentum(i));
    if *radial_velocity < 0.0 && rv >= 0.0 && state.electron_position(i).norm() < z_s {
        record.last_return[i] = Some(seg.t1);
    }
    *radial_velocity = rv;
}

/// Single-particle energy of electron `i`: kinetic, nuclear and field terms,
/// ignoring the repulsion.
pub fn single_particle_energy(state: &PhaseState, i: usize, params: &SystemParams) -> f64 {
    let r = state.electron_position(i);
    let p = state.electron_momentum(i);
    0.5 * p.norm_squared() - params.charge() / r.norm() - params.field() * r[2]
}

/// Classify a finished trajectory.
pub fn classify(traj: &Trajectory, params: &SystemParams, controls: &IntegratorControls) -> TrajectoryOutcome {
    classify_record(&traj.record, &traj.final_state, params, controls)
}

fn classify_record(
    record: &EscapeRecord,
    final_state: &PhaseState,
    params: &SystemParams,
    controls: &IntegratorControls,
) -> TrajectoryOutcome {
    let exits = record.first_exit;
    let base = |label, exit_time| TrajectoryOutcome {
        label,
        exit_time,
        exits,
        energy_drift: record.max_energy_drift,
        failure_reason: None,
    };
    if let Some(reason) = &record.failure {
        let mut o = base(OutcomeLabel::Failure, record.end_time);
        o.failure_reason = Some(reason.clone());
        return o;
    }
    if record.max_energy_drift > controls.energy_drift_limit {
        let mut o = base(OutcomeLabel::Failure, record.end_time);
        o.failure_reason = Some("energy drift above limit".into());
        return o;
    }
    match (record.beyond[0], record.beyond[1]) {
        (true, true) => {
            let t0 = exits[0].map_or(0.0, |e| e.time);
            let t1 = exits[1].map_or(0.0, |e| e.time);
            let later = if t0 >= t1 { 0 } else { 1 };
            let later_exit = t0.max(t1);
            let returned = record.last_return[later].is_some_and(|t| t <= later_exit);
            let label = if returned { OutcomeLabel::SequentialEscape } else { OutcomeLabel::DoubleEscape };
            base(label, later_exit)
        }
        (true, false) | (false, true) => {
            let out = if record.beyond[0] { 0 } else { 1 };
            let other = 1 - out;
            let exit_time = exits[out].map_or(record.end_time, |e| e.time);
            if single_particle_energy(final_state, other, params) < 0.0 {
                base(OutcomeLabel::SingleEscape, exit_time)
            } else {
                base(OutcomeLabel::Bound, record.end_time)
            }
        }
        (false, false) => base(OutcomeLabel::Bound, record.end_time),
    }
}

/// Integrate for exactly `duration` with no escape stop. Returns the final
/// state and the maximum relative energy drift.
pub fn propagate(
    state0: &PhaseState,
    params: &SystemParams,
    controls: &IntegratorControls,
    duration: f64,
) -> Result<(PhaseState, f64)> {
    let e0 = validate_start(state0, params, controls)?;
    let system = FullSystem { params };
    let mut stepper = Stepper::new(&system, 0.0, state0.to_array(), controls.stepper_options());
    let mut drift: f64 = 0.0;
    while stepper.time() < duration {
        let seg = stepper.step(duration)?;
        let s = PhaseState::from_slice(&seg.y1);
        if s.min_separation() < controls.min_separation {
            return Err(Error::Domain(format!("near collision at t = {}", seg.t1)));
        }
        drift = drift.max(relative_drift(model::hamiltonian_full_unchecked(&s, params), e0));
    }
    Ok((PhaseState::from_slice(stepper.state()), drift))
}

/// Dense samples of a full trajectory at the requested (increasing) times.
pub fn propagate_sampled(
    state0: &PhaseState,
    params: &SystemParams,
    controls: &IntegratorControls,
    times: &[f64],
) -> Result<Vec<PhaseState>> {
    validate_start(state0, params, controls)?;
    let system = FullSystem { params };
    let mut stepper = Stepper::new(&system, 0.0, state0.to_array(), controls.stepper_options());
    let mut out = Vec::with_capacity(times.len());
    let mut k = 0;
    while k < times.len() && times[k] <= 0.0 {
        out.push(*state0);
        k += 1;
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    while k < times.len() {
        let seg = stepper.step(t_end)?;
        while k < times.len() && times[k] <= seg.t1 {
            out.push(PhaseState::from_slice(&seg.eval(times[k])));
            k += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SymmetricTrajectory {
    pub samples: Vec<(f64, SymmetricState)>,
    pub final_state: SymmetricState,
    pub energy_drift: f64,
    pub label: OutcomeLabel,
}

/// Integrate in the reduced symmetric subspace. Both electrons move together,
/// so the only outcomes are `DoubleEscape`, `Bound` and `Failure`.
pub fn integrate_symmetric(
    state0: &SymmetricState,
    params: &SystemParams,
    controls: &IntegratorControls,
) -> Result<SymmetricTrajectory> {
    controls.validate()?;
    let e0 = model::hamiltonian_symmetric(state0, params)?;
    let t_max = controls.resolved_max_time(params);
    let z_cut = controls.z_cut(params);
    let system = SymmetricSystem { params };
    let y0 = [state0.r, state0.z, state0.p_r, state0.p_z];
    let mut stepper = Stepper::new(&system, 0.0, y0, controls.stepper_options());
    let to_state = |y: &[f64; 4]| SymmetricState { r: y[0], z: y[1], p_r: y[2], p_z: y[3] };
    let mut samples = vec![(0.0, *state0)];
    let mut drift: f64 = 0.0;
    let mut next_sample = match controls.sampling {
        Sampling::Uniform(dt) => dt,
        _ => f64::INFINITY,
    };
    let mut label = OutcomeLabel::Bound;
    while stepper.time() < t_max {
        let seg = match stepper.step(t_max) {
            Ok(seg) => seg,
            Err(_) => {
                label = OutcomeLabel::Failure;
                break;
            }
        };
        let s = to_state(&seg.y1);
        // pair separation is 2r, nucleus distance sqrt(r^2 + z^2)
        if 2.0 * s.r < controls.min_separation || s.r.hypot(s.z) < controls.min_separation {
            label = OutcomeLabel::Failure;
            break;
        }
        let e = model::hamiltonian_symmetric(&s, params)?;
        drift = drift.max(relative_drift(e, e0));
        if drift > controls.energy_drift_limit {
            label = OutcomeLabel::Failure;
            break;
        }
        match controls.sampling {
            Sampling::EveryStep => samples.push((seg.t1, s)),
            Sampling::Uniform(dt) => {
                while next_sample <= seg.t1 {
                    samples.push((next_sample, to_state(&seg.eval(next_sample))));
                    next_sample += dt;
                }
            }
            Sampling::None => {}
        }
        if s.z > z_cut && s.p_z > 0.0 {
            label = OutcomeLabel::DoubleEscape;
            break;
        }
    }
    let final_state = to_state(stepper.state());
    Ok(SymmetricTrajectory { samples, final_state, energy_drift: drift, label })
}
