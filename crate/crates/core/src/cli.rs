//! Batch front end: run configuration, the five commands and their output
//! files, and the run manifest written next to them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{self, IntegratorControls, Sampling, TrajectoryOutcome};
use crate::error::{Error, Result};
use crate::model::{self, PhaseState, SystemParams};
use crate::saddle::{self, SpectrumSource};
use crate::threshold::{run_scan, ScanSettings, ThresholdScan};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Saddle,
    Table,
    Contour,
    Trajectory,
    ThresholdScan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Saddle => "saddle",
            Command::Table => "table",
            Command::Contour => "contour",
            Command::Trajectory => "trajectory",
            Command::ThresholdScan => "threshold-scan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Grid for the `contour` command, in bohr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContourSettings {
    pub r_range: (f64, f64),
    pub z_range: (f64, f64),
    pub n_r: usize,
    pub n_z: usize,
    /// Points on the saddle locus ray.
    pub locus_points: usize,
}

impl Default for ContourSettings {
    fn default() -> Self {
        ContourSettings { r_range: (0.05, 2.0), z_range: (-1.0, 3.0), n_r: 80, n_z: 160, locus_points: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(rename = "Z")]
    pub charge: f64,
    /// Field in atomic units. Ignored when `field_kv_cm` is set.
    #[serde(rename = "F")]
    pub field: f64,
    #[serde(rename = "F_kv_cm")]
    pub field_kv_cm: Option<f64>,
    /// Ion charges for `table`.
    pub charges: Vec<f64>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub format: OutputFormat,
    pub integrator: IntegratorControls,
    pub scan: ScanSettings,
    pub contour: ContourSettings,
    /// `x1 y1 z1 x2 y2 z2 px1 py1 pz1 px2 py2 pz2`; the saddle at rest when absent.
    pub initial_state: Option<[f64; 12]>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            charge: 2.0,
            field: 1.0,
            field_kv_cm: None,
            charges: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            seed: 0,
            workers: None,
            out: PathBuf::from("out"),
            format: OutputFormat::Csv,
            integrator: IntegratorControls::default(),
            scan: ScanSettings::default(),
            contour: ContourSettings::default(),
            initial_state: None,
        }
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

impl RunConfig {
    /// Reads a JSON config. A run manifest is accepted too; its resolved
    /// config is used.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let value = match value.get("config") {
            Some(inner) if value.get("tool").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn field_au(&self) -> f64 {
        self.field_kv_cm.map_or(self.field, model::field_from_kv_per_cm)
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.charge, self.field_au()).map_err(config_err)
    }

    pub fn validate(&self, command: Command) -> Result<()> {
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        match command {
            Command::Table => {
                if self.charges.is_empty() {
                    return Err(Error::Config("table needs at least one Z".into()));
                }
                if let Some(z) = self.charges.iter().find(|z| !(**z >= 1.0 && z.is_finite())) {
                    return Err(Error::Config(format!("ion charge Z must be >= 1, got {z}")));
                }
                Ok(())
            }
            Command::Saddle => self.params().map(|_| ()),
            Command::Contour => {
                self.params()?;
                let c = &self.contour;
                if c.n_r < 2 || c.n_z < 2 || c.locus_points < 2 {
                    return Err(Error::Config(format!(
                        "contour needs n_r, n_z, locus_points >= 2, got {}, {}, {}",
                        c.n_r, c.n_z, c.locus_points
                    )));
                }
                if !(c.r_range.0 > 0.0 && c.r_range.1 > c.r_range.0) || !(c.z_range.1 > c.z_range.0) {
                    return Err(Error::Config(format!(
                        "contour ranges must be increasing with r > 0, got r {:?}, z {:?}",
                        c.r_range, c.z_range
                    )));
                }
                Ok(())
            }
            Command::Trajectory => {
                self.params()?;
                self.integrator.validate()?;
                if let Some(s) = &self.initial_state {
                    if !s.iter().all(|v| v.is_finite()) {
                        return Err(Error::Config("initial_state must be finite".into()));
                    }
                }
                Ok(())
            }
            Command::ThresholdScan => {
                self.params()?;
                self.scan.validate()
            }
        }
    }
}

/// Exit status for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub duration_seconds: f64,
    pub outputs: Vec<OutputDigest>,
    /// Trajectory classification, for `trajectory`.
    pub outcome: Option<TrajectoryOutcome>,
    /// Grid points that failed, for `threshold-scan`.
    pub gaps: Vec<crate::threshold::ScanGap>,
    pub error: Option<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Files and notes produced by one command.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub summary: String,
    pub outcome: Option<TrajectoryOutcome>,
    pub gaps: Vec<crate::threshold::ScanGap>,
    /// Set when outputs were written but the run did not complete.
    pub error: Option<Error>,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Error::Io(e.to_string()))
}

/// Runs `command`, writes its files and the manifest into `config.out`.
/// Returns the manifest and the run output.
pub fn execute(command: Command, config: &RunConfig) -> Result<(RunManifest, RunOutput)> {
    config.validate(command)?;
    let start = Instant::now();
    let work = || match command {
        Command::Saddle => cmd_saddle(config),
        Command::Table => cmd_table(config),
        Command::Contour => cmd_contour(config),
        Command::Trajectory => cmd_trajectory(config),
        Command::ThresholdScan => cmd_threshold_scan(config),
    };
    let output = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(work)?,
        None => work()?,
    };

    fs::create_dir_all(&config.out)?;
    let mut outputs = Vec::new();
    for (name, body) in &output.files {
        fs::write(config.out.join(name), body)?;
        outputs.push(OutputDigest { path: name.clone(), sha256: sha256_hex(body.as_bytes()) });
    }
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        command,
        config: config.clone(),
        duration_seconds: start.elapsed().as_secs_f64(),
        outputs,
        outcome: output.outcome.clone(),
        gaps: output.gaps.clone(),
        error: output.error.as_ref().map(|e| e.to_string()),
    };
    fs::write(config.out.join(MANIFEST_FILE), json(&manifest)?)?;
    Ok((manifest, output))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    #[serde(rename = "Z")]
    pub charge: f64,
    #[serde(rename = "F")]
    pub field: f64,
    pub field_kv_cm: f64,
    pub r_s: f64,
    pub z_s: f64,
    pub v_s_hartree: f64,
    pub v_s_ev: f64,
    pub mu2: f64,
    pub nu2: f64,
    pub omega: [f64; 3],
    pub alpha: f64,
    pub wannier_alpha: f64,
    pub locus_angle_deg: f64,
    /// Hessian eigenvalues at the saddle, ascending.
    pub eigenvalues: [f64; 6],
}

pub fn saddle_report(params: &SystemParams) -> Result<SaddleReport> {
    let info = saddle::saddle_analytic(params);
    let spectrum = saddle::stability_spectrum(params, SpectrumSource::NumericHessian)?;
    let mut eigenvalues = spectrum.eigenvalues;
    eigenvalues.sort_by(f64::total_cmp);
    Ok(SaddleReport {
        charge: params.charge(),
        field: params.field(),
        field_kv_cm: model::field_to_kv_per_cm(params.field()),
        r_s: info.r_s,
        z_s: info.z_s,
        v_s_hartree: info.v_s,
        v_s_ev: model::hartree_to_ev(info.v_s),
        mu2: saddle::mu_squared(params),
        nu2: saddle::nu_squared(params),
        omega: spectrum.omega,
        alpha: saddle::threshold_exponent(params),
        wannier_alpha: saddle::wannier_exponent(params.charge())?,
        locus_angle_deg: info.locus_angle_deg(),
        eigenvalues,
    })
}

fn cmd_saddle(config: &RunConfig) -> Result<RunOutput> {
    let r = saddle_report(&config.params()?)?;
    let summary = format!(
        "V_s = {} hartree ({} eV), alpha = {:.6}, mu^2 = {}, nu^2 = {}",
        r.v_s_hartree, r.v_s_ev, r.alpha, r.mu2, r.nu2
    );
    let file = match config.format {
        OutputFormat::Json => ("saddle.json".to_string(), json(&r)?),
        OutputFormat::Csv => {
            let mut s = String::from("quantity,value\n");
            let rows: [(&str, f64); 16] = [
                ("Z", r.charge),
                ("F", r.field),
                ("F_kv_cm", r.field_kv_cm),
                ("r_s", r.r_s),
                ("z_s", r.z_s),
                ("V_s_hartree", r.v_s_hartree),
                ("V_s_eV", r.v_s_ev),
                ("mu2", r.mu2),
                ("nu2", r.nu2),
                ("omega1", r.omega[0]),
                ("omega2", r.omega[1]),
                ("omega3", r.omega[2]),
                ("alpha", r.alpha),
                ("wannier_alpha", r.wannier_alpha),
                ("locus_angle_deg", r.locus_angle_deg),
                ("lambda_zero", r.eigenvalues[2]),
            ];
            for (k, v) in rows {
                let _ = writeln!(s, "{k},{}", num(v));
            }
            ("saddle.csv".to_string(), s)
        }
    };
    Ok(RunOutput { files: vec![file], summary, ..Default::default() })
}

pub fn table_csv(records: &[saddle::ExponentRecord]) -> String {
    let mut s = String::from("Z,alpha,wannier_alpha\n");
    for r in records {
        let _ = writeln!(s, "{},{},{}", num(r.charge), num(r.alpha), num(r.wannier_alpha));
    }
    s
}

fn cmd_table(config: &RunConfig) -> Result<RunOutput> {
    let records = saddle::exponent_table(&config.charges).map_err(config_err)?;
    let mut summary = String::from("Z      alpha   wannier");
    for r in &records {
        let _ = write!(summary, "\n{:<6} {:.4}  {:.4}", r.charge, r.alpha, r.wannier_alpha);
    }
    let file = match config.format {
        OutputFormat::Csv => ("table.csv".to_string(), table_csv(&records)),
        OutputFormat::Json => ("table.json".to_string(), json(&records)?),
    };
    Ok(RunOutput { files: vec![file], summary, ..Default::default() })
}

/// Points `(r, z)` on the ray through the origin and the saddle, out to the
/// edge of the contour box.
pub fn locus_points(params: &SystemParams, settings: &ContourSettings) -> Vec<(f64, f64)> {
    let ratio = saddle::saddle_analytic(params).locus_ratio;
    let z_max = settings.z_range.1.min(settings.r_range.1 / ratio).max(0.0);
    let n = settings.locus_points;
    (0..n)
        .map(|i| {
            let z = z_max * i as f64 / (n - 1) as f64;
            (ratio * z, z)
        })
        .collect()
}

fn cmd_contour(config: &RunConfig) -> Result<RunOutput> {
    let params = config.params()?;
    let c = &config.contour;
    let grid = model::contour_grid(&params, c.r_range, c.z_range, c.n_r, c.n_z).map_err(config_err)?;
    let locus = locus_points(&params, c);
    let summary = match grid.discrete_saddle() {
        Some((r, z)) => format!("{}x{} grid, discrete saddle near r = {r}, z = {z}", c.n_r, c.n_z),
        None => format!("{}x{} grid, no saddle inside the box", c.n_r, c.n_z),
    };
    let files = match config.format {
        OutputFormat::Csv => {
            let mut g = String::from("r,z,V\n");
            for (iz, row) in grid.values.iter().enumerate() {
                for (ir, v) in row.iter().enumerate() {
                    let _ = writeln!(g, "{},{},{}", num(grid.r_axis[ir]), num(grid.z_axis[iz]), num(*v));
                }
            }
            let mut l = String::from("r,z\n");
            for (r, z) in &locus {
                let _ = writeln!(l, "{},{}", num(*r), num(*z));
            }
            vec![("contour.csv".to_string(), g), ("locus.csv".to_string(), l)]
        }
        OutputFormat::Json => vec![("contour.json".to_string(), json(&grid)?), ("locus.json".to_string(), json(&locus)?)],
    };
    Ok(RunOutput { files, summary, ..Default::default() })
}

fn cmd_trajectory(config: &RunConfig) -> Result<RunOutput> {
    let params = config.params()?;
    let state = match config.initial_state {
        Some(s) => PhaseState::from_slice(&s),
        None => PhaseState::new(saddle::saddle_analytic(&params).config(), Default::default()),
    };
    let mut controls = config.integrator.clone();
    if controls.sampling == Sampling::None {
        controls.sampling = Sampling::EveryStep;
    }
    let traj = dynamics::integrate(&state, &params, &controls).map_err(config_err)?;
    let o = &traj.outcome;
    let summary = format!(
        "{:?} at t = {} (max drift {:.3e}){}",
        o.label,
        o.exit_time,
        o.energy_drift,
        o.failure_reason.as_deref().map(|r| format!(": {r}")).unwrap_or_default()
    );
    let file = match config.format {
        OutputFormat::Csv => {
            let mut s = String::from("t,x1,y1,z1,x2,y2,z2,px1,py1,pz1,px2,py2,pz2,H\n");
            for (t, st, h) in &traj.samples {
                let _ = write!(s, "{}", num(*t));
                for v in st.to_array() {
                    let _ = write!(s, ",{}", num(v));
                }
                let _ = writeln!(s, ",{}", num(*h));
            }
            ("trajectory.csv".to_string(), s)
        }
        OutputFormat::Json => {
            let rows: Vec<(f64, [f64; 12], f64)> = traj.samples.iter().map(|(t, s, h)| (*t, s.to_array(), *h)).collect();
            ("trajectory.json".to_string(), json(&rows)?)
        }
    };
    Ok(RunOutput { files: vec![file], summary, outcome: Some(traj.outcome), ..Default::default() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub alpha_fit: Option<f64>,
    pub alpha_stderr: Option<f64>,
    pub window: (f64, f64),
    pub method: crate::threshold::ScanMethod,
    pub seed: u64,
    pub alpha_theory: f64,
    pub fit_error: Option<String>,
    pub scan: ThresholdScan,
}

pub fn scan_csv(scan: &ThresholdScan) -> String {
    let mut s = String::from("epsilon,width_or_fraction,stderr\n");
    for m in &scan.measurements {
        let _ = writeln!(s, "{},{},{}", num(m.epsilon), num(m.value), num(m.stderr));
    }
    s
}

fn cmd_threshold_scan(config: &RunConfig) -> Result<RunOutput> {
    let params = config.params()?;
    let settings = ScanSettings { seed: config.seed, ..config.scan.clone() };
    let scan = run_scan(&params, &settings)?;
    let report = FitReport {
        alpha_fit: scan.alpha_fit,
        alpha_stderr: scan.alpha_stderr,
        window: scan.fit_window,
        method: scan.method,
        seed: scan.seed,
        alpha_theory: scan.alpha_theory,
        fit_error: scan.fit_error.clone(),
        scan: scan.clone(),
    };
    let summary = match (scan.alpha_fit, scan.alpha_stderr) {
        (Some(a), Some(e)) => format!(
            "alpha_fit = {a:.5} +- {e:.5} (nu/mu = {:.5}), {} points, {} gaps, {} trajectories",
            scan.alpha_theory,
            scan.measurements.len(),
            scan.gaps.len(),
            scan.trajectories
        ),
        _ => format!("no fit: {}", scan.fit_error.as_deref().unwrap_or("unknown")),
    };
    let measurements = match config.format {
        OutputFormat::Csv => ("scan.csv".to_string(), scan_csv(&scan)),
        OutputFormat::Json => ("scan.json".to_string(), json(&scan.measurements)?),
    };
    let error = scan.fit_error.clone().map(|m| Error::Classification(format!("threshold fit failed: {m}")));
    Ok(RunOutput {
        files: vec![measurements, ("fit.json".to_string(), json(&report)?)],
        summary,
        gaps: scan.gaps,
        error,
        ..Default::default()
    })
}
