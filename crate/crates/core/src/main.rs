use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stark_threshold::cli::{self, Command, OutputFormat, RunConfig};
use stark_threshold::threshold::ScanMethod;
use stark_threshold::Error;

/// Two-electron escape over the field-induced saddle: saddle analysis,
/// exponent tables, potential contours, single trajectories and threshold
/// scans. Every run writes its outputs plus manifest.json into --out.
#[derive(Debug, Parser)]
#[command(name = "stark-threshold", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Saddle position, energy (hartree and eV), stability exponents and alpha.
    ///
    /// CSV: quantity,value rows (Z, F, F_kv_cm, r_s, z_s, V_s_hartree,
    /// V_s_eV, mu2, nu2, omega1..3, alpha, wannier_alpha, locus_angle_deg,
    /// lambda_zero). JSON: one object.
    Saddle(Flags),
    /// Threshold and zero-field exponents for a list of charges (--Z 1,2,3).
    ///
    /// CSV columns: Z,alpha,wannier_alpha, one row per requested Z in order.
    Table(Flags),
    /// Symmetric-subspace potential on an (r, z) grid plus the saddle locus.
    ///
    /// contour.csv columns: r,z,V (bohr, bohr, hartree). locus.csv columns:
    /// r,z along the ray through the saddle.
    Contour(Flags),
    /// Integrate one trajectory and classify it.
    ///
    /// trajectory.csv columns: t,x1,y1,z1,x2,y2,z2,px1,py1,pz1,px2,py2,pz2,H.
    /// The outcome goes to stdout and the manifest.
    Trajectory(Flags),
    /// Width or flux over an excess-energy grid and the fitted exponent.
    ///
    /// scan.csv columns: epsilon,width_or_fraction,stderr (epsilon in
    /// hartree). fit.json: alpha_fit, alpha_stderr, window, method, seed and
    /// the full scan.
    ThresholdScan(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// JSON config file or an earlier manifest.json; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ion charge; a comma-separated list for `table`.
    #[arg(long = "Z", value_delimiter = ',', allow_negative_numbers = true)]
    z: Vec<f64>,
    /// Field strength in atomic units.
    #[arg(long = "F", allow_negative_numbers = true, conflicts_with = "f_kv_cm")]
    f: Option<f64>,
    /// Field strength in kV/cm.
    #[arg(long = "F-kv-cm", allow_negative_numbers = true)]
    f_kv_cm: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for ensembles.
    #[arg(long, env = "WSL_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// harmonic, bisection or monte-carlo.
    #[arg(long)]
    method: Option<String>,
    /// Lower end of the grid as a fraction of |V_s|.
    #[arg(long)]
    eps_min: Option<f64>,
    /// Upper end of the grid as a fraction of |V_s|.
    #[arg(long)]
    eps_max: Option<f64>,
    #[arg(long)]
    points_per_decade: Option<u32>,
    /// Monte Carlo samples per grid point.
    #[arg(long)]
    samples: Option<usize>,
    /// Initial phase point for `trajectory`: 12 comma-separated numbers.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    state: Vec<f64>,
}

impl Flags {
    fn resolve(&self, command: Command) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if !self.z.is_empty() {
            if command == Command::Table {
                c.charges = self.z.clone();
            } else if let [z] = self.z[..] {
                c.charge = z;
            } else {
                return Err(Error::Config(format!("{} takes a single --Z", command.name())));
            }
        }
        if let Some(f) = self.f {
            c.field = f;
            c.field_kv_cm = None;
        }
        if self.f_kv_cm.is_some() {
            c.field_kv_cm = self.f_kv_cm;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if let Some(f) = &self.format {
            c.format = if f == "json" { OutputFormat::Json } else { OutputFormat::Csv };
        }
        if let Some(m) = &self.method {
            c.scan.method = m.parse::<ScanMethod>()?;
        }
        if let Some(v) = self.eps_min {
            c.scan.eps_min = v;
        }
        if let Some(v) = self.eps_max {
            c.scan.eps_max = v;
        }
        if let Some(v) = self.points_per_decade {
            c.scan.points_per_decade = v;
        }
        if let Some(v) = self.samples {
            c.scan.samples = v;
        }
        if !self.state.is_empty() {
            let s: [f64; 12] = self.state.as_slice().try_into().map_err(|_| {
                Error::Config(format!("--state needs 12 numbers, got {}", self.state.len()))
            })?;
            c.initial_state = Some(s);
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::Saddle(f) => (Command::Saddle, f),
        Sub::Table(f) => (Command::Table, f),
        Sub::Contour(f) => (Command::Contour, f),
        Sub::Trajectory(f) => (Command::Trajectory, f),
        Sub::ThresholdScan(f) => (Command::ThresholdScan, f),
    };
    let run = flags.resolve(command).and_then(|c| cli::execute(command, &c));
    match run {
        Ok((manifest, output)) => {
            println!("{}", output.summary);
            for o in &manifest.outputs {
                println!("wrote {}", manifest.config.out.join(&o.path).display());
            }
            match output.error {
                Some(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(cli::exit_code(&e) as u8)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
