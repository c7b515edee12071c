//! Command-line front end: JSON config in, CSV/JSON data files out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::forward::{
    check_closed_form_source, check_mixed_reciprocity, convergence_study, exact_pointsource_farfield,
    relative_error, solve_forward, ForwardConfig, ForwardSolver,
};
use crate::geometry::{build_curves, SurfaceProfile};
use crate::inverse::{
    direction_from_angle, profile_errors, profile_grid, reconstruct, synthesize_measurements,
    MeasurementSet, ReconstructionSettings, SynthesisSetup, Trajectory,
};
use crate::kernels::WaveContext;
use crate::nystrom::Incidence;
use crate::{Error, Point, Result};

#[derive(Debug, Parser)]
#[command(name = "roughscat", version, about = "Scattering by a locally rough sound-hard plane")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One forward solve: far field, coarse density, summary.
    Forward(CommonArgs),
    /// Point-source error against the closed form over a list of n_pan.
    Convergence(CommonArgs),
    /// Mixed reciprocity discrepancies over a grid of sources and directions.
    Reciprocity(CommonArgs),
    /// Synthetic noisy far-field measurements.
    Synth(CommonArgs),
    /// Multi-frequency profile reconstruction.
    Reconstruct(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// RNG seed; overrides the config value.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Only log errors.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Forward,
    Convergence,
    Reciprocity,
    Synth,
    Reconstruct,
}

/// Fully resolved invocation.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub command: CommandKind,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl From<Cli> for RunSpec {
    fn from(cli: Cli) -> Self {
        let (command, a) = match cli.command {
            Command::Forward(a) => (CommandKind::Forward, a),
            Command::Convergence(a) => (CommandKind::Convergence, a),
            Command::Reciprocity(a) => (CommandKind::Reciprocity, a),
            Command::Synth(a) => (CommandKind::Synth, a),
            Command::Reconstruct(a) => (CommandKind::Reconstruct, a),
        };
        RunSpec {
            command,
            config: a.config,
            out: a.out,
            seed: a.seed,
            quiet: a.quiet,
        }
    }
}

/// `n_pan` sweep on top of a point-source forward config.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub forward: ForwardConfig,
    pub n_pans: Vec<usize>,
}

/// Reciprocity grid: every source `y` against every direction angle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReciprocityConfig {
    pub profile: SurfaceProfile,
    #[serde(rename = "R")]
    pub radius: f64,
    pub aux_center: Point,
    pub aux_radius: f64,
    pub k: f64,
    #[serde(default = "one")]
    pub rho_imp: f64,
    pub n_pan: usize,
    #[serde(default = "thirty")]
    pub n_sub: usize,
    pub sources: Vec<Point>,
    /// Angles of `d` on the upper half circle.
    pub direction_angles: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

fn thirty() -> usize {
    30
}

/// Synthetic data plus reconstruction settings for one inverse experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InverseExperiment {
    pub truth: SurfaceProfile,
    pub synthesis: SynthesisSetup,
    pub wave_numbers: Vec<f64>,
    /// Incident directions `(cos a, sin a)` with `a ∈ (−π, 0)`.
    pub incident_angles: Vec<f64>,
    pub n_f: usize,
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    pub reconstruction: ReconstructionSettings,
    /// Directory holding `measurements.json`/`.csv`, relative to the config
    /// file; synthesized in-process when absent.
    #[serde(default)]
    pub measurements: Option<PathBuf>,
}

impl InverseExperiment {
    pub fn directions(&self) -> Vec<Point> {
        self.incident_angles.iter().map(|&a| direction_from_angle(a)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        build_curves(
            self.truth.clone(),
            self.synthesis.radius,
            self.synthesis.aux_center,
            self.synthesis.aux_radius,
        )?;
        for &k in &self.wave_numbers {
            WaveContext::new(k, self.synthesis.rho_imp)?.check_aux_radius(self.synthesis.aux_radius)?;
        }
        if self.n_f == 0 {
            return Err(Error::Config("n_f must be positive".into()));
        }
        self.reconstruction.validate()?;
        if (self.reconstruction.radius - self.synthesis.radius).abs() > 0.0 {
            return Err(Error::Config(
                "reconstruction and synthesis must use the same R".into(),
            ));
        }
        // shape / hemisphere checks without solving
        MeasurementSet {
            wave_numbers: self.wave_numbers.clone(),
            directions: self.directions(),
            angles: crate::forward::upper_half_angles(self.n_f),
            delta: self.delta,
            values: vec![
                vec![vec![Default::default(); self.n_f]; self.incident_angles.len()];
                self.wave_numbers.len()
            ],
        }
        .validate()
    }

    pub fn synthesize(&self, seed: u64) -> Result<MeasurementSet> {
        synthesize_measurements(
            &self.truth,
            &self.wave_numbers,
            &self.directions(),
            self.n_f,
            self.delta,
            seed,
            &self.synthesis,
        )
    }
}

/// Exit code for an error: 2 for configuration problems, 3 for numerical ones.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Geometry(_) | Error::Json(_) | Error::Io(_) => 2,
        Error::Domain(_) | Error::Numerical(_) | Error::State(_) => 3,
    }
}

/// Parses arguments, runs the command, maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let spec = RunSpec::from(cli);
    let level = if spec.quiet { "error" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match run(&spec) {
        Ok(files) => {
            for f in files {
                info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Files to write, produced fully in memory before anything touches disk.
struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }

    fn write(self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, content) in self.files {
            let p = dir.join(name);
            std::fs::write(&p, content)?;
            written.push(p);
        }
        Ok(written)
    }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn timings(command: &str, seconds: f64) -> String {
    pretty(&json!({ "command": command, "seconds": seconds }))
}

/// Runs one command and returns the written files.
pub fn run(spec: &RunSpec) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let (name, mut out) = match spec.command {
        CommandKind::Forward => ("forward", cmd_forward(spec)?),
        CommandKind::Convergence => ("convergence", cmd_convergence(spec)?),
        CommandKind::Reciprocity => ("reciprocity", cmd_reciprocity(spec)?),
        CommandKind::Synth => ("synth", cmd_synth(spec)?),
        CommandKind::Reconstruct => ("reconstruct", cmd_reconstruct(spec)?),
    };
    // wall-clock data kept apart so every other file is reproducible bit for bit
    out.add("timings.json", timings(name, start.elapsed().as_secs_f64()));
    out.write(&spec.out)
}

fn farfield_csv(angles: &[f64], values: &[num_complex::Complex64]) -> String {
    let mut s = String::from("angle,re,im\n");
    for (a, v) in angles.iter().zip(values) {
        writeln!(s, "{a:.16e},{:.16e},{:.16e}", v.re, v.im).expect("writing to a String");
    }
    s
}

fn cmd_forward(spec: &RunSpec) -> Result<Outputs> {
    let config: ForwardConfig = read_config(&spec.config)?;
    config.validate()?;
    let (density, ff) = solve_forward(&config)?;
    let geometry = config.geometry()?;
    let mesh = crate::geometry::build_coarse_mesh(&geometry, config.n_pan)?;

    let mut dens = String::from("curve,panel,param,x1,x2,weight,re,im\n");
    for (n, v) in mesh.nodes().iter().zip(density.values.iter()) {
        writeln!(
            dens,
            "{:?},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            n.curve, n.panel, n.param, n.pos[0], n.pos[1], n.weight, v.re, v.im
        )
        .expect("writing to a String");
    }
    let closed_form_error = match config.incidence {
        Incidence::PointSource { y } if check_closed_form_source(&geometry, y).is_ok() => {
            let exact = exact_pointsource_farfield(y, config.k, &ff.angles)?;
            Some(relative_error(&ff.values, &exact.values))
        }
        _ => None,
    };
    let summary = json!({
        "command": "forward",
        "k": config.k,
        "n_pan": config.n_pan,
        "n_sub": config.n_sub,
        "variant": config.variant,
        "unknowns": mesh.len(),
        "farfield_max_abs": ff.values.iter().map(|v| v.norm()).fold(0.0, f64::max),
        "relative_error_closed_form": closed_form_error,
    });
    let mut out = Outputs::new();
    out.add("farfield.csv", farfield_csv(&ff.angles, &ff.values));
    out.add("density.csv", dens);
    out.add("summary.json", pretty(&summary));
    Ok(out)
}

fn cmd_convergence(spec: &RunSpec) -> Result<Outputs> {
    let config: ConvergenceConfig = read_config(&spec.config)?;
    config.forward.validate()?;
    let Incidence::PointSource { y } = config.forward.incidence else {
        return Err(Error::Config("convergence study needs point-source incidence".into()));
    };
    check_closed_form_source(&config.forward.geometry()?, y)?;
    if config.n_pans.is_empty() || config.n_pans.iter().any(|&n| n < 4) {
        return Err(Error::Config("n_pans must be a non-empty list of values >= 4".into()));
    }
    let table = convergence_study(&config.forward, &config.n_pans)?;
    let mut csv = String::from("n_pan,relative_error\n");
    for (n, e) in &table {
        writeln!(csv, "{n},{e:.16e}").expect("writing to a String");
    }
    let summary = json!({
        "command": "convergence",
        "k": config.forward.k,
        "n_sub": config.forward.n_sub,
        "final_error": table.last().map(|t| t.1),
    });
    let mut out = Outputs::new();
    out.add("convergence.csv", csv);
    out.add("summary.json", pretty(&summary));
    Ok(out)
}

fn cmd_reciprocity(spec: &RunSpec) -> Result<Outputs> {
    let c: ReciprocityConfig = read_config(&spec.config)?;
    let ctx = WaveContext::new(c.k, c.rho_imp)?;
    let geometry = build_curves(c.profile.clone(), c.radius, c.aux_center, c.aux_radius)?;
    if c.n_pan < 4 {
        return Err(Error::Config(format!("n_pan must be at least 4, got {}", c.n_pan)));
    }
    if c.sources.is_empty() || c.direction_angles.is_empty() {
        return Err(Error::Config("need at least one source and one direction".into()));
    }
    for y in &c.sources {
        if !geometry.is_above_surface(*y) {
            return Err(Error::Config(format!("source {y:?} is not above the surface")));
        }
    }
    if c.direction_angles.iter().any(|a| !(a.sin() > 0.0)) {
        return Err(Error::Config("direction angles must lie in (0, π)".into()));
    }
    let solver = ForwardSolver::new(&geometry, ctx, c.n_pan, c.n_sub)?;
    let mut csv = String::from("y1,y2,d_angle,discrepancy\n");
    let mut worst = 0.0f64;
    for y in &c.sources {
        for &a in &c.direction_angles {
            let e = check_mixed_reciprocity(&solver, *y, [a.cos(), a.sin()])?;
            worst = worst.max(e);
            writeln!(csv, "{:.16e},{:.16e},{a:.16e},{e:.16e}", y[0], y[1]).expect("writing to a String");
        }
    }
    let mut out = Outputs::new();
    out.add("reciprocity.csv", csv);
    out.add(
        "summary.json",
        pretty(&json!({ "command": "reciprocity", "k": c.k, "n_pan": c.n_pan, "max_discrepancy": worst })),
    );
    Ok(out)
}

fn load_experiment(spec: &RunSpec) -> Result<(InverseExperiment, u64)> {
    let exp: InverseExperiment = read_config(&spec.config)?;
    exp.validate()?;
    let seed = spec.seed.unwrap_or(exp.seed);
    Ok((exp, seed))
}

fn measurement_files(set: &MeasurementSet, out: &mut Outputs) -> Result<()> {
    out.add("measurements.json", set.metadata_json()?);
    out.add("measurements.csv", set.to_csv());
    Ok(())
}

fn cmd_synth(spec: &RunSpec) -> Result<Outputs> {
    let (exp, seed) = load_experiment(spec)?;
    let set = exp.synthesize(seed)?;
    let mut out = Outputs::new();
    measurement_files(&set, &mut out)?;
    out.add("truth.json", exp.truth.to_json()? + "\n");
    out.add(
        "summary.json",
        pretty(&json!({
            "command": "synth",
            "seed": seed,
            "wave_numbers": exp.wave_numbers,
            "directions": exp.directions(),
            "n_f": exp.n_f,
            "delta": exp.delta,
        })),
    );
    Ok(out)
}

fn profile_csv(grid: &[f64], truth: &SurfaceProfile, app: &SurfaceProfile) -> String {
    let mut s = String::from("x1,h_true,h_app\n");
    for &x in grid {
        writeln!(s, "{x:.16e},{:.16e},{:.16e}", truth.value(x), app.value(x)).expect("writing to a String");
    }
    s
}

fn cmd_reconstruct(spec: &RunSpec) -> Result<Outputs> {
    let (exp, seed) = load_experiment(spec)?;
    let meas = match &exp.measurements {
        Some(dir) => {
            let base = spec.config.parent().unwrap_or(Path::new("."));
            MeasurementSet::read(&base.join(dir))?
        }
        None => exp.synthesize(seed)?,
    };
    let traj: Trajectory = reconstruct(&meas, &exp.reconstruction)?;
    let radius = exp.reconstruction.radius;
    let grid = profile_grid(radius, 512);
    let mut out = Outputs::new();
    out.add("trajectory.csv", traj.to_csv());
    let mut stages = Vec::new();
    for (m, st) in traj.stages.iter().enumerate() {
        let app = SurfaceProfile::spline(radius, st.coefficients.clone())?;
        let (l2, linf) = profile_errors(&exp.truth, &app, radius);
        out.add(format!("profile_k{m:02}.csv"), profile_csv(&grid, &exp.truth, &app));
        let mut coef = String::from("index,coefficient\n");
        for (i, a) in st.coefficients.iter().enumerate() {
            writeln!(coef, "{i},{a:.16e}").expect("writing to a String");
        }
        out.add(format!("coefficients_k{m:02}.csv"), coef);
        stages.push(json!({
            "k": st.k,
            "iterations": st.iterations,
            "err_k": st.err_k,
            "converged": st.converged,
            "l2_error": l2,
            "linf_error": linf,
        }));
    }
    let fin = traj.final_profile(radius)?;
    let (l2, linf) = profile_errors(&exp.truth, &fin, radius);
    out.add(
        "summary.json",
        pretty(&json!({
            "command": "reconstruct",
            "seed": seed,
            "tau_delta": exp.reconstruction.tau * meas.delta,
            "final_err_k": traj.stages.last().map(|s| s.err_k),
            "l2_error": l2,
            "linf_error": linf,
            "stages": stages,
        })),
    );
    Ok(out)
}
