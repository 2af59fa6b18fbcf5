//! Command-line front end: `simulate`, `sweep`, `compare` and `validate`.
//!
//! Exit codes are 0 on success, 1 for usage or configuration errors and 2
//! for numerical failures. Values given as flags override those from a
//! config file, which override the built-in defaults.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actuation::ActuationPattern;
use crate::compare::{error_maps, histogram, load_experiment, write_error_map, write_histogram};
use crate::dynamics::{
    simulate, steady_state_velocity, ContactParams, DynamicsError, IntegratorParams, Protocol,
};
use crate::format::sig6;
use crate::metrics::{cost_of_transport, efficiency, stage_power, PowerModel};
use crate::robot::{compile, validate, BatteryPosition, RobotConfig};
use crate::sweep::{best, run_sweep_with_journal, Objective, SweepError, SweepSpec};
use crate::ENGINE_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "vibrosheet",
    version,
    about = "Simulate and sweep piezoelectric sheet crawlers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one actuation pattern and report its steady-state metrics.
    Simulate(SimulateArgs),
    /// Run a grid of patterns and battery positions.
    Sweep(SweepArgs),
    /// Compare a sweep result CSV with an experiment CSV.
    Compare(CompareArgs),
    /// Check a robot config, simulation file or sweep spec.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Robot config JSON, or a simulation file with `robot`, `pattern`,
    /// `protocol`, `integrator`, `contact` and `power` sections.
    #[arg(long)]
    config: PathBuf,
    /// Trajectory CSV to write.
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
    #[arg(long)]
    freq: Option<f64>,
    /// Right-channel phase lag, degrees.
    #[arg(long)]
    phase: Option<f64>,
    #[arg(long)]
    duty_left: Option<f64>,
    #[arg(long)]
    duty_right: Option<f64>,
    /// P1, P2, P3 or custom:<cell>;<cell>...
    #[arg(long)]
    battery: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    transient: Option<f64>,
    #[arg(long)]
    measure: Option<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for the result CSV, journal and manifest.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "VIBROSHEET_WORKERS")]
    workers: Option<usize>,
    /// Reuse records from an earlier run of the same spec.
    #[arg(long)]
    resume: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Sweep result CSV.
    #[arg(long)]
    sim: PathBuf,
    /// Experiment CSV.
    #[arg(long)]
    exp: PathBuf,
    /// Output directory for the error map, histogram and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Histogram bin width for the RMSE map, cm/s.
    #[arg(long, default_value_t = 0.1)]
    bin_width: f64,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    path: PathBuf,
}

/// Inputs of a single simulation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationFile {
    pub robot: RobotConfig,
    pub pattern: ActuationPattern,
    pub protocol: Protocol,
    pub integrator: IntegratorParams,
    pub contact: ContactParams,
    pub power: PowerModel,
}

/// Record of a successful command, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub spec_hash: String,
    pub engine_version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    /// Write via a temporary file and rename, so readers never see a partial manifest.
    pub fn write_atomic(&self, path: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        write_atomic(path, text.as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::NumericalBlowup { .. } | DynamicsError::ContactNotConverged { .. } => {
                Failure::numerical(e.to_string())
            }
            _ => Failure::usage(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::usage(format!("{}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, out, err),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Validate(a) => cmd_validate(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value, Failure> {
    let text = fs::read_to_string(path).map_err(io_failure(path))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_simulation_file(path: &Path) -> Result<SimulationFile, Failure> {
    let value = read_json(path)?;
    let is_full = value.as_object().is_some_and(|o| o.contains_key("robot"));
    let parsed = if is_full {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|robot| SimulationFile {
            robot,
            ..Default::default()
        })
    };
    parsed.map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn apply_flags(file: &mut SimulationFile, a: &SimulateArgs) -> Outcome {
    let p = &mut file.pattern;
    for (flag, target) in [
        (a.freq, &mut p.frequency),
        (a.phase, &mut p.phase_deg),
        (a.duty_left, &mut p.duty_left),
        (a.duty_right, &mut p.duty_right),
        (a.dt, &mut file.integrator.dt),
        (a.transient, &mut file.protocol.transient_s),
        (a.measure, &mut file.protocol.measure_s),
    ] {
        if let Some(v) = flag {
            *target = v;
        }
    }
    if let Some(label) = &a.battery {
        file.robot.battery_position = BatteryPosition::parse_label(label)
            .ok_or_else(|| Failure::usage(format!("unknown battery position {label:?}")))?;
    }
    Ok(())
}

fn hash_bytes(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn or_undefined(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_string(), sig6)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let started = Instant::now();
    let mut file = load_simulation_file(&a.config)?;
    apply_flags(&mut file, a)?;
    let violations = validate(&file.robot);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Failure::usage(format!(
            "invalid robot config: {}",
            list.join("; ")
        )));
    }
    file.pattern
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;
    if let Some(w) = file.integrator.stability_warning(&file.contact) {
        let _ = writeln!(err, "warning: {w}");
    }
    let chain = compile(&file.robot).map_err(|e| Failure::usage(e.to_string()))?;
    let traj = simulate(
        &chain,
        &file.pattern,
        &file.protocol,
        &file.integrator,
        &file.contact,
    )?;
    let velocity = steady_state_velocity(&traj, &file.pattern)?;

    let mut csv = Vec::new();
    traj.write_csv(&mut csv).map_err(io_failure(&a.out))?;
    write_atomic(&a.out, &csv).map_err(io_failure(&a.out))?;

    let power = stage_power(&file.pattern, &file.power);
    let eff = efficiency(velocity, power).ok();
    let cot = cost_of_transport(power, chain.total_mass, velocity, file.integrator.gravity).ok();
    let _ = writeln!(
        out,
        "velocity_mps={} velocity_cms={} power_w={} eff_cmspw={} cot={}",
        sig6(velocity),
        sig6(velocity * 100.0),
        sig6(power),
        or_undefined(eff),
        or_undefined(cot)
    );

    let spec = serde_json::to_vec(&file).expect("simulation file serializes");
    let manifest_path = a.out.with_extension("manifest.json");
    RunManifest {
        command: "simulate".into(),
        spec_hash: hash_bytes(&[&spec]),
        engine_version: ENGINE_VERSION.into(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: vec![a.out.display().to_string()],
    }
    .write_atomic(&manifest_path)
    .map_err(io_failure(&manifest_path))
}

fn sweep_failure(e: SweepError) -> Failure {
    Failure::usage(e.to_string())
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let started = Instant::now();
    let mut spec = SweepSpec::from_json_file(&a.spec).map_err(sweep_failure)?;
    if a.workers.is_some() {
        spec.workers = a.workers;
    }
    spec.validate().map_err(sweep_failure)?;
    if let Some(w) = spec.integrator.stability_warning(&spec.contact) {
        let _ = writeln!(err, "warning: {w}");
    }
    fs::create_dir_all(&a.out).map_err(io_failure(&a.out))?;
    let journal = a.out.join("sweep.journal");
    let csv_path = a.out.join("sweep.csv");
    let (result, stats) =
        run_sweep_with_journal(&spec, Some(&journal), a.resume).map_err(sweep_failure)?;
    write_atomic(&csv_path, result.to_csv_string().as_bytes()).map_err(io_failure(&csv_path))?;

    let failed = result.failed_count();
    let _ = writeln!(
        out,
        "runs={} computed={} reused={} failed={}",
        result.records.len(),
        stats.computed,
        stats.reused,
        failed
    );
    for objective in Objective::ALL {
        match best(&result, objective) {
            Ok(o) => {
                let p = o.pattern;
                let _ = writeln!(
                    out,
                    "{}: value={} freq_hz={} phase_deg={} duty_left={} duty_right={} battery_pos={}",
                    objective,
                    sig6(o.value),
                    sig6(p.frequency),
                    sig6(p.phase_deg),
                    sig6(p.duty_left),
                    sig6(p.duty_right),
                    o.battery.label()
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{objective}: none ({e})");
            }
        }
    }
    if failed > 0 {
        let _ = writeln!(
            err,
            "warning: {failed} of {} runs failed",
            result.records.len()
        );
    }

    let manifest_path = a.out.join("manifest.json");
    RunManifest {
        command: "sweep".into(),
        spec_hash: result.spec_hash.clone().unwrap_or_default(),
        engine_version: ENGINE_VERSION.into(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: vec![
            csv_path.display().to_string(),
            journal.display().to_string(),
        ],
    }
    .write_atomic(&manifest_path)
    .map_err(io_failure(&manifest_path))?;
    if failed == result.records.len() {
        return Err(Failure::numerical("every run failed"));
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> Outcome {
    let started = Instant::now();
    let sim = crate::sweep::SweepResult::read_csv(&a.sim).map_err(sweep_failure)?;
    let exp =
        load_experiment(&a.exp).map_err(|e| Failure::usage(format!("{}: {e}", a.exp.display())))?;
    let maps = error_maps(&sim, &exp).map_err(|e| Failure::usage(e.to_string()))?;
    let rmses: Vec<f64> = maps.iter().filter_map(|c| c.rmse_cms).collect();
    let bins = histogram(&rmses, a.bin_width).map_err(|e| Failure::usage(e.to_string()))?;

    fs::create_dir_all(&a.out).map_err(io_failure(&a.out))?;
    let map_path = a.out.join("error_map.csv");
    let hist_path = a.out.join("rmse_histogram.csv");
    let mut buf = Vec::new();
    write_error_map(&maps, &mut buf).map_err(io_failure(&map_path))?;
    write_atomic(&map_path, &buf).map_err(io_failure(&map_path))?;
    let mut buf = Vec::new();
    write_histogram(&bins, &mut buf).map_err(io_failure(&hist_path))?;
    write_atomic(&hist_path, &buf).map_err(io_failure(&hist_path))?;

    for c in &maps {
        let _ = writeln!(
            out,
            "freq_hz={} phase_deg={} rmse_cms={} pcc={} n_cells={} n_excluded={}",
            sig6(c.freq),
            sig6(c.phase),
            or_undefined(c.rmse_cms),
            or_undefined(c.pcc),
            c.n_cells,
            c.n_excluded
        );
    }

    let sim_bytes = fs::read(&a.sim).map_err(io_failure(&a.sim))?;
    let exp_bytes = fs::read(&a.exp).map_err(io_failure(&a.exp))?;
    let manifest_path = a.out.join("manifest.json");
    RunManifest {
        command: "compare".into(),
        spec_hash: hash_bytes(&[&sim_bytes, &exp_bytes]),
        engine_version: ENGINE_VERSION.into(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: vec![
            map_path.display().to_string(),
            hist_path.display().to_string(),
        ],
    }
    .write_atomic(&manifest_path)
    .map_err(io_failure(&manifest_path))
}

fn cmd_validate(a: &ValidateArgs, out: &mut dyn Write) -> Outcome {
    let value = read_json(&a.path)?;
    let keys = value
        .as_object()
        .map(|o| (o.contains_key("grid"), o.contains_key("robot")));
    match keys {
        Some((true, _)) => {
            let spec: SweepSpec =
                serde_json::from_value(value).map_err(|e| Failure::usage(e.to_string()))?;
            spec.validate().map_err(sweep_failure)?;
            let _ = writeln!(
                out,
                "valid sweep spec: {} runs, hash {}",
                spec.run_count(),
                spec.hash()
            );
        }
        _ => {
            let file = load_simulation_file(&a.path)?;
            let violations = validate(&file.robot);
            if !violations.is_empty() {
                for v in &violations {
                    let _ = writeln!(out, "{v}");
                }
                return Err(Failure::usage(format!("{} violation(s)", violations.len())));
            }
            file.pattern
                .validate()
                .map_err(|e| Failure::usage(e.to_string()))?;
            let chain = compile(&file.robot).map_err(|e| Failure::usage(e.to_string()))?;
            let _ = writeln!(
                out,
                "valid robot config: {} links, {} joints, mass {} kg",
                chain.links.len(),
                chain.joints.len(),
                sig6(chain.total_mass)
            );
        }
    }
    Ok(())
}
