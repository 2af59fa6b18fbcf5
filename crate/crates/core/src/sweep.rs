//! Grid sweeps over actuation patterns and battery positions.
//!
//! Runs are independent, so the grid is farmed out to a worker pool and the
//! results are gathered back in grid order. Each finished run can be appended
//! to a journal file, which lets an interrupted sweep pick up where it left off.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::actuation::{ActuationError, ActuationPattern, GridAxes};
use crate::dynamics::{
    simulate, steady_state_velocity, ContactParams, IntegratorParams, Protocol, MIN_WINDOW_PERIODS,
};
use crate::format::{sig6, sig6_opt};
use crate::metrics::{cost_of_transport, efficiency, stage_power, PowerModel};
use crate::robot::{compile, BatteryPosition, ChainModel, RobotConfig, RobotError};
use crate::ENGINE_VERSION;

pub const CSV_HEADER: &str =
    "freq_hz,phase_deg,duty_left,duty_right,battery_pos,velocity_mps,power_w,eff_cmspw,cot,failed";

const JOURNAL_MAGIC: &str = "vibrosheet-journal";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error(transparent)]
    Actuation(#[from] ActuationError),
    #[error("cannot parse sweep spec: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error(
        "journal {path} belongs to a different sweep spec (hash {found}, expected {expected})"
    )]
    JournalMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },
    #[error("sweep result has no records")]
    EmptyResult,
    #[error("every sweep record failed")]
    AllFailed,
    #[error("no record qualifies for {0}")]
    NoCandidate(Objective),
    #[error("slice does not match the grid: {0}")]
    SliceMismatch(String),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn default_workers() -> Option<usize> {
    None
}

/// Everything needed to reproduce a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub robot: RobotConfig,
    pub grid: GridAxes,
    /// Empty means the robot's own battery position.
    #[serde(default)]
    pub battery_positions: Vec<BatteryPosition>,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub integrator: IntegratorParams,
    #[serde(default)]
    pub contact: ContactParams,
    #[serde(default)]
    pub power: PowerModel,
    /// Supplies drive voltage and edge ramps for every grid pattern.
    #[serde(default)]
    pub waveform: ActuationPattern,
    /// Not part of the spec hash.
    #[serde(default = "default_workers", skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn new(robot: RobotConfig, grid: GridAxes) -> Self {
        Self {
            robot,
            grid,
            battery_positions: Vec::new(),
            protocol: Protocol::default(),
            integrator: IntegratorParams::default(),
            contact: ContactParams::default(),
            power: PowerModel::default(),
            waveform: ActuationPattern::default(),
            workers: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, SweepError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, SweepError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json_str(&text)
    }

    pub fn positions(&self) -> Vec<BatteryPosition> {
        if self.battery_positions.is_empty() {
            vec![self.robot.battery_position.clone()]
        } else {
            self.battery_positions.clone()
        }
    }

    /// Number of simulations the sweep runs.
    pub fn run_count(&self) -> usize {
        self.grid.len() * self.positions().len()
    }

    /// SHA-256 of the canonical JSON form, ignoring the worker count.
    pub fn hash(&self) -> String {
        let canonical = SweepSpec {
            workers: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("sweep spec serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let mut problems = Vec::new();
        if self.grid.is_empty() {
            problems.push("grid must have at least one value on every axis".to_string());
        }
        if let Some(fmin) = self.grid.freqs.iter().copied().reduce(f64::min) {
            let need = MIN_WINDOW_PERIODS as f64 / fmin;
            if fmin > 0.0 && self.protocol.measure_s + 1e-9 < need {
                problems.push(format!(
                    "measure window {} s is shorter than {} periods at {} Hz ({} s)",
                    self.protocol.measure_s, MIN_WINDOW_PERIODS, fmin, need
                ));
            }
        }
        if !(self.protocol.transient_s >= 0.0 && self.protocol.measure_s > 0.0) {
            problems.push("protocol needs transient ≥ 0 and measure > 0".to_string());
        }
        if let Err(e) = self.integrator.validate() {
            problems.push(e.to_string());
        }
        if !self.contact.is_valid() {
            problems.push("contact parameters must be finite and ≥ 0".to_string());
        }
        if !self.power.is_valid() {
            problems.push("power model parameters must be finite and ≥ 0".to_string());
        }
        if self.workers == Some(0) {
            problems.push("workers must be ≥ 1".to_string());
        }
        if !self.grid.is_empty() {
            if let Err(e) = self.grid.patterns(&self.waveform) {
                problems.push(e.to_string());
            }
        }
        for position in self.positions() {
            let robot = RobotConfig {
                battery_position: position.clone(),
                ..self.robot.clone()
            };
            for v in crate::robot::validate(&robot) {
                problems.push(format!("battery {}: {v}", position.label()));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SweepError::InvalidSpec(problems))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub pattern: ActuationPattern,
    pub battery: BatteryPosition,
    /// Steady-state velocity, m/s, leftward positive. `None` when the run failed.
    pub velocity: Option<f64>,
    /// Stage power, W.
    pub power: f64,
    /// cm/s per W.
    pub efficiency: Option<f64>,
    pub cot: Option<f64>,
    pub failed: bool,
    pub error: Option<String>,
}

impl SweepRecord {
    fn scored(
        pattern: ActuationPattern,
        battery: BatteryPosition,
        outcome: Result<f64, String>,
        power_model: &PowerModel,
        mass: f64,
        gravity: f64,
    ) -> Self {
        let power = stage_power(&pattern, power_model);
        match outcome {
            Ok(v) => Self {
                pattern,
                battery,
                velocity: Some(v),
                power,
                efficiency: efficiency(v, power).ok(),
                cot: cost_of_transport(power, mass, v, gravity).ok(),
                failed: false,
                error: None,
            },
            Err(message) => Self {
                pattern,
                battery,
                velocity: None,
                power,
                efficiency: None,
                cot: None,
                failed: true,
                error: Some(message),
            },
        }
    }

    fn csv_row(&self) -> [String; 10] {
        [
            sig6(self.pattern.frequency),
            sig6(self.pattern.phase_deg),
            sig6(self.pattern.duty_left),
            sig6(self.pattern.duty_right),
            self.battery.label(),
            sig6_opt(self.velocity),
            sig6(self.power),
            sig6_opt(self.efficiency),
            sig6_opt(self.cot),
            if self.failed { "1" } else { "0" }.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Battery position outermost, then pattern grid order.
    pub records: Vec<SweepRecord>,
    /// `None` when loaded from a CSV file.
    pub spec_hash: Option<String>,
    pub engine_version: Option<String>,
}

impl SweepResult {
    pub fn failed_count(&self) -> usize {
        self.records.iter().filter(|r| r.failed).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER.split(','))?;
        for r in &self.records {
            w.write_record(r.csv_row())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads a result CSV. Lines starting with `#` are ignored.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, SweepError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(io_err(path))?;
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(file);
        let csv_err = |line: u64, message: String| SweepError::Csv {
            path: path.to_path_buf(),
            line,
            message,
        };
        let headers = rdr
            .headers()
            .map_err(|e| csv_err(1, e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| csv_err(1, format!("missing column {name}")))
        };
        let idx: Vec<usize> = CSV_HEADER.split(',').map(col).collect::<Result<_, _>>()?;
        let mut records = Vec::new();
        for row in rdr.records() {
            let row =
                row.map_err(|e| csv_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = row.position().map_or(0, |p| p.line());
            let num = |i: usize| -> Result<Option<f64>, SweepError> {
                let s = &row[idx[i]];
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse::<f64>().map(Some).map_err(|_| {
                    csv_err(
                        line,
                        format!("bad number {s:?} in column {}", &headers[idx[i]]),
                    )
                })
            };
            let req = |i: usize| {
                num(i)?.ok_or_else(|| csv_err(line, format!("empty column {}", &headers[idx[i]])))
            };
            let battery = BatteryPosition::parse_label(&row[idx[4]])
                .ok_or_else(|| csv_err(line, format!("bad battery position {:?}", &row[idx[4]])))?;
            let failed = match &row[idx[9]] {
                "0" | "false" => false,
                "1" | "true" => true,
                other => return Err(csv_err(line, format!("bad failed flag {other:?}"))),
            };
            records.push(SweepRecord {
                pattern: ActuationPattern::new(req(0)?, req(1)?, req(2)?, req(3)?),
                battery,
                velocity: num(5)?,
                power: req(6)?,
                efficiency: num(7)?,
                cot: num(8)?,
                failed,
                error: None,
            });
        }
        Ok(SweepResult {
            records,
            spec_hash: None,
            engine_version: None,
        })
    }
}

/// How many records were simulated versus taken from a journal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepStats {
    pub computed: usize,
    pub reused: usize,
}

/// Run every (battery position, pattern) pair of the grid.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    run_sweep_with_journal(spec, None, false).map(|(r, _)| r)
}

/// [`run_sweep`] with each finished run appended to `journal`.
///
/// With `resume`, records already present in a journal written for the same
/// spec are reused instead of simulated again. Without it the journal starts
/// over.
pub fn run_sweep_with_journal(
    spec: &SweepSpec,
    journal: Option<&Path>,
    resume: bool,
) -> Result<(SweepResult, SweepStats), SweepError> {
    spec.validate()?;
    let hash = spec.hash();
    let patterns = spec.grid.patterns(&spec.waveform)?;
    let positions = spec.positions();
    let chains: Vec<ChainModel> = positions
        .iter()
        .map(|p| {
            compile(&RobotConfig {
                battery_position: p.clone(),
                ..spec.robot.clone()
            })
        })
        .collect::<Result<_, _>>()?;

    let mut done: HashMap<usize, Result<f64, String>> = HashMap::new();
    let writer = match journal {
        Some(path) => {
            if resume && path.exists() {
                done = read_journal(path, &hash)?;
            }
            Some(Mutex::new(open_journal(
                path,
                &hash,
                resume && path.exists(),
            )?))
        }
        None => None,
    };

    let jobs: Vec<usize> = (0..positions.len() * patterns.len()).collect();
    let stats = SweepStats {
        computed: jobs.iter().filter(|i| !done.contains_key(i)).count(),
        reused: jobs.iter().filter(|i| done.contains_key(i)).count(),
    };
    let workers = spec
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;

    let run_one = |index: usize| -> Result<Result<f64, String>, SweepError> {
        if let Some(prev) = done.get(&index) {
            return Ok(prev.clone());
        }
        let (bi, pi) = (index / patterns.len(), index % patterns.len());
        let pattern = &patterns[pi];
        let outcome = simulate(
            &chains[bi],
            pattern,
            &spec.protocol,
            &spec.integrator,
            &spec.contact,
        )
        .and_then(|traj| steady_state_velocity(&traj, pattern))
        .map_err(|e| e.to_string());
        if let (Some(w), Some(path)) = (&writer, journal) {
            let mut w = w.lock().expect("journal lock");
            write_journal_line(&mut *w, index, &outcome).map_err(io_err(path))?;
        }
        Ok(outcome)
    };
    let outcomes: Vec<Result<f64, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|&i| run_one(i))
            .collect::<Result<_, _>>()
    })?;

    let records = outcomes
        .into_iter()
        .enumerate()
        .map(|(index, outcome)| {
            let (bi, pi) = (index / patterns.len(), index % patterns.len());
            SweepRecord::scored(
                patterns[pi],
                positions[bi].clone(),
                outcome,
                &spec.power,
                chains[bi].total_mass,
                spec.integrator.gravity,
            )
        })
        .collect();
    Ok((
        SweepResult {
            records,
            spec_hash: Some(hash),
            engine_version: Some(ENGINE_VERSION.to_string()),
        },
        stats,
    ))
}

fn open_journal(path: &Path, hash: &str, append: bool) -> Result<File, SweepError> {
    if append {
        return OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(io_err(path));
    }
    let mut f = File::create(path).map_err(io_err(path))?;
    writeln!(f, "{JOURNAL_MAGIC} {hash}").map_err(io_err(path))?;
    f.flush().map_err(io_err(path))?;
    Ok(f)
}

// Velocities are stored as raw bits so a resumed sweep is bit-identical to
// an uninterrupted one.
fn write_journal_line<W: Write>(
    w: &mut W,
    index: usize,
    outcome: &Result<f64, String>,
) -> io::Result<()> {
    match outcome {
        Ok(v) => writeln!(w, "{index} ok {:016x}", v.to_bits())?,
        Err(msg) => writeln!(w, "{index} failed {}", msg.replace('\n', " "))?,
    }
    w.flush()
}

fn read_journal(
    path: &Path,
    hash: &str,
) -> Result<HashMap<usize, Result<f64, String>>, SweepError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let first = match lines.next() {
        Some(line) => line.map_err(io_err(path))?,
        None => String::new(),
    };
    let found = first
        .strip_prefix(JOURNAL_MAGIC)
        .map(str::trim)
        .unwrap_or("");
    if found != hash {
        return Err(SweepError::JournalMismatch {
            path: path.to_path_buf(),
            found: found.to_string(),
            expected: hash.to_string(),
        });
    }
    let mut done = HashMap::new();
    for line in lines {
        let line = line.map_err(io_err(path))?;
        // a torn final line from an interrupted run is simply recomputed
        let mut parts = line.splitn(3, ' ');
        let (Some(index), Some(kind), Some(rest)) = (parts.next(), parts.next(), parts.next())
        else {
            continue;
        };
        let Ok(index) = index.parse::<usize>() else {
            continue;
        };
        match kind {
            "ok" => {
                let bits = (rest.len() == 16)
                    .then(|| u64::from_str_radix(rest, 16).ok())
                    .flatten();
                if let Some(bits) = bits {
                    done.insert(index, Ok(f64::from_bits(bits)));
                }
            }
            "failed" => {
                done.insert(index, Err(rest.to_string()));
            }
            _ => {}
        }
    }
    Ok(done)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Largest signed velocity.
    MaxVelocityLeft,
    /// Most negative signed velocity.
    MaxVelocityRight,
    MaxEfficiency,
    MinCot,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::MaxVelocityLeft,
        Objective::MaxVelocityRight,
        Objective::MaxEfficiency,
        Objective::MinCot,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Objective::MaxVelocityLeft => "max_velocity_left",
            Objective::MaxVelocityRight => "max_velocity_right",
            Objective::MaxEfficiency => "max_efficiency",
            Objective::MinCot => "min_cot",
        }
    }

    fn value(&self, r: &SweepRecord) -> Option<f64> {
        if r.failed {
            return None;
        }
        match self {
            Objective::MaxVelocityLeft | Objective::MaxVelocityRight => r.velocity,
            Objective::MaxEfficiency => r.efficiency,
            // zero-velocity and zero-power records have no meaningful COT
            Objective::MinCot => r
                .cot
                .filter(|_| r.velocity.is_some_and(|v| v != 0.0) && r.power > 0.0),
        }
    }

    fn better(&self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Objective::MaxVelocityLeft | Objective::MaxEfficiency => candidate > incumbent,
            Objective::MaxVelocityRight | Objective::MinCot => candidate < incumbent,
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    /// Position in `SweepResult::records`.
    pub index: usize,
    pub pattern: ActuationPattern,
    pub battery: BatteryPosition,
    pub value: f64,
}

/// Best record for `objective`; ties go to the earliest record.
pub fn best(result: &SweepResult, objective: Objective) -> Result<Optimum, SweepError> {
    if result.records.is_empty() {
        return Err(SweepError::EmptyResult);
    }
    if result.records.iter().all(|r| r.failed) {
        return Err(SweepError::AllFailed);
    }
    let mut found: Option<(usize, f64)> = None;
    for (i, r) in result.records.iter().enumerate() {
        let Some(v) = objective.value(r) else {
            continue;
        };
        if found.is_none_or(|(_, b)| objective.better(v, b)) {
            found = Some((i, v));
        }
    }
    let (index, value) = found.ok_or(SweepError::NoCandidate(objective))?;
    let r = &result.records[index];
    Ok(Optimum {
        index,
        pattern: r.pattern,
        battery: r.battery.clone(),
        value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Freq,
    Phase,
    DutyLeft,
    DutyRight,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::Freq, Axis::Phase, Axis::DutyLeft, Axis::DutyRight];

    pub fn name(&self) -> &'static str {
        match self {
            Axis::Freq => "freq_hz",
            Axis::Phase => "phase_deg",
            Axis::DutyLeft => "duty_left",
            Axis::DutyRight => "duty_right",
        }
    }

    pub fn of(&self, p: &ActuationPattern) -> f64 {
        match self {
            Axis::Freq => p.frequency,
            Axis::Phase => p.phase_deg,
            Axis::DutyLeft => p.duty_left,
            Axis::DutyRight => p.duty_right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    VelocityMps,
    PowerW,
    EfficiencyCmspw,
    Cot,
}

impl Metric {
    fn of(&self, r: &SweepRecord) -> Option<f64> {
        if r.failed {
            return None;
        }
        match self {
            Metric::VelocityMps => r.velocity,
            Metric::PowerW => Some(r.power),
            Metric::EfficiencyCmspw => r.efficiency,
            Metric::Cot => r.cot,
        }
    }
}

/// Fixed values for the two axes not shown in a heat map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridSlice {
    pub fixed: Vec<(Axis, f64)>,
    /// Required when the result holds more than one battery position.
    pub battery: Option<BatteryPosition>,
}

/// A rectangular table of one metric over two grid axes.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    pub row_axis: Axis,
    pub col_axis: Axis,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    /// `cells[row][col]`; `None` for failed or undefined values.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl HeatMap {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![format!(
            "{}\\{}",
            self.row_axis.name(),
            self.col_axis.name()
        )];
        header.extend(self.cols.iter().map(|c| sig6(*c)));
        w.write_record(&header)?;
        for (r, row) in self.rows.iter().zip(&self.cells) {
            let mut line = vec![sig6(*r)];
            line.extend(row.iter().map(|c| sig6_opt(*c)));
            w.write_record(&line)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn axis_values(records: &[&SweepRecord], axis: Axis) -> Vec<f64> {
    let mut vals: Vec<f64> = Vec::new();
    for r in records {
        let v = axis.of(&r.pattern);
        if !vals.iter().any(|&u| same(u, v)) {
            vals.push(v);
        }
    }
    vals.sort_by(f64::total_cmp);
    vals
}

/// Heat map of `metric` over `rows × cols` with the other two axes fixed.
pub fn export_grid(
    result: &SweepResult,
    rows: Axis,
    cols: Axis,
    slice: &GridSlice,
    metric: Metric,
) -> Result<HeatMap, SweepError> {
    if rows == cols {
        return Err(SweepError::SliceMismatch(
            "row and column axes must differ".into(),
        ));
    }
    let free: Vec<Axis> = Axis::ALL
        .into_iter()
        .filter(|a| *a != rows && *a != cols)
        .collect();
    for axis in &free {
        let n = slice.fixed.iter().filter(|(a, _)| a == axis).count();
        if n != 1 {
            return Err(SweepError::SliceMismatch(format!(
                "{} must be fixed exactly once",
                axis.name()
            )));
        }
    }
    if slice.fixed.iter().any(|(a, _)| *a == rows || *a == cols) {
        return Err(SweepError::SliceMismatch(
            "a heat-map axis cannot also be fixed".into(),
        ));
    }

    let mut batteries: Vec<&BatteryPosition> = Vec::new();
    for r in &result.records {
        if !batteries.contains(&&r.battery) {
            batteries.push(&r.battery);
        }
    }
    let battery = match &slice.battery {
        Some(b) if batteries.contains(&b) => b.clone(),
        Some(b) => {
            return Err(SweepError::SliceMismatch(format!(
                "battery position {} not in result",
                b.label()
            )))
        }
        None if batteries.len() == 1 => batteries[0].clone(),
        None if batteries.is_empty() => return Err(SweepError::EmptyResult),
        None => {
            return Err(SweepError::SliceMismatch(
                "result has several battery positions; pick one".into(),
            ))
        }
    };

    let in_battery: Vec<&SweepRecord> = result
        .records
        .iter()
        .filter(|r| r.battery == battery)
        .collect();
    for (axis, value) in &slice.fixed {
        if !axis_values(&in_battery, *axis)
            .iter()
            .any(|&v| same(v, *value))
        {
            return Err(SweepError::SliceMismatch(format!(
                "{} = {} is not a grid value",
                axis.name(),
                value
            )));
        }
    }
    let selected: Vec<&SweepRecord> = in_battery
        .into_iter()
        .filter(|r| slice.fixed.iter().all(|(a, v)| same(a.of(&r.pattern), *v)))
        .collect();
    let row_vals = axis_values(&selected, rows);
    let col_vals = axis_values(&selected, cols);
    let mut cells = vec![vec![None; col_vals.len()]; row_vals.len()];
    for r in selected {
        let i = row_vals
            .iter()
            .position(|&v| same(v, rows.of(&r.pattern)))
            .expect("row value");
        let j = col_vals
            .iter()
            .position(|&v| same(v, cols.of(&r.pattern)))
            .expect("col value");
        cells[i][j] = metric.of(r);
    }
    Ok(HeatMap {
        row_axis: rows,
        col_axis: cols,
        rows: row_vals,
        cols: col_vals,
        cells,
    })
}
