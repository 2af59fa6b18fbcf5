//! Simulation versus experiment: per-(frequency, phase) RMSE and PCC over
//! the duty grid, plus histograms of the resulting error maps.
//!
//! Velocities are compared in cm/s.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::format::{sig6, sig6_opt};
use crate::metrics::{pcc, rmse};
use crate::robot::BatteryPosition;
use crate::sweep::SweepResult;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("experiment grid: {0}")]
    AxisMismatch(String),
    #[error("simulation and experiment grids differ: {0}")]
    GridMismatch(String),
    #[error("bin width must be positive, got {0}")]
    InvalidBinWidth(f64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: u64, message: impl Into<String>) -> CompareError {
    CompareError::ParseError {
        line,
        message: message.into(),
    }
}

/// Grid values are matched to a micro-unit so `0.3` and `0.30000000000000004` agree.
type Key = [i64; 4];

fn key(f: f64, phase: f64, dl: f64, dr: f64) -> Key {
    [f, phase, dl, dr].map(|x| (x * 1e6).round() as i64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentCell {
    pub freq: f64,
    pub phase: f64,
    pub duty_left: f64,
    pub duty_right: f64,
    /// cm/s; `None` when not measured.
    pub velocity_cms: Option<f64>,
}

/// Measured velocities on a (f, Φ, D_L, D_R) grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentGrid {
    pub cells: Vec<ExperimentCell>,
    /// Leading `#` comment lines of the source file.
    pub provenance: String,
    /// Present when the file carried a `battery_pos` column.
    pub battery: Option<BatteryPosition>,
}

impl ExperimentGrid {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn freqs(&self) -> Vec<f64> {
        sorted_unique(self.cells.iter().map(|c| c.freq))
    }

    pub fn phases(&self) -> Vec<f64> {
        sorted_unique(self.cells.iter().map(|c| c.phase))
    }
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    v
}

/// Load an experiment CSV.
///
/// Required columns are `freq_hz,phase_deg,duty_left,duty_right` and one of
/// `velocity_cms` or `velocity_mps`. A `battery_pos` column is optional,
/// other columns are ignored and empty velocities mark unmeasured cells.
pub fn load_experiment(path: impl AsRef<Path>) -> Result<ExperimentGrid, CompareError> {
    parse_experiment(File::open(path)?)
}

pub fn parse_experiment<R: Read>(source: R) -> Result<ExperimentGrid, CompareError> {
    let mut text = String::new();
    let mut provenance = Vec::new();
    let mut in_preamble = true;
    for line in BufReader::new(source).lines() {
        let line = line?;
        if in_preamble {
            if let Some(note) = line.strip_prefix('#') {
                provenance.push(note.trim().to_string());
            } else if !line.trim().is_empty() {
                in_preamble = false;
            }
        }
        text.push_str(&line);
        text.push('\n');
    }

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(parse_err(1, "empty file"));
    }
    let header_line = rdr.position().line().max(1);
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| {
        col(name).ok_or_else(|| parse_err(header_line, format!("missing column {name}")))
    };
    let (fi, pi, li, ri) = (
        need("freq_hz")?,
        need("phase_deg")?,
        need("duty_left")?,
        need("duty_right")?,
    );
    let (vi, scale) = match (col("velocity_cms"), col("velocity_mps")) {
        (Some(i), _) => (i, 1.0),
        (None, Some(i)) => (i, 100.0),
        (None, None) => {
            return Err(parse_err(
                header_line,
                "missing column velocity_cms or velocity_mps",
            ))
        }
    };
    let bi = col("battery_pos");
    let failed_col = col("failed");

    let mut grid = ExperimentGrid {
        provenance: provenance.join("\n"),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row =
            row.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, CompareError> {
            let s = row.get(i).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    parse_err(line, format!("bad number {s:?} in column {}", &headers[i]))
                })
        };
        if let Some(b) = bi {
            let label = row.get(b).unwrap_or("");
            let pos = BatteryPosition::parse_label(label)
                .ok_or_else(|| parse_err(line, format!("bad battery position {label:?}")))?;
            match &grid.battery {
                None => grid.battery = Some(pos),
                Some(prev) if *prev == pos => {}
                Some(prev) => {
                    return Err(CompareError::AxisMismatch(format!(
                        "line {line}: battery position {} differs from {}",
                        pos.label(),
                        prev.label()
                    )))
                }
            }
        }
        let failed = failed_col.is_some_and(|i| matches!(row.get(i), Some("1") | Some("true")));
        let velocity = match row.get(vi).unwrap_or("") {
            "" => None,
            _ if failed => None,
            _ => Some(num(vi)? * scale),
        };
        let cell = ExperimentCell {
            freq: num(fi)?,
            phase: num(pi)?,
            duty_left: num(li)?,
            duty_right: num(ri)?,
            velocity_cms: velocity,
        };
        if !seen.insert(key(cell.freq, cell.phase, cell.duty_left, cell.duty_right)) {
            return Err(CompareError::AxisMismatch(format!(
                "line {line}: duplicate cell f={} phase={} duty_left={} duty_right={}",
                cell.freq, cell.phase, cell.duty_left, cell.duty_right
            )));
        }
        grid.cells.push(cell);
    }
    if grid.cells.is_empty() {
        return Err(parse_err(header_line, "no data rows"));
    }
    Ok(grid)
}

/// Agreement statistics for one (frequency, phase) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCell {
    pub freq: f64,
    pub phase: f64,
    /// cm/s; `None` when no duty pairs survived exclusion.
    pub rmse_cms: Option<f64>,
    /// `None` when either series is constant or too short.
    pub pcc: Option<f64>,
    pub n_cells: usize,
    pub n_excluded: usize,
}

/// Per-(f, Φ) RMSE and PCC of simulated against measured velocities.
///
/// Only (f, Φ) groups present in the experiment are compared. Within each
/// group both sides must cover the same duty pairs. Pairs where either side
/// is missing or failed are dropped and counted in `n_excluded`.
pub fn error_maps(sim: &SweepResult, exp: &ExperimentGrid) -> Result<Vec<ErrorCell>, CompareError> {
    let sim_records: Vec<_> = match &exp.battery {
        Some(b) => sim.records.iter().filter(|r| r.battery == *b).collect(),
        None => {
            let first = sim.records.first().map(|r| &r.battery);
            if sim.records.iter().any(|r| Some(&r.battery) != first) {
                return Err(CompareError::GridMismatch(
                    "simulation has several battery positions; add battery_pos to the experiment file".into(),
                ));
            }
            sim.records.iter().collect()
        }
    };

    // group key (f, Φ) -> duty key -> velocity in cm/s
    type Group = BTreeMap<[i64; 2], (f64, f64, BTreeMap<[i64; 2], Option<f64>>)>;
    let mut sim_groups: Group = BTreeMap::new();
    for r in &sim_records {
        let p = &r.pattern;
        let k = key(p.frequency, p.phase_deg, p.duty_left, p.duty_right);
        let v = if r.failed {
            None
        } else {
            r.velocity.map(|v| v * 100.0)
        };
        let entry =
            sim_groups
                .entry([k[0], k[1]])
                .or_insert((p.frequency, p.phase_deg, BTreeMap::new()));
        if entry.2.insert([k[2], k[3]], v).is_some() {
            return Err(CompareError::GridMismatch(format!(
                "simulation repeats f={} phase={} duty_left={} duty_right={}",
                p.frequency, p.phase_deg, p.duty_left, p.duty_right
            )));
        }
    }
    let mut exp_groups: Group = BTreeMap::new();
    for c in &exp.cells {
        let k = key(c.freq, c.phase, c.duty_left, c.duty_right);
        exp_groups
            .entry([k[0], k[1]])
            .or_insert((c.freq, c.phase, BTreeMap::new()))
            .2
            .insert([k[2], k[3]], c.velocity_cms);
    }

    let mut out = Vec::with_capacity(exp_groups.len());
    for (gk, (freq, phase, exp_cells)) in &exp_groups {
        let Some((_, _, sim_cells)) = sim_groups.get(gk) else {
            return Err(CompareError::GridMismatch(format!(
                "no simulation records at f={freq} phase={phase}"
            )));
        };
        if sim_cells.keys().ne(exp_cells.keys()) {
            return Err(CompareError::GridMismatch(format!(
                "duty grids differ at f={freq} phase={phase} ({} simulated, {} measured)",
                sim_cells.len(),
                exp_cells.len()
            )));
        }
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (dk, s) in sim_cells {
            if let (Some(s), Some(e)) = (s, exp_cells[dk]) {
                xs.push(*s);
                ys.push(e);
            }
        }
        out.push(ErrorCell {
            freq: *freq,
            phase: *phase,
            rmse_cms: rmse(&xs, &ys).ok(),
            pcc: pcc(&xs, &ys).ok(),
            n_cells: xs.len(),
            n_excluded: sim_cells.len() - xs.len(),
        });
    }
    Ok(out)
}

pub fn write_error_map<W: Write>(cells: &[ErrorCell], mut out: W) -> io::Result<()> {
    writeln!(out, "freq_hz,phase_deg,rmse_cms,pcc,n_cells,n_excluded")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sig6(c.freq),
            sig6(c.phase),
            sig6_opt(c.rmse_cms),
            sig6_opt(c.pcc),
            c.n_cells,
            c.n_excluded
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Left-closed bins `[k·w, (k+1)·w)` covering the finite inputs, with empty
/// bins kept between the lowest and highest occupied one.
pub fn histogram(values: &[f64], bin_width: f64) -> Result<Vec<Bin>, CompareError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(CompareError::InvalidBinWidth(bin_width));
    }
    let index: Vec<i64> = values
        .iter()
        .filter(|v| v.is_finite())
        .map(|v| (v / bin_width).floor() as i64)
        .collect();
    let (Some(&lo), Some(&hi)) = (index.iter().min(), index.iter().max()) else {
        return Ok(Vec::new());
    };
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for i in index {
        counts[(i - lo) as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let b = lo + k as i64;
            Bin {
                lo: b as f64 * bin_width,
                hi: (b + 1) as f64 * bin_width,
                count,
            }
        })
        .collect())
}

pub fn write_histogram<W: Write>(bins: &[Bin], mut out: W) -> io::Result<()> {
    writeln!(out, "bin_lo,bin_hi,count")?;
    for b in bins {
        writeln!(out, "{},{},{}", sig6(b.lo), sig6(b.hi), b.count)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuation::ActuationPattern;
    use crate::sweep::SweepRecord;

    fn sim(values: &[(f64, f64, f64, f64, Option<f64>)]) -> SweepResult {
        SweepResult {
            records: values
                .iter()
                .map(|&(f, ph, dl, dr, v)| SweepRecord {
                    pattern: ActuationPattern::new(f, ph, dl, dr),
                    battery: BatteryPosition::P1,
                    velocity: v,
                    power: 0.5,
                    efficiency: None,
                    cot: None,
                    failed: v.is_none(),
                    error: None,
                })
                .collect(),
            spec_hash: None,
            engine_version: None,
        }
    }

    fn exp_from(s: &SweepResult, f: impl Fn(f64) -> f64) -> ExperimentGrid {
        ExperimentGrid {
            cells: s
                .records
                .iter()
                .map(|r| ExperimentCell {
                    freq: r.pattern.frequency,
                    phase: r.pattern.phase_deg,
                    duty_left: r.pattern.duty_left,
                    duty_right: r.pattern.duty_right,
                    velocity_cms: r.velocity.map(|v| f(v * 100.0)),
                })
                .collect(),
            ..Default::default()
        }
    }

    fn sample_sim() -> SweepResult {
        let mut rows = Vec::new();
        for (g, &(f, ph)) in [(16.0, 72.0), (18.0, 0.0)].iter().enumerate() {
            for (i, &dl) in [0.1, 0.2, 0.3].iter().enumerate() {
                for (j, &dr) in [0.0, 0.5].iter().enumerate() {
                    let v = 0.001 * (1 + i * 2 + j + g) as f64 * if j == 1 { -1.0 } else { 1.0 };
                    rows.push((f, ph, dl, dr, Some(v)));
                }
            }
        }
        sim(&rows)
    }

    #[test]
    fn identical_grids() {
        let s = sample_sim();
        let maps = error_maps(&s, &exp_from(&s, |v| v)).unwrap();
        assert_eq!(maps.len(), 2);
        for c in maps {
            assert_eq!(c.rmse_cms, Some(0.0));
            assert!((c.pcc.unwrap() - 1.0).abs() < 1e-12);
            assert_eq!((c.n_cells, c.n_excluded), (6, 0));
        }
    }

    #[test]
    fn constant_offset() {
        let s = sample_sim();
        for c in error_maps(&s, &exp_from(&s, |v| v + 0.25)).unwrap() {
            assert!((c.rmse_cms.unwrap() - 0.25).abs() < 1e-12);
            assert!((c.pcc.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn failed_and_missing_cells_are_excluded() {
        let mut s = sample_sim();
        s.records[0].failed = true;
        s.records[0].velocity = None;
        let mut e = exp_from(&sample_sim(), |v| v);
        e.cells[1].velocity_cms = None;
        let maps = error_maps(&s, &e).unwrap();
        assert_eq!((maps[0].n_cells, maps[0].n_excluded), (4, 2));
        assert_eq!((maps[1].n_cells, maps[1].n_excluded), (6, 0));
    }

    #[test]
    fn degenerate_cell_has_no_pcc() {
        let s = sim(&[
            (16.0, 0.0, 0.1, 0.0, Some(0.01)),
            (16.0, 0.0, 0.2, 0.0, Some(0.01)),
        ]);
        let maps = error_maps(&s, &exp_from(&s, |v| v)).unwrap();
        assert_eq!(maps[0].pcc, None);
        assert_eq!(maps[0].rmse_cms, Some(0.0));
    }

    #[test]
    fn duty_grid_mismatch() {
        let s = sample_sim();
        let mut e = exp_from(&s, |v| v);
        e.cells.pop();
        assert!(matches!(
            error_maps(&s, &e),
            Err(CompareError::GridMismatch(_))
        ));
        let mut e = exp_from(&s, |v| v);
        e.cells[0].freq = 20.0;
        assert!(matches!(
            error_maps(&s, &e),
            Err(CompareError::GridMismatch(_))
        ));
    }

    #[test]
    fn symmetric_in_sim_and_exp() {
        let s = sample_sim();
        let e = exp_from(&s, |v| 0.7 * v + 0.1 * v * v - 0.05);
        let forward = error_maps(&s, &e).unwrap();
        let swapped_sim = sim(&e
            .cells
            .iter()
            .map(|c| {
                (
                    c.freq,
                    c.phase,
                    c.duty_left,
                    c.duty_right,
                    c.velocity_cms.map(|v| v / 100.0),
                )
            })
            .collect::<Vec<_>>());
        let back = error_maps(&swapped_sim, &exp_from(&s, |v| v)).unwrap();
        for (a, b) in forward.iter().zip(&back) {
            assert!((a.rmse_cms.unwrap() - b.rmse_cms.unwrap()).abs() < 1e-12);
            assert!((a.pcc.unwrap() - b.pcc.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_experiment_file() {
        let text = "# synthetic\n# second line\nfreq_hz,phase_deg,duty_left,duty_right,velocity_cms,note\n\
                    16,72,0.1,0.1,1.5,a\n16,72,0.1,0.2,,b\n16,72,0.2,0.1,-0.25,c\n";
        let g = parse_experiment(text.as_bytes()).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.provenance, "synthetic\nsecond line");
        assert_eq!(g.cells[1].velocity_cms, None);
        assert_eq!(g.cells[2].velocity_cms, Some(-0.25));
        assert_eq!(g.freqs(), vec![16.0]);
    }

    #[test]
    fn parse_mps_column() {
        let text = "freq_hz,phase_deg,duty_left,duty_right,velocity_mps\n16,0,0.1,0,0.013\n";
        let g = parse_experiment(text.as_bytes()).unwrap();
        assert!((g.cells[0].velocity_cms.unwrap() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_experiment("".as_bytes()),
            Err(CompareError::ParseError { .. })
        ));
        let dup =
            "freq_hz,phase_deg,duty_left,duty_right,velocity_cms\n16,0,0.1,0,1\n16,0,0.1,0,2\n";
        assert!(matches!(
            parse_experiment(dup.as_bytes()),
            Err(CompareError::AxisMismatch(_))
        ));
        let bad =
            "freq_hz,phase_deg,duty_left,duty_right,velocity_cms\n16,0,0.1,0,1\n16,x,0.2,0,2\n";
        match parse_experiment(bad.as_bytes()) {
            Err(CompareError::ParseError { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let missing = "freq_hz,phase_deg,duty_left,velocity_cms\n16,0,0.1,1\n";
        assert!(parse_experiment(missing.as_bytes()).is_err());
    }

    #[test]
    fn histogram_examples() {
        let bins = histogram(&[0.1, 0.2, 0.9], 0.5).unwrap();
        assert_eq!(
            bins,
            vec![
                Bin {
                    lo: 0.0,
                    hi: 0.5,
                    count: 2
                },
                Bin {
                    lo: 0.5,
                    hi: 1.0,
                    count: 1
                }
            ]
        );
        assert!(histogram(&[], 0.5).unwrap().is_empty());
        assert_eq!(histogram(&[0.3; 5], 0.1).unwrap().len(), 1);
        assert!(histogram(&[1.0], 0.0).is_err());
        let bins = histogram(&[0.0, f64::NAN, 0.5, f64::INFINITY], 0.5).unwrap();
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 2);
    }

    #[test]
    fn csv_writers() {
        let mut buf = Vec::new();
        write_histogram(&histogram(&[0.1, 0.9], 0.5).unwrap(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "bin_lo,bin_hi,count\n0,0.500000,1\n0.500000,1.00000,1\n"
        );
        let mut buf = Vec::new();
        let cell = ErrorCell {
            freq: 16.0,
            phase: 72.0,
            rmse_cms: Some(0.59),
            pcc: None,
            n_cells: 100,
            n_excluded: 0,
        };
        write_error_map(&[cell], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "freq_hz,phase_deg,rmse_cms,pcc,n_cells,n_excluded\n16.0000,72.0000,0.590000,,100,0\n"
        );
    }
}
