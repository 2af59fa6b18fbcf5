//! RMSE and correlation between the checked-in simulated and measured grids.

use std::path::Path;

use vibrosheet::compare::{error_maps, histogram, load_experiment};
use vibrosheet::sweep::{export_grid, Axis, GridSlice, Metric, SweepResult};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let sim = SweepResult::read_csv(dir.join("comparison_sim.csv")).unwrap();
    let exp = load_experiment(dir.join("comparison_exp.csv")).unwrap();
    println!("{}", exp.provenance);
    let maps = error_maps(&sim, &exp).unwrap();
    for c in &maps {
        println!(
            "f={} Hz Φ={}°: RMSE {:.3} cm/s, PCC {:.3} over {} cells",
            c.freq,
            c.phase,
            c.rmse_cms.unwrap_or(f64::NAN),
            c.pcc.unwrap_or(f64::NAN),
            c.n_cells
        );
    }
    let rmses: Vec<f64> = maps.iter().filter_map(|c| c.rmse_cms).collect();
    for bin in histogram(&rmses, 0.1).unwrap() {
        println!("[{:.1}, {:.1}) {}", bin.lo, bin.hi, bin.count);
    }

    let slice = GridSlice {
        fixed: vec![(Axis::Freq, 16.0), (Axis::Phase, 72.0)],
        battery: None,
    };
    let map = export_grid(
        &sim,
        Axis::DutyLeft,
        Axis::DutyRight,
        &slice,
        Metric::VelocityMps,
    )
    .unwrap();
    map.write_csv(std::io::stdout()).unwrap();
}
