//! Same drive pattern, three battery placements.

use vibrosheet::actuation::GridAxes;
use vibrosheet::robot::{battery_cells, BatteryPosition, RobotConfig};
use vibrosheet::sweep::{run_sweep, SweepSpec};

fn main() {
    let mut spec = SweepSpec::new(
        RobotConfig::default(),
        GridAxes {
            freqs: vec![16.0],
            phases: vec![0.0],
            duties_left: vec![0.6],
            duties_right: vec![0.0],
        },
    );
    spec.battery_positions = vec![
        BatteryPosition::P1,
        BatteryPosition::P2,
        BatteryPosition::P3,
    ];
    let result = run_sweep(&spec).unwrap();
    let base = result.records[0].velocity.unwrap();
    for r in &result.records {
        let v = r.velocity.unwrap();
        println!(
            "{} cells {:?}: {:+.3} cm/s ({:+.0}% vs P1)",
            r.battery.label(),
            battery_cells(&r.battery),
            100.0 * v,
            100.0 * (v - base) / base.abs()
        );
    }
}
