//! Left-only frequency sweep at 60% duty, run in parallel.

use vibrosheet::actuation::{linspace_step, GridAxes};
use vibrosheet::robot::RobotConfig;
use vibrosheet::sweep::{best, run_sweep, Objective, SweepSpec};

fn main() {
    let spec = SweepSpec::new(
        RobotConfig::default(),
        GridAxes {
            freqs: linspace_step(8.0, 26.0, 2.0),
            phases: vec![0.0],
            duties_left: vec![0.6],
            duties_right: vec![0.0],
        },
    );
    let result = run_sweep(&spec).unwrap();
    for r in &result.records {
        let v = r.velocity.unwrap_or(f64::NAN);
        let bar = "#".repeat((v.abs() * 2000.0).round() as usize);
        println!(
            "{:4.0} Hz  {:+.3} cm/s  {bar}",
            r.pattern.frequency,
            100.0 * v
        );
    }
    let top = best(&result, Objective::MaxVelocityLeft).unwrap();
    println!("fastest at {} Hz", top.pattern.frequency);
}
