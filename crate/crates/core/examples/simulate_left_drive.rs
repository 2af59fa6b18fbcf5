//! Drive only the left actuator and report the steady-state crawl.

use vibrosheet::actuation::ActuationPattern;
use vibrosheet::dynamics::{
    simulate, steady_state_velocity, ContactParams, IntegratorParams, Protocol,
};
use vibrosheet::robot::{compile, RobotConfig};

fn main() {
    let chain = compile(&RobotConfig::default()).unwrap();
    let pattern = ActuationPattern::left_only(16.0, 0.6);
    let traj = simulate(
        &chain,
        &pattern,
        &Protocol::default(),
        &IntegratorParams::default(),
        &ContactParams::default(),
    )
    .unwrap();
    let v = steady_state_velocity(&traj, &pattern).unwrap();
    println!(
        "steady-state velocity {:+.3} cm/s (positive is leftward)",
        100.0 * v
    );

    let mirrored = steady_state_velocity(
        &simulate(
            &chain,
            &pattern.mirrored(),
            &Protocol::default(),
            &IntegratorParams::default(),
            &ContactParams::default(),
        )
        .unwrap(),
        &pattern.mirrored(),
    )
    .unwrap();
    println!("right-only drive         {:+.3} cm/s", 100.0 * mirrored);

    let path = std::env::temp_dir().join("vibrosheet_left_drive.csv");
    traj.write_csv(std::fs::File::create(&path).unwrap())
        .unwrap();
    println!("trajectory written to {}", path.display());
}
