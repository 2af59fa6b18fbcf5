//! Stage power, efficiency and cost of transport for a simulated gait.

use vibrosheet::actuation::ActuationPattern;
use vibrosheet::dynamics::{
    simulate, steady_state_velocity, ContactParams, IntegratorParams, Protocol,
};
use vibrosheet::metrics::{cost_of_transport, efficiency, stage_power, PowerModel};
use vibrosheet::robot::{compile, RobotConfig};

fn main() {
    let pm = PowerModel::default();

    // a measured operating point: 0.46 W at 2.9 cm/s
    let cot = cost_of_transport(0.46, 0.0445, 0.029, 9.8).unwrap();
    println!("reference point: COT {cot:.1}");

    let chain = compile(&RobotConfig::default()).unwrap();
    let integ = IntegratorParams::default();
    for pattern in [
        ActuationPattern::left_only(16.0, 0.6),
        ActuationPattern::new(16.0, 72.0, 0.6, 0.3),
    ] {
        let traj = simulate(
            &chain,
            &pattern,
            &Protocol::default(),
            &integ,
            &ContactParams::default(),
        )
        .unwrap();
        let v = steady_state_velocity(&traj, &pattern).unwrap();
        let p = stage_power(&pattern, &pm);
        println!(
            "f={} Φ={} D=({}, {}): v {:+.3} cm/s, P {:.3} W, {:.2} cm/s/W, COT {:.0}",
            pattern.frequency,
            pattern.phase_deg,
            pattern.duty_left,
            pattern.duty_right,
            100.0 * v,
            p,
            efficiency(v, p).unwrap(),
            cost_of_transport(p, chain.total_mass, v, integ.gravity).unwrap()
        );
    }
}
