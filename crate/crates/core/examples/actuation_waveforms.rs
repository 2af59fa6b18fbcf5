//! Sample both drive channels over one period and print them as CSV.

use vibrosheet::actuation::{ActuationPattern, Channel};

fn main() {
    let pattern = ActuationPattern::new(16.0, 72.0, 0.6, 0.3);
    pattern.validate().unwrap();
    let period = pattern.period();
    println!("t_s,left_v,right_v");
    let n = 64;
    for k in 0..=n {
        let t = period * k as f64 / n as f64;
        println!(
            "{t:.6},{:.2},{:.2}",
            pattern.voltage_at(Channel::Left, t),
            pattern.voltage_at(Channel::Right, t)
        );
    }
    eprintln!(
        "mean voltage: left {:.1} V, right {:.1} V",
        pattern.mean_voltage(Channel::Left),
        pattern.mean_voltage(Channel::Right)
    );
}
