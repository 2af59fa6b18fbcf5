//! Compile the default two-actuator robot and list its links and feet.

use vibrosheet::robot::{compile, validate, BatteryPosition, RobotConfig};

fn main() {
    let config = RobotConfig::default();
    assert!(validate(&config).is_empty());
    let chain = compile(&config).expect("default config compiles");
    println!(
        "{} links, {} joints, {:.4} kg, body {:.3} m",
        chain.links.len(),
        chain.joints.len(),
        chain.total_mass,
        chain.body_length()
    );
    for (i, link) in chain.links.iter().enumerate() {
        println!(
            "link {i:2}  start {:.4} m  length {:.4} m  mass {:.5} kg",
            link.start, link.length, link.mass
        );
    }
    for foot in &chain.feet {
        println!("foot on link {}", foot.host);
    }

    for position in [
        BatteryPosition::P1,
        BatteryPosition::P2,
        BatteryPosition::P3,
    ] {
        let moved = RobotConfig {
            battery_position: position.clone(),
            ..RobotConfig::default()
        };
        let masses: Vec<String> = compile(&moved)
            .unwrap()
            .links
            .iter()
            .map(|l| format!("{:.4}", l.mass * 1e3))
            .collect();
        println!("{} link masses (g): {}", position.label(), masses.join(" "));
    }
}
