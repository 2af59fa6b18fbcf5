use vibrosheet::actuation::{ActuationPattern, Channel};
use vibrosheet::dynamics::{
    mechanical_energy, simulate, static_equilibrium, steady_state_velocity, step, BodyState,
    ContactParams, DynamicsError, IntegratorParams, Protocol, Stepper,
};
use vibrosheet::robot::{compile, ChainModel, Link, RobotConfig};

fn default_chain() -> ChainModel {
    compile(&RobotConfig::default()).unwrap()
}

fn lifted(chain: &ChainModel, height: f64) -> BodyState {
    let mut s = BodyState::resting(chain);
    s.q[1] += height;
    s
}

#[test]
fn links_stay_connected() {
    let chain = default_chain();
    let traj_end = simulate(
        &chain,
        &ActuationPattern::left_only(16.0, 0.6),
        &Protocol {
            transient_s: 0.5,
            measure_s: 0.5,
        },
        &IntegratorParams::default(),
        &ContactParams::default(),
    )
    .unwrap()
    .final_state
    .unwrap();
    let frame = traj_end.frame(&chain);
    for i in 0..chain.links.len() - 1 {
        let end = [
            frame.start[i][0] + chain.links[i].length * frame.axis[i][0],
            frame.start[i][1] + chain.links[i].length * frame.axis[i][1],
        ];
        let gap = ((end[0] - frame.start[i + 1][0]).powi(2)
            + (end[1] - frame.start[i + 1][1]).powi(2))
        .sqrt();
        assert!(gap < 1e-12, "gap {gap} between links {i} and {}", i + 1);
    }
}

#[test]
fn resting_robot_stays_put() {
    let chain = default_chain();
    let integ = IntegratorParams::default();
    let contacts = ContactParams::default();
    let mut state = BodyState::resting(&chain);
    let mut stepper = Stepper::new(&chain, &contacts, &integ);
    let idle = ActuationPattern::new(16.0, 0.0, 0.0, 0.0);
    // the flat start pose first sags onto the feet
    for _ in 0..10_000 {
        stepper.advance(&mut state, &idle).unwrap();
    }
    let x0 = state.center_of_mass(&chain)[0];
    for _ in 0..100_000 {
        stepper.advance(&mut state, &idle).unwrap();
    }
    let dx = state.center_of_mass(&chain)[0] - x0;
    assert!(dx.abs() < 1e-4, "drifted {dx} m");
}

#[test]
fn vacuum_fixed_point() {
    let chain = default_chain();
    let integ = IntegratorParams {
        gravity: 0.0,
        ..Default::default()
    };
    let state = lifted(&chain, 0.05);
    let idle = ActuationPattern::new(16.0, 0.0, 0.0, 0.0);
    let mut s = state.clone();
    for _ in 0..1000 {
        s = step(&s, &chain, &idle, &ContactParams::default(), &integ).unwrap();
    }
    assert_eq!(s.q, state.q);
    assert!(s.v.iter().all(|&v| v == 0.0));
}

#[test]
fn single_link_free_fall() {
    let length = 0.1;
    let mass = 0.01;
    let chain = ChainModel {
        links: vec![Link {
            start: 0.0,
            length,
            mass,
            inertia: mass * length * length / 12.0,
        }],
        joints: vec![],
        feet: vec![],
        total_mass: mass,
        channels: 0,
    };
    let integ = IntegratorParams::default();
    let mut state = BodyState::resting(&chain);
    let z0 = 0.1;
    state.q[1] = z0;
    let idle = ActuationPattern::new(16.0, 0.0, 0.0, 0.0);
    let mut stepper = Stepper::new(&chain, &ContactParams::default(), &integ);
    let steps = (0.1 / integ.dt).round() as usize;
    for _ in 0..steps {
        stepper.advance(&mut state, &idle).unwrap();
    }
    let t = steps as f64 * integ.dt;
    let exact = z0 - 0.5 * 9.8 * t * t;
    let rel = (state.q[1] - exact).abs() / exact.abs();
    assert!(rel < 1e-3, "z = {}, exact {exact}, rel {rel}", state.q[1]);
}

/// Drop the robot with bent joints and no drive, tracking total energy.
fn max_energy_gain(chain: &ChainModel, contacts: &ContactParams, steps: usize) -> f64 {
    let integ = IntegratorParams::default();
    let mut state = lifted(chain, 0.002);
    for (k, i) in (3..state.q.len()).enumerate() {
        state.q[i] += 0.02 * ((k % 3) as f64 - 1.0);
    }
    state.v[0] = 0.02;
    let idle = ActuationPattern::new(16.0, 0.0, 0.0, 0.0);
    let mut stepper = Stepper::new(chain, contacts, &integ);
    let mut prev = mechanical_energy(&state, chain, contacts, integ.gravity).total();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..steps {
        stepper.advance(&mut state, &idle).unwrap();
        let e = mechanical_energy(&state, chain, contacts, integ.gravity).total();
        worst = worst.max(e - prev);
        prev = e;
    }
    worst
}

#[test]
fn passivity_without_drive() {
    let chain = default_chain();
    let gain = max_energy_gain(&chain, &ContactParams::default(), 5000);
    assert!(gain <= 1e-9, "energy grew by {gain} J in one step");
}

#[test]
fn passivity_without_damping() {
    let mut config = RobotConfig::default();
    config.materials.joint_damping = 0.0;
    let chain = compile(&config).unwrap();
    let gain = max_energy_gain(&chain, &ContactParams::default(), 5000);
    assert!(gain <= 1e-9, "energy grew by {gain} J in one step");
}

#[test]
fn friction_stays_in_cone() {
    let chain = default_chain();
    let contacts = ContactParams::default();
    for pattern in [
        ActuationPattern::left_only(16.0, 0.6),
        ActuationPattern::new(10.0, 144.0, 0.9, 0.5),
    ] {
        let traj = simulate(
            &chain,
            &pattern,
            &Protocol {
                transient_s: 1.0,
                measure_s: 1.0,
            },
            &IntegratorParams {
                sample_stride: 1,
                ..Default::default()
            },
            &contacts,
        )
        .unwrap();
        for s in &traj.samples {
            for f in &s.feet {
                assert!(f.normal >= 0.0);
                assert!(
                    f.tangential.abs() <= contacts.friction_coefficient * f.normal + 1e-12,
                    "t = {}: |Ft| = {} > μN = {}",
                    s.time,
                    f.tangential.abs(),
                    contacts.friction_coefficient * f.normal
                );
            }
        }
    }
}

#[test]
fn settles_to_static_equilibrium() {
    let chain = default_chain();
    let integ = IntegratorParams {
        gravity: 0.0,
        ..Default::default()
    };
    let mut state = lifted(&chain, 0.05);
    // full duty holds both channels at the high level
    let hold = ActuationPattern::new(16.0, 0.0, 1.0, 1.0);
    assert_eq!(hold.voltage_at(Channel::Left, 0.3), hold.v_high);
    let mut stepper = Stepper::new(&chain, &ContactParams::default(), &integ);
    for _ in 0..20_000 {
        stepper.advance(&mut state, &hold).unwrap();
    }
    let want = static_equilibrium(&chain, hold.v_high, hold.v_high);
    for (got, want) in state.joint_angles().iter().zip(&want) {
        assert!((got - want).abs() < 1e-4, "θ = {got}, expected {want}");
    }
}

#[test]
fn settles_per_channel() {
    let chain = default_chain();
    let integ = IntegratorParams {
        gravity: 0.0,
        ..Default::default()
    };
    let mut state = lifted(&chain, 0.05);
    let hold = ActuationPattern::new(16.0, 0.0, 1.0, 0.0);
    let mut stepper = Stepper::new(&chain, &ContactParams::default(), &integ);
    for _ in 0..20_000 {
        stepper.advance(&mut state, &hold).unwrap();
    }
    let want = static_equilibrium(&chain, hold.v_high, 0.0);
    for (got, want) in state.joint_angles().iter().zip(&want) {
        assert!((got - want).abs() < 1e-4, "θ = {got}, expected {want}");
    }
}

#[test]
fn reruns_are_bit_identical() {
    let chain = default_chain();
    let run = || {
        simulate(
            &chain,
            &ActuationPattern::new(14.0, 72.0, 0.6, 0.3),
            &Protocol {
                transient_s: 0.5,
                measure_s: 1.0,
            },
            &IntegratorParams::default(),
            &ContactParams::default(),
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    a.write_csv(&mut csv_a).unwrap();
    b.write_csv(&mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn coarse_step_fails() {
    let chain = default_chain();
    let integ = IntegratorParams {
        dt: 1e-2,
        ..Default::default()
    };
    assert!(integ.stability_warning(&ContactParams::default()).is_some());
    let err = simulate(
        &chain,
        &ActuationPattern::left_only(16.0, 0.6),
        &Protocol::default(),
        &integ,
        &ContactParams::default(),
    )
    .unwrap_err();
    match err {
        DynamicsError::NumericalBlowup { time } | DynamicsError::ContactNotConverged { time } => {
            assert!(time > 0.0 && time < 10.0)
        }
        other => panic!("expected blowup, got {other:?}"),
    }
}

#[test]
fn idle_pattern_does_not_travel() {
    let chain = default_chain();
    let traj = simulate(
        &chain,
        &ActuationPattern::new(16.0, 0.0, 0.0, 0.0),
        &Protocol::default(),
        &IntegratorParams::default(),
        &ContactParams::default(),
    )
    .unwrap();
    let moved = traj.samples.last().unwrap().x_com - traj.x_com_at(traj.measure_from);
    assert!(moved.abs() < 1e-4);
    let v = steady_state_velocity(&traj, &ActuationPattern::new(16.0, 0.0, 0.0, 0.0)).unwrap();
    assert!(v.abs() < 1e-4);
}

#[test]
fn time_stamps_increase() {
    let chain = default_chain();
    let traj = simulate(
        &chain,
        &ActuationPattern::left_only(16.0, 0.6),
        &Protocol {
            transient_s: 0.1,
            measure_s: 0.1,
        },
        &IntegratorParams::default(),
        &ContactParams::default(),
    )
    .unwrap();
    assert!(traj.samples.windows(2).all(|w| w[1].time > w[0].time));
    assert_eq!(traj.samples.len(), 201);
}

/// Left foot pressed harder while the left actuator bends, lighter while it relaxes.
#[test]
fn bending_stroke_loads_left_foot() {
    let chain = default_chain();
    let contacts = ContactParams::default();
    let integ = IntegratorParams {
        sample_stride: 1,
        ..Default::default()
    };
    let idle = simulate(
        &chain,
        &ActuationPattern::new(16.0, 0.0, 0.0, 0.0),
        &Protocol {
            transient_s: 1.0,
            measure_s: 0.0,
        },
        &integ,
        &contacts,
    )
    .unwrap();
    let left = 0;
    assert!(chain.feet[left].host < chain.links.len() / 2);
    let rest = idle.samples.last().unwrap().feet[left].normal;
    assert!(rest > 0.0);

    let pattern = ActuationPattern::left_only(16.0, 0.6);
    let traj = simulate(
        &chain,
        &pattern,
        &Protocol {
            transient_s: 2.0,
            measure_s: 1.0,
        },
        &integ,
        &contacts,
    )
    .unwrap();
    let period = pattern.period();
    let (mut stroke, mut relax) = (Vec::new(), Vec::new());
    for s in traj.samples.iter().filter(|s| s.time >= 2.0) {
        let phase = (s.time / period).fract();
        let n = s.feet[left].normal;
        if phase < pattern.duty_left {
            stroke.push(n);
        } else {
            relax.push(n);
        }
    }
    let peak_stroke = stroke.iter().copied().fold(0.0, f64::max);
    let low_relax = relax.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(
        peak_stroke > rest,
        "stroke peak {peak_stroke} N vs rest {rest} N"
    );
    assert!(
        low_relax < rest,
        "relaxation low {low_relax} N vs rest {rest} N"
    );
}
