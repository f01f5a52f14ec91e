use proptest::prelude::*;
use tacfoot_core::balance::*;
use tacfoot_core::harness::TactileSensor;
use tacfoot_core::{DisplacementField, Error, LegGeometry, ScenarioState};

fn geom() -> LegGeometry {
    LegGeometry::default()
}

// acos(l cos(g - f) / L) + 90 - g, written out independently in radians
fn eq2_oracle(g: f64, f: f64, l: f64, big_l: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let c = (g - f) * pi / 180.0;
    (l * c.cos() / big_l).acos() * 180.0 / pi + 90.0 - g
}

#[test]
fn control_angle_flat_and_degenerate_offset() {
    let phi = control_angle(0.0, 0.0, &geom()).unwrap();
    assert!((phi - eq2_oracle(0.0, 0.0, 0.03, 0.22)).abs() < 1e-9);
    assert!((phi - 172.16).abs() < 0.005);
    let zero = LegGeometry {
        shaft_offset: 0.0,
        ..geom()
    };
    assert!((control_angle(0.0, 0.0, &zero).unwrap() - 180.0).abs() < 1e-9);
}

#[test]
fn control_angle_slope_is_minus_one() {
    let base = eq2_oracle(0.0, 0.0, 0.03, 0.22);
    for g in [-9.5, 0.0, 9.0] {
        let phi = control_angle(g, g, &geom()).unwrap();
        assert!((phi - (base - g)).abs() < 1e-9, "at {g}");
        let h = 1e-4;
        let slope =
            (control_angle(g + h, g + h, &geom()).unwrap() - control_angle(g - h, g - h, &geom()).unwrap()) / (2.0 * h);
        assert!((slope + 1.0).abs() < 1e-6);
    }
}

#[test]
fn control_angle_domain_error_reports_values() {
    let bad = LegGeometry {
        shaft_offset: 0.3,
        leg_length: 0.22,
        ..geom()
    };
    match control_angle(1.0, 1.0, &bad) {
        Err(Error::ControlDomain { ratio, theta_g, .. }) => {
            assert!(ratio > 1.0);
            assert_eq!(theta_g, 1.0);
        }
        other => panic!("expected domain error, got {other:?}"),
    }
}

#[test]
fn duty_cycle_examples() {
    let g = ControllerGains::default();
    assert!((duty_cycle(0.0, 0.0, &g) - 0.025).abs() < 1e-9);
    let phi = 172.16;
    assert!((duty_cycle(phi, 0.0, &g) - 0.01 * (phi / 28.8 + 2.5)).abs() < 1e-9);
    assert!((duty_cycle(phi, 0.0, &g) - 0.08478).abs() < 1e-5);
    assert!((duty_cycle(90.0, 100.0, &g) - 0.02625).abs() < 1e-9);
    assert_eq!(duty_cycle(f64::NAN, 0.0, &g), 0.0);
    assert_eq!(duty_cycle(1e9, 0.0, &g), 1.0);
    assert_eq!(duty_cycle(-1e9, 0.0, &g), 0.0);
}

#[test]
fn duty_angle_map_spans_servo_travel() {
    let g = ControllerGains::default();
    assert!((g.angle_for_duty(0.025)).abs() < 1e-9);
    assert!((g.angle_for_duty(0.0875) - 180.0).abs() < 1e-9);
    assert!((g.angle_for_duty(g.duty_for_angle(123.4)) - 123.4).abs() < 1e-9);
}

#[test]
fn contact_detect_trivial_fields() {
    assert!(!contact_detect(&DisplacementField::zeros(8, 8), 0.15));
    assert!(contact_detect(&DisplacementField::constant(8, 8, [1.0, 0.0]), 0.15));
}

#[test]
fn rate_estimator_median_and_reset() {
    let mut r = RateEstimator::default();
    assert_eq!(r.update(10.0, 0.02), 0.0);
    // mean of two, then median of three rejects the spike
    assert!((r.update(12.0, 0.02) - 50.0).abs() < 1e-9);
    assert!((r.update(100.0, 0.02) - 50.0).abs() < 1e-9);
    r.reset();
    assert_eq!(r.update(-40.0, 0.02), 0.0);
}

#[test]
fn lifted_frames_rarely_trigger_contact() {
    let cfg = SimConfig::default();
    let sensor = TactileSensor::new(&cfg.sensor, 3).unwrap();
    let state = ScenarioState {
        theta_g: 4.0,
        theta_leg: 90.0,
        theta_f: 0.0,
        contact: false,
        t: 0.0,
    };
    let false_hits = (0..1000u64)
        .filter(|&s| contact_detect(&sensor.sense(&state, s).unwrap(), cfg.threshold()))
        .count();
    assert!(false_hits <= 10, "{false_hits} false contacts");
    let touching = ScenarioState { contact: true, ..state };
    assert!(contact_detect(&sensor.sense(&touching, 0).unwrap(), cfg.threshold()));
}

#[test]
fn profile_sampling_interpolates_and_holds() {
    let p = Profile::four_stage();
    assert!((p.duration() - 23.0).abs() < 1e-12);
    let s = p.sample(4.0).unwrap();
    assert!((s.theta_g - 4.5).abs() < 1e-12);
    assert!((p.sample(7.0).unwrap().theta_g - 9.0).abs() < 1e-12);
    assert!((p.sample(17.0).unwrap().theta_g + 9.5).abs() < 1e-12);
    assert!((p.sample(99.0).unwrap().theta_g).abs() < 1e-12);
    let lift = Profile::lift_and_replace(9.0);
    assert!(!lift.sample(5.0).unwrap().contact);
    assert!(lift.sample(8.0).unwrap().contact);
    assert_eq!(lift.lift_window(), Some((3.0, 8.0)));
}

#[test]
fn profile_json_round_trip_and_errors() {
    let text = r#"[
  {"t": 0, "theta_g": 0, "theta_leg_cmd": "controlled", "contact": true},
  {"t": 1.5, "theta_g": 3, "theta_leg_cmd": 90, "contact": false}
]"#;
    let p = Profile::from_json(text).unwrap();
    assert_eq!(p.keyframes()[1].theta_leg_cmd, LegCmd::Fixed(90.0));
    assert_eq!(Profile::from_json(&p.to_json()).unwrap(), p);

    let broken = "[\n  {\"t\": 0, \"theta_g\": 0,\n   \"theta_leg_cmd\": \"controlled\" \"contact\": true}\n]";
    match Profile::from_json(broken) {
        Err(Error::ProfileParse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
    let bad_tag = r#"[{"t": 0, "theta_g": 0, "theta_leg_cmd": "free", "contact": true}]"#;
    assert!(matches!(Profile::from_json(bad_tag), Err(Error::ProfileParse { .. })));
    let backwards = r#"[{"t": 2, "theta_g": 0, "theta_leg_cmd": 90, "contact": true},
                        {"t": 1, "theta_g": 0, "theta_leg_cmd": 90, "contact": true}]"#;
    assert!(Profile::from_json(backwards).is_err());
}

fn truth_run(profile: &Profile, mode: SensorMode, cfg: &SimConfig) -> ControlTrace {
    let sensor = TactileSensor::new(&cfg.sensor, 7).unwrap();
    run_scenario(profile, mode, cfg, sensor, TruthEstimator::new(0.2, cfg.seed)).unwrap()
}

#[test]
fn empty_profile_gives_empty_trace() {
    let cfg = SimConfig::default();
    assert!(truth_run(&Profile::default(), SensorMode::Tactile, &cfg).is_empty());
}

#[test]
fn flat_profile_settles_from_offset_start() {
    let cfg = SimConfig {
        initial_servo: Some(160.0),
        ..SimConfig::default()
    };
    let trace = truth_run(&Profile::flat(3.0), SensorMode::Tactile, &cfg);
    assert_eq!(trace.len(), 151);
    assert!(trace.rows.windows(2).all(|w| w[1].t > w[0].t));
    let target = eq2_oracle(0.0, 0.0, 0.03, 0.22);
    let settled = trace
        .rows
        .iter()
        .filter(|r| r.t >= 2.0)
        .all(|r| (r.phi_ctrl - target).abs() < 0.5);
    assert!(settled);
    assert!(trace.rows.iter().all(|r| (0.0..=1.0).contains(&r.duty)));
}

#[test]
fn fixed_leg_command_overrides_controller() {
    let k = |t| Keyframe {
        t,
        theta_g: 2.0,
        theta_leg_cmd: LegCmd::Fixed(85.0),
        contact: true,
    };
    let p = Profile::new(vec![k(0.0), k(0.5)]).unwrap();
    let trace = truth_run(&p, SensorMode::ImuFoot, &SimConfig::default());
    assert!(trace.rows.iter().all(|r| (r.theta_leg - 85.0).abs() < 1e-9));
}

#[test]
fn lift_and_replace_reproduces_mode_differences() {
    let cfg = SimConfig::default();
    let profile = Profile::lift_and_replace(9.0);
    let (_, down) = profile.lift_window().unwrap();

    let tactile = truth_run(&profile, SensorMode::Tactile, &cfg);
    assert!(tactile.duty_held_without_contact());
    assert!(tactile.rows.iter().filter(|r| !r.contact).all(|r| !r.actuated));
    assert!(tactile.final_tracking_error().unwrap() < 1.0);
    assert!(tactile.lost_stance_at().is_none());

    let foot = truth_run(&profile, SensorMode::ImuFoot, &cfg);
    assert!(foot.saturated_while_lifted());
    assert!(!foot.duty_held_without_contact());

    let leg = truth_run(&profile, SensorMode::ImuLeg, &cfg);
    let fell = leg.lost_stance_at().expect("leg IMU mode should lose stance");
    assert!(fell >= down);
}

#[test]
fn trace_csv_has_one_row_per_tick() {
    let trace = truth_run(&Profile::flat(0.2), SensorMode::Tactile, &SimConfig::default());
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], TRACE_HEADER);
    assert_eq!(lines.len(), trace.len() + 1);
    let ncol = TRACE_HEADER.split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == ncol));
    assert!(lines[1].contains(",tactile,"));
}

#[test]
fn sensor_mode_parses() {
    for m in SensorMode::ALL {
        assert_eq!(m.as_str().parse::<SensorMode>().unwrap(), m);
    }
    assert!("imu".parse::<SensorMode>().is_err());
}

proptest! {
    #[test]
    fn eq2_shift_symmetry(g in -30.0f64..30.0, f in -30.0f64..30.0, delta in -20.0f64..20.0) {
        let a = control_angle(g + delta, f + delta, &geom()).unwrap();
        let b = control_angle(g, f, &geom()).unwrap();
        prop_assert!((a - (b - delta)).abs() < 1e-9);
    }

    #[test]
    fn duty_always_in_unit_interval(phi in prop::num::f64::ANY, rate in prop::num::f64::ANY) {
        let d = duty_cycle(phi, rate, &ControllerGains::default());
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn gated_duty_constant_without_contact(level in 0.0f64..0.02) {
        // sub-threshold fields never actuate
        let mut sim = BalanceSim::new(
            SimConfig::default(),
            SensorMode::Tactile,
            TactileSensor::new(&SimConfig::default().sensor, 1).unwrap(),
            TruthEstimator::exact(),
            0.0,
        ).unwrap();
        let lifted = ProfileSample { theta_g: level * 100.0, leg_cmd: LegCmd::Controlled, contact: false };
        let first = sim.step(0.0, lifted).unwrap();
        for k in 1..4 {
            let row = sim.step(k as f64 * 0.02, lifted).unwrap();
            prop_assert!(!row.actuated);
            prop_assert_eq!(row.duty, first.duty);
        }
    }
}
