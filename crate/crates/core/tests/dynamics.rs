use elastic_wire::config::{parse_config, RunConfig};
use elastic_wire::diagnostics::transport_check;
use elastic_wire::fields::{perp, Field};
use elastic_wire::run::{march, setup, MarchSummary};
use elastic_wire::study::observed_order;

fn config(text: &str) -> RunConfig {
    parse_config(text).unwrap_or_else(|e| panic!("{:?}", e.0))
}

fn run(c: &RunConfig) -> MarchSummary {
    let s = setup(c).unwrap();
    let m = march(c, &s, &mut |_, _| Ok(()));
    assert!(m.failure.is_none(), "{:?}", m.failure);
    m
}

fn with_n(template: &str, n: usize) -> RunConfig {
    config(&template.replace("\"n\": 0", &format!("\"n\": {n}")))
}

fn max_transport(m: &MarchSummary) -> f64 {
    m.records.iter().filter_map(|r| r.transport_residual).fold(0.0, f64::max)
}

const PERTURBED: &str = r#"{"manifold": {"name": "euclidean", "dim": 2}, "grid": {"n": 0}, "horizon": 0.25,
    "initial": {"curve": {"name": "perturbed_circle", "mode": 2, "amplitude": 0.01},
                "velocity": {"name": "normal_mode", "mode": 3, "amplitude": 0.05}},
    "diagnostics": {"every": 1, "bentness_every": 0}}"#;

#[test]
fn transport_identity_holds_to_second_order_along_the_march() {
    let coarse = max_transport(&run(&with_n(PERTURBED, 64)));
    let fine = max_transport(&run(&with_n(PERTURBED, 128)));
    assert!(coarse > 0.0);
    assert!(observed_order(coarse, fine, 2.0) > 1.8, "{coarse:.3e} {fine:.3e}");
}

#[test]
fn transport_check_detects_a_wrong_theta() {
    let c = with_n(PERTURBED, 128);
    let s = setup(&c).unwrap();
    let stepper = &s.stepper;
    let a = stepper.with_theta(&s.initial.to_state()).unwrap();
    let b = stepper.with_theta(&stepper.step(&a, s.dt).unwrap()).unwrap();
    let d = stepper.step(&b, s.dt).unwrap();
    let good = transport_check(stepper, &[a.clone(), b.clone(), d.clone()], s.dt).unwrap();
    // θ is nearly parallel to ξ here, so the control shifts its normal part
    let mut wrong = b.clone();
    let shift = perp(&Field::constant(128, &[1.0, 0.0]), &b.xi).unwrap();
    wrong.theta = b.theta.as_ref().map(|t| t.add(&shift));
    let bad = transport_check(stepper, &[a.clone(), wrong, d.clone()], s.dt).unwrap();
    assert!(bad > 1.0 && bad > 10.0 * good, "good {good:.3e} bad {bad:.3e}");
    assert!(transport_check(stepper, &[a.clone(), b.clone()], s.dt).is_err());
    assert!(transport_check(stepper, &[a, b, d], 0.5 * s.dt).is_err());
}

const CURVED: &str = r#"{"manifold": MODEL, "grid": {"n": 0}, "horizon": 0.25,
    "initial": {"curve": CURVE, "velocity": VELOCITY},
    "diagnostics": {"every": 4, "bentness_every": 8}, "seed": 3}"#;

fn curved(model: &str, curve: &str, velocity: &str) -> String {
    CURVED.replace("MODEL", model).replace("CURVE", curve).replace("VELOCITY", velocity)
}

fn energy_drift_converges(template: &str) {
    let coarse = run(&with_n(template, 32));
    let fine = run(&with_n(template, 64));
    for m in [&coarse, &fine] {
        assert!(m.records.iter().all(|r| r.is_finite()));
        assert!(m.records.iter().filter_map(|r| r.bentness).all(|b| b > 0.0 && b <= 1.0));
    }
    assert!(fine.energy_drift < 1e-2, "{}", fine.energy_drift);
    assert!(
        observed_order(coarse.energy_drift, fine.energy_drift, 2.0) > 1.5,
        "{:.3e} {:.3e}",
        coarse.energy_drift,
        fine.energy_drift
    );
}

#[test]
fn hyperbolic_loop_with_rotation_conserves_energy() {
    energy_drift_converges(&curved(
        r#"{"name": "hyperbolic"}"#,
        r#"{"name": "hyperbolic_loop", "center": [0.0, 1.0]}"#,
        r#"{"name": "rotation", "omega": 0.5}"#,
    ));
}

#[test]
fn sphere_loop_with_random_velocity_conserves_energy() {
    energy_drift_converges(&curved(
        r#"{"name": "sphere"}"#,
        r#"{"name": "sphere_loop", "center": [0.2, -0.1]}"#,
        r#"{"name": "random", "amplitude": 0.05, "modes": 3}"#,
    ));
}

#[test]
fn translated_circle_in_three_dimensions_moves_rigidly() {
    let c = config(
        r#"{"manifold": {"name": "euclidean", "dim": 3}, "grid": {"n": 64}, "horizon": 0.5,
            "initial": {"curve": {"name": "circle"}, "velocity": {"name": "translation", "velocity": [0.0, 0.0, 0.4]}},
            "diagnostics": {"every": 8, "bentness_every": 0}}"#,
    );
    let m = run(&c);
    let shift = m.last.gamma.sub(&m.initial.gamma);
    for k in 0..64 {
        let r = shift.row(k);
        assert!(r[0].abs() < 1e-9 && r[1].abs() < 1e-9, "{r:?}");
        assert!((r[2] - 0.2).abs() < 1e-9, "{r:?}");
    }
    assert!(m.energy_drift < 1e-10);
}
