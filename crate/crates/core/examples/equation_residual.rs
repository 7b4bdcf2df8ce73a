//! Reconstructs μ along a marched trajectory and evaluates the residual of the
//! single equation of motion, with a scaled-tangent control.

use elastic_wire::config::parse_config;
use elastic_wire::dynamics::residual_base_single;
use elastic_wire::fields::CurveState;
use elastic_wire::run::setup;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for n in [64, 128, 256] {
        let config = parse_config(&format!(
            r#"{{"manifold": {{"name": "euclidean", "dim": 2}}, "grid": {{"n": {n}}},
                "initial": {{"curve": {{"name": "perturbed_circle", "mode": 2, "amplitude": 0.01}}}}}}"#
        ))
        .map_err(|e| format!("{:?}", e.0))?;
        let s = setup(&config)?;
        let mut traj = vec![s.stepper.with_theta(&s.initial.to_state())?];
        for _ in 0..n / 16 {
            let next = s.stepper.step(traj.last().expect("nonempty"), s.dt)?;
            traj.push(next);
        }
        let report = residual_base_single(&s.stepper, &traj, s.dt)?;
        let scaled: Vec<CurveState> =
            traj.iter().map(|st| CurveState { xi: st.xi.scaled(1.1), theta: None, ..st.clone() }).collect();
        let control = residual_base_single(&s.stepper, &scaled, s.dt)?;
        println!(
            "N = {n:3}: residual {:.3e}, γ/ξ drift {:.2e}, scaled-ξ control {:.3e}",
            report.max_residual(),
            report.max_drift(),
            control.max_residual()
        );
    }
    Ok(())
}
