//! The round circle at rest in the plane is an equilibrium: θ = -ξ, μ = 4π²
//! and the march leaves it in place up to roundoff.

use std::f64::consts::PI;

use elastic_wire::config::parse_config;
use elastic_wire::dynamics::reconstruct_mu;
use elastic_wire::run::{march, setup};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config(
        r#"{"manifold": {"name": "euclidean", "dim": 2}, "grid": {"n": 128}, "horizon": 1.0,
            "initial": {"curve": {"name": "circle"}}, "diagnostics": {"every": 32}}"#,
    )
    .map_err(|e| format!("{:?}", e.0))?;
    let s = setup(&config)?;
    let start = s.stepper.with_theta(&s.initial.to_state())?;
    let geo = s.stepper.geometry(&start)?;
    let theta = start.theta.as_ref().expect("θ was just solved");
    let mu = reconstruct_mu(&s.stepper.grid, &start, &geo, theta)?;
    let theta_err = theta.add(&start.xi).values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("max |θ + ξ|      = {theta_err:.2e}");
    println!("μ range          = [{:.10}, {:.10}], 4π² = {:.10}", mu.min(), mu.max(), 4.0 * PI * PI);

    let m = march(&config, &s, &mut |_, _| Ok(()));
    for r in &m.records {
        println!("t = {:.3}  energy {:.12}  bentness {:?}", r.time, r.energy, r.bentness);
    }
    println!("displacement {:.2e}, energy drift {:.2e}", m.max_displacement, m.energy_drift);
    Ok(())
}
