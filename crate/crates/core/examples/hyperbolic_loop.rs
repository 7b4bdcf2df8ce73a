//! A rotating loop in the hyperbolic half-plane, with the diagnostics
//! time series.

use elastic_wire::config::parse_config;
use elastic_wire::run::{march, setup};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config(
        r#"{"manifold": {"name": "hyperbolic"}, "grid": {"n": 128}, "horizon": 1.0,
            "initial": {"curve": {"name": "hyperbolic_loop", "center": [0.0, 1.0]},
                        "velocity": {"name": "rotation", "omega": 1.0}},
            "diagnostics": {"every": 16, "bentness_every": 16}}"#,
    )
    .map_err(|e| format!("{:?}", e.0))?;
    let s = setup(&config)?;
    println!("initial projection {:.1e}", s.initial.projection);
    let m = march(&config, &s, &mut |_, _| Ok(()));
    println!("{:>6} {:>14} {:>10} {:>10} {:>10} {:>10}", "t", "energy", "|ξ|²-1", "bentness", "μ min", "transport");
    for r in &m.records {
        println!(
            "{:6.3} {:14.10} {:10.2e} {:10.6} {:10.4} {:10.2e}",
            r.time,
            r.energy,
            r.constraint_drift,
            r.bentness.unwrap_or(f64::NAN),
            r.mu_min,
            r.transport_residual.unwrap_or(f64::NAN)
        );
    }
    println!("energy drift {:.2e}, γ/ξ drift {:.2e}", m.energy_drift, m.gamma_xi_drift);
    if let Some(f) = m.failure {
        println!("aborted: {}", f.message);
    }
    Ok(())
}
