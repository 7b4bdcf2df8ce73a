//! Coupled fixed-point iteration on a short window, compared with the march.

use elastic_wire::config::parse_config;
use elastic_wire::dynamics::{picard_coupled, CoupledPicardOptions};
use elastic_wire::fields::m0;
use elastic_wire::run::setup;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config(
        r#"{"manifold": {"name": "euclidean", "dim": 2}, "grid": {"n": 128},
            "initial": {"curve": {"name": "perturbed_circle", "mode": 2, "amplitude": 0.05},
                        "velocity": {"name": "normal_mode", "mode": 2, "amplitude": 0.1}}}"#,
    )
    .map_err(|e| format!("{:?}", e.0))?;
    let s = setup(&config)?;
    let start = s.initial.to_state();
    let opts = CoupledPicardOptions { window_steps: 8, ..Default::default() };
    let (traj, report) = picard_coupled(&s.stepper, &start, &opts)?;
    for (i, d) in report.distances.iter().enumerate() {
        let ratio = if i > 0 { format!("{:.3e}", report.ratios[i - 1]) } else { "-".into() };
        println!("iteration {:2}: distance {d:.3e}, ratio {ratio}", i + 1);
    }
    println!("converged: {}", report.converged);

    let mut state = s.stepper.with_theta(&start)?;
    for (j, p) in traj.states.iter().enumerate().skip(1) {
        state = s.stepper.step(&state, traj.dt)?;
        println!("level {j}: |γ_picard - γ_march| = {:.2e}", m0(&p.gamma.sub(&state.gamma)));
    }
    Ok(())
}
