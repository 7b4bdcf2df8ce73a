//! Energy and constraint drift of the perturbed circle under joint refinement
//! of Δx and Δt.

use elastic_wire::config::parse_config;
use elastic_wire::study::convergence_study;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config(
        r#"{"manifold": {"name": "euclidean", "dim": 2}, "grid": {"n": 32}, "dt": 0.015625, "horizon": 1.0,
            "mode": "convergence-study", "study": {"levels": 4},
            "initial": {"curve": {"name": "perturbed_circle", "mode": 2, "amplitude": 0.01}},
            "diagnostics": {"every": 1000, "bentness_every": 0}}"#,
    )
    .map_err(|e| format!("{:?}", e.0))?;
    for line in convergence_study(&config).summary_lines() {
        println!("{line}");
    }
    Ok(())
}
