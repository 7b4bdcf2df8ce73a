//! Configuration-driven run writing the same output files as the binary.
//!
//! `cargo run --example run_config -- path/to/config.json out_dir`

use std::path::PathBuf;

use elastic_wire::config::parse_config;
use elastic_wire::run::{execute, RunStatus};

const DEFAULT: &str = r#"{"manifold": {"name": "sphere"}, "grid": {"n": 64}, "horizon": 0.5,
    "initial": {"curve": {"name": "sphere_loop", "center": [0.2, 0.0]},
                "velocity": {"name": "random", "amplitude": 0.05, "modes": 3}},
    "output": {"snapshot_every": 8}, "seed": 11}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let text = match args.next() {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT.to_string(),
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("elastic-wire-example"));
    let config = parse_config(&text).map_err(|e| format!("{:?}", e.0))?;
    match execute(&config, &out, false)? {
        RunStatus::Completed => println!("completed, outputs in {}", out.display()),
        RunStatus::Aborted(f) => println!("aborted ({}): {}", f.kind, f.message),
    }
    Ok(())
}
