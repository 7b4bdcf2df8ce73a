//! Convergence studies: the same run at `N, 2N, 4N, …` with observed orders.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::run::{march, setup, Failure};

/// Errors below this are treated as roundoff and count as converged.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;

/// `log(e_coarse / e_fine) / log(refinement)`.
pub fn observed_order(coarse: f64, fine: f64, refinement: f64) -> f64 {
    (coarse / fine).ln() / refinement.ln()
}

/// Orders between consecutive entries of an error sequence refined by 2.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| observed_order(w[0], w[1], 2.0)).collect()
}

/// Whether every consecutive pair converges at `min_order` or better. A pair
/// whose finer error is already at roundoff passes.
pub fn converges_at(errors: &[f64], min_order: f64) -> bool {
    errors.len() >= 2
        && errors.iter().all(|e| e.is_finite())
        && errors.windows(2).all(|w| w[1] <= ROUNDOFF_FLOOR || observed_order(w[0], w[1], 2.0) >= min_order)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyLevel {
    pub n: usize,
    pub dt: f64,
    pub energy_drift: f64,
    pub constraint_drift: f64,
    pub gamma_xi_drift: f64,
    pub max_displacement: f64,
    pub failure: Option<Failure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyOrders {
    pub energy_drift: Vec<f64>,
    pub constraint_drift: Vec<f64>,
    pub gamma_xi_drift: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub levels: Vec<StudyLevel>,
    pub orders: StudyOrders,
}

impl StudyReport {
    pub fn summary_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .levels
            .iter()
            .map(|l| {
                format!(
                    "N = {:5}  dt = {:.3e}  energy drift {:.3e}  constraint drift {:.3e}  γ/ξ drift {:.3e}",
                    l.n, l.dt, l.energy_drift, l.constraint_drift, l.gamma_xi_drift
                )
            })
            .collect();
        let fmt = |v: &[f64]| v.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>().join(", ");
        lines.push(format!("observed order, energy drift:     {}", fmt(&self.orders.energy_drift)));
        lines.push(format!("observed order, constraint drift: {}", fmt(&self.orders.constraint_drift)));
        lines.push(format!("observed order, γ/ξ drift:        {}", fmt(&self.orders.gamma_xi_drift)));
        lines
    }
}

fn run_level(config: &RunConfig) -> StudyLevel {
    let n = config.grid.n;
    match setup(config) {
        Err(e) => StudyLevel {
            n,
            dt: f64::NAN,
            energy_drift: f64::NAN,
            constraint_drift: f64::NAN,
            gamma_xi_drift: f64::NAN,
            max_displacement: f64::NAN,
            failure: Some(Failure::new(&e, 0.0, None)),
        },
        Ok(s) => {
            let m = march(config, &s, &mut |_, _| Ok(()));
            StudyLevel {
                n,
                dt: s.dt,
                energy_drift: m.energy_drift,
                constraint_drift: m.constraint_drift,
                gamma_xi_drift: m.gamma_xi_drift,
                max_displacement: m.max_displacement,
                failure: m.failure,
            }
        }
    }
}

/// Runs the configuration at `N · 2^j`, `j < study.levels`, in parallel.
pub fn convergence_study(config: &RunConfig) -> StudyReport {
    let configs: Vec<_> = (0..config.study.levels).map(|j| config.refined(config.grid.n << j)).collect();
    let levels: Vec<StudyLevel> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || run_level(c))).collect();
        handles.into_iter().map(|h| h.join().expect("study member panicked")).collect()
    });
    let pick = |f: fn(&StudyLevel) -> f64| observed_orders(&levels.iter().map(f).collect::<Vec<_>>());
    let orders = StudyOrders {
        energy_drift: pick(|l| l.energy_drift),
        constraint_drift: pick(|l| l.constraint_drift),
        gamma_xi_drift: pick(|l| l.gamma_xi_drift),
    };
    StudyReport { levels, orders }
}
