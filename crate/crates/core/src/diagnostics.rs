//! Monitored quantities: energy, constraint drift, bentness, multiplier range,
//! tangent coherence and the characteristic transport identity.

use serde::{Deserialize, Serialize};

use crate::dynamics::{frame_tangent, reconstruct_mu, Stepper};
use crate::elliptic::bentness;
use crate::error::{Result, WireError};
use crate::fields::{cov_dx, curvature_apply, gamma_apply, l2_norm, m0, perp, CurveState, Field, Grid};
use crate::geometry::GeometrySamples;

/// `Ē = ‖D_tξ‖² + ‖η‖² + ‖D_xξ‖²` and its parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub dt_xi: f64,
    pub eta: f64,
    pub dx_xi: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.dt_xi + self.eta + self.dx_xi
    }
}

pub fn energy(grid: &Grid, state: &CurveState, geo: &GeometrySamples) -> Result<Energy> {
    state.check_shapes()?;
    let dx_xi = cov_dx(grid, &state.xi, &state.xi, geo)?;
    let dt_xi = state.xi_t.add(&gamma_apply(&state.eta, &state.xi, geo)?);
    Ok(Energy {
        dt_xi: l2_norm(&dt_xi).powi(2),
        eta: l2_norm(&state.eta).powi(2),
        dx_xi: l2_norm(&dx_xi).powi(2),
    })
}

/// `ξ̂± = D_xξ ± D_tξ` at one level.
fn characteristic_fields(grid: &Grid, state: &CurveState, geo: &GeometrySamples) -> Result<(Field, Field)> {
    let dx_xi = cov_dx(grid, &state.xi, &state.xi, geo)?;
    let dt_xi = state.xi_t.add(&gamma_apply(&state.eta, &state.xi, geo)?);
    Ok((dx_xi.add(&dt_xi), dx_xi.sub(&dt_xi)))
}

/// Largest defect of the transport identity
///
/// ```text
/// (∂_t ∓ ∂_x)‖ξ̂±‖² = ±2g(ξ̂±, θ⊥) + 2g(ξ̂±, R(η, ξ)ξ)
/// ```
///
/// at the middle level of three consecutive states, with the rate taken along
/// the grid characteristics through `(k ± 1, n - 1)` and `(k ∓ 1, n + 1)`.
/// θ is read from the middle state when present, otherwise solved.
///
/// Only defined for `dt = Δx`.
pub fn transport_check(stepper: &Stepper, window: &[CurveState], dt: f64) -> Result<f64> {
    let grid = &stepper.grid;
    if window.len() != 3 {
        return Err(WireError::Usage(format!("transport check needs three levels, got {}", window.len())));
    }
    if (dt - grid.dx).abs() > 1e-12 * grid.dx {
        return Err(WireError::Usage(format!(
            "transport check needs dt = Δx = {}, got {dt}",
            grid.dx
        )));
    }
    let geo = window.iter().map(|s| stepper.geometry(s)).collect::<Result<Vec<_>>>()?;
    let (plus_prev, minus_prev) = characteristic_fields(grid, &window[0], &geo[0])?;
    let (plus, minus) = characteristic_fields(grid, &window[1], &geo[1])?;
    let (plus_next, minus_next) = characteristic_fields(grid, &window[2], &geo[2])?;
    let curr = &window[1];
    let theta = match &curr.theta {
        Some(t) => t.clone(),
        None => stepper.solve_theta(curr, &geo[1])?.u,
    };
    let theta_perp = perp(&theta, &curr.xi)?;
    let bend = curvature_apply(&curr.eta, &curr.xi, &curr.xi, &geo[1])?;
    let sq = |f: &Field, k: usize| f.row(k).iter().map(|v| v * v).sum::<f64>();
    let g = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut worst: f64 = 0.0;
    for k in 0..grid.n_points {
        let (l, r) = (grid.wrap(k as isize - 1), grid.wrap(k as isize + 1));
        let rate_plus = (sq(&plus_next, l) - sq(&plus_prev, r)) / (2.0 * dt);
        let rhs_plus = 2.0 * g(plus.row(k), theta_perp.row(k)) + 2.0 * g(plus.row(k), bend.row(k));
        let rate_minus = (sq(&minus_next, r) - sq(&minus_prev, l)) / (2.0 * dt);
        let rhs_minus = -2.0 * g(minus.row(k), theta_perp.row(k)) + 2.0 * g(minus.row(k), bend.row(k));
        worst = worst.max((rate_plus - rhs_plus).abs()).max((rate_minus - rhs_minus).abs());
    }
    Ok(worst)
}

/// One row of the diagnostics time series. Optional columns are left empty
/// when they were not evaluated at this tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub energy: f64,
    pub energy_dt_xi: f64,
    pub energy_eta: f64,
    pub energy_dx_xi: f64,
    pub constraint_drift: f64,
    pub bentness: Option<f64>,
    pub mu_min: f64,
    pub mu_max: f64,
    pub gamma_xi_drift: f64,
    pub transport_residual: Option<f64>,
}

impl DiagnosticsRecord {
    pub const HEADER: [&'static str; 11] = [
        "time",
        "energy",
        "energy_dt_xi",
        "energy_eta",
        "energy_dx_xi",
        "constraint_drift",
        "bentness",
        "mu_min",
        "mu_max",
        "gamma_xi_drift",
        "transport_residual",
    ];

    pub fn is_finite(&self) -> bool {
        [self.time, self.energy, self.constraint_drift, self.mu_min, self.mu_max, self.gamma_xi_drift]
            .iter()
            .chain(self.bentness.iter())
            .chain(self.transport_residual.iter())
            .all(|v| v.is_finite())
    }
}

/// Evaluates the record for `state`. θ is solved without the bentness guard
/// when the state does not carry it.
pub fn record(
    stepper: &Stepper,
    state: &CurveState,
    with_bentness: bool,
    transport_residual: Option<f64>,
) -> Result<DiagnosticsRecord> {
    let grid = &stepper.grid;
    let geo = stepper.geometry(state)?;
    let e = energy(grid, state, &geo)?;
    let theta = match &state.theta {
        Some(t) => t.clone(),
        None => {
            let unguarded = Stepper { elliptic: stepper.elliptic.unguarded(), ..stepper.clone() };
            unguarded.solve_theta(state, &geo)?.u
        }
    };
    let mu = reconstruct_mu(grid, state, &geo, &theta)?;
    let b = if with_bentness { Some(bentness(grid, &state.xi, &geo, &stepper.elliptic)?.b_value) } else { None };
    Ok(DiagnosticsRecord {
        time: state.time,
        energy: e.total(),
        energy_dt_xi: e.dt_xi,
        energy_eta: e.eta,
        energy_dx_xi: e.dx_xi,
        constraint_drift: state.constraint_drift(),
        bentness: b,
        mu_min: mu.min(),
        mu_max: mu.max(),
        gamma_xi_drift: m0(&frame_tangent(grid, state, &geo).sub(&state.xi)),
        transport_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldModel;
    use std::f64::consts::PI;

    fn circle(n: usize) -> CurveState {
        let r = 1.0 / (2.0 * PI);
        CurveState {
            gamma: Field::from_fn(n, 2, |k| {
                let s = 2.0 * PI * k as f64 / n as f64;
                vec![r * s.cos(), r * s.sin()]
            }),
            winding: vec![0.0; 2],
            xi: Field::from_fn(n, 2, |k| {
                let s = 2.0 * PI * k as f64 / n as f64;
                vec![-s.sin(), s.cos()]
            }),
            xi_t: Field::zeros(n, 2),
            eta: Field::zeros(n, 2),
            theta: None,
            time: 0.0,
        }
    }

    #[test]
    fn rest_circle_energy() {
        let n = 128;
        let grid = Grid::new(n).unwrap();
        let e = energy(&grid, &circle(n), &GeometrySamples::flat(n, 2)).unwrap();
        assert_eq!(e.dt_xi, 0.0);
        assert_eq!(e.eta, 0.0);
        assert!((e.dx_xi - 4.0 * PI * PI).abs() < 1e-8);
        assert_eq!(e.total(), e.dt_xi + e.eta + e.dx_xi);
    }

    #[test]
    fn translation_adds_speed_squared() {
        let n = 64;
        let grid = Grid::new(n).unwrap();
        let geo = GeometrySamples::flat(n, 2);
        let mut s = circle(n);
        let rest = energy(&grid, &s, &geo).unwrap();
        s.eta = Field::constant(n, &[0.3, 0.4]);
        let moving = energy(&grid, &s, &geo).unwrap();
        assert!((moving.eta - 0.25).abs() < 1e-15);
        assert_eq!(moving.dx_xi, rest.dx_xi);
    }

    #[test]
    fn straight_torus_line_has_zero_energy() {
        let n = 16;
        let grid = Grid::new(n).unwrap();
        let s = CurveState {
            gamma: Field::from_fn(n, 2, |k| vec![k as f64 / n as f64, 0.0]),
            winding: vec![1.0, 0.0],
            xi: Field::constant(n, &[1.0, 0.0]),
            xi_t: Field::zeros(n, 2),
            eta: Field::zeros(n, 2),
            theta: None,
            time: 0.0,
        };
        assert_eq!(energy(&grid, &s, &GeometrySamples::flat(n, 2)).unwrap().total(), 0.0);
    }

    #[test]
    fn rest_circle_transport_and_record() {
        let n = 64;
        let stepper = Stepper::new(ManifoldModel::euclidean(2), Grid::new(n).unwrap());
        let w = vec![circle(n); 3];
        let t = transport_check(&stepper, &w, 1.0 / n as f64).unwrap();
        assert!(t < 1e-9, "{t}");
        assert!(matches!(transport_check(&stepper, &w, 0.5 / n as f64), Err(WireError::Usage(_))));

        let rec = record(&stepper, &circle(n), true, Some(t)).unwrap();
        assert!((rec.mu_min - 4.0 * PI * PI).abs() < 1e-6 && (rec.mu_max - 4.0 * PI * PI).abs() < 1e-6);
        assert!((rec.bentness.unwrap() - 2.0 * PI / (1.0 + 4.0 * PI * PI).sqrt()).abs() < 1e-8);
        assert!(rec.is_finite());
    }

    #[test]
    fn record_csv_header_matches_fields() {
        let n = 16;
        let stepper = Stepper::new(ManifoldModel::euclidean(2), Grid::new(n).unwrap());
        let rec = record(&stepper, &circle(n), false, None).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&rec).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, DiagnosticsRecord::HEADER.join(","));
        let row: Vec<_> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[6], "");
        assert_eq!(row[10], "");
    }
}
