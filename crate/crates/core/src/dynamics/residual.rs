//! Residual of the single fourth-order equation for the curve,
//!
//! ```text
//! -D_tγ_t + D_x D_t²γ_x - D_x³γ_x + Ψ = D_x(μ γ_x),
//! ```
//!
//! evaluated on a stored trajectory. Every quantity is rebuilt from γ alone,
//! `ξ̂ = h⁻¹γ_x` and `η̂ = h⁻¹γ_t`, except μ which comes from the stored state.

use super::{frame_tangent, reconstruct_mu, Stepper};
use crate::error::{Result, WireError};
use crate::fields::{cov_dx, curvature_apply, gamma_apply, m0, CurveState, Field};
use crate::geometry::GeometrySamples;

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// Times of the interior levels.
    pub times: Vec<f64>,
    /// `m_0` of the residual at each interior level.
    pub residual: Vec<f64>,
    /// `m_0(h⁻¹γ_x - ξ)` at each interior level.
    pub gamma_xi_drift: Vec<f64>,
}

impl ResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_drift(&self) -> f64 {
        self.gamma_xi_drift.iter().copied().fold(0.0, f64::max)
    }
}

fn to_frame(geo: &GeometrySamples, v: &Field) -> Field {
    let mut out = Field::zeros(v.n_points(), v.dim);
    for k in 0..v.n_points() {
        let src = v.row(k).to_vec();
        geo.to_frame(k, &src, out.row_mut(k));
    }
    out
}

fn gamma_rate(geo: &GeometrySamples, w: &Field, v: &Field, p: &Field) -> Field {
    let mut out = Field::zeros(p.n_points(), p.dim);
    for k in 0..p.n_points() {
        geo.gamma_rate(k, w.row(k), v.row(k), p.row(k), out.row_mut(k));
    }
    out
}

/// Residual at level `j` of `window` from levels `j - 1, j, j + 1`.
fn residual_at(stepper: &Stepper, window: &[CurveState], geo: &[GeometrySamples], j: usize, dt: f64) -> Result<(f64, f64)> {
    let grid = &stepper.grid;
    let (prev, curr, next) = (&window[j - 1], &window[j], &window[j + 1]);
    let g = &geo[j];

    let gamma_t = next.gamma.sub(&prev.gamma).scaled(0.5 / dt);
    let mut gamma_tt = next.gamma.add(&prev.gamma);
    gamma_tt.axpy(-2.0, &curr.gamma);
    let gamma_tt = gamma_tt.scaled(1.0 / (dt * dt));

    let eta = to_frame(g, &gamma_t);
    let mut eta_t = to_frame(g, &gamma_tt);
    eta_t.axpy(0.5 / dt, &to_frame(&geo[j + 1], &gamma_t));
    eta_t.axpy(-0.5 / dt, &to_frame(&geo[j - 1], &gamma_t));
    let dt_gamma_t = eta_t.add(&gamma_apply(&eta, &eta, g)?);

    let xi_prev = frame_tangent(grid, prev, &geo[j - 1]);
    let xi = frame_tangent(grid, curr, g);
    let xi_next = frame_tangent(grid, next, &geo[j + 1]);
    let p_t = xi_next.sub(&xi_prev).scaled(0.5 / dt);
    let mut p_tt = xi_next.add(&xi_prev);
    p_tt.axpy(-2.0, &xi);
    let p_tt = p_tt.scaled(1.0 / (dt * dt));

    let dt_xi = p_t.add(&gamma_apply(&eta, &xi, g)?);
    let mut dtt_xi = p_tt.add(&gamma_rate(g, &eta, &eta, &xi));
    dtt_xi.axpy(1.0, &gamma_apply(&eta_t, &xi, g)?);
    dtt_xi.axpy(1.0, &gamma_apply(&eta, &p_t, g)?);
    dtt_xi.axpy(1.0, &gamma_apply(&eta, &dt_xi, g)?);

    let dx_xi = cov_dx(grid, &xi, &xi, g)?;
    let dxx_xi = cov_dx(grid, &dx_xi, &xi, g)?;
    let dxxx_xi = cov_dx(grid, &dxx_xi, &xi, g)?;

    let mut psi = curvature_apply(&xi, &dx_xi, &xi, g)?;
    psi.axpy(-1.0, &curvature_apply(&xi, &dt_xi, &eta, g)?);

    let theta = match &curr.theta {
        Some(t) => t.clone(),
        None => stepper.solve_theta(curr, g)?.u,
    };
    let mu = reconstruct_mu(grid, curr, g, &theta)?;
    let mut mu_xi = xi.clone();
    for k in 0..mu_xi.n_points() {
        let m = mu.values[k];
        mu_xi.row_mut(k).iter_mut().for_each(|v| *v *= m);
    }

    let mut r = cov_dx(grid, &dtt_xi, &xi, g)?;
    r.axpy(-1.0, &dt_gamma_t);
    r.axpy(-1.0, &dxxx_xi);
    r.axpy(1.0, &psi);
    r.axpy(-1.0, &cov_dx(grid, &mu_xi, &xi, g)?);
    Ok((m0(&r), m0(&xi.sub(&curr.xi))))
}

/// Evaluates the residual at every interior level of a trajectory sampled
/// with uniform spacing `dt`. States without θ get it solved.
pub fn residual_base_single(stepper: &Stepper, window: &[CurveState], dt: f64) -> Result<ResidualReport> {
    if window.len() < 3 {
        return Err(WireError::Usage(format!(
            "the residual needs at least three time levels, got {}",
            window.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(WireError::Usage(format!("time step must be positive, got {dt}")));
    }
    let geo = window.iter().map(|s| stepper.geometry(s)).collect::<Result<Vec<_>>>()?;
    let mut report = ResidualReport { times: Vec::new(), residual: Vec::new(), gamma_xi_drift: Vec::new() };
    for j in 1..window.len() - 1 {
        let (r, d) = residual_at(stepper, window, &geo, j, dt)?;
        report.times.push(window[j].time);
        report.residual.push(r);
        report.gamma_xi_drift.push(d);
    }
    Ok(report)
}
