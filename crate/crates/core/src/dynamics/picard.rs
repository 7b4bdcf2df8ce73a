//! Fixed-point construction of the coupled system on a short window.
//!
//! One application of the map takes series `(γ, ξ, η)` over the window,
//! solves the θ-equation from them, then re-solves the curve ODE, the wave
//! equation and the η-equation with those known functions, giving
//! `(γ̃, ξ̃, η̃)`. θ is solved again from `(γ̃, ξ̃, η̃)` and η is recomputed from
//! it. Distances are measured in `M_{0,1}(γ) + M_1(ξ) + M_{0,1}(η)`.

use serde::{Deserialize, Serialize};

use super::{assemble_sources, chart_velocity, Stepper};
use crate::elliptic::solve_theta;
use crate::error::{Result, WireError};
use crate::fields::{cov_dx, curvature_apply, gamma_apply, m01_series, m1_series, time_derivative, CurveState, Field};
use crate::geometry::GeometrySamples;
use crate::wave::{picard_wave_solve, PicardOptions, WaveCoefficients};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledPicardOptions {
    /// Window length in characteristic steps `Δt = Δx`.
    pub window_steps: usize,
    pub max_iter: usize,
    /// Stop once the composite distance is below `tol · max(1, size)`.
    pub tol: f64,
}

impl Default for CoupledPicardOptions {
    fn default() -> Self {
        Self { window_steps: 8, max_iter: 40, tol: 1e-8 }
    }
}

/// Per-iteration contraction data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub converged: bool,
}

/// States at the levels `t_0 + j Δx`, `j = 0..=window_steps`, θ included.
#[derive(Clone, Debug)]
pub struct PicardTrajectory {
    pub states: Vec<CurveState>,
    pub dt: f64,
}

struct Series {
    gamma: Vec<Field>,
    xi: Vec<Field>,
    xi_t: Vec<Field>,
    eta: Vec<Field>,
}

impl Series {
    fn state(&self, base: &CurveState, j: usize, dt: f64) -> CurveState {
        CurveState {
            gamma: self.gamma[j].clone(),
            winding: base.winding.clone(),
            xi: self.xi[j].clone(),
            xi_t: self.xi_t[j].clone(),
            eta: self.eta[j].clone(),
            theta: None,
            time: base.time + j as f64 * dt,
        }
    }
}

/// θ at every level, guarded by the bentness threshold.
fn theta_series(stepper: &Stepper, s: &Series, base: &CurveState, geo: &[GeometrySamples], dt: f64) -> Result<Vec<Field>> {
    (0..s.gamma.len())
        .map(|j| {
            let st = s.state(base, j, dt);
            let src = assemble_sources(&stepper.grid, &st, &geo[j])?;
            Ok(solve_theta(&stepper.grid, &st, &geo[j], &src, &stepper.elliptic)?.u)
        })
        .collect()
}

fn sample_all(stepper: &Stepper, gamma: &[Field]) -> Result<Vec<GeometrySamples>> {
    gamma.iter().map(|g| stepper.model.sample_curve(&g.values)).collect()
}

/// `γ_t = h(γ) η` with the given η series, Heun's method.
fn solve_curve(stepper: &Stepper, gamma0: &Field, eta: &[Field], dt: f64) -> Result<Vec<Field>> {
    let mut out = vec![gamma0.clone()];
    for j in 0..eta.len() - 1 {
        let g = &out[j];
        let geo = stepper.model.sample_curve(&g.values)?;
        let v0 = chart_velocity(&geo, &eta[j]);
        let mut pred = g.clone();
        pred.axpy(dt, &v0);
        let geo_p = stepper.model.sample_curve(&pred.values)?;
        let v1 = chart_velocity(&geo_p, &eta[j + 1]);
        let mut next = g.clone();
        next.axpy(0.5 * dt, &v0);
        next.axpy(0.5 * dt, &v1);
        out.push(next);
    }
    Ok(out)
}

/// `η_t = D_xθ + Ψ(η) + D_xξ - Γ(η, η)` along known `(γ, ξ, ξ_t, θ)`, Heun's
/// method.
fn solve_eta(
    stepper: &Stepper,
    eta0: &Field,
    xi: &[Field],
    xi_t: &[Field],
    theta: &[Field],
    geo: &[GeometrySamples],
    dt: f64,
) -> Result<Vec<Field>> {
    let grid = &stepper.grid;
    let mut fixed = Vec::with_capacity(xi.len());
    for j in 0..xi.len() {
        let dx_xi = cov_dx(grid, &xi[j], &xi[j], &geo[j])?;
        let mut f = cov_dx(grid, &theta[j], &xi[j], &geo[j])?.add(&dx_xi);
        f.axpy(1.0, &curvature_apply(&xi[j], &dx_xi, &xi[j], &geo[j])?);
        fixed.push(f);
    }
    let rate = |j: usize, eta: &Field| -> Result<Field> {
        let g = &geo[j];
        let dt_xi = xi_t[j].add(&gamma_apply(eta, &xi[j], g)?);
        let mut r = fixed[j].clone();
        r.axpy(-1.0, &curvature_apply(&xi[j], &dt_xi, eta, g)?);
        r.axpy(-1.0, &gamma_apply(eta, eta, g)?);
        Ok(r)
    };
    let mut out = vec![eta0.clone()];
    for j in 0..xi.len() - 1 {
        let e = &out[j];
        let r0 = rate(j, e)?;
        let mut pred = e.clone();
        pred.axpy(dt, &r0);
        let r1 = rate(j + 1, &pred)?;
        let mut next = e.clone();
        next.axpy(0.5 * dt, &r0);
        next.axpy(0.5 * dt, &r1);
        out.push(next);
    }
    Ok(out)
}

fn diff_series(a: &[Field], b: &[Field]) -> Vec<Field> {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

/// Iterates the fixed-point map on `[t_0, t_0 + window_steps Δx]`, starting
/// from the time-constant extension of `state`.
///
/// Fails with [`WireError::WindowTooLarge`] when the distance ratio stays at
/// or above 1 for three consecutive iterations.
pub fn picard_coupled(
    stepper: &Stepper,
    state: &CurveState,
    opts: &CoupledPicardOptions,
) -> Result<(PicardTrajectory, PicardReport)> {
    state.check_shapes()?;
    if opts.window_steps < 2 {
        return Err(WireError::Usage("the Picard window needs at least two steps".into()));
    }
    let grid = &stepper.grid;
    let dt = grid.dx;
    let levels = opts.window_steps + 1;
    let mut s = Series {
        gamma: vec![state.gamma.clone(); levels],
        xi: vec![state.xi.clone(); levels],
        xi_t: vec![state.xi_t.clone(); levels],
        eta: vec![state.eta.clone(); levels],
    };
    let wave_opts = PicardOptions { max_iter: 200, tol: opts.tol * 1e-2 };
    let mut distances: Vec<f64> = Vec::new();
    let mut ratios = Vec::new();
    let mut streak = 0;
    let mut last_theta = None;
    for _ in 0..opts.max_iter {
        let geo = sample_all(stepper, &s.gamma)?;
        let theta = theta_series(stepper, &s, state, &geo, dt)?;
        let eta_t = time_derivative(&s.eta, dt);
        let coeffs = WaveCoefficients { geo: &geo, eta: &s.eta, eta_t: &eta_t, theta: &theta };
        let wave = picard_wave_solve(grid, &state.xi, &state.xi_t, &coeffs, &wave_opts)?;
        let gamma_new = solve_curve(stepper, &state.gamma, &s.eta, dt)?;
        let eta_new = solve_eta(stepper, &state.eta, &s.xi, &s.xi_t, &theta, &geo, dt)?;

        let tilde = Series { gamma: gamma_new, xi: wave.xi, xi_t: wave.xi_t, eta: eta_new };
        let geo_new = sample_all(stepper, &tilde.gamma)?;
        let theta_new = theta_series(stepper, &tilde, state, &geo_new, dt)?;
        let eta_final = solve_eta(stepper, &state.eta, &tilde.xi, &tilde.xi_t, &theta_new, &geo_new, dt)?;

        let dist = m01_series(&diff_series(&tilde.gamma, &s.gamma), dt)
            + m1_series(grid, &diff_series(&tilde.xi, &s.xi), dt)?
            + m01_series(&diff_series(&eta_final, &s.eta), dt);
        let size = m01_series(&tilde.gamma, dt) + m1_series(grid, &tilde.xi, dt)? + m01_series(&eta_final, dt);
        if !dist.is_finite() {
            return Err(WireError::NonFinite("coupled Picard iterate".into()));
        }
        if let Some(prev) = distances.last() {
            let r = dist / prev;
            ratios.push(r);
            streak = if r >= 1.0 { streak + 1 } else { 0 };
        }
        distances.push(dist);
        s = Series { gamma: tilde.gamma, xi: tilde.xi, xi_t: tilde.xi_t, eta: eta_final };
        last_theta = Some(theta_new);
        if dist <= opts.tol * size.max(1.0) {
            break;
        }
        if streak >= 3 {
            return Err(WireError::WindowTooLarge { ratios });
        }
    }
    let converged = distances.last().is_some_and(|d| {
        let size = m01_series(&s.gamma, dt) + m01_series(&s.eta, dt) + m01_series(&s.xi, dt);
        *d <= opts.tol * size.max(1.0)
    });
    let theta = last_theta.expect("at least one iteration");
    let states = (0..levels)
        .map(|j| {
            let mut st = s.state(state, j, dt);
            st.theta = Some(theta[j].clone());
            st
        })
        .collect();
    Ok((PicardTrajectory { states, dt }, PicardReport { distances, ratios, converged }))
}
