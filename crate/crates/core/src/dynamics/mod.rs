//! The coupled system
//!
//! ```text
//! (O_θ)  -D_x(D_xθ + Ψ) + θ⊥ = Φ
//! (W_ξ)  D_t²ξ - D_x²ξ = (‖D_xξ‖² - ‖D_tξ‖²)ξ + θ - g(θ, ξ)ξ
//! (O_η)  D_tη = D_xθ + Ψ + D_xξ
//! (O_γ)  γ_t = h(γ) η
//! ```
//!
//! with `Ψ = R(ξ, D_xξ)ξ - R(ξ, D_tξ)η` and
//! `Φ = (‖D_tξ‖² - ‖D_xξ‖²)ξ - R(ξ, η)η`, where `D_tξ = ξ_t + Γ(η, ξ)`.
//!
//! [`Stepper::step`] marches it in time: θ is solved at every stage and the
//! remaining unknowns advance with a velocity-Verlet splitting, `(γ, ξ)` as
//! positions and `(η, ξ_t)` as velocities. For velocity-independent forces the
//! ξ-update is the three-level leapfrog of [`crate::wave::leapfrog_step`].

pub mod initial;
pub mod picard;
pub mod residual;

pub use initial::{prepare_initial, CurveSpec, InitialData, VelocitySpec};
pub use picard::{picard_coupled, CoupledPicardOptions, PicardReport, PicardTrajectory};
pub use residual::{residual_base_single, ResidualReport};

use crate::elliptic::{solve_theta, EllipticOptions, FluxSolution};
use crate::error::{Result, WireError};
use crate::fields::{cov_dx, curvature_apply, gamma_apply, CurveState, Field, Grid, ScalarField};
use crate::geometry::{GeometrySamples, ManifoldModel};
use crate::wave::wave_acceleration;

/// `Ψ` and `Φ` of the θ-equation.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceTerms {
    pub psi: Field,
    pub phi: Field,
}

/// Evaluates Ψ and Φ; `D_xξ` by [`cov_dx`] and `D_tξ = ξ_t + Γ(η, ξ)`.
pub fn assemble_sources(grid: &Grid, state: &CurveState, geo: &GeometrySamples) -> Result<SourceTerms> {
    state.check_shapes()?;
    let xi = &state.xi;
    let dx_xi = cov_dx(grid, xi, xi, geo)?;
    let dt_xi = state.xi_t.add(&gamma_apply(&state.eta, xi, geo)?);
    let mut psi = curvature_apply(xi, &dx_xi, xi, geo)?;
    psi.axpy(-1.0, &curvature_apply(xi, &dt_xi, &state.eta, geo)?);
    let mut phi = curvature_apply(xi, &state.eta, &state.eta, geo)?.scaled(-1.0);
    for k in 0..xi.n_points() {
        let nt: f64 = dt_xi.row(k).iter().map(|v| v * v).sum();
        let nx: f64 = dx_xi.row(k).iter().map(|v| v * v).sum();
        let x = xi.row(k).to_vec();
        phi.row_mut(k).iter_mut().zip(&x).for_each(|(p, v)| *p += (nt - nx) * v);
    }
    Ok(SourceTerms { psi, phi })
}

/// `μ = ‖D_xξ‖² - ‖D_tξ‖² - g(θ, ξ) - 1`.
pub fn reconstruct_mu(
    grid: &Grid,
    state: &CurveState,
    geo: &GeometrySamples,
    theta: &Field,
) -> Result<ScalarField> {
    state.check_shapes()?;
    state.xi.same_shape(theta)?;
    let xi = &state.xi;
    let dx_xi = cov_dx(grid, xi, xi, geo)?;
    let dt_xi = state.xi_t.add(&gamma_apply(&state.eta, xi, geo)?);
    let values = (0..xi.n_points())
        .map(|k| {
            let nx: f64 = dx_xi.row(k).iter().map(|v| v * v).sum();
            let nt: f64 = dt_xi.row(k).iter().map(|v| v * v).sum();
            let g: f64 = theta.row(k).iter().zip(xi.row(k)).map(|(a, b)| a * b).sum();
            nx - nt - g - 1.0
        })
        .collect();
    Ok(ScalarField { values })
}

/// Time derivatives of the velocities at one state.
#[derive(Clone, Debug)]
pub struct Forces {
    /// `ξ_tt` from (W_ξ).
    pub xi_tt: Field,
    /// `η_t` from (O_η).
    pub eta_t: Field,
    pub theta: FluxSolution,
}

/// Everything needed to advance a [`CurveState`].
#[derive(Clone, Debug)]
pub struct Stepper {
    pub model: ManifoldModel,
    pub grid: Grid,
    pub elliptic: EllipticOptions,
    /// Project ξ back to unit length after every step.
    pub renormalize: bool,
}

impl Stepper {
    pub fn new(model: ManifoldModel, grid: Grid) -> Self {
        Self { model, grid, elliptic: EllipticOptions::default(), renormalize: false }
    }

    pub fn geometry(&self, state: &CurveState) -> Result<GeometrySamples> {
        self.model.sample_curve(&state.gamma.values)
    }

    /// θ for the given state (bentness guard applied).
    pub fn solve_theta(&self, state: &CurveState, geo: &GeometrySamples) -> Result<FluxSolution> {
        let sources = assemble_sources(&self.grid, state, geo)?;
        solve_theta(&self.grid, state, geo, &sources, &self.elliptic)
    }

    /// Returns a copy of `state` with θ filled in.
    pub fn with_theta(&self, state: &CurveState) -> Result<CurveState> {
        let geo = self.geometry(state)?;
        let mut s = state.clone();
        s.theta = Some(self.solve_theta(state, &geo)?.u);
        Ok(s)
    }

    /// `ξ_tt` and `η_t` at `state`.
    pub fn forces(&self, state: &CurveState, geo: &GeometrySamples, guard: bool) -> Result<Forces> {
        let sources = assemble_sources(&self.grid, state, geo)?;
        let opts = if guard { self.elliptic } else { self.elliptic.unguarded() };
        let theta = solve_theta(&self.grid, state, geo, &sources, &opts)?;
        let dx_xi = cov_dx(&self.grid, &state.xi, &state.xi, geo)?;
        let mut eta_t = theta.flux.add(&dx_xi);
        eta_t.axpy(-1.0, &gamma_apply(&state.eta, &state.eta, geo)?);
        let xi_tt =
            wave_acceleration(&self.grid, &state.xi, &state.xi_t, &theta.u, &state.eta, &eta_t, geo)?;
        Ok(Forces { xi_tt, eta_t, theta })
    }

    /// Advances `state` by `dt ≤ Δx`.
    pub fn step(&self, state: &CurveState, dt: f64) -> Result<CurveState> {
        if !(dt > 0.0) || dt > self.grid.dx * (1.0 + 1e-12) {
            return Err(WireError::Cfl { dt, dx: self.grid.dx });
        }
        state.check_shapes()?;
        let geo = self.geometry(state)?;
        let f0 = self.forces(state, &geo, true)?;

        let mut half = state.clone();
        half.xi_t.axpy(0.5 * dt, &f0.xi_tt);
        half.eta.axpy(0.5 * dt, &f0.eta_t);

        let mut next = half.clone();
        next.xi.axpy(dt, &half.xi_t);
        next.gamma = self.advance_curve(&state.gamma, &geo, &half.eta, dt)?;
        next.time = state.time + dt;
        next.theta = None;

        // forces at the new positions with predicted velocities
        let mut predicted = next.clone();
        predicted.xi_t.axpy(0.5 * dt, &f0.xi_tt);
        predicted.eta.axpy(0.5 * dt, &f0.eta_t);
        let geo1 = self.geometry(&next)?;
        let f1 = self.forces(&predicted, &geo1, false)?;
        next.xi_t.axpy(0.5 * dt, &f1.xi_tt);
        next.eta.axpy(0.5 * dt, &f1.eta_t);

        if self.renormalize {
            next.xi = next.xi.normalized();
        }
        if !next.is_finite() {
            return Err(WireError::NonFinite(format!("state after step to t = {}", next.time)));
        }
        Ok(next)
    }

    /// Midpoint rule for `γ_t = h(γ) η` with η frozen over the step.
    fn advance_curve(&self, gamma: &Field, geo: &GeometrySamples, eta: &Field, dt: f64) -> Result<Field> {
        let n = gamma.dim;
        let mut mid = gamma.clone();
        let mut v = vec![0.0; n];
        for k in 0..gamma.n_points() {
            geo.to_chart(k, eta.row(k), &mut v);
            mid.row_mut(k).iter_mut().zip(&v).for_each(|(g, d)| *g += 0.5 * dt * d);
        }
        let geo_mid = self.model.sample_curve(&mid.values)?;
        let mut out = gamma.clone();
        for k in 0..gamma.n_points() {
            geo_mid.to_chart(k, eta.row(k), &mut v);
            out.row_mut(k).iter_mut().zip(&v).for_each(|(g, d)| *g += dt * d);
        }
        if let Some(k) = (0..out.n_points()).find(|&k| !self.model.in_domain(out.row(k))) {
            return Err(WireError::ChartExit { index: k, coords: out.row(k).to_vec() });
        }
        Ok(out)
    }
}

/// Chart velocity `h(γ) η` of the curve.
pub fn chart_velocity(geo: &GeometrySamples, eta: &Field) -> Field {
    let mut out = Field::zeros(eta.n_points(), eta.dim);
    for k in 0..eta.n_points() {
        let (src, dst) = (eta.row(k).to_vec(), out.row_mut(k));
        geo.to_chart(k, &src, dst);
    }
    out
}

/// Frame components of the discrete tangent `h⁻¹ γ_x`.
pub fn frame_tangent(grid: &Grid, state: &CurveState, geo: &GeometrySamples) -> Field {
    let dg = grid.diff_shifted(&state.gamma, &state.winding);
    let mut out = Field::zeros(dg.n_points(), dg.dim);
    for k in 0..dg.n_points() {
        let src = dg.row(k).to_vec();
        geo.to_frame(k, &src, out.row_mut(k));
    }
    out
}
