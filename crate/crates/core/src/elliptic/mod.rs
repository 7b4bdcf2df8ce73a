//! Linear spatial problems along the curve.
//!
//! * the flux-form θ-equation `-D_x(D_x u + f) + u⊥ = h`,
//! * the bentness helper `-D_x² φ + φ = ξ`,
//! * the curve bentness `B(γ, ξ) = (‖φ - ξ‖² + ‖D_x φ‖²)^{1/2}`.
//!
//! With `D` the matrix of the discrete covariant derivative (antisymmetric by
//! construction) the two operators are `DᵀD + P⊥` and `DᵀD + I`, where `P⊥` is
//! the pointwise projection orthogonal to ξ. Both are symmetric; the first is
//! positive semidefinite with a kernel only in the geodesic limit.

pub mod banded;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use banded::PeriodicBandMatrix;

use crate::dynamics::SourceTerms;
use crate::error::{Result, WireError};
use crate::fields::{cov_dx, l2_norm, perp, CurveState, Field, Grid};
use crate::geometry::GeometrySamples;

/// Linear solver used for the assembled systems.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Periodic band Cholesky with a dense border.
    #[default]
    Banded,
    /// Dense LU of the full matrix.
    Dense,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticOptions {
    pub backend: Backend,
    /// Relative residual bound accepted from the linear solver.
    pub tolerance: f64,
    /// Solves abort with a near-geodesic error below this bentness; `0`
    /// disables the check.
    pub bentness_min: f64,
}

impl Default for EllipticOptions {
    fn default() -> Self {
        Self { backend: Backend::Banded, tolerance: 1e-8, bentness_min: 1e-3 }
    }
}

impl EllipticOptions {
    pub fn unguarded(self) -> Self {
        Self { bentness_min: 0.0, ..self }
    }
}

/// Assembled matrix, banded unless the grid is too coarse for the band to
/// stay clear of its periodic image.
#[derive(Clone, Debug)]
pub enum SystemMatrix {
    Band(PeriodicBandMatrix),
    Dense(DMatrix<f64>),
}

impl SystemMatrix {
    pub fn size(&self) -> usize {
        match self {
            SystemMatrix::Band(b) => b.size,
            SystemMatrix::Dense(d) => d.nrows(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            SystemMatrix::Band(b) => b.get(i, j),
            SystemMatrix::Dense(d) => d[(i, j)],
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SystemMatrix::Band(b) => b.matvec(x),
            SystemMatrix::Dense(d) => (d * nalgebra::DVector::from_column_slice(x)).iter().copied().collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SystemMatrix::Band(b) => b.to_dense(),
            SystemMatrix::Dense(d) => d.clone(),
        }
    }

    fn max_diag(&self) -> f64 {
        (0..self.size()).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct EllipticSystem {
    pub matrix: SystemMatrix,
    pub rhs: Vec<f64>,
}

impl EllipticSystem {
    pub fn solve(&self, backend: Backend, tolerance: f64) -> Result<Vec<f64>> {
        match (&self.matrix, backend) {
            (SystemMatrix::Band(b), Backend::Banded) => b.solve_spd(&self.rhs),
            (SystemMatrix::Band(b), Backend::ConjugateGradient) => {
                b.solve_cg(&self.rhs, tolerance.min(1e-12), 20 * b.size)
            }
            (m, _) => banded::dense_solve(m.to_dense(), &self.rhs),
        }
    }
}

/// Sparse rows of the covariant difference matrix `D` acting on stacked frame
/// components `u[k * n + a]`.
fn cov_dx_rows(grid: &Grid, xi: &Field, geo: &GeometrySamples) -> Vec<Vec<(usize, f64)>> {
    let n = xi.dim;
    let big_n = grid.n_points;
    let w = grid.stencil.weights();
    let mut rows = Vec::with_capacity(big_n * n);
    let mut g = vec![0.0; n];
    let mut unit = vec![0.0; n];
    for k in 0..big_n {
        for a in 0..n {
            let mut row = Vec::with_capacity(2 * w.len() + n);
            for (m, c) in w.iter().enumerate() {
                let m = m as isize + 1;
                row.push((grid.wrap(k as isize + m) * n + a, c / grid.dx));
                row.push((grid.wrap(k as isize - m) * n + a, -c / grid.dx));
            }
            if !geo.flat {
                for b in 0..n {
                    unit.fill(0.0);
                    unit[b] = 1.0;
                    geo.gamma(k, xi.row(k), &unit, &mut g);
                    if g[a] != 0.0 {
                        row.push((k * n + b, g[a]));
                    }
                }
            }
            rows.push(row);
        }
    }
    rows
}

/// `DᵀD + diag` where `diag(k)` is the `n × n` block added at grid point `k`.
fn assemble_normal(
    grid: &Grid,
    xi: &Field,
    geo: &GeometrySamples,
    block: impl Fn(usize, usize, usize) -> f64,
) -> SystemMatrix {
    let n = xi.dim;
    let size = grid.n_points * n;
    let half = 2 * grid.stencil.half_width() * n;
    let rows = cov_dx_rows(grid, xi, geo);
    if size > 2 * half + 1 {
        let mut a = PeriodicBandMatrix::zeros(size, half);
        for row in &rows {
            for &(i, vi) in row {
                for &(j, vj) in row {
                    a.add(i, j, vi * vj);
                }
            }
        }
        for k in 0..grid.n_points {
            for p in 0..n {
                for q in 0..n {
                    a.add(k * n + p, k * n + q, block(k, p, q));
                }
            }
        }
        SystemMatrix::Band(a)
    } else {
        let mut a = DMatrix::zeros(size, size);
        for row in &rows {
            for &(i, vi) in row {
                for &(j, vj) in row {
                    a[(i, j)] += vi * vj;
                }
            }
        }
        for k in 0..grid.n_points {
            for p in 0..n {
                for q in 0..n {
                    a[(k * n + p, k * n + q)] += block(k, p, q);
                }
            }
        }
        SystemMatrix::Dense(a)
    }
}

fn check_inputs(grid: &Grid, fields: &[&Field], geo: &GeometrySamples) -> Result<()> {
    let first = fields[0];
    for f in fields {
        first.same_shape(f)?;
    }
    if first.n_points() != grid.n_points || geo.len() != grid.n_points || geo.dim != first.dim {
        return Err(WireError::Shape("fields, grid and geometry samples disagree".into()));
    }
    Ok(())
}

/// System for `-D_x(D_x u + f) + u⊥ = h`, i.e. `(DᵀD + P⊥) u = h + D f`.
pub fn assemble_flux_form(
    grid: &Grid,
    f: &Field,
    h: &Field,
    xi: &Field,
    geo: &GeometrySamples,
) -> Result<EllipticSystem> {
    check_inputs(grid, &[f, h, xi], geo)?;
    let matrix = assemble_normal(grid, xi, geo, |k, p, q| {
        let x = xi.row(k);
        (if p == q { 1.0 } else { 0.0 }) - x[p] * x[q]
    });
    let df = cov_dx(grid, f, xi, geo)?;
    let rhs = h.values.iter().zip(&df.values).map(|(a, b)| a + b).collect();
    Ok(EllipticSystem { matrix, rhs })
}

/// System for `-D_x² φ + φ = ξ`.
pub fn assemble_bentness(grid: &Grid, xi: &Field, geo: &GeometrySamples) -> Result<EllipticSystem> {
    check_inputs(grid, &[xi], geo)?;
    let matrix = assemble_normal(grid, xi, geo, |_, p, q| if p == q { 1.0 } else { 0.0 });
    Ok(EllipticSystem { matrix, rhs: xi.values.clone() })
}

/// `-D_x(D_x u + f) + u⊥`, evaluated with the field operators.
pub fn apply_flux_operator(
    grid: &Grid,
    u: &Field,
    f: &Field,
    xi: &Field,
    geo: &GeometrySamples,
) -> Result<Field> {
    let flux = cov_dx(grid, u, xi, geo)?.add(f);
    let mut out = cov_dx(grid, &flux, xi, geo)?.scaled(-1.0);
    out.axpy(1.0, &perp(u, xi)?);
    Ok(out)
}

/// Solution of the flux-form equation together with the flux `D_x u + f`.
#[derive(Clone, Debug)]
pub struct FluxSolution {
    pub u: Field,
    pub flux: Field,
    /// `‖-D_x(D_x u + f) + u⊥ - h‖_∞`.
    pub residual: f64,
}

fn solve_checked(
    grid: &Grid,
    system: &EllipticSystem,
    opts: &EllipticOptions,
    dim: usize,
    residual: impl Fn(&Field) -> Result<Field>,
) -> Result<(Field, f64)> {
    let mut values = system.solve(opts.backend, opts.tolerance)?;
    let scale = |u: &[f64]| {
        let rhs = system.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let un = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (rhs + system.matrix.max_diag() * un).max(f64::MIN_POSITIVE)
    };
    let mut u = Field { dim, values: values.clone() };
    let mut r = residual(&u)?;
    let mut rel = r.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale(&values);
    if !(rel <= opts.tolerance) {
        // one step of iterative refinement
        let correction = EllipticSystem { matrix: system.matrix.clone(), rhs: r.scaled(-1.0).values };
        let du = correction.solve(opts.backend, opts.tolerance)?;
        for (v, d) in values.iter_mut().zip(&du) {
            *v += d;
        }
        u = Field { dim, values: values.clone() };
        r = residual(&u)?;
        rel = r.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale(&values);
    }
    if !u.is_finite() || !(rel <= opts.tolerance) {
        return Err(WireError::Numerical {
            message: format!("relative residual {rel:.3e} above tolerance {:.1e}", opts.tolerance),
            condition: condition_estimate(&system.matrix),
        });
    }
    let _ = grid;
    Ok((u, r.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
}

fn condition_estimate(m: &SystemMatrix) -> f64 {
    if m.size() > 2048 {
        return f64::NAN;
    }
    let sv = m.to_dense().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Solves `-D_x(D_x u + f) + u⊥ = h`.
///
/// Fails with [`WireError::NearGeodesic`] when the bentness of `(γ, ξ)` is
/// below `opts.bentness_min`; the operator loses injectivity in that limit.
pub fn solve_flux_form(
    grid: &Grid,
    f: &Field,
    h: &Field,
    xi: &Field,
    geo: &GeometrySamples,
    opts: &EllipticOptions,
) -> Result<FluxSolution> {
    check_inputs(grid, &[f, h, xi], geo)?;
    if opts.bentness_min > 0.0 {
        let b = bentness(grid, xi, geo, opts)?;
        if !(b.b_value >= opts.bentness_min) {
            return Err(WireError::NearGeodesic { bentness: b.b_value, threshold: opts.bentness_min });
        }
    }
    let system = assemble_flux_form(grid, f, h, xi, geo)?;
    let (u, residual) = solve_checked(grid, &system, opts, xi.dim, |u| {
        Ok(apply_flux_operator(grid, u, f, xi, geo)?.sub(h))
    })?;
    let flux = cov_dx(grid, &u, xi, geo)?.add(f);
    Ok(FluxSolution { u, flux, residual })
}

/// θ from `-D_x(D_x θ + Ψ) + θ⊥ = Φ`; the flux is `D_x θ + Ψ`.
pub fn solve_theta(
    grid: &Grid,
    state: &CurveState,
    geo: &GeometrySamples,
    sources: &SourceTerms,
    opts: &EllipticOptions,
) -> Result<FluxSolution> {
    solve_flux_form(grid, &sources.psi, &sources.phi, &state.xi, geo, opts)
}

/// Bentness value with its minimizer.
#[derive(Clone, Debug)]
pub struct BentnessReport {
    pub b_value: f64,
    pub phi: Field,
    /// `‖-D_x² φ + φ - ξ‖_∞`.
    pub residual: f64,
}

/// `B(γ, ξ) = inf_φ (‖φ - ξ‖² + ‖D_x φ‖²)^{1/2}`, attained at the solution of
/// `-D_x² φ + φ = ξ`.
pub fn bentness(
    grid: &Grid,
    xi: &Field,
    geo: &GeometrySamples,
    opts: &EllipticOptions,
) -> Result<BentnessReport> {
    let system = assemble_bentness(grid, xi, geo)?;
    let (phi, residual) = solve_checked(grid, &system, opts, xi.dim, |phi| {
        let d2 = cov_dx(grid, &cov_dx(grid, phi, xi, geo)?, xi, geo)?;
        Ok(phi.sub(&d2).sub(xi))
    })?;
    let dphi = cov_dx(grid, &phi, xi, geo)?;
    let a = l2_norm(&phi.sub(xi));
    let b = l2_norm(&dphi);
    Ok(BentnessReport { b_value: (a * a + b * b).sqrt(), phi, residual })
}
