//! The wave equation for the unit tangent ξ.
//!
//! Two solvers:
//!
//! * the d'Alembert integral operator `I(a, b, f, h)` for
//!   `u_tt - u_xx = f + h_x`, evaluated on a space-time grid with `Δt = Δx` so
//!   that characteristics pass through grid points, together with the
//!   characteristic derivatives `u± = u_x ± u_t` and a Picard iteration;
//! * a three-level covariant leapfrog for
//!   `D_t²ξ - D_x²ξ = (‖D_xξ‖² - ‖D_tξ‖²)ξ + θ - g(θ, ξ)ξ`.
//!
//! In frame components the covariant equation becomes `ξ_tt - ξ_xx = F + H_x`
//! with `H = Γ(ξ, ξ)` and
//!
//! ```text
//! F = -(Γ_t(η, ξ) + Γ(η_t, ξ) + Γ(η, ξ_t)) - Γ(η, D_tξ) + Γ(ξ, D_xξ)
//!     + (‖D_xξ‖² - ‖D_tξ‖²)ξ + θ - g(θ, ξ)ξ,
//! ```
//!
//! where `Γ_t` is the rate of the Christoffel symbols along the motion of γ.

use crate::error::{Result, WireError};
use crate::fields::{cov_dx, dot, gamma_apply, m0, time_derivative, Field, Grid};
use crate::geometry::GeometrySamples;

/// Data of `u_tt - u_xx = f + h_x`, `u(0) = a`, `u_t(0) = b`; `f` and `h` are
/// sampled at the time levels `t_j = j Δt` with `Δt = Δx`.
#[derive(Clone, Debug)]
pub struct WaveData {
    pub a: Field,
    pub b: Field,
    pub f: Vec<Field>,
    pub h: Vec<Field>,
}

impl WaveData {
    /// Homogeneous data over `levels` time levels.
    pub fn free(a: Field, b: Field, levels: usize) -> Self {
        let z = Field::zeros(a.n_points(), a.dim);
        Self { f: vec![z.clone(); levels], h: vec![z; levels], a, b }
    }

    pub fn levels(&self) -> usize {
        self.f.len()
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if self.a.n_points() != grid.n_points {
            return Err(WireError::Shape("initial data does not match the grid".into()));
        }
        self.a.same_shape(&self.b)?;
        if self.f.len() != self.h.len() || self.f.is_empty() {
            return Err(WireError::Shape("f and h need the same nonzero number of levels".into()));
        }
        for (f, h) in self.f.iter().zip(&self.h) {
            self.a.same_shape(f)?;
            self.a.same_shape(h)?;
        }
        Ok(())
    }

    /// `max |‖a‖² - 1| + max |g(a, b)|`.
    pub fn admissibility_defect(&self) -> f64 {
        let n2 = self.a.norm_sq().values.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
        n2 + dot(&self.a, &self.b).max_abs()
    }
}

/// `u± = u_x ± u_t` at every time level.
#[derive(Clone, Debug)]
pub struct CharacteristicFields {
    pub u_plus: Vec<Field>,
    pub u_minus: Vec<Field>,
}

impl CharacteristicFields {
    pub fn u_x(&self, j: usize) -> Field {
        self.u_plus[j].add(&self.u_minus[j]).scaled(0.5)
    }

    pub fn u_t(&self, j: usize) -> Field {
        self.u_plus[j].sub(&self.u_minus[j]).scaled(0.5)
    }
}

/// Trapezoid weights (without the factor Δ) on levels `0..=j`.
fn trapezoid(j: usize, l: usize) -> f64 {
    if j == 0 {
        0.0
    } else if l == 0 || l == j {
        0.5
    } else {
        1.0
    }
}

/// `Σ_{i=k-s}^{k+s}` trapezoid sum of the periodic field `f`, times Δ.
fn spatial_trapezoid(grid: &Grid, f: &Field, k: usize, s: usize, out: &mut [f64]) {
    out.fill(0.0);
    if s == 0 {
        return;
    }
    let n = f.dim;
    for i in -(s as isize)..=(s as isize) {
        let w = if i.unsigned_abs() == s { 0.5 } else { 1.0 } * grid.dx;
        let row = f.row(grid.wrap(k as isize + i));
        for a in 0..n {
            out[a] += w * row[a];
        }
    }
}

fn time_level(grid: &Grid, data: &WaveData, t: f64) -> Result<usize> {
    let j = t / grid.dx;
    let jr = j.round();
    if t < 0.0 || (j - jr).abs() > 1e-9 * j.abs().max(1.0) {
        return Err(WireError::Usage(format!("t = {t} is not on the characteristic time grid")));
    }
    let j = jr as usize;
    if j >= data.levels() {
        return Err(WireError::Usage(format!("t = {t} lies beyond the {} stored levels", data.levels())));
    }
    Ok(j)
}

/// `u(·, t) = I(a, b, f, h)(·, t)`:
///
/// `½{a(x+t) + a(x-t)} + ½∫b + ½∫∫f + ½∫{h(x+(t-τ), τ) - h(x-(t-τ), τ)} dτ`,
/// with all integrals by the trapezoid rule along grid characteristics.
pub fn wave_integral(grid: &Grid, data: &WaveData, t: f64) -> Result<Field> {
    data.check(grid)?;
    let j = time_level(grid, data, t)?;
    Ok(wave_integral_level(grid, data, j))
}

/// [`wave_integral`] at every stored level.
pub fn wave_integral_series(grid: &Grid, data: &WaveData) -> Result<Vec<Field>> {
    data.check(grid)?;
    Ok((0..data.levels()).map(|j| wave_integral_level(grid, data, j)).collect())
}

fn wave_integral_level(grid: &Grid, data: &WaveData, j: usize) -> Field {
    let n = data.a.dim;
    let big_n = grid.n_points;
    let mut out = Field::zeros(big_n, n);
    let mut tmp = vec![0.0; n];
    let ji = j as isize;
    for k in 0..big_n {
        let ki = k as isize;
        let o = out.row_mut(k);
        let ap = data.a.row(grid.wrap(ki + ji));
        let am = data.a.row(grid.wrap(ki - ji));
        for c in 0..n {
            o[c] = 0.5 * (ap[c] + am[c]);
        }
        spatial_trapezoid(grid, &data.b, k, j, &mut tmp);
        for c in 0..n {
            o[c] += 0.5 * tmp[c];
        }
        for l in 0..=j {
            let w = trapezoid(j, l) * grid.dx;
            if w == 0.0 {
                continue;
            }
            let s = (j - l) as isize;
            spatial_trapezoid(grid, &data.f[l], k, j - l, &mut tmp);
            let hp = data.h[l].row(grid.wrap(ki + s));
            let hm = data.h[l].row(grid.wrap(ki - s));
            for c in 0..n {
                o[c] += 0.5 * w * (tmp[c] + hp[c] - hm[c]);
            }
        }
    }
    out
}

/// Characteristic derivatives of `u = I(a, b, f, h)`:
///
/// `u±(x,t) = a'(x±t) ± b(x±t) ± ∫f(x±(t-τ), τ)dτ + {h(x±t, 0) - h(x, t)}
///            + ∫h_t(x±(t-τ), τ)dτ`.
///
/// Only values of `h` and its time differences enter; `h` is never
/// differentiated in `x`.
pub fn characteristic_derivatives(grid: &Grid, data: &WaveData) -> Result<CharacteristicFields> {
    data.check(grid)?;
    if data.levels() < 3 {
        return Err(WireError::Usage("characteristic derivatives need at least three time levels".into()));
    }
    let n = data.a.dim;
    let big_n = grid.n_points;
    let da = grid.diff(&data.a)?;
    let h_t = time_derivative(&data.h, grid.dx);
    let mut u_plus = Vec::with_capacity(data.levels());
    let mut u_minus = Vec::with_capacity(data.levels());
    for j in 0..data.levels() {
        let ji = j as isize;
        let mut up = Field::zeros(big_n, n);
        let mut um = Field::zeros(big_n, n);
        for k in 0..big_n {
            let ki = k as isize;
            for (sign, out) in [(1.0, &mut up), (-1.0, &mut um)] {
                let si = if sign > 0.0 { 1 } else { -1 };
                let foot = grid.wrap(ki + si * ji);
                let o = out.row_mut(k);
                let (a1, b1) = (da.row(foot), data.b.row(foot));
                let (h0, hk) = (data.h[0].row(foot), data.h[j].row(k));
                for c in 0..n {
                    o[c] = a1[c] + sign * b1[c] + h0[c] - hk[c];
                }
                for l in 0..=j {
                    let w = trapezoid(j, l) * grid.dx;
                    if w == 0.0 {
                        continue;
                    }
                    let p = grid.wrap(ki + si * (j - l) as isize);
                    let (fr, hr) = (data.f[l].row(p), h_t[l].row(p));
                    for c in 0..n {
                        o[c] += w * (sign * fr[c] + hr[c]);
                    }
                }
            }
        }
        u_plus.push(up);
        u_minus.push(um);
    }
    Ok(CharacteristicFields { u_plus, u_minus })
}

/// Known coefficient series over a characteristic window, one entry per time
/// level `t_j = j Δx`.
#[derive(Clone, Copy, Debug)]
pub struct WaveCoefficients<'a> {
    pub geo: &'a [GeometrySamples],
    pub eta: &'a [Field],
    pub eta_t: &'a [Field],
    pub theta: &'a [Field],
}

impl WaveCoefficients<'_> {
    pub fn levels(&self) -> usize {
        self.theta.len()
    }

    fn check(&self) -> Result<()> {
        let m = self.levels();
        if self.geo.len() != m || self.eta.len() != m || self.eta_t.len() != m || m < 3 {
            return Err(WireError::Shape("coefficient series need equal lengths of at least 3".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardOptions {
    pub max_iter: usize,
    /// Iteration stops once the `M_1` distance of successive iterates falls
    /// below `tol · max(1, M_1(u))`.
    pub tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { max_iter: 60, tol: 1e-10 }
    }
}

/// Fixed point of `u = I(a, b, F(u), H(u))` over a window.
#[derive(Clone, Debug)]
pub struct WaveSolution {
    pub xi: Vec<Field>,
    pub xi_x: Vec<Field>,
    pub xi_t: Vec<Field>,
    /// `M_1` distances of successive iterates.
    pub distances: Vec<f64>,
    /// `distances[i+1] / distances[i]`.
    pub ratios: Vec<f64>,
}

/// Source terms `F` and `H` for the iterate `(u, u_x, u_t)` at level `j`.
pub fn wave_sources(
    grid: &Grid,
    coeffs: &WaveCoefficients,
    j: usize,
    u: &Field,
    u_x: &Field,
    u_t: &Field,
) -> Result<(Field, Field)> {
    let geo = &coeffs.geo[j];
    let eta = &coeffs.eta[j];
    let theta = &coeffs.theta[j];
    let _ = grid;
    let hh = gamma_apply(u, u, geo)?;
    let dx_xi = u_x.add(&hh);
    let dt_xi = u_t.add(&gamma_apply(eta, u, geo)?);
    let n = u.dim;
    let mut f = Field::zeros(u.n_points(), n);
    let mut t1 = vec![0.0; n];
    for k in 0..u.n_points() {
        let (uk, dxk, dtk, th, et) = (u.row(k), dx_xi.row(k), dt_xi.row(k), theta.row(k), eta.row(k));
        let nx: f64 = dxk.iter().map(|v| v * v).sum();
        let nt: f64 = dtk.iter().map(|v| v * v).sum();
        let gt: f64 = th.iter().zip(uk).map(|(a, b)| a * b).sum();
        let o = f.row_mut(k);
        for c in 0..n {
            o[c] = (nx - nt) * uk[c] + th[c] - gt * uk[c];
        }
        if !geo.flat {
            geo.gamma_rate(k, et, et, uk, &mut t1);
            o.iter_mut().zip(&t1).for_each(|(a, b)| *a -= b);
            geo.gamma(k, coeffs.eta_t[j].row(k), uk, &mut t1);
            o.iter_mut().zip(&t1).for_each(|(a, b)| *a -= b);
            geo.gamma(k, et, u_t.row(k), &mut t1);
            o.iter_mut().zip(&t1).for_each(|(a, b)| *a -= b);
            geo.gamma(k, et, dtk, &mut t1);
            o.iter_mut().zip(&t1).for_each(|(a, b)| *a -= b);
            geo.gamma(k, uk, dxk, &mut t1);
            o.iter_mut().zip(&t1).for_each(|(a, b)| *a += b);
        }
    }
    Ok((f, hh))
}

/// Picard iteration `u_{k+1} = I(a, b, F(u_k), H(u_k))` on a window of
/// `coeffs.levels()` characteristic steps. Derivatives of every iterate come
/// from the characteristic formula.
///
/// Fails with [`WireError::WindowTooLarge`] when the distance ratio is at
/// least 1 for three consecutive iterations or the iteration does not settle
/// within `opts.max_iter`.
pub fn picard_wave_solve(
    grid: &Grid,
    a: &Field,
    b: &Field,
    coeffs: &WaveCoefficients,
    opts: &PicardOptions,
) -> Result<WaveSolution> {
    coeffs.check()?;
    let levels = coeffs.levels();
    let dt = grid.dx;
    let da = grid.diff(a)?;
    let mut xi: Vec<Field> = (0..levels)
        .map(|j| {
            let mut u = a.clone();
            u.axpy(j as f64 * dt, b);
            u
        })
        .collect();
    let mut xi_x = vec![da; levels];
    let mut xi_t = vec![b.clone(); levels];
    let mut distances: Vec<f64> = Vec::new();
    let mut ratios = Vec::new();
    let mut streak = 0;
    for _ in 0..opts.max_iter {
        let mut f = Vec::with_capacity(levels);
        let mut h = Vec::with_capacity(levels);
        for j in 0..levels {
            let (fj, hj) = wave_sources(grid, coeffs, j, &xi[j], &xi_x[j], &xi_t[j])?;
            f.push(fj);
            h.push(hj);
        }
        let data = WaveData { a: a.clone(), b: b.clone(), f, h };
        let next = wave_integral_series(grid, &data)?;
        let ch = characteristic_derivatives(grid, &data)?;
        let next_x: Vec<Field> = (0..levels).map(|j| ch.u_x(j)).collect();
        let next_t: Vec<Field> = (0..levels).map(|j| ch.u_t(j)).collect();
        let dist = (0..levels).map(|j| m0(&next[j].sub(&xi[j]))).fold(0.0, f64::max)
            + (0..levels).map(|j| m0(&next_x[j].sub(&xi_x[j]))).fold(0.0, f64::max)
            + (0..levels).map(|j| m0(&next_t[j].sub(&xi_t[j]))).fold(0.0, f64::max);
        let size = (0..levels).map(|j| m0(&next[j])).fold(0.0, f64::max)
            + (0..levels).map(|j| m0(&next_x[j])).fold(0.0, f64::max)
            + (0..levels).map(|j| m0(&next_t[j])).fold(0.0, f64::max);
        if !dist.is_finite() {
            return Err(WireError::NonFinite("Picard wave iterate".into()));
        }
        if let Some(prev) = distances.last() {
            let r = dist / prev;
            ratios.push(r);
            streak = if r >= 1.0 { streak + 1 } else { 0 };
        }
        distances.push(dist);
        xi = next;
        xi_x = next_x;
        xi_t = next_t;
        if dist <= opts.tol * size.max(1.0) {
            return Ok(WaveSolution { xi, xi_x, xi_t, distances, ratios });
        }
        if streak >= 3 {
            return Err(WireError::WindowTooLarge { ratios });
        }
    }
    Err(WireError::WindowTooLarge { ratios })
}

/// `ξ_tt` from the covariant wave equation at one time level, given the
/// velocity `v = ξ_t` (frame components), the motion `η`, `η_t` of γ and θ.
#[allow(clippy::too_many_arguments)]
pub fn wave_acceleration(
    grid: &Grid,
    xi: &Field,
    v: &Field,
    theta: &Field,
    eta: &Field,
    eta_t: &Field,
    geo: &GeometrySamples,
) -> Result<Field> {
    let dx_xi = cov_dx(grid, xi, xi, geo)?;
    let mut acc = cov_dx(grid, &dx_xi, xi, geo)?;
    let w = v.add(&gamma_apply(eta, xi, geo)?);
    let n = xi.dim;
    let mut t1 = vec![0.0; n];
    for k in 0..xi.n_points() {
        let (x, dxk, wk, th) = (xi.row(k), dx_xi.row(k), w.row(k), theta.row(k));
        let nx: f64 = dxk.iter().map(|a| a * a).sum();
        let nt: f64 = wk.iter().map(|a| a * a).sum();
        let gt: f64 = th.iter().zip(x).map(|(a, b)| a * b).sum();
        let o = acc.row_mut(k);
        for c in 0..n {
            o[c] += (nx - nt) * x[c] + th[c] - gt * x[c];
        }
        if !geo.flat {
            let et = eta.row(k);
            geo.gamma_rate(k, et, et, x, &mut t1);
            o.iter_mut().zip(&t1).for_each(|(a, b)| *a -= b);
            geo.gamma(k, eta_t.row(k), x, &mut t1);
            o.iter_mut().zip(&t1).for_each(|(a, b)| *a -= b);
            geo.gamma(k, et, v.row(k), &mut t1);
            o.iter_mut().zip(&t1).for_each(|(a, b)| *a -= b);
            geo.gamma(k, et, wk, &mut t1);
            o.iter_mut().zip(&t1).for_each(|(a, b)| *a -= b);
        }
    }
    Ok(acc)
}

fn check_cfl(grid: &Grid, dt: f64) -> Result<()> {
    if !(dt > 0.0) || dt > grid.dx * (1.0 + 1e-12) {
        return Err(WireError::Cfl { dt, dx: grid.dx });
    }
    Ok(())
}

/// Three-level covariant leapfrog:
/// `(ξ⁺ - 2ξ + ξ⁻)/dt² = ξ_tt(ξ, (ξ⁺ - ξ⁻)/(2dt))`.
///
/// The implicit dependence on `ξ⁺` through the velocity is resolved by a
/// short fixed-point iteration.
#[allow(clippy::too_many_arguments)]
pub fn leapfrog_step(
    grid: &Grid,
    xi_prev: &Field,
    xi_curr: &Field,
    theta: &Field,
    eta: &Field,
    eta_t: &Field,
    geo: &GeometrySamples,
    dt: f64,
) -> Result<Field> {
    check_cfl(grid, dt)?;
    xi_prev.same_shape(xi_curr)?;
    let base = {
        let mut b = xi_curr.scaled(2.0);
        b.axpy(-1.0, xi_prev);
        b
    };
    let mut v = xi_curr.sub(xi_prev).scaled(1.0 / dt);
    let mut next = base.clone();
    for _ in 0..30 {
        let acc = wave_acceleration(grid, xi_curr, &v, theta, eta, eta_t, geo)?;
        let mut cand = base.clone();
        cand.axpy(dt * dt, &acc);
        let change = m0(&cand.sub(&next));
        next = cand;
        v = next.sub(xi_prev).scaled(0.5 / dt);
        if change <= 1e-15 * m0(&next).max(1.0) {
            break;
        }
    }
    if !next.is_finite() {
        return Err(WireError::NonFinite("leapfrog step".into()));
    }
    Ok(next)
}

/// First leapfrog level from a Taylor step `ξ¹ = a + dt b + dt²/2 ξ_tt(a, b)`.
#[allow(clippy::too_many_arguments)]
pub fn leapfrog_start(
    grid: &Grid,
    a: &Field,
    b: &Field,
    theta: &Field,
    eta: &Field,
    eta_t: &Field,
    geo: &GeometrySamples,
    dt: f64,
) -> Result<Field> {
    check_cfl(grid, dt)?;
    let acc = wave_acceleration(grid, a, b, theta, eta, eta_t, geo)?;
    let mut x = a.clone();
    x.axpy(dt, b);
    x.axpy(0.5 * dt * dt, &acc);
    Ok(x)
}

/// Leapfrog for the flat wave equation `u_tt = u_xx + f`:
/// `u⁺ = 2u - u⁻ + dt²(D_x D_x u + f)`.
pub fn free_leapfrog_step(grid: &Grid, prev: &Field, curr: &Field, f: Option<&Field>, dt: f64) -> Result<Field> {
    check_cfl(grid, dt)?;
    prev.same_shape(curr)?;
    let mut acc = grid.diff(&grid.diff(curr)?)?;
    if let Some(f) = f {
        acc.axpy(1.0, f);
    }
    let mut next = curr.scaled(2.0);
    next.axpy(-1.0, prev);
    next.axpy(dt * dt, &acc);
    Ok(next)
}

/// First level `u¹ = a + dt b + dt²/2 (D_x D_x a + f)` of [`free_leapfrog_step`].
pub fn free_leapfrog_start(grid: &Grid, a: &Field, b: &Field, f: Option<&Field>, dt: f64) -> Result<Field> {
    check_cfl(grid, dt)?;
    a.same_shape(b)?;
    let mut acc = grid.diff(&grid.diff(a)?)?;
    if let Some(f) = f {
        acc.axpy(1.0, f);
    }
    let mut next = a.clone();
    next.axpy(dt, b);
    next.axpy(0.5 * dt * dt, &acc);
    Ok(next)
}
