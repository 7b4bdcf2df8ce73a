//! Periodic grids on `S¹ = R/Z`, vector fields along a discrete curve and the
//! covariant difference operators.
//!
//! Spatial derivatives use a centered antisymmetric stencil. The covariant
//! derivative `D_x p = p_x + Γ(ξ, p)` is then antisymmetric with respect to the
//! grid inner product, so summation by parts holds exactly. Second covariant
//! derivatives are always formed as the composition `D_x ∘ D_x`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WireError};
use crate::geometry::GeometrySamples;

/// Centered first-derivative stencils.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    Second,
    Fourth,
    #[default]
    Sixth,
}

impl Stencil {
    /// Weights `c_m`, `(Dp)_k = Σ_m c_m (p_{k+m} - p_{k-m}) / Δx`.
    pub fn weights(self) -> &'static [f64] {
        match self {
            Stencil::Second => &[0.5],
            Stencil::Fourth => &[2.0 / 3.0, -1.0 / 12.0],
            Stencil::Sixth => &[0.75, -0.15, 1.0 / 60.0],
        }
    }

    pub fn half_width(self) -> usize {
        self.weights().len()
    }

    pub fn order(self) -> usize {
        2 * self.half_width()
    }
}

/// Uniform periodic grid with `N` points `x_k = k/N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub n_points: usize,
    pub dx: f64,
    pub stencil: Stencil,
}

impl Grid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(n_points: usize) -> Result<Self> {
        Self::with_stencil(n_points, Stencil::default())
    }

    pub fn with_stencil(n_points: usize, stencil: Stencil) -> Result<Self> {
        if n_points < Self::MIN_POINTS {
            return Err(WireError::Usage(format!("grid needs N >= 8 points, got {n_points}")));
        }
        Ok(Self { n_points, dx: 1.0 / n_points as f64, stencil })
    }

    pub fn x(&self, k: usize) -> f64 {
        k as f64 * self.dx
    }

    #[inline]
    pub fn wrap(&self, k: isize) -> usize {
        k.rem_euclid(self.n_points as isize) as usize
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.n_points() != self.n_points {
            return Err(WireError::Shape(format!(
                "field has {} points, grid has {}",
                f.n_points(),
                self.n_points
            )));
        }
        Ok(())
    }

    /// Plain periodic difference `p_x`.
    pub fn diff(&self, p: &Field) -> Result<Field> {
        self.check(p)?;
        Ok(self.diff_shifted(p, &[]))
    }

    /// Difference of a field whose periodic extension is `p_{k+N} = p_k + jump`
    /// (chart coordinates of a curve winding around a flat torus).
    pub fn diff_shifted(&self, p: &Field, jump: &[f64]) -> Field {
        let n = p.dim;
        let big_n = self.n_points as isize;
        let w = self.stencil.weights();
        let mut out = Field::zeros(self.n_points, n);
        for k in 0..self.n_points {
            let o = &mut out.values[k * n..(k + 1) * n];
            for (m, c) in w.iter().enumerate() {
                let m = m as isize + 1;
                let kp = k as isize + m;
                let km = k as isize - m;
                let (ip, ep) = (self.wrap(kp), kp.div_euclid(big_n) as f64);
                let (im, em) = (self.wrap(km), km.div_euclid(big_n) as f64);
                for a in 0..n {
                    let mut d = p.values[ip * n + a] - p.values[im * n + a];
                    if !jump.is_empty() {
                        d += (ep - em) * jump[a];
                    }
                    o[a] += c * d;
                }
            }
            for v in o.iter_mut() {
                *v /= self.dx;
            }
        }
        out
    }
}

/// `N × n` array of frame components, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(n_points: usize, dim: usize) -> Self {
        Self { dim, values: vec![0.0; n_points * dim] }
    }

    pub fn from_fn(n_points: usize, dim: usize, mut f: impl FnMut(usize) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(n_points * dim);
        for k in 0..n_points {
            let row = f(k);
            assert_eq!(row.len(), dim, "row {k} has the wrong length");
            values.extend_from_slice(&row);
        }
        Self { dim, values }
    }

    /// The same vector at every point.
    pub fn constant(n_points: usize, v: &[f64]) -> Self {
        Self::from_fn(n_points, v.len(), |_| v.to_vec())
    }

    pub fn n_points(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn same_shape(&self, other: &Field) -> Result<()> {
        if self.dim != other.dim || self.values.len() != other.values.len() {
            return Err(WireError::Shape(format!(
                "fields of shape {}x{} and {}x{}",
                self.n_points(),
                self.dim,
                other.n_points(),
                other.dim
            )));
        }
        Ok(())
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Field) {
        debug_assert_eq!(self.values.len(), x.values.len());
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field { dim: self.dim, values: self.values.iter().map(|v| a * v).collect() }
    }

    pub fn add(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise squared norms.
    pub fn norm_sq(&self) -> ScalarField {
        dot(self, self)
    }

    /// Pointwise normalization `p / |p|`.
    pub fn normalized(&self) -> Field {
        let mut out = self.clone();
        for k in 0..out.n_points() {
            let r = out.row_mut(k);
            let s = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if s > 0.0 {
                r.iter_mut().for_each(|v| *v /= s);
            }
        }
        out
    }
}

/// One real number per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The full unknown of the coupled system at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveState {
    /// Chart coordinates of γ, `N × n`.
    pub gamma: Field,
    /// Chart offset `γ_{k+N} - γ_k`; zero except for curves winding around a
    /// flat torus.
    pub winding: Vec<f64>,
    pub xi: Field,
    pub xi_t: Field,
    pub eta: Field,
    pub theta: Option<Field>,
    pub time: f64,
}

impl CurveState {
    pub fn n_points(&self) -> usize {
        self.xi.n_points()
    }

    pub fn dim(&self) -> usize {
        self.xi.dim
    }

    pub fn check_shapes(&self) -> Result<()> {
        self.gamma.same_shape(&self.xi)?;
        self.xi.same_shape(&self.xi_t)?;
        self.xi.same_shape(&self.eta)?;
        if let Some(t) = &self.theta {
            self.xi.same_shape(t)?;
        }
        if self.winding.len() != self.dim() {
            return Err(WireError::Shape("winding vector length differs from dimension".into()));
        }
        Ok(())
    }

    /// `max_k |‖ξ_k‖² - 1|`.
    pub fn constraint_drift(&self) -> f64 {
        constraint_drift(&self.xi)
    }

    pub fn is_finite(&self) -> bool {
        self.gamma.is_finite()
            && self.xi.is_finite()
            && self.xi_t.is_finite()
            && self.eta.is_finite()
            && self.theta.as_ref().is_none_or(|t| t.is_finite())
            && self.time.is_finite()
    }
}

pub fn constraint_drift(xi: &Field) -> f64 {
    (0..xi.n_points())
        .map(|k| (xi.row(k).iter().map(|v| v * v).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn check_geo(p: &Field, geo: &GeometrySamples) -> Result<()> {
    if geo.len() != p.n_points() || geo.dim != p.dim {
        return Err(WireError::Shape(format!(
            "geometry sampled at {} points of dimension {}, field is {}x{}",
            geo.len(),
            geo.dim,
            p.n_points(),
            p.dim
        )));
    }
    Ok(())
}

/// Pointwise `Γ(v, p)`.
pub fn gamma_apply(v: &Field, p: &Field, geo: &GeometrySamples) -> Result<Field> {
    v.same_shape(p)?;
    check_geo(p, geo)?;
    let mut out = Field::zeros(p.n_points(), p.dim);
    if geo.flat {
        return Ok(out);
    }
    for k in 0..p.n_points() {
        let (a, b) = (v.row(k), p.row(k));
        geo.gamma(k, a, b, out.row_mut(k));
    }
    Ok(out)
}

/// Pointwise `R(u, v) w`.
pub fn curvature_apply(u: &Field, v: &Field, w: &Field, geo: &GeometrySamples) -> Result<Field> {
    u.same_shape(v)?;
    u.same_shape(w)?;
    check_geo(u, geo)?;
    let mut out = Field::zeros(u.n_points(), u.dim);
    if geo.flat {
        return Ok(out);
    }
    for k in 0..u.n_points() {
        geo.curvature(k, u.row(k), v.row(k), w.row(k), out.row_mut(k));
    }
    Ok(out)
}

/// `D_x p = p_x + Γ(ξ, p)`.
pub fn cov_dx(grid: &Grid, p: &Field, xi: &Field, geo: &GeometrySamples) -> Result<Field> {
    p.same_shape(xi)?;
    let mut out = grid.diff(p)?;
    out.axpy(1.0, &gamma_apply(xi, p, geo)?);
    Ok(out)
}

/// Centered time difference `(p_next - p_prev)/(2 dt) + Γ(η, p_center)`.
pub fn cov_dt(
    p_prev: &Field,
    p_next: &Field,
    eta: &Field,
    dt: f64,
    geo: &GeometrySamples,
) -> Result<Field> {
    p_prev.same_shape(p_next)?;
    p_prev.same_shape(eta)?;
    if dt <= 0.0 || !dt.is_finite() {
        return Err(WireError::Usage(format!("time step must be positive, got {dt}")));
    }
    let mut center = p_prev.add(p_next);
    center.values.iter_mut().for_each(|v| *v *= 0.5);
    let mut out = p_next.sub(p_prev).scaled(0.5 / dt);
    out.axpy(1.0, &gamma_apply(eta, &center, geo)?);
    Ok(out)
}

/// `v - g(v, ξ) ξ` pointwise.
pub fn perp(v: &Field, xi: &Field) -> Result<Field> {
    v.same_shape(xi)?;
    let mut out = v.clone();
    for k in 0..v.n_points() {
        let x = xi.row(k);
        let d: f64 = v.row(k).iter().zip(x).map(|(a, b)| a * b).sum();
        for (o, xv) in out.row_mut(k).iter_mut().zip(x) {
            *o -= d * xv;
        }
    }
    Ok(out)
}

/// Pointwise `g(p, q)`.
pub fn dot(p: &Field, q: &Field) -> ScalarField {
    debug_assert_eq!(p.values.len(), q.values.len());
    let values = (0..p.n_points())
        .map(|k| p.row(k).iter().zip(q.row(k)).map(|(a, b)| a * b).sum())
        .collect();
    ScalarField { values }
}

/// `⟨p, q⟩ = Δx Σ_k g(p_k, q_k)`.
pub fn l2_inner(p: &Field, q: &Field) -> Result<f64> {
    p.same_shape(q)?;
    let n = p.n_points();
    Ok(p.values.iter().zip(&q.values).map(|(a, b)| a * b).sum::<f64>() / n as f64)
}

pub fn l2_norm(p: &Field) -> f64 {
    (p.values.iter().map(|v| v * v).sum::<f64>() / p.n_points() as f64).sqrt()
}

/// `m_0(u) = max_k ‖u_k‖`.
pub fn m0(u: &Field) -> f64 {
    u.norm_sq().values.into_iter().fold(0.0, f64::max).sqrt()
}

/// Time derivative of a series sampled at spacing `dt`: centered inside,
/// one-sided second order at both ends.
pub fn time_derivative(series: &[Field], dt: f64) -> Vec<Field> {
    let m = series.len();
    assert!(m >= 3, "time derivative needs at least three levels");
    (0..m)
        .map(|j| {
            if j == 0 {
                let mut d = series[1].scaled(4.0);
                d.axpy(-3.0, &series[0]);
                d.axpy(-1.0, &series[2]);
                d.scaled(0.5 / dt)
            } else if j == m - 1 {
                let mut d = series[m - 1].scaled(3.0);
                d.axpy(-4.0, &series[m - 2]);
                d.axpy(1.0, &series[m - 3]);
                d.scaled(0.5 / dt)
            } else {
                series[j + 1].sub(&series[j - 1]).scaled(0.5 / dt)
            }
        })
        .collect()
}

/// `M_0(u) = sup_t m_0(u)`.
pub fn m0_series(series: &[Field]) -> f64 {
    series.iter().map(m0).fold(0.0, f64::max)
}

/// `M_{0,1}(u) = M_0(u) + M_0(u_t)`.
pub fn m01_series(series: &[Field], dt: f64) -> f64 {
    m0_series(series) + m0_series(&time_derivative(series, dt))
}

/// `M_1(u) = M_0(u) + M_0(u_x) + M_0(u_t)`.
pub fn m1_series(grid: &Grid, series: &[Field], dt: f64) -> Result<f64> {
    let mut mx: f64 = 0.0;
    for u in series {
        mx = mx.max(m0(&grid.diff(u)?));
    }
    Ok(m01_series(series, dt) + mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn circle_tangent(n: usize) -> Field {
        Field::from_fn(n, 2, |k| {
            let s = 2.0 * PI * k as f64 / n as f64;
            vec![-s.sin(), s.cos()]
        })
    }

    fn random_field(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Field {
        Field { dim, values: (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect() }
    }

    #[test]
    fn grid_rejects_small() {
        assert!(Grid::new(4).is_err());
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn stencils_are_consistent() {
        for s in [Stencil::Second, Stencil::Fourth, Stencil::Sixth] {
            let sum: f64 = s.weights().iter().enumerate().map(|(m, c)| 2.0 * (m + 1) as f64 * c).sum();
            assert!((sum - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_orders() {
        for (s, order) in [(Stencil::Second, 2.0), (Stencil::Fourth, 4.0), (Stencil::Sixth, 6.0)] {
            let err = |n: usize| {
                let g = Grid::with_stencil(n, s).unwrap();
                let p = Field::from_fn(n, 1, |k| vec![(2.0 * PI * g.x(k)).sin()]);
                let d = g.diff(&p).unwrap();
                (0..n)
                    .map(|k| (d.values[k] - 2.0 * PI * (2.0 * PI * g.x(k)).cos()).abs())
                    .fold(0.0, f64::max)
            };
            let observed = (err(16) / err(32)).log2();
            assert!(observed > order - 0.2, "{s:?}: {observed}");
        }
    }

    #[test]
    fn cov_dx_examples() {
        let n = 64;
        let g = Grid::with_stencil(n, Stencil::Second).unwrap();
        let flat = GeometrySamples::flat(n, 2);
        let c = Field::constant(n, &[0.3, -1.0]);
        let xi = circle_tangent(n);
        assert!(m0(&cov_dx(&g, &c, &xi, &flat).unwrap()) < 1e-13);

        let d = cov_dx(&g, &xi, &xi, &flat).unwrap();
        let err = d.norm_sq().values.iter().map(|v| (v.sqrt() - 2.0 * PI).abs()).fold(0.0, f64::max);
        assert!(err < 2.0 * PI * (2.0 * PI / n as f64).powi(2));

        let m = ManifoldModel::Hyperbolic;
        let gamma = Field::from_fn(n, 2, |k| vec![0.1 * k as f64, 1.0 + 0.5 * (k as f64).sin().abs()]);
        let geo = m.sample_curve(&gamma.values).unwrap();
        let e1 = Field::constant(n, &[1.0, 0.0]);
        let d = cov_dx(&g, &e1, &e1, &geo).unwrap();
        for k in 0..n {
            assert!((d.row(k)[0]).abs() < 1e-14 && (d.row(k)[1] - 1.0).abs() < 1e-14);
        }
        // D_t of a frame-constant field with η = e1 is Γ(e1, p).
        let p = Field::constant(n, &[0.0, 1.0]);
        let d = cov_dt(&p, &p, &e1, 0.1, &geo).unwrap();
        for k in 0..n {
            assert!((d.row(k)[0] + 1.0).abs() < 1e-14 && d.row(k)[1].abs() < 1e-14);
        }
    }

    #[test]
    fn cov_dt_examples() {
        let n = 16;
        let flat = GeometrySamples::flat(n, 2);
        let p = circle_tangent(n);
        let eta = Field::zeros(n, 2);
        assert_eq!(m0(&cov_dt(&p, &p, &eta, 0.1, &flat).unwrap()), 0.0);
        // p(t) = sin(t) q: centered difference converges to cos(t) q at order 2.
        let q = circle_tangent(n);
        let err = |dt: f64| {
            let t = 0.3;
            let d = cov_dt(&q.scaled((t - dt).sin()), &q.scaled((t + dt).sin()), &eta, dt, &flat).unwrap();
            m0(&d.sub(&q.scaled(t.cos())))
        };
        let order = (err(0.02) / err(0.01)).log2();
        assert!((order - 2.0).abs() < 0.1);
        assert!(cov_dt(&p, &p, &eta, 0.0, &flat).is_err());
    }

    #[test]
    fn perp_examples() {
        let xi = Field::constant(3, &[1.0, 0.0]);
        let v = Field::constant(3, &[1.0, 1.0]);
        assert_eq!(perp(&v, &xi).unwrap().row(1), &[0.0, 1.0]);
        assert_eq!(m0(&perp(&xi, &xi).unwrap()), 0.0);
        let w = Field::constant(3, &[0.0, 2.0]);
        assert_eq!(perp(&w, &xi).unwrap(), w);
    }

    #[test]
    fn inner_products_and_norms() {
        let n = 64;
        let xi = circle_tangent(n);
        assert!((l2_inner(&xi, &xi).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(m0(&Field::constant(5, &[3.0, 4.0])), 5.0);
        let s = Field::from_fn(n, 1, |k| vec![(2.0 * PI * 3.0 * k as f64 / n as f64).sin()]);
        let c = Field::from_fn(n, 1, |k| vec![(2.0 * PI * 3.0 * k as f64 / n as f64).cos()]);
        assert!(l2_inner(&s, &c).unwrap().abs() < 1e-14);
        assert!(l2_inner(&s, &Field::zeros(n - 1, 1)).is_err());
    }

    #[test]
    fn summation_by_parts_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 48;
        let g = Grid::new(n).unwrap();
        let m = ManifoldModel::Hyperbolic;
        let gamma = Field::from_fn(n, 2, |k| {
            let s = 2.0 * PI * k as f64 / n as f64;
            vec![0.3 * s.cos(), 1.0 + 0.3 * s.sin()]
        });
        let geo = m.sample_curve(&gamma.values).unwrap();
        for _ in 0..20 {
            let xi = random_field(&mut rng, n, 2);
            let p = random_field(&mut rng, n, 2);
            let q = random_field(&mut rng, n, 2);
            let lhs = l2_inner(&cov_dx(&g, &p, &xi, &geo).unwrap(), &q).unwrap()
                + l2_inner(&p, &cov_dx(&g, &q, &xi, &geo).unwrap()).unwrap();
            assert!(lhs.abs() < 1e-12, "{lhs}");
        }
    }

    #[test]
    fn tangent_is_orthogonal_to_its_derivative() {
        let err = |n: usize| {
            let g = Grid::with_stencil(n, Stencil::Second).unwrap();
            let xi = Field::from_fn(n, 2, |k| {
                let a = 2.0 * PI * g.x(k) + 0.3 * (2.0 * PI * g.x(k)).sin();
                vec![a.cos(), a.sin()]
            });
            let d = cov_dx(&g, &xi, &xi, &GeometrySamples::flat(n, 2)).unwrap();
            dot(&d, &xi).max_abs()
        };
        assert!((err(32) / err(64)).log2() > 1.9);
    }

    #[test]
    fn perp_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20;
        let xi = random_field(&mut rng, n, 3).normalized();
        let v = random_field(&mut rng, n, 3);
        let p1 = perp(&v, &xi).unwrap();
        let p2 = perp(&p1, &xi).unwrap();
        assert!(m0(&p1.sub(&p2)) < 1e-12);
        let s = Field::from_fn(n, 3, |k| xi.row(k).iter().map(|x| x * (k as f64 + 1.0)).collect());
        assert!(l2_inner(&p1, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn shifted_difference_of_winding_line() {
        let n = 16;
        let g = Grid::new(n).unwrap();
        let line = Field::from_fn(n, 2, |k| vec![g.x(k), 0.0]);
        let d = g.diff_shifted(&line, &[1.0, 0.0]);
        for k in 0..n {
            assert!((d.row(k)[0] - 1.0).abs() < 1e-12 && d.row(k)[1].abs() < 1e-12);
        }
    }

    #[test]
    fn series_norms() {
        let n = 8;
        let series: Vec<Field> = (0..5).map(|j| Field::constant(n, &[j as f64 * 0.1, 0.0])).collect();
        assert!((m0_series(&series) - 0.4).abs() < 1e-15);
        assert!((m01_series(&series, 0.1) - 1.4).abs() < 1e-12);
        let g = Grid::new(n).unwrap();
        assert!((m1_series(&g, &series, 0.1).unwrap() - 1.4).abs() < 1e-12);
    }
}
