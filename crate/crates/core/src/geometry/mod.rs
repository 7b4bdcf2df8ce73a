//! Chart models of the ambient manifold and their metric data expressed in an
//! orthonormal frame field.
//!
//! Every built-in model admits a global orthonormal frame on its chart. All
//! models except the flat ones are conformally flat, `g = e^{2λ} δ`, with the
//! frame `e_i = e^{-λ} ∂_i`; their Christoffel symbols, the frame derivatives
//! of those symbols and the curvature operator are evaluated in closed form
//! from λ, ∇λ and ∇²λ.
//!
//! Conventions:
//! * `h` converts frame components to chart components, `e_j = h^i_j ∂_i`.
//! * `Γ(e_i, e_j) = Γ_i^k_j e_k`, antisymmetric in `(k, j)`.
//! * `R(X, Y) = ∇_X ∇_Y - ∇_Y ∇_X - ∇_[X,Y]`, so that on a moving curve
//!   `D_t D_x p - D_x D_t p = R(γ_t, γ_x) p`.

pub mod expr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WireError};
pub use expr::{Expr, Jet};

/// Chart coordinates of a point.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint(pub Vec<f64>);

impl ChartPoint {
    pub fn new(coords: &[f64]) -> Self {
        Self(coords.to_vec())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// Frame-to-chart conversion matrix, row-major: `h[i][j] = h^i_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMatrix {
    pub dim: usize,
    pub h: Vec<f64>,
}

impl FrameMatrix {
    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut h = vec![0.0; dim * dim];
        for i in 0..dim {
            h[i * dim + i] = s;
        }
        Self { dim, h }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.dim + j]
    }

    /// Chart components of the vector with frame components `v`.
    pub fn to_chart(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            out[i] = (0..n).map(|j| self.h[i * n + j] * v[j]).sum();
        }
    }

    pub fn inverse(&self) -> Result<FrameMatrix> {
        let m = nalgebra::DMatrix::from_row_slice(self.dim, self.dim, &self.h);
        let inv = m.try_inverse().ok_or_else(|| WireError::Numerical {
            message: "singular frame matrix".into(),
            condition: f64::INFINITY,
        })?;
        let mut h = vec![0.0; self.dim * self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                h[i * self.dim + j] = inv[(i, j)];
            }
        }
        Ok(Self { dim: self.dim, h })
    }
}

/// Frame components `Γ_i^k_j`, stored at `(i * n + k) * n + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelCoeffs {
    pub dim: usize,
    pub gamma: Vec<f64>,
}

impl ChristoffelCoeffs {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, gamma: vec![0.0; dim * dim * dim] }
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize, j: usize) -> f64 {
        self.gamma[(i * self.dim + k) * self.dim + j]
    }

    /// `out = Γ(v, p)`.
    #[inline]
    pub fn apply(&self, v: &[f64], p: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for o in out.iter_mut().take(n) {
            *o = 0.0;
        }
        for i in 0..n {
            if v[i] == 0.0 {
                continue;
            }
            for k in 0..n {
                let row = &self.gamma[(i * n + k) * n..(i * n + k) * n + n];
                let mut s = 0.0;
                for j in 0..n {
                    s += row[j] * p[j];
                }
                out[k] += v[i] * s;
            }
        }
    }

    /// Largest `|Γ_i^k_j + Γ_i^j_k|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    worst = worst.max((self.get(i, k, j) + self.get(i, j, k)).abs());
                }
            }
        }
        worst
    }

    /// Pointwise Frobenius norm `(Σ (Γ_i^k_j)²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.gamma.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Frame derivatives `e_m(Γ_i^k_j)`, stored at `((m * n + i) * n + k) * n + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelDerivative {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl ChristoffelDerivative {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim.pow(4)] }
    }

    #[inline]
    pub fn get(&self, m: usize, i: usize, k: usize, j: usize) -> f64 {
        let n = self.dim;
        self.data[((m * n + i) * n + k) * n + j]
    }

    /// Rate of change `(d/dt Γ)(v, p)` of the bilinear form when the base point
    /// moves with frame velocity `w`.
    pub fn apply(&self, w: &[f64], v: &[f64], p: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for o in out.iter_mut().take(n) {
            *o = 0.0;
        }
        for m in 0..n {
            if w[m] == 0.0 {
                continue;
            }
            for i in 0..n {
                let wv = w[m] * v[i];
                if wv == 0.0 {
                    continue;
                }
                for k in 0..n {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += self.get(m, i, k, j) * p[j];
                    }
                    out[k] += wv * s;
                }
            }
        }
    }
}

/// Frame components of the curvature operator: `r[i][j][k][l]` is the
/// `l`-component of `R(e_i, e_j) e_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureCoeffs {
    pub dim: usize,
    pub r: Vec<f64>,
}

impl CurvatureCoeffs {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, r: vec![0.0; dim.pow(4)] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dim;
        self.r[((i * n + j) * n + k) * n + l]
    }

    /// `out = R(u, v) w`.
    pub fn apply(&self, u: &[f64], v: &[f64], w: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for o in out.iter_mut().take(n) {
            *o = 0.0;
        }
        for i in 0..n {
            for j in 0..n {
                let uv = u[i] * v[j];
                if uv == 0.0 {
                    continue;
                }
                for k in 0..n {
                    let c = uv * w[k];
                    if c == 0.0 {
                        continue;
                    }
                    for l in 0..n {
                        out[l] += c * self.get(i, j, k, l);
                    }
                }
            }
        }
    }

    /// Largest violation of `R(e_i,e_j) = -R(e_j,e_i)` and of
    /// `g(R(e_i,e_j)e_k, e_l) = -g(R(e_i,e_j)e_l, e_k)`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst.max((self.get(i, j, k, l) + self.get(j, i, k, l)).abs());
                        worst = worst.max((self.get(i, j, k, l) + self.get(i, j, l, k)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Curvature operator from Christoffel symbols and their frame derivatives:
///
/// `R(e_i,e_j)e_k = [e_i(Γ_j^l_k) - e_j(Γ_i^l_k) + Γ_j^m_k Γ_i^l_m
///                   - Γ_i^m_k Γ_j^l_m - (Γ_i^m_j - Γ_j^m_i) Γ_m^l_k] e_l`.
pub fn curvature_from_connection(
    gamma: &ChristoffelCoeffs,
    dgamma: &ChristoffelDerivative,
) -> CurvatureCoeffs {
    let n = gamma.dim;
    let mut out = CurvatureCoeffs::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = dgamma.get(i, j, l, k) - dgamma.get(j, i, l, k);
                    for m in 0..n {
                        v += gamma.get(j, m, k) * gamma.get(i, l, m)
                            - gamma.get(i, m, k) * gamma.get(j, l, m)
                            - (gamma.get(i, m, j) - gamma.get(j, m, i)) * gamma.get(m, l, k);
                    }
                    out.r[((i * n + j) * n + k) * n + l] = v;
                }
            }
        }
    }
    out
}

/// Everything the solvers need to know about the manifold at one point.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub frame: FrameMatrix,
    pub frame_inv: FrameMatrix,
    pub christoffel: ChristoffelCoeffs,
    pub christoffel_derivative: ChristoffelDerivative,
    pub curvature: CurvatureCoeffs,
}

impl PointGeometry {
    pub fn flat(dim: usize) -> Self {
        Self {
            frame: FrameMatrix::identity(dim),
            frame_inv: FrameMatrix::identity(dim),
            christoffel: ChristoffelCoeffs::zeros(dim),
            christoffel_derivative: ChristoffelDerivative::zeros(dim),
            curvature: CurvatureCoeffs::zeros(dim),
        }
    }
}

/// The supported ambient manifolds, each on a single chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldModel {
    /// Flat `R^n`.
    Euclidean { dim: usize },
    /// Flat torus `R^n / (periods)`. Geometry is Euclidean; closed curves may
    /// wind around the lattice.
    FlatTorus { periods: Vec<f64> },
    /// Upper half-plane with metric `y^{-2}(dx² + dy²)`.
    Hyperbolic,
    /// Unit sphere in the stereographic chart from the north pole,
    /// metric `4 (1 + |p|²)^{-2} δ`.
    Sphere,
    /// `e^{2λ} δ` with λ a closed-form expression in `x`, `y`, `z`.
    Conformal {
        dim: usize,
        #[serde(with = "expr_string")]
        lambda: Expr,
    },
}

mod expr_string {
    use super::Expr;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(e.source())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Expr, D::Error> {
        let s = String::deserialize(d)?;
        Expr::parse(&s).map_err(serde::de::Error::custom)
    }
}

const SPHERE_CHART_RADIUS: f64 = 1e6;

impl ManifoldModel {
    pub fn euclidean(dim: usize) -> Self {
        ManifoldModel::Euclidean { dim }
    }

    pub fn conformal(dim: usize, lambda: &str) -> Result<Self> {
        let lambda = Expr::parse(lambda)?;
        if let Some(v) = lambda.max_variable() {
            if v >= dim {
                return Err(WireError::Expression(format!(
                    "λ = {lambda} uses coordinate {v} but the chart has dimension {dim}"
                )));
            }
        }
        Ok(ManifoldModel::Conformal { dim, lambda })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ManifoldModel::Euclidean { .. } => "euclidean",
            ManifoldModel::FlatTorus { .. } => "flat_torus",
            ManifoldModel::Hyperbolic => "hyperbolic",
            ManifoldModel::Sphere => "sphere",
            ManifoldModel::Conformal { .. } => "conformal",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ManifoldModel::Euclidean { dim } | ManifoldModel::Conformal { dim, .. } => *dim,
            ManifoldModel::FlatTorus { periods } => periods.len(),
            ManifoldModel::Hyperbolic | ManifoldModel::Sphere => 2,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, ManifoldModel::Euclidean { .. } | ManifoldModel::FlatTorus { .. })
    }

    /// Conformal factor jet, `None` for the flat models.
    fn lambda_jet(&self, p: &[f64]) -> Option<Jet> {
        match self {
            ManifoldModel::Euclidean { .. } | ManifoldModel::FlatTorus { .. } => None,
            ManifoldModel::Hyperbolic => {
                let y = p[1];
                let mut j = Jet::constant(-y.ln());
                j.grad[1] = -1.0 / y;
                j.hess[1][1] = 1.0 / (y * y);
                Some(j)
            }
            ManifoldModel::Sphere => {
                let r2 = p[0] * p[0] + p[1] * p[1];
                let q = 1.0 + r2;
                let mut j = Jet::constant(2f64.ln() - q.ln());
                for a in 0..2 {
                    j.grad[a] = -2.0 * p[a] / q;
                    for b in 0..2 {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        j.hess[a][b] = -2.0 * delta / q + 4.0 * p[a] * p[b] / (q * q);
                    }
                }
                Some(j)
            }
            ManifoldModel::Conformal { lambda, .. } => Some(lambda.jet(p)),
        }
    }

    /// Whether `p` lies in the open chart domain.
    pub fn in_domain(&self, p: &[f64]) -> bool {
        if p.len() != self.dim() || p.iter().any(|c| !c.is_finite()) {
            return false;
        }
        match self {
            ManifoldModel::Euclidean { .. } | ManifoldModel::FlatTorus { .. } => true,
            ManifoldModel::Hyperbolic => p[1] > 0.0,
            ManifoldModel::Sphere => p[0].hypot(p[1]) < SPHERE_CHART_RADIUS,
            ManifoldModel::Conformal { .. } => self.lambda_jet(p).is_some_and(|j| j.is_finite()),
        }
    }

    fn check(&self, p: &ChartPoint) -> Result<()> {
        if self.in_domain(p.coords()) {
            Ok(())
        } else {
            Err(WireError::Domain { manifold: self.name().to_string(), coords: p.0.clone() })
        }
    }

    /// Chart metric matrix `G_ij = g(∂_i, ∂_j)`, row-major.
    pub fn chart_metric(&self, p: &ChartPoint) -> Result<Vec<f64>> {
        self.check(p)?;
        let n = self.dim();
        let s = self.lambda_jet(p.coords()).map_or(1.0, |j| (2.0 * j.value).exp());
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            g[i * n + i] = s;
        }
        Ok(g)
    }

    pub fn frame_at(&self, p: &ChartPoint) -> Result<FrameMatrix> {
        self.check(p)?;
        Ok(match self.lambda_jet(p.coords()) {
            None => FrameMatrix::identity(self.dim()),
            Some(j) => FrameMatrix::scaled_identity(self.dim(), (-j.value).exp()),
        })
    }

    pub fn christoffel_at(&self, p: &ChartPoint) -> Result<ChristoffelCoeffs> {
        self.check(p)?;
        let n = self.dim();
        Ok(match self.lambda_jet(p.coords()) {
            None => ChristoffelCoeffs::zeros(n),
            Some(j) => conformal_christoffel(n, &j),
        })
    }

    /// Derivatives of the Christoffel symbols along the frame directions.
    pub fn christoffel_derivative_at(&self, p: &ChartPoint) -> Result<ChristoffelDerivative> {
        self.check(p)?;
        let n = self.dim();
        Ok(match self.lambda_jet(p.coords()) {
            None => ChristoffelDerivative::zeros(n),
            Some(j) => conformal_christoffel_derivative(n, &j),
        })
    }

    pub fn curvature_at(&self, p: &ChartPoint) -> Result<CurvatureCoeffs> {
        Ok(self.sample(p)?.curvature)
    }

    /// All point data at once.
    pub fn sample(&self, p: &ChartPoint) -> Result<PointGeometry> {
        self.check(p)?;
        let n = self.dim();
        match self.lambda_jet(p.coords()) {
            None => Ok(PointGeometry::flat(n)),
            Some(j) => {
                let s = (-j.value).exp();
                let christoffel = conformal_christoffel(n, &j);
                let christoffel_derivative = conformal_christoffel_derivative(n, &j);
                let curvature = curvature_from_connection(&christoffel, &christoffel_derivative);
                Ok(PointGeometry {
                    frame: FrameMatrix::scaled_identity(n, s),
                    frame_inv: FrameMatrix::scaled_identity(n, 1.0 / s),
                    christoffel,
                    christoffel_derivative,
                    curvature,
                })
            }
        }
    }
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// `Γ_i^k_j = e^{-λ}(λ_j δ_ik - δ_ij λ_k)`.
fn conformal_christoffel(n: usize, j: &Jet) -> ChristoffelCoeffs {
    let s = (-j.value).exp();
    let l = &j.grad;
    let mut out = ChristoffelCoeffs::zeros(n);
    for i in 0..n {
        for k in 0..n {
            for jj in 0..n {
                out.gamma[(i * n + k) * n + jj] = s * (l[jj] * delta(i, k) - delta(i, jj) * l[k]);
            }
        }
    }
    out
}

/// `e_m(Γ_i^k_j) = e^{-2λ}[-λ_m(λ_j δ_ik - δ_ij λ_k) + λ_jm δ_ik - δ_ij λ_km]`.
fn conformal_christoffel_derivative(n: usize, j: &Jet) -> ChristoffelDerivative {
    let s2 = (-2.0 * j.value).exp();
    let l = &j.grad;
    let hs = &j.hess;
    let mut out = ChristoffelDerivative::zeros(n);
    for m in 0..n {
        for i in 0..n {
            for k in 0..n {
                for jj in 0..n {
                    let v = -l[m] * (l[jj] * delta(i, k) - delta(i, jj) * l[k])
                        + hs[jj][m] * delta(i, k)
                        - delta(i, jj) * hs[k][m];
                    out.data[((m * n + i) * n + k) * n + jj] = s2 * v;
                }
            }
        }
    }
    out
}

/// Geometry sampled at every point of a discrete curve.
#[derive(Clone, Debug)]
pub struct GeometrySamples {
    pub dim: usize,
    /// Set for the flat models; Γ and R vanish and `h` is the identity.
    pub flat: bool,
    pub points: Vec<PointGeometry>,
}

impl GeometrySamples {
    pub fn flat(n_points: usize, dim: usize) -> Self {
        Self { dim, flat: true, points: vec![PointGeometry::flat(dim); n_points] }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `out = Γ(v, p)` at grid point `k`.
    #[inline]
    pub fn gamma(&self, k: usize, v: &[f64], p: &[f64], out: &mut [f64]) {
        if self.flat {
            out[..self.dim].fill(0.0);
        } else {
            self.points[k].christoffel.apply(v, p, out);
        }
    }

    /// `out = R(u, v) w` at grid point `k`.
    #[inline]
    pub fn curvature(&self, k: usize, u: &[f64], v: &[f64], w: &[f64], out: &mut [f64]) {
        if self.flat {
            out[..self.dim].fill(0.0);
        } else {
            self.points[k].curvature.apply(u, v, w, out);
        }
    }

    /// `out = (dΓ/dt)(v, p)` at grid point `k` when the base point moves with
    /// frame velocity `w`.
    #[inline]
    pub fn gamma_rate(&self, k: usize, w: &[f64], v: &[f64], p: &[f64], out: &mut [f64]) {
        if self.flat {
            out[..self.dim].fill(0.0);
        } else {
            self.points[k].christoffel_derivative.apply(w, v, p, out);
        }
    }

    /// Chart components of the frame vector `v` at grid point `k`.
    #[inline]
    pub fn to_chart(&self, k: usize, v: &[f64], out: &mut [f64]) {
        if self.flat {
            out[..self.dim].copy_from_slice(&v[..self.dim]);
        } else {
            self.points[k].frame.to_chart(v, out);
        }
    }

    /// Frame components of the chart vector `v` at grid point `k`.
    #[inline]
    pub fn to_frame(&self, k: usize, v: &[f64], out: &mut [f64]) {
        if self.flat {
            out[..self.dim].copy_from_slice(&v[..self.dim]);
        } else {
            self.points[k].frame_inv.to_chart(v, out);
        }
    }
}

impl ManifoldModel {
    /// Samples the geometry at the rows of `coords` (row-major, `dim` columns).
    /// A row outside the chart domain is reported as a chart exit.
    pub fn sample_curve(&self, coords: &[f64]) -> Result<GeometrySamples> {
        let n = self.dim();
        if !coords.len().is_multiple_of(n) {
            return Err(WireError::Shape(format!(
                "{} coordinates do not form rows of length {n}",
                coords.len()
            )));
        }
        let rows = coords.len() / n;
        let mut points = Vec::with_capacity(rows);
        for k in 0..rows {
            let row = &coords[k * n..(k + 1) * n];
            if !self.in_domain(row) {
                return Err(WireError::ChartExit { index: k, coords: row.to_vec() });
            }
            if self.is_flat() {
                continue;
            }
            points.push(self.sample(&ChartPoint::new(row))?);
        }
        if self.is_flat() {
            return Ok(GeometrySamples::flat(rows, n));
        }
        Ok(GeometrySamples { dim: n, flat: false, points })
    }
}
