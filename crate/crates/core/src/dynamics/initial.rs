//! Initial curves, initial velocities and the compatibility conditions.
//!
//! All generated curves have length 1 and are sampled at equal arclength, so
//! the discrete tangent has unit length up to discretization error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, WireError};
use crate::fields::{cov_dx, dot, gamma_apply, CurveState, Field, Grid};
use crate::geometry::{ChartPoint, GeometrySamples, ManifoldModel};

/// Initial curve families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    /// Round circle of length 1 in a flat model (the `xy`-plane in 3D).
    Circle {
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Circle with radius `r₀(1 + ε cos mφ)`, rescaled to length 1 and
    /// resampled at equal arclength.
    PerturbedCircle {
        mode: usize,
        amplitude: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Hyperbolic circle of length 1 with the given Euclidean chart center.
    HyperbolicLoop {
        #[serde(default = "default_hyperbolic_center")]
        center: [f64; 2],
    },
    /// Loop of length 1 in the stereographic chart, a chart circle around
    /// `center`.
    SphereLoop {
        #[serde(default)]
        center: [f64; 2],
    },
    /// Closed geodesic `origin + x·direction` of a flat torus; `direction`
    /// must be a unit lattice vector.
    TorusGeodesic {
        #[serde(default)]
        origin: Option<Vec<f64>>,
        direction: Vec<f64>,
    },
}

fn default_hyperbolic_center() -> [f64; 2] {
    [0.0, 1.0]
}

/// Initial velocities `η(x, 0)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocitySpec {
    #[default]
    Zero,
    /// Constant chart velocity.
    Translation { velocity: Vec<f64> },
    /// Rigid rotation about the centroid of the curve (about the `z`-axis in
    /// 3D), angular speed `omega`.
    Rotation { omega: f64 },
    /// `ε(cos(mφ) ν - sin(mφ) ξ / m)` with ν the outward normal, `φ = 2πx`;
    /// length preserving on the round circle. Planar models only.
    NormalMode { mode: usize, amplitude: f64 },
    /// Smooth random field with Fourier modes `1..=modes`, seeded by the run
    /// seed.
    Random { amplitude: f64, modes: usize },
}

/// Data `(γ, η, ξ, ξ_t)` at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    /// Curve γ(x, 0) in chart coordinates.
    pub a: Field,
    pub winding: Vec<f64>,
    /// η(x, 0).
    pub b: Field,
    /// ξ(x, 0), unit frame tangent.
    pub a_tilde: Field,
    /// ξ_t(x, 0).
    pub b_tilde: Field,
    /// Largest `|g(ã, b̃)|` removed by the final projection.
    pub projection: f64,
    /// Largest `|‖h⁻¹γ_x‖ - 1|` before normalization.
    pub speed_defect: f64,
}

impl InitialData {
    pub fn to_state(&self) -> CurveState {
        CurveState {
            gamma: self.a.clone(),
            winding: self.winding.clone(),
            xi: self.a_tilde.clone(),
            xi_t: self.b_tilde.clone(),
            eta: self.b.clone(),
            theta: None,
            time: 0.0,
        }
    }
}

/// Builds `ã = h⁻¹γ_x / ‖h⁻¹γ_x‖` and `b̃ = b' + Γ(ã, b) - Γ(b, ã)`, then
/// projects `b̃` orthogonally to `ã`.
pub fn prepare_initial(
    grid: &Grid,
    model: &ManifoldModel,
    gamma: &Field,
    winding: &[f64],
    eta: &Field,
) -> Result<InitialData> {
    gamma.same_shape(eta)?;
    if gamma.n_points() != grid.n_points || gamma.dim != model.dim() || winding.len() != gamma.dim {
        return Err(WireError::Shape("initial curve does not match grid or manifold".into()));
    }
    let geo = model.sample_curve(&gamma.values)?;
    let dg = grid.diff_shifted(gamma, winding);
    let n = gamma.dim;
    let mut a_tilde = Field::zeros(grid.n_points, n);
    let mut speed_defect: f64 = 0.0;
    let scale = (0..grid.n_points).map(|k| dg.row(k).iter().map(|v| v.abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    for k in 0..grid.n_points {
        let src = dg.row(k).to_vec();
        let row = a_tilde.row_mut(k);
        geo.to_frame(k, &src, row);
        let s = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(s > 1e-12 * scale.max(f64::MIN_POSITIVE)) || !s.is_finite() {
            return Err(WireError::DegenerateCurve { index: k });
        }
        speed_defect = speed_defect.max((s - 1.0).abs());
        row.iter_mut().for_each(|v| *v /= s);
    }
    let mut b_tilde = grid.diff(eta)?;
    b_tilde.axpy(1.0, &gamma_apply(&a_tilde, eta, &geo)?);
    b_tilde.axpy(-1.0, &gamma_apply(eta, &a_tilde, &geo)?);
    let g = dot(&a_tilde, &b_tilde);
    let projection = g.max_abs();
    for k in 0..grid.n_points {
        let c = g.values[k];
        let x = a_tilde.row(k).to_vec();
        b_tilde.row_mut(k).iter_mut().zip(&x).for_each(|(b, a)| *b -= c * a);
    }
    Ok(InitialData {
        a: gamma.clone(),
        winding: winding.to_vec(),
        b: eta.clone(),
        a_tilde,
        b_tilde,
        projection,
        speed_defect,
    })
}

/// Generated curve and its winding vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedCurve {
    pub gamma: Field,
    pub winding: Vec<f64>,
}

fn center_or_origin(center: &Option<Vec<f64>>, dim: usize) -> Result<Vec<f64>> {
    match center {
        None => Ok(vec![0.0; dim]),
        Some(c) if c.len() == dim => Ok(c.clone()),
        Some(c) => Err(WireError::Usage(format!("center has {} coordinates, manifold has {dim}", c.len()))),
    }
}

fn require_flat(model: &ManifoldModel, what: &str) -> Result<()> {
    if model.is_flat() && model.dim() >= 2 {
        Ok(())
    } else {
        Err(WireError::Usage(format!("{what} needs a flat manifold of dimension 2 or 3, got {}", model.name())))
    }
}

/// Samples the closed chart curve `c(s)`, `s ∈ [0, 1)`, at `n` points of
/// equal arclength. `c` returns the point and its derivative.
pub fn sample_by_arclength(
    model: &ManifoldModel,
    n: usize,
    c: &dyn Fn(f64) -> (Vec<f64>, Vec<f64>),
) -> Result<(Field, f64)> {
    let speed = |s: f64| -> Result<f64> {
        let (p, dp) = c(s);
        let g = model.chart_metric(&ChartPoint(p))?;
        let d = dp.len();
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += dp[i] * g[i * d + j] * dp[j];
            }
        }
        Ok(q.sqrt())
    };
    const NODES: [f64; 5] = [0.0, -0.5384693101056831, 0.5384693101056831, -0.906179845938664, 0.906179845938664];
    const WEIGHTS: [f64; 5] =
        [0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891, 0.2369268850561891];
    let gl = |lo: f64, hi: f64| -> Result<f64> {
        let (m, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let mut s = 0.0;
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            s += w * speed(m + r * x)?;
        }
        Ok(r * s)
    };
    let m = (64 * n).max(4096);
    let mut total = 0.0;
    for i in 0..m {
        total += speed(i as f64 / m as f64)?;
    }
    total /= m as f64;
    if !(total > 0.0) || !total.is_finite() {
        return Err(WireError::DegenerateCurve { index: 0 });
    }
    let step = total / n as f64;
    let mut params = vec![0.0; n];
    let mut s = 0.0;
    for p in params.iter_mut().skip(1) {
        let mut d = step / speed(s)?;
        for _ in 0..8 {
            let r = gl(s, s + d)? - step;
            d -= r / speed(s + d)?;
        }
        s += d;
        *p = s;
    }
    let dim = c(0.0).0.len();
    let mut out = Field::zeros(n, dim);
    for (k, p) in params.iter().enumerate() {
        out.row_mut(k).copy_from_slice(&c(*p).0);
    }
    Ok((out, total))
}

fn curve_length(model: &ManifoldModel, c: &dyn Fn(f64) -> (Vec<f64>, Vec<f64>), m: usize) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..m {
        let (p, dp) = c(i as f64 / m as f64);
        let g = model.chart_metric(&ChartPoint(p))?;
        let d = dp.len();
        let mut q = 0.0;
        for a in 0..d {
            for b in 0..d {
                q += dp[a] * g[a * d + b] * dp[b];
            }
        }
        total += q.sqrt();
    }
    Ok(total / m as f64)
}

fn planar(center: &[f64], x: f64, y: f64) -> Vec<f64> {
    let mut p = center.to_vec();
    p[0] += x;
    p[1] += y;
    p
}

fn planar_dir(dim: usize, x: f64, y: f64) -> Vec<f64> {
    let mut p = vec![0.0; dim];
    p[0] = x;
    p[1] = y;
    p
}

/// Radius of the flat circle of length 1.
pub const UNIT_CIRCLE_RADIUS: f64 = 1.0 / (2.0 * PI);

pub fn generate_curve(model: &ManifoldModel, spec: &CurveSpec, n: usize) -> Result<GeneratedCurve> {
    let dim = model.dim();
    let closed = |gamma: Field| GeneratedCurve { gamma, winding: vec![0.0; dim] };
    let out = match spec {
        CurveSpec::Circle { center } => {
            require_flat(model, "circle")?;
            let c = center_or_origin(center, dim)?;
            let r = UNIT_CIRCLE_RADIUS;
            closed(Field::from_fn(n, dim, |k| {
                let s = 2.0 * PI * k as f64 / n as f64;
                planar(&c, r * s.cos(), r * s.sin())
            }))
        }
        CurveSpec::PerturbedCircle { mode, amplitude, center } => {
            require_flat(model, "perturbed circle")?;
            if amplitude.abs() >= 1.0 {
                return Err(WireError::Usage("perturbation amplitude must be below 1".into()));
            }
            let c = center_or_origin(center, dim)?;
            let (m, eps) = (*mode as f64, *amplitude);
            let shape = |scale: f64| {
                let c = c.clone();
                move |s: f64| {
                    let phi = 2.0 * PI * s;
                    let r = scale * (1.0 + eps * (m * phi).cos());
                    let dr = -scale * eps * m * 2.0 * PI * (m * phi).sin();
                    let (co, si) = (phi.cos(), phi.sin());
                    (
                        planar(&c, r * co, r * si),
                        planar_dir(dim, dr * co - 2.0 * PI * r * si, dr * si + 2.0 * PI * r * co),
                    )
                }
            };
            let len = curve_length(model, &shape(1.0), (64 * n).max(4096))?;
            let (gamma, _) = sample_by_arclength(model, n, &shape(1.0 / len))?;
            closed(gamma)
        }
        CurveSpec::HyperbolicLoop { center } => {
            if !matches!(model, ManifoldModel::Hyperbolic) {
                return Err(WireError::Usage("hyperbolic loop needs the hyperbolic manifold".into()));
            }
            if !model.in_domain(center) {
                return Err(WireError::Domain { manifold: model.name().into(), coords: center.to_vec() });
            }
            let r = center[1] / (1.0 + 4.0 * PI * PI).sqrt();
            let c = center.to_vec();
            let f = move |s: f64| {
                let phi = 2.0 * PI * s;
                (
                    planar(&c, r * phi.cos(), r * phi.sin()),
                    planar_dir(2, -2.0 * PI * r * phi.sin(), 2.0 * PI * r * phi.cos()),
                )
            };
            closed(sample_by_arclength(model, n, &f)?.0)
        }
        CurveSpec::SphereLoop { center } => {
            if !matches!(model, ManifoldModel::Sphere) {
                return Err(WireError::Usage("sphere loop needs the sphere manifold".into()));
            }
            if !model.in_domain(center) {
                return Err(WireError::Domain { manifold: model.name().into(), coords: center.to_vec() });
            }
            let c = center.to_vec();
            let loop_at = |r: f64| {
                let c = c.clone();
                move |s: f64| {
                    let phi = 2.0 * PI * s;
                    (
                        planar(&c, r * phi.cos(), r * phi.sin()),
                        planar_dir(2, -2.0 * PI * r * phi.sin(), 2.0 * PI * r * phi.cos()),
                    )
                }
            };
            let (mut lo, mut hi) = (0.0, 1e-3);
            while curve_length(model, &loop_at(hi), 512)? < 1.0 {
                lo = hi;
                hi *= 2.0;
                if hi > 1e6 {
                    return Err(WireError::Usage("no sphere loop of length 1 around this center".into()));
                }
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if curve_length(model, &loop_at(mid), 512)? < 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            closed(sample_by_arclength(model, n, &loop_at(0.5 * (lo + hi)))?.0)
        }
        CurveSpec::TorusGeodesic { origin, direction } => {
            let ManifoldModel::FlatTorus { periods } = model else {
                return Err(WireError::Usage("torus geodesic needs the flat torus".into()));
            };
            if direction.len() != dim {
                return Err(WireError::Usage("direction length differs from dimension".into()));
            }
            let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(WireError::Usage(format!("direction must have unit length, got {norm}")));
            }
            for (d, p) in direction.iter().zip(periods) {
                let q = d / p;
                if (q - q.round()).abs() > 1e-12 {
                    return Err(WireError::Usage("direction is not a lattice vector of the torus".into()));
                }
            }
            let o = center_or_origin(origin, dim)?;
            let gamma = Field::from_fn(n, dim, |k| {
                let x = k as f64 / n as f64;
                o.iter().zip(direction).map(|(a, d)| a + x * d).collect()
            });
            GeneratedCurve { gamma, winding: direction.clone() }
        }
    };
    if let Some(k) = (0..n).find(|&k| !model.in_domain(out.gamma.row(k))) {
        return Err(WireError::Domain { manifold: model.name().into(), coords: out.gamma.row(k).to_vec() });
    }
    Ok(out)
}

/// Frame components of the initial velocity along `curve`, corrected by
/// [`make_inextensible`].
pub fn generate_velocity(
    grid: &Grid,
    model: &ManifoldModel,
    spec: &VelocitySpec,
    curve: &GeneratedCurve,
    seed: u64,
) -> Result<Field> {
    let n = grid.n_points;
    let dim = model.dim();
    let geo: GeometrySamples = model.sample_curve(&curve.gamma.values)?;
    let from_chart = |chart: Field| {
        let mut out = Field::zeros(n, dim);
        for k in 0..n {
            let src = chart.row(k).to_vec();
            geo.to_frame(k, &src, out.row_mut(k));
        }
        out
    };
    let raw = match spec {
        VelocitySpec::Zero => Field::zeros(n, dim),
        VelocitySpec::Translation { velocity } => {
            if velocity.len() != dim {
                return Err(WireError::Usage("translation velocity length differs from dimension".into()));
            }
            from_chart(Field::constant(n, velocity))
        }
        VelocitySpec::Rotation { omega } => {
            let mut c = vec![0.0; dim];
            for k in 0..n {
                c.iter_mut().zip(curve.gamma.row(k)).for_each(|(a, g)| *a += g / n as f64);
            }
            from_chart(Field::from_fn(n, dim, |k| {
                let g = curve.gamma.row(k);
                planar_dir(dim, -omega * (g[1] - c[1]), omega * (g[0] - c[0]))
            }))
        }
        VelocitySpec::NormalMode { mode, amplitude } => {
            if dim != 2 || *mode == 0 {
                return Err(WireError::Usage("normal mode velocity needs a planar model and mode >= 1".into()));
            }
            let xi = unit_frame_tangent(grid, &geo, curve);
            let m = *mode as f64;
            Field::from_fn(n, 2, |k| {
                let phi = 2.0 * PI * grid.x(k);
                let t = xi.row(k);
                let nu = [t[1], -t[0]];
                let (c, s) = ((m * phi).cos(), (m * phi).sin() / m);
                vec![amplitude * (c * nu[0] - s * t[0]), amplitude * (c * nu[1] - s * t[1])]
            })
        }
        VelocitySpec::Random { amplitude, modes } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut coeffs = Vec::with_capacity(*modes);
            for _ in 0..*modes {
                let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                coeffs.push((a, b));
            }
            Field::from_fn(n, dim, |k| {
                let x = grid.x(k);
                let mut v = vec![0.0; dim];
                for (m, (a, b)) in coeffs.iter().enumerate() {
                    let w = 2.0 * PI * (m + 1) as f64 * x;
                    let s = amplitude / ((m + 1) * (m + 1)) as f64;
                    for i in 0..dim {
                        v[i] += s * (a[i] * w.cos() + b[i] * w.sin());
                    }
                }
                v
            })
        }
    };
    let xi = unit_frame_tangent(grid, &geo, curve);
    make_inextensible(grid, &xi, &geo, &raw)
}

fn unit_frame_tangent(grid: &Grid, geo: &GeometrySamples, curve: &GeneratedCurve) -> Field {
    let dg = grid.diff_shifted(&curve.gamma, &curve.winding);
    let mut xi = Field::zeros(grid.n_points, dg.dim);
    for k in 0..grid.n_points {
        let src = dg.row(k).to_vec();
        geo.to_frame(k, &src, xi.row_mut(k));
    }
    xi.normalized()
}

/// Periodic antiderivative of the mean-free part of `r`, by Fourier modes.
fn antiderivative(r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let mut out = vec![0.0; n];
    for m in 1..n.div_ceil(2) {
        let w = 2.0 * PI * m as f64 / n as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in r.iter().enumerate() {
            re += v * (w * j as f64).cos();
            im -= v * (w * j as f64).sin();
        }
        // mode m and its conjugate, divided by the symbol 2πim
        let scale = 2.0 / (n as f64 * 2.0 * PI * m as f64);
        for (j, o) in out.iter_mut().enumerate() {
            let (c, s) = ((w * j as f64).cos(), (w * j as f64).sin());
            *o += scale * (im * c + re * s);
        }
    }
    out
}

/// Corrects `η` so that the motion preserves arclength, `g(ξ, D_xη) = 0`.
///
/// A multiple of the curvature vector `D_xξ` removes the mean stretching rate,
/// then a tangential field `fξ` with `f_x = -g(ξ, D_xη)` removes the rest.
/// Velocities that already preserve arclength are unchanged up to
/// discretization error.
pub fn make_inextensible(grid: &Grid, xi: &Field, geo: &GeometrySamples, eta: &Field) -> Result<Field> {
    let stretch = |eta: &Field| -> Result<Vec<f64>> { Ok(dot(xi, &cov_dx(grid, eta, xi, geo)?).values) };
    let n = grid.n_points as f64;
    let kappa = cov_dx(grid, xi, xi, geo)?;
    let k2 = kappa.norm_sq().values.iter().sum::<f64>() / n;
    let mut out = eta.clone();
    if k2 > 1e-12 {
        let mean = stretch(eta)?.iter().sum::<f64>() / n;
        out.axpy(mean / k2, &kappa);
    }
    let f = antiderivative(&stretch(&out)?);
    for (k, fk) in f.iter().enumerate() {
        let x = xi.row(k).to_vec();
        out.row_mut(k).iter_mut().zip(&x).for_each(|(o, t)| *o -= fk * t);
    }
    Ok(out)
}
