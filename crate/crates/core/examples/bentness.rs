//! Curve bentness: the round circle, a geodesic of the flat torus and a loop
//! in the hyperbolic plane.

use std::f64::consts::PI;

use elastic_wire::dynamics::initial::generate_curve;
use elastic_wire::dynamics::{prepare_initial, CurveSpec};
use elastic_wire::elliptic::{bentness, EllipticOptions};
use elastic_wire::fields::{Field, Grid};
use elastic_wire::geometry::ManifoldModel;

fn curve_bentness(model: ManifoldModel, spec: CurveSpec, n: usize) -> Result<f64, Box<dyn std::error::Error>> {
    let grid = Grid::new(n)?;
    let c = generate_curve(&model, &spec, n)?;
    let init = prepare_initial(&grid, &model, &c.gamma, &c.winding, &Field::zeros(n, model.dim()))?;
    let geo = model.sample_curve(&c.gamma.values)?;
    let opts = EllipticOptions::default().unguarded();
    Ok(bentness(&grid, &init.a_tilde, &geo, &opts)?.b_value)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let exact = 2.0 * PI / (1.0 + 4.0 * PI * PI).sqrt();
    for n in [32, 64, 128, 256] {
        let b = curve_bentness(ManifoldModel::euclidean(2), CurveSpec::Circle { center: None }, n)?;
        println!("circle, N = {n:3}: B = {b:.12} (error {:.1e})", (b - exact).abs());
    }
    let torus = ManifoldModel::FlatTorus { periods: vec![1.0, 1.0] };
    let geodesic = CurveSpec::TorusGeodesic { origin: None, direction: vec![1.0, 0.0] };
    println!("torus geodesic:    B = {:.1e}", curve_bentness(torus, geodesic, 64)?);
    let hyperbolic = CurveSpec::HyperbolicLoop { center: [0.0, 1.0] };
    println!("hyperbolic loop:   B = {:.6}", curve_bentness(ManifoldModel::Hyperbolic, hyperbolic, 128)?);
    for m in [2, 3, 5] {
        let spec = CurveSpec::PerturbedCircle { mode: m, amplitude: 0.1, center: None };
        println!("circle + mode {m}:   B = {:.6}", curve_bentness(ManifoldModel::euclidean(2), spec, 128)?);
    }
    Ok(())
}
