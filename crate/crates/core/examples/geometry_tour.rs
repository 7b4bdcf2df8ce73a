//! Frames, Christoffel symbols and curvature of the built-in models at a few
//! chart points.

use elastic_wire::geometry::{ChartPoint, ManifoldModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let models = [
        (ManifoldModel::Hyperbolic, vec![0.3, 0.5]),
        (ManifoldModel::Sphere, vec![0.4, -0.2]),
        (ManifoldModel::conformal(2, "0.2*sin(x)*cos(y)")?, vec![0.5, 0.5]),
        (ManifoldModel::conformal(3, "0.1*(x^2 + y^2 + z^2)")?, vec![0.1, 0.2, 0.3]),
    ];
    for (model, p) in models {
        let g = model.sample(&ChartPoint::new(&p))?;
        let n = model.dim();
        println!("{} at {p:?}", model.name());
        println!("  metric diagonal {:?}", model.chart_metric(&ChartPoint::new(&p))?.iter().step_by(n + 1).collect::<Vec<_>>());
        println!("  |Γ| = {:.6}, antisymmetry defect {:.1e}", g.christoffel.norm(), g.christoffel.antisymmetry_defect());
        println!("  R antisymmetry defect {:.1e}", g.curvature.antisymmetry_defect());
        // sectional curvature of the first frame plane, K = g(R(e0, e1)e1, e0)
        let (e0, e1) = (unit(n, 0), unit(n, 1));
        let mut r = vec![0.0; n];
        g.curvature.apply(&e0, &e1, &e1, &mut r);
        println!("  K(e0, e1) = {:.6}", r[0]);
    }
    Ok(())
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}
