//! The flux-form equation -D_x(D_x u + f) + u⊥ = h on a hyperbolic loop with
//! all three linear solver backends.

use std::f64::consts::PI;

use elastic_wire::dynamics::initial::generate_curve;
use elastic_wire::dynamics::{prepare_initial, CurveSpec};
use elastic_wire::elliptic::{assemble_flux_form, solve_flux_form, Backend, EllipticOptions};
use elastic_wire::fields::{m0, Field, Grid};
use elastic_wire::geometry::ManifoldModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 128;
    let model = ManifoldModel::Hyperbolic;
    let grid = Grid::new(n)?;
    let c = generate_curve(&model, &CurveSpec::HyperbolicLoop { center: [0.0, 1.0] }, n)?;
    let init = prepare_initial(&grid, &model, &c.gamma, &c.winding, &Field::zeros(n, 2))?;
    let xi = init.a_tilde;
    let geo = model.sample_curve(&c.gamma.values)?;
    let f = Field::from_fn(n, 2, |k| vec![(2.0 * PI * grid.x(k)).sin(), 0.0]);
    let h = Field::from_fn(n, 2, |k| vec![1.0, (4.0 * PI * grid.x(k)).cos()]);

    let system = assemble_flux_form(&grid, &f, &h, &xi, &geo)?;
    println!("system size {}", system.matrix.size());
    let mut reference: Option<Field> = None;
    for backend in [Backend::Banded, Backend::Dense, Backend::ConjugateGradient] {
        let opts = EllipticOptions { backend, ..Default::default() };
        let s = solve_flux_form(&grid, &f, &h, &xi, &geo, &opts)?;
        let gap = reference.as_ref().map_or(0.0, |r| m0(&s.u.sub(r)));
        println!("{backend:?}: residual {:.2e}, |u| {:.6}, gap to banded {gap:.1e}", s.residual, m0(&s.u));
        reference.get_or_insert(s.u);
    }
    Ok(())
}
