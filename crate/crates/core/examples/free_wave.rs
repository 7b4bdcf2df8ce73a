//! The d'Alembert integral for the free wave against the flat leapfrog, and
//! the characteristic derivatives against differenced integral output.

use std::f64::consts::PI;

use elastic_wire::fields::{m0, time_derivative, Field, Grid};
use elastic_wire::study::observed_order;
use elastic_wire::wave::{
    characteristic_derivatives, free_leapfrog_start, free_leapfrog_step, wave_integral_series, WaveData,
};

fn errors(n: usize) -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let grid = Grid::new(n)?;
    let a = Field::from_fn(n, 1, |k| vec![(2.0 * PI * grid.x(k)).sin() + 0.2 * (6.0 * PI * grid.x(k)).cos()]);
    let b = Field::from_fn(n, 1, |k| vec![(4.0 * PI * grid.x(k)).cos()]);
    let data = WaveData::free(a.clone(), b.clone(), n / 2 + 1);
    let series = wave_integral_series(&grid, &data)?;

    let mut prev = a.clone();
    let mut curr = free_leapfrog_start(&grid, &a, &b, None, grid.dx)?;
    let mut leap: f64 = m0(&curr.sub(&series[1]));
    for u in &series[2..] {
        let next = free_leapfrog_step(&grid, &prev, &curr, None, grid.dx)?;
        prev = std::mem::replace(&mut curr, next);
        leap = leap.max(m0(&curr.sub(u)));
    }

    let chars = characteristic_derivatives(&grid, &data)?;
    let ut = time_derivative(&series, grid.dx);
    let mut diff: f64 = 0.0;
    for (j, u) in series.iter().enumerate() {
        diff = diff.max(m0(&chars.u_plus[j].sub(&grid.diff(u)?.add(&ut[j]))));
    }
    Ok((leap, diff))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut last: Option<(f64, f64)> = None;
    for n in [32, 64, 128, 256] {
        let (leap, diff) = errors(n)?;
        match last {
            Some((l, d)) => println!(
                "N = {n:3}: leapfrog gap {leap:.3e} (order {:.2}), u⁺ gap {diff:.3e} (order {:.2})",
                observed_order(l, leap, 2.0),
                observed_order(d, diff, 2.0)
            ),
            None => println!("N = {n:3}: leapfrog gap {leap:.3e}, u⁺ gap {diff:.3e}"),
        }
        last = Some((leap, diff));
    }
    Ok(())
}
