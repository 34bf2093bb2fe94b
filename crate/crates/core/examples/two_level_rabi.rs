//! Resonant sin^2 pulses of increasing area on a two-level system, compared
//! with the rotating-wave Rabi formula `P_e = sin^2(area / 2)`.
//!
//! cargo run --release --example two_level_rabi

use std::f64::consts::PI;

use krotov_spectral::dynamics::{basis_state, populations, propagate, Direction, LevelSystem, TimeGrid};
use krotov_spectral::krotov::ControlField;

pub fn run_example() -> krotov_spectral::Result<()> {
    let (w0, mu) = (1.0, 1.0);
    let system = LevelSystem::from_couplings(vec![0.0, w0], &[(0, 1, mu)])?;
    let t_total = 2000.0;
    let grid = TimeGrid::new(t_total, 40_001)?;
    println!("{:>8} {:>14} {:>14}", "area/pi", "P_excited", "sin^2(A/2)");
    for area in [0.25, 0.5, 1.0, 1.5, 2.0] {
        // 2 E0 sin^2(pi t / T) cos(w0 t) has rotating-wave area mu E0 T
        let e0 = area * PI / (mu * t_total);
        let values = grid
            .times()
            .iter()
            .map(|t| 2.0 * e0 * (PI * t / t_total).sin().powi(2) * (w0 * t).cos())
            .collect();
        let field = ControlField::new(grid, values)?;
        let traj = propagate(&system, &field, &basis_state(2, 0), Direction::Forward)?;
        let p = populations(&traj);
        let excited = p[(grid.len() - 1, 1)];
        println!("{area:8.2} {excited:14.8} {:14.8}", (0.5 * area * PI).sin().powi(2));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> krotov_spectral::Result<()> {
    run_example()
}
