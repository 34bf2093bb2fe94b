//! Krotov optimisation of a three-level ladder transfer, without and with a
//! spectral filter on the one-photon resonance.
//!
//! cargo run --release --example ladder_optimize

use std::f64::consts::PI;

use krotov_spectral::constraints::{band_power_fraction, field_spectrum, AmplitudeConstraint, GaussianComponent, SpectralKernel};
use krotov_spectral::dynamics::{LevelSystem, TargetSpec, TimeGrid};
use krotov_spectral::krotov::{optimize, ControlField, OptimizationConfig};

pub fn run_example() -> krotov_spectral::Result<()> {
    // 0 -> 2 through a detuned middle level; 0 -> 1 resonance at 1.0
    let system = LevelSystem::from_couplings(vec![0.0, 1.0, 1.8], &[(0, 1, 1.0), (1, 2, 1.0)])?;
    let target = TargetSpec::basis_transfer(3, 0, 2)?;
    let t_total = 400.0;
    let grid = TimeGrid::new(t_total, 8001)?;
    let guess = ControlField::new(
        grid,
        grid.times()
            .iter()
            .map(|t| 0.02 * (PI * t / t_total).sin().powi(2) * (0.9 * t).cos())
            .collect(),
    )?;
    let amplitude = AmplitudeConstraint::sin2_ramp(20.0, &grid, 0.05)?;
    let filter = GaussianComponent::filter(1.0, 0.03, 2000.0)?;
    for (name, kernel) in [
        ("no filter", SpectralKernel::empty()),
        ("filter at 0-1", SpectralKernel::new(0.0, vec![filter])?),
    ] {
        let mut config = OptimizationConfig::new(amplitude.clone(), kernel);
        config.max_iterations = 200;
        config.stop_error = 1e-3;
        let result = optimize(&system, &guess, &target, &config)?;
        let spectrum = field_spectrum(result.field.values(), &grid);
        println!(
            "{name:<14} iterations {:3}  error {:.2e}  monotone {}  power within 0.06 of omega = 1: {:.2e}",
            result.record.updates(),
            result.record.final_error(),
            result.record.monotonicity_violations() == 0,
            band_power_fraction(&spectrum, 1.0, 0.06)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> krotov_spectral::Result<()> {
    run_example()
}
