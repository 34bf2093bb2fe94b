//! Writes a chirped pulse to CSV, reads it back, and reports its spectrum:
//! peak frequency, centroid and band power fractions.
//!
//! cargo run --release --example pulse_spectrum

use std::f64::consts::PI;

use krotov_spectral::cli::run_spectrum;
use krotov_spectral::constraints::{band_power_fraction, field_spectrum};
use krotov_spectral::dynamics::TimeGrid;
use krotov_spectral::io::{read_pulse, write_pulse};
use krotov_spectral::krotov::ControlField;

pub fn run_example() -> krotov_spectral::Result<()> {
    let t_total = 2000.0;
    let grid = TimeGrid::new(t_total, 20_001)?;
    // two tones under a sin^2 envelope
    let values = grid
        .times()
        .iter()
        .map(|t| (PI * t / t_total).sin().powi(2) * ((0.5 * t).cos() + 0.3 * (0.8 * t).cos()))
        .collect();
    let field = ControlField::new(grid, values)?;

    let dir = std::env::temp_dir().join(format!("krotov-spectral-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| krotov_spectral::Error::InvalidInput(e.to_string()))?;
    let pulse_path = dir.join("pulse.csv");
    write_pulse(&pulse_path, &field)?;
    let back = read_pulse(&pulse_path)?;
    assert_eq!(back.values(), field.values());

    let spectrum = run_spectrum(&pulse_path, &dir.join("spectrum.csv"))?;
    assert_eq!(spectrum, field_spectrum(field.values(), &grid));
    let (peak, _) = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.amplitudes)
        .filter(|(w, _)| **w > 0.0)
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .unwrap();
    println!("{} frequencies, peak at {peak:.4}, centroid {:.4}", spectrum.len(), spectrum.centroid());
    for (c, hw) in [(0.5, 0.01), (0.8, 0.01), (0.65, 0.05)] {
        println!("power within {hw} of {c}: {:.4}", band_power_fraction(&spectrum, c, hw));
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

#[allow(dead_code)]
fn main() -> krotov_spectral::Result<()> {
    run_example()
}
