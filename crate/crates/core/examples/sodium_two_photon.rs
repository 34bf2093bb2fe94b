//! Runs the sodium scenario with and without the spectral filters and
//! compares the two optimised pulses.
//!
//! cargo run --release --example sodium_two_photon [-- path/to/sodium.toml]

use std::time::Instant;

use krotov_spectral::constraints::{bands_power_fraction, field_spectrum};
use krotov_spectral::dynamics::populations;
use krotov_spectral::krotov::{OptimizationResult, Optimizer};
use krotov_spectral::scenario::{build_guess, parse_config, ScenarioConfig};

fn run(label: &str, cfg: &ScenarioConfig) -> krotov_spectral::Result<OptimizationResult> {
    let started = Instant::now();
    let system = cfg.system()?;
    let target = cfg.target_spec()?;
    let opt = cfg.optimization_config()?;
    let optimizer = Optimizer::new(&system, cfg.grid()?, &target, &opt)?;
    let result = optimizer.run_with(&build_guess(cfg)?, |r| {
        if r.iteration % 10 == 0 {
            eprintln!("[{label}] iter {:3}  error {:.3e}  J_a {:.3e}", r.iteration, r.error(), r.j_a);
        }
    })?;
    eprintln!("[{label}] {:.1} s", started.elapsed().as_secs_f64());
    Ok(result)
}

fn report(label: &str, cfg: &ScenarioConfig, filtered: &ScenarioConfig, r: &OptimizationResult) {
    let grid = cfg.grid().unwrap();
    let spectrum = field_spectrum(r.field.values(), &grid);
    let bands: Vec<(f64, f64)> = filtered
        .constraint
        .filters
        .iter()
        .map(|f| (f.omega, 2.0 * f.sigma))
        .collect();
    let pops = populations(&r.forward);
    let p3 = cfg.labels.iter().position(|l| l == "3p").unwrap();
    let peak_3p = pops.column(p3).iter().fold(0.0f64, |m, &v| m.max(v));
    println!(
        "{label:>10}: iterations {:3}  error {:.2e}  band power {:.2e}  centroid/carrier {:.4}  peak 3p {:.3}  max|eps| {:.3e}",
        r.record.updates(),
        r.record.final_error(),
        bands_power_fraction(&spectrum, &bands),
        spectrum.centroid() / cfg.carrier(),
        peak_3p,
        r.field.max_abs(),
    );
}

fn main() -> krotov_spectral::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/sodium.toml").to_string());
    let filtered = parse_config(&path)?;
    let unfiltered = filtered.without_filters();
    println!("guess peak amplitude {:.4e}", filtered.guess_amplitude()?);
    let free = run("free", &unfiltered)?;
    report("free", &unfiltered, &filtered, &free);
    let constrained = run("filtered", &filtered)?;
    report("filtered", &filtered, &filtered, &constrained);
    Ok(())
}
