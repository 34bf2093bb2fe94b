//! Reads the shipped scenario files, prints the guess pulse they imply, and
//! shows how a broken scenario is reported: every problem at once, each
//! with its field path.
//!
//! cargo run --release --example scenario_files

use krotov_spectral::scenario::{build_guess, parse_config, parse_config_str};

const BROKEN: &str = r#"
[system]
levels = ["g", "e"]
energies = [0.0, 1.0, 2.0]
dipoles = [["g", "x", 1.0]]

[grid]
duration = -5.0
samples = 100

[guess]
carrier = 1.0
amplitude = 0.01
shape = "square"

[constraint]
lambda0 = 1.0
lambda_a = 1.0

[[constraint.filters]]
omega = 1.0
sigma = 0.1
lambda_b = 3.0

[target]
initial = "g"
target = "f"
"#;

pub fn run_example() -> krotov_spectral::Result<()> {
    for name in ["two_level.toml", "sodium.toml"] {
        let path = format!("{}/scenarios/{name}", env!("CARGO_MANIFEST_DIR"));
        let config = parse_config(&path)?;
        let guess = build_guess(&config)?;
        println!(
            "{name}: {} levels, {} samples over T = {}, carrier {:.6}, peak guess field {:.4e}, {} filter(s)",
            config.labels.len(),
            config.samples,
            config.duration,
            config.carrier(),
            guess.max_abs(),
            config.constraint.filters.len()
        );
    }
    match parse_config_str(BROKEN) {
        Err(e) => println!("\nbroken scenario:\n{e}"),
        Ok(_) => unreachable!("the broken scenario must not parse"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> krotov_spectral::Result<()> {
    run_example()
}
