//! Spectral kernels built from Gaussian filters and passes, and the
//! positive-semi-definiteness test that guarantees monotonic convergence.
//!
//! cargo run --release --example kernel_psd

use krotov_spectral::constraints::{check_psd, kernel_freq, GaussianComponent, SpectralKernel};

fn show(name: &str, kernel: &SpectralKernel) -> krotov_spectral::Result<()> {
    let omega_max = 1.5 * kernel.required_coverage();
    let report = check_psd(kernel, omega_max, 20_000)?;
    println!(
        "{name:<28} min Kbar = {:+.3e} at omega = {:.4}  psd = {}  margins = {:?}",
        report.min_value, report.argmin, report.is_psd, report.margins
    );
    Ok(())
}

pub fn run_example() -> krotov_spectral::Result<()> {
    let filter = GaussianComponent::filter(1.0, 0.05, 100.0)?;
    show("filter only", &SpectralKernel::new(0.0, vec![filter])?)?;

    let lambda_a = 1.0;
    let pass = GaussianComponent::new(1.0, 0.05, 2.0 * lambda_a)?;
    show("pass at the bound", &SpectralKernel::new(lambda_a, vec![pass])?)?;

    let too_strong = GaussianComponent::new(1.0, 0.05, 3.0)?;
    show("pass above the bound", &SpectralKernel::new(lambda_a, vec![too_strong])?)?;

    // each pass respects the bound on its own, their sum does not
    let neighbour = GaussianComponent::new(1.05, 0.05, 2.0 * lambda_a)?;
    let overlapping = SpectralKernel::new(lambda_a, vec![pass, neighbour])?;
    show("overlapping passes", &overlapping)?;

    println!("\nKbar(omega) of the overlapping passes:");
    for k in 0..=8 {
        let w = 0.9 + 0.025 * k as f64;
        println!("  {w:.3}  {:+.4}", kernel_freq(&overlapping, w));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> krotov_spectral::Result<()> {
    run_example()
}
