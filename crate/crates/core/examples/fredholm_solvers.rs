//! Degenerate-kernel and Nyström solutions of a Fredholm equation of the
//! second kind with a Gaussian-band kernel, and the O(1/N^2) convergence of
//! the degenerate approximation.
//!
//! cargo run --release --example fredholm_solvers

use std::f64::consts::PI;

use krotov_spectral::fredholm::{solve_degenerate, solve_nystrom, DegenerateSolver, FredholmProblem, Layout, SolverOptions};

pub fn run_example() -> krotov_spectral::Result<()> {
    let (t_total, omega, sigma) = (20.0, 0.6, 0.4);
    let kernel = move |s: f64, s2: f64| {
        let tau = (s - s2) * t_total;
        -0.05 * (omega * tau).cos() * (-0.5 * sigma * sigma * tau * tau).exp() * (PI * s).sin()
    };
    let m = 2000;
    let inhomogeneity: Vec<f64> = (0..=m).map(|k| (2.0 * PI * k as f64 / m as f64).sin()).collect();
    let problem = FredholmProblem::new(inhomogeneity.clone(), kernel, t_total)?;

    let reference = solve_nystrom(&problem, m + 1)?;
    println!("{:>6} {:>16}", "N", "max |deg - nys|");
    for n in [25, 50, 100, 200, 400] {
        let u = solve_degenerate(&problem, n)?;
        let diff = u.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{n:6} {diff:16.3e}");
    }

    // the banded layout drops kernel entries beyond the Gaussian envelope
    let support = (2.0 * 1e12f64.ln()).sqrt() / sigma / t_total;
    let dense = DegenerateSolver::new(&kernel, t_total, SolverOptions::dense(400))?;
    let banded = DegenerateSolver::new(
        &kernel,
        t_total,
        SolverOptions {
            order: 400,
            layout: Layout::Banded { support },
            parallel: false,
        },
    )?;
    let (a, b) = (dense.solve(&inhomogeneity), banded.solve(&inhomogeneity));
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("banded vs dense at N = 400 (support {support:.3}): {diff:.2e}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> krotov_spectral::Result<()> {
    run_example()
}
