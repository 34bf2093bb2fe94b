//! Drivers behind the command-line tool: each takes parsed inputs, writes its
//! data files and returns a report the caller can print.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use crate::constraints::{check_psd, field_spectrum, FieldSpectrum, PsdReport, SpectralKernel};
use crate::dynamics::{populations, propagate, Direction};
use crate::error::{Error, Result};
use crate::io::{self, RunSummary};
use crate::krotov::{ControlField, IterationRecord, OptimizationResult, Optimizer};
use crate::scenario::{build_guess, ScenarioConfig};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Failure = 1,
    NotConverged = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

pub const PULSE_FILE: &str = "pulse.csv";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const POPULATIONS_FILE: &str = "populations.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const SUMMARY_FILE: &str = "summary.toml";

pub struct OptimizeReport {
    pub result: OptimizationResult,
    pub spectrum: FieldSpectrum,
    pub summary: RunSummary,
}

impl OptimizeReport {
    pub fn exit_status(&self) -> ExitStatus {
        if self.summary.converged {
            ExitStatus::Success
        } else {
            ExitStatus::NotConverged
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs the optimisation described by `config` and writes pulse, spectrum,
/// populations, convergence and summary files into `out_dir`.
pub fn run_optimize(
    config: &ScenarioConfig,
    out_dir: &Path,
    observe: impl FnMut(&IterationRecord),
) -> Result<OptimizeReport> {
    let started = Instant::now();
    create_dir(out_dir)?;
    let system = config.system()?;
    let grid = config.grid()?;
    let target = config.target_spec()?;
    let opt = config.optimization_config()?;
    let guess = build_guess(config)?;
    let optimizer = Optimizer::new(&system, grid, &target, &opt)?;
    let result = optimizer.run_with(&guess, observe)?;

    let spectrum = field_spectrum(result.field.values(), &grid);
    io::write_pulse(&out_dir.join(PULSE_FILE), &result.field)?;
    io::write_spectrum(&out_dir.join(SPECTRUM_FILE), &spectrum)?;
    io::write_populations(
        &out_dir.join(POPULATIONS_FILE),
        &grid,
        &config.labels,
        &populations(&result.forward),
    )?;
    io::write_convergence(&out_dir.join(CONVERGENCE_FILE), &result.record)?;
    let summary = RunSummary {
        converged: result.record.converged,
        final_error: result.record.final_error(),
        iterations: result.record.updates(),
        monotonicity_violations: result.record.monotonicity_violations(),
        max_refinement_passes: result.record.max_refinement_passes(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    io::write_summary(&out_dir.join(SUMMARY_FILE), &summary)?;
    Ok(OptimizeReport {
        result,
        spectrum,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub kernel: SpectralKernel,
    pub omega_max: f64,
    pub psd: PsdReport,
}

impl fmt::Display for KernelReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sampled omega in [0, {:e}]", self.omega_max)?;
        writeln!(f, "min Kbar(omega) = {:e}", self.psd.min_value)?;
        writeln!(f, "argmin omega    = {:e}", self.psd.argmin)?;
        writeln!(f, "lambda_a        = {:e}", self.kernel.lambda_a())?;
        for (i, (c, m)) in self.kernel.components().iter().zip(&self.psd.margins).enumerate() {
            writeln!(
                f,
                "band {i}: omega = {:e}, sigma = {:e}, lambda_b = {:e}, margin 2 lambda_a - lambda_b = {:e}",
                c.omega, c.sigma, c.lambda_b, m
            )?;
        }
        write!(
            f,
            "verdict: {}",
            if self.psd.is_psd {
                "positive semi-definite"
            } else {
                "NOT positive semi-definite"
            }
        )
    }
}

/// Samples the kernel of `config` and reports its minimum and the
/// per-band margins.
pub fn run_check_kernel(config: &ScenarioConfig) -> Result<KernelReport> {
    let kernel = config.kernel()?;
    let omega_max = kernel.required_coverage().max(1.0) * 1.5;
    let psd = check_psd(&kernel, omega_max, 20_000)?;
    Ok(KernelReport { kernel, omega_max, psd })
}

pub fn run_spectrum(pulse_file: &Path, out_file: &Path) -> Result<FieldSpectrum> {
    let field = io::read_pulse(pulse_file)?;
    let spectrum = field_spectrum(field.values(), field.grid());
    io::write_spectrum(out_file, &spectrum)?;
    Ok(spectrum)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagateReport {
    pub fidelity: f64,
    pub final_populations: Vec<f64>,
}

/// Propagates the config's initial state under the pulse in `pulse_file` and
/// writes `populations.csv`.
pub fn run_propagate(config: &ScenarioConfig, pulse_file: &Path, out_dir: &Path) -> Result<PropagateReport> {
    let field: ControlField = io::read_pulse(pulse_file)?;
    let system = config.system()?;
    let target = config.target_spec()?;
    create_dir(out_dir)?;
    let traj = propagate(&system, &field, target.initial(), Direction::Forward)?;
    let pops = populations(&traj);
    io::write_populations(&out_dir.join(POPULATIONS_FILE), field.grid(), &config.labels, &pops)?;
    let last = pops.nrows() - 1;
    Ok(PropagateReport {
        fidelity: target.fidelity(traj.last()),
        final_populations: pops.row(last).iter().copied().collect(),
    })
}
