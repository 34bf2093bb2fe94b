//! Krotov iterations with amplitude and Gaussian spectral constraints.
//!
//! Each iteration back-propagates the adjoint state from
//! `chi(T) = <target|psi(T)> target` under the current field and then updates
//! the field sequentially in time,
//!
//! ```text
//! eps'(t) = eps(t) + rho(t) Im{ <chi(t)| dH/deps |psi'(t)> + sigma/2 <dpsi(t)| dH/deps |psi'(t)> },
//! rho(t)  = S(t) / (lambda0 + lambda_a S(t)),
//! ```
//!
//! where `psi'` is propagated under the new field as it is being built. With
//! Gaussian bands the update becomes implicit; the field change then solves
//!
//! ```text
//! d eps(t) = I(t) - rho(t) / (2 pi) * integral K_smooth(t - t') d eps(t') dt',
//! ```
//!
//! with `I` the unconstrained update, handled by [`crate::fredholm`].

use std::f64::consts::PI;

use crate::constraints::{ensure_psd, spectral_cost, AmplitudeConstraint, SpectralKernel};
use crate::dynamics::{
    adjoint_boundary, midpoint, propagate, Direction, LevelSystem, StateTrajectory, StateVector, TargetSpec,
    TimeGrid,
};
use crate::error::{Error, Result};
use crate::fredholm::{interpolate, DegenerateSolver, Layout, SolverOptions};

/// Relative tolerance of the monotonicity check on the total functional.
pub const MONOTONICITY_TOL: f64 = 1e-10;

/// Kernel values below this fraction of the envelope peak are dropped by the
/// banded Fredholm path.
pub const BAND_CUTOFF: f64 = 1e-12;

const SELF_CONSISTENCY_TOL: f64 = 1e-15;
const SELF_CONSISTENCY_MAX: usize = 50;

/// Real control samples on a grid, together with the reference field that
/// field changes are measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    grid: TimeGrid,
    values: Vec<f64>,
    reference: Vec<f64>,
}

impl ControlField {
    /// A field whose reference is itself (no change yet).
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        let reference = values.clone();
        Self::with_reference(grid, values, reference)
    }

    pub fn with_reference(grid: TimeGrid, values: Vec<f64>, reference: Vec<f64>) -> Result<Self> {
        for (name, v) in [("field", &values), ("reference field", &reference)] {
            if v.len() != grid.len() {
                return Err(Error::InvalidInput(format!(
                    "{name} has {} samples, grid has {}",
                    v.len(),
                    grid.len()
                )));
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} contains non-finite value {x}")));
            }
        }
        Ok(Self {
            grid,
            values,
            reference,
        })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            reference: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// `eps - eps_ref`.
    pub fn delta(&self) -> Vec<f64> {
        self.values.iter().zip(&self.reference).map(|(a, b)| a - b).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Same samples, now also used as the reference.
    pub fn rebased(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.clone(),
            reference: self.values.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementSettings {
    pub max_passes: usize,
    /// Max-norm change between successive passes that ends refinement;
    /// `None` means `1e-6 * max |eps|`.
    pub field_tol: Option<f64>,
}

impl Default for RefinementSettings {
    fn default() -> Self {
        Self {
            max_passes: 10,
            field_tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FredholmSettings {
    /// Degenerate-kernel order; `None` means `min(n_t - 1, 512)`.
    pub order: Option<usize>,
    pub banded: bool,
    /// Build and use the Fredholm solver even when the kernel carries no
    /// weight (normally such updates skip straight to the plain step).
    pub always_solve: bool,
}

impl Default for FredholmSettings {
    fn default() -> Self {
        Self {
            order: None,
            banded: false,
            always_solve: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationConfig {
    pub amplitude: AmplitudeConstraint,
    pub kernel: SpectralKernel,
    pub sigma_t: f64,
    pub max_iterations: usize,
    pub stop_error: f64,
    pub refinement: RefinementSettings,
    pub fredholm: FredholmSettings,
    /// Keep every iterate in the record.
    pub record_fields: bool,
    /// Single-threaded, fixed-order evaluation throughout.
    pub deterministic: bool,
}

impl OptimizationConfig {
    pub fn new(amplitude: AmplitudeConstraint, kernel: SpectralKernel) -> Self {
        Self {
            amplitude,
            kernel,
            sigma_t: 0.0,
            max_iterations: 100,
            stop_error: 1e-3,
            refinement: RefinementSettings::default(),
            fredholm: FredholmSettings::default(),
            record_fields: false,
            deterministic: true,
        }
    }

    fn validate(&self, grid: &TimeGrid) -> Result<()> {
        if !(self.stop_error > 0.0 && self.stop_error < 1.0) {
            return Err(Error::InvalidInput(format!(
                "stop_error must lie in (0, 1), got {}",
                self.stop_error
            )));
        }
        if self.refinement.max_passes == 0 {
            return Err(Error::InvalidInput("refinement needs at least one pass".into()));
        }
        if !self.sigma_t.is_finite() {
            return Err(Error::InvalidInput(format!("sigma_t must be finite, got {}", self.sigma_t)));
        }
        if self.amplitude.shape().len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "shape function has {} samples, grid has {}",
                self.amplitude.shape().len(),
                grid.len()
            )));
        }
        Ok(())
    }

    /// `rho(t) = S / (lambda0 + lambda_a S)`.
    pub fn update_weight(&self) -> Vec<f64> {
        let (l0, la) = (self.amplitude.lambda0(), self.kernel.lambda_a());
        self.amplitude.shape().iter().map(|s| s / (l0 + la * s)).collect()
    }

    /// Amplitude penalty plus spectral quadratic form of a field change.
    pub fn constraint_cost(&self, delta_eps: &[f64], grid: &TimeGrid) -> f64 {
        self.amplitude.cost(delta_eps, grid) + spectral_cost(delta_eps, &self.kernel, grid)
    }
}

/// `(1 - J_T) + J_a`, the functional being minimised.
pub fn functional_value(j_t: f64, j_a: f64) -> f64 {
    (1.0 - j_t) + j_a
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub j_t: f64,
    pub j_a: f64,
    pub j: f64,
    pub delta_j: f64,
    pub monotone: bool,
    pub refinement_passes: usize,
    /// `max |I(t)|` of the unconstrained update that produced this iterate.
    pub update_norm: f64,
    pub field: Option<Vec<f64>>,
}

impl IterationRecord {
    pub fn error(&self) -> f64 {
        1.0 - self.j_t
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizationRecord {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

impl OptimizationRecord {
    /// Number of field updates performed.
    pub fn updates(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    pub fn final_error(&self) -> f64 {
        self.iterations.last().map_or(1.0, |r| r.error())
    }

    pub fn monotonicity_violations(&self) -> usize {
        self.iterations.iter().filter(|r| !r.monotone).count()
    }

    pub fn max_refinement_passes(&self) -> usize {
        self.iterations.iter().map(|r| r.refinement_passes).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct RefinementReport {
    pub passes: usize,
    /// Max-norm change produced by the last pass (zero for a single pass).
    pub last_change: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// The new field, with the previous field as its reference.
    pub field: ControlField,
    /// Forward trajectory under the new field.
    pub forward: StateTrajectory,
    pub refinement: RefinementReport,
    /// The unconstrained update `I(t)` this step started from.
    pub inhomogeneity: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub record: OptimizationRecord,
    pub field: ControlField,
    pub forward: StateTrajectory,
}

/// Holds everything that stays fixed across iterations, including the
/// factorised Fredholm system.
pub struct Optimizer<'a> {
    system: &'a LevelSystem,
    target: &'a TargetSpec,
    config: &'a OptimizationConfig,
    grid: TimeGrid,
    weight: Vec<f64>,
    solver: Option<DegenerateSolver>,
}

impl<'a> Optimizer<'a> {
    pub fn new(
        system: &'a LevelSystem,
        grid: TimeGrid,
        target: &'a TargetSpec,
        config: &'a OptimizationConfig,
    ) -> Result<Self> {
        config.validate(&grid)?;
        if target.initial().len() != system.n_levels() {
            return Err(Error::InvalidInput(format!(
                "target states have {} components, system has {} levels",
                target.initial().len(),
                system.n_levels()
            )));
        }
        if !config.kernel.components().is_empty() {
            ensure_psd(&config.kernel)?;
        }
        let weight = config.update_weight();
        let solver = if config.kernel.is_inert() && !config.fredholm.always_solve {
            None
        } else {
            Some(build_solver(&config.kernel, &weight, &grid, config)?)
        };
        Ok(Self {
            system,
            target,
            config,
            grid,
            weight,
            solver,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn forward(&self, field: &ControlField) -> Result<StateTrajectory> {
        propagate(self.system, field, self.target.initial(), Direction::Forward)
    }

    pub fn adjoint(&self, field: &ControlField, forward: &StateTrajectory) -> Result<StateTrajectory> {
        let chi_t = adjoint_boundary(self.target, forward.last());
        propagate(self.system, field, &chi_t, Direction::Backward)
    }

    fn gradient_term(&self, chi: &StateVector, psi_new: &StateVector, psi_old: &StateVector) -> f64 {
        let mut g = self.system.derivative_matrix_element(chi, psi_new).im;
        if self.config.sigma_t != 0.0 {
            let dpsi = psi_new - psi_old;
            g += 0.5 * self.config.sigma_t * self.system.derivative_matrix_element(&dpsi, psi_new).im;
        }
        g
    }

    /// Sequential first-order update. Each new sample is solved
    /// self-consistently with the step that reaches it, so the returned
    /// trajectory is exactly the propagation of the returned field.
    pub fn step_unconstrained(
        &self,
        field: &ControlField,
        old_forward: &StateTrajectory,
        chi: &StateTrajectory,
    ) -> Result<StepOutcome> {
        let eps = field.values();
        let n_t = self.grid.len();
        let dt = self.grid.dt();
        let mut new = vec![0.0; n_t];
        let mut states: Vec<StateVector> = Vec::with_capacity(n_t);
        let psi0 = self.target.initial().clone();
        new[0] = eps[0] + self.weight[0] * self.gradient_term(chi.state(0), &psi0, old_forward.state(0));
        states.push(psi0);
        for j in 0..n_t - 1 {
            let psi = &states[j];
            let rho = self.weight[j + 1];
            let mut e_next = eps[j + 1] + (new[j] - eps[j]);
            if rho == 0.0 {
                e_next = eps[j + 1];
            }
            let mut psi_next = self.system.step(psi, 0.5 * (new[j] + e_next), dt);
            if rho != 0.0 {
                for _ in 0..SELF_CONSISTENCY_MAX {
                    let updated = eps[j + 1]
                        + rho * self.gradient_term(chi.state(j + 1), &psi_next, old_forward.state(j + 1));
                    let converged = (updated - e_next).abs() <= SELF_CONSISTENCY_TOL * updated.abs().max(1e-300);
                    if updated != e_next {
                        e_next = updated;
                        psi_next = self.system.step(psi, 0.5 * (new[j] + e_next), dt);
                    }
                    if converged {
                        break;
                    }
                }
            }
            new[j + 1] = e_next;
            states.push(psi_next);
        }
        let inhomogeneity: Vec<f64> = new.iter().zip(eps).map(|(a, b)| a - b).collect();
        Ok(StepOutcome {
            field: ControlField::with_reference(self.grid, new, eps.to_vec())?,
            forward: StateTrajectory::from_states(self.grid, states),
            refinement: RefinementReport {
                passes: 0,
                last_change: 0.0,
            },
            inhomogeneity,
        })
    }

    /// `I(t_j) = rho Im{<chi|dH|psi> + sigma/2 <psi - psi_old|dH|psi>}` for a
    /// given forward trajectory.
    fn inhomogeneity_from(
        &self,
        forward: &StateTrajectory,
        old_forward: &StateTrajectory,
        chi: &StateTrajectory,
    ) -> Vec<f64> {
        (0..self.grid.len())
            .map(|j| self.weight[j] * self.gradient_term(chi.state(j), forward.state(j), old_forward.state(j)))
            .collect()
    }

    /// Spectrally constrained update: unconstrained sweep for `I`, Fredholm
    /// solve for the change, optional re-propagation passes.
    pub fn step_spectral(
        &self,
        field: &ControlField,
        old_forward: &StateTrajectory,
        chi: &StateTrajectory,
    ) -> Result<StepOutcome> {
        let sweep = self.step_unconstrained(field, old_forward, chi)?;
        let Some(solver) = &self.solver else {
            let mut out = sweep;
            out.refinement.passes = 1;
            return Ok(out);
        };
        let eps = field.values();
        let apply = |delta: Vec<f64>| -> Vec<f64> { eps.iter().zip(delta).map(|(e, d)| e + d).collect() };
        let mut current = apply(solver.solve(&sweep.inhomogeneity));
        let tol = self
            .config
            .refinement
            .field_tol
            .unwrap_or(1e-6 * field.max_abs().max(f64::MIN_POSITIVE));
        let mut passes = 1;
        let mut last_change = 0.0;
        // mixing factor, halved whenever the fixed-point residual grows
        let mut beta = 1.0;
        let mut last_residual = f64::INFINITY;
        let mut forward = self.forward(&ControlField::new(self.grid, current.clone())?)?;
        while passes < self.config.refinement.max_passes {
            let i = self.inhomogeneity_from(&forward, old_forward, chi);
            let target = apply(solver.solve(&i));
            let residual = target.iter().zip(&current).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if residual > last_residual {
                beta *= 0.5;
            }
            last_residual = residual;
            let next: Vec<f64> = current.iter().zip(&target).map(|(c, t)| c + beta * (t - c)).collect();
            last_change = beta * residual;
            current = next;
            passes += 1;
            forward = self.forward(&ControlField::new(self.grid, current.clone())?)?;
            if last_change < tol {
                break;
            }
        }
        Ok(StepOutcome {
            field: ControlField::with_reference(self.grid, current, eps.to_vec())?,
            forward,
            refinement: RefinementReport { passes, last_change },
            inhomogeneity: sweep.inhomogeneity,
        })
    }

    /// Spectral step when the kernel carries weight, plain step otherwise.
    pub fn step(
        &self,
        field: &ControlField,
        old_forward: &StateTrajectory,
        chi: &StateTrajectory,
    ) -> Result<StepOutcome> {
        if self.solver.is_some() {
            self.step_spectral(field, old_forward, chi)
        } else {
            self.step_unconstrained(field, old_forward, chi)
        }
    }

    pub fn run(&self, guess: &ControlField) -> Result<OptimizationResult> {
        self.run_with(guess, |_| {})
    }

    /// Like [`Optimizer::run`], calling `observe` after every recorded
    /// iteration.
    pub fn run_with(
        &self,
        guess: &ControlField,
        mut observe: impl FnMut(&IterationRecord),
    ) -> Result<OptimizationResult> {
        if guess.grid() != &self.grid {
            return Err(Error::InvalidInput("guess field lives on a different grid".into()));
        }
        let mut field = guess.rebased();
        let mut forward = self.forward(&field)?;
        let j_t = self.target.fidelity(forward.last());
        let first = IterationRecord {
            iteration: 0,
            j_t,
            j_a: 0.0,
            j: functional_value(j_t, 0.0),
            delta_j: 0.0,
            monotone: true,
            refinement_passes: 0,
            update_norm: 0.0,
            field: self.config.record_fields.then(|| field.values().to_vec()),
        };
        observe(&first);
        let mut record = OptimizationRecord {
            iterations: vec![first],
            converged: false,
        };
        for iteration in 1..=self.config.max_iterations {
            let previous = record.iterations.last().unwrap();
            if previous.error() <= self.config.stop_error {
                break;
            }
            let chi = self.adjoint(&field, &forward)?;
            let outcome = self
                .step(&field, &forward, &chi)
                .map_err(|e| e.at_iteration(iteration))?;
            let delta = outcome.field.delta();
            let j_a = self.config.constraint_cost(&delta, &self.grid);
            let j_t = self.target.fidelity(outcome.forward.last());
            let j = functional_value(j_t, j_a);
            let delta_j = j - previous.j;
            let rec = IterationRecord {
                iteration,
                j_t,
                j_a,
                j,
                delta_j,
                monotone: delta_j <= MONOTONICITY_TOL * previous.j.abs(),
                refinement_passes: outcome.refinement.passes,
                update_norm: outcome.inhomogeneity.iter().fold(0.0, |m, v| m.max(v.abs())),
                field: self.config.record_fields.then(|| outcome.field.values().to_vec()),
            };
            observe(&rec);
            record.iterations.push(rec);
            field = outcome.field;
            forward = outcome.forward;
        }
        record.converged = record.final_error() <= self.config.stop_error;
        Ok(OptimizationResult {
            record,
            field: field.rebased(),
            forward,
        })
    }
}

fn build_solver(
    kernel: &SpectralKernel,
    weight: &[f64],
    grid: &TimeGrid,
    config: &OptimizationConfig,
) -> Result<DegenerateSolver> {
    let t_total = grid.duration();
    let order = config.fredholm.order.unwrap_or_else(|| (grid.len() - 1).min(512));
    let layout = if config.fredholm.banded {
        Layout::Banded {
            support: kernel.envelope_support(BAND_CUTOFF) / t_total,
        }
    } else {
        Layout::Dense
    };
    // K(s, s') in rescaled time s = t / T; the Jacobian T goes into gamma.
    let fredholm_kernel = move |s: f64, s2: f64| -> f64 {
        let rho = interpolate(weight, s);
        if rho == 0.0 {
            return 0.0;
        }
        -rho * kernel.smooth_time((s - s2) * t_total) / (2.0 * PI)
    };
    DegenerateSolver::new(
        &fredholm_kernel,
        t_total,
        SolverOptions {
            order,
            layout,
            parallel: !config.deterministic,
        },
    )
}

fn start(
    system: &LevelSystem,
    field: &ControlField,
    target: &TargetSpec,
) -> Result<(StateTrajectory, StateTrajectory)> {
    let forward = propagate(system, field, target.initial(), Direction::Forward)?;
    let chi_t = adjoint_boundary(target, forward.last());
    let chi = propagate(system, field, &chi_t, Direction::Backward)?;
    Ok((forward, chi))
}

/// One unconstrained iteration starting from `field`.
pub fn krotov_step_unconstrained(
    system: &LevelSystem,
    field: &ControlField,
    target: &TargetSpec,
    config: &OptimizationConfig,
) -> Result<StepOutcome> {
    let unconstrained = OptimizationConfig {
        kernel: SpectralKernel::new(config.kernel.lambda_a(), vec![])?,
        ..config.clone()
    };
    let opt = Optimizer::new(system, *field.grid(), target, &unconstrained)?;
    let (forward, chi) = start(system, field, target)?;
    opt.step_unconstrained(field, &forward, &chi)
}

/// The unconstrained update `I(t)` that seeds the Fredholm equation.
pub fn compute_inhomogeneity(
    system: &LevelSystem,
    field: &ControlField,
    target: &TargetSpec,
    config: &OptimizationConfig,
) -> Result<Vec<f64>> {
    Ok(krotov_step_unconstrained(system, field, target, config)?.inhomogeneity)
}

/// One spectrally constrained iteration starting from `field`.
pub fn krotov_step_spectral(
    system: &LevelSystem,
    field: &ControlField,
    target: &TargetSpec,
    config: &OptimizationConfig,
) -> Result<StepOutcome> {
    let opt = Optimizer::new(system, *field.grid(), target, config)?;
    let (forward, chi) = start(system, field, target)?;
    opt.step_spectral(field, &forward, &chi)
}

/// Iterates until `1 - J_T <= stop_error` or `max_iterations` updates.
pub fn optimize(
    system: &LevelSystem,
    guess: &ControlField,
    target: &TargetSpec,
    config: &OptimizationConfig,
) -> Result<OptimizationResult> {
    Optimizer::new(system, *guess.grid(), target, config)?.run(guess)
}

/// Mid-interval field values, as seen by the propagator.
pub fn interval_values(field: &ControlField) -> Vec<f64> {
    (0..field.grid().len() - 1).map(|j| midpoint(field.values(), j)).collect()
}
