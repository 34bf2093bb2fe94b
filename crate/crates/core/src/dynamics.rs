//! Finite-level quantum systems and piecewise-constant-field propagation.
//!
//! The Hamiltonian is `H(eps) = diag(energies) - eps * dipole` in atomic
//! units. On each grid interval the field is held at the mean of its two
//! endpoint samples and the state is advanced by the exact exponential of the
//! resulting (real symmetric) Hamiltonian.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::krotov::ControlField;

pub type C64 = Complex64;
pub type StateVector = DVector<C64>;

const NORM_TOL: f64 = 1e-12;

/// Energies and a symmetric dipole-coupling matrix of an n-level system.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSystem {
    energies: Vec<f64>,
    dipole: DMatrix<f64>,
}

impl LevelSystem {
    pub fn new(energies: Vec<f64>, dipole: DMatrix<f64>) -> Result<Self> {
        let n = energies.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "a level system needs at least 2 levels, got {n}"
            )));
        }
        if dipole.nrows() != n || dipole.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "dipole matrix is {}x{}, expected {n}x{n}",
                dipole.nrows(),
                dipole.ncols()
            )));
        }
        if let Some(e) = energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite energy {e}")));
        }
        for i in 0..n {
            if dipole[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "dipole diagonal entry ({i},{i}) must be zero"
                )));
            }
            for j in 0..i {
                let (a, b) = (dipole[(i, j)], dipole[(j, i)]);
                if !a.is_finite() || a != b {
                    return Err(Error::InvalidInput(format!(
                        "dipole must be finite and exactly symmetric: ({i},{j}) = {a}, ({j},{i}) = {b}"
                    )));
                }
            }
        }
        Ok(Self { energies, dipole })
    }

    /// Builds a system from a list of `(i, j, mu_ij)` couplings; each entry
    /// sets both `(i, j)` and `(j, i)`.
    pub fn from_couplings(energies: Vec<f64>, couplings: &[(usize, usize, f64)]) -> Result<Self> {
        let n = energies.len();
        let mut dipole = DMatrix::zeros(n, n);
        for &(i, j, mu) in couplings {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidInput(format!(
                    "coupling ({i},{j}) is out of range or on the diagonal for {n} levels"
                )));
            }
            dipole[(i, j)] = mu;
            dipole[(j, i)] = mu;
        }
        Self::new(energies, dipole)
    }

    pub fn n_levels(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn dipole(&self) -> &DMatrix<f64> {
        &self.dipole
    }

    fn real_hamiltonian(&self, eps: f64) -> DMatrix<f64> {
        let mut h = &self.dipole * (-eps);
        for (i, e) in self.energies.iter().enumerate() {
            h[(i, i)] += e;
        }
        h
    }

    /// `H(eps) = diag(energies) - eps * dipole`.
    pub fn hamiltonian(&self, eps: f64) -> DMatrix<C64> {
        self.real_hamiltonian(eps).map(|x| C64::new(x, 0.0))
    }

    /// `dH/deps = -dipole`.
    pub fn field_derivative(&self) -> DMatrix<C64> {
        self.dipole.map(|x| C64::new(-x, 0.0))
    }

    /// `<a| dH/deps |b>`.
    pub fn derivative_matrix_element(&self, a: &StateVector, b: &StateVector) -> C64 {
        let n = self.n_levels();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..n {
                let mu = self.dipole[(i, j)];
                if mu != 0.0 {
                    row += b[j] * mu;
                }
            }
            acc += a[i].conj() * row;
        }
        -acc
    }

    /// Applies `exp(-i H(eps) dt)` to `psi`. A negative `dt` gives the
    /// inverse (adjoint) evolution.
    pub fn step(&self, psi: &StateVector, eps: f64, dt: f64) -> StateVector {
        let eig = SymmetricEigen::new(self.real_hamiltonian(eps));
        let v = &eig.eigenvectors;
        let n = self.n_levels();
        let mut coeffs = DVector::<C64>::zeros(n);
        for k in 0..n {
            let mut c = C64::new(0.0, 0.0);
            for i in 0..n {
                c += psi[i] * v[(i, k)];
            }
            let phase = -eig.eigenvalues[k] * dt;
            coeffs[k] = c * C64::new(phase.cos(), phase.sin());
        }
        let mut out = DVector::<C64>::zeros(n);
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += coeffs[k] * v[(i, k)];
            }
            out[i] = acc;
        }
        out
    }
}

/// Uniform grid `t_j = j T / (n_t - 1)` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    duration: f64,
    n_t: usize,
}

impl TimeGrid {
    pub fn new(duration: f64, n_t: usize) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid duration must be finite and positive, got {duration}"
            )));
        }
        if n_t < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 samples, got {n_t}"
            )));
        }
        Ok(Self { duration, n_t })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn len(&self) -> usize {
        self.n_t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.duration / (self.n_t - 1) as f64
    }

    /// The last sample is exactly `T`, so grids rebuilt from written time
    /// columns reproduce the original spacing bit for bit.
    pub fn time(&self, j: usize) -> f64 {
        if j + 1 == self.n_t {
            self.duration
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_t).map(|j| self.time(j)).collect()
    }

    /// Composite trapezoid weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = vec![dt; self.n_t];
        w[0] = 0.5 * dt;
        w[self.n_t - 1] = 0.5 * dt;
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// State vectors at every grid point, in time order regardless of the
/// direction they were propagated in.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    grid: TimeGrid,
    states: Vec<StateVector>,
}

impl StateTrajectory {
    pub(crate) fn from_states(grid: TimeGrid, states: Vec<StateVector>) -> Self {
        debug_assert_eq!(grid.len(), states.len());
        Self { grid, states }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn state(&self, j: usize) -> &StateVector {
        &self.states[j]
    }

    pub fn initial(&self) -> &StateVector {
        &self.states[0]
    }

    pub fn last(&self) -> &StateVector {
        &self.states[self.states.len() - 1]
    }
}

/// Initial state and target state of a transfer problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    initial: StateVector,
    target: StateVector,
}

impl TargetSpec {
    pub fn new(initial: StateVector, target: StateVector) -> Result<Self> {
        if initial.len() != target.len() {
            return Err(Error::InvalidInput(format!(
                "initial state has {} components, target has {}",
                initial.len(),
                target.len()
            )));
        }
        for (name, v) in [("initial", &initial), ("target", &target)] {
            let norm = v.norm();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidInput(format!(
                    "{name} state must be unit-norm, has norm {norm}"
                )));
            }
        }
        Ok(Self { initial, target })
    }

    /// Transfer between two basis states of an `n`-level system.
    pub fn basis_transfer(n: usize, from: usize, to: usize) -> Result<Self> {
        if from >= n || to >= n {
            return Err(Error::InvalidInput(format!(
                "basis indices ({from}, {to}) out of range for {n} levels"
            )));
        }
        Self::new(basis_state(n, from), basis_state(n, to))
    }

    pub fn initial(&self) -> &StateVector {
        &self.initial
    }

    pub fn target(&self) -> &StateVector {
        &self.target
    }

    /// `<target|psi>`.
    pub fn overlap(&self, psi: &StateVector) -> C64 {
        self.target.dotc(psi)
    }

    /// `J_T = |<target|psi>|^2`.
    pub fn fidelity(&self, psi: &StateVector) -> f64 {
        self.overlap(psi).norm_sqr()
    }
}

pub fn basis_state(n: usize, k: usize) -> StateVector {
    let mut v = DVector::zeros(n);
    v[k] = C64::new(1.0, 0.0);
    v
}

pub fn hamiltonian(system: &LevelSystem, eps: f64) -> DMatrix<C64> {
    system.hamiltonian(eps)
}

/// Propagates `psi0` across the whole grid of `field`.
///
/// `Forward` treats `psi0` as the state at `t = 0`; `Backward` treats it as
/// the state at `t = T` and applies the adjoint evolution towards `t = 0`.
pub fn propagate(
    system: &LevelSystem,
    field: &ControlField,
    psi0: &StateVector,
    direction: Direction,
) -> Result<StateTrajectory> {
    if psi0.len() != system.n_levels() {
        return Err(Error::InvalidInput(format!(
            "state has {} components but the system has {} levels",
            psi0.len(),
            system.n_levels()
        )));
    }
    let grid = *field.grid();
    let eps = field.values();
    let dt = grid.dt();
    let n_t = grid.len();
    let mut states = Vec::with_capacity(n_t);
    states.push(psi0.clone());
    match direction {
        Direction::Forward => {
            for j in 0..n_t - 1 {
                let next = system.step(&states[j], midpoint(eps, j), dt);
                states.push(next);
            }
        }
        Direction::Backward => {
            for j in (0..n_t - 1).rev() {
                let prev = system.step(states.last().unwrap(), midpoint(eps, j), -dt);
                states.push(prev);
            }
            states.reverse();
        }
    }
    Ok(StateTrajectory::from_states(grid, states))
}

#[inline]
pub(crate) fn midpoint(eps: &[f64], j: usize) -> f64 {
    0.5 * (eps[j] + eps[j + 1])
}

/// `chi(T) = <target|psi(T)> target`, the adjoint boundary condition for
/// `J_T = |<target|psi(T)>|^2`.
pub fn adjoint_boundary(target: &TargetSpec, psi_t: &StateVector) -> StateVector {
    let tau = target.overlap(psi_t);
    target.target().map(|c| c * tau)
}

/// Row `j`, column `m` holds `|psi_m(t_j)|^2`.
pub fn populations(traj: &StateTrajectory) -> DMatrix<f64> {
    let n_t = traj.states.len();
    let n = traj.states.first().map_or(0, |s| s.len());
    DMatrix::from_fn(n_t, n, |j, m| traj.states[j][m].norm_sqr())
}
