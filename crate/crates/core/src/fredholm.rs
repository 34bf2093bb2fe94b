//! Fredholm integral equations of the second kind on `[0, 1]`,
//!
//! ```text
//! f(s) = I(s) + gamma * integral_0^1 K(s, s') f(s') ds',
//! ```
//!
//! solved with the degenerate-kernel method on piecewise-linear hat functions,
//! plus a trapezoidal Nyström solver kept as an independent cross-check.
//!
//! With nodes `s_j = j / N` and `d_jk = K(s_j, s_k)` the kernel is replaced by
//! `K_N(s, s') = sum_jk d_jk a_j(s) a_k(s')`. The solution is
//! `f = I + sum_j X_j a_j` where `(1 - gamma C) X = gamma b`, `C = d A`, `A` the
//! hat overlap matrix and `b_k = sum_i d_ki integral I a_i`.
//!
//! Inhomogeneities are sampled on any uniform grid of `[0, 1]`; integrals of
//! `I` against the hats use the exact product of the piecewise-linear
//! interpolant with each hat.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};

/// Relative pivot size below which a system is declared singular.
const SINGULAR_TOL: f64 = 1e-13;

/// `f = I + gamma * integral K f` with `I` sampled uniformly on `[0, 1]`.
pub struct FredholmProblem<K> {
    inhomogeneity: Vec<f64>,
    kernel: K,
    gamma: f64,
}

impl<K> FredholmProblem<K>
where
    K: Fn(f64, f64) -> f64 + Sync,
{
    pub fn new(inhomogeneity: Vec<f64>, kernel: K, gamma: f64) -> Result<Self> {
        if inhomogeneity.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "inhomogeneity needs at least 2 samples, got {}",
                inhomogeneity.len()
            )));
        }
        if let Some(v) = inhomogeneity.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite inhomogeneity sample {v}")));
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("gamma must be finite, got {gamma}")));
        }
        Ok(Self {
            inhomogeneity,
            kernel,
            gamma,
        })
    }

    pub fn inhomogeneity(&self) -> &[f64] {
        &self.inhomogeneity
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// `a_j(s) = 1 - N |s - j/N|` on `[(j-1)/N, (j+1)/N]`, zero elsewhere.
pub fn hat_basis(j: usize, n: usize, s: f64) -> Result<f64> {
    if n == 0 || j > n {
        return Err(Error::InvalidInput(format!(
            "hat index {j} out of range for order {n}"
        )));
    }
    Ok(hat(j, n, s))
}

#[inline]
fn hat(j: usize, n: usize, s: f64) -> f64 {
    (1.0 - (n as f64 * s - j as f64).abs()).max(0.0)
}

/// Gram matrix of the hat basis: `1/(3N)` at both corners of the diagonal,
/// `2/(3N)` on the interior diagonal, `1/(6N)` on the first off-diagonals.
pub fn overlap_matrix(n: usize) -> DMatrix<f64> {
    assert!(n >= 1, "approximation order must be at least 1");
    let nf = n as f64;
    DMatrix::from_fn(n + 1, n + 1, |i, k| {
        if i == k {
            if i == 0 || i == n {
                1.0 / (3.0 * nf)
            } else {
                2.0 / (3.0 * nf)
            }
        } else if i.abs_diff(k) == 1 {
            1.0 / (6.0 * nf)
        } else {
            0.0
        }
    })
}

/// Tridiagonal entries of [`overlap_matrix`]: `(diag_i, off)`.
#[inline]
fn overlap_entry(i: usize, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let diag = if i == 0 || i == n { 1.0 / (3.0 * nf) } else { 2.0 / (3.0 * nf) };
    (diag, 1.0 / (6.0 * nf))
}

/// Kernel node values `d_jk = K(j/N, k/N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateApproximation {
    order: usize,
    values: DMatrix<f64>,
}

impl DegenerateApproximation {
    pub fn new<K: Fn(f64, f64) -> f64 + Sync>(kernel: &K, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("approximation order must be at least 1".into()));
        }
        let nf = order as f64;
        let values = DMatrix::from_fn(order + 1, order + 1, |j, k| kernel(j as f64 / nf, k as f64 / nf));
        Ok(Self { order, values })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// `(1 - gamma C) X = gamma b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Integrals `integral_0^1 I(s) a_i(s) ds` for the piecewise-linear
/// interpolant of uniformly sampled `I`.
pub fn hat_projections(samples: &[f64], order: usize) -> Vec<f64> {
    let m = samples.len() - 1;
    let n = order;
    // Breakpoints in units of 1 / (n m): fine points at k n, nodes at j m.
    let scale = (n * m) as f64;
    let mut out = vec![0.0; n + 1];
    let (mut fine, mut node) = (0usize, 0usize);
    let mut left = 0usize;
    while left < n * m {
        let next_fine = (fine + 1) * n;
        let next_node = (node + 1) * m;
        let right = next_fine.min(next_node);
        // current piece [left, right] lies in fine interval `fine` and node interval `node`
        let interp = |x: f64| {
            let base = (fine * n) as f64;
            let frac = (x - base) / n as f64;
            samples[fine] + frac * (samples[fine + 1] - samples[fine])
        };
        let (a, b) = (left as f64, right as f64);
        let mid = 0.5 * (a + b);
        let (ia, im, ib) = (interp(a), interp(mid), interp(b));
        let h = (b - a) / scale;
        // hats `node` (falling) and `node + 1` (rising) on this node interval
        let base = (node * m) as f64;
        let rise = |x: f64| (x - base) / m as f64;
        let (ra, rm, rb) = (rise(a), rise(mid), rise(b));
        out[node] += h / 6.0 * (ia * (1.0 - ra) + 4.0 * im * (1.0 - rm) + ib * (1.0 - rb));
        out[node + 1] += h / 6.0 * (ia * ra + 4.0 * im * rm + ib * rb);
        if right == next_fine {
            fine += 1;
        }
        if right == next_node {
            node += 1;
        }
        left = right;
    }
    out
}

/// Evaluates `I(s_m) + sum_j X_j a_j(s_m)` on the sample grid of `I`.
fn reconstruct(samples: &[f64], coeffs: &[f64]) -> Vec<f64> {
    let m = samples.len() - 1;
    let n = coeffs.len() - 1;
    samples
        .iter()
        .enumerate()
        .map(|(k, i_val)| {
            // s = k / m; node interval q = floor(k n / m)
            let num = k * n;
            let q = (num / m).min(n - 1);
            let frac = (num - q * m) as f64 / m as f64;
            i_val + coeffs[q] * (1.0 - frac) + coeffs[q + 1] * frac
        })
        .collect()
}

/// Storage used for the degenerate-kernel system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layout {
    Dense,
    /// Treat `K(s, s')` as zero for `|s - s'| > support`; the system becomes
    /// banded with half-bandwidth `ceil(support N) + 1`.
    Banded { support: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub order: usize,
    pub layout: Layout,
    /// Assemble rows on the rayon pool. Results are identical either way;
    /// `false` keeps everything on the calling thread.
    pub parallel: bool,
}

impl SolverOptions {
    pub fn dense(order: usize) -> Self {
        Self {
            order,
            layout: Layout::Dense,
            parallel: false,
        }
    }
}

enum Factored {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Banded(BandLu),
}

enum NodeValues {
    Dense(DMatrix<f64>),
    Banded { width: usize, rows: Vec<Vec<f64>> },
}

impl NodeValues {
    /// `sum_i d_ki g_i`.
    fn apply(&self, g: &[f64]) -> Vec<f64> {
        match self {
            NodeValues::Dense(d) => (d * DVector::from_column_slice(g)).as_slice().to_vec(),
            NodeValues::Banded { width, rows } => rows
                .iter()
                .enumerate()
                .map(|(k, row)| {
                    let lo = k.saturating_sub(*width);
                    row.iter().zip(&g[lo..]).map(|(d, g)| d * g).sum()
                })
                .collect(),
        }
    }
}

/// Degenerate-kernel solver with the system matrix factorised once, so the
/// same kernel can be solved against many inhomogeneities.
pub struct DegenerateSolver {
    order: usize,
    gamma: f64,
    nodes: NodeValues,
    factors: Factored,
}

impl DegenerateSolver {
    pub fn new<K>(kernel: &K, gamma: f64, options: SolverOptions) -> Result<Self>
    where
        K: Fn(f64, f64) -> f64 + Sync,
    {
        let n = options.order;
        if n == 0 {
            return Err(Error::InvalidInput("approximation order must be at least 1".into()));
        }
        let nf = n as f64;
        match options.layout {
            Layout::Dense => {
                let d = node_values_dense(kernel, n, options.parallel);
                let m = system_matrix_dense(&d, gamma);
                let factors = factor_dense(m, gamma)?;
                Ok(Self {
                    order: n,
                    gamma,
                    nodes: NodeValues::Dense(d),
                    factors: Factored::Dense(factors),
                })
            }
            Layout::Banded { support } => {
                if !(support.is_finite() && support >= 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "banded support must be finite and non-negative, got {support}"
                    )));
                }
                let w = ((support * nf).ceil() as usize).min(n);
                let eval_row = |j: usize| -> Vec<f64> {
                    let lo = j.saturating_sub(w);
                    let hi = (j + w).min(n);
                    (lo..=hi).map(|k| kernel(j as f64 / nf, k as f64 / nf)).collect()
                };
                let rows: Vec<Vec<f64>> = if options.parallel {
                    (0..=n).into_par_iter().map(eval_row).collect()
                } else {
                    (0..=n).map(eval_row).collect()
                };
                // C = d A is banded with half-bandwidth w + 1.
                let bw = (w + 1).min(n);
                let mut m = BandMatrix::zeros(n + 1, bw, bw);
                for (j, row) in rows.iter().enumerate() {
                    let lo = j.saturating_sub(w);
                    let d = |i: usize| -> f64 {
                        if i >= lo && i <= (j + w).min(n) {
                            row[i - lo]
                        } else {
                            0.0
                        }
                    };
                    for k in m.row_range(j) {
                        let (diag, off) = overlap_entry(k, n);
                        let mut c = d(k) * diag;
                        if k > 0 {
                            c += d(k - 1) * off;
                        }
                        if k < n {
                            c += d(k + 1) * off;
                        }
                        let identity = if j == k { 1.0 } else { 0.0 };
                        m.set(j, k, identity - gamma * c);
                    }
                }
                let factors = m.lu(SINGULAR_TOL).ok_or(Error::SingularSystem { gamma })?;
                Ok(Self {
                    order: n,
                    gamma,
                    nodes: NodeValues::Banded { width: w, rows },
                    factors: Factored::Banded(factors),
                })
            }
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Coefficients `X_j` for the given inhomogeneity samples.
    pub fn coefficients(&self, inhomogeneity: &[f64]) -> Vec<f64> {
        assert!(inhomogeneity.len() >= 2, "inhomogeneity needs at least 2 samples");
        let g = hat_projections(inhomogeneity, self.order);
        let rhs: Vec<f64> = self.nodes.apply(&g).into_iter().map(|b| self.gamma * b).collect();
        match &self.factors {
            Factored::Dense(lu) => lu
                .solve(&DVector::from_vec(rhs))
                .expect("factorisation was checked to be regular")
                .as_slice()
                .to_vec(),
            Factored::Banded(lu) => lu.solve(&rhs),
        }
    }

    /// Solution sampled on the grid of `inhomogeneity`.
    pub fn solve(&self, inhomogeneity: &[f64]) -> Vec<f64> {
        let x = self.coefficients(inhomogeneity);
        reconstruct(inhomogeneity, &x)
    }
}

fn node_values_dense<K>(kernel: &K, n: usize, parallel: bool) -> DMatrix<f64>
where
    K: Fn(f64, f64) -> f64 + Sync,
{
    let nf = n as f64;
    let row = |j: usize| -> Vec<f64> { (0..=n).map(|k| kernel(j as f64 / nf, k as f64 / nf)).collect() };
    let rows: Vec<Vec<f64>> = if parallel {
        (0..=n).into_par_iter().map(row).collect()
    } else {
        (0..=n).map(row).collect()
    };
    DMatrix::from_fn(n + 1, n + 1, |j, k| rows[j][k])
}

/// `1 - gamma d A` using the tridiagonal structure of `A`.
fn system_matrix_dense(d: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let n = d.nrows() - 1;
    DMatrix::from_fn(n + 1, n + 1, |j, k| {
        let (diag, off) = overlap_entry(k, n);
        let mut c = d[(j, k)] * diag;
        if k > 0 {
            c += d[(j, k - 1)] * off;
        }
        if k < n {
            c += d[(j, k + 1)] * off;
        }
        let identity = if j == k { 1.0 } else { 0.0 };
        identity - gamma * c
    })
}

fn factor_dense(m: DMatrix<f64>, gamma: f64) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let scale = m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = u.diagonal().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > SINGULAR_TOL * scale) {
        return Err(Error::SingularSystem { gamma });
    }
    Ok(lu)
}

/// Builds the dense system `(1 - gamma C) X = gamma b`, rejecting singular
/// matrices.
pub fn assemble_system<K>(problem: &FredholmProblem<K>, order: usize) -> Result<LinearSystem>
where
    K: Fn(f64, f64) -> f64 + Sync,
{
    let approx = DegenerateApproximation::new(&problem.kernel, order)?;
    let d = approx.values;
    let a = overlap_matrix(order);
    let c = &d * &a;
    let matrix = DMatrix::identity(order + 1, order + 1) - &c * problem.gamma;
    let g = hat_projections(&problem.inhomogeneity, order);
    let rhs = (&d * DVector::from_vec(g)) * problem.gamma;
    factor_dense(matrix.clone(), problem.gamma)?;
    Ok(LinearSystem { matrix, rhs })
}

/// Degenerate-kernel solution on the sample grid of the inhomogeneity.
pub fn solve_degenerate<K>(problem: &FredholmProblem<K>, order: usize) -> Result<Vec<f64>>
where
    K: Fn(f64, f64) -> f64 + Sync,
{
    let solver = DegenerateSolver::new(&problem.kernel, problem.gamma, SolverOptions::dense(order))?;
    Ok(solver.solve(&problem.inhomogeneity))
}

/// Trapezoidal Nyström solution at the `n_quad` uniform nodes of `[0, 1]`;
/// `I` is linearly interpolated onto them.
pub fn solve_nystrom<K>(problem: &FredholmProblem<K>, n_quad: usize) -> Result<Vec<f64>>
where
    K: Fn(f64, f64) -> f64 + Sync,
{
    if n_quad < 2 {
        return Err(Error::InvalidInput(format!(
            "Nystrom quadrature needs at least 2 nodes, got {n_quad}"
        )));
    }
    let h = 1.0 / (n_quad - 1) as f64;
    let s: Vec<f64> = (0..n_quad).map(|k| k as f64 * h).collect();
    let weight = |j: usize| if j == 0 || j == n_quad - 1 { 0.5 * h } else { h };
    let gamma = problem.gamma;
    let matrix = DMatrix::from_fn(n_quad, n_quad, |k, j| {
        let identity = if j == k { 1.0 } else { 0.0 };
        identity - gamma * weight(j) * (problem.kernel)(s[k], s[j])
    });
    let rhs = DVector::from_iterator(n_quad, s.iter().map(|&x| interpolate(&problem.inhomogeneity, x)));
    let lu = factor_dense(matrix, gamma)?;
    Ok(lu.solve(&rhs).expect("checked regular").as_slice().to_vec())
}

/// Linear interpolation of uniform samples on `[0, 1]`.
pub fn interpolate(samples: &[f64], s: f64) -> f64 {
    let m = samples.len() - 1;
    let x = (s * m as f64).clamp(0.0, m as f64);
    let q = (x.floor() as usize).min(m - 1);
    let frac = x - q as f64;
    samples[q] + frac * (samples[q + 1] - samples[q])
}
