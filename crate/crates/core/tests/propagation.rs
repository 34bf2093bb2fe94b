use krotov_spectral::dynamics::{basis_state, propagate, Direction, LevelSystem, StateVector, TimeGrid};
use krotov_spectral::krotov::ControlField;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

/// Classical RK4 on `i dpsi/dt = (E - eps(t) mu) psi` with the field
/// evaluated analytically; shares nothing with the library propagator.
fn rk4(energies: &[f64], mu: &DMatrix<f64>, field: impl Fn(f64) -> f64, psi0: &[C64], t_total: f64, steps: usize) -> Vec<C64> {
    let n = energies.len();
    let rhs = |t: f64, psi: &[C64]| -> Vec<C64> {
        let e = field(t);
        (0..n)
            .map(|i| {
                let mut h_psi = psi[i] * energies[i];
                for j in 0..n {
                    h_psi -= psi[j] * (e * mu[(i, j)]);
                }
                C64::new(0.0, -1.0) * h_psi
            })
            .collect()
    };
    let h = t_total / steps as f64;
    let mut psi = psi0.to_vec();
    let axpy = |a: &[C64], b: &[C64], s: f64| -> Vec<C64> { a.iter().zip(b).map(|(x, y)| x + y * s).collect() };
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = rhs(t, &psi);
        let k2 = rhs(t + 0.5 * h, &axpy(&psi, &k1, 0.5 * h));
        let k3 = rhs(t + 0.5 * h, &axpy(&psi, &k2, 0.5 * h));
        let k4 = rhs(t + h, &axpy(&psi, &k3, h));
        for i in 0..n {
            psi[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    psi
}

fn ladder() -> (Vec<f64>, DMatrix<f64>) {
    let energies = vec![0.0, 0.9, 1.7];
    let mut mu = DMatrix::zeros(3, 3);
    for &(i, j, v) in &[(0, 1, 1.0), (1, 2, 1.4), (0, 2, 0.3)] {
        mu[(i, j)] = v;
        mu[(j, i)] = v;
    }
    (energies, mu)
}

fn pulse(t: f64) -> f64 {
    let t_total = 40.0;
    0.3 * (std::f64::consts::PI * t / t_total).sin().powi(2) * ((0.85 * t).cos() + 0.5 * (0.8 * t + 0.3).sin())
}

fn library_final(n_t: usize) -> StateVector {
    let (energies, mu) = ladder();
    let system = LevelSystem::new(energies, mu).unwrap();
    let grid = TimeGrid::new(40.0, n_t).unwrap();
    let field = ControlField::new(grid, grid.times().iter().map(|&t| pulse(t)).collect()).unwrap();
    propagate(&system, &field, &basis_state(3, 0), Direction::Forward)
        .unwrap()
        .last()
        .clone()
}

fn distance(a: &StateVector, b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn matches_fine_rk4_reference() {
    let (energies, mu) = ladder();
    let n_t = 24001;
    let reference = rk4(&energies, &mu, pulse, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)], 40.0, 100 * (n_t - 1));
    let err = distance(&library_final(n_t), &reference);
    assert!(err < 1e-6, "max deviation {err:e}");
}

#[test]
fn error_shrinks_with_the_step() {
    let (energies, mu) = ladder();
    let reference = rk4(&energies, &mu, pulse, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)], 40.0, 400_000);
    let errors: Vec<f64> = [501, 1001, 2001].iter().map(|&n| distance(&library_final(n), &reference)).collect();
    for w in errors.windows(2) {
        assert!(w[0] / w[1] >= 3.0, "{errors:?}");
    }
}

fn random_problem() -> impl Strategy<Value = (LevelSystem, Vec<f64>, StateVector)> {
    (2usize..=4).prop_flat_map(|n| {
        (
            proptest::collection::vec(-2.0f64..2.0, n),
            proptest::collection::vec(-1.0f64..1.0, n * n),
            proptest::collection::vec(-0.5f64..0.5, 201),
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n),
        )
            .prop_filter_map("non-zero initial state", move |(e, m, eps, psi)| {
                let mu = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { m[i.min(j) * n + i.max(j)] });
                let psi = DVector::from_iterator(n, psi.into_iter().map(|(re, im)| C64::new(re, im)));
                let norm = psi.norm();
                (norm > 1e-3).then(|| (LevelSystem::new(e, mu).unwrap(), eps, psi / C64::new(norm, 0.0)))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn norm_is_conserved((system, eps, psi) in random_problem()) {
        let grid = TimeGrid::new(10.0, eps.len()).unwrap();
        let field = ControlField::new(grid, eps).unwrap();
        let traj = propagate(&system, &field, &psi, Direction::Forward).unwrap();
        for s in traj.states() {
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_undoes_forward((system, eps, psi) in random_problem()) {
        let grid = TimeGrid::new(10.0, eps.len()).unwrap();
        let field = ControlField::new(grid, eps).unwrap();
        let fwd = propagate(&system, &field, &psi, Direction::Forward).unwrap();
        let back = propagate(&system, &field, fwd.last(), Direction::Backward).unwrap();
        for j in 0..grid.len() {
            prop_assert!((back.state(j) - fwd.state(j)).norm() < 1e-10);
        }
    }

    #[test]
    fn overlaps_are_constant_in_time((system, eps, psi) in random_problem(), k in 0usize..2) {
        // two solutions of the same equation keep their inner product
        let grid = TimeGrid::new(10.0, eps.len()).unwrap();
        let field = ControlField::new(grid, eps).unwrap();
        let psi_traj = propagate(&system, &field, &psi, Direction::Forward).unwrap();
        let chi_t = basis_state(system.n_levels(), k);
        let chi_traj = propagate(&system, &field, &chi_t, Direction::Backward).unwrap();
        let end = chi_traj.last().dotc(psi_traj.last());
        for j in 0..grid.len() {
            prop_assert!((chi_traj.state(j).dotc(psi_traj.state(j)) - end).norm() < 1e-10);
        }
    }
}
