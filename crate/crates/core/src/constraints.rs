//! Amplitude and spectral constraints on the field change, PSD certification of
//! Gaussian kernels, and spectrum analysis of real fields.
//!
//! Fourier convention: `eps(omega) = (2 pi)^(-1/2) * integral eps(t) exp(-i omega t) dt`.
//! With it the frequency-domain cost `integral |d eps(omega)|^2 Kbar(omega) d omega`
//! equals `(1 / 2 pi) * double integral d eps(t) K(t - t') d eps(t')`, where
//! `K(tau) = integral Kbar(omega) exp(i omega tau) d omega`.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::dynamics::{TimeGrid, C64};
use crate::error::{Error, Result};

/// Relative PSD slack: a sampled minimum of `Kbar` down to `-PSD_SLACK * lambda_a`
/// is accepted as zero.
pub const PSD_SLACK: f64 = 1e-12;

/// `lambda0 / S(t) * d eps(t)^2` penalty with a time-dependent shape `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeConstraint {
    lambda0: f64,
    shape: Vec<f64>,
}

impl AmplitudeConstraint {
    pub fn new(lambda0: f64, shape: Vec<f64>) -> Result<Self> {
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda0 must be finite and positive, got {lambda0}"
            )));
        }
        if let Some(s) = shape.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "shape function values must be finite and non-negative, got {s}"
            )));
        }
        Ok(Self { lambda0, shape })
    }

    /// Shape that is zero at both ends, rises as `sin^2` over the first
    /// `ramp_fraction * T`, stays at one, and falls symmetrically.
    pub fn sin2_ramp(lambda0: f64, grid: &TimeGrid, ramp_fraction: f64) -> Result<Self> {
        if !(ramp_fraction > 0.0 && ramp_fraction <= 0.5) {
            return Err(Error::InvalidInput(format!(
                "ramp fraction must lie in (0, 0.5], got {ramp_fraction}"
            )));
        }
        let t_total = grid.duration();
        let ramp = ramp_fraction * t_total;
        let shape = grid
            .times()
            .into_iter()
            .map(|t| {
                let edge = t.min(t_total - t).max(0.0);
                if edge >= ramp {
                    1.0
                } else {
                    (0.5 * PI * edge / ramp).sin().powi(2)
                }
            })
            .collect();
        Self::new(lambda0, shape)
    }

    /// Unit shape everywhere.
    pub fn flat(lambda0: f64, grid: &TimeGrid) -> Result<Self> {
        Self::new(lambda0, vec![1.0; grid.len()])
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn shape(&self) -> &[f64] {
        &self.shape
    }

    /// `lambda0 * integral d eps^2 / S dt` by the trapezoid rule; points with
    /// `S = 0` contribute nothing (the update vanishes there).
    pub fn cost(&self, delta_eps: &[f64], grid: &TimeGrid) -> f64 {
        let w = grid.trapezoid_weights();
        let sum: f64 = delta_eps
            .iter()
            .zip(&self.shape)
            .zip(&w)
            .filter(|((_, s), _)| **s > 0.0)
            .map(|((d, s), w)| w * d * d / s)
            .sum();
        self.lambda0 * sum
    }
}

/// One Gaussian band of the spectral kernel. `lambda_b < 0` is a filter,
/// `lambda_b > 0` a pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub omega: f64,
    pub sigma: f64,
    pub lambda_b: f64,
}

impl GaussianComponent {
    pub fn new(omega: f64, sigma: f64, lambda_b: f64) -> Result<Self> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "band centre must be finite and non-negative, got {omega}"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "band width sigma must be finite and positive, got {sigma}"
            )));
        }
        if !lambda_b.is_finite() {
            return Err(Error::InvalidInput(format!("lambda_b must be finite, got {lambda_b}")));
        }
        Ok(Self {
            omega,
            sigma,
            lambda_b,
        })
    }

    pub fn filter(omega: f64, sigma: f64, strength: f64) -> Result<Self> {
        Self::new(omega, sigma, -strength.abs())
    }

    /// `lambda_b * sqrt(2 pi sigma^2) * cos(omega tau) * exp(-sigma^2 tau^2 / 2)`.
    pub fn time_profile(&self, tau: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.lambda_b * (2.0 * PI * s2).sqrt() * (self.omega * tau).cos() * (-0.5 * s2 * tau * tau).exp()
    }

    fn freq_profile(&self, omega: f64) -> f64 {
        let s2 = 2.0 * self.sigma * self.sigma;
        let a = (omega - self.omega).powi(2) / s2;
        let b = (omega + self.omega).powi(2) / s2;
        0.5 * self.lambda_b * ((-a).exp() + (-b).exp())
    }
}

/// `Kbar(omega) = lambda_a - sum_i lambda_b^i / 2 [g(omega - omega_i) + g(omega + omega_i)]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectralKernel {
    lambda_a: f64,
    components: Vec<GaussianComponent>,
}

impl SpectralKernel {
    pub fn new(lambda_a: f64, components: Vec<GaussianComponent>) -> Result<Self> {
        if !(lambda_a.is_finite() && lambda_a >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda_a must be finite and non-negative, got {lambda_a}"
            )));
        }
        Ok(Self {
            lambda_a,
            components,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn lambda_a(&self) -> f64 {
        self.lambda_a
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn has_passes(&self) -> bool {
        self.components.iter().any(|c| c.lambda_b > 0.0)
    }

    /// True when no component carries weight; the spectral update then
    /// collapses to the plain amplitude-constrained one.
    pub fn is_inert(&self) -> bool {
        self.components.iter().all(|c| c.lambda_b == 0.0)
    }

    /// Smallest `omega_max` accepted by [`check_psd`].
    pub fn required_coverage(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.omega + 6.0 * c.sigma)
            .fold(0.0, f64::max)
    }

    /// Largest lag beyond which every Gaussian time envelope is below
    /// `rel_threshold` of its peak.
    pub fn envelope_support(&self, rel_threshold: f64) -> f64 {
        let k = (2.0 * (1.0 / rel_threshold).ln()).sqrt();
        self.components
            .iter()
            .filter(|c| c.lambda_b != 0.0)
            .map(|c| k / c.sigma)
            .fold(0.0, f64::max)
    }

    /// Smooth part of `K(tau)`, excluding the `2 pi lambda_a delta(tau)` term.
    pub fn smooth_time(&self, tau: f64) -> f64 {
        -self.components.iter().map(|c| c.time_profile(tau)).sum::<f64>()
    }
}

/// Value of the time-domain kernel at a lag: its smooth part and the weight of
/// the delta distribution sitting at zero lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeKernelValue {
    pub smooth: f64,
    pub delta_weight: f64,
}

pub fn kernel_time(kernel: &SpectralKernel, tau: f64) -> TimeKernelValue {
    TimeKernelValue {
        smooth: kernel.smooth_time(tau),
        delta_weight: 2.0 * PI * kernel.lambda_a,
    }
}

pub fn kernel_freq(kernel: &SpectralKernel, omega: f64) -> f64 {
    kernel.lambda_a - kernel.components.iter().map(|c| c.freq_profile(omega)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_value: f64,
    pub argmin: f64,
    /// `2 lambda_a - lambda_b^i` per component; negative means the
    /// non-overlapping sufficient condition fails for that band.
    pub margins: Vec<f64>,
}

/// Samples `Kbar` densely on `[0, omega_max]` (at least `n_samples` points and
/// at least ten points per smallest band width, plus every band centre).
pub fn check_psd(kernel: &SpectralKernel, omega_max: f64, n_samples: usize) -> Result<PsdReport> {
    if n_samples < 1000 {
        return Err(Error::InvalidInput(format!(
            "PSD check needs at least 1000 samples, got {n_samples}"
        )));
    }
    let needed = kernel.required_coverage();
    if !(omega_max.is_finite() && omega_max > 0.0 && omega_max >= needed) {
        return Err(Error::InvalidInput(format!(
            "omega_max = {omega_max} does not cover every band (needs >= {needed})"
        )));
    }
    let sigma_min = kernel
        .components
        .iter()
        .map(|c| c.sigma)
        .fold(f64::INFINITY, f64::min);
    let by_density = if sigma_min.is_finite() {
        (10.0 * omega_max / sigma_min).ceil() as usize + 1
    } else {
        0
    };
    let n = n_samples.max(by_density);
    let step = omega_max / (n - 1) as f64;
    let candidates = (0..n)
        .map(|k| k as f64 * step)
        .chain(kernel.components.iter().map(|c| c.omega));
    let (mut min_value, mut argmin) = (f64::INFINITY, 0.0);
    for w in candidates {
        let v = kernel_freq(kernel, w);
        if v < min_value {
            min_value = v;
            argmin = w;
        }
    }
    let margins = kernel
        .components
        .iter()
        .map(|c| 2.0 * kernel.lambda_a - c.lambda_b)
        .collect();
    Ok(PsdReport {
        is_psd: min_value >= -PSD_SLACK * kernel.lambda_a,
        min_value,
        argmin,
        margins,
    })
}

/// Convenience wrapper that picks a sufficient `omega_max` and fails with
/// [`Error::NotPsd`] when the kernel is not positive semi-definite.
pub fn ensure_psd(kernel: &SpectralKernel) -> Result<PsdReport> {
    let omega_max = kernel.required_coverage().max(1.0) * 1.5;
    let report = check_psd(kernel, omega_max, 20_000)?;
    if !report.is_psd {
        return Err(Error::NotPsd {
            min_value: report.min_value,
            argmin: report.argmin,
        });
    }
    Ok(report)
}

/// `(1/2pi) double-integral d eps(t) K_smooth(t - t') d eps(t') + lambda_a integral d eps^2`,
/// trapezoidal in both variables.
pub fn spectral_cost(delta_eps: &[f64], kernel: &SpectralKernel, grid: &TimeGrid) -> f64 {
    let n = grid.len();
    assert_eq!(delta_eps.len(), n, "field change must live on the grid");
    let w = grid.trapezoid_weights();
    let dt = grid.dt();
    let local: f64 = delta_eps.iter().zip(&w).map(|(d, w)| w * d * d).sum();
    let mut total = kernel.lambda_a * local;
    if kernel.is_inert() {
        return total;
    }
    // Toeplitz structure: the smooth kernel only depends on |j - k|.
    let lags: Vec<f64> = (0..n).map(|m| kernel.smooth_time(m as f64 * dt)).collect();
    let weighted: Vec<f64> = delta_eps.iter().zip(&w).map(|(d, w)| d * w).collect();
    let mut double = 0.0;
    for j in 0..n {
        if weighted[j] == 0.0 {
            continue;
        }
        let mut row = lags[0] * weighted[j];
        for k in 0..j {
            row += 2.0 * lags[j - k] * weighted[k];
        }
        double += weighted[j] * row;
    }
    total += double / (2.0 * PI);
    total
}

/// Discrete spectrum on a symmetric frequency axis, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpectrum {
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<C64>,
}

impl FieldSpectrum {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Power-weighted mean of `omega` over positive frequencies.
    pub fn centroid(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (w, a) in self.frequencies.iter().zip(&self.amplitudes) {
            if *w > 0.0 {
                let p = a.norm_sqr();
                num += w * p;
                den += p;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// Trapezoid-weighted DFT of a real field, zero padded to at least twice its
/// length. The Nyquist bin is dropped so the axis is symmetric.
pub fn field_spectrum(values: &[f64], grid: &TimeGrid) -> FieldSpectrum {
    let n = grid.len();
    assert_eq!(values.len(), n, "field must live on the grid");
    let dt = grid.dt();
    let n_fft = (2 * n).next_power_of_two();
    let w = grid.trapezoid_weights();
    let mut buf: Vec<C64> = vec![C64::new(0.0, 0.0); n_fft];
    for ((b, v), w) in buf.iter_mut().zip(values).zip(&w) {
        *b = C64::new(v * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    let norm = 1.0 / (2.0 * PI).sqrt();
    let d_omega = 2.0 * PI / (n_fft as f64 * dt);
    let half = n_fft as i64 / 2;
    let mut frequencies = Vec::with_capacity(n_fft - 1);
    let mut amplitudes = Vec::with_capacity(n_fft - 1);
    for m in -(half - 1)..half {
        let idx = m.rem_euclid(n_fft as i64) as usize;
        frequencies.push(m as f64 * d_omega);
        amplitudes.push(buf[idx] * norm);
    }
    FieldSpectrum {
        frequencies,
        amplitudes,
    }
}

/// Fraction of `sum |eps(omega)|^2` with `| |omega| - center | <= half_width`.
pub fn band_power_fraction(spectrum: &FieldSpectrum, center: f64, half_width: f64) -> f64 {
    bands_power_fraction(spectrum, &[(center, half_width)])
}

/// Like [`band_power_fraction`] for the union of several bands.
pub fn bands_power_fraction(spectrum: &FieldSpectrum, bands: &[(f64, f64)]) -> f64 {
    let total = spectrum.total_power();
    if total == 0.0 {
        return 0.0;
    }
    let inside: f64 = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.amplitudes)
        .filter(|(w, _)| bands.iter().any(|(c, hw)| (w.abs() - c).abs() <= *hw))
        .map(|(_, a)| a.norm_sqr())
        .sum();
    inside / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn single(omega: f64, sigma: f64, lambda_b: f64, lambda_a: f64) -> SpectralKernel {
        SpectralKernel::new(lambda_a, vec![GaussianComponent::new(omega, sigma, lambda_b).unwrap()]).unwrap()
    }

    /// Composite Simpson inverse transform of `Kbar - lambda_a`.
    fn inverse_ft_oracle(kernel: &SpectralKernel, tau: f64) -> f64 {
        let lim = kernel
            .components()
            .iter()
            .map(|c| c.omega + 14.0 * c.sigma)
            .fold(0.0, f64::max);
        let n = 200_000;
        let h = 2.0 * lim / n as f64;
        let f = |w: f64| (kernel_freq(kernel, w) - kernel.lambda_a()) * (w * tau).cos();
        let mut s = f(-lim) + f(lim);
        for k in 1..n {
            let w = -lim + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(w);
        }
        s * h / 3.0
    }

    #[test]
    fn kernel_time_closed_form_at_zero() {
        let k = single(0.0, 1.0, 1.0, 0.0);
        let v = kernel_time(&k, 0.0);
        assert_relative_eq!(v.smooth, -(2.0 * PI).sqrt(), max_relative = 1e-15);
        assert_eq!(v.delta_weight, 0.0);
        assert_relative_eq!(kernel_time(&single(0.0, 1.0, 1.0, 0.5), 0.3).delta_weight, PI);
    }

    #[test]
    fn kernel_time_is_even() {
        let k = SpectralKernel::new(
            0.2,
            vec![
                GaussianComponent::new(1.3, 0.4, -2.0).unwrap(),
                GaussianComponent::new(0.2, 0.1, 0.3).unwrap(),
            ],
        )
        .unwrap();
        for tau in [0.1, 1.0, 3.7, 12.0] {
            assert_eq!(kernel_time(&k, tau).smooth, kernel_time(&k, -tau).smooth);
        }
    }

    #[test]
    fn kernel_time_matches_inverse_fourier_transform() {
        let k = single(2.0, 0.5, -0.3, 0.0);
        let expected = inverse_ft_oracle(&k, 1.7);
        assert!((kernel_time(&k, 1.7).smooth - expected).abs() < 1e-8);
    }

    #[test]
    fn kernel_time_matches_inverse_transform_for_random_kernels() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..5 {
            let comps = (0..3)
                .map(|_| {
                    GaussianComponent::new(rng.gen_range(0.0..3.0), rng.gen_range(0.2..1.0), rng.gen_range(-2.0..2.0))
                        .unwrap()
                })
                .collect();
            let k = SpectralKernel::new(rng.gen_range(0.0..2.0), comps).unwrap();
            let tau = rng.gen_range(-4.0..4.0);
            assert!((k.smooth_time(tau) - inverse_ft_oracle(&k, tau)).abs() < 1e-6);
        }
    }

    #[test]
    fn kernel_freq_limits() {
        let flat = SpectralKernel::new(0.7, vec![]).unwrap();
        for w in [-3.0, 0.0, 1.0, 1e3] {
            assert_eq!(kernel_freq(&flat, w), 0.7);
        }
        let (wi, si, lb) = (10.0, 0.5, 0.8);
        let k = single(wi, si, lb, 1.0);
        let correction = (-2.0 * wi * wi / (si * si)).exp();
        assert!((kernel_freq(&k, wi) - (1.0 - lb / 2.0)).abs() <= correction.max(1e-15));
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let k = single(1.1, 0.3, -4.0, 0.2);
        for _ in 0..100 {
            let w = rng.gen_range(-5.0..5.0);
            assert_eq!(kernel_freq(&k, w), kernel_freq(&k, -w));
        }
    }

    #[test]
    fn psd_boundary_pass() {
        let r = check_psd(&single(5.0, 0.2, 2.0, 1.0), 10.0, 1000).unwrap();
        assert!(r.is_psd);
        assert!(r.min_value.abs() < 1e-12);
        assert!((r.argmin - 5.0).abs() < 0.05);
        assert_eq!(r.margins, vec![0.0]);
    }

    #[test]
    fn psd_violated_pass() {
        let r = check_psd(&single(5.0, 0.2, 3.0, 1.0), 10.0, 1000).unwrap();
        assert!(!r.is_psd);
        assert!(r.min_value < -0.4);
    }

    #[test]
    fn filters_are_always_psd() {
        for w in [0.0, 0.5, 3.0] {
            let r = check_psd(&single(w, 0.3, -5.0, 1.0), 6.0, 1000).unwrap();
            assert!(r.is_psd);
            assert!(r.min_value >= 1.0);
        }
    }

    #[test]
    fn psd_flips_at_twice_lambda_a() {
        let la = 0.37;
        assert!(check_psd(&single(4.0, 0.1, 2.0 * la * (1.0 - 1e-9), la), 8.0, 5000).unwrap().is_psd);
        assert!(!check_psd(&single(4.0, 0.1, 2.0 * la * (1.0 + 1e-9), la), 8.0, 5000).unwrap().is_psd);
    }

    #[test]
    fn psd_requires_coverage() {
        assert!(matches!(
            check_psd(&single(5.0, 0.5, -1.0, 1.0), 7.0, 1000),
            Err(Error::InvalidInput(_))
        ));
        assert!(check_psd(&single(5.0, 0.5, -1.0, 1.0), 8.0, 10).is_err());
    }

    #[test]
    fn overlapping_passes_fail() {
        let k = SpectralKernel::new(
            1.0,
            vec![
                GaussianComponent::new(3.0, 0.5, 2.0).unwrap(),
                GaussianComponent::new(3.3, 0.5, 2.0).unwrap(),
            ],
        )
        .unwrap();
        let r = check_psd(&k, 8.0, 4000).unwrap();
        assert!(!r.is_psd);
        assert!(r.min_value < 0.0);
        assert!(matches!(ensure_psd(&k), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn amplitude_cost_skips_zero_shape() {
        let grid = TimeGrid::new(1.0, 5).unwrap();
        let a = AmplitudeConstraint::new(2.0, vec![0.0, 0.5, 1.0, 0.5, 0.0]).unwrap();
        let d = [0.0, 1.0, 1.0, 1.0, 0.0];
        assert_relative_eq!(a.cost(&d, &grid), 2.0 * 0.25 * (2.0 + 1.0 + 2.0), max_relative = 1e-15);
        assert!(AmplitudeConstraint::new(0.0, vec![1.0]).is_err());
        assert!(AmplitudeConstraint::new(1.0, vec![-0.1]).is_err());
    }

    #[test]
    fn sin2_ramp_shape() {
        let grid = TimeGrid::new(100.0, 101).unwrap();
        let a = AmplitudeConstraint::sin2_ramp(1.0, &grid, 0.1).unwrap();
        let s = a.shape();
        assert_eq!(s[0], 0.0);
        assert!(s[100] < 1e-30);
        assert_relative_eq!(s[5], 0.5, max_relative = 1e-12);
        assert!(s[10..=90].iter().all(|v| *v == 1.0));
    }

    #[test]
    fn spectral_cost_trivial_cases() {
        let grid = TimeGrid::new(10.0, 201).unwrap();
        let k = single(1.0, 0.2, -3.0, 0.5);
        assert_eq!(spectral_cost(&vec![0.0; 201], &k, &grid), 0.0);

        let flat = SpectralKernel::new(1.3, vec![]).unwrap();
        let d: Vec<f64> = grid.times().iter().map(|t| (0.7 * t).sin()).collect();
        let w = grid.trapezoid_weights();
        let expected: f64 = 1.3 * d.iter().zip(&w).map(|(d, w)| w * d * d).sum::<f64>();
        assert_eq!(spectral_cost(&d, &flat, &grid), expected);

        // identical to the amplitude cost with S = 1 and lambda0 = lambda_a
        let amp = AmplitudeConstraint::flat(1.3, &grid).unwrap();
        assert_relative_eq!(spectral_cost(&d, &flat, &grid), amp.cost(&d, &grid), max_relative = 1e-14);
    }

    #[test]
    fn spectral_cost_parseval_cross_check() {
        // Narrowband change centred in a deep filter band.
        let grid = TimeGrid::new(200.0, 2001).unwrap();
        let kernel = SpectralKernel::new(
            0.1,
            vec![
                GaussianComponent::new(1.0, 0.15, -50.0).unwrap(),
                GaussianComponent::new(2.2, 0.2, 0.05).unwrap(),
            ],
        )
        .unwrap();
        let d: Vec<f64> = grid
            .times()
            .iter()
            .map(|t| (-(t - 100.0).powi(2) / (2.0 * 20.0f64.powi(2))).exp() * (1.05 * t).cos())
            .collect();
        let time_domain = spectral_cost(&d, &kernel, &grid);

        // naive DFT on a fine frequency axis, independent of the FFT path
        let w = grid.trapezoid_weights();
        let t = grid.times();
        let (lim, n_w) = (4.0, 8001);
        let hw = 2.0 * lim / (n_w - 1) as f64;
        let mut freq_domain = 0.0;
        for m in 0..n_w {
            let om = -lim + m as f64 * hw;
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..grid.len() {
                acc += C64::from_polar(d[j] * w[j], -om * t[j]);
            }
            let weight = if m == 0 || m == n_w - 1 { 0.5 } else { 1.0 };
            freq_domain += weight * hw * acc.norm_sqr() / (2.0 * PI) * kernel_freq(&kernel, om);
        }
        assert_relative_eq!(time_domain, freq_domain, max_relative = 1e-4);
    }

    #[test]
    fn spectrum_of_tone_and_zero() {
        let grid = TimeGrid::new(400.0, 4001).unwrap();
        let w0 = 1.3;
        let d: Vec<f64> = grid.times().iter().map(|t| (w0 * t).cos()).collect();
        let s = field_spectrum(&d, &grid);
        let (imax, _) = s
            .amplitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        let res = s.frequencies[1] - s.frequencies[0];
        assert!((s.frequencies[imax].abs() - w0).abs() <= res);
        // Hermitian symmetry for a real field
        let n = s.len();
        for k in 0..n {
            assert_eq!(s.frequencies[k], -s.frequencies[n - 1 - k]);
            let (a, b) = (s.amplitudes[k], s.amplitudes[n - 1 - k].conj());
            assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }
        let z = field_spectrum(&vec![0.0; 4001], &grid);
        assert!(z.amplitudes.iter().all(|a| a.norm() == 0.0));
        assert_eq!(band_power_fraction(&z, 1.0, 0.1), 0.0);
    }

    #[test]
    fn gaussian_pulse_spectral_width() {
        let tau = 15.0;
        let grid = TimeGrid::new(300.0, 3001).unwrap();
        let d: Vec<f64> = grid
            .times()
            .iter()
            .map(|t| (-(t - 150.0).powi(2) / (2.0 * tau * tau)).exp())
            .collect();
        let s = field_spectrum(&d, &grid);
        let power: Vec<f64> = s.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        let peak = power.iter().cloned().fold(0.0, f64::max);
        let above: Vec<f64> = s
            .frequencies
            .iter()
            .zip(&power)
            .filter(|(_, p)| **p >= 0.5 * peak)
            .map(|(w, _)| *w)
            .collect();
        let fwhm = above.last().unwrap() - above.first().unwrap();
        // |eps(omega)|^2 ~ exp(-omega^2 tau^2): FWHM = 2 sqrt(ln 2) / tau
        let analytic = 2.0 * 2f64.ln().sqrt() / tau;
        assert!((fwhm - analytic).abs() / analytic < 0.05, "{fwhm} vs {analytic}");
    }

    #[test]
    fn band_power_fractions() {
        let grid = TimeGrid::new(1000.0, 10001).unwrap();
        let env = |t: f64| (PI * t / 1000.0).sin().powi(2);
        let one: Vec<f64> = grid.times().iter().map(|t| env(*t) * (2.0 * t).cos()).collect();
        let s = field_spectrum(&one, &grid);
        assert!(band_power_fraction(&s, 2.0, 0.1) > 0.999);
        assert!(band_power_fraction(&s, 1.0, 0.1) < 1e-6);

        let two: Vec<f64> = grid
            .times()
            .iter()
            .map(|t| env(*t) * ((1.0 * t).cos() + (2.0 * t).cos()))
            .collect();
        let s = field_spectrum(&two, &grid);
        // direct summation over the constructed spectrum
        let total: f64 = s.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        let near_one: f64 = s
            .frequencies
            .iter()
            .zip(&s.amplitudes)
            .filter(|(w, _)| (w.abs() - 1.0).abs() < 0.5)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        assert!((near_one / total - 0.5).abs() < 1e-3);
        assert!((band_power_fraction(&s, 1.0, 0.2) - 0.5).abs() < 1e-3);
        assert!((bands_power_fraction(&s, &[(1.0, 0.2), (2.0, 0.2)]) - 1.0).abs() < 1e-3);
        assert!((s.centroid() - 1.5).abs() < 1e-3);
    }
}
