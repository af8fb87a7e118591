//! Windowed sampling of the kernel, direct N-point discrete Fourier
//! analysis, fractional-delay constructions, and magnitude-invariance
//! checks.
//!
//! Two constructions of the delayed observation are compared:
//!
//! * re-sampling the analytic kernel at `n*T + delay`, and
//! * applying an all-pass phase ramp to the spectrum of the undelayed
//!   observation.
//!
//! The ramp preserves bin magnitudes by construction; re-sampling agrees
//! with it only when the scaled line set stays below the half-sampling
//! frequency, and can redistribute energy across bins once lines alias.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::kernel::kernel_value;
use crate::pas::PhaseConfig;
use crate::rope::{FrequencyLineSet, TimeScale};

use core::f64::consts::{PI, TAU};

/// Deterministic analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    /// Window samples of length `n` (periodic Hann convention).
    pub fn samples(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (TAU * i as f64 / n as f64).cos()))
                .collect(),
        }
    }
}

/// A windowed, delayed sample sequence of the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedObservation {
    window: Vec<f64>,
    sample_period: f64,
    delay: f64,
    samples: Vec<Complex64>,
}

impl WindowedObservation {
    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Samples `w[n] * m(n*T + delay)` for `n` in `0..n_points`.
pub fn observe(
    ls: &FrequencyLineSet,
    ts: &TimeScale,
    sample_period: f64,
    n_points: usize,
    delay: f64,
    window: &[f64],
) -> Result<WindowedObservation> {
    if n_points < 2 {
        return invalid("an observation needs at least 2 points");
    }
    if window.len() != n_points {
        return Err(Error::LengthMismatch { expected: n_points, got: window.len() });
    }
    if !(sample_period.is_finite() && sample_period > 0.0) {
        return invalid(format!("sample period must be positive, got {sample_period}"));
    }
    if !window.iter().all(|w| w.is_finite()) {
        return invalid("window values must be finite");
    }
    if window.iter().all(|w| *w == 0.0) {
        return invalid("window must have at least one nonzero value");
    }
    let samples = (0..n_points)
        .map(|n| window[n] * kernel_value(ls, ts, n as f64 * sample_period + delay))
        .collect();
    Ok(WindowedObservation {
        window: window.to_vec(),
        sample_period,
        delay,
        samples,
    })
}

/// N-point spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct DftSpectrum {
    bins: Vec<Complex64>,
}

impl DftSpectrum {
    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.norm()).collect()
    }

    /// CSV with columns `k, re, im, mag`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("k,re,im,mag\n");
        for (k, b) in self.bins.iter().enumerate() {
            out.push_str(&format!("{k},{},{},{}\n", b.re, b.im, b.norm()));
        }
        out
    }
}

/// Direct transform of an arbitrary complex sequence.
pub fn dft_sequence(x: &[Complex64]) -> DftSpectrum {
    let n = x.len();
    let bins = (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let ang = -TAU * (k * i % n) as f64 / n as f64;
                let (s, c) = ang.sin_cos();
                acc += v * Complex64::new(c, s);
            }
            acc
        })
        .collect();
    DftSpectrum { bins }
}

/// N-point transform of an observation.
pub fn dft(obs: &WindowedObservation) -> DftSpectrum {
    dft_sequence(obs.samples())
}

/// Inverse transform; `idft(dft(x)) == x` up to rounding.
pub fn idft(spec: &DftSpectrum) -> Vec<Complex64> {
    let n = spec.len();
    (0..n)
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, b) in spec.bins().iter().enumerate() {
                let ang = TAU * (k * i % n) as f64 / n as f64;
                let (s, c) = ang.sin_cos();
                acc += b * Complex64::new(c, s);
            }
            acc / n as f64
        })
        .collect()
}

/// All-pass fractional delay in the bin domain: bin `k` is rotated by
/// `exp(j w_k d)` where `w_k` is the principal discrete frequency and `d`
/// the delay in samples. Unit modulus per bin, so magnitudes are exactly
/// preserved.
pub fn allpass_shift(spec: &DftSpectrum, delay_samples: f64) -> DftSpectrum {
    let n = spec.len();
    let bins = spec
        .bins()
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let k_signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            let ang = TAU * k_signed / n as f64 * delay_samples;
            let (s, c) = ang.sin_cos();
            b * Complex64::new(c, s)
        })
        .collect();
    DftSpectrum { bins }
}

/// Magnitude deviations between a delayed and an undelayed observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceCheck {
    /// Deviation of the all-pass phase-ramp construction.
    pub allpass_rel_dev: f64,
    /// Deviation of the direct re-sampled construction.
    pub resample_rel_dev: f64,
    /// Whether every scaled line sits below the half-sampling frequency.
    pub nyquist_ok: bool,
}

fn max_rel_magnitude_dev(a: &DftSpectrum, b: &DftSpectrum) -> f64 {
    let ref_mag = a
        .bins()
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    a.bins()
        .iter()
        .zip(b.bins())
        .map(|(x, y)| (x.norm() - y.norm()).abs())
        .fold(0.0_f64, f64::max)
        / ref_mag
}

/// Compares `|DFT|` of the delayed observation against the undelayed one,
/// for both delay constructions.
pub fn magnitude_invariance_check(
    ls: &FrequencyLineSet,
    ts: &TimeScale,
    sample_period: f64,
    n_points: usize,
    delay: f64,
    window: &[f64],
) -> Result<InvarianceCheck> {
    let base = observe(ls, ts, sample_period, n_points, 0.0, window)?;
    let shifted = observe(ls, ts, sample_period, n_points, delay, window)?;
    let base_spec = dft(&base);
    let resampled_spec = dft(&shifted);
    let allpass_spec = allpass_shift(&base_spec, delay / sample_period);

    Ok(InvarianceCheck {
        allpass_rel_dev: max_rel_magnitude_dev(&base_spec, &allpass_spec),
        resample_rel_dev: max_rel_magnitude_dev(&base_spec, &resampled_spec),
        nyquist_ok: ts.alpha() * ls.fastest() < PI / sample_period,
    })
}

/// True when the config's offset spread never exceeds the sampling period,
/// so shifted grid points from different heads cannot swap discrete order.
pub fn order_preservation_check(cfg: &PhaseConfig, sample_period: f64) -> bool {
    cfg.offset_spread() <= sample_period
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bins() -> TimeScale {
        TimeScale::bins()
    }

    #[test]
    fn observe_matches_definition() {
        let ls = FrequencyLineSet::geometric(8, 1000.0).unwrap();
        let ts = bins();
        let n = 16;
        let rect = Window::Rectangular.samples(n);
        let obs = observe(&ls, &ts, 0.5, n, 0.0, &rect).unwrap();
        for (i, s) in obs.samples().iter().enumerate() {
            let expect = kernel_value(&ls, &ts, i as f64 * 0.5);
            assert_abs_diff_eq!((s - expect).norm(), 0.0, epsilon = 1e-15);
        }
        // Hann window with a fractional delay: elementwise product oracle.
        let hann = Window::Hann.samples(n);
        let obs = observe(&ls, &ts, 0.5, n, 0.15, &hann).unwrap();
        for (i, s) in obs.samples().iter().enumerate() {
            let expect = hann[i] * kernel_value(&ls, &ts, i as f64 * 0.5 + 0.15);
            assert_abs_diff_eq!((s - expect).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn observe_single_line_is_one_phasor() {
        let ls = FrequencyLineSet::from_lines(vec![0.8], 10.0).unwrap();
        let ts = bins();
        let ones = vec![1.0; 8];
        let obs = observe(&ls, &ts, 1.0, 8, 0.4, &ones).unwrap();
        for (n, s) in obs.samples().iter().enumerate() {
            let expect = Complex64::new(0.0, 0.8 * (n as f64 + 0.4)).exp();
            assert_abs_diff_eq!((s - expect).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn observe_validates_arguments() {
        let ls = FrequencyLineSet::geometric(4, 100.0).unwrap();
        let ts = bins();
        assert!(observe(&ls, &ts, 1.0, 1, 0.0, &[1.0]).is_err());
        assert!(observe(&ls, &ts, 1.0, 4, 0.0, &[1.0; 3]).is_err());
        assert!(observe(&ls, &ts, 0.0, 4, 0.0, &[1.0; 4]).is_err());
        assert!(observe(&ls, &ts, 1.0, 4, 0.0, &[0.0; 4]).is_err());
    }

    #[test]
    fn dft_impulse_cases() {
        // Constant ones: DC impulse.
        let x = vec![Complex64::new(1.0, 0.0); 4];
        let spec = dft_sequence(&x);
        assert_abs_diff_eq!(spec.bins()[0].re, 4.0, epsilon = 1e-12);
        for k in 1..4 {
            assert_abs_diff_eq!(spec.bins()[k].norm(), 0.0, epsilon = 1e-12);
        }
        // Single complex tone lands in bin 1.
        let n = 8;
        let tone: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(0.0, TAU * i as f64 / n as f64).exp())
            .collect();
        let spec = dft_sequence(&tone);
        assert_abs_diff_eq!(spec.bins()[1].norm(), n as f64, epsilon = 1e-10);
        for k in (0..n).filter(|&k| k != 1) {
            assert_abs_diff_eq!(spec.bins()[k].norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn parseval_identity() {
        let ls = FrequencyLineSet::geometric(16, 10_000.0).unwrap();
        let obs = observe(&ls, &bins(), 0.7, 64, 0.3, &Window::Hann.samples(64)).unwrap();
        let spec = dft(&obs);
        let time_energy: f64 = obs.samples().iter().map(|s| s.norm_sqr()).sum();
        let freq_energy: f64 = spec.bins().iter().map(|b| b.norm_sqr()).sum::<f64>() / 64.0;
        assert_abs_diff_eq!(time_energy, freq_energy, epsilon = 1e-10 * time_energy.max(1.0));
    }

    #[test]
    fn integer_circular_shift_preserves_magnitudes_exactly() {
        let ls = FrequencyLineSet::geometric(8, 500.0).unwrap();
        let obs = observe(&ls, &bins(), 0.9, 32, 0.0, &Window::Rectangular.samples(32)).unwrap();
        let x = obs.samples();
        let shifted: Vec<Complex64> = (0..32).map(|i| x[(i + 32 - 5) % 32]).collect();
        let a = dft_sequence(x);
        let b = dft_sequence(&shifted);
        for (k, (za, zb)) in a.bins().iter().zip(b.bins()).enumerate() {
            // Bin k picks up exactly exp(-j 2 pi k s / N).
            let ang = -TAU * (k as f64) * 5.0 / 32.0;
            let expect = za * Complex64::new(ang.cos(), ang.sin());
            assert_abs_diff_eq!((zb - expect).norm(), 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(za.norm(), zb.norm(), epsilon = 1e-10);
        }
    }

    #[test]
    fn delay_zero_gives_exact_equality() {
        let ls = FrequencyLineSet::geometric(16, 10_000.0).unwrap();
        let w = Window::Rectangular.samples(64);
        let chk = magnitude_invariance_check(&ls, &bins(), 1.0, 64, 0.0, &w).unwrap();
        assert_eq!(chk.allpass_rel_dev, 0.0);
        assert_eq!(chk.resample_rel_dev, 0.0);
    }

    #[test]
    fn nyquist_valid_allpass_is_invariant() {
        let ls = FrequencyLineSet::geometric(64, 10_000.0).unwrap();
        let ts = bins();
        let period = 0.8 * ls.nyquist_period(&ts);
        for window in [Window::Rectangular, Window::Hann] {
            let w = window.samples(128);
            for i in 1..=10 {
                let delay = 0.1 * i as f64 * period;
                let chk = magnitude_invariance_check(&ls, &ts, period, 128, delay, &w).unwrap();
                assert!(chk.nyquist_ok);
                assert!(
                    chk.allpass_rel_dev < 1e-9,
                    "allpass deviation {} at delay {delay}",
                    chk.allpass_rel_dev
                );
            }
        }
    }

    #[test]
    fn sub_nyquist_resampling_breaks_invariance() {
        // Sampling at twice the largest admissible period folds the fast
        // lines onto slow ones; a delay scan finds a large deviation.
        let ls = FrequencyLineSet::geometric(64, 10_000.0).unwrap();
        let ts = bins();
        let period = 2.0 * ls.nyquist_period(&ts);
        let w = Window::Rectangular.samples(256);
        let mut worst = 0.0_f64;
        for i in 1..=10 {
            let delay = 0.1 * i as f64 * period;
            let chk = magnitude_invariance_check(&ls, &ts, period, 256, delay, &w).unwrap();
            assert!(!chk.nyquist_ok);
            worst = worst.max(chk.resample_rel_dev);
        }
        assert!(worst > 1e-3, "worst sub-Nyquist deviation {worst}");
    }

    #[test]
    fn order_preservation_cases() {
        assert!(order_preservation_check(&PhaseConfig::two_group(0.5), 1.0));
        assert!(!order_preservation_check(&PhaseConfig::two_group(1.5), 1.0));
        let same = PhaseConfig::uniform(vec![0.3, 0.3]).unwrap();
        for period in [0.01, 1.0, 100.0] {
            assert!(order_preservation_check(&same, period));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn dft_round_trip(seed in 0u64..1000, n in 2usize..48) {
            use rand::Rng;
            use rand_chacha::rand_core::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let back = idft(&dft_sequence(&x));
            let scale: f64 = x.iter().map(|v| v.norm()).fold(1.0, f64::max);
            for (a, b) in x.iter().zip(back.iter()) {
                prop_assert!((a - b).norm() <= 1e-10 * scale);
            }
        }

        #[test]
        fn allpass_never_changes_magnitudes(seed in 0u64..1000, d in -8.0f64..8.0) {
            use rand::Rng;
            use rand_chacha::rand_core::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Complex64> = (0..32)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let spec = dft_sequence(&x);
            let shifted = allpass_shift(&spec, d);
            for (a, b) in spec.bins().iter().zip(shifted.bins()) {
                prop_assert!((a.norm() - b.norm()).abs() <= 1e-12 * a.norm().max(1.0));
            }
        }
    }
}
