//! The inverse-Fourier time kernel of a line set, rotated logits, and
//! Lipschitz constants.
//!
//! The kernel is the unweighted average of unit phasors over the line set,
//! `m(t) = (1/m) sum_i exp(j w_i a t)`. It multiplies the content dot
//! product in the high-dimensional approximation of the rotated logit, so
//! its local slope controls how hard attention can swing under small
//! timing perturbations.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{invalid, Result};
use crate::report::SweepReport;
use crate::rope::{ComplexCoefficients, FrequencyLineSet, TimeScale};
use crate::stats;

/// Kernel samples over a lag grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    lags: Vec<f64>,
    values: Vec<Complex64>,
    scale: TimeScale,
}

impl KernelGrid {
    pub(crate) fn from_parts(lags: Vec<f64>, values: Vec<Complex64>, scale: TimeScale) -> Self {
        debug_assert_eq!(lags.len(), values.len());
        Self { lags, values, scale }
    }

    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn scale(&self) -> &TimeScale {
        &self.scale
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    /// CSV with columns `lag, re, im`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("lag,re,im\n");
        for (lag, v) in self.lags.iter().zip(self.values.iter()) {
            out.push_str(&format!("{lag},{},{}\n", v.re, v.im));
        }
        out
    }
}

/// Kernel at a single lag.
pub fn kernel_value(ls: &FrequencyLineSet, ts: &TimeScale, lag: f64) -> Complex64 {
    let a = ts.alpha();
    let mut acc = Complex64::new(0.0, 0.0);
    for w in ls.lines() {
        let (s, c) = (w * a * lag).sin_cos();
        acc += Complex64::new(c, s);
    }
    acc / ls.pair_count() as f64
}

fn check_lag_grid(lags: &[f64]) -> Result<()> {
    if lags.is_empty() {
        return invalid("lag grid must be nonempty");
    }
    if !lags.iter().all(|x| x.is_finite()) {
        return invalid("lags must be finite");
    }
    if !lags.windows(2).all(|p| p[0] < p[1]) {
        return invalid("lags must be strictly increasing");
    }
    Ok(())
}

/// Kernel over a strictly increasing lag grid.
pub fn eval_kernel(ls: &FrequencyLineSet, ts: &TimeScale, lags: &[f64]) -> Result<KernelGrid> {
    check_lag_grid(lags)?;
    let values = lags.iter().map(|&t| kernel_value(ls, ts, t)).collect();
    Ok(KernelGrid::from_parts(lags.to_vec(), values, *ts))
}

/// Exact rotated logit `Re[sum_i C_i exp(j w_i a lag)]`.
pub fn rotated_logit(
    coeffs: &ComplexCoefficients,
    ls: &FrequencyLineSet,
    ts: &TimeScale,
    lag: f64,
) -> Result<f64> {
    coeffs.check_len(ls.pair_count())?;
    let a = ts.alpha();
    let mut acc = 0.0;
    for (c, w) in coeffs.values().iter().zip(ls.lines()) {
        let (s, co) = (w * a * lag).sin_cos();
        acc += c.re * co - c.im * s;
    }
    Ok(acc)
}

/// Analytic derivative of `Re{m}` at one lag.
fn kernel_re_derivative(ls: &FrequencyLineSet, ts: &TimeScale, lag: f64) -> f64 {
    let a = ts.alpha();
    let mut acc = 0.0;
    for w in ls.lines() {
        acc -= w * a * (w * a * lag).sin();
    }
    acc / ls.pair_count() as f64
}

/// Lower estimate of the kernel's global slope `sup |d/dt Re{m}|` by dense
/// grid maximization over `[0, horizon]`. Refining the grid (halving
/// `grid_step`) never decreases the estimate; `slope_upper_cap` bounds it
/// from above.
pub fn kernel_slope(
    ls: &FrequencyLineSet,
    ts: &TimeScale,
    grid_step: f64,
    horizon: f64,
) -> Result<f64> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return invalid(format!("grid_step must be positive, got {grid_step}"));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return invalid(format!("horizon must be positive, got {horizon}"));
    }
    let n = (horizon / grid_step).floor() as usize;
    let mut best = 0.0_f64;
    for k in 0..=n {
        let d = kernel_re_derivative(ls, ts, k as f64 * grid_step).abs();
        if d > best {
            best = d;
        }
    }
    Ok(best)
}

/// Default maximization horizon: two periods of the slowest line.
pub fn default_slope_horizon(ls: &FrequencyLineSet, ts: &TimeScale) -> f64 {
    4.0 * core::f64::consts::PI / (ts.alpha() * ls.slowest())
}

/// Triangle-inequality cap on the kernel slope: `(1/m) sum_i w_i a`.
pub fn slope_upper_cap(ls: &FrequencyLineSet, ts: &TimeScale) -> f64 {
    ts.alpha() * ls.lines().iter().sum::<f64>() / ls.pair_count() as f64
}

/// Exact spectral Lipschitz constant `a * sum_i w_i |C_i|` for the rotated
/// logit. Dominates every finite-difference slope of the exact logit.
pub fn exact_lipschitz_bound(
    coeffs: &ComplexCoefficients,
    ls: &FrequencyLineSet,
    ts: &TimeScale,
) -> Result<f64> {
    coeffs.check_len(ls.pair_count())?;
    Ok(ts.alpha()
        * coeffs
            .values()
            .iter()
            .zip(ls.lines())
            .map(|(c, w)| w * c.norm())
            .sum::<f64>())
}

/// Coefficient sampler for the finite-size study: real parts uniform on
/// `[0.5, 1.5]`, imaginary parts uniform on `[-0.5, 0.5]`. Unit mean,
/// bounded variance, no content-frequency coupling.
fn sample_coefficients(rng: &mut ChaCha8Rng, pair_count: usize) -> Vec<Complex64> {
    (0..pair_count)
        .map(|_| Complex64::new(rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5)))
        .collect()
}

/// Finite-size deviation between the normalized rotated sum and the kernel.
///
/// For each pair count `m`, draws `trials` coefficient sets, computes the
/// sup over the lag grid of `|S_lag/S_0 - m_m(lag)|`, and reports the
/// median, mean, and standard deviation of those sup errors. A log-log fit
/// of the median against `m` estimates the concentration exponent
/// (`slope_vs_m` in the report metadata).
pub fn modulation_approx_error(
    ls: &FrequencyLineSet,
    ts: &TimeScale,
    seed: u64,
    pair_counts: &[usize],
    lag_grid: &[f64],
    trials: usize,
) -> Result<SweepReport> {
    if pair_counts.is_empty() {
        return invalid("pair_counts must be nonempty");
    }
    if !pair_counts.windows(2).all(|p| p[0] < p[1]) {
        return invalid("pair_counts must be strictly increasing");
    }
    if lag_grid.is_empty() {
        return invalid("lag grid must be nonempty");
    }
    if trials == 0 {
        return invalid("trials must be at least 1");
    }

    let a = ts.alpha();
    let mut medians = Vec::with_capacity(pair_counts.len());
    let mut means = Vec::with_capacity(pair_counts.len());
    let mut stds = Vec::with_capacity(pair_counts.len());

    for (mi, &m) in pair_counts.iter().enumerate() {
        let sub = FrequencyLineSet::geometric(m, ls.base())?;
        // Phasor tables reused across trials of this pair count.
        let phases: Vec<Vec<Complex64>> = lag_grid
            .iter()
            .map(|&lag| {
                sub.lines()
                    .iter()
                    .map(|w| {
                        let (s, c) = (w * a * lag).sin_cos();
                        Complex64::new(c, s)
                    })
                    .collect()
            })
            .collect();
        let kernel_vals: Vec<Complex64> = phases
            .iter()
            .map(|row| row.iter().sum::<Complex64>() / m as f64)
            .collect();

        let mut sups = Vec::with_capacity(trials);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((mi as u64) << 32));
        for _ in 0..trials {
            let coeffs = sample_coefficients(&mut rng, m);
            let s0: Complex64 = coeffs.iter().sum();
            let mut sup = 0.0_f64;
            for (row, k) in phases.iter().zip(kernel_vals.iter()) {
                let mut s = Complex64::new(0.0, 0.0);
                for (c, p) in coeffs.iter().zip(row.iter()) {
                    s += c * p;
                }
                let dev = (s / s0 - k).norm();
                if dev > sup {
                    sup = dev;
                }
            }
            sups.push(sup);
        }
        medians.push(stats::median(&sups));
        means.push(stats::mean(&sups));
        stds.push(stats::sample_std(&sups));
    }

    let axis: Vec<f64> = pair_counts.iter().map(|&m| m as f64).collect();
    let slope = stats::loglog_slope(&axis, &medians);
    let mut report = SweepReport::new("pair_count", axis);
    report.push_metric("sup_err_median", medians)?;
    report.push_metric("sup_err_mean", means)?;
    report.push_metric("sup_err_std", stds)?;
    report.metadata = json!({
        "seed": seed,
        "trials": trials,
        "lag_grid_len": lag_grid.len(),
        "base": ls.base(),
        "alpha": ts.alpha(),
        "slope_vs_m": slope,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn bins() -> TimeScale {
        TimeScale::bins()
    }

    #[test]
    fn kernel_at_zero_is_one() {
        for m in [1, 2, 7, 64] {
            let ls = FrequencyLineSet::geometric(m, 10_000.0).unwrap();
            let v = kernel_value(&ls, &bins(), 0.0);
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_line_at_pi_is_minus_one() {
        let ls = FrequencyLineSet::from_lines(vec![1.0], 10.0).unwrap();
        let v = kernel_value(&ls, &bins(), core::f64::consts::PI);
        assert_abs_diff_eq!(v.re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_line_value_matches_complex_sum_oracle() {
        // lines {1, 0.5} at lag pi: (e^{j pi} + e^{j pi/2}) / 2 = (-1 + j)/2
        let ls = FrequencyLineSet::from_lines(vec![1.0, 0.5], 10.0).unwrap();
        let v = kernel_value(&ls, &bins(), core::f64::consts::PI);
        assert_abs_diff_eq!(v.re, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn eval_kernel_validates_grid() {
        let ls = FrequencyLineSet::geometric(4, 100.0).unwrap();
        assert!(eval_kernel(&ls, &bins(), &[]).is_err());
        assert!(eval_kernel(&ls, &bins(), &[1.0, 0.5]).is_err());
        assert!(eval_kernel(&ls, &bins(), &[0.0, 0.0]).is_err());
        assert!(eval_kernel(&ls, &bins(), &[0.0, 1.0, 2.0]).is_ok());
    }

    #[test]
    fn conjugate_symmetry_on_symmetric_grid() {
        let ls = FrequencyLineSet::geometric(16, 10_000.0).unwrap();
        let lags: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.25).collect();
        let grid = eval_kernel(&ls, &bins(), &lags).unwrap();
        let n = grid.len();
        for i in 0..n {
            let a = grid.values()[i];
            let b = grid.values()[n - 1 - i];
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, -b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotated_logit_uniform_coefficients_collapse_to_kernel() {
        let ls = FrequencyLineSet::geometric(8, 1000.0).unwrap();
        let c = ComplexCoefficients::uniform(8, Complex64::new(0.125, 0.0));
        for lag in [0.0, 0.7, 3.2, -5.5] {
            let lhs = rotated_logit(&c, &ls, &bins(), lag).unwrap();
            let rhs = kernel_value(&ls, &bins(), lag).re;
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotated_logit_at_zero_is_unrotated_sum() {
        let ls = FrequencyLineSet::geometric(3, 50.0).unwrap();
        let c = ComplexCoefficients::new(vec![
            Complex64::new(1.0, 2.0),
            Complex64::new(-0.5, 0.25),
            Complex64::new(0.0, -1.0),
        ]);
        let expect: f64 = c.values().iter().map(|z| z.re).sum();
        assert_abs_diff_eq!(rotated_logit(&c, &ls, &bins(), 0.0).unwrap(), expect);
    }

    #[test]
    fn rotated_logit_rejects_length_mismatch() {
        let ls = FrequencyLineSet::geometric(4, 100.0).unwrap();
        let c = ComplexCoefficients::uniform(3, Complex64::new(1.0, 0.0));
        assert!(rotated_logit(&c, &ls, &bins(), 1.0).is_err());
    }

    #[test]
    fn single_line_slope_is_one() {
        let ls = FrequencyLineSet::from_lines(vec![1.0], 10.0).unwrap();
        let s = kernel_slope(&ls, &bins(), 1e-3, 2.0 * core::f64::consts::PI).unwrap();
        assert_relative_eq!(s, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn slope_estimate_below_cap_and_monotone_in_refinement() {
        let ls = FrequencyLineSet::geometric(12, 10_000.0).unwrap();
        let ts = bins();
        let horizon = 40.0;
        let coarse = kernel_slope(&ls, &ts, 0.08, horizon).unwrap();
        let fine = kernel_slope(&ls, &ts, 0.04, horizon).unwrap();
        assert!(fine >= coarse);
        assert!(fine <= slope_upper_cap(&ls, &ts) + 1e-12);
    }

    #[test]
    fn lipschitz_bound_direct_values() {
        let ls = FrequencyLineSet::from_lines(vec![2.0], 10.0).unwrap();
        let zero = ComplexCoefficients::uniform(1, Complex64::new(0.0, 0.0));
        assert_eq!(exact_lipschitz_bound(&zero, &ls, &bins()).unwrap(), 0.0);
        let c = ComplexCoefficients::uniform(1, Complex64::new(0.0, 3.0));
        assert_abs_diff_eq!(exact_lipschitz_bound(&c, &ls, &bins()).unwrap(), 6.0);
    }

    #[test]
    fn lipschitz_bound_dominates_finite_differences() {
        use rand::Rng;
        let ls = FrequencyLineSet::geometric(16, 10_000.0).unwrap();
        let ts = bins();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coeffs = ComplexCoefficients::new(sample_coefficients(&mut rng, 16));
        let bound = exact_lipschitz_bound(&coeffs, &ls, &ts).unwrap();
        for _ in 0..10_000 {
            let lag = rng.gen_range(-30.0..30.0);
            let dt: f64 = rng.gen_range(-0.1..0.1);
            if dt.abs() < 1e-9 {
                continue;
            }
            let a = rotated_logit(&coeffs, &ls, &ts, lag).unwrap();
            let b = rotated_logit(&coeffs, &ls, &ts, lag + dt).unwrap();
            assert!((b - a).abs() <= bound * dt.abs() + 1e-9);
        }
    }

    #[test]
    fn approx_error_zero_variance_and_zero_lag() {
        let ls = FrequencyLineSet::geometric(64, 10_000.0).unwrap();
        let ts = bins();
        // Degenerate grid {0}: S_0/S_0 - m(0) = 0 for every draw.
        let rep = modulation_approx_error(&ls, &ts, 3, &[8, 16], &[0.0], 5).unwrap();
        for v in rep.metric("sup_err_median").unwrap() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
        // Equal coefficients: the decomposition vanishes identically.
        let lines = FrequencyLineSet::geometric(8, 10_000.0).unwrap();
        let c = ComplexCoefficients::uniform(8, Complex64::new(1.0, 0.0));
        let s0: Complex64 = c.values().iter().sum();
        for lag in [0.5, 2.0, 9.0] {
            let s: Complex64 = c
                .values()
                .iter()
                .zip(lines.lines())
                .map(|(ci, w)| {
                    let (si, co) = (w * lag).sin_cos();
                    ci * Complex64::new(co, si)
                })
                .sum();
            let dev = (s / s0 - kernel_value(&lines, &ts, lag)).norm();
            assert_abs_diff_eq!(dev, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn approx_error_median_shrinks_like_inverse_sqrt() {
        let ls = FrequencyLineSet::geometric(64, 10_000.0).unwrap();
        let lag_grid: Vec<f64> = (1..=32).map(|k| k as f64 * 0.9).collect();
        let rep =
            modulation_approx_error(&ls, &bins(), 7, &[64, 128], &lag_grid, 120).unwrap();
        let med = rep.metric("sup_err_median").unwrap();
        let ratio = med[1] / med[0];
        // Doubling m should shrink the median by roughly 1/sqrt(2).
        assert!(
            ratio > 0.55 && ratio < 0.90,
            "median ratio {ratio} outside the 1/sqrt(2) band"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn kernel_magnitude_never_exceeds_one(
            m in 1usize..96,
            base in 2.0f64..50_000.0,
            lag in -200.0f64..200.0,
            alpha in 0.1f64..8.0,
        ) {
            let ls = FrequencyLineSet::geometric(m, base).unwrap();
            let ts = TimeScale::bins_scaled(alpha).unwrap();
            let v = kernel_value(&ls, &ts, lag);
            prop_assert!(v.norm() <= 1.0 + 1e-12);
        }
    }
}
