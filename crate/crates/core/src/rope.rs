//! Temporal rotary frequency line sets and time scales.
//!
//! A line set holds the angular frequencies of the rotary pairs along the
//! temporal axis, highest frequency first. The standard geometric schedule
//! `omega_i = base^(-2i/d)` with `d = 2 * pair_count` puts `omega_0 = 1` and
//! spreads the remaining lines over roughly `log10(base)` decades.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Unit of the time coordinate fed to kernels and rotations.
///
/// One bin is one position unit by convention. Frame and second scales are
/// expressed through [`TimeScale::alpha`], supplied by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Bin,
    Frame,
    Second,
}

/// Conversion from time units to rotary position units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScale {
    alpha: f64,
    unit: TimeUnit,
}

impl TimeScale {
    pub fn new(alpha: f64, unit: TimeUnit) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return invalid(format!("time scale alpha must be positive, got {alpha}"));
        }
        Ok(Self { alpha, unit })
    }

    /// One position unit per bin.
    pub fn bins() -> Self {
        Self { alpha: 1.0, unit: TimeUnit::Bin }
    }

    /// Bin-unit scale with an explicit position-units-per-bin factor.
    pub fn bins_scaled(alpha: f64) -> Result<Self> {
        Self::new(alpha, TimeUnit::Bin)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }
}

impl Default for TimeScale {
    fn default() -> Self {
        Self::bins()
    }
}

/// Ordered set of temporal rotary frequencies, strictly decreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyLineSet {
    base: f64,
    pair_count: usize,
    lines: Vec<f64>,
}

impl FrequencyLineSet {
    /// Standard rotary schedule: `omega_i = base^(-2i/(2*pair_count))`.
    pub fn geometric(pair_count: usize, base: f64) -> Result<Self> {
        if pair_count == 0 {
            return invalid("pair_count must be at least 1");
        }
        if !(base.is_finite() && base > 1.0) {
            return invalid(format!("rotary base must be finite and > 1, got {base}"));
        }
        let m = pair_count as f64;
        let lines = (0..pair_count)
            .map(|i| base.powf(-(i as f64) / m))
            .collect();
        Ok(Self { base, pair_count, lines })
    }

    /// Line set from explicit frequencies (used for hand-built spectra).
    pub fn from_lines(lines: Vec<f64>, base: f64) -> Result<Self> {
        if lines.is_empty() {
            return invalid("line set must contain at least one frequency");
        }
        if !lines.iter().all(|w| w.is_finite() && *w > 0.0) {
            return invalid("all frequencies must be positive and finite");
        }
        if !lines.windows(2).all(|p| p[0] > p[1]) {
            return invalid("frequencies must be strictly decreasing");
        }
        let pair_count = lines.len();
        Ok(Self { base, pair_count, lines })
    }

    pub fn lines(&self) -> &[f64] {
        &self.lines
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn pair_count(&self) -> usize {
        self.pair_count
    }

    /// Highest frequency in the set (`omega_0`).
    pub fn fastest(&self) -> f64 {
        self.lines[0]
    }

    /// Lowest frequency in the set (`omega_{m-1}`).
    pub fn slowest(&self) -> f64 {
        *self.lines.last().expect("line set is never empty")
    }

    /// Largest sampling period that keeps every scaled line strictly below
    /// the half-sampling frequency: `pi / (alpha * omega_0)`.
    pub fn nyquist_period(&self, ts: &TimeScale) -> f64 {
        core::f64::consts::PI / (ts.alpha() * self.fastest())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("line set serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: LineSetRaw = serde_json::from_str(s)
            .map_err(|e| Error::InvalidArgument(format!("bad line set JSON: {e}")))?;
        let ls = Self::from_lines(raw.lines, raw.base)?;
        if ls.pair_count != raw.pair_count {
            return Err(Error::LengthMismatch { expected: raw.pair_count, got: ls.pair_count });
        }
        Ok(ls)
    }
}

#[derive(Deserialize)]
struct LineSetRaw {
    base: f64,
    pair_count: usize,
    lines: Vec<f64>,
}

/// Per-pair complex content coefficients `C_i = z_i * conj(w_i)`.
///
/// Length is validated against the line set wherever the two meet.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCoefficients {
    values: Vec<Complex64>,
}

impl ComplexCoefficients {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    /// All coefficients equal to `c`.
    pub fn uniform(pair_count: usize, c: Complex64) -> Self {
        Self { values: vec![c; pair_count] }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.values.len() != expected {
            return Err(Error::LengthMismatch { expected, got: self.values.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_pair_is_unit_line() {
        let ls = FrequencyLineSet::geometric(1, 10_000.0).unwrap();
        assert_eq!(ls.lines(), &[1.0]);
    }

    #[test]
    fn two_pairs_match_schedule() {
        let ls = FrequencyLineSet::geometric(2, 10_000.0).unwrap();
        assert_eq!(ls.lines()[0], 1.0);
        assert_relative_eq!(ls.lines()[1], 10_000.0_f64.powf(-0.5), max_relative = 1e-15);
    }

    #[test]
    fn sixty_four_lines_strictly_decreasing_positive() {
        let ls = FrequencyLineSet::geometric(64, 10_000.0).unwrap();
        assert_eq!(ls.pair_count(), 64);
        assert!(ls.lines().iter().all(|w| *w > 0.0));
        assert!(ls.lines().windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(FrequencyLineSet::geometric(0, 10_000.0).is_err());
        assert!(FrequencyLineSet::geometric(4, 1.0).is_err());
        assert!(FrequencyLineSet::geometric(4, -2.0).is_err());
        assert!(TimeScale::new(0.0, TimeUnit::Bin).is_err());
        assert!(TimeScale::new(f64::NAN, TimeUnit::Bin).is_err());
    }

    #[test]
    fn nyquist_period_direct_values() {
        let one = FrequencyLineSet::from_lines(vec![1.0], 10_000.0).unwrap();
        let ts1 = TimeScale::bins();
        let ts2 = TimeScale::bins_scaled(2.0).unwrap();
        assert_relative_eq!(one.nyquist_period(&ts1), core::f64::consts::PI);
        assert_relative_eq!(one.nyquist_period(&ts2), core::f64::consts::PI / 2.0);
        let half = FrequencyLineSet::from_lines(vec![0.5], 10_000.0).unwrap();
        assert_relative_eq!(half.nyquist_period(&ts1), 2.0 * core::f64::consts::PI);
    }

    #[test]
    fn nyquist_period_homogeneous_in_alpha() {
        let ls = FrequencyLineSet::geometric(16, 500.0).unwrap();
        for a in [0.25, 1.0, 3.5] {
            let t1 = TimeScale::bins_scaled(a).unwrap();
            let t2 = TimeScale::bins_scaled(2.0 * a).unwrap();
            assert_eq!(ls.nyquist_period(&t1) / 2.0, ls.nyquist_period(&t2));
        }
    }

    #[test]
    fn json_round_trip_matches_schema() {
        let ls = FrequencyLineSet::geometric(3, 100.0).unwrap();
        let json = ls.to_json();
        assert!(json.starts_with("{\"base\":100.0,\"pair_count\":3,\"lines\":["));
        let back = FrequencyLineSet::from_json(&json).unwrap();
        assert_eq!(back, ls);
    }
}
