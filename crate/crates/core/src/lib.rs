//! Numerical toolkit for temporal rotary phase modulation and
//! phase-aggregated smoothing (PAS).
//!
//! The temporal axis of a rotary position embedding compares tokens
//! through phase differences along a finite frequency line set. Averaging
//! those phasors gives a time kernel that multiplies the content dot
//! product of attention; its local slope decides how violently logits
//! react to small timing shifts. PAS assigns small opposed temporal
//! offsets to groups of attention heads (queries only) so that standard
//! head aggregation averages shifted observations of the same kernel:
//! the effective kernel is smoother, while each head's recovered spectrum
//! keeps its magnitudes whenever sampling respects the Nyquist limit.
//!
//! Modules:
//!
//! * [`rope`] - frequency line sets and time scales
//! * [`kernel`] - the time kernel, rotated logits, Lipschitz bounds, and
//!   the finite-size deviation study
//! * [`pas`] - phase configs, the effective kernel, aggregation gain, and
//!   the local variation functional
//! * [`spectral`] - windowed observations, direct DFT analysis,
//!   fractional delays, and magnitude-invariance checks
//! * [`attn`] - a toy multi-head attention simulator with the query-side
//!   phase operator
//! * [`bench`] - a synthetic key-moment retrieval benchmark and the
//!   analytic cost model
//! * [`verify`] - the runnable invariant suite behind `pas verify`

pub mod attn;
pub mod bench;
pub mod error;
pub mod kernel;
pub mod pas;
pub mod report;
pub mod rope;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use rope::{ComplexCoefficients, FrequencyLineSet, TimeScale, TimeUnit};
