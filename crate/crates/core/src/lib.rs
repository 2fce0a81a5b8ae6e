//! Simulation and estimation toolkit for calibrating phased arrays by time
//! modulation of 1-bit phase shifters.
//!
//! Two channels are toggled between 0 and π at a common rate with a relative
//! delay; the delay rotates the +1st-harmonic vector of one channel against
//! the other, so the harmonic power traces a cosine in the delay whose peak
//! and depth give the channel's phase and amplitude relative to the
//! reference. Single-channel modulation settles the amplitude ambiguity.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod calibration;
pub mod error;
pub mod experiments;
pub mod harmonics;
pub mod rev;
pub mod seed;
pub mod signal;
pub mod units;

pub use array::{
    preset_array, quantize_delay, ArrayUnderTest, ChannelDrive, ChannelImbalance, ChannelResponse,
    IncidentSource, ModulationSchedule, ModulationWaveform, ShifterState,
};
pub use calibration::{
    calibrate_full, estimate_amplitude_ambiguous, estimate_phase, resolve_amplitude, sweep_delay,
    AmplitudeCandidates, AmplitudeSource, Branch, CalibrationOptions, CalibrationResult,
    ChannelEstimate, HarmonicProbe, PhaseEstimator, PowerCurve, ResolvedAmplitude,
};
pub use error::{Result, RhevError};
pub use experiments::{
    array_factor, compensation_weights, monte_carlo, sweep_scenario, ErrorModel, Method,
    PatternReport, RmsePoint, RmseReport, Scenario, SweepAxis,
};
pub use harmonics::{extract_harmonic, fourier_coefficient, spectrum, HarmonicMeasurement};
pub use num_complex::Complex64;
pub use rev::{draw_state_errors, rev_calibrate, rev_estimate, rev_sweep, RevCurve, RevEstimate};
pub use signal::{
    add_noise, synthesize_received, ComplexSampleStream, SampleModel, SamplingConfig,
};
