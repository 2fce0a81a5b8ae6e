//! Monte Carlo scenarios, RMSE sweeps and beam-pattern evaluation.

mod montecarlo;
mod pattern;

pub use montecarlo::{monte_carlo, sweep_scenario, trial_errors, RmsePoint, RmseReport, SweepAxis};
pub use pattern::{
    array_factor, compensation_weights, default_angle_grid, steering_weights,
    weights_from_imbalances, PatternReport,
};

use crate::array::{ArrayUnderTest, IncidentSource};
use crate::calibration::{AmplitudeSource, PhaseEstimator};
use crate::error::{Result, RhevError};
use crate::signal::SamplingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rhev,
    Rev,
}

/// 1-bit shifter error applied to the simulated hardware.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ErrorModel {
    #[default]
    None,
    /// Every channel's π state is off by the same angle (radians).
    Common(f64),
    /// Each channel's π state error drawn uniformly from `±max` per trial.
    PerChannel(f64),
}

/// Everything needed to run one Monte Carlo point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub elements: usize,
    /// Wavelengths.
    pub spacing: f64,
    /// Full width of the uniform amplitude spread, dB.
    pub amp_spread_db: f64,
    /// Full width of the uniform phase spread, degrees.
    pub phase_spread_deg: f64,
    /// Used for every trial instead of a fresh preset draw.
    pub fixed_array: Option<ArrayUnderTest>,
    pub source: IncidentSource,
    pub sampling: SamplingConfig,
    pub modulation_frequency: f64,
    pub bits: u32,
    pub snr_db: f64,
    pub estimator: PhaseEstimator,
    pub amplitude_source: AmplitudeSource,
    pub method: Method,
    pub trials: usize,
    pub error_model: ErrorModel,
    /// REV only: per-state shifter error bound (radians), drawn once per scenario.
    pub rev_state_error: f64,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            elements: 8,
            spacing: ArrayUnderTest::DEFAULT_SPACING,
            amp_spread_db: 6.0,
            phase_spread_deg: 180.0,
            fixed_array: None,
            source: IncidentSource::default(),
            sampling: SamplingConfig::default(),
            modulation_frequency: 10e6,
            bits: 6,
            snr_db: 20.0,
            estimator: PhaseEstimator::Argmax,
            amplitude_source: AmplitudeSource::Sweep,
            method: Method::Rhev,
            trials: 100,
            error_model: ErrorModel::None,
            rev_state_error: 0.0,
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(RhevError::Config("trials must be at least 1".into()));
        }
        let n = self
            .fixed_array
            .as_ref()
            .map_or(self.elements, |a| a.element_count());
        if n < 2 {
            return Err(RhevError::Config(format!(
                "need at least 2 elements, got {n}"
            )));
        }
        if self.bits == 0 || self.bits > 16 {
            return Err(RhevError::Config(format!(
                "bits must be 1..=16, got {}",
                self.bits
            )));
        }
        if self.snr_db.is_nan() {
            return Err(RhevError::Config("snr_db is NaN".into()));
        }
        if !(self.modulation_frequency > 0.0) {
            return Err(RhevError::Config(
                "modulation frequency must be positive".into(),
            ));
        }
        if !(self.rev_state_error >= 0.0) {
            return Err(RhevError::Config(
                "REV shifter error bound must be non-negative".into(),
            ));
        }
        Ok(())
    }
}
