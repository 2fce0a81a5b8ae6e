//! TOML run configuration. Every section and key is optional; unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use rhev_core::units::db_to_amplitude;
use rhev_core::{
    AmplitudeSource, ArrayUnderTest, ChannelResponse, ErrorModel, IncidentSource, Method,
    PhaseEstimator, SampleModel, SamplingConfig, Scenario, SweepAxis,
};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub array: ArraySection,
    pub source: SourceSection,
    pub sampling: SamplingSection,
    pub calibration: CalibrationSection,
    pub errors: ErrorSection,
    pub experiment: ExperimentSection,
    pub sweep: SweepSection,
    pub probe: ProbeSection,
    pub pattern: PatternSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub elements: usize,
    pub spacing: f64,
    pub amp_spread_db: f64,
    pub phase_spread_deg: f64,
    /// Explicit imbalances of channels 2..N; the reference is ideal.
    pub gamma_db: Option<Vec<f64>>,
    pub phase_deg: Option<Vec<f64>>,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            elements: 8,
            spacing: 0.5,
            amp_spread_db: 6.0,
            phase_spread_deg: 180.0,
            gamma_db: None,
            phase_deg: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub carrier_hz: f64,
    pub angle_deg: f64,
    pub power: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            carrier_hz: 2e9,
            angle_deg: 0.0,
            power: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    BandLimited,
    Instantaneous,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub samples_per_period: usize,
    pub period_count: usize,
    pub model: ModelName,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            samples_per_period: 64,
            period_count: 16,
            model: ModelName::BandLimited,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorName {
    Argmax,
    CosineFit,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeName {
    Sweep,
    Sequential,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub bits: u32,
    /// `inf` disables noise.
    pub snr_db: f64,
    pub modulation_hz: f64,
    pub estimator: EstimatorName,
    pub amplitude_source: AmplitudeName,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            bits: 6,
            snr_db: 20.0,
            modulation_hz: 10e6,
            estimator: EstimatorName::Argmax,
            amplitude_source: AmplitudeName::Sweep,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMode {
    None,
    Common,
    PerChannel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorSection {
    pub mode: ErrorMode,
    pub magnitude_deg: f64,
    pub rev_state_error_deg: f64,
}

impl Default for ErrorSection {
    fn default() -> Self {
        Self {
            mode: ErrorMode::None,
            magnitude_deg: 0.0,
            rev_state_error_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Rhev,
    Rev,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: usize,
    pub seed: u64,
    pub method: MethodName,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            method: MethodName::Rhev,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AxisName {
    Snr,
    ArraySize,
    Bits,
    PhaseError,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: AxisName,
    /// Empty means a single point at the configured value.
    pub values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: AxisName::Snr,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeSchedule {
    Single,
    Pair,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    /// 1-based; channel 1 is the reference.
    pub channel: usize,
    /// Normalized delay of the test channel for `spectrum`.
    pub delay: f64,
    pub schedule: ProbeSchedule,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            channel: 2,
            delay: 0.0,
            schedule: ProbeSchedule::Pair,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternSection {
    pub steer_deg: f64,
    pub quantize_bits: Option<u32>,
    pub points: usize,
}

impl Default for PatternSection {
    fn default() -> Self {
        Self {
            steer_deg: 0.0,
            quantize_bits: None,
            points: 721,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv],
        }
    }
}

/// Invalid or unreadable configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| format!("line {}: ", text[..s.start].matches('\n').count() + 1))
                .unwrap_or_default();
            ConfigError(format!("{line}{}", one_line(e.message())))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, why: &str| Err(ConfigError(format!("{key}: {why}")));
        let a = &self.array;
        if a.elements < 2 {
            return bad("array.elements", "must be at least 2");
        }
        if !(a.spacing > 0.0) {
            return bad("array.spacing", "must be positive");
        }
        if !(a.amp_spread_db >= 0.0) {
            return bad("array.amp_spread_db", "must be non-negative");
        }
        if !(a.phase_spread_deg >= 0.0) {
            return bad("array.phase_spread_deg", "must be non-negative");
        }
        match (&a.gamma_db, &a.phase_deg) {
            (None, None) => {}
            (Some(g), Some(p)) => {
                if g.len() != a.elements - 1 || p.len() != a.elements - 1 {
                    return bad(
                        "array.gamma_db",
                        &format!(
                            "gamma_db and phase_deg need {} entries (channels 2..N)",
                            a.elements - 1
                        ),
                    );
                }
                if g.iter().chain(p).any(|v| !v.is_finite()) {
                    return bad("array.gamma_db", "explicit imbalances must be finite");
                }
            }
            _ => {
                return bad(
                    "array.gamma_db",
                    "gamma_db and phase_deg must be given together",
                )
            }
        }
        if !(self.source.carrier_hz > 0.0) {
            return bad("source.carrier_hz", "must be positive");
        }
        if !(self.source.power > 0.0) {
            return bad("source.power", "must be positive");
        }
        if !self.source.angle_deg.is_finite() || self.source.angle_deg.abs() > 90.0 {
            return bad("source.angle_deg", "must lie in [-90, 90]");
        }
        if let Err(e) = self.sampling_config() {
            return bad("sampling", &e.to_string());
        }
        let c = &self.calibration;
        if c.bits == 0 || c.bits > 16 {
            return bad("calibration.bits", "must be 1..=16");
        }
        if c.snr_db.is_nan() {
            return bad("calibration.snr_db", "must be a number or inf");
        }
        if !(c.modulation_hz > 0.0) {
            return bad("calibration.modulation_hz", "must be positive");
        }
        if !(self.errors.magnitude_deg.is_finite()) {
            return bad("errors.magnitude_deg", "must be finite");
        }
        if !(self.errors.rev_state_error_deg >= 0.0) {
            return bad("errors.rev_state_error_deg", "must be non-negative");
        }
        if self.experiment.trials == 0 {
            return bad("experiment.trials", "must be at least 1");
        }
        if self.probe.channel < 2 || self.probe.channel > a.elements {
            return bad("probe.channel", &format!("must be in 2..={}", a.elements));
        }
        if !(0.0..1.0).contains(&self.probe.delay) {
            return bad("probe.delay", "must be in [0, 1)");
        }
        if self.pattern.points < 2 {
            return bad("pattern.points", "must be at least 2");
        }
        if !self.pattern.steer_deg.is_finite() || self.pattern.steer_deg.abs() > 90.0 {
            return bad("pattern.steer_deg", "must lie in [-90, 90]");
        }
        if matches!(self.pattern.quantize_bits, Some(b) if b == 0 || b > 16) {
            return bad("pattern.quantize_bits", "must be 1..=16");
        }
        if self.output.formats.is_empty() {
            return bad("output.formats", "must not be empty");
        }
        Ok(())
    }

    pub fn sampling_config(&self) -> rhev_core::Result<SamplingConfig> {
        let model = match self.sampling.model {
            ModelName::BandLimited => SampleModel::BandLimited,
            ModelName::Instantaneous => SampleModel::Instantaneous,
        };
        SamplingConfig::new(
            self.sampling.samples_per_period,
            self.sampling.period_count,
            model,
        )
    }

    pub fn source(&self) -> rhev_core::Result<IncidentSource> {
        IncidentSource::new(
            self.source.carrier_hz,
            self.source.angle_deg.to_radians(),
            self.source.power,
        )
    }

    /// The explicit array when one is configured.
    pub fn explicit_array(&self) -> rhev_core::Result<Option<ArrayUnderTest>> {
        let (Some(g), Some(p)) = (&self.array.gamma_db, &self.array.phase_deg) else {
            return Ok(None);
        };
        let mut channels = vec![ChannelResponse::ideal()];
        for (gdb, pdeg) in g.iter().zip(p) {
            channels.push(ChannelResponse::new(
                db_to_amplitude(*gdb),
                pdeg.to_radians(),
            )?);
        }
        ArrayUnderTest::new(channels, self.array.spacing).map(Some)
    }

    /// Explicit array, or a preset draw from `seed`.
    pub fn array(&self, seed: u64) -> rhev_core::Result<ArrayUnderTest> {
        if let Some(a) = self.explicit_array()? {
            return Ok(a);
        }
        let p = rhev_core::preset_array(
            self.array.elements,
            self.array.amp_spread_db,
            self.array.phase_spread_deg,
            seed,
        )?;
        ArrayUnderTest::new(p.channels().to_vec(), self.array.spacing)
    }

    pub fn estimator(&self) -> PhaseEstimator {
        match self.calibration.estimator {
            EstimatorName::Argmax => PhaseEstimator::Argmax,
            EstimatorName::CosineFit => PhaseEstimator::CosineFit,
        }
    }

    pub fn amplitude_source(&self) -> AmplitudeSource {
        match self.calibration.amplitude_source {
            AmplitudeName::Sweep => AmplitudeSource::Sweep,
            AmplitudeName::Sequential => AmplitudeSource::Sequential,
        }
    }

    pub fn axis(&self) -> SweepAxis {
        match self.sweep.axis {
            AxisName::Snr => SweepAxis::Snr,
            AxisName::ArraySize => SweepAxis::ArraySize,
            AxisName::Bits => SweepAxis::Bits,
            AxisName::PhaseError => SweepAxis::PhaseError,
        }
    }

    /// Sweep values, or the scenario's own value of the axis.
    pub fn sweep_values(&self) -> Vec<f64> {
        if !self.sweep.values.is_empty() {
            return self.sweep.values.clone();
        }
        vec![match self.sweep.axis {
            AxisName::Snr => self.calibration.snr_db,
            AxisName::ArraySize => self.array.elements as f64,
            AxisName::Bits => self.calibration.bits as f64,
            AxisName::PhaseError => self.errors.magnitude_deg,
        }]
    }

    pub fn scenario(&self) -> rhev_core::Result<Scenario> {
        let magnitude = self.errors.magnitude_deg.to_radians();
        Ok(Scenario {
            elements: self.array.elements,
            spacing: self.array.spacing,
            amp_spread_db: self.array.amp_spread_db,
            phase_spread_deg: self.array.phase_spread_deg,
            fixed_array: self.explicit_array()?,
            source: self.source()?,
            sampling: self.sampling_config()?,
            modulation_frequency: self.calibration.modulation_hz,
            bits: self.calibration.bits,
            snr_db: self.calibration.snr_db,
            estimator: self.estimator(),
            amplitude_source: self.amplitude_source(),
            method: match self.experiment.method {
                MethodName::Rhev => Method::Rhev,
                MethodName::Rev => Method::Rev,
            },
            trials: self.experiment.trials,
            error_model: match self.errors.mode {
                ErrorMode::None => ErrorModel::None,
                ErrorMode::Common => ErrorModel::Common(magnitude),
                ErrorMode::PerChannel => ErrorModel::PerChannel(magnitude.abs()),
            },
            rev_state_error: self.errors.rev_state_error_deg.to_radians(),
            seed: self.experiment.seed,
        })
    }
}
