//! Domain types for the array under test, its per-channel imbalances, the
//! far-field calibration source, and the periodic 1-bit modulation waveforms.
//!
//! Phases are radians everywhere in this module. Amplitudes are linear.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, RhevError};
use crate::seed::rng_from_seed;
use crate::units::{db_to_amplitude, wrap_phase};

/// Amplitude/phase response of one RF channel plus the errors of its 1-bit
/// phase shifter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelResponse {
    amplitude: f64,
    phase: f64,
    /// Deviation of the nominal 0° state.
    pub state0_error: f64,
    /// Deviation of the nominal 180° state.
    pub state1_error: f64,
}

impl ChannelResponse {
    pub fn new(amplitude: f64, phase: f64) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(RhevError::InvalidArray(format!(
                "channel amplitude must be positive and finite, got {amplitude}"
            )));
        }
        if !phase.is_finite() {
            return Err(RhevError::InvalidArray(
                "channel phase must be finite".into(),
            ));
        }
        Ok(Self {
            amplitude,
            phase: wrap_phase(phase),
            state0_error: 0.0,
            state1_error: 0.0,
        })
    }

    pub fn ideal() -> Self {
        Self {
            amplitude: 1.0,
            phase: 0.0,
            state0_error: 0.0,
            state1_error: 0.0,
        }
    }

    pub fn with_state_errors(mut self, state0_error: f64, state1_error: f64) -> Self {
        self.state0_error = state0_error;
        self.state1_error = state1_error;
        self
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Phase in `[-π, π)`.
    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// `A·e^{jφ}`.
    pub fn complex(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }

    /// 1-bit differential error `e1 − e0`.
    pub fn shifter_delta(&self) -> f64 {
        self.state1_error - self.state0_error
    }

    /// Realized phasor of a static shifter state, including its error.
    pub fn state_phasor(&self, state: ShifterState) -> Complex64 {
        match state {
            ShifterState::Zero => Complex64::from_polar(1.0, self.state0_error),
            ShifterState::Pi => Complex64::from_polar(1.0, PI + self.state1_error),
        }
    }
}

/// Amplitude ratio and phase difference of a channel relative to the
/// reference channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelImbalance {
    pub channel: usize,
    pub amplitude_ratio: f64,
    /// Radians, wrapped to `[-π, π)`.
    pub phase_difference: f64,
}

/// Uniform linear array under test.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayUnderTest {
    spacing: f64,
    channels: Vec<ChannelResponse>,
    reference_index: usize,
}

impl ArrayUnderTest {
    pub const DEFAULT_SPACING: f64 = 0.5;

    /// Builds an array from explicit channel responses, reference channel 0.
    ///
    /// A single-element array is accepted so patterns and streams of a lone
    /// element can be evaluated; calibration needs at least two.
    pub fn new(channels: Vec<ChannelResponse>, spacing: f64) -> Result<Self> {
        if channels.is_empty() {
            return Err(RhevError::InvalidArray("array has no elements".into()));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(RhevError::InvalidArray(format!(
                "element spacing must be positive, got {spacing}"
            )));
        }
        Ok(Self {
            spacing,
            channels,
            reference_index: 0,
        })
    }

    /// `n` identical ideal channels.
    pub fn uniform(n: usize, spacing: f64) -> Result<Self> {
        Self::new(vec![ChannelResponse::ideal(); n], spacing)
    }

    pub fn with_reference(mut self, reference_index: usize) -> Result<Self> {
        if reference_index >= self.channels.len() {
            return Err(RhevError::InvalidArray(format!(
                "reference index {reference_index} out of range for {} elements",
                self.channels.len()
            )));
        }
        self.reference_index = reference_index;
        Ok(self)
    }

    pub fn element_count(&self) -> usize {
        self.channels.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn channels(&self) -> &[ChannelResponse] {
        &self.channels
    }

    pub fn channel(&self, index: usize) -> &ChannelResponse {
        &self.channels[index]
    }

    pub fn channel_mut(&mut self, index: usize) -> &mut ChannelResponse {
        &mut self.channels[index]
    }

    pub fn set_channel(&mut self, index: usize, response: ChannelResponse) {
        self.channels[index] = response;
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    /// Carrier power of the reference channel, `A_ref²`.
    pub fn reference_power(&self) -> f64 {
        self.channels[self.reference_index].amplitude.powi(2)
    }

    /// Spatial phase `k·d·n·sinθ` of element `index` for a source direction.
    pub fn geometric_phase(&self, index: usize, angle: f64) -> f64 {
        2.0 * PI * self.spacing * index as f64 * angle.sin()
    }

    /// Complex excitation `A_n·e^{j(φ_n + k·d·n·sinθ)}` seen from `source`.
    pub fn incident_excitation(&self, index: usize, source: &IncidentSource) -> Complex64 {
        let ch = &self.channels[index];
        Complex64::from_polar(
            ch.amplitude * source.power.sqrt(),
            ch.phase + self.geometric_phase(index, source.incident_angle),
        )
    }

    /// Copy with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                ChannelResponse::new(c.amplitude * factor, c.phase)
                    .map(|r| r.with_state_errors(c.state0_error, c.state1_error))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            channels,
            ..self.clone()
        })
    }

    /// Applies the same 1-bit shifter errors to every channel.
    pub fn with_common_state_errors(mut self, state0_error: f64, state1_error: f64) -> Self {
        for c in &mut self.channels {
            c.state0_error = state0_error;
            c.state1_error = state1_error;
        }
        self
    }

    /// True imbalance of every non-reference channel.
    pub fn true_imbalances(&self) -> Vec<ChannelImbalance> {
        let r = &self.channels[self.reference_index];
        self.channels
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.reference_index)
            .map(|(i, c)| ChannelImbalance {
                channel: i,
                amplitude_ratio: c.amplitude / r.amplitude,
                phase_difference: wrap_phase(c.phase - r.phase),
            })
            .collect()
    }
}

/// Far-field calibration source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentSource {
    /// Hz.
    pub carrier_frequency: f64,
    /// Radians from broadside.
    pub incident_angle: f64,
    /// Linear scale applied to received power.
    pub power: f64,
}

impl IncidentSource {
    pub fn new(carrier_frequency: f64, incident_angle: f64, power: f64) -> Result<Self> {
        if !(carrier_frequency > 0.0) {
            return Err(RhevError::Config(format!(
                "carrier frequency must be positive, got {carrier_frequency}"
            )));
        }
        if !(incident_angle.abs() < PI / 2.0) {
            return Err(RhevError::Config(format!(
                "incident angle must lie strictly inside ±90°, got {} rad",
                incident_angle
            )));
        }
        if !(power > 0.0) {
            return Err(RhevError::Config(format!(
                "source power must be positive, got {power}"
            )));
        }
        Ok(Self {
            carrier_frequency,
            incident_angle,
            power,
        })
    }
}

impl Default for IncidentSource {
    /// 2 GHz at broadside, unit power.
    fn default() -> Self {
        Self {
            carrier_frequency: 2.0e9,
            incident_angle: 0.0,
            power: 1.0,
        }
    }
}

/// Nominal state of a 1-bit phase shifter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShifterState {
    Zero,
    Pi,
}

/// Periodic 0°/180° switching waveform with a programmable delay.
///
/// Over one period the waveform is `e^{j·e0}` on the first half and
/// `e^{j(π + e1)}` on the second, circularly shifted by `delay_fraction·T_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationWaveform {
    period: f64,
    delay_fraction: f64,
    pub state0_error: f64,
    pub state1_error: f64,
}

impl ModulationWaveform {
    pub fn new(period: f64, delay_fraction: f64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(RhevError::Config(format!(
                "modulation period must be positive, got {period}"
            )));
        }
        if !(0.0..1.0).contains(&delay_fraction) {
            return Err(RhevError::Config(format!(
                "normalized delay must lie in [0, 1), got {delay_fraction}"
            )));
        }
        Ok(Self {
            period,
            delay_fraction,
            state0_error: 0.0,
            state1_error: 0.0,
        })
    }

    /// Waveform driving `channel`'s shifter, inheriting its state errors.
    pub fn for_channel(
        channel: &ChannelResponse,
        period: f64,
        delay_fraction: f64,
    ) -> Result<Self> {
        Ok(Self::new(period, delay_fraction)?
            .with_state_errors(channel.state0_error, channel.state1_error))
    }

    pub fn with_state_errors(mut self, state0_error: f64, state1_error: f64) -> Self {
        self.state0_error = state0_error;
        self.state1_error = state1_error;
        self
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn delay_fraction(&self) -> f64 {
        self.delay_fraction
    }

    /// Value at normalized time `u = t / T_p`.
    pub fn value_at_fraction(&self, u: f64) -> Complex64 {
        let local = (u - self.delay_fraction).rem_euclid(1.0);
        if local < 0.5 {
            Complex64::from_polar(1.0, self.state0_error)
        } else {
            Complex64::from_polar(1.0, PI + self.state1_error)
        }
    }

    /// Value at time `t` in seconds.
    pub fn value_at(&self, t: f64) -> Complex64 {
        self.value_at_fraction(t / self.period)
    }
}

/// What each channel's shifter does during a measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelDrive {
    /// Held in one of the two 1-bit states.
    Static(ShifterState),
    /// Held at an arbitrary realized phase (multi-bit shifter, used by REV).
    Rotated(f64),
    /// Periodically toggled.
    Modulated(ModulationWaveform),
}

/// Per-channel drive plan for one measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSchedule {
    drives: Vec<ChannelDrive>,
    modulation_frequency: f64,
}

impl ModulationSchedule {
    /// All modulated entries must share one period.
    pub fn new(drives: Vec<ChannelDrive>, modulation_frequency: f64) -> Result<Self> {
        if !(modulation_frequency > 0.0) {
            return Err(RhevError::Config(format!(
                "modulation frequency must be positive, got {modulation_frequency}"
            )));
        }
        let period = 1.0 / modulation_frequency;
        for d in &drives {
            if let ChannelDrive::Modulated(w) = d {
                if ((w.period - period) / period).abs() > 1e-12 {
                    return Err(RhevError::Config(format!(
                        "modulated channel period {} s differs from the schedule period {} s",
                        w.period, period
                    )));
                }
            }
        }
        Ok(Self {
            drives,
            modulation_frequency,
        })
    }

    /// Every channel static in state 0.
    pub fn all_static(n: usize, modulation_frequency: f64) -> Result<Self> {
        Self::new(
            vec![ChannelDrive::Static(ShifterState::Zero); n],
            modulation_frequency,
        )
    }

    /// Reference modulated at zero delay and `test` modulated at `delay_fraction`;
    /// every other channel static in state 0.
    pub fn two_channel(
        aut: &ArrayUnderTest,
        test: usize,
        delay_fraction: f64,
        modulation_frequency: f64,
    ) -> Result<Self> {
        let reference = aut.reference_index();
        if test >= aut.element_count() || test == reference {
            return Err(RhevError::Config(format!(
                "test channel {test} must differ from the reference and lie inside the array"
            )));
        }
        let period = 1.0 / modulation_frequency;
        let mut drives = vec![ChannelDrive::Static(ShifterState::Zero); aut.element_count()];
        drives[reference] = ChannelDrive::Modulated(ModulationWaveform::for_channel(
            aut.channel(reference),
            period,
            0.0,
        )?);
        drives[test] = ChannelDrive::Modulated(ModulationWaveform::for_channel(
            aut.channel(test),
            period,
            delay_fraction,
        )?);
        Self::new(drives, modulation_frequency)
    }

    /// Only `channel` modulated, at zero delay.
    pub fn single_channel(
        aut: &ArrayUnderTest,
        channel: usize,
        modulation_frequency: f64,
    ) -> Result<Self> {
        if channel >= aut.element_count() {
            return Err(RhevError::Config(format!(
                "channel {channel} outside the array"
            )));
        }
        let mut drives = vec![ChannelDrive::Static(ShifterState::Zero); aut.element_count()];
        drives[channel] = ChannelDrive::Modulated(ModulationWaveform::for_channel(
            aut.channel(channel),
            1.0 / modulation_frequency,
            0.0,
        )?);
        Self::new(drives, modulation_frequency)
    }

    pub fn drives(&self) -> &[ChannelDrive] {
        &self.drives
    }

    pub fn len(&self) -> usize {
        self.drives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drives.is_empty()
    }

    pub fn modulation_frequency(&self) -> f64 {
        self.modulation_frequency
    }

    pub fn modulated_count(&self) -> usize {
        self.drives
            .iter()
            .filter(|d| matches!(d, ChannelDrive::Modulated(_)))
            .count()
    }
}

/// Random preset imbalances around an ideal reference channel.
///
/// Channel 0 is the reference with `A = 1`, `φ = 0`. Every other channel draws
/// its amplitude uniformly in `±amp_spread_db/2` dB and its phase uniformly in
/// `±phase_spread_deg/2` degrees.
pub fn preset_array(
    n: usize,
    amp_spread_db: f64,
    phase_spread_deg: f64,
    seed: u64,
) -> Result<ArrayUnderTest> {
    if n < 2 {
        return Err(RhevError::InvalidArray(format!(
            "need at least 2 elements, got {n}"
        )));
    }
    if !(amp_spread_db >= 0.0) || !(phase_spread_deg >= 0.0) {
        return Err(RhevError::InvalidArray(
            "imbalance spreads must be non-negative".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let half_amp = amp_spread_db / 2.0;
    let half_phase = (phase_spread_deg / 2.0).to_radians();
    let mut channels = Vec::with_capacity(n);
    channels.push(ChannelResponse::ideal());
    for _ in 1..n {
        // Uniform on the closed interval so a zero spread yields exactly 0.
        let a_db = rng.random_range(-half_amp..=half_amp);
        let ph = rng.random_range(-half_phase..=half_phase);
        channels.push(ChannelResponse::new(db_to_amplitude(a_db), ph)?);
    }
    ArrayUnderTest::new(channels, ArrayUnderTest::DEFAULT_SPACING)
}

/// Rounds a normalized delay to the `2^-bits` grid, modulo one period.
pub fn quantize_delay(eta: f64, bits: u32) -> f64 {
    let steps = (1u64 << bits) as f64;
    ((eta * steps).round() / steps).rem_euclid(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spread_preset_is_ideal() {
        let aut = preset_array(8, 0.0, 0.0, 7).unwrap();
        for c in aut.channels() {
            assert_eq!(c.amplitude(), 1.0);
            assert_eq!(c.phase(), 0.0);
        }
    }

    #[test]
    fn preset_is_seed_deterministic() {
        let a = preset_array(8, 3.0, 40.0, 42).unwrap();
        let b = preset_array(8, 3.0, 40.0, 42).unwrap();
        let c = preset_array(8, 3.0, 40.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.channel(1).phase(), c.channel(1).phase());
    }

    #[test]
    fn preset_respects_spreads() {
        let aut = preset_array(64, 3.0, 40.0, 1).unwrap();
        assert_eq!(aut.channel(0).amplitude(), 1.0);
        for c in &aut.channels()[1..] {
            assert!(crate::units::amplitude_to_db(c.amplitude()).abs() <= 1.5 + 1e-12);
            assert!(c.phase().abs() <= 20f64.to_radians() + 1e-12);
        }
    }

    #[test]
    fn preset_rejects_single_element() {
        assert!(matches!(
            preset_array(1, 0.0, 0.0, 0),
            Err(RhevError::InvalidArray(_))
        ));
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_delay(0.06, 6), 0.0625);
        assert_eq!(quantize_delay(0.5, 1), 0.5);
        assert_eq!(quantize_delay(0.999, 6), 0.0);
    }

    #[test]
    fn ideal_waveform_is_plus_minus_one() {
        let w = ModulationWaveform::new(1e-7, 0.25).unwrap();
        for i in 0..400 {
            let v = w.value_at_fraction(i as f64 / 400.0);
            assert!((v.re.abs() - 1.0).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
        assert!((w.value_at_fraction(0.3).re - 1.0).abs() < 1e-15);
        assert!((w.value_at_fraction(0.8).re + 1.0).abs() < 1e-15);
        assert!((w.value_at_fraction(0.1).re + 1.0).abs() < 1e-15);
    }

    #[test]
    fn schedule_rejects_mismatched_periods() {
        let w = ModulationWaveform::new(1e-6, 0.0).unwrap();
        let r = ModulationSchedule::new(vec![ChannelDrive::Modulated(w)], 10e6);
        assert!(matches!(r, Err(RhevError::Config(_))));
    }

    #[test]
    fn channel_phase_is_wrapped() {
        let c = ChannelResponse::new(1.0, 3.5 * PI).unwrap();
        assert!((c.phase() + 0.5 * PI).abs() < 1e-12);
        assert!(ChannelResponse::new(0.0, 0.0).is_err());
    }

    #[test]
    fn source_validation() {
        assert!(IncidentSource::new(0.0, 0.0, 1.0).is_err());
        assert!(IncidentSource::new(1e9, PI / 2.0, 1.0).is_err());
        assert!(IncidentSource::new(1e9, 0.3, 1.0).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quantize_is_idempotent_and_bounded(eta in 0.0f64..1.0, bits in 1u32..12) {
                let q = quantize_delay(eta, bits);
                prop_assert_eq!(quantize_delay(q, bits), q);
                let step = 1.0 / (1u64 << bits) as f64;
                let err = (q - eta).rem_euclid(1.0);
                let err = err.min(1.0 - err);
                prop_assert!(err <= step / 2.0 + 1e-15);
                prop_assert!((0.0..1.0).contains(&q));
            }
        }
    }
}
