//! RHEV calibration: delay sweeps of the +1st-harmonic power, phase and
//! ambiguous amplitude estimation from the resulting curve, branch selection
//! from single-channel modulation, and the full two-stage workflow.

use std::f64::consts::PI;

use crate::array::{ArrayUnderTest, ChannelImbalance, IncidentSource, ModulationSchedule};
use crate::error::{Result, RhevError};
use crate::harmonics::extract_harmonic;
use crate::seed::derive_seed;
use crate::signal::{add_noise, synthesize_received, SamplingConfig};
use crate::units::wrap_phase;

/// Below this fraction of the curve maximum the minimum is treated as a
/// complete cancellation.
pub const CANCELLATION_FLOOR: f64 = 1e-12;

/// +1st-harmonic power against normalized delay `η_k = k / 2^bits`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    bits: u32,
    powers: Vec<f64>,
}

impl PowerCurve {
    pub fn new(bits: u32, powers: Vec<f64>) -> Result<Self> {
        if bits == 0 || bits > 24 {
            return Err(RhevError::Config(format!(
                "delay resolution must be 1..=24 bits, got {bits}"
            )));
        }
        if powers.len() != 1usize << bits {
            return Err(RhevError::InvalidCurve(format!(
                "expected {} points for {bits} bits, got {}",
                1usize << bits,
                powers.len()
            )));
        }
        if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(RhevError::InvalidCurve(
                "powers must be finite and non-negative".into(),
            ));
        }
        Ok(Self { bits, powers })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn delay(&self, k: usize) -> f64 {
        k as f64 / self.powers.len() as f64
    }

    pub fn delays(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.delay(k)).collect()
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// Index of the largest power; the smallest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, p) in self.powers.iter().enumerate() {
            if *p > self.powers[best] {
                best = k;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.powers
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.powers.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.powers.iter().sum::<f64>() / self.len() as f64
    }

    /// `(max − min) / mean`.
    pub fn contrast(&self) -> f64 {
        (self.max() - self.min()) / self.mean()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseEstimator {
    /// Delay of the strongest grid point.
    #[default]
    Argmax,
    /// Least-squares fit of `c₀ + c₁cos2πη + c₂sin2πη`, maximum location.
    CosineFit,
}

/// Where the final amplitude ratio comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmplitudeSource {
    /// Max/min ratio of the delay sweep; single-channel powers pick the branch.
    #[default]
    Sweep,
    /// Square root of the single-channel power ratio.
    Sequential,
}

/// Side of unity the amplitude ratio lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `Δγ ≤ 1`
    Low,
    /// `Δγ > 1`
    High,
}

impl Branch {
    pub fn of(gamma: f64) -> Self {
        if gamma <= 1.0 {
            Branch::Low
        } else {
            Branch::High
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Low => "low",
            Branch::High => "high",
        }
    }
}

/// Evaluates `measure` at every delay `k / 2^bits`.
pub fn sweep_delay<F>(mut measure: F, bits: u32) -> Result<PowerCurve>
where
    F: FnMut(f64) -> Result<f64>,
{
    if bits == 0 || bits > 24 {
        return Err(RhevError::Config(format!(
            "delay resolution must be 1..=24 bits, got {bits}"
        )));
    }
    let steps = 1usize << bits;
    let powers = (0..steps)
        .map(|k| measure(k as f64 / steps as f64))
        .collect::<Result<Vec<_>>>()?;
    PowerCurve::new(bits, powers)
}

/// Phase difference of the test channel relative to the reference, wrapped
/// to `[-π, π)`.
pub fn estimate_phase(curve: &PowerCurve, estimator: PhaseEstimator) -> Result<f64> {
    let max = curve.max();
    if !(max > 0.0) || max - curve.min() < 1e-15 * max {
        return Err(RhevError::DegenerateCurve);
    }
    match estimator {
        PhaseEstimator::Argmax => Ok(wrap_phase(2.0 * PI * curve.delay(curve.argmax()))),
        PhaseEstimator::CosineFit => {
            let (_, c1, c2) = fit_sinusoid(curve).ok_or_else(|| {
                RhevError::InvalidCurve("cosine fit needs at least 3 delay points".into())
            })?;
            Ok(wrap_phase(c2.atan2(c1)))
        }
    }
}

/// Least-squares `c₀ + c₁cos2πη + c₂sin2πη` over the full grid. On a uniform
/// grid of three or more points cos and sin are orthogonal, so the normal
/// equations are diagonal.
fn fit_sinusoid(curve: &PowerCurve) -> Option<(f64, f64, f64)> {
    let k = curve.len();
    if k < 3 {
        return None;
    }
    let (mut c1, mut c2) = (0.0, 0.0);
    for (i, p) in curve.powers().iter().enumerate() {
        let x = 2.0 * PI * curve.delay(i);
        c1 += p * x.cos();
        c2 += p * x.sin();
    }
    let scale = 2.0 / k as f64;
    Some((curve.mean(), c1 * scale, c2 * scale))
}

/// The two amplitude ratios consistent with a delay sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeCandidates {
    /// `≤ 1`
    pub low: f64,
    /// `≥ 1`, reciprocal of `low`.
    pub high: f64,
    /// `P_max / P_min` after capping.
    pub power_ratio: f64,
}

/// Inverts `P_max/P_min = (1+Δγ)²/(1−Δγ)²` for both branches.
///
/// With three or more delay points the extremes are those of the fitted
/// sinusoid rather than of the grid samples, so an off-grid phase does not
/// bias the ratio. Two-point curves use the raw samples.
pub fn estimate_amplitude_ambiguous(curve: &PowerCurve) -> Result<AmplitudeCandidates> {
    let raw_max = curve.max();
    if !(raw_max > 0.0) || raw_max - curve.min() < 1e-15 * raw_max {
        return Err(RhevError::DegenerateCurve);
    }
    let (max, min) = match fit_sinusoid(curve) {
        Some((c0, c1, c2)) => {
            let swing = c1.hypot(c2);
            (c0 + swing, c0 - swing)
        }
        None => (raw_max, curve.min()),
    };
    if !(max > 0.0) || max - min < 1e-15 * max {
        return Err(RhevError::DegenerateCurve);
    }
    if min <= CANCELLATION_FLOOR * max {
        return Ok(AmplitudeCandidates {
            low: 1.0,
            high: 1.0,
            power_ratio: 1.0 / CANCELLATION_FLOOR,
        });
    }
    let power_ratio = max / min;
    let root = power_ratio.sqrt();
    let low = (root - 1.0) / (root + 1.0);
    Ok(AmplitudeCandidates {
        low,
        high: 1.0 / low,
        power_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedAmplitude {
    pub value: f64,
    /// `√(P_{1,n} / P_{1,ref})`
    pub sequential_ratio: f64,
    pub branch: Branch,
}

/// Picks the candidate on the same side of unity as the single-channel
/// power ratio.
pub fn resolve_amplitude(
    p_seq_n: f64,
    p_seq_ref: f64,
    candidates: &AmplitudeCandidates,
) -> Result<ResolvedAmplitude> {
    if !(p_seq_ref > 0.0) || !(p_seq_n > 0.0) {
        return Err(RhevError::DeadChannel);
    }
    let sequential_ratio = (p_seq_n / p_seq_ref).sqrt();
    let branch = Branch::of(sequential_ratio);
    let value = match branch {
        Branch::Low => candidates.low,
        Branch::High => candidates.high,
    };
    Ok(ResolvedAmplitude {
        value,
        sequential_ratio,
        branch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Equivalent phase resolution `N_be`.
    pub bits: u32,
    /// `+∞` disables noise.
    pub snr_db: f64,
    pub estimator: PhaseEstimator,
    pub amplitude_source: AmplitudeSource,
    /// Hz.
    pub modulation_frequency: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            bits: 6,
            snr_db: f64::INFINITY,
            estimator: PhaseEstimator::Argmax,
            amplitude_source: AmplitudeSource::Sweep,
            modulation_frequency: 10e6,
        }
    }
}

/// Synthesizes, adds noise, and extracts +1st-harmonic power for one schedule.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicProbe<'a> {
    pub aut: &'a ArrayUnderTest,
    pub source: &'a IncidentSource,
    pub sampling: &'a SamplingConfig,
    pub snr_db: f64,
    pub modulation_frequency: f64,
}

impl HarmonicProbe<'_> {
    fn noise_reference(&self) -> f64 {
        self.aut.reference_power() * self.source.power
    }

    pub fn power(&self, schedule: &ModulationSchedule, seed: u64) -> Result<f64> {
        let clean = synthesize_received(self.aut, self.source, schedule, self.sampling)?;
        let noisy = add_noise(clean, self.snr_db, self.noise_reference(), seed);
        Ok(extract_harmonic(&noisy, 1)?.power)
    }

    /// Reference at zero delay, `test` delayed by `eta`.
    pub fn two_channel(&self, test: usize, eta: f64, seed: u64) -> Result<f64> {
        let schedule =
            ModulationSchedule::two_channel(self.aut, test, eta, self.modulation_frequency)?;
        self.power(&schedule, seed)
    }

    /// Only `channel` modulated.
    pub fn single_channel(&self, channel: usize, seed: u64) -> Result<f64> {
        let schedule =
            ModulationSchedule::single_channel(self.aut, channel, self.modulation_frequency)?;
        self.power(&schedule, seed)
    }

    /// Full delay sweep of `test` against the reference.
    pub fn sweep(&self, test: usize, bits: u32, seed: u64) -> Result<PowerCurve> {
        sweep_delay(
            |eta| {
                let k = (eta * (1u64 << bits) as f64).round() as u64;
                self.two_channel(test, eta, derive_seed(seed, &[k]))
            },
            bits,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub channel: usize,
    pub amplitude_ratio: f64,
    /// Radians, wrapped.
    pub phase_difference: f64,
    pub branch: Branch,
    /// `P_r` of the delay sweep.
    pub power_ratio: f64,
    /// `P_{1,n}`
    pub sequential_power: f64,
    /// `√(P_{1,n} / P_{1,ref})`
    pub sequential_ratio: f64,
    pub curve: PowerCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub reference_index: usize,
    /// `P_{1,ref}`
    pub reference_sequential_power: f64,
    /// Non-reference channels in index order.
    pub channels: Vec<ChannelEstimate>,
    /// Number of harmonic power readings taken.
    pub measurement_count: usize,
}

impl CalibrationResult {
    pub fn imbalances(&self) -> Vec<ChannelImbalance> {
        self.channels
            .iter()
            .map(|c| ChannelImbalance {
                channel: c.channel,
                amplitude_ratio: c.amplitude_ratio,
                phase_difference: c.phase_difference,
            })
            .collect()
    }
}

/// Two-stage RHEV calibration of every non-reference channel.
///
/// Stage 1 modulates the reference and channel `n` together, sweeps the
/// relative delay over `2^bits` steps, and reads the phase difference and the
/// ambiguous amplitude pair off the curve. Stage 2 modulates each channel
/// alone and uses the single-channel powers to choose the branch. The known
/// spatial phase of the source direction is removed from the phase estimates.
pub fn calibrate_full(
    aut: &ArrayUnderTest,
    source: &IncidentSource,
    sampling: &SamplingConfig,
    options: &CalibrationOptions,
    seed: u64,
) -> Result<CalibrationResult> {
    let n = aut.element_count();
    if n < 2 {
        return Err(RhevError::InvalidArray(
            "calibration needs at least 2 elements".into(),
        ));
    }
    let probe = HarmonicProbe {
        aut,
        source,
        sampling,
        snr_db: options.snr_db,
        modulation_frequency: options.modulation_frequency,
    };
    let reference = aut.reference_index();

    let sequential = (0..n)
        .map(|ch| {
            probe
                .single_channel(ch, derive_seed(seed, &[2, ch as u64]))
                .map_err(|e| e.at_channel(ch))
        })
        .collect::<Result<Vec<_>>>()?;
    let p_ref = sequential[reference];

    let mut channels = Vec::with_capacity(n - 1);
    for ch in (0..n).filter(|&c| c != reference) {
        let estimate = (|| {
            let curve = probe.sweep(ch, options.bits, derive_seed(seed, &[1, ch as u64]))?;
            let raw_phase = estimate_phase(&curve, options.estimator)?;
            let spatial = aut.geometric_phase(ch, source.incident_angle)
                - aut.geometric_phase(reference, source.incident_angle);
            let candidates = estimate_amplitude_ambiguous(&curve)?;
            let resolved = resolve_amplitude(sequential[ch], p_ref, &candidates)?;
            let (amplitude_ratio, branch) = match options.amplitude_source {
                AmplitudeSource::Sweep => (resolved.value, resolved.branch),
                AmplitudeSource::Sequential => (resolved.sequential_ratio, resolved.branch),
            };
            Ok(ChannelEstimate {
                channel: ch,
                amplitude_ratio,
                phase_difference: wrap_phase(raw_phase - spatial),
                branch,
                power_ratio: candidates.power_ratio,
                sequential_power: sequential[ch],
                sequential_ratio: resolved.sequential_ratio,
                curve,
            })
        })()
        .map_err(|e: RhevError| e.at_channel(ch))?;
        channels.push(estimate);
    }

    Ok(CalibrationResult {
        reference_index: reference,
        reference_sequential_power: p_ref,
        channels,
        measurement_count: (n - 1) * (1usize << options.bits) + n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{preset_array, ChannelResponse};
    use crate::harmonics::harmonic_power_closed_form;
    use crate::units::db_to_amplitude;
    use num_complex::Complex64;

    fn alpha() -> Complex64 {
        Complex64::new(0.0, -2.0 / PI)
    }

    fn closed_curve(gamma: f64, dphi: f64, bits: u32) -> PowerCurve {
        sweep_delay(
            |eta| Ok(harmonic_power_closed_form(gamma, dphi, eta, 1.0, alpha())),
            bits,
        )
        .unwrap()
    }

    #[test]
    fn sweep_grid_and_extremes() {
        let c = closed_curve(1.0, 0.0, 6);
        assert_eq!(c.len(), 64);
        assert_eq!(c.argmax(), 0);
        let argmin = (0..64)
            .min_by(|&a, &b| c.powers()[a].total_cmp(&c.powers()[b]))
            .unwrap();
        assert_eq!(argmin, 32);
    }

    #[test]
    fn argmax_of_45_degree_curve() {
        let c = closed_curve(0.8, 45f64.to_radians(), 6);
        assert_eq!(c.argmax(), 8);
        let est = estimate_phase(&c, PhaseEstimator::Argmax).unwrap();
        assert!((est.to_degrees() - 45.0).abs() < 1e-12);
        for bits in 1..9 {
            let c = closed_curve(0.8, 0.0, bits);
            assert_eq!(estimate_phase(&c, PhaseEstimator::Argmax).unwrap(), 0.0);
        }
    }

    #[test]
    fn cosine_fit_is_exact_on_sinusoid() {
        for dphi in [-3.0, -1.0, 0.0, 0.37, 2.9] {
            let c = closed_curve(1.7, dphi, 4);
            let est = estimate_phase(&c, PhaseEstimator::CosineFit).unwrap();
            assert!((wrap_phase(est - dphi)).abs() < 1e-12);
        }
        assert!(estimate_phase(&closed_curve(1.0, 0.0, 1), PhaseEstimator::CosineFit).is_err());
    }

    #[test]
    fn flat_curve_is_degenerate() {
        let c = PowerCurve::new(3, vec![2.0; 8]).unwrap();
        assert_eq!(
            estimate_phase(&c, PhaseEstimator::Argmax),
            Err(RhevError::DegenerateCurve)
        );
        assert_eq!(
            estimate_amplitude_ambiguous(&c),
            Err(RhevError::DegenerateCurve)
        );
    }

    #[test]
    fn off_grid_phase_does_not_bias_amplitude() {
        let c = closed_curve(0.7, 0.123, 4);
        let a = estimate_amplitude_ambiguous(&c).unwrap();
        assert!((a.low - 0.7).abs() < 1e-12);
    }

    #[test]
    fn amplitude_candidates() {
        let c = PowerCurve::new(1, vec![9.0, 1.0]).unwrap();
        let a = estimate_amplitude_ambiguous(&c).unwrap();
        assert!((a.low - 0.5).abs() < 1e-15 && (a.high - 2.0).abs() < 1e-15);
        let z = PowerCurve::new(1, vec![4.0, 0.0]).unwrap();
        let a = estimate_amplitude_ambiguous(&z).unwrap();
        assert_eq!((a.low, a.high), (1.0, 1.0));
    }

    #[test]
    fn resolve_examples() {
        let cand = AmplitudeCandidates {
            low: 0.85,
            high: 1.0 / 0.85,
            power_ratio: 0.0,
        };
        let r = resolve_amplitude(0.7225, 1.0, &cand).unwrap();
        assert!((r.sequential_ratio - 0.85).abs() < 1e-15);
        assert_eq!(r.branch, Branch::Low);
        assert_eq!(r.value, 0.85);
        let one = AmplitudeCandidates {
            low: 1.0,
            high: 1.0,
            power_ratio: 1e12,
        };
        assert_eq!(resolve_amplitude(2.0, 2.0, &one).unwrap().value, 1.0);
        assert_eq!(
            resolve_amplitude(0.0, 1.0, &one),
            Err(RhevError::DeadChannel)
        );
        // −1.397 dB of power is −1.397 dB of amplitude
        let p = 10f64.powf(-1.397 / 10.0);
        let r = resolve_amplitude(p, 1.0, &cand).unwrap();
        let db = 20.0 * r.sequential_ratio.log10();
        assert!((db + 1.39).abs() < 0.01);
    }

    #[test]
    fn identity_array_calibrates_to_unity() {
        let aut = ArrayUnderTest::uniform(8, 0.5).unwrap();
        let r = calibrate_full(
            &aut,
            &IncidentSource::default(),
            &SamplingConfig::default(),
            &CalibrationOptions::default(),
            1,
        )
        .unwrap();
        assert_eq!(r.channels.len(), 7);
        assert_eq!(r.measurement_count, 7 * 64 + 8);
        for c in &r.channels {
            assert_eq!(c.phase_difference, 0.0);
            assert_eq!(c.amplitude_ratio, 1.0);
        }
    }

    #[test]
    fn noiseless_calibration_within_half_lsb() {
        for seed in 0..5 {
            let aut = preset_array(8, 6.0, 360.0, seed).unwrap();
            let r = calibrate_full(
                &aut,
                &IncidentSource::default(),
                &SamplingConfig::default(),
                &CalibrationOptions::default(),
                seed,
            )
            .unwrap();
            for (est, truth) in r.imbalances().iter().zip(aut.true_imbalances()) {
                let perr = wrap_phase(est.phase_difference - truth.phase_difference).abs();
                assert!(perr <= PI / 64.0 + 1e-12, "phase error {perr}");
                assert_eq!(
                    Branch::of(truth.amplitude_ratio),
                    r.channels[est.channel - 1].branch
                );
            }
        }
    }

    #[test]
    fn spatial_phase_is_removed() {
        let mut aut = ArrayUnderTest::uniform(4, 0.5).unwrap();
        aut.set_channel(2, ChannelResponse::new(db_to_amplitude(-2.0), 0.5).unwrap());
        let src = IncidentSource::new(2e9, 20f64.to_radians(), 1.0).unwrap();
        let opts = CalibrationOptions {
            estimator: PhaseEstimator::CosineFit,
            ..Default::default()
        };
        let r = calibrate_full(&aut, &src, &SamplingConfig::default(), &opts, 0).unwrap();
        assert!((r.channels[1].phase_difference - 0.5).abs() < 1e-9);
        assert!(r.channels[0].phase_difference.abs() < 1e-9);
        assert!((r.channels[1].amplitude_ratio - db_to_amplitude(-2.0)).abs() < 1e-9);
    }

    #[test]
    fn dead_reference_is_tagged() {
        // A vanishing reference yields a flat curve for every test channel.
        let mut aut = ArrayUnderTest::uniform(3, 0.5).unwrap();
        aut.set_channel(1, ChannelResponse::new(1e-200, 0.0).unwrap());
        let r = calibrate_full(
            &aut,
            &IncidentSource::default(),
            &SamplingConfig::default(),
            &CalibrationOptions::default(),
            0,
        );
        match r {
            Err(RhevError::Channel { channel, .. }) => assert_eq!(channel, 1),
            other => panic!("expected channel error, got {other:?}"),
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn argmax_within_half_step(gamma in 0.05f64..20.0, dphi in -PI..PI, bits in 2u32..9) {
                let c = closed_curve(gamma, dphi, bits);
                let est = estimate_phase(&c, PhaseEstimator::Argmax).unwrap();
                prop_assert!(wrap_phase(est - dphi).abs() <= PI / (1u64 << bits) as f64 + 1e-12);
            }

            #[test]
            fn candidates_round_trip(gamma in 0.05f64..20.0) {
                let pmax = (1.0 + gamma).powi(2);
                let pmin = (1.0 - gamma).powi(2);
                prop_assume!(pmin > 1e-9);
                let c = PowerCurve::new(1, vec![pmax, pmin]).unwrap();
                let a = estimate_amplitude_ambiguous(&c).unwrap();
                let got = if gamma <= 1.0 { a.low } else { a.high };
                prop_assert!((got - gamma).abs() / gamma < 1e-9);
            }
        }
    }
}
