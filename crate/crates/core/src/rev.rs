//! Rotating-element electric-field vector (REV) baseline.
//!
//! One element's multi-bit shifter steps through `2^bits` states while the
//! rest of the array stays static; the combined fundamental power traces
//! `|R + E·e^{jθ}|²`. A cosine fit recovers the element field relative to the
//! rest of the array, up to a ratio/reciprocal ambiguity.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::array::{
    ArrayUnderTest, ChannelDrive, ChannelImbalance, IncidentSource, ModulationSchedule,
    ShifterState,
};
use crate::error::{Result, RhevError};
use crate::harmonics::extract_harmonic;
use crate::seed::{derive_seed, rng_from_seed};
use crate::signal::{add_noise, synthesize_received, SamplingConfig};
use crate::units::wrap_phase;

/// Nominal schedule rate for REV records; nothing is modulated, so it only
/// sets the record's sample clock.
const REV_RECORD_RATE: f64 = 10e6;

#[derive(Debug, Clone, PartialEq)]
pub struct RevCurve {
    bits: u32,
    phase_states: Vec<f64>,
    realized_phases: Vec<f64>,
    powers: Vec<f64>,
}

impl RevCurve {
    /// `state_errors` is indexed by state; an empty slice means an ideal shifter.
    pub fn new(bits: u32, state_errors: &[f64], powers: Vec<f64>) -> Result<Self> {
        if bits == 0 || bits > 16 {
            return Err(RhevError::Config(format!(
                "shifter resolution must be 1..=16 bits, got {bits}"
            )));
        }
        let steps = 1usize << bits;
        if powers.len() != steps {
            return Err(RhevError::InvalidCurve(format!(
                "expected {steps} powers, got {}",
                powers.len()
            )));
        }
        if !state_errors.is_empty() && state_errors.len() != steps {
            return Err(RhevError::Config(format!(
                "expected {steps} per-state errors, got {}",
                state_errors.len()
            )));
        }
        if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(RhevError::InvalidCurve(
                "powers must be finite and non-negative".into(),
            ));
        }
        let phase_states: Vec<f64> = (0..steps)
            .map(|k| 2.0 * PI * k as f64 / steps as f64)
            .collect();
        let realized_phases = phase_states
            .iter()
            .enumerate()
            .map(|(k, th)| th + state_errors.get(k).copied().unwrap_or(0.0))
            .collect();
        Ok(Self {
            bits,
            phase_states,
            realized_phases,
            powers,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn phase_states(&self) -> &[f64] {
        &self.phase_states
    }

    pub fn realized_phases(&self) -> &[f64] {
        &self.realized_phases
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn contrast(&self) -> f64 {
        let max = self
            .powers
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let min = self.powers.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = self.powers.iter().sum::<f64>() / self.powers.len() as f64;
        (max - min) / mean
    }
}

/// Fixed per-state shifter errors drawn uniformly from `±max_error`.
pub fn draw_state_errors(bits: u32, max_error: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..1usize << bits)
        .map(|_| {
            if max_error > 0.0 {
                rng.random_range(-max_error..=max_error)
            } else {
                0.0
            }
        })
        .collect()
}

/// Steps `element` through every shifter state and records DC power.
#[allow(clippy::too_many_arguments)]
pub fn rev_sweep(
    aut: &ArrayUnderTest,
    source: &IncidentSource,
    element: usize,
    bits: u32,
    state_errors: &[f64],
    snr_db: f64,
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<RevCurve> {
    let n = aut.element_count();
    if element >= n {
        return Err(RhevError::Config(format!(
            "element {element} outside a {n}-element array"
        )));
    }
    let template = RevCurve::new(bits, state_errors, vec![0.0; 1usize << bits])?;
    let noise_ref = aut.reference_power() * source.power;
    let mut drives = vec![ChannelDrive::Static(ShifterState::Zero); n];
    let powers = template
        .realized_phases
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            drives[element] = ChannelDrive::Rotated(theta);
            let schedule = ModulationSchedule::new(drives.clone(), REV_RECORD_RATE)?;
            let clean = synthesize_received(aut, source, &schedule, sampling)?;
            let noisy = add_noise(clean, snr_db, noise_ref, derive_seed(seed, &[k as u64]));
            Ok(extract_harmonic(&noisy, 0)?.power)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RevCurve { powers, ..template })
}

/// Element field relative to the rest of the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevEstimate {
    /// `arg(E / R)`, radians.
    pub phase_difference: f64,
    /// `|E|/|R|` candidates `(k, 1/k)` with `k ≤ 1`.
    pub amplitude_candidates: (f64, f64),
}

/// Least-squares cosine fit on the commanded states.
pub fn rev_estimate(curve: &RevCurve) -> Result<RevEstimate> {
    let k = curve.powers.len() as f64;
    if k < 3.0 {
        return Err(RhevError::InvalidCurve(
            "cosine fit needs at least 3 states".into(),
        ));
    }
    let c0 = curve.powers.iter().sum::<f64>() / k;
    let (mut c1, mut c2) = (0.0, 0.0);
    for (p, th) in curve.powers.iter().zip(&curve.phase_states) {
        c1 += p * th.cos();
        c2 += p * th.sin();
    }
    c1 *= 2.0 / k;
    c2 *= 2.0 / k;
    if !(c0 > 0.0) {
        return Err(RhevError::InvalidCurve("non-positive mean power".into()));
    }
    let swing = c1.hypot(c2);
    if !(swing > 1e-15 * c0) {
        return Err(RhevError::InvalidCurve(
            "flat curve: the rotated element contributes nothing".into(),
        ));
    }
    // |R + E e^{jθ}|² = |R|² + |E|² + 2|R||E|cos(θ + arg E − arg R)
    let r = (swing / c0).min(1.0);
    let small = (1.0 - (1.0 - r * r).sqrt()) / r;
    Ok(RevEstimate {
        phase_difference: wrap_phase((-c2).atan2(c1)),
        amplitude_candidates: (small, 1.0 / small),
    })
}

/// Full REV calibration of every non-reference channel.
///
/// Each sweep yields `X_n = E_n / (S − E_n)` with `S` the full array sum, so
/// `E_n ∝ X_n / (1 + X_n)`. The small root of the amplitude ambiguity is used,
/// which holds whenever one element is weaker than the rest combined.
#[allow(clippy::too_many_arguments)]
pub fn rev_calibrate(
    aut: &ArrayUnderTest,
    source: &IncidentSource,
    bits: u32,
    state_errors: &[Vec<f64>],
    snr_db: f64,
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<Vec<ChannelImbalance>> {
    let n = aut.element_count();
    if n < 2 {
        return Err(RhevError::InvalidArray(
            "calibration needs at least 2 elements".into(),
        ));
    }
    if state_errors.len() != n && !state_errors.is_empty() {
        return Err(RhevError::Config(format!(
            "expected shifter errors for {n} elements, got {}",
            state_errors.len()
        )));
    }
    let fields = (0..n)
        .map(|ch| {
            let errs = state_errors.get(ch).map(Vec::as_slice).unwrap_or(&[]);
            let curve = rev_sweep(
                aut,
                source,
                ch,
                bits,
                errs,
                snr_db,
                sampling,
                derive_seed(seed, &[ch as u64]),
            )?;
            let est = rev_estimate(&curve)?;
            let x = Complex64::from_polar(est.amplitude_candidates.0, est.phase_difference);
            Ok(x / (1.0 + x))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e: RhevError| e)?;

    let reference = aut.reference_index();
    let ref_geo = aut.geometric_phase(reference, source.incident_angle);
    Ok((0..n)
        .filter(|&c| c != reference)
        .map(|c| {
            let ratio = fields[c] / fields[reference];
            let geo = aut.geometric_phase(c, source.incident_angle) - ref_geo;
            ChannelImbalance {
                channel: c,
                amplitude_ratio: ratio.norm(),
                phase_difference: wrap_phase(ratio.arg() - geo),
            }
        })
        .collect())
}
