use std::f64::consts::PI;

use num_complex::Complex64;

use crate::array::{ArrayUnderTest, ChannelImbalance};
use crate::calibration::CalibrationResult;
use crate::error::{Result, RhevError};
use crate::units::power_to_db;

/// Floor for normalized pattern values, dB.
const PATTERN_FLOOR_DB: f64 = -300.0;

/// 721 points over `[-90°, 90°]`.
pub fn default_angle_grid() -> Vec<f64> {
    (0..721)
        .map(|i| (-90.0 + 0.25 * i as f64).to_radians())
        .collect()
}

/// Per-element compensation `w_n = e^{-jΔφ̂_n} / Δγ̂_n`, reference weight 1.
///
/// With `quantize_phase_bits` the weight phase snaps to the nearest of
/// `2^bits` shifter states.
pub fn compensation_weights(
    result: &CalibrationResult,
    quantize_phase_bits: Option<u32>,
) -> Result<Vec<Complex64>> {
    weights_from_imbalances(
        result.channels.len() + 1,
        result.reference_index,
        &result.imbalances(),
        quantize_phase_bits,
    )
}

pub fn weights_from_imbalances(
    element_count: usize,
    reference_index: usize,
    imbalances: &[ChannelImbalance],
    quantize_phase_bits: Option<u32>,
) -> Result<Vec<Complex64>> {
    let mut w = vec![Complex64::new(1.0, 0.0); element_count];
    for imb in imbalances {
        if imb.channel >= element_count || imb.channel == reference_index {
            return Err(RhevError::Config(format!(
                "imbalance for invalid channel {}",
                imb.channel
            )));
        }
        if !(imb.amplitude_ratio > 0.0) {
            return Err(RhevError::DeadChannel.at_channel(imb.channel));
        }
        let mut phase = -imb.phase_difference;
        if let Some(bits) = quantize_phase_bits {
            let step = 2.0 * PI / (1u64 << bits) as f64;
            phase = (phase / step).round() * step;
        }
        w[imb.channel] = Complex64::from_polar(1.0 / imb.amplitude_ratio, phase);
    }
    Ok(w)
}

/// Progressive phase that points the beam at `angle`.
pub fn steering_weights(element_count: usize, spacing: f64, angle: f64) -> Vec<Complex64> {
    (0..element_count)
        .map(|n| Complex64::from_polar(1.0, -2.0 * PI * spacing * n as f64 * angle.sin()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternReport {
    /// Radians.
    pub angles: Vec<f64>,
    /// Steering only, dB normalized to the grid maximum.
    pub before_db: Vec<f64>,
    /// Steering and compensation.
    pub after_db: Vec<f64>,
    /// Steering on an imbalance-free array.
    pub ideal_db: Vec<f64>,
    /// Peak of the compensated pattern, radians.
    pub peak_direction: f64,
    /// Change in coherent combining gain from compensation, dB.
    pub gain_delta_db: f64,
    /// Peak sidelobe outside the first nulls; `None` when no null exists.
    pub sll_before_db: Option<f64>,
    pub sll_after_db: Option<f64>,
    pub sll_ideal_db: Option<f64>,
}

fn raw_pattern(coeffs: &[Complex64], spacing: f64, angles: &[f64]) -> Vec<f64> {
    angles
        .iter()
        .map(|th| {
            let k = 2.0 * PI * spacing * th.sin();
            coeffs
                .iter()
                .enumerate()
                .map(|(n, c)| c * Complex64::from_polar(1.0, k * n as f64))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect()
}

fn peak_index(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

fn normalize(p: &[f64]) -> Vec<f64> {
    let max = p[peak_index(p)];
    p.iter()
        .map(|v| {
            if max > 0.0 {
                power_to_db(v / max, PATTERN_FLOOR_DB)
            } else {
                0.0
            }
        })
        .collect()
}

/// Highest level outside the first local minima on either side of the peak.
fn sidelobe_level(db: &[f64]) -> Option<f64> {
    let peak = peak_index(db);
    let mut left = peak;
    while left > 0 && db[left - 1] <= db[left] {
        left -= 1;
    }
    let mut right = peak;
    while right + 1 < db.len() && db[right + 1] <= db[right] {
        right += 1;
    }
    let left_null = left > 0;
    let right_null = right + 1 < db.len();
    let mut sll: Option<f64> = None;
    if left_null {
        sll = db[..left].iter().copied().reduce(f64::max);
    }
    if right_null {
        let r = db[right + 1..].iter().copied().reduce(f64::max);
        sll = match (sll, r) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }
    sll
}

/// Power patterns of `aut` before and after applying `weights`, with the
/// beam steered to `steer_angle`.
///
/// The gain delta compares `max|AF|² / Σ|w_n·a_n|²`, which is at most `N`
/// and reaches `N` only for co-phased, equal-amplitude excitation.
pub fn array_factor(
    aut: &ArrayUnderTest,
    weights: &[Complex64],
    steer_angle: f64,
    angles: &[f64],
) -> Result<PatternReport> {
    let n = aut.element_count();
    if angles.is_empty() {
        return Err(RhevError::Config("empty angle grid".into()));
    }
    if weights.len() != n {
        return Err(RhevError::Config(format!(
            "{} weights for {n} elements",
            weights.len()
        )));
    }
    let steer = steering_weights(n, aut.spacing(), steer_angle);
    let before: Vec<Complex64> = aut
        .channels()
        .iter()
        .zip(&steer)
        .map(|(c, s)| c.complex() * s)
        .collect();
    let after: Vec<Complex64> = before.iter().zip(weights).map(|(b, w)| b * w).collect();

    let p_before = raw_pattern(&before, aut.spacing(), angles);
    let p_after = raw_pattern(&after, aut.spacing(), angles);
    let p_ideal = raw_pattern(&steer, aut.spacing(), angles);

    let gain =
        |p: &[f64], c: &[Complex64]| p[peak_index(p)] / c.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let gain_delta_db = 10.0 * (gain(&p_after, &after) / gain(&p_before, &before)).log10();

    let before_db = normalize(&p_before);
    let after_db = normalize(&p_after);
    let ideal_db = normalize(&p_ideal);
    Ok(PatternReport {
        peak_direction: angles[peak_index(&p_after)],
        gain_delta_db,
        sll_before_db: sidelobe_level(&before_db),
        sll_after_db: sidelobe_level(&after_db),
        sll_ideal_db: sidelobe_level(&ideal_db),
        angles: angles.to_vec(),
        before_db,
        after_db,
        ideal_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::preset_array;
    use crate::array::IncidentSource;
    use crate::calibration::{calibrate_full, CalibrationOptions};
    use crate::signal::SamplingConfig;

    fn ones(n: usize) -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0); n]
    }

    #[test]
    fn uniform_eight_element_pattern() {
        let aut = ArrayUnderTest::uniform(8, 0.5).unwrap();
        let r = array_factor(&aut, &ones(8), 0.0, &default_angle_grid()).unwrap();
        assert_eq!(r.peak_direction, 0.0);
        let sll = r.sll_ideal_db.unwrap();
        assert!((sll + 12.8).abs() < 0.2, "sll {sll}");
        assert_eq!(
            r.after_db.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            0.0
        );
        assert!(r.gain_delta_db.abs() < 1e-12);
    }

    #[test]
    fn single_element_is_flat() {
        let aut = ArrayUnderTest::uniform(1, 0.5).unwrap();
        let r = array_factor(&aut, &ones(1), 0.0, &default_angle_grid()).unwrap();
        assert!(r.after_db.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(r.sll_after_db, None);
    }

    #[test]
    fn argument_checks() {
        let aut = ArrayUnderTest::uniform(4, 0.5).unwrap();
        assert!(array_factor(&aut, &ones(4), 0.0, &[]).is_err());
        assert!(array_factor(&aut, &ones(3), 0.0, &[0.0]).is_err());
    }

    #[test]
    fn weight_examples() {
        let imb = [ChannelImbalance {
            channel: 1,
            amplitude_ratio: 2.0,
            phase_difference: PI / 2.0,
        }];
        let w = weights_from_imbalances(2, 0, &imb, None).unwrap();
        assert_eq!(w[0], Complex64::new(1.0, 0.0));
        assert!((w[1] - Complex64::new(0.0, -0.5)).norm() < 1e-15);

        let imb = [ChannelImbalance {
            channel: 1,
            amplitude_ratio: 1.0,
            phase_difference: 19.7f64.to_radians(),
        }];
        let w = weights_from_imbalances(2, 0, &imb, Some(4)).unwrap();
        assert!((w[1].arg().to_degrees() + 22.5).abs() < 1e-12);

        let dead = [ChannelImbalance {
            channel: 1,
            amplitude_ratio: 0.0,
            phase_difference: 0.0,
        }];
        assert!(weights_from_imbalances(2, 0, &dead, None).is_err());
    }

    #[test]
    fn identity_result_gives_unit_weights() {
        let aut = ArrayUnderTest::uniform(4, 0.5).unwrap();
        let r = calibrate_full(
            &aut,
            &IncidentSource::default(),
            &SamplingConfig::default(),
            &CalibrationOptions::default(),
            0,
        )
        .unwrap();
        assert!(compensation_weights(&r, None)
            .unwrap()
            .iter()
            .all(|w| *w == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn compensation_never_loses_gain() {
        for seed in 0..5 {
            let aut = preset_array(8, 6.0, 180.0, seed).unwrap();
            let w = weights_from_imbalances(8, 0, &aut.true_imbalances(), None).unwrap();
            let r = array_factor(&aut, &w, 0.0, &default_angle_grid()).unwrap();
            assert!(r.gain_delta_db >= -1e-12);
            assert_eq!(r.peak_direction, 0.0);
            for (a, i) in r.after_db.iter().zip(&r.ideal_db) {
                assert!((a - i).abs() < 1e-6 || *i < -100.0);
            }
        }
    }
}
