use rand::Rng;
use rayon::prelude::*;

use super::{ErrorModel, Method, Scenario};
use crate::array::{preset_array, ArrayUnderTest};
use crate::calibration::{calibrate_full, CalibrationOptions};
use crate::error::{Result, RhevError};
use crate::rev::{draw_state_errors, rev_calibrate};
use crate::seed::{derive_seed, rng_from_seed};
use crate::units::wrap_phase;

/// Seed-path tag for the fixed REV shifter hardware of a scenario.
const REV_HARDWARE: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Snr,
    ArraySize,
    Bits,
    /// Degrees of 1-bit shifter error.
    PhaseError,
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr_db",
            SweepAxis::ArraySize => "elements",
            SweepAxis::Bits => "bits",
            SweepAxis::PhaseError => "phase_error_deg",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(&self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        let integral = |what: &str| {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(RhevError::Config(format!(
                    "{what} must be a positive integer, got {value}"
                )))
            }
        };
        match self {
            SweepAxis::Snr => s.snr_db = value,
            SweepAxis::ArraySize => {
                s.elements = integral("array size")?;
                s.fixed_array = None;
            }
            SweepAxis::Bits => s.bits = integral("bits")? as u32,
            SweepAxis::PhaseError => {
                let rad = value.to_radians();
                s.error_model = match base.error_model {
                    ErrorModel::PerChannel(_) => ErrorModel::PerChannel(rad.abs()),
                    _ => ErrorModel::Common(rad),
                };
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsePoint {
    /// Linear amplitude ratio.
    pub rmse_amplitude_ratio: f64,
    /// Radians.
    pub rmse_phase_difference: f64,
    /// Trials that completed.
    pub trials: usize,
    /// Trials that failed and were left out.
    pub excluded: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub points: Vec<RmsePoint>,
}

fn trial_array(s: &Scenario, trial_seed: u64) -> Result<ArrayUnderTest> {
    let mut aut = match &s.fixed_array {
        Some(a) => a.clone(),
        None => {
            let p = preset_array(
                s.elements,
                s.amp_spread_db,
                s.phase_spread_deg,
                derive_seed(trial_seed, &[0]),
            )?;
            ArrayUnderTest::new(p.channels().to_vec(), s.spacing)?
        }
    };
    match s.error_model {
        ErrorModel::None => {}
        ErrorModel::Common(e) => aut = aut.with_common_state_errors(0.0, e),
        ErrorModel::PerChannel(max) => {
            let mut rng = rng_from_seed(derive_seed(trial_seed, &[1]));
            for i in 0..aut.element_count() {
                let e = if max > 0.0 {
                    rng.random_range(-max..=max)
                } else {
                    0.0
                };
                let ch = aut.channel_mut(i);
                ch.state0_error = 0.0;
                ch.state1_error = e;
            }
        }
    }
    Ok(aut)
}

/// Amplitude-ratio and wrapped phase errors of every non-reference channel
/// for one trial.
pub fn trial_errors(s: &Scenario, trial: usize) -> Result<Vec<(f64, f64)>> {
    let ts = derive_seed(s.seed, &[trial as u64]);
    let aut = trial_array(s, ts)?;
    let estimates = match s.method {
        Method::Rhev => {
            let opts = CalibrationOptions {
                bits: s.bits,
                snr_db: s.snr_db,
                estimator: s.estimator,
                amplitude_source: s.amplitude_source,
                modulation_frequency: s.modulation_frequency,
            };
            calibrate_full(&aut, &s.source, &s.sampling, &opts, derive_seed(ts, &[2]))?.imbalances()
        }
        Method::Rev => {
            let hardware: Vec<Vec<f64>> = (0..aut.element_count())
                .map(|ch| {
                    draw_state_errors(
                        s.bits,
                        s.rev_state_error,
                        derive_seed(s.seed, &[REV_HARDWARE, ch as u64]),
                    )
                })
                .collect();
            rev_calibrate(
                &aut,
                &s.source,
                s.bits,
                &hardware,
                s.snr_db,
                &s.sampling,
                derive_seed(ts, &[2]),
            )?
        }
    };
    Ok(estimates
        .iter()
        .zip(aut.true_imbalances())
        .map(|(e, t)| {
            (
                e.amplitude_ratio - t.amplitude_ratio,
                wrap_phase(e.phase_difference - t.phase_difference),
            )
        })
        .collect())
}

/// Runs `scenario.trials` independent trials.
///
/// RMSE is taken per channel over trials and averaged over all `N` elements;
/// the reference contributes zero error. Failed trials are excluded and
/// counted; the point fails only if every trial does.
pub fn monte_carlo(scenario: &Scenario) -> Result<RmsePoint> {
    scenario.validate()?;
    let outcomes: Vec<Result<Vec<(f64, f64)>>> = (0..scenario.trials)
        .into_par_iter()
        .map(|m| trial_errors(scenario, m))
        .collect();

    let n = scenario
        .fixed_array
        .as_ref()
        .map_or(scenario.elements, |a| a.element_count());
    let mut sq_amp = vec![0.0; n - 1];
    let mut sq_phase = vec![0.0; n - 1];
    let mut ok = 0usize;
    let mut first_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(errors) => {
                ok += 1;
                for (i, (a, p)) in errors.into_iter().enumerate() {
                    sq_amp[i] += a * a;
                    sq_phase[i] += p * p;
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if ok == 0 {
        return Err(first_error.expect("at least one trial ran"));
    }
    let rmse = |sq: &[f64]| sq.iter().map(|s| (s / ok as f64).sqrt()).sum::<f64>() / n as f64;
    Ok(RmsePoint {
        rmse_amplitude_ratio: rmse(&sq_amp),
        rmse_phase_difference: rmse(&sq_phase),
        trials: ok,
        excluded: scenario.trials - ok,
        seed: scenario.seed,
    })
}

/// Runs [`monte_carlo`] at each axis value with everything else fixed.
///
/// Every point reuses the base seed, so trial `m` sees the same preset draw
/// and noise seeds at each value (common random numbers).
pub fn sweep_scenario(base: &Scenario, axis: SweepAxis, values: &[f64]) -> Result<RmseReport> {
    if values.is_empty() {
        return Err(RhevError::Config("sweep needs at least one value".into()));
    }
    let points = values
        .iter()
        .map(|&v| monte_carlo(&axis.apply(base, v)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(RmseReport {
        axis,
        values: values.to_vec(),
        points,
    })
}
