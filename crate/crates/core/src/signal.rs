//! Baseband synthesis of the combined array output and additive noise.
//!
//! The carrier `e^{j2πf_c t}` is dropped: it rotates every channel equally, so
//! the harmonic at `f_c + q·f_p` shows up at baseband bin `q·f_p`.
//!
//! Two receiver models are available. [`SampleModel::BandLimited`] (default)
//! samples the switching waveforms after an ideal anti-aliasing filter: every
//! harmonic `|q| < S/2` is kept exactly and everything above is removed. The
//! DFT bins of such a stream equal the continuous Fourier coefficients for any
//! delay, on or off the sample grid. [`SampleModel::Instantaneous`] samples the
//! ideal square waves point by point, so the stream takes only the switching
//! levels but the higher harmonics alias into the analysed bins.

use std::cell::RefCell;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::array::{ArrayUnderTest, ChannelDrive, IncidentSource, ModulationSchedule};
use crate::error::{Result, RhevError};
use crate::harmonics::fourier_coefficient;
use crate::seed::rng_from_seed;

/// How the receiver turns the switched waveforms into samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleModel {
    #[default]
    BandLimited,
    Instantaneous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    /// `f_s / f_p`, a power of two.
    pub samples_per_period: usize,
    /// Number of whole modulation periods in a record.
    pub period_count: usize,
    pub model: SampleModel,
}

impl SamplingConfig {
    pub fn new(samples_per_period: usize, period_count: usize, model: SampleModel) -> Result<Self> {
        if !samples_per_period.is_power_of_two() || samples_per_period < 4 {
            return Err(RhevError::Config(format!(
                "samples per period must be a power of two and at least 4, got {samples_per_period}"
            )));
        }
        if period_count == 0 {
            return Err(RhevError::Config("period count must be at least 1".into()));
        }
        Ok(Self {
            samples_per_period,
            period_count,
            model,
        })
    }

    pub fn total_samples(&self) -> usize {
        self.samples_per_period * self.period_count
    }
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            samples_per_period: 64,
            period_count: 16,
            model: SampleModel::BandLimited,
        }
    }
}

/// Baseband samples of the combined array output.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSampleStream {
    samples: Vec<Complex64>,
    sample_rate: f64,
    modulation_frequency: f64,
    samples_per_period: usize,
}

impl ComplexSampleStream {
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Hz.
    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Hz.
    pub fn modulation_frequency(&self) -> f64 {
        self.modulation_frequency
    }

    pub fn samples_per_period(&self) -> usize {
        self.samples_per_period
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// One band-limited period of `Σ_n e_n·U_n(t)` via an inverse DFT of the
/// summed Fourier coefficients.
fn band_limited_period(
    modulated: &[(Complex64, crate::array::ModulationWaveform)],
    s: usize,
) -> Vec<Complex64> {
    let mut bins = vec![Complex64::new(0.0, 0.0); s];
    let half = (s / 2) as i32;
    for (excitation, w) in modulated {
        // The Nyquist bin is left empty; its order is ambiguous in sign.
        for q in (1 - half)..half {
            let c = fourier_coefficient(w, q);
            if c.re != 0.0 || c.im != 0.0 {
                bins[(q as i64).rem_euclid(s as i64) as usize] += excitation * c;
            }
        }
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(s));
    fft.process(&mut bins);
    bins
}

/// Noiseless baseband record of the array output under `schedule`.
///
/// Each channel contributes `V_n(t)·A_n·e^{j(φ_n + k·d·n·sinθ)}`, where `V_n`
/// is the switching waveform of a modulated channel, the realized state phasor
/// of a static one, or `e^{jθ}` for a rotated one.
pub fn synthesize_received(
    aut: &ArrayUnderTest,
    source: &IncidentSource,
    schedule: &ModulationSchedule,
    sampling: &SamplingConfig,
) -> Result<ComplexSampleStream> {
    if schedule.len() != aut.element_count() {
        return Err(RhevError::Config(format!(
            "schedule has {} entries but the array has {} elements",
            schedule.len(),
            aut.element_count()
        )));
    }
    let s = sampling.samples_per_period;
    let mut static_sum = Complex64::new(0.0, 0.0);
    let mut modulated = Vec::new();
    for (n, drive) in schedule.drives().iter().enumerate() {
        let e = aut.incident_excitation(n, source);
        match drive {
            ChannelDrive::Static(state) => static_sum += e * aut.channel(n).state_phasor(*state),
            ChannelDrive::Rotated(phase) => static_sum += e * Complex64::from_polar(1.0, *phase),
            ChannelDrive::Modulated(w) => modulated.push((e, *w)),
        }
    }

    let mut period = match sampling.model {
        SampleModel::BandLimited if !modulated.is_empty() => band_limited_period(&modulated, s),
        SampleModel::BandLimited => vec![Complex64::new(0.0, 0.0); s],
        SampleModel::Instantaneous => (0..s)
            .map(|i| {
                let u = i as f64 / s as f64;
                modulated
                    .iter()
                    .map(|(e, w)| e * w.value_at_fraction(u))
                    .sum()
            })
            .collect(),
    };
    if modulated.is_empty() {
        period.fill(static_sum);
    } else {
        for x in &mut period {
            *x += static_sum;
        }
    }

    let samples = period.repeat(sampling.period_count);
    let fp = schedule.modulation_frequency();
    Ok(ComplexSampleStream {
        samples,
        sample_rate: fp * s as f64,
        modulation_frequency: fp,
        samples_per_period: s,
    })
}

/// Adds circular complex white Gaussian noise of per-sample variance
/// `reference_power / 10^(snr_db/10)`.
///
/// `snr_db = +∞` returns the stream unchanged.
pub fn add_noise(
    mut stream: ComplexSampleStream,
    snr_db: f64,
    reference_power: f64,
    seed: u64,
) -> ComplexSampleStream {
    if snr_db == f64::INFINITY {
        return stream;
    }
    let variance = reference_power / 10f64.powf(snr_db / 10.0);
    let sigma = (variance / 2.0).sqrt();
    let mut rng = rng_from_seed(seed);
    for x in &mut stream.samples {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *x += Complex64::new(sigma * re, sigma * im);
    }
    stream
}
