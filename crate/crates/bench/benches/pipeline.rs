use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rhev_core::calibration::{calibrate_full, CalibrationOptions};
use rhev_core::{
    add_noise, extract_harmonic, preset_array, synthesize_received, IncidentSource,
    ModulationSchedule, SamplingConfig,
};

fn measurement(c: &mut Criterion) {
    let aut = preset_array(32, 6.0, 180.0, 1).unwrap();
    let src = IncidentSource::default();
    let sampling = SamplingConfig::default();
    let schedule = ModulationSchedule::two_channel(&aut, 5, 0.3, 10e6).unwrap();
    let stream = synthesize_received(&aut, &src, &schedule, &sampling).unwrap();

    c.bench_function("synthesize_32_elements", |b| {
        b.iter(|| synthesize_received(black_box(&aut), &src, &schedule, &sampling).unwrap())
    });
    c.bench_function("add_noise_1024", |b| {
        b.iter(|| add_noise(stream.clone(), 20.0, 1.0, black_box(7)))
    });
    c.bench_function("extract_harmonic_q1", |b| {
        b.iter(|| extract_harmonic(black_box(&stream), 1).unwrap())
    });
}

fn calibration(c: &mut Criterion) {
    let aut = preset_array(8, 6.0, 180.0, 2).unwrap();
    let src = IncidentSource::default();
    let sampling = SamplingConfig::default();
    let opts = CalibrationOptions {
        snr_db: 20.0,
        ..Default::default()
    };
    let mut g = c.benchmark_group("calibrate_full");
    g.sample_size(20);
    g.bench_function("8_elements_6_bit", |b| {
        b.iter(|| calibrate_full(black_box(&aut), &src, &sampling, &opts, 3).unwrap())
    });
    g.finish();
}

criterion_group!(benches, measurement, calibration);
criterion_main!(benches);
